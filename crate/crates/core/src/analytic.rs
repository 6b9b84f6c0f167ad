//! Closed-form pressure histories.
//!
//! Constant compliance gives a linear first-order equation relaxing at
//! `nu_a = 1/(C0 R_a)`. The hyperbolic law `C = 1/(kP)` turns the balance into
//! the Riccati equation
//!
//! ```text
//! dP/dt = alpha (P_eq + R_a S(t)) P - alpha P^2,    alpha = k / R_a
//! ```
//!
//! which `p = 1/P` linearises. With piecewise-constant `S` the linear equation
//! is solved on each interval and the constants are fixed by continuity of `p`.

use serde::{Deserialize, Serialize};

use crate::error::{finite, non_negative, positive, Error, Result};
use crate::model::{equilibrium_pressure, shunted_fixed_point, ComplianceModel, ShuntValve, SystemParams};

/// Forcing for which the constant-compliance model has a closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinearScenario {
    NoSource,
    /// Pressure pulse `P_bar = S_0 / C0` at `time`.
    ImpulseBolus { pulse: f64, time: f64 },
    ConstantInfusion { rate: f64, resistance: f64, start: f64 },
    Shunt {
        resistance: f64,
        opening_pressure: f64,
        start: f64,
    },
}

/// Forcing for which the hyperbolic model has a closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RiccatiScenario {
    NoSource,
    FiniteBolus(FiniteBolus),
    /// Volume `volume` added at `t = 0` to a system resting at `P_eq`.
    InstantBolus { volume: f64 },
    /// Volume `withdrawn` removed at `t = 0` from `P_eq`, with absorption off until `gate`.
    GatedGrowth { withdrawn: f64, gate: f64 },
    /// Infusion at `rate` from `start`, system resting at `P_eq`.
    ConstantInfusion { rate: f64, start: f64 },
}

/// Rectangular source `S_b` on `[start, start + duration)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteBolus {
    pub rate: f64,
    pub start: f64,
    pub duration: f64,
}

fn check_time(t: f64) -> Result<f64> {
    if t.is_finite() && t >= 0.0 {
        Ok(t)
    } else {
        Err(Error::OutOfRegime {
            solution: "closed-form solution",
            time: t,
            valid: "t >= 0".into(),
        })
    }
}

fn step(t: f64, t0: f64) -> f64 {
    if t >= t0 {
        1.0
    } else {
        0.0
    }
}

fn constant_c0(model: &ComplianceModel) -> Result<f64> {
    match *model {
        ComplianceModel::Constant { c0 } => positive("C_0", c0),
        other => Err(Error::Unsupported {
            operation: "linear_solve",
            law: other.law_name(),
        }),
    }
}

/// Constant-compliance pressure at time `t` for one of the linear scenarios.
pub fn linear_solve(
    scenario: &LinearScenario,
    params: &SystemParams,
    compliance: &ComplianceModel,
    t: f64,
) -> Result<f64> {
    let c0 = constant_c0(compliance)?;
    let t = check_time(t)?;
    params.validate()?;
    let r_a = params.absorption_resistance;
    let nu_a = 1.0 / (c0 * r_a);
    let p_eq = equilibrium_pressure(params);
    let p0 = params.initial_pressure;
    let relax = |t: f64| p_eq + (p0 - p_eq) * (-nu_a * t).exp();

    let p = match *scenario {
        LinearScenario::NoSource => relax(t),
        LinearScenario::ImpulseBolus { pulse, time } => {
            finite("P_bar", pulse)?;
            non_negative("t_0", time)?;
            relax(t) + pulse * step(t, time) * (-nu_a * (t - time).max(0.0)).exp()
        }
        LinearScenario::ConstantInfusion {
            rate,
            resistance,
            start,
        } => {
            non_negative("S_i", rate)?;
            positive("R_i", resistance)?;
            non_negative("t_i", start)?;
            let nu_i = 1.0 / (c0 * resistance);
            let p_i = resistance * rate;
            let elapsed = (t - start).max(0.0);
            relax(t) + (nu_i / nu_a) * p_i * (1.0 - (-nu_a * elapsed).exp()) * step(t, start)
        }
        LinearScenario::Shunt {
            resistance,
            opening_pressure,
            start,
        } => {
            non_negative("t_s", start)?;
            let shunted = params.with_shunt(ShuntValve {
                resistance,
                opening_pressure,
                activation_time: start,
            });
            shunted.validate()?;
            if t < start {
                relax(t)
            } else {
                let fixed = shunted_fixed_point(&shunted)?.mass_balance;
                let at_switch = relax(start);
                if at_switch < opening_pressure {
                    return Err(Error::OutOfRegime {
                        solution: "linear shunt solution",
                        time: t,
                        valid: format!(
                            "P(t_s) >= P_op; P(t_s) = {at_switch:.4} < {opening_pressure}"
                        ),
                    });
                }
                let nu_s = 1.0 / (c0 * resistance);
                fixed + (at_switch - fixed) * (-(nu_a + nu_s) * (t - start)).exp()
            }
        }
    };
    Ok(p)
}

/// `alpha = k / R_a` after validating both.
fn riccati_alpha(params: &SystemParams, k: f64) -> Result<f64> {
    params.validate()?;
    positive("k", k)?;
    Ok(k / params.absorption_resistance)
}

/// Source-free Riccati relaxation from `p0` toward `target`.
fn logistic(target: f64, alpha: f64, p0: f64, elapsed: f64) -> f64 {
    target / (1.0 + (target / p0 - 1.0) * (-alpha * target * elapsed).exp())
}

fn checked_pressure(p: f64, t: f64) -> Result<f64> {
    if p.is_finite() && p > 0.0 {
        Ok(p)
    } else {
        Err(Error::Singularity {
            time: t,
            reason: format!("closed form reached P = {p}"),
        })
    }
}

/// Hyperbolic-compliance relaxation with no source:
/// `P = P_eq / (1 + (P_eq/P_0 - 1) exp(-alpha P_eq t))`.
pub fn riccati_no_source(params: &SystemParams, k: f64, p0: f64, t: f64) -> Result<f64> {
    let alpha = riccati_alpha(params, k)?;
    positive("P_0", p0)?;
    let t = check_time(t)?;
    checked_pressure(logistic(equilibrium_pressure(params), alpha, p0, t), t)
}

/// Piecewise solution for a rectangular bolus, starting from `params.initial_pressure`.
///
/// Each segment formula can be evaluated at any time so that the matching at
/// the two breakpoints can be inspected directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteBolusSolution {
    p0: f64,
    p_eq: f64,
    p_b: f64,
    /// `alpha P_b`.
    nu_b: f64,
    /// `alpha R_a S_b`.
    nu_b_prime: f64,
    start: f64,
    end: f64,
}

impl FiniteBolusSolution {
    pub fn new(params: &SystemParams, k: f64, bolus: FiniteBolus) -> Result<Self> {
        let alpha = riccati_alpha(params, k)?;
        finite("S_b", bolus.rate)?;
        non_negative("t_b", bolus.start)?;
        positive("dt_b", bolus.duration)?;
        let p_eq = equilibrium_pressure(params);
        let p_b = p_eq + params.absorption_resistance * bolus.rate;
        if p_b <= 0.0 || p_eq <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "S_b",
                value: bolus.rate,
                reason: "P_eq + R_a S_b must stay positive",
            });
        }
        Ok(Self {
            p0: params.initial_pressure,
            p_eq,
            p_b,
            nu_b: alpha * p_b,
            nu_b_prime: alpha * params.absorption_resistance * bolus.rate,
            start: bolus.start,
            end: bolus.start + bolus.duration,
        })
    }

    pub fn breakpoints(&self) -> (f64, f64) {
        (self.start, self.end)
    }

    /// Rate of the source-free segments, `alpha P_eq = nu_b - nu_b'`.
    fn free_rate(&self) -> f64 {
        self.nu_b - self.nu_b_prime
    }

    /// Segment formula valid on `[0, t_b)`.
    pub fn before(&self, t: f64) -> f64 {
        let p = 1.0 / self.p_eq + (1.0 / self.p0 - 1.0 / self.p_eq) * (-self.free_rate() * t).exp();
        1.0 / p
    }

    /// Segment formula valid on `[t_b, t_b + dt_b)`: `p = c exp(-nu_b t) + 1/P_b`
    /// with `c` from continuity at `t_b`. Exponentials are combined before
    /// evaluation to avoid overflow of `exp(nu_b t_b)`.
    pub fn during(&self, t: f64) -> f64 {
        let (p_eq, p_b, p0) = (self.p_eq, self.p_b, self.p0);
        let a = (1.0 - p_eq / p_b) * (-self.nu_b * (t - self.start)).exp();
        let b = (1.0 - p_eq / p0) * (self.nu_b_prime * self.start - self.nu_b * t).exp();
        1.0 / ((a - b) / p_eq + 1.0 / p_b)
    }

    /// Segment formula valid on `[t_b + dt_b, inf)`:
    /// `P = P_eq / (c P_eq exp(-(nu_b - nu_b') t) + 1)` with `c` from continuity at `t_b + dt_b`.
    pub fn after(&self, t: f64) -> f64 {
        let (p_eq, p_b, p0) = (self.p_eq, self.p_b, self.p0);
        let free = self.free_rate();
        let end = self.end;
        // c exp(-free t), term by term.
        let first = (1.0 / p_b - 1.0 / p_eq) * (free * (end - t)).exp();
        let second = ((1.0 - p_eq / p_b)
            * (self.nu_b * self.start - self.nu_b_prime * end - free * t).exp()
            - (1.0 - p_eq / p0) * (self.nu_b_prime * (self.start - end) - free * t).exp())
            / p_eq;
        p_eq / ((first + second) * p_eq + 1.0)
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        let t = check_time(t)?;
        let p = if t < self.start {
            self.before(t)
        } else if t < self.end {
            self.during(t)
        } else {
            self.after(t)
        };
        checked_pressure(p, t)
    }
}

/// Hyperbolic-compliance pressure with a rectangular bolus source.
pub fn riccati_finite_bolus(
    params: &SystemParams,
    k: f64,
    bolus: FiniteBolus,
    t: f64,
) -> Result<f64> {
    FiniteBolusSolution::new(params, k, bolus)?.at(t)
}

/// Relaxation after an instantaneous volume change `volume` from `p_eq`:
/// `P = P_eq / (1 + (exp(-k dV) - 1) exp(-(k/R_a) P_eq t))`.
pub fn instant_bolus_curve(p_eq: f64, k: f64, absorption_resistance: f64, volume: f64, t: f64) -> f64 {
    let alpha = k / absorption_resistance;
    p_eq / (1.0 + ((-k * volume).exp() - 1.0) * (-alpha * p_eq * t).exp())
}

/// Pressure after an instantaneous bolus of `volume` cc applied at `t = 0`
/// to a system resting at `P_eq`.
///
/// Only valid once the pressure has been raised: `P(0) = P_eq exp(k dV)` is
/// the post-jump value, and the curve says nothing about the injection itself.
pub fn riccati_instant_bolus(params: &SystemParams, k: f64, volume: f64, t: f64) -> Result<f64> {
    riccati_alpha(params, k)?;
    finite("delta_V", volume)?;
    let t = check_time(t)?;
    let p = instant_bolus_curve(
        equilibrium_pressure(params),
        k,
        params.absorption_resistance,
        volume,
        t,
    );
    checked_pressure(p, t)
}

/// Exponential growth `P_0 exp(k I_f t)` while absorption is switched off,
/// after withdrawing `withdrawn` cc from `P_eq` (`P_0 = P_eq exp(-k |dV|)`).
pub fn riccati_gated_growth(
    params: &SystemParams,
    k: f64,
    withdrawn: f64,
    gate: f64,
    t: f64,
) -> Result<f64> {
    riccati_alpha(params, k)?;
    finite("delta_V", withdrawn)?;
    non_negative("t_a", gate)?;
    let t = check_time(t)?;
    if t >= gate {
        return Err(Error::OutOfRegime {
            solution: "riccati_gated_growth",
            time: t,
            valid: format!("0 <= t < t_a = {gate}"),
        });
    }
    let p0 = equilibrium_pressure(params) * (-k * withdrawn.abs()).exp();
    checked_pressure(gated_growth(p0, k, params.formation_rate, t), t)
}

pub(crate) fn gated_growth(p0: f64, k: f64, formation_rate: f64, t: f64) -> f64 {
    p0 * (k * formation_rate * t).exp()
}

/// Hyperbolic-compliance response to an infusion started at `start`, from `P(0) = P_eq`.
pub fn riccati_infusion(params: &SystemParams, k: f64, rate: f64, start: f64, t: f64) -> Result<f64> {
    let alpha = riccati_alpha(params, k)?;
    non_negative("S_i", rate)?;
    non_negative("t_i", start)?;
    let t = check_time(t)?;
    let p_eq = equilibrium_pressure(params);
    if t < start {
        return Ok(p_eq);
    }
    let lift = params.absorption_resistance * rate;
    let target = p_eq + lift;
    let p = target / (1.0 + (lift / p_eq) * (-alpha * target * (t - start)).exp());
    checked_pressure(p, t)
}

/// Source-free relaxation toward an arbitrary target, used to chain segments.
pub(crate) fn riccati_relax(target: f64, alpha: f64, p0: f64, elapsed: f64) -> Result<f64> {
    checked_pressure(logistic(target, alpha, p0, elapsed), elapsed)
}

/// Dispatches to the Riccati solution for `scenario`.
pub fn riccati_solve(scenario: &RiccatiScenario, params: &SystemParams, k: f64, t: f64) -> Result<f64> {
    match *scenario {
        RiccatiScenario::NoSource => riccati_no_source(params, k, params.initial_pressure, t),
        RiccatiScenario::FiniteBolus(b) => riccati_finite_bolus(params, k, b, t),
        RiccatiScenario::InstantBolus { volume } => riccati_instant_bolus(params, k, volume, t),
        RiccatiScenario::GatedGrowth { withdrawn, gate } => {
            riccati_gated_growth(params, k, withdrawn, gate, t)
        }
        RiccatiScenario::ConstantInfusion { rate, start } => {
            riccati_infusion(params, k, rate, start, t)
        }
    }
}
