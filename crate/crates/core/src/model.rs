//! Domain types of the single-compartment CSF model: the compliance laws,
//! the fluid-circuit constants, and the algebraic fixed points.
//!
//! Every model in the crate is an instance of the mass balance
//!
//! ```text
//! C(P) dP/dt + P / R_a = I_f(t) + P_d / R_a
//! ```
//!
//! with a particular choice of compliance `C(P) = dV/dP`.

use serde::{Deserialize, Serialize};

use crate::error::{finite, non_negative, positive, Error, Result};
use crate::typical;

/// Smallest pressure (mmH2O) at which the hyperbolic law is evaluated.
pub const HYPERBOLIC_PRESSURE_FLOOR: f64 = 1e-6;

/// Largest `b * P` for which the exponential law is within 1% of its
/// hyperbolic approximation `a / (1 + b P)`.
pub const EXPONENTIAL_APPROXIMATION_BOUND: f64 = 0.1;

/// A compliance law `C(P) = dV/dP`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ComplianceModel {
    /// `C = C0`.
    Constant { c0: f64 },
    /// `C = 1 / (k P)`; exponential pressure-volume relation.
    Hyperbolic { k: f64 },
    /// `C = 1 / (k1 P + k2)`; finite compliance at zero pressure.
    ShiftedHyperbolic { k1: f64, k2: f64 },
    /// `C = a exp(-b P)`.
    Exponential { a: f64, b: f64 },
}

/// Discriminant of [`ComplianceModel`], used when selecting candidates to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplianceKind {
    Constant,
    Hyperbolic,
    ShiftedHyperbolic,
    Exponential,
}

impl ComplianceKind {
    pub const ALL: [ComplianceKind; 4] = [
        ComplianceKind::Constant,
        ComplianceKind::Hyperbolic,
        ComplianceKind::ShiftedHyperbolic,
        ComplianceKind::Exponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ComplianceKind::Constant => "constant",
            ComplianceKind::Hyperbolic => "hyperbolic",
            ComplianceKind::ShiftedHyperbolic => "shifted_hyperbolic",
            ComplianceKind::Exponential => "exponential",
        }
    }

    /// Names of the parameters of this law, in the order used by
    /// [`ComplianceModel::parameters`].
    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            ComplianceKind::Constant => &["C_0"],
            ComplianceKind::Hyperbolic => &["k"],
            ComplianceKind::ShiftedHyperbolic => &["k1", "k2"],
            ComplianceKind::Exponential => &["a", "b"],
        }
    }
}

impl ComplianceModel {
    pub fn constant(c0: f64) -> Result<Self> {
        Self::Constant { c0 }.validated()
    }

    pub fn hyperbolic(k: f64) -> Result<Self> {
        Self::Hyperbolic { k }.validated()
    }

    pub fn shifted_hyperbolic(k1: f64, k2: f64) -> Result<Self> {
        Self::ShiftedHyperbolic { k1, k2 }.validated()
    }

    pub fn exponential(a: f64, b: f64) -> Result<Self> {
        Self::Exponential { a, b }.validated()
    }

    /// The law with the crate's typical parameters.
    pub fn typical(kind: ComplianceKind) -> Self {
        match kind {
            ComplianceKind::Constant => Self::Constant {
                c0: typical::COMPLIANCE,
            },
            ComplianceKind::Hyperbolic => Self::Hyperbolic {
                k: typical::PV_EXPONENT,
            },
            ComplianceKind::ShiftedHyperbolic => Self::ShiftedHyperbolic {
                k1: typical::SHIFTED_K1,
                k2: typical::SHIFTED_K2,
            },
            ComplianceKind::Exponential => Self::Exponential {
                a: typical::EXPONENTIAL_A,
                b: typical::EXPONENTIAL_B,
            },
        }
    }

    /// Builds a law from its kind and parameters in [`ComplianceKind::parameter_names`] order.
    pub fn from_parameters(kind: ComplianceKind, values: &[f64]) -> Result<Self> {
        let expected = kind.parameter_names().len();
        if values.len() != expected {
            return Err(Error::Config(format!(
                "{} compliance takes {expected} parameters, got {}",
                kind.name(),
                values.len()
            )));
        }
        match kind {
            ComplianceKind::Constant => Self::constant(values[0]),
            ComplianceKind::Hyperbolic => Self::hyperbolic(values[0]),
            ComplianceKind::ShiftedHyperbolic => Self::shifted_hyperbolic(values[0], values[1]),
            ComplianceKind::Exponential => Self::exponential(values[0], values[1]),
        }
    }

    pub fn parameters(&self) -> Vec<f64> {
        match *self {
            Self::Constant { c0 } => vec![c0],
            Self::Hyperbolic { k } => vec![k],
            Self::ShiftedHyperbolic { k1, k2 } => vec![k1, k2],
            Self::Exponential { a, b } => vec![a, b],
        }
    }

    pub fn kind(&self) -> ComplianceKind {
        match self {
            Self::Constant { .. } => ComplianceKind::Constant,
            Self::Hyperbolic { .. } => ComplianceKind::Hyperbolic,
            Self::ShiftedHyperbolic { .. } => ComplianceKind::ShiftedHyperbolic,
            Self::Exponential { .. } => ComplianceKind::Exponential,
        }
    }

    pub fn law_name(&self) -> &'static str {
        self.kind().name()
    }

    /// Checks that every parameter is strictly positive. The exponential
    /// law also accepts `b = 0`, where it degenerates to a constant.
    pub fn validated(self) -> Result<Self> {
        match self {
            Self::Constant { c0 } => {
                positive("C_0", c0)?;
            }
            Self::Hyperbolic { k } => {
                positive("k", k)?;
            }
            Self::ShiftedHyperbolic { k1, k2 } => {
                positive("k1", k1)?;
                positive("k2", k2)?;
            }
            Self::Exponential { a, b } => {
                positive("a", a)?;
                non_negative("b", b)?;
            }
        }
        Ok(self)
    }

    /// Smallest admissible pressure and whether it is itself admissible.
    fn pressure_floor(&self) -> (f64, bool) {
        match self {
            Self::Hyperbolic { .. } => (HYPERBOLIC_PRESSURE_FLOOR, true),
            Self::ShiftedHyperbolic { .. } => (0.0, false),
            Self::Constant { .. } | Self::Exponential { .. } => (0.0, true),
        }
    }

    pub fn in_domain(&self, pressure: f64) -> bool {
        let (floor, inclusive) = self.pressure_floor();
        pressure.is_finite() && if inclusive { pressure >= floor } else { pressure > floor }
    }

    fn check_domain(&self, pressure: f64) -> Result<()> {
        if self.in_domain(pressure) {
            Ok(())
        } else {
            Err(Error::Domain {
                law: self.law_name(),
                pressure,
            })
        }
    }

    /// `C(P)` in cc/mmH2O.
    pub fn compliance_at(&self, pressure: f64) -> Result<f64> {
        self.check_domain(pressure)?;
        let c = match *self {
            Self::Constant { c0 } => c0,
            Self::Hyperbolic { k } => 1.0 / (k * pressure),
            Self::ShiftedHyperbolic { k1, k2 } => 1.0 / (k1 * pressure + k2),
            Self::Exponential { a, b } => a * (-b * pressure).exp(),
        };
        Ok(c)
    }

    /// Pressure reached from `reference` after adding `delta_v` cc, obtained by
    /// integrating `dV/dP = C(P)`.
    pub fn pv_relation(&self, delta_v: f64, reference: f64) -> Result<f64> {
        finite("delta_v", delta_v)?;
        self.check_domain(reference)?;
        if delta_v == 0.0 {
            return Ok(reference);
        }
        let law = self.law_name();
        let pressure = match *self {
            Self::Constant { c0 } => reference + delta_v / c0,
            Self::Hyperbolic { k } => reference * (k * delta_v).exp(),
            Self::ShiftedHyperbolic { k1, k2 } => {
                let shift = k2 / k1;
                (reference + shift) * (k1 * delta_v).exp() - shift
            }
            Self::Exponential { a, b } => {
                if b == 0.0 {
                    reference + delta_v / a
                } else {
                    let arg = (-b * reference).exp() - (b / a) * delta_v;
                    if arg <= 0.0 {
                        return Err(Error::Range {
                            law,
                            detail: format!(
                                "exp(-b P') - (b/a) dV = {arg:e} is not positive for dV = {delta_v} cc"
                            ),
                        });
                    }
                    -arg.ln() / b
                }
            }
        };
        if !self.in_domain(pressure) {
            return Err(Error::Range {
                law,
                detail: format!("dV = {delta_v} cc from P' = {reference} gives P = {pressure}"),
            });
        }
        Ok(pressure)
    }

    /// Pressure-volume index: volume per natural-log unit of pressure ratio.
    ///
    /// Defined for the two hyperbolic laws only. With `delta_v = 0` and
    /// `pressure == reference` the limit `1/k` (or `1/k1`) is returned.
    pub fn pvi(&self, delta_v: f64, pressure: f64, reference: f64) -> Result<f64> {
        let (shift, limit) = match *self {
            Self::Hyperbolic { k } => (0.0, 1.0 / k),
            Self::ShiftedHyperbolic { k1, k2 } => (k2 / k1, 1.0 / k1),
            _ => {
                return Err(Error::Unsupported {
                    operation: "pvi",
                    law: self.law_name(),
                })
            }
        };
        finite("delta_v", delta_v)?;
        self.check_domain(pressure)?;
        self.check_domain(reference)?;
        if delta_v == 0.0 && pressure == reference {
            return Ok(limit);
        }
        let log_ratio = ((pressure + shift) / (reference + shift)).ln();
        if log_ratio == 0.0 || delta_v == 0.0 {
            return Err(Error::Range {
                law: self.law_name(),
                detail: format!(
                    "inconsistent volume/pressure pair: dV = {delta_v}, P = {pressure}, P' = {reference}"
                ),
            });
        }
        Ok(delta_v / log_ratio)
    }

    /// Relative gap between the exponential law and its hyperbolic
    /// approximation `a / (1 + b P)` at `pressure`. Zero for other laws.
    pub fn hyperbolic_approximation_gap(&self, pressure: f64) -> f64 {
        match *self {
            Self::Exponential { a, b } => {
                let exact = a * (-b * pressure).exp();
                let approx = a / (1.0 + b * pressure);
                (exact - approx).abs() / exact
            }
            _ => 0.0,
        }
    }
}

/// One-way shunt valve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShuntValve {
    /// `R_s`.
    pub resistance: f64,
    /// `P_op`.
    pub opening_pressure: f64,
    /// `t_s`, min.
    pub activation_time: f64,
}

/// Constant-rate infusion through an apparatus of known resistance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Infusion {
    /// `R_i`.
    pub resistance: f64,
    /// `S_i`, cc/min.
    pub rate: f64,
    /// `t_i`, min.
    pub start: f64,
}

/// Fluid-circuit constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// `R_a`.
    pub absorption_resistance: f64,
    /// `I_f^(e)`, cc/min.
    pub formation_rate: f64,
    /// `P_d`, mmH2O.
    pub sinus_pressure: f64,
    /// `P_0`, mmH2O.
    pub initial_pressure: f64,
    pub shunt: Option<ShuntValve>,
    pub infusion: Option<Infusion>,
    /// `t_a`: absorption is switched off before this time.
    pub absorption_gate: Option<f64>,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::typical()
    }
}

impl SystemParams {
    /// Typical circuit constants with no shunt, infusion, or gate.
    pub fn typical() -> Self {
        Self {
            absorption_resistance: typical::ABSORPTION_RESISTANCE,
            formation_rate: typical::FORMATION_RATE,
            sinus_pressure: typical::SINUS_PRESSURE,
            initial_pressure: typical::INITIAL_PRESSURE,
            shunt: None,
            infusion: None,
            absorption_gate: None,
        }
    }

    pub fn typical_shunt() -> ShuntValve {
        ShuntValve {
            resistance: typical::SHUNT_RESISTANCE,
            opening_pressure: typical::OPENING_PRESSURE,
            activation_time: typical::SHUNT_START,
        }
    }

    pub fn typical_infusion() -> Infusion {
        Infusion {
            resistance: typical::INFUSION_RESISTANCE,
            rate: typical::INFUSION_RATE,
            start: typical::INFUSION_START,
        }
    }

    pub fn with_initial_pressure(mut self, p0: f64) -> Self {
        self.initial_pressure = p0;
        self
    }

    pub fn with_shunt(mut self, shunt: ShuntValve) -> Self {
        self.shunt = Some(shunt);
        self
    }

    pub fn with_infusion(mut self, infusion: Infusion) -> Self {
        self.infusion = Some(infusion);
        self
    }

    pub fn validate(&self) -> Result<()> {
        positive("R_a", self.absorption_resistance)?;
        non_negative("I_f_e", self.formation_rate)?;
        finite("P_d", self.sinus_pressure)?;
        positive("P_0", self.initial_pressure)?;
        if let Some(s) = &self.shunt {
            positive("R_s", s.resistance)?;
            finite("P_op", s.opening_pressure)?;
            non_negative("t_s", s.activation_time)?;
        }
        if let Some(i) = &self.infusion {
            positive("R_i", i.resistance)?;
            non_negative("S_i", i.rate)?;
            non_negative("t_i", i.start)?;
        }
        if let Some(t_a) = self.absorption_gate {
            non_negative("t_a", t_a)?;
        }
        Ok(())
    }

    /// `P_eq = R_a I_f^(e) + P_d`.
    pub fn equilibrium_pressure(&self) -> f64 {
        equilibrium_pressure(self)
    }
}

/// `P_eq = R_a I_f^(e) + P_d`, the pressure to which every source-free
/// trajectory relaxes.
pub fn equilibrium_pressure(params: &SystemParams) -> f64 {
    params.absorption_resistance * params.formation_rate + params.sinus_pressure
}

/// The infusion steady state written two ways: `P_eq + R_a S_i` and
/// `P_eq + (nu_i/nu_a) P_i`. They are algebraically identical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfusionSteadyState {
    pub from_absorption: f64,
    pub from_apparatus: f64,
}

impl InfusionSteadyState {
    pub fn value(&self) -> f64 {
        self.from_absorption
    }
}

pub fn infusion_steady_state(params: &SystemParams) -> Result<InfusionSteadyState> {
    let infusion = params
        .infusion
        .ok_or_else(|| Error::Config("infusion steady state needs an infusion block".into()))?;
    let p_eq = equilibrium_pressure(params);
    let from_absorption = p_eq + params.absorption_resistance * infusion.rate;
    // nu_i / nu_a = (1 / (C0 R_i)) / (1 / (C0 R_a)); C0 cancels.
    let frequency_ratio = (1.0 / infusion.resistance) / (1.0 / params.absorption_resistance);
    let apparatus_pressure = infusion.resistance * infusion.rate;
    let from_apparatus = p_eq + frequency_ratio * apparatus_pressure;
    debug_assert!(
        (from_absorption - from_apparatus).abs() <= 16.0 * f64::EPSILON * from_absorption.abs(),
        "steady-state identity violated: {from_absorption} vs {from_apparatus}"
    );
    Ok(InfusionSteadyState {
        from_absorption,
        from_apparatus,
    })
}

/// Fixed point of the shunted balance, together with the value of the
/// historically printed formula, which swaps two signs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShuntedFixedPoint {
    /// `(nu_a P_eq + nu_s P_op) / (nu_a + nu_s)`; zero of the shunted right-hand side.
    pub mass_balance: f64,
    /// `(nu_a P_eq - nu_s P_op) / (nu_a - nu_s)`; `None` when `R_a == R_s`.
    pub printed: Option<f64>,
}

pub fn shunted_fixed_point(params: &SystemParams) -> Result<ShuntedFixedPoint> {
    let shunt = params
        .shunt
        .ok_or_else(|| Error::Config("shunted fixed point needs a shunt block".into()))?;
    let p_eq = equilibrium_pressure(params);
    // Frequencies without the common 1/C0 factor.
    let nu_a = 1.0 / params.absorption_resistance;
    let nu_s = 1.0 / shunt.resistance;
    let mass_balance = (nu_a * p_eq + nu_s * shunt.opening_pressure) / (nu_a + nu_s);
    let printed = (nu_a != nu_s)
        .then(|| (nu_a * p_eq - nu_s * shunt.opening_pressure) / (nu_a - nu_s));
    let slack = 1e-12 * shunt.opening_pressure.abs().max(1.0);
    if mass_balance < shunt.opening_pressure - slack {
        return Err(Error::ShuntClosed {
            fixed_point: mass_balance,
            opening_pressure: shunt.opening_pressure,
        });
    }
    Ok(ShuntedFixedPoint {
        mass_balance,
        printed,
    })
}

/// Rates and pressures derived from the primary constants. Fields are
/// `None` when the law or block they depend on is absent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct DerivedRates {
    /// `1 / (C0 R_a)`, 1/min.
    pub nu_a: Option<f64>,
    /// `1 / (C0 R_i)`.
    pub nu_i: Option<f64>,
    /// `1 / (C0 R_s)`.
    pub nu_s: Option<f64>,
    /// `k / R_a`, 1/(mmH2O min).
    pub alpha: Option<f64>,
    /// `R_i S_i`, mmH2O.
    pub p_i: Option<f64>,
    /// `P_eq + R_a S_b`.
    pub p_b: Option<f64>,
    /// `alpha P_b`.
    pub nu_b: Option<f64>,
    /// `alpha R_a S_b`.
    pub nu_b_prime: Option<f64>,
}

impl DerivedRates {
    pub fn compute(
        params: &SystemParams,
        compliance: &ComplianceModel,
        bolus_rate: Option<f64>,
    ) -> Self {
        let r_a = params.absorption_resistance;
        let c0 = match *compliance {
            ComplianceModel::Constant { c0 } => Some(c0),
            _ => None,
        };
        let alpha = match *compliance {
            ComplianceModel::Hyperbolic { k } => Some(k / r_a),
            _ => None,
        };
        let p_b = bolus_rate.map(|s_b| equilibrium_pressure(params) + r_a * s_b);
        Self {
            nu_a: c0.map(|c| 1.0 / (c * r_a)),
            nu_i: c0.zip(params.infusion).map(|(c, i)| 1.0 / (c * i.resistance)),
            nu_s: c0.zip(params.shunt).map(|(c, s)| 1.0 / (c * s.resistance)),
            alpha,
            p_i: params.infusion.map(|i| i.resistance * i.rate),
            p_b,
            nu_b: alpha.zip(p_b).map(|(a, p)| a * p),
            nu_b_prime: alpha.zip(bolus_rate).map(|(a, s)| a * r_a * s),
        }
    }
}

/// How a trace was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Numeric,
    External,
}

/// Sampled pressure history `P(t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PressureTrace {
    times: Vec<f64>,
    pressures: Vec<f64>,
    provenance: Provenance,
    scenario: String,
}

impl PressureTrace {
    pub fn new(
        times: Vec<f64>,
        pressures: Vec<f64>,
        provenance: Provenance,
        scenario: impl Into<String>,
    ) -> Result<Self> {
        if times.len() != pressures.len() {
            return Err(Error::InsufficientData(format!(
                "{} times but {} pressures",
                times.len(),
                pressures.len()
            )));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::InsufficientData(format!("time #{i} is not finite")));
        }
        if let Some(w) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InsufficientData(format!(
                "times not strictly increasing at sample {}: {} then {}",
                w + 1,
                times[w],
                times[w + 1]
            )));
        }
        if let Some(i) = pressures.iter().position(|p| !p.is_finite()) {
            return Err(Error::Singularity {
                time: times[i],
                reason: "non-finite pressure".into(),
            });
        }
        Ok(Self {
            times,
            pressures,
            provenance,
            scenario: scenario.into(),
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn pressures(&self) -> &[f64] {
        &self.pressures
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn scenario(&self) -> &str {
        &self.scenario
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.pressures.iter().copied())
    }

    pub fn last(&self) -> Option<(f64, f64)> {
        Some((*self.times.last()?, *self.pressures.last()?))
    }

    /// Same samples with every pressure multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.times.clone(),
            self.pressures.iter().map(|p| p * factor).collect(),
            self.provenance,
            self.scenario.clone(),
        )
    }

    /// Samples with `t >= start`.
    pub fn from_time(&self, start: f64) -> Result<Self> {
        let first = self.times.partition_point(|&t| t < start);
        Self::new(
            self.times[first..].to_vec(),
            self.pressures[first..].to_vec(),
            self.provenance,
            self.scenario.clone(),
        )
    }

    /// Largest `|a - b| / |b|` over matching samples, with `other` as reference.
    pub fn max_relative_deviation(&self, other: &PressureTrace) -> Result<f64> {
        if self.times.len() != other.times.len()
            || self
                .times
                .iter()
                .zip(&other.times)
                .any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + b.abs()))
        {
            return Err(Error::InsufficientData(
                "traces are sampled on different grids".into(),
            ));
        }
        Ok(self
            .pressures
            .iter()
            .zip(&other.pressures)
            .map(|(a, b)| (a - b).abs() / b.abs())
            .fold(0.0, f64::max))
    }
}
