//! Event-aware numerical integration of the general balance
//!
//! ```text
//! C(P) dP/dt = I_f^(e) + S(t) - H_a(t) (P - P_d)/R_a - H_s(t) max(P - P_op, 0)/R_s
//! ```
//!
//! for any compliance law. Forcing is piecewise constant, so integration is
//! split at every breakpoint of the timeline and restarted there; no step ever
//! straddles a discontinuity. Instantaneous boluses are applied as state jumps
//! through the pressure-volume relation of the compliance law.
//!
//! Stepping is an adaptive Dormand-Prince 5(4) pair. Requested sample times are
//! hit exactly by clipping steps, which keeps output at full method accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ComplianceModel, PressureTrace, Provenance, SystemParams};
use crate::timeline::{Event, EventTimeline, Regime};

/// Right-hand side of the balance: a compliance law, the circuit, and the forcing.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsSpec {
    pub compliance: ComplianceModel,
    pub params: SystemParams,
    pub timeline: EventTimeline,
}

impl RhsSpec {
    pub fn new(compliance: ComplianceModel, params: SystemParams, timeline: EventTimeline) -> Result<Self> {
        compliance.validated()?;
        params.validate()?;
        Ok(Self {
            compliance,
            params,
            timeline,
        })
    }

    /// Whether absorption operates at `t`.
    pub fn absorption_active(&self, t: f64) -> bool {
        self.timeline.regime_at(t).absorbing
    }

    /// Net inflow `dV/dt` (cc/min) at pressure `p` under `regime`.
    pub fn net_inflow(&self, p: f64, regime: &Regime) -> f64 {
        let params = &self.params;
        let mut flow = params.formation_rate + regime.source;
        if regime.absorbing {
            flow -= (p - params.sinus_pressure) / params.absorption_resistance;
        }
        if let Some((r_s, p_op)) = regime.shunt {
            flow -= (p - p_op).max(0.0) / r_s;
        }
        flow
    }

    /// `dP/dt` at pressure `p` under `regime`.
    pub fn rate_in(&self, p: f64, regime: &Regime) -> Result<f64> {
        Ok(self.net_inflow(p, regime) / self.compliance.compliance_at(p)?)
    }

    /// `dP/dt` at `(t, p)`, with the forcing of the segment containing `t`.
    pub fn rate(&self, t: f64, p: f64) -> Result<f64> {
        self.rate_in(p, &self.timeline.regime_at(t))
    }
}

/// Tolerances and output grid of the integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    /// mmH2O.
    pub atol: f64,
    /// min.
    pub max_step: f64,
    /// Spacing of the output grid used by [`integrate`], min.
    pub sample_step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_step: 1.0,
            sample_step: 0.05,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerance(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn with_sample_step(mut self, step: f64) -> Self {
        self.sample_step = step;
        self
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("max_step", self.max_step),
            ("sample_step", self.sample_step),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("integrator {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Step bookkeeping of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub restarts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericRun {
    pub trace: PressureTrace,
    pub stats: StepStats,
    /// `Some(P(t_s) > P_op)` when the timeline carries a shunt inside the span.
    pub shunt_open_at_activation: Option<bool>,
}

/// Uniform grid from `start` to `end` inclusive with spacing `step`.
/// A final shorter interval is added when `step` does not divide the span.
pub fn uniform_grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && end.is_finite() && end > start) {
        return Err(Error::Config(format!("invalid time span [{start}, {end}]")));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Config(format!("invalid sample step {step}")));
    }
    let span = end - start;
    let n = (span / step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| start + i as f64 * step).collect();
    let last = *grid.last().expect("grid has at least one point");
    if end - last > 1e-9 * step {
        grid.push(end);
    } else if let Some(l) = grid.last_mut() {
        *l = end;
    }
    Ok(grid)
}

/// Integrates `rhs` over `t_span` and samples on the uniform grid of `config`.
pub fn integrate(rhs: &RhsSpec, t_span: (f64, f64), config: &IntegratorConfig) -> Result<NumericRun> {
    config.validate()?;
    let grid = uniform_grid(t_span.0, t_span.1, config.sample_step)?;
    integrate_on(rhs, &grid, config)
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth-order minus fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const MAX_STEPS: usize = 5_000_000;

struct Stepper<'a> {
    rhs: &'a RhsSpec,
    regime: Regime,
    config: &'a IntegratorConfig,
    stats: StepStats,
}

impl Stepper<'_> {
    fn f(&mut self, t: f64, p: f64) -> Result<f64> {
        self.stats.evaluations += 1;
        if !p.is_finite() {
            return Err(Error::Singularity {
                time: t,
                reason: format!("pressure became {p}"),
            });
        }
        self.rhs.rate_in(p, &self.regime).map_err(|e| match e {
            Error::Domain { law, pressure } => Error::Singularity {
                time: t,
                reason: format!("pressure {pressure} mmH2O left the {law} compliance domain"),
            },
            other => other,
        })
    }

    fn initial_step(&self, p: f64, dpdt: f64, remaining: f64) -> f64 {
        let scale = self.config.atol + self.config.rtol * p.abs();
        let d0 = p.abs() / scale;
        let d1 = dpdt.abs() / scale;
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(self.config.max_step).min(remaining)
    }

    /// One trial step; returns the fifth-order solution, its derivative and
    /// the scaled error estimate.
    fn try_step(&mut self, t0: f64, y: f64, k1: f64, step: f64) -> Result<(f64, f64, f64)> {
        let k2 = self.f(t0 + C2 * step, y + step * A21 * k1)?;
        let k3 = self.f(t0 + C3 * step, y + step * (A31 * k1 + A32 * k2))?;
        let k4 = self.f(t0 + C4 * step, y + step * (A41 * k1 + A42 * k2 + A43 * k3))?;
        let k5 = self.f(
            t0 + C5 * step,
            y + step * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4),
        )?;
        let k6 = self.f(
            t0 + step,
            y + step * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
        )?;
        let y_new = y + step * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let k7 = self.f(t0 + step, y_new)?;
        let err_abs = step * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let scale = self.config.atol + self.config.rtol * y.abs().max(y_new.abs());
        Ok((y_new, k7, (err_abs / scale).abs()))
    }

    /// Advances `(t, p)` to exactly `target` and returns the state there.
    /// `h` carries the step-size suggestion across calls within a segment.
    fn advance(&mut self, t: &mut f64, p: &mut f64, dpdt: &mut f64, h: &mut f64, target: f64) -> Result<()> {
        while *t < target {
            if self.stats.accepted + self.stats.rejected > MAX_STEPS {
                return Err(Error::Singularity {
                    time: *t,
                    reason: "step budget exhausted".into(),
                });
            }
            let remaining = target - *t;
            let mut step = h.min(remaining);
            // Absorb a sliver at the end of the interval into this step.
            if remaining - step < 1e-12 * (1.0 + target.abs()) {
                step = remaining;
            }
            let min_step = 1e-14 * (1.0 + t.abs());
            if step < min_step {
                return Err(Error::Singularity {
                    time: *t,
                    reason: format!("step size collapsed to {step:e} min"),
                });
            }

            let (t0, y) = (*t, *p);
            let (y_new, k7, err) = match self.try_step(t0, y, *dpdt, step) {
                Ok(v) => v,
                Err(e) => {
                    // A trial stage left the compliance domain: shrink and retry.
                    self.stats.rejected += 1;
                    *h = 0.25 * step;
                    if *h < min_step {
                        return Err(e);
                    }
                    continue;
                }
            };

            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                self.stats.accepted += 1;
                *t = if step == remaining { target } else { t0 + step };
                *p = y_new;
                *dpdt = k7;
                // Do not let a clipped final step shrink the suggestion.
                *h = (step * factor).max(if step == remaining { *h } else { 0.0 });
            } else {
                self.stats.rejected += 1;
                *h = step * factor.min(1.0);
            }
            *h = h.min(self.config.max_step);
        }
        Ok(())
    }
}

fn apply_jump(rhs: &RhsSpec, t: f64, p: f64) -> Result<f64> {
    let volume = rhs.timeline.jump_volume_at(t);
    if volume == 0.0 {
        return Ok(p);
    }
    rhs.compliance.pv_relation(volume, p).map_err(|e| Error::Singularity {
        time: t,
        reason: format!("instantaneous bolus of {volume} cc: {e}"),
    })
}

/// Integrates `rhs` from `times[0]` (at `params.initial_pressure`) and samples
/// at exactly `times`.
pub fn integrate_on(rhs: &RhsSpec, times: &[f64], config: &IntegratorConfig) -> Result<NumericRun> {
    integrate_from(rhs, rhs.params.initial_pressure, times, config)
}

/// As [`integrate_on`] with an explicit initial pressure.
pub fn integrate_from(
    rhs: &RhsSpec,
    initial_pressure: f64,
    times: &[f64],
    config: &IntegratorConfig,
) -> Result<NumericRun> {
    config.validate()?;
    if times.is_empty() {
        return Err(Error::InsufficientData("empty sample grid".into()));
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("sample times must be finite and strictly increasing".into()));
    }
    let t_start = times[0];
    let t_end = *times.last().expect("non-empty");

    let mut stepper = Stepper {
        rhs,
        regime: rhs.timeline.regime_at(t_start),
        config,
        stats: StepStats::default(),
    };

    let mut t = t_start;
    let mut p = apply_jump(rhs, t, initial_pressure)?;
    if !rhs.compliance.in_domain(p) {
        return Err(Error::Singularity {
            time: t,
            reason: format!("initial pressure {p} outside the {} domain", rhs.compliance.law_name()),
        });
    }

    let shunt_start = match rhs.timeline.shunt() {
        Some(Event::Shunt {
            start,
            opening_pressure,
            ..
        }) if start >= t_start && start <= t_end => Some((start, opening_pressure)),
        _ => None,
    };
    let mut shunt_open = None;
    if let Some((ts, p_op)) = shunt_start {
        if ts == t_start {
            shunt_open = Some(p > p_op);
        }
    }

    let breakpoints: Vec<f64> = rhs
        .timeline
        .breakpoints()
        .into_iter()
        .filter(|&b| b > t_start && b < t_end)
        .collect();

    let mut pressures = Vec::with_capacity(times.len());
    pressures.push(p);
    let mut next_sample = 1;
    let mut dpdt = stepper.f(t, p)?;
    let mut h = stepper.initial_step(p, dpdt, t_end - t_start);

    let segment_ends = breakpoints.iter().copied().chain(std::iter::once(t_end));
    for seg_end in segment_ends {
        while next_sample < times.len() && times[next_sample] < seg_end {
            let target = times[next_sample];
            stepper.advance(&mut t, &mut p, &mut dpdt, &mut h, target)?;
            pressures.push(p);
            next_sample += 1;
        }
        stepper.advance(&mut t, &mut p, &mut dpdt, &mut h, seg_end)?;
        if seg_end < t_end {
            // Restart across the discontinuity.
            p = apply_jump(rhs, seg_end, p)?;
            if let Some((ts, p_op)) = shunt_start {
                if ts == seg_end {
                    shunt_open = Some(p > p_op);
                }
            }
            stepper.regime = rhs.timeline.regime_at(seg_end);
            stepper.stats.restarts += 1;
            dpdt = stepper.f(t, p)?;
            h = stepper.initial_step(p, dpdt, t_end - t);
        }
        if next_sample < times.len() && times[next_sample] == seg_end {
            pressures.push(p);
            next_sample += 1;
        }
    }
    debug_assert_eq!(pressures.len(), times.len());

    let trace = PressureTrace::new(times.to_vec(), pressures, Provenance::Numeric, "numeric")?;
    Ok(NumericRun {
        trace,
        stats: stepper.stats,
        shunt_open_at_activation: shunt_open,
    })
}

/// Largest `|dP/dt (centred difference) - RHS(P, t)|` over interior samples,
/// skipping samples within two grid points of a breakpoint.
pub fn residual_check(trace: &PressureTrace, rhs: &RhsSpec) -> Result<f64> {
    let t = trace.times();
    let p = trace.pressures();
    let n = t.len();
    let breakpoints: Vec<f64> = rhs
        .timeline
        .breakpoints()
        .into_iter()
        .filter(|&b| b > t[0] && b < t[n.saturating_sub(1)])
        .collect();

    // Every smooth segment needs at least five samples.
    let mut edges = vec![t[0]];
    edges.extend(&breakpoints);
    edges.push(t[n.saturating_sub(1)]);
    for w in edges.windows(2) {
        let count = t.iter().filter(|&&x| x >= w[0] && x <= w[1]).count();
        if count < 5 {
            return Err(Error::InsufficientData(format!(
                "segment [{}, {}] has {count} samples; at least 5 needed",
                w[0], w[1]
            )));
        }
    }

    let mut worst: f64 = 0.0;
    for i in 1..n - 1 {
        let lo = t[i.saturating_sub(2)];
        let hi = t[(i + 2).min(n - 1)];
        if breakpoints.iter().any(|&b| b >= lo && b <= hi) {
            continue;
        }
        let fd = (p[i + 1] - p[i - 1]) / (t[i + 1] - t[i - 1]);
        let exact = rhs.rate(t[i], p[i])?;
        worst = worst.max((fd - exact).abs());
    }
    Ok(worst)
}

/// Zero of `dP/dt` under the forcing in effect at `t`, found by bisection on
/// the full right-hand side (compliance included).
pub fn fixed_point(rhs: &RhsSpec, t: f64) -> Result<f64> {
    let regime = rhs.timeline.regime_at(t);
    let f = |p: f64| rhs.rate_in(p, &regime);
    let floor = match rhs.compliance {
        ComplianceModel::Hyperbolic { .. } => crate::model::HYPERBOLIC_PRESSURE_FLOOR,
        ComplianceModel::ShiftedHyperbolic { .. } => f64::MIN_POSITIVE,
        _ => 0.0,
    };
    let mut lo = floor;
    if f(lo)? <= 0.0 {
        return Err(Error::Config(format!(
            "no positive fixed point: dP/dt <= 0 already at P = {lo}"
        )));
    }
    let mut hi = rhs.params.initial_pressure.max(1.0);
    let mut expansions = 0;
    while f(hi)? >= 0.0 {
        hi *= 2.0;
        expansions += 1;
        if expansions > 200 || !hi.is_finite() {
            return Err(Error::Config("dP/dt never becomes negative; no fixed point".into()));
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{linear_solve, riccati_no_source, LinearScenario};
    use crate::model::ComplianceKind;

    fn spec(kind: ComplianceKind, params: SystemParams, events: Vec<Event>) -> RhsSpec {
        RhsSpec::new(
            ComplianceModel::typical(kind),
            params,
            EventTimeline::new(events).unwrap(),
        )
        .unwrap()
    }

    fn value_at(run: &NumericRun, t: f64) -> f64 {
        let i = run
            .trace
            .times()
            .iter()
            .position(|&x| (x - t).abs() < 1e-12)
            .unwrap();
        run.trace.pressures()[i]
    }

    #[test]
    fn grid_construction() {
        let g = uniform_grid(0.0, 1.0, 0.25).unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = uniform_grid(0.0, 1.0, 0.3).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert_eq!(uniform_grid(0.0, 30.0, 0.05).unwrap().len(), 601);
        assert!(uniform_grid(1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn constant_no_source_matches_closed_form() {
        let params = SystemParams::typical();
        let rhs = spec(ComplianceKind::Constant, params, vec![]);
        let run = integrate_on(&rhs, &[0.0, 2.4], &IntegratorConfig::default()).unwrap();
        let exact = linear_solve(
            &LinearScenario::NoSource,
            &params,
            &ComplianceModel::typical(ComplianceKind::Constant),
            2.4,
        )
        .unwrap();
        let got = value_at(&run, 2.4);
        assert!((got - exact).abs() / exact < 1e-6, "{got} vs {exact}");
        assert!((got - 163.6).abs() / 163.6 < 1e-4);
    }

    #[test]
    fn hyperbolic_no_source_matches_closed_form() {
        let params = SystemParams::typical();
        let rhs = spec(ComplianceKind::Hyperbolic, params, vec![]);
        let run = integrate_on(&rhs, &[0.0, 5.0], &IntegratorConfig::default()).unwrap();
        let exact = riccati_no_source(&params, 1.0, 244.0, 5.0).unwrap();
        assert!((value_at(&run, 5.0) - exact).abs() / exact < 1e-6);
    }

    #[test]
    fn equilibrium_start_stays_put() {
        let params = SystemParams::typical().with_initial_pressure(116.8);
        for kind in ComplianceKind::ALL {
            let rhs = spec(kind, params, vec![]);
            let run = integrate(&rhs, (0.0, 30.0), &IntegratorConfig::default()).unwrap();
            for &p in run.trace.pressures() {
                assert!((p - 116.8).abs() < 1e-9, "{kind:?}: {p}");
            }
        }
    }

    #[test]
    fn instant_bolus_is_a_state_jump() {
        let params = SystemParams::typical().with_initial_pressure(116.8);
        let rhs = spec(
            ComplianceKind::Hyperbolic,
            params,
            vec![Event::InstantBolus {
                volume: 0.2,
                time: 4.0,
            }],
        );
        let run = integrate(&rhs, (0.0, 10.0), &IntegratorConfig::default()).unwrap();
        let before = value_at(&run, 3.95);
        let after = value_at(&run, 4.0);
        assert!((before - 116.8).abs() < 1e-9);
        assert!(((after / 116.8).ln() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn samples_at_breakpoints_are_post_event() {
        let params = SystemParams::typical();
        let rhs = spec(
            ComplianceKind::Constant,
            params,
            vec![Event::InstantBolus {
                volume: 0.16,
                time: 0.0,
            }],
        );
        let run = integrate_on(&rhs, &[0.0, 1.0], &IntegratorConfig::default()).unwrap();
        assert!((run.trace.pressures()[0] - 284.0).abs() < 1e-9);
    }

    #[test]
    fn leaving_the_domain_is_a_singularity() {
        // Withdrawing more than the hyperbolic law allows is fine (it stays
        // positive) but a constant law driven below zero by a large withdrawal is not.
        let params = SystemParams::typical();
        let rhs = spec(
            ComplianceKind::Constant,
            params,
            vec![Event::InstantBolus {
                volume: -5.0,
                time: 1.0,
            }],
        );
        match integrate(&rhs, (0.0, 5.0), &IntegratorConfig::default()) {
            Err(Error::Singularity { time, .. }) => assert_eq!(time, 1.0),
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    #[test]
    fn shunt_activation_is_reported() {
        let params = SystemParams::typical();
        let open = spec(
            ComplianceKind::Constant,
            params,
            vec![Event::Shunt {
                resistance: 60.0,
                opening_pressure: 45.0,
                start: 5.0,
            }],
        );
        let run = integrate(&open, (0.0, 10.0), &IntegratorConfig::default()).unwrap();
        assert_eq!(run.shunt_open_at_activation, Some(true));

        let closed = spec(
            ComplianceKind::Constant,
            params,
            vec![Event::Shunt {
                resistance: 60.0,
                opening_pressure: 400.0,
                start: 5.0,
            }],
        );
        let run = integrate(&closed, (0.0, 10.0), &IntegratorConfig::default()).unwrap();
        assert_eq!(run.shunt_open_at_activation, Some(false));
    }

    #[test]
    fn tighter_tolerance_does_not_hurt() {
        let params = SystemParams::typical();
        let rhs = spec(ComplianceKind::Hyperbolic, params, vec![]);
        let grid = uniform_grid(0.0, 60.0, 0.5).unwrap();
        let mut last = f64::INFINITY;
        for rtol in [1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10] {
            let cfg = IntegratorConfig::default().with_tolerance(rtol, rtol * 1e-2);
            let run = integrate_on(&rhs, &grid, &cfg).unwrap();
            let err = grid
                .iter()
                .zip(run.trace.pressures())
                .map(|(&t, &p)| {
                    let e = riccati_no_source(&params, 1.0, 244.0, t).unwrap();
                    (p - e).abs() / e
                })
                .fold(0.0, f64::max);
            assert!(err <= last * 1.5 + 1e-15, "rtol {rtol}: {err} after {last}");
            assert!(err < 100.0 * rtol, "rtol {rtol}: error {err}");
            last = err;
        }
    }

    #[test]
    fn residual_of_constant_trace() {
        let params = SystemParams::typical().with_initial_pressure(116.8);
        let rhs = spec(ComplianceKind::Constant, params, vec![]);
        let grid = uniform_grid(0.0, 10.0, 0.01).unwrap();
        let flat = PressureTrace::new(grid.clone(), vec![116.8; grid.len()], Provenance::External, "flat").unwrap();
        assert!(residual_check(&flat, &rhs).unwrap() <= 1e-10);
    }

    #[test]
    fn residual_needs_enough_samples() {
        let rhs = spec(ComplianceKind::Constant, SystemParams::typical(), vec![]);
        let short = PressureTrace::new(vec![0.0, 1.0, 2.0], vec![1.0, 1.0, 1.0], Provenance::External, "x").unwrap();
        assert!(matches!(residual_check(&short, &rhs), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn fixed_point_is_compliance_independent() {
        let params = SystemParams::typical();
        let reference = fixed_point(&spec(ComplianceKind::Constant, params, vec![]), 0.0).unwrap();
        assert!((reference - 116.8).abs() < 1e-9);
        for kind in ComplianceKind::ALL {
            let p = fixed_point(&spec(kind, params, vec![]), 0.0).unwrap();
            assert!((p - reference).abs() <= 1e-9 * reference);
        }
    }
}
