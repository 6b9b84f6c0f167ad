//! Parameter estimation: PVI from pressure-volume points, bolus-response
//! fits, and compliance-model comparison.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod lm;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::analytic::instant_bolus_curve;
use crate::error::{finite, Error, Result};
use crate::model::{ComplianceKind, ComplianceModel, PressureTrace, SystemParams};
use crate::numeric::{integrate_from, IntegratorConfig, RhsSpec};
use crate::timeline::EventTimeline;
use crate::typical;

pub use lm::MAX_ITERATIONS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PviEstimate {
    pub pvi: f64,
    pub k: f64,
    /// Fitted `ln(P/P')` at `dV = 0`; zero when `P'` is the true reference.
    pub intercept: f64,
}

/// Least-squares slope of `ln(P/P')` against `dV`; `k` is the slope and `PVI = 1/k`.
pub fn pvi_from_points(points: &[(f64, f64)], reference: f64) -> Result<PviEstimate> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 pressure-volume points, got {}",
            points.len()
        )));
    }
    if !(reference > 0.0) {
        return Err(Error::InvalidParameter {
            name: "P_prime",
            value: reference,
            reason: "must be > 0",
        });
    }
    for &(dv, p) in points {
        finite("delta_V", dv)?;
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::InvalidParameter {
                name: "P",
                value: p,
                reason: "must be finite and > 0",
            });
        }
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let ys: Vec<f64> = points.iter().map(|&(_, p)| (p / reference).ln()).collect();
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let scale = points.iter().map(|p| p.0 * p.0).sum::<f64>().max(f64::MIN_POSITIVE);
    if sxx <= 1e-24 * scale || sxx == 0.0 {
        return Err(Error::RankDeficient(
            "all volume increments are equal; the slope is undetermined".into(),
        ));
    }
    let sxy: f64 = points
        .iter()
        .zip(&ys)
        .map(|(p, y)| (p.0 - mean_x) * (y - mean_y))
        .sum();
    let k = sxy / sxx;
    if !(k > 0.0) {
        return Err(Error::InvalidParameter {
            name: "k",
            value: k,
            reason: "estimated slope must be > 0 (pressure must rise with volume)",
        });
    }
    Ok(PviEstimate {
        pvi: 1.0 / k,
        k,
        intercept: mean_y - k * mean_x,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub model: String,
    pub parameters: BTreeMap<String, f64>,
    /// Residual sum of squares, mmH2O^2.
    pub rss: f64,
    pub samples: usize,
    /// `|estimate - truth| / |truth|` per parameter, when ground truth was supplied.
    pub recovery_error: Option<BTreeMap<String, f64>>,
    pub iterations: usize,
    pub final_step_norm: f64,
    pub converged: bool,
}

impl FitReport {
    pub fn parameter(&self, name: &str) -> Option<f64> {
        self.parameters.get(name).copied()
    }

    /// Records relative recovery errors against known generating values.
    /// Names absent from the fit are ignored.
    pub fn with_truth(mut self, truth: &[(&str, f64)]) -> Self {
        let errors = truth
            .iter()
            .filter_map(|&(name, value)| {
                self.parameter(name)
                    .map(|est| (name.to_string(), ((est - value) / value).abs()))
            })
            .collect();
        self.recovery_error = Some(errors);
        self
    }

    pub fn rms(&self) -> f64 {
        (self.rss / self.samples as f64).sqrt()
    }
}

/// Parameters held fixed in a bolus-response fit.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BolusKnowns {
    pub k: Option<f64>,
    pub absorption_resistance: Option<f64>,
    pub equilibrium_pressure: Option<f64>,
}

fn flat(pressures: &[f64]) -> bool {
    let mean = pressures.iter().sum::<f64>() / pressures.len() as f64;
    pressures.iter().all(|p| (p - mean).abs() <= 1e-9 * mean.abs())
}

/// Fits the hyperbolic-compliance relaxation after an instantaneous bolus of
/// `delta_v` cc,
///
/// ```text
/// P(t) = P_eq / (1 + (exp(-k dV) - 1) exp(-(k / R_a) P_eq (t - t0)))
/// ```
///
/// with `t0` the first sample, over whichever of `(k, R_a, P_eq)` are not fixed
/// by `knowns`. The trace must start at or after the post-bolus instant.
pub fn fit_bolus_response(
    trace: &PressureTrace,
    delta_v: f64,
    knowns: &BolusKnowns,
) -> Result<FitReport> {
    finite("delta_V", delta_v)?;
    if delta_v == 0.0 {
        return Err(Error::RankDeficient("a zero-volume bolus carries no information".into()));
    }
    let n = trace.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!("{n} samples; need at least 4")));
    }
    let ps = trace.pressures();
    if ps.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "P",
            value: ps.iter().copied().fold(f64::INFINITY, f64::min),
            reason: "trace pressures must be > 0",
        });
    }
    if flat(ps) {
        return Err(Error::RankDeficient(
            "flat trace: no bolus response to fit".into(),
        ));
    }
    let t0 = trace.times()[0];
    let (first, last) = (ps[0], ps[n - 1]);

    let p_eq0 = knowns.equilibrium_pressure.unwrap_or(last);
    let k0 = match knowns.k {
        Some(k) => k,
        None => pvi_from_points(&[(delta_v, first), (0.0, p_eq0)], p_eq0)
            .map(|e| e.k)
            .map_err(|_| {
                Error::RankDeficient(format!(
                    "trace shape is inconsistent with a bolus of {delta_v} cc"
                ))
            })?,
    };
    let r_a0 = knowns.absorption_resistance.unwrap_or_else(|| {
        // 1/e relaxation time of the deviation gives alpha * P_eq.
        let threshold = (first - last).abs() / std::f64::consts::E;
        trace
            .iter()
            .find(|&(_, p)| (p - last).abs() <= threshold)
            .map(|(t, _)| t - t0)
            .filter(|&tau| tau > 0.0)
            .map(|tau| k0 * tau * p_eq0)
            .unwrap_or(typical::ABSORPTION_RESISTANCE)
    });

    let free: Vec<(&str, f64)> = [
        ("k", knowns.k.is_none(), k0),
        ("R_a", knowns.absorption_resistance.is_none(), r_a0),
        ("P_eq", knowns.equilibrium_pressure.is_none(), p_eq0),
    ]
    .into_iter()
    .filter(|e| e.1)
    .map(|e| (e.0, e.2))
    .collect();
    if free.is_empty() {
        return Err(Error::Config("all bolus-fit parameters are fixed".into()));
    }
    for &(name, v) in &free {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::RankDeficient(format!(
                "no usable starting value for {name} ({v})"
            )));
        }
    }

    let unpack = |x: &[f64]| -> (f64, f64, f64) {
        let mut it = x.iter().map(|v| v.exp());
        let k = knowns.k.unwrap_or_else(|| it.next().expect("k free"));
        let r_a = knowns
            .absorption_resistance
            .unwrap_or_else(|| it.next().expect("R_a free"));
        let p_eq = knowns
            .equilibrium_pressure
            .unwrap_or_else(|| it.next().expect("P_eq free"));
        (k, r_a, p_eq)
    };
    let residuals = |x: &[f64]| -> Result<Vec<f64>> {
        let (k, r_a, p_eq) = unpack(x);
        Ok(trace
            .iter()
            .map(|(t, p)| instant_bolus_curve(p_eq, k, r_a, delta_v, t - t0) - p)
            .collect())
    };
    let x0 = free.iter().map(|e| e.1.ln()).collect();
    let out = lm::minimize(residuals, x0, &lm::LmOptions::default())?;
    let (k, r_a, p_eq) = unpack(&out.x);
    let parameters = BTreeMap::from([
        ("k".to_string(), k),
        ("R_a".to_string(), r_a),
        ("P_eq".to_string(), p_eq),
    ]);
    Ok(FitReport {
        model: ComplianceKind::Hyperbolic.name().to_string(),
        parameters,
        rss: out.rss,
        samples: n,
        recovery_error: None,
        iterations: out.iterations,
        final_step_norm: out.step_norm,
        converged: out.converged,
    })
}

/// Fixed quantities for numeric-engine fits.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplianceFitOptions {
    pub absorption_resistance: f64,
    pub formation_rate: f64,
    /// Events applied during the fitted run, e.g. a known bolus.
    pub timeline: EventTimeline,
    pub integrator: IntegratorConfig,
    /// Relative RSS margin within which two models are reported as tied.
    pub tie_tolerance: f64,
}

impl Default for ComplianceFitOptions {
    fn default() -> Self {
        Self {
            absorption_resistance: typical::ABSORPTION_RESISTANCE,
            formation_rate: typical::FORMATION_RATE,
            timeline: EventTimeline::empty(),
            integrator: IntegratorConfig::default().with_tolerance(1e-10, 1e-10),
            tie_tolerance: 0.05,
        }
    }
}

/// Starting compliance parameters from the secant slopes of the trace.
fn initial_compliance(kind: ComplianceKind, trace: &PressureTrace, p_eq: f64, r_a: f64) -> Vec<f64> {
    let (ts, ps) = (trace.times(), trace.pressures());
    let mut samples: Vec<(f64, f64)> = Vec::new();
    let span = (ps[0] - p_eq).abs();
    for i in 0..ps.len() - 1 {
        let pm = 0.5 * (ps[i] + ps[i + 1]);
        let slope = (ps[i + 1] - ps[i]) / (ts[i + 1] - ts[i]);
        if (pm - p_eq).abs() < 0.2 * span || slope == 0.0 {
            continue;
        }
        let c = -(pm - p_eq) / (r_a * slope);
        if c > 0.0 && c.is_finite() {
            samples.push((pm, c));
        }
    }
    let fallback = typical::COMPLIANCE;
    let median = |mut v: Vec<f64>| -> Option<f64> {
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        Some(v[v.len() / 2])
    };
    let regress = |xs: &[f64], ys: &[f64]| -> Option<(f64, f64)> {
        let n = xs.len() as f64;
        if xs.len() < 2 {
            return None;
        }
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        if sxx == 0.0 {
            return None;
        }
        let slope = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
        Some((slope, my - slope * mx))
    };
    let c_med = median(samples.iter().map(|s| s.1).collect()).unwrap_or(fallback);
    let p_mid = 0.5 * (ps[0] + p_eq).abs().max(1.0);
    match kind {
        ComplianceKind::Constant => vec![c_med],
        ComplianceKind::Hyperbolic => {
            let k = median(samples.iter().map(|&(p, c)| 1.0 / (c * p)).collect())
                .unwrap_or(1.0 / (c_med * p_mid));
            vec![k]
        }
        ComplianceKind::ShiftedHyperbolic => {
            let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
            let ys: Vec<f64> = samples.iter().map(|s| 1.0 / s.1).collect();
            let total = 1.0 / c_med;
            match regress(&xs, &ys) {
                Some((k1, k2)) if k1 > 0.0 && k2 > 0.0 => vec![k1, k2],
                _ => vec![0.5 * total / p_mid, 0.5 * total],
            }
        }
        ComplianceKind::Exponential => {
            let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
            let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
            match regress(&xs, &ys) {
                Some((slope, intercept)) if slope < 0.0 => vec![intercept.exp(), -slope],
                _ => vec![c_med * (1e-4 * p_mid).exp(), 1e-4],
            }
        }
    }
}

/// Fits initial pressure, equilibrium pressure and the compliance parameters
/// of `kind` with `R_a` held fixed, integrating the full model at every
/// residual evaluation.
pub fn fit_compliance(
    trace: &PressureTrace,
    kind: ComplianceKind,
    options: &ComplianceFitOptions,
) -> Result<FitReport> {
    let n = trace.len();
    let n_params = 2 + kind.parameter_names().len();
    if n < n_params + 2 {
        return Err(Error::InsufficientData(format!(
            "{n} samples for {n_params} parameters"
        )));
    }
    let ps = trace.pressures();
    if ps.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "P",
            value: ps.iter().copied().fold(f64::INFINITY, f64::min),
            reason: "trace pressures must be > 0",
        });
    }
    if flat(ps) {
        return Err(Error::RankDeficient("flat trace: compliance is unobservable".into()));
    }
    let r_a = options.absorption_resistance;
    let p0 = ps[0];
    let p_eq = ps[n - 1];
    let theta0 = initial_compliance(kind, trace, p_eq, r_a);
    let times = trace.times();

    let build = |x: &[f64]| -> Result<(f64, f64, ComplianceModel)> {
        let v: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let model = ComplianceModel::from_parameters(kind, &v[2..])?;
        Ok((v[0], v[1], model))
    };
    let residuals = |x: &[f64]| -> Result<Vec<f64>> {
        let (p0, p_eq, model) = build(x)?;
        let params = SystemParams {
            absorption_resistance: r_a,
            formation_rate: options.formation_rate,
            sinus_pressure: p_eq - r_a * options.formation_rate,
            initial_pressure: p0,
            shunt: None,
            infusion: None,
            absorption_gate: None,
        };
        let rhs = RhsSpec::new(model, params, options.timeline.clone())?;
        let run = integrate_from(&rhs, p0, times, &options.integrator)?;
        Ok(run
            .trace
            .pressures()
            .iter()
            .zip(ps)
            .map(|(m, d)| m - d)
            .collect())
    };
    let x0: Vec<f64> = [p0, p_eq]
        .into_iter()
        .chain(theta0)
        .map(f64::ln)
        .collect();
    let lm_options = lm::LmOptions {
        fd_step: 1e-4,
        require_full_rank: false,
    };
    let out = lm::minimize(residuals, x0, &lm_options)?;
    let (p0, p_eq, model) = build(&out.x)?;
    let mut parameters = BTreeMap::from([
        ("P_0".to_string(), p0),
        ("P_eq".to_string(), p_eq),
    ]);
    for (name, value) in kind.parameter_names().iter().zip(model.parameters()) {
        parameters.insert(name.to_string(), value);
    }
    Ok(FitReport {
        model: kind.name().to_string(),
        parameters,
        rss: out.rss,
        samples: n,
        recovery_error: None,
        iterations: out.iterations,
        final_step_norm: out.step_norm,
        converged: out.converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedFit {
    pub rank: usize,
    pub tied_with_best: bool,
    pub report: FitReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateFailure {
    pub model: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRanking {
    /// Best (lowest RSS) first.
    pub ranked: Vec<RankedFit>,
    pub failures: Vec<CandidateFailure>,
}

impl ModelRanking {
    pub fn best(&self) -> Option<&FitReport> {
        self.ranked.first().map(|r| &r.report)
    }

    pub fn get(&self, kind: ComplianceKind) -> Option<&RankedFit> {
        self.ranked.iter().find(|r| r.report.model == kind.name())
    }
}

/// Whether two residual sums are indistinguishable at `tolerance`.
///
/// Sums below `1e-10 * sum(P^2)` (an RMS misfit under 1e-5 relative) count as
/// an exact fit.
fn tied(a: f64, b: f64, tolerance: f64, floor: f64) -> bool {
    (a - b).abs() <= tolerance * a.max(b) + floor
}

/// Fits every candidate and ranks them by residual sum of squares. A
/// candidate whose fit fails is listed under `failures`.
pub fn compare_models(
    trace: &PressureTrace,
    candidates: &[ComplianceKind],
    options: &ComplianceFitOptions,
) -> Result<ModelRanking> {
    if candidates.is_empty() {
        return Err(Error::Config("no candidate compliance models".into()));
    }
    let mut fits = Vec::new();
    let mut failures = Vec::new();
    let mut seen = Vec::new();
    for &kind in candidates {
        if seen.contains(&kind) {
            continue;
        }
        seen.push(kind);
        match fit_compliance(trace, kind, options) {
            Ok(report) => fits.push(report),
            Err(e) => failures.push(CandidateFailure {
                model: kind.name().to_string(),
                error: e.to_string(),
            }),
        }
    }
    fits.sort_by(|a, b| a.rss.total_cmp(&b.rss));
    let floor = 1e-10 * trace.pressures().iter().map(|p| p * p).sum::<f64>();
    let best = fits.first().map(|f| f.rss);
    let ranked = fits
        .into_iter()
        .enumerate()
        .map(|(i, report)| RankedFit {
            rank: i + 1,
            tied_with_best: best.is_some_and(|b| tied(b, report.rss, options.tie_tolerance, floor)),
            report,
        })
        .collect();
    Ok(ModelRanking { ranked, failures })
}
