//! Self-check suite: every closed form against the integrator, plus the
//! steady-state, jump, continuity, estimation and figure invariants.

use serde::Serialize;

use crate::analytic::{instant_bolus_curve, FiniteBolus, FiniteBolusSolution};
use crate::error::{Error, Result};
use crate::estimation::{fit_bolus_response, pvi_from_points, BolusKnowns};
use crate::io::figure_to_csv;
use crate::model::{
    infusion_steady_state, shunted_fixed_point, ComplianceKind, ComplianceModel, Infusion,
    PressureTrace, Provenance, SystemParams,
};
use crate::numeric::{fixed_point, integrate_on, residual_check, uniform_grid, IntegratorConfig, RhsSpec};
use crate::scenario::{figure_data, run, SampleGrid, Scenario, SolverChoice};
use crate::timeline::{Event, EventTimeline};
use crate::typical;

/// Closed forms that can be perturbed to exercise the suite's failure path.
pub const PERTURBABLE: [&str; 9] = [
    "linear_no_source",
    "linear_impulse_bolus",
    "linear_infusion",
    "linear_shunt",
    "riccati_no_source",
    "riccati_finite_bolus",
    "riccati_instant_bolus",
    "riccati_gated_growth",
    "riccati_infusion",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// Passes when `measured <= tolerance`.
    AtMost,
    /// Passes when `measured > tolerance`.
    Exceeds,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub bound: Bound,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, measured: f64, tolerance: f64, bound: Bound) -> Self {
        let passed = match bound {
            Bound::AtMost => measured <= tolerance,
            Bound::Exceeds => measured > tolerance,
        };
        Self {
            name: name.into(),
            measured,
            tolerance,
            bound,
            passed,
        }
    }

    fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self::new(name, measured, tolerance, Bound::AtMost)
    }

    fn failed(name: impl Into<String>, error: &Error) -> Self {
        let mut c = Self::at_most(name, f64::INFINITY, 0.0);
        c.name = format!("{} ({error})", c.name);
        c
    }
}

/// Multiplies the named closed form's output by `1 + relative`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub target: String,
    pub relative: f64,
}

impl Perturbation {
    pub fn new(target: &str, relative: f64) -> Result<Self> {
        if !PERTURBABLE.contains(&target) {
            return Err(Error::Config(format!(
                "unknown perturbation target `{target}`; expected one of {}",
                PERTURBABLE.join(", ")
            )));
        }
        Ok(Self {
            target: target.to_string(),
            relative,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationSummary {
    pub checks: Vec<Check>,
}

impl ValidationSummary {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Fixed-width text table, one check per line.
    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        let mut out = format!("{:<width$}  {:>12}  {:>10}  result\n", "check", "measured", "tolerance");
        for c in &self.checks {
            let op = match c.bound {
                Bound::AtMost => "<=",
                Bound::Exceeds => ">",
            };
            out.push_str(&format!(
                "{:<width$}  {:>12.3e}  {op}{:>8.1e}  {}\n",
                c.name,
                c.measured,
                c.tolerance,
                if c.passed { "PASS" } else { "FAIL" }
            ));
        }
        let failed = self.failures().count();
        out.push_str(&format!("{} checks, {failed} failed\n", self.checks.len()));
        out
    }
}

const ORACLE_TOLERANCE: f64 = 1e-6;

fn oracle_integrator() -> IntegratorConfig {
    IntegratorConfig::default().with_tolerance(1e-11, 1e-12)
}

fn oracle_scenarios() -> Result<Vec<Scenario>> {
    let params = SystemParams::typical();
    let p_eq = params.equilibrium_pressure();
    let at_rest = params.with_initial_pressure(p_eq);
    let constant = ComplianceModel::typical(ComplianceKind::Constant);
    let hyperbolic = ComplianceModel::typical(ComplianceKind::Hyperbolic);
    let tl = EventTimeline::new;
    let pulse = typical::PULSE_HEIGHT * typical::COMPLIANCE;
    Ok(vec![
        Scenario::new("linear_no_source", constant, params, EventTimeline::empty()),
        Scenario::new(
            "linear_impulse_bolus",
            constant,
            params,
            tl(vec![Event::InstantBolus {
                volume: pulse,
                time: typical::PULSE_TIME,
            }])?,
        ),
        Scenario::new(
            "linear_infusion",
            constant,
            params,
            tl(vec![Event::Infusion {
                rate: typical::INFUSION_RATE,
                resistance: typical::INFUSION_RESISTANCE,
                start: typical::INFUSION_START,
            }])?,
        ),
        Scenario::new(
            "linear_shunt",
            constant,
            params,
            tl(vec![Event::Shunt {
                resistance: typical::SHUNT_RESISTANCE,
                opening_pressure: typical::OPENING_PRESSURE,
                start: typical::SHUNT_START,
            }])?,
        ),
        Scenario::new("riccati_no_source", hyperbolic, params, EventTimeline::empty()),
        Scenario::new(
            "riccati_finite_bolus",
            hyperbolic,
            at_rest,
            tl(vec![Event::FiniteBolus {
                rate: 0.04,
                start: typical::BOLUS_START,
                duration: typical::BOLUS_DURATION,
            }])?,
        ),
        Scenario::new(
            "riccati_instant_bolus",
            hyperbolic,
            at_rest,
            tl(vec![Event::InstantBolus { volume: 0.2, time: 0.0 }])?,
        ),
        Scenario::new(
            "riccati_gated_growth",
            hyperbolic,
            at_rest,
            tl(vec![
                Event::InstantBolus {
                    volume: typical::WITHDRAWAL_VOLUME,
                    time: 0.0,
                },
                Event::AbsorptionGate { start: 10.0 },
            ])?,
        ),
        Scenario::new(
            "riccati_infusion",
            hyperbolic,
            at_rest,
            tl(vec![Event::Infusion {
                rate: typical::INFUSION_RATE,
                resistance: typical::INFUSION_RESISTANCE,
                start: typical::INFUSION_START,
            }])?,
        ),
    ])
}

/// Closed form versus integrator on `t` in `[0, 60]`, for each closed form.
fn oracle_checks(perturbation: Option<&Perturbation>, checks: &mut Vec<Check>) -> Result<()> {
    let grid = SampleGrid {
        start: 0.0,
        end: 60.0,
        step: 0.05,
    };
    for scenario in oracle_scenarios()? {
        let name = format!("oracle_{}", scenario.name);
        let form = scenario.closed_form().map(|f| f.name());
        if form != Some(scenario.name.as_str()) {
            return Err(Error::Config(format!(
                "{} resolved to closed form {form:?}",
                scenario.name
            )));
        }
        let scenario = scenario
            .with_grid(grid)
            .with_solver(SolverChoice::Both)
            .with_integrator(oracle_integrator());
        let out = match run(&scenario) {
            Ok(out) => out,
            Err(e) => {
                checks.push(Check::failed(name, &e));
                continue;
            }
        };
        let mut analytic = out.analytic.expect("both solvers requested");
        if let Some(p) = perturbation.filter(|p| p.target == scenario.name) {
            analytic = analytic.scaled(1.0 + p.relative)?;
        }
        let numeric = out.numeric.expect("both solvers requested");
        checks.push(Check::at_most(
            name,
            numeric.max_relative_deviation(&analytic)?,
            ORACLE_TOLERANCE,
        ));
    }
    Ok(())
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    (max - min) / min.abs()
}

fn long_time_pressure(model: ComplianceModel, params: SystemParams, events: Vec<Event>, end: f64) -> Result<f64> {
    let rhs = RhsSpec::new(model, params, EventTimeline::new(events)?)?;
    let times = uniform_grid(0.0, end, end / 10.0)?;
    let run = integrate_on(&rhs, &times, &oracle_integrator())?;
    Ok(run.trace.last().expect("non-empty").1)
}

fn equilibrium_checks(checks: &mut Vec<Check>) -> Result<()> {
    let params = SystemParams::typical();
    let shunted = params.with_shunt(SystemParams::typical_shunt());
    let shunt_event = Event::Shunt {
        resistance: typical::SHUNT_RESISTANCE,
        opening_pressure: typical::OPENING_PRESSURE,
        start: 0.0,
    };
    let mut fixed = Vec::new();
    let mut fixed_shunted = Vec::new();
    let mut long = Vec::new();
    for kind in ComplianceKind::ALL {
        let model = ComplianceModel::typical(kind);
        let rhs = RhsSpec::new(model, params, EventTimeline::empty())?;
        fixed.push(fixed_point(&rhs, 0.0)?);
        let rhs = RhsSpec::new(model, params, EventTimeline::new(vec![shunt_event])?)?;
        fixed_shunted.push(fixed_point(&rhs, 0.0)?);
        long.push(long_time_pressure(model, params, vec![], 400.0)?);
    }
    checks.push(Check::at_most("fixed_point_universality", spread(&fixed), 1e-9));
    checks.push(Check::at_most("shunted_fixed_point_universality", spread(&fixed_shunted), 1e-9));
    checks.push(Check::at_most("long_time_universality", spread(&long), 1e-4));
    checks.push(Check::at_most(
        "equilibrium_pressure_116.8",
        relative(fixed[0], 116.8),
        1e-12,
    ));
    let p_ss = long_time_pressure(
        ComplianceModel::typical(ComplianceKind::Constant),
        params,
        vec![Event::Infusion {
            rate: typical::INFUSION_RATE,
            resistance: typical::INFUSION_RESISTANCE,
            start: typical::INFUSION_START,
        }],
        400.0,
    )?;
    checks.push(Check::at_most("infusion_steady_state_246.4", relative(p_ss, 246.4), 1e-4));

    // The shunted fixed point is canonical in its mass-balance form.
    let fp = shunted_fixed_point(&shunted)?;
    let numeric = long_time_pressure(
        ComplianceModel::typical(ComplianceKind::Constant),
        params,
        vec![Event::Shunt {
            resistance: typical::SHUNT_RESISTANCE,
            opening_pressure: typical::OPENING_PRESSURE,
            start: typical::SHUNT_START,
        }],
        400.0,
    )?;
    checks.push(Check::at_most(
        "shunt_fixed_point_mass_balance",
        relative(numeric, fp.mass_balance),
        1e-4,
    ));
    let printed_gap = fp.printed.map_or(f64::INFINITY, |p| relative(p, fp.mass_balance));
    checks.push(Check::new("shunt_printed_formula_divergent", printed_gap, 1e-4, Bound::Exceeds));
    Ok(())
}

fn infusion_identity_checks(checks: &mut Vec<Check>) -> Result<()> {
    let mut worst: f64 = 0.0;
    for r_i in [typical::INFUSION_RESISTANCE, 300.0, 1234.5] {
        let params = SystemParams::typical().with_infusion(Infusion {
            resistance: r_i,
            ..SystemParams::typical_infusion()
        });
        let ss = infusion_steady_state(&params)?;
        worst = worst.max(relative(ss.from_apparatus, ss.from_absorption));
    }
    checks.push(Check::at_most("infusion_steady_state_identity", worst, 4.0 * f64::EPSILON));
    Ok(())
}

fn jump_checks(checks: &mut Vec<Check>) -> Result<()> {
    let params = SystemParams::typical();
    let p_eq = params.equilibrium_pressure();
    let k = typical::PV_EXPONENT;
    let mut worst: f64 = 0.0;
    for dv in [0.2, -0.2, 0.05] {
        let analytic = instant_bolus_curve(p_eq, k, params.absorption_resistance, dv, 0.0);
        worst = worst.max(((analytic / p_eq).ln() - k * dv).abs());
        let scenario = Scenario::new(
            "jump",
            ComplianceModel::hyperbolic(k)?,
            params.with_initial_pressure(p_eq),
            EventTimeline::new(vec![Event::InstantBolus { volume: dv, time: 4.0 }])?,
        )
        .with_solver(SolverChoice::Numeric)
        .with_grid(SampleGrid { start: 0.0, end: 5.0, step: 0.5 });
        let trace = run(&scenario)?.numeric.expect("numeric requested");
        let i = trace.times().iter().position(|&t| t == 4.0).expect("t0 on grid");
        let jump = (trace.pressures()[i] / trace.pressures()[i - 1]).ln();
        worst = worst.max((jump - k * dv).abs());
    }
    checks.push(Check::at_most("nonlinear_log_jump", worst, 1e-9));

    let fig = figure_data(2)?;
    let i = fig.times.iter().position(|&t| t == typical::PULSE_TIME).expect("t0 on grid");
    let constant = ComplianceModel::typical(ComplianceKind::Constant);
    let baseline = crate::analytic::linear_solve(
        &crate::analytic::LinearScenario::NoSource,
        &params,
        &constant,
        typical::PULSE_TIME,
    )?;
    checks.push(Check::at_most(
        "linear_impulse_jump_40",
        (fig.columns[0].1[i] - baseline - 40.0).abs(),
        1e-9,
    ));
    Ok(())
}

fn gated_checks(checks: &mut Vec<Check>) -> Result<()> {
    let params = SystemParams::typical();
    let k = typical::PV_EXPONENT;
    let p0 = 100.0;
    let scenario = Scenario::new(
        "gated",
        ComplianceModel::hyperbolic(k)?,
        params.with_initial_pressure(p0),
        EventTimeline::new(vec![Event::AbsorptionGate { start: 30.0 }])?,
    )
    .with_solver(SolverChoice::Numeric)
    .with_integrator(oracle_integrator())
    .with_grid(SampleGrid { start: 0.0, end: 29.95, step: 0.05 });
    let trace = run(&scenario)?.numeric.expect("numeric requested");
    let worst = trace
        .iter()
        .map(|(t, p)| relative(p, p0 * (k * params.formation_rate * t).exp()))
        .fold(0.0, f64::max);
    checks.push(Check::at_most("gated_growth_exponential", worst, 1e-6));
    Ok(())
}

fn continuity_checks(checks: &mut Vec<Check>) -> Result<()> {
    let params = SystemParams::typical();
    let mut worst: f64 = 0.0;
    for (rate, p0) in [(0.04, params.equilibrium_pressure()), (typical::BOLUS_RATE, 244.0), (-0.01, 200.0)] {
        let sol = FiniteBolusSolution::new(
            &params.with_initial_pressure(p0),
            typical::PV_EXPONENT,
            FiniteBolus {
                rate,
                start: typical::BOLUS_START,
                duration: typical::BOLUS_DURATION,
            },
        )?;
        let (t_b, t_end) = sol.breakpoints();
        worst = worst.max(relative(sol.during(t_b), sol.before(t_b)));
        worst = worst.max(relative(sol.after(t_end), sol.during(t_end)));
    }
    checks.push(Check::at_most("finite_bolus_continuity", worst, 1e-9));
    Ok(())
}

fn residual_checks(checks: &mut Vec<Check>) -> Result<()> {
    // Centred differences carry a truncation error of h^2 |P'''| / 6; from
    // P_0 = 244 that is about 1.5e-4 (linear) and 4.8e-4 (hyperbolic) at h = 0.01.
    let mut residuals = Vec::new();
    for (kind, bound) in [(ComplianceKind::Constant, 2e-4), (ComplianceKind::Hyperbolic, 6e-4)] {
        let mut at = Vec::new();
        for step in [0.01, 0.005] {
            let scenario = Scenario::new(
                "residual",
                ComplianceModel::typical(kind),
                SystemParams::typical(),
                EventTimeline::empty(),
            )
            .with_solver(SolverChoice::Analytic)
            .with_grid(SampleGrid { start: 0.0, end: 30.0, step });
            let trace = run(&scenario)?.analytic.expect("analytic requested");
            at.push(residual_check(&trace, &scenario.rhs()?)?);
        }
        checks.push(Check::at_most(format!("residual_{}_no_source", kind.name()), at[0], bound));
        residuals.push(at);
    }
    let order_error = residuals
        .iter()
        .map(|r| ((r[0] / r[1]).log2() - 2.0).abs())
        .fold(0.0, f64::max);
    checks.push(Check::at_most("residual_order_h2", order_error, 0.05));
    Ok(())
}

fn estimation_checks(checks: &mut Vec<Check>) -> Result<()> {
    let mut worst: f64 = 0.0;
    for (k, r_a) in [(1.0, 600.0), (0.5, 300.0), (2.0, 1200.0)] {
        let p_eq = r_a * typical::FORMATION_RATE + typical::SINUS_PRESSURE;
        let span = 6.0 * r_a / (k * p_eq);
        let times: Vec<f64> = (0..200).map(|i| i as f64 * span / 199.0).collect();
        let ps = times.iter().map(|&t| instant_bolus_curve(p_eq, k, r_a, 0.2, t)).collect();
        let trace = PressureTrace::new(times, ps, Provenance::Analytic, "round_trip")?;
        let fit = fit_bolus_response(&trace, 0.2, &BolusKnowns::default())?
            .with_truth(&[("k", k), ("R_a", r_a)]);
        let errs = fit.recovery_error.expect("truth supplied");
        worst = errs.values().copied().fold(worst, f64::max);
    }
    checks.push(Check::at_most("bolus_fit_round_trip", worst, 0.01));

    let mut worst_pvi: f64 = 0.0;
    for model in [ComplianceModel::hyperbolic(1.0)?, ComplianceModel::hyperbolic(0.5)?] {
        let pts: Vec<(f64, f64)> = [-0.4, 0.0, 0.3, 0.8]
            .iter()
            .map(|&dv| model.pv_relation(dv, 150.0).map(|p| (dv, p)))
            .collect::<Result<_>>()?;
        let est = pvi_from_points(&pts, 150.0)?;
        let truth = 1.0 / model.parameters()[0];
        worst_pvi = worst_pvi.max(relative(est.pvi, truth));
        let p = model.pv_relation(0.6, 150.0)?;
        worst_pvi = worst_pvi.max(relative(model.pvi(0.6, p, 150.0)?, truth));
    }
    let shifted = ComplianceModel::shifted_hyperbolic(typical::SHIFTED_K1, typical::SHIFTED_K2)?;
    let p = shifted.pv_relation(0.6, 150.0)?;
    worst_pvi = worst_pvi.max(relative(shifted.pvi(0.6, p, 150.0)?, 1.0 / typical::SHIFTED_K1));
    checks.push(Check::at_most("pvi_round_trip", worst_pvi, 1e-9));
    Ok(())
}

/// Count of qualitative-shape violations across the seven figures.
pub fn figure_shape_violations() -> Result<Vec<String>> {
    let mut bad = Vec::new();
    let p_eq = SystemParams::typical().equilibrium_pressure();
    let monotone_down = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let col = |id: u32| -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let f = figure_data(id)?;
        Ok((f.times, f.columns.into_iter().map(|c| c.1).collect()))
    };
    let near = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol;

    let (_, c) = col(1)?;
    if !monotone_down(&c[0]) || !near(*c[0].last().unwrap(), p_eq, 1e-2) {
        bad.push("fig1: expected monotone decay to P_eq".into());
    }
    for (id, sign) in [(2u32, 1.0), (3, -1.0)] {
        let (t, c) = col(id)?;
        let i = t.iter().position(|&x| x == typical::PULSE_TIME).unwrap();
        let p = &c[0];
        let smooth = p[i - 1] - p[i - 2];
        let jump = p[i] - p[i - 1] - smooth;
        if !near(jump, sign * typical::PULSE_HEIGHT, 0.05) || !near(*p.last().unwrap(), p_eq, 1e-2) {
            bad.push(format!("fig{id}: expected a {:+} jump at t_0 and return to P_eq", sign * 40.0));
        }
    }
    let (t, c) = col(4)?;
    let before = t.iter().position(|&x| x >= typical::INFUSION_START).unwrap();
    let rising = c[0][before..].windows(2).all(|w| w[1] > w[0]);
    if !rising || !near(*c[0].last().unwrap(), 246.4, 0.1) {
        bad.push("fig4: expected a rise to the 246.4 plateau".into());
    }
    let (_, c) = col(5)?;
    if c.len() != 2 || !c.iter().all(|v| monotone_down(v) && relative(*v.last().unwrap(), p_eq) < 0.01) {
        bad.push("fig5: expected two monotone decays to P_eq".into());
    }
    let (_, c) = col(6)?;
    let mut distinct: Vec<f64> = c[0].clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct != vec![0.0, typical::BOLUS_RATE] {
        bad.push(format!("fig6: expected values {{0, S_b}}, got {distinct:?}"));
    }
    let (t, c) = col(7)?;
    let i = t.iter().position(|&x| x == typical::PULSE_TIME).unwrap();
    let p = &c[0];
    let flat_before = p[..i].iter().all(|&x| x == p_eq);
    let recovering = p[i..].windows(2).all(|w| w[1] > w[0]);
    if !flat_before || !recovering || p[i] >= p_eq || relative(*p.last().unwrap(), p_eq) > 0.01 {
        bad.push("fig7: expected a drop at t_0 and recovery toward P_eq".into());
    }
    Ok(bad)
}

fn figure_checks(checks: &mut Vec<Check>) -> Result<()> {
    let violations = figure_shape_violations()?;
    checks.push(Check::at_most("figure_shapes", violations.len() as f64, 0.0));
    let mut differing = 0;
    for id in 1..=7 {
        if figure_to_csv(&figure_data(id)?) != figure_to_csv(&figure_data(id)?) {
            differing += 1;
        }
    }
    checks.push(Check::at_most("figure_determinism", differing as f64, 0.0));
    Ok(())
}

type CheckGroup<'a> = (&'static str, &'a dyn Fn(&mut Vec<Check>) -> Result<()>);

/// Runs every check. Errors inside a check are recorded as failures rather
/// than aborting the suite.
pub fn run_suite(perturbation: Option<&Perturbation>) -> ValidationSummary {
    let mut checks = Vec::new();
    let groups: [CheckGroup; 9] = [
        ("oracle", &|c| oracle_checks(perturbation, c)),
        ("equilibrium", &equilibrium_checks),
        ("infusion_identity", &infusion_identity_checks),
        ("jumps", &jump_checks),
        ("gated", &gated_checks),
        ("continuity", &continuity_checks),
        ("residual", &residual_checks),
        ("estimation", &estimation_checks),
        ("figures", &figure_checks),
    ];
    for (name, group) in groups {
        if let Err(e) = group(&mut checks) {
            checks.push(Check::failed(name, &e));
        }
    }
    ValidationSummary { checks }
}
