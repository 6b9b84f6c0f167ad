//! Experiments: a compliance law, circuit constants and a timeline, solved in
//! closed form where one exists, numerically, or both.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analytic::{
    gated_growth, linear_solve, riccati_finite_bolus, riccati_gated_growth, riccati_infusion,
    riccati_instant_bolus, riccati_no_source, riccati_relax, FiniteBolus, LinearScenario,
};
use crate::error::{Error, Result};
use crate::model::{
    equilibrium_pressure, infusion_steady_state, shunted_fixed_point, ComplianceKind,
    ComplianceModel, Infusion, InfusionSteadyState, PressureTrace, Provenance, ShuntValve,
    ShuntedFixedPoint, SystemParams,
};
use crate::numeric::{integrate_on, uniform_grid, IntegratorConfig, RhsSpec};
use crate::timeline::{Event, EventTimeline};
use crate::typical;

/// Scenarios that have a closed form.
pub const CLOSED_FORM_CATALOG: &str = "constant compliance: no source | one instant_bolus | one infusion | one shunt; \
hyperbolic compliance: no source | one finite_bolus | one instant_bolus | one infusion | \
absorption_gate (optionally with an instant_bolus at t = 0)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    /// Closed form if the scenario has one, otherwise numeric.
    #[default]
    Auto,
    /// Closed form only; an error if none exists.
    Analytic,
    Numeric,
    /// Closed form and numeric, with their largest relative discrepancy.
    Both,
}

/// Output sample grid, min.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl Default for SampleGrid {
    fn default() -> Self {
        Self {
            start: 0.0,
            end: 30.0,
            step: 0.05,
        }
    }
}

impl SampleGrid {
    pub fn times(&self) -> Result<Vec<f64>> {
        uniform_grid(self.start, self.end, self.step)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub compliance: ComplianceModel,
    pub params: SystemParams,
    pub timeline: EventTimeline,
    pub grid: SampleGrid,
    pub solver: SolverChoice,
    pub integrator: IntegratorConfig,
}

impl Scenario {
    pub fn new(
        name: impl Into<String>,
        compliance: ComplianceModel,
        params: SystemParams,
        timeline: EventTimeline,
    ) -> Self {
        Self {
            name: name.into(),
            compliance,
            params,
            timeline,
            grid: SampleGrid::default(),
            solver: SolverChoice::default(),
            integrator: IntegratorConfig::default(),
        }
    }

    pub fn with_grid(mut self, grid: SampleGrid) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_solver(mut self, solver: SolverChoice) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_integrator(mut self, integrator: IntegratorConfig) -> Self {
        self.integrator = integrator;
        self
    }

    /// Circuit constants with the shunt, infusion and gate blocks taken from the timeline.
    pub fn effective_params(&self) -> SystemParams {
        let mut params = self.params;
        for e in self.timeline.events() {
            match *e {
                Event::Infusion {
                    rate,
                    resistance,
                    start,
                } => {
                    params.infusion = Some(match params.infusion {
                        // Several infusions add up; keep the first apparatus.
                        Some(prev) if prev.start <= start => Infusion {
                            rate: prev.rate + rate,
                            ..prev
                        },
                        _ => Infusion {
                            resistance,
                            rate,
                            start,
                        },
                    })
                }
                Event::Shunt {
                    resistance,
                    opening_pressure,
                    start,
                } => {
                    params.shunt = Some(ShuntValve {
                        resistance,
                        opening_pressure,
                        activation_time: start,
                    })
                }
                Event::AbsorptionGate { start } => params.absorption_gate = Some(start),
                _ => {}
            }
        }
        params
    }

    pub fn rhs(&self) -> Result<RhsSpec> {
        RhsSpec::new(self.compliance, self.params, self.timeline.clone())
    }

    /// The closed form for this scenario, if there is one.
    pub fn closed_form(&self) -> Option<ClosedForm> {
        let events = self.timeline.events();
        match self.compliance {
            ComplianceModel::Constant { c0 } => match events {
                [] => Some(ClosedForm::Linear(LinearScenario::NoSource)),
                [Event::InstantBolus { volume, time }] => {
                    Some(ClosedForm::Linear(LinearScenario::ImpulseBolus {
                        pulse: volume / c0,
                        time: *time,
                    }))
                }
                [Event::Infusion {
                    rate,
                    resistance,
                    start,
                }] => Some(ClosedForm::Linear(LinearScenario::ConstantInfusion {
                    rate: *rate,
                    resistance: *resistance,
                    start: *start,
                })),
                [Event::Shunt {
                    resistance,
                    opening_pressure,
                    start,
                }] => Some(ClosedForm::Linear(LinearScenario::Shunt {
                    resistance: *resistance,
                    opening_pressure: *opening_pressure,
                    start: *start,
                })),
                _ => None,
            },
            ComplianceModel::Hyperbolic { k } => {
                let plan = match events {
                    [] => RiccatiPlan::NoSource,
                    [Event::FiniteBolus {
                        rate,
                        start,
                        duration,
                    }] => RiccatiPlan::FiniteBolus(FiniteBolus {
                        rate: *rate,
                        start: *start,
                        duration: *duration,
                    }),
                    [Event::InstantBolus { volume, time }] => RiccatiPlan::InstantBolus {
                        volume: *volume,
                        time: *time,
                    },
                    [Event::AbsorptionGate { start }] => RiccatiPlan::Gated {
                        volume: 0.0,
                        gate: *start,
                    },
                    [Event::AbsorptionGate { start }, Event::InstantBolus { volume, time }]
                    | [Event::InstantBolus { volume, time }, Event::AbsorptionGate { start }]
                        if *time == 0.0 =>
                    {
                        RiccatiPlan::Gated {
                            volume: *volume,
                            gate: *start,
                        }
                    }
                    [Event::Infusion { rate, start, .. }] => RiccatiPlan::Infusion {
                        rate: *rate,
                        start: *start,
                    },
                    _ => return None,
                };
                Some(ClosedForm::Riccati { k, plan })
            }
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.compliance.validated()?;
        self.params.validate()?;
        if self.grid.start != 0.0 {
            return Err(Error::Config(format!(
                "sample grid must start at t = 0 (initial condition), got {}",
                self.grid.start
            )));
        }
        Ok(())
    }
}

/// A closed-form solution selected for a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedForm {
    Linear(LinearScenario),
    Riccati { k: f64, plan: RiccatiPlan },
}

/// Hyperbolic-compliance closed forms, generalised to an arbitrary
/// initial pressure by chaining source-free segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RiccatiPlan {
    NoSource,
    FiniteBolus(FiniteBolus),
    InstantBolus { volume: f64, time: f64 },
    Gated { volume: f64, gate: f64 },
    Infusion { rate: f64, start: f64 },
}

impl ClosedForm {
    pub fn name(&self) -> &'static str {
        match self {
            ClosedForm::Linear(LinearScenario::NoSource) => "linear_no_source",
            ClosedForm::Linear(LinearScenario::ImpulseBolus { .. }) => "linear_impulse_bolus",
            ClosedForm::Linear(LinearScenario::ConstantInfusion { .. }) => "linear_infusion",
            ClosedForm::Linear(LinearScenario::Shunt { .. }) => "linear_shunt",
            ClosedForm::Riccati { plan, .. } => match plan {
                RiccatiPlan::NoSource => "riccati_no_source",
                RiccatiPlan::FiniteBolus(_) => "riccati_finite_bolus",
                RiccatiPlan::InstantBolus { .. } => "riccati_instant_bolus",
                RiccatiPlan::Gated { .. } => "riccati_gated_growth",
                RiccatiPlan::Infusion { .. } => "riccati_infusion",
            },
        }
    }

    /// Pressure at `t` for the given compliance and constants.
    pub fn evaluate(&self, compliance: &ComplianceModel, params: &SystemParams, t: f64) -> Result<f64> {
        match *self {
            ClosedForm::Linear(ref s) => linear_solve(s, params, compliance, t),
            ClosedForm::Riccati { k, plan } => evaluate_riccati(plan, params, k, t),
        }
    }
}

fn evaluate_riccati(plan: RiccatiPlan, params: &SystemParams, k: f64, t: f64) -> Result<f64> {
    let p0 = params.initial_pressure;
    let p_eq = equilibrium_pressure(params);
    let alpha = k / params.absorption_resistance;
    match plan {
        RiccatiPlan::NoSource => riccati_no_source(params, k, p0, t),
        RiccatiPlan::FiniteBolus(b) => riccati_finite_bolus(params, k, b, t),
        RiccatiPlan::InstantBolus { volume, time } => {
            if t < time {
                return riccati_no_source(params, k, p0, t);
            }
            let before = riccati_no_source(params, k, p0, time)?;
            if before == p_eq {
                riccati_instant_bolus(params, k, volume, t - time)
            } else {
                riccati_no_source(params, k, before * (k * volume).exp(), t - time)
            }
        }
        RiccatiPlan::Gated { volume, gate } => {
            let growth = |t: f64| -> Result<f64> {
                if volume < 0.0 && p0 == p_eq {
                    riccati_gated_growth(params, k, volume, gate, t)
                } else {
                    Ok(gated_growth(p0 * (k * volume).exp(), k, params.formation_rate, t))
                }
            };
            if t < gate {
                growth(t)
            } else {
                let at_gate = if gate > 0.0 {
                    gated_growth(p0 * (k * volume).exp(), k, params.formation_rate, gate)
                } else {
                    p0 * (k * volume).exp()
                };
                riccati_no_source(params, k, at_gate, t - gate)
            }
        }
        RiccatiPlan::Infusion { rate, start } => {
            if p0 == p_eq {
                riccati_infusion(params, k, rate, start, t)
            } else if t < start {
                riccati_no_source(params, k, p0, t)
            } else {
                let before = riccati_no_source(params, k, p0, start)?;
                let target = p_eq + params.absorption_resistance * rate;
                riccati_relax(target, alpha, before, t - start)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyStateReport {
    pub equilibrium_pressure: f64,
    pub infusion_steady_state: Option<InfusionSteadyState>,
    pub shunted_fixed_point: Option<ShuntedFixedPoint>,
    /// Whether the printed shunt formula disagrees with the mass-balance fixed point.
    pub printed_shunt_formula_divergent: Option<bool>,
    /// Linearised rate `1 / (C(P_eq) R_a)` at the equilibrium, 1/min.
    pub relaxation_rate: f64,
    /// `nu_a`, `alpha_P_eq`, or `linearized`.
    pub relaxation_rate_kind: &'static str,
    pub shunt_open_at_activation: Option<bool>,
    pub closed_form: Option<&'static str>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub analytic: Option<PressureTrace>,
    pub numeric: Option<PressureTrace>,
    /// Largest pointwise `|numeric - analytic| / analytic`, when both were computed.
    pub max_rel_discrepancy: Option<f64>,
    pub report: SteadyStateReport,
}

impl RunOutput {
    /// The closed-form trace if computed, else the numeric one.
    pub fn primary(&self) -> &PressureTrace {
        self.analytic
            .as_ref()
            .or(self.numeric.as_ref())
            .expect("run produces at least one trace")
    }
}

fn analytic_trace(scenario: &Scenario, form: &ClosedForm, times: &[f64]) -> Result<PressureTrace> {
    let pressures = times
        .iter()
        .map(|&t| form.evaluate(&scenario.compliance, &scenario.params, t))
        .collect::<Result<Vec<_>>>()?;
    PressureTrace::new(times.to_vec(), pressures, Provenance::Analytic, scenario.name.clone())
}

fn steady_state_report(scenario: &Scenario) -> Result<SteadyStateReport> {
    let params = scenario.effective_params();
    let p_eq = equilibrium_pressure(&params);
    let mut warnings = Vec::new();

    let infusion = params.infusion.map(|_| infusion_steady_state(&params)).transpose()?;
    let shunt = match params.shunt {
        Some(_) => match shunted_fixed_point(&params) {
            Ok(fp) => Some(fp),
            Err(e @ Error::ShuntClosed { .. }) => {
                warnings.push(e.to_string());
                None
            }
            Err(e) => return Err(e),
        },
        None => None,
    };
    let divergent = shunt.map(|fp| match fp.printed {
        Some(printed) => (printed - fp.mass_balance).abs() > 1e-9 * fp.mass_balance.abs(),
        None => true,
    });
    let relaxation_rate = 1.0 / (scenario.compliance.compliance_at(p_eq)? * params.absorption_resistance);
    let kind = match scenario.compliance.kind() {
        ComplianceKind::Constant => "nu_a",
        ComplianceKind::Hyperbolic => "alpha_P_eq",
        _ => "linearized",
    };
    Ok(SteadyStateReport {
        equilibrium_pressure: p_eq,
        infusion_steady_state: infusion,
        shunted_fixed_point: shunt,
        printed_shunt_formula_divergent: divergent,
        relaxation_rate,
        relaxation_rate_kind: kind,
        shunt_open_at_activation: None,
        closed_form: scenario.closed_form().map(|f| f.name()),
        warnings,
    })
}

/// Solves a scenario with the requested solver(s) and reports its steady states.
pub fn run(scenario: &Scenario) -> Result<RunOutput> {
    scenario.validate()?;
    let times = scenario.grid.times()?;
    let form = scenario.closed_form();
    let unsupported = || Error::UnsupportedScenario {
        catalog: CLOSED_FORM_CATALOG.to_string(),
    };
    let (want_analytic, want_numeric) = match scenario.solver {
        SolverChoice::Auto => (form.is_some(), form.is_none()),
        SolverChoice::Analytic => (true, false),
        SolverChoice::Numeric => (false, true),
        SolverChoice::Both => (true, true),
    };
    let analytic = if want_analytic {
        let form = form.as_ref().ok_or_else(unsupported)?;
        Some(analytic_trace(scenario, form, &times)?)
    } else {
        None
    };

    let mut report = steady_state_report(scenario)?;
    let numeric = if want_numeric {
        let run = integrate_on(&scenario.rhs()?, &times, &scenario.integrator)?;
        report.shunt_open_at_activation = run.shunt_open_at_activation;
        let trace = run.trace;
        let trace = PressureTrace::new(
            trace.times().to_vec(),
            trace.pressures().to_vec(),
            Provenance::Numeric,
            scenario.name.clone(),
        )?;
        Some(trace)
    } else {
        None
    };
    if report.shunt_open_at_activation.is_none() {
        if let (Some(Event::Shunt { start, opening_pressure, .. }), Some(trace)) =
            (scenario.timeline.shunt(), analytic.as_ref().or(numeric.as_ref()))
        {
            if let Some(i) = trace.times().iter().position(|&t| t >= start) {
                report.shunt_open_at_activation = Some(trace.pressures()[i] > opening_pressure);
            }
        }
    }
    if report.shunt_open_at_activation == Some(false) {
        report
            .warnings
            .push("shunt activated with P(t_s) <= P_op; the valve stays closed at t_s".into());
    }

    let max_rel_discrepancy = match (&analytic, &numeric) {
        (Some(a), Some(n)) => Some(n.max_relative_deviation(a)?),
        _ => None,
    };
    Ok(RunOutput {
        analytic,
        numeric,
        max_rel_discrepancy,
        report,
    })
}

/// Data behind one of the seven illustrative figures.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureData {
    pub id: u32,
    pub title: &'static str,
    pub times: Vec<f64>,
    /// `(column name, values)`; the first is always `pressure_mmH2O`, except for
    /// the source-function figure where it carries `S(t)` in cc/min.
    pub columns: Vec<(&'static str, Vec<f64>)>,
    pub metadata: BTreeMap<&'static str, f64>,
    pub notes: Vec<String>,
}

/// Scenarios (analytic-solvable) behind each pressure figure; empty for the
/// source-function figure.
pub fn figure_scenarios(id: u32) -> Result<Vec<Scenario>> {
    let params = SystemParams::typical();
    let p_eq = params.equilibrium_pressure();
    let constant = ComplianceModel::typical(ComplianceKind::Constant);
    let hyperbolic = ComplianceModel::typical(ComplianceKind::Hyperbolic);
    let pulse_volume = typical::PULSE_HEIGHT * typical::COMPLIANCE;
    let tl = |events: Vec<Event>| EventTimeline::new(events);
    let scenarios = match id {
        1 => vec![Scenario::new("fig1", constant, params, EventTimeline::empty())],
        2 => vec![Scenario::new(
            "fig2",
            constant,
            params,
            tl(vec![Event::InstantBolus {
                volume: pulse_volume,
                time: typical::PULSE_TIME,
            }])?,
        )],
        3 => vec![Scenario::new(
            "fig3",
            constant,
            params,
            tl(vec![Event::InstantBolus {
                volume: -pulse_volume,
                time: typical::PULSE_TIME,
            }])?,
        )],
        4 => vec![Scenario::new(
            "fig4",
            constant,
            params,
            tl(vec![Event::Infusion {
                rate: typical::INFUSION_RATE,
                resistance: typical::INFUSION_RESISTANCE,
                start: typical::INFUSION_START,
            }])?,
        )],
        5 => vec![
            Scenario::new("fig5_linear", constant, params, EventTimeline::empty()),
            Scenario::new("fig5_nonlinear", hyperbolic, params, EventTimeline::empty()),
        ],
        6 => vec![],
        7 => vec![Scenario::new(
            "fig7",
            hyperbolic,
            params.with_initial_pressure(p_eq),
            tl(vec![Event::InstantBolus {
                volume: typical::WITHDRAWAL_VOLUME,
                time: typical::PULSE_TIME,
            }])?,
        )],
        other => return Err(Error::UnknownFigure(other)),
    };
    Ok(scenarios)
}

const TITLES: [&str; 7] = [
    "Relaxation of the CSF pressure toward equilibrium (linear model)",
    "Bolus injection at t_0: positive pressure pulse (linear model)",
    "Volume withdrawal at t_0: negative pressure pulse (linear model)",
    "Continuous infusion started at t_i (linear model)",
    "Relaxation to equilibrium: linear versus nonlinear model",
    "Source function of a finite bolus injection",
    "Recovery after an instantaneous withdrawal (nonlinear model)",
];

/// Time for the deviation from `target` to fall to `1/e` of its initial value.
fn e_folding_time(trace: &PressureTrace, target: f64) -> Option<f64> {
    let first = trace.pressures().first()? - target;
    let threshold = first.abs() / std::f64::consts::E;
    trace
        .iter()
        .find(|(_, p)| (p - target).abs() <= threshold)
        .map(|(t, _)| t)
}

pub fn figure_data(id: u32) -> Result<FigureData> {
    if !(1..=7).contains(&id) {
        return Err(Error::UnknownFigure(id));
    }
    let title = TITLES[(id - 1) as usize];
    let grid = SampleGrid::default();
    let times = grid.times()?;
    let mut metadata = BTreeMap::new();
    let mut notes = Vec::new();
    let params = SystemParams::typical();
    metadata.insert("P_eq", params.equilibrium_pressure());

    if id == 6 {
        let timeline = EventTimeline::new(vec![Event::FiniteBolus {
            rate: typical::BOLUS_RATE,
            start: typical::BOLUS_START,
            duration: typical::BOLUS_DURATION,
        }])?;
        let source = times.iter().map(|&t| timeline.source_at(t)).collect();
        metadata.insert("S_b", typical::BOLUS_RATE);
        metadata.insert("t_b", typical::BOLUS_START);
        metadata.insert("dt_b", typical::BOLUS_DURATION);
        return Ok(FigureData {
            id,
            title,
            times,
            columns: vec![("pressure_mmH2O", source)],
            metadata,
            notes: vec!["second column carries the source S(t) in cc/min".into()],
        });
    }

    let mut columns = Vec::new();
    let mut traces = Vec::new();
    for (i, scenario) in figure_scenarios(id)?.into_iter().enumerate() {
        let out = run(&scenario.with_grid(grid).with_solver(SolverChoice::Analytic))?;
        let trace = out.analytic.expect("analytic solver requested");
        let name = if i == 0 {
            "pressure_mmH2O"
        } else {
            "pressure_nonlinear_mmH2O"
        };
        metadata.insert(
            if i == 0 { "relaxation_rate" } else { "relaxation_rate_nonlinear" },
            out.report.relaxation_rate,
        );
        columns.push((name, trace.pressures().to_vec()));
        traces.push(trace);
    }

    match id {
        2 | 3 => {
            metadata.insert("P_bar", if id == 2 { 1.0 } else { -1.0 } * typical::PULSE_HEIGHT);
            metadata.insert("t_0", typical::PULSE_TIME);
        }
        4 => {
            let ss = infusion_steady_state(
                &params.with_infusion(SystemParams::typical_infusion()),
            )?;
            metadata.insert("P_ss", ss.value());
            metadata.insert("t_i", typical::INFUSION_START);
        }
        5 => {
            let p_eq = params.equilibrium_pressure();
            let linear = e_folding_time(&traces[0], p_eq).unwrap_or(f64::NAN);
            let nonlinear = e_folding_time(&traces[1], p_eq).unwrap_or(f64::NAN);
            metadata.insert("e_folding_time_linear", linear);
            metadata.insert("e_folding_time_nonlinear", nonlinear);
            let faster = if nonlinear < linear { "nonlinear" } else { "linear" };
            notes.push(format!(
                "measured: the {faster} model relaxes faster (1/e times {linear:.2} vs {nonlinear:.2} min)"
            ));
        }
        7 => {
            metadata.insert("delta_V", typical::WITHDRAWAL_VOLUME);
            metadata.insert("t_0", typical::PULSE_TIME);
        }
        _ => {}
    }
    Ok(FigureData {
        id,
        title,
        times,
        columns,
        metadata,
        notes,
    })
}
