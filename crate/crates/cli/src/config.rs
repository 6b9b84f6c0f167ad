//! TOML run configuration. Keys under `[params]` use the symbols of the
//! typical-value table; anything missing falls back to that table.

use serde::{Deserialize, Serialize};

use csfpv_core::scenario::SampleGrid;
use csfpv_core::typical;
use csfpv_core::{
    ComplianceKind, ComplianceModel, Event, EventTimeline, Scenario, SolverChoice, SystemParams,
};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub compliance: CompliancePick,
    #[serde(default, rename = "event", skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<EventSpec>,
    #[serde(default)]
    pub output: Output,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub C_0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub I_f_e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub P_0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub P_d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub P_bar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub P_prime: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub P_op: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub R_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub R_i: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub R_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub S_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub S_i: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_i: Option<f64>,
}

/// Every table value, resolved.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy)]
pub struct Resolved {
    pub C_0: f64,
    pub I_f_e: f64,
    pub k: f64,
    pub P_0: f64,
    pub P_d: f64,
    pub P_bar: f64,
    pub P_prime: f64,
    pub P_op: f64,
    pub R_a: f64,
    pub R_i: f64,
    pub R_s: f64,
    pub S_b: f64,
    pub S_i: f64,
    pub t_b: f64,
    pub dt_b: f64,
    pub t_s: f64,
    pub t_0: f64,
    pub t_i: f64,
}

impl Params {
    pub fn resolve(&self) -> Resolved {
        Resolved {
            C_0: self.C_0.unwrap_or(typical::COMPLIANCE),
            I_f_e: self.I_f_e.unwrap_or(typical::FORMATION_RATE),
            k: self.k.unwrap_or(typical::PV_EXPONENT),
            P_0: self.P_0.unwrap_or(typical::INITIAL_PRESSURE),
            P_d: self.P_d.unwrap_or(typical::SINUS_PRESSURE),
            P_bar: self.P_bar.unwrap_or(typical::PULSE_HEIGHT),
            P_prime: self.P_prime.unwrap_or(typical::REFERENCE_PRESSURE),
            P_op: self.P_op.unwrap_or(typical::OPENING_PRESSURE),
            R_a: self.R_a.unwrap_or(typical::ABSORPTION_RESISTANCE),
            R_i: self.R_i.unwrap_or(typical::INFUSION_RESISTANCE),
            R_s: self.R_s.unwrap_or(typical::SHUNT_RESISTANCE),
            S_b: self.S_b.unwrap_or(typical::BOLUS_RATE),
            S_i: self.S_i.unwrap_or(typical::INFUSION_RATE),
            t_b: self.t_b.unwrap_or(typical::BOLUS_START),
            dt_b: self.dt_b.unwrap_or(typical::BOLUS_DURATION),
            t_s: self.t_s.unwrap_or(typical::SHUNT_START),
            t_0: self.t_0.unwrap_or(typical::PULSE_TIME),
            t_i: self.t_i.unwrap_or(typical::INFUSION_START),
        }
    }

    fn explicit(r: &Resolved) -> Self {
        Self {
            C_0: Some(r.C_0),
            I_f_e: Some(r.I_f_e),
            k: Some(r.k),
            P_0: Some(r.P_0),
            P_d: Some(r.P_d),
            P_bar: Some(r.P_bar),
            P_prime: Some(r.P_prime),
            P_op: Some(r.P_op),
            R_a: Some(r.R_a),
            R_i: Some(r.R_i),
            R_s: Some(r.R_s),
            S_b: Some(r.S_b),
            S_i: Some(r.S_i),
            t_b: Some(r.t_b),
            dt_b: Some(r.dt_b),
            t_s: Some(r.t_s),
            t_0: Some(r.t_0),
            t_i: Some(r.t_i),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Law {
    #[default]
    Constant,
    Hyperbolic,
    ShiftedHyperbolic,
    Exponential,
}

/// `constant` and `hyperbolic` take `C_0` and `k` from `[params]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompliancePick {
    #[serde(default)]
    pub law: Law,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

/// Events; omitted fields take the matching `[params]` value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventSpec {
    FiniteBolus {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rate: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        duration: Option<f64>,
    },
    /// Default volume is the one raising a constant-compliance system by `P_bar`.
    InstantBolus {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        volume: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        time: Option<f64>,
    },
    Infusion {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rate: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resistance: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start: Option<f64>,
    },
    Shunt {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resistance: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        opening_pressure: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start: Option<f64>,
    },
    AbsorptionGate {
        start: f64,
    },
}

impl EventSpec {
    fn resolve(&self, r: &Resolved) -> Event {
        match *self {
            EventSpec::FiniteBolus {
                rate,
                start,
                duration,
            } => Event::FiniteBolus {
                rate: rate.unwrap_or(r.S_b),
                start: start.unwrap_or(r.t_b),
                duration: duration.unwrap_or(r.dt_b),
            },
            EventSpec::InstantBolus { volume, time } => Event::InstantBolus {
                volume: volume.unwrap_or(r.P_bar * r.C_0),
                time: time.unwrap_or(r.t_0),
            },
            EventSpec::Infusion {
                rate,
                resistance,
                start,
            } => Event::Infusion {
                rate: rate.unwrap_or(r.S_i),
                resistance: resistance.unwrap_or(r.R_i),
                start: start.unwrap_or(r.t_i),
            },
            EventSpec::Shunt {
                resistance,
                opening_pressure,
                start,
            } => Event::Shunt {
                resistance: resistance.unwrap_or(r.R_s),
                opening_pressure: opening_pressure.unwrap_or(r.P_op),
                start: start.unwrap_or(r.t_s),
            },
            EventSpec::AbsorptionGate { start } => Event::AbsorptionGate { start },
        }
    }

    fn explicit(event: &Event) -> Self {
        match *event {
            Event::FiniteBolus {
                rate,
                start,
                duration,
            } => EventSpec::FiniteBolus {
                rate: Some(rate),
                start: Some(start),
                duration: Some(duration),
            },
            Event::InstantBolus { volume, time } => EventSpec::InstantBolus {
                volume: Some(volume),
                time: Some(time),
            },
            Event::Infusion {
                rate,
                resistance,
                start,
            } => EventSpec::Infusion {
                rate: Some(rate),
                resistance: Some(resistance),
                start: Some(start),
            },
            Event::Shunt {
                resistance,
                opening_pressure,
                start,
            } => EventSpec::Shunt {
                resistance: Some(resistance),
                opening_pressure: Some(opening_pressure),
                start: Some(start),
            },
            Event::AbsorptionGate { start } => EventSpec::AbsorptionGate { start },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub solver: SolverChoice,
}

fn default_t_end() -> f64 {
    SampleGrid::default().end
}

fn default_dt() -> f64 {
    SampleGrid::default().step
}

impl Default for Output {
    fn default() -> Self {
        Self {
            t_end: default_t_end(),
            dt: default_dt(),
            solver: SolverChoice::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn compliance(&self) -> csfpv_core::Result<ComplianceModel> {
        let r = self.params.resolve();
        let c = &self.compliance;
        match c.law {
            Law::Constant => ComplianceModel::constant(r.C_0),
            Law::Hyperbolic => ComplianceModel::hyperbolic(r.k),
            Law::ShiftedHyperbolic => ComplianceModel::shifted_hyperbolic(
                c.k1.unwrap_or(typical::SHIFTED_K1),
                c.k2.unwrap_or(typical::SHIFTED_K2),
            ),
            Law::Exponential => ComplianceModel::exponential(
                c.a.unwrap_or(typical::EXPONENTIAL_A),
                c.b.unwrap_or(typical::EXPONENTIAL_B),
            ),
        }
    }

    pub fn scenario(&self) -> csfpv_core::Result<Scenario> {
        let r = self.params.resolve();
        let params = SystemParams {
            absorption_resistance: r.R_a,
            formation_rate: r.I_f_e,
            sinus_pressure: r.P_d,
            initial_pressure: r.P_0,
            shunt: None,
            infusion: None,
            absorption_gate: None,
        };
        params.validate()?;
        let timeline = EventTimeline::new(self.events.iter().map(|e| e.resolve(&r)).collect())?;
        let name = self.name.clone().unwrap_or_else(|| "simulate".to_string());
        Ok(Scenario::new(name, self.compliance()?, params, timeline)
            .with_grid(SampleGrid {
                start: 0.0,
                end: self.output.t_end,
                step: self.output.dt,
            })
            .with_solver(self.output.solver))
    }

    /// The same run with every default written out.
    pub fn effective(&self) -> csfpv_core::Result<Self> {
        let r = self.params.resolve();
        let model = self.compliance()?;
        let timeline = self.scenario()?.timeline;
        let compliance = match model {
            ComplianceModel::ShiftedHyperbolic { k1, k2 } => CompliancePick {
                law: Law::ShiftedHyperbolic,
                k1: Some(k1),
                k2: Some(k2),
                ..Default::default()
            },
            ComplianceModel::Exponential { a, b } => CompliancePick {
                law: Law::Exponential,
                a: Some(a),
                b: Some(b),
                ..Default::default()
            },
            _ => CompliancePick {
                law: self.compliance.law,
                ..Default::default()
            },
        };
        Ok(Self {
            name: self.name.clone(),
            params: Params::explicit(&r),
            compliance,
            events: timeline.events().iter().map(EventSpec::explicit).collect(),
            output: self.output.clone(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }
}

/// The compliance kind a `--model` flag names.
pub fn model_flag(name: &str) -> Option<ComplianceKind> {
    match name {
        "constant" | "linear" => Some(ComplianceKind::Constant),
        "hyperbolic" | "marmarou" => Some(ComplianceKind::Hyperbolic),
        "sklar" | "shifted_hyperbolic" => Some(ComplianceKind::ShiftedHyperbolic),
        "lim" | "exponential" => Some(ComplianceKind::Exponential),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_typical_linear_run() {
        let cfg = RunConfig::parse("").unwrap();
        let s = cfg.scenario().unwrap();
        assert_eq!(s.params, SystemParams::typical());
        assert_eq!(s.compliance, ComplianceModel::typical(ComplianceKind::Constant));
        assert!(s.timeline.is_empty());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse("[params]\nRa = 600\n").unwrap_err();
        assert!(err.to_string().contains("Ra"), "{err}");
        assert!(RunConfig::parse("[[event]]\nkind = \"shunt\"\nR = 1\n").is_err());
        assert!(RunConfig::parse("[output]\nformat = \"csv\"\n").is_err());
    }

    #[test]
    fn event_defaults_come_from_params() {
        let cfg = RunConfig::parse(
            "[params]\nS_i = 0.1\nt_i = 7\n[[event]]\nkind = \"infusion\"\n[[event]]\nkind = \"instant_bolus\"\n",
        )
        .unwrap();
        let s = cfg.scenario().unwrap();
        assert!(s.timeline.events().contains(&Event::Infusion {
            rate: 0.1,
            resistance: 600.0,
            start: 7.0
        }));
        assert!(s.timeline.events().contains(&Event::InstantBolus { volume: 0.16, time: 4.0 }));
    }

    #[test]
    fn effective_config_round_trips() {
        let cfg = RunConfig::parse(
            "[compliance]\nlaw = \"exponential\"\n[[event]]\nkind = \"finite_bolus\"\nrate = 0.04\n[output]\nsolver = \"both\"\n",
        )
        .unwrap();
        let dumped = cfg.effective().unwrap().to_toml();
        let back = RunConfig::parse(&dumped).unwrap();
        assert_eq!(back.scenario().unwrap(), cfg.scenario().unwrap());
        assert_eq!(back.effective().unwrap(), cfg.effective().unwrap());
    }
}
