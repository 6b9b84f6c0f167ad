//! Piecewise-constant forcing: boluses, infusions, the shunt valve and the
//! absorption gate, ordered in time.
//!
//! All switching uses the right-continuous step `H(t - t0) = 1` for `t >= t0`,
//! so a sample taken exactly at an event time sees the post-event state.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{finite, non_negative, positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    /// Rectangular source `S_b` on `[start, start + duration)`; negative rate withdraws fluid.
    FiniteBolus { rate: f64, start: f64, duration: f64 },
    /// Volume added (or removed, if negative) in zero time.
    InstantBolus { volume: f64, time: f64 },
    /// Constant infusion switched on at `start`.
    Infusion { rate: f64, resistance: f64, start: f64 },
    /// One-way valve switched in at `start`.
    Shunt {
        resistance: f64,
        opening_pressure: f64,
        start: f64,
    },
    /// Absorption is off before `start`.
    AbsorptionGate { start: f64 },
}

impl Event {
    pub fn time(&self) -> f64 {
        match *self {
            Event::FiniteBolus { start, .. }
            | Event::Infusion { start, .. }
            | Event::Shunt { start, .. }
            | Event::AbsorptionGate { start } => start,
            Event::InstantBolus { time, .. } => time,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Event::FiniteBolus { .. } => "finite_bolus",
            Event::InstantBolus { .. } => "instant_bolus",
            Event::Infusion { .. } => "infusion",
            Event::Shunt { .. } => "shunt",
            Event::AbsorptionGate { .. } => "absorption_gate",
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Event::AbsorptionGate { .. } => 0,
            Event::Shunt { .. } => 1,
            Event::Infusion { .. } => 2,
            Event::FiniteBolus { .. } => 3,
            Event::InstantBolus { .. } => 4,
        }
    }

    fn fields(&self) -> [f64; 3] {
        match *self {
            Event::FiniteBolus {
                rate,
                start,
                duration,
            } => [start, rate, duration],
            Event::InstantBolus { volume, time } => [time, volume, 0.0],
            Event::Infusion {
                rate,
                resistance,
                start,
            } => [start, rate, resistance],
            Event::Shunt {
                resistance,
                opening_pressure,
                start,
            } => [start, resistance, opening_pressure],
            Event::AbsorptionGate { start } => [start, 0.0, 0.0],
        }
    }

    /// Total order: time, then kind, then remaining fields.
    fn total_cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.fields(), other.fields());
        a[0].total_cmp(&b[0])
            .then(self.rank().cmp(&other.rank()))
            .then(a[1].total_cmp(&b[1]))
            .then(a[2].total_cmp(&b[2]))
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Event::FiniteBolus {
                rate,
                start,
                duration,
            } => {
                finite("S_b", rate)?;
                non_negative("t_b", start)?;
                positive("dt_b", duration)?;
            }
            Event::InstantBolus { volume, time } => {
                finite("delta_V", volume)?;
                non_negative("t_0", time)?;
            }
            Event::Infusion {
                rate,
                resistance,
                start,
            } => {
                non_negative("S_i", rate)?;
                positive("R_i", resistance)?;
                non_negative("t_i", start)?;
            }
            Event::Shunt {
                resistance,
                opening_pressure,
                start,
            } => {
                positive("R_s", resistance)?;
                finite("P_op", opening_pressure)?;
                non_negative("t_s", start)?;
            }
            Event::AbsorptionGate { start } => {
                non_negative("t_a", start)?;
            }
        }
        Ok(())
    }
}

/// The forcing in effect over one smooth segment.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Regime {
    /// External source `S(t)`, cc/min.
    pub source: f64,
    pub absorbing: bool,
    /// `(R_s, P_op)` when the valve is in.
    pub shunt: Option<(f64, f64)>,
}

/// Validated, time-ordered list of events.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct EventTimeline {
    events: Vec<Event>,
}

impl EventTimeline {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(mut events: Vec<Event>) -> Result<Self> {
        for e in &events {
            e.validate()?;
        }
        events.sort_by(Event::total_cmp);

        let count = |name: &str| events.iter().filter(|e| e.name() == name).count();
        if count("shunt") > 1 {
            return Err(Error::Config("at most one shunt event is allowed".into()));
        }
        if count("absorption_gate") > 1 {
            return Err(Error::Config("at most one absorption gate is allowed".into()));
        }
        let boluses: Vec<(f64, f64)> = events
            .iter()
            .filter_map(|e| match *e {
                Event::FiniteBolus {
                    start, duration, ..
                } => Some((start, start + duration)),
                _ => None,
            })
            .collect();
        for w in boluses.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(Error::Config(format!(
                    "finite boluses overlap: [{}, {}) and [{}, {})",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(Self { events })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Times at which the right-hand side changes or the state jumps; sorted, deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self
            .events
            .iter()
            .flat_map(|e| match *e {
                Event::FiniteBolus {
                    start, duration, ..
                } => vec![start, start + duration],
                other => vec![other.time()],
            })
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }

    /// Forcing in effect at `t` (right-continuous).
    pub fn regime_at(&self, t: f64) -> Regime {
        let mut regime = Regime {
            source: 0.0,
            absorbing: true,
            shunt: None,
        };
        for e in &self.events {
            match *e {
                Event::FiniteBolus {
                    rate,
                    start,
                    duration,
                } if start <= t && t < start + duration => regime.source += rate,
                Event::Infusion { rate, start, .. } if start <= t => regime.source += rate,
                Event::Shunt {
                    resistance,
                    opening_pressure,
                    start,
                } if start <= t => regime.shunt = Some((resistance, opening_pressure)),
                Event::AbsorptionGate { start } if t < start => regime.absorbing = false,
                _ => {}
            }
        }
        regime
    }

    /// `S(t)`, cc/min.
    pub fn source_at(&self, t: f64) -> f64 {
        self.regime_at(t).source
    }

    /// Net volume of instantaneous boluses applied exactly at `t`.
    pub fn jump_volume_at(&self, t: f64) -> f64 {
        self.events
            .iter()
            .filter_map(|e| match *e {
                Event::InstantBolus { volume, time } if time == t => Some(volume),
                _ => None,
            })
            .sum()
    }

    pub fn shunt(&self) -> Option<Event> {
        self.events
            .iter()
            .copied()
            .find(|e| matches!(e, Event::Shunt { .. }))
    }
}
