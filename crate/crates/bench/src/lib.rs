//! Fixtures shared by the benchmarks.

use csfpv_core::numeric::RhsSpec;
use csfpv_core::{ComplianceKind, ComplianceModel, Event, EventTimeline, SystemParams};

/// Hyperbolic compliance with a small rectangular bolus, starting at equilibrium.
pub fn finite_bolus_rhs() -> RhsSpec {
    let params = SystemParams::typical().with_initial_pressure(SystemParams::typical().equilibrium_pressure());
    let timeline = EventTimeline::new(vec![Event::FiniteBolus {
        rate: 0.04,
        start: 5.0,
        duration: 5.0,
    }])
    .expect("valid timeline");
    RhsSpec::new(ComplianceModel::typical(ComplianceKind::Hyperbolic), params, timeline).expect("valid rhs")
}

/// Linear model with the shunt switched in at its typical time.
pub fn shunt_rhs() -> RhsSpec {
    let shunt = SystemParams::typical_shunt();
    let timeline = EventTimeline::new(vec![Event::Shunt {
        resistance: shunt.resistance,
        opening_pressure: shunt.opening_pressure,
        start: shunt.activation_time,
    }])
    .expect("valid timeline");
    RhsSpec::new(ComplianceModel::typical(ComplianceKind::Constant), SystemParams::typical(), timeline)
        .expect("valid rhs")
}
