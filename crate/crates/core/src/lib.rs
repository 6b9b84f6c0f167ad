//! Pressure-volume dynamics of the cerebrospinal fluid.
//!
//! The crate models the CSF space as a single compartment whose pressure obeys
//!
//! ```text
//! C(P) dP/dt + P / R_a = I_f(t) + P_d / R_a
//! ```
//!
//! and provides
//!
//! - the four compliance laws with their pressure-volume relations ([`model`]),
//! - closed-form solutions for constant and hyperbolic compliance ([`analytic`]),
//! - an event-aware adaptive integrator used as an independent oracle ([`numeric`]),
//! - experiment composition and figure data ([`scenario`], [`timeline`]),
//! - parameter estimation from pressure traces ([`estimation`]),
//! - CSV trace I/O ([`io`]) and a self-check suite ([`validation`]).
//!
//! Units are fixed: mmH2O, cc, min.

pub mod analytic;
mod error;
pub mod estimation;
pub mod io;
pub mod model;
pub mod numeric;
pub mod scenario;
pub mod timeline;
pub mod typical;
pub mod validation;

pub use error::{Error, Result};
pub use model::{
    equilibrium_pressure, infusion_steady_state, shunted_fixed_point, ComplianceKind,
    ComplianceModel, DerivedRates, Infusion, PressureTrace, Provenance, ShuntValve, SystemParams,
};
pub use scenario::{figure_data, run, FigureData, RunOutput, SampleGrid, Scenario, SolverChoice};
pub use timeline::{Event, EventTimeline};
