//! Typical parameter values used for every illustrative simulation.
//!
//! Units throughout the crate: pressure in mmH2O, volume in cc, time in min.
//! Flow resistances are in mmH2O/(ml/min).

/// `C_0`, constant brain compliance (cc/mmH2O).
pub const COMPLIANCE: f64 = 0.004;
/// `I_f_e`, equilibrium CSF formation rate (cc/min).
pub const FORMATION_RATE: f64 = 0.078;
/// `k`, exponent of the exponential pressure-volume relation (1/cc).
pub const PV_EXPONENT: f64 = 1.0;
/// `P_0`, initial pressure (mmH2O).
pub const INITIAL_PRESSURE: f64 = 244.0;
/// `P_d`, dural sinus threshold pressure (mmH2O).
pub const SINUS_PRESSURE: f64 = 70.0;
/// `P_bar`, height of the linear-model pressure pulse (mmH2O).
pub const PULSE_HEIGHT: f64 = 40.0;
/// `P_prime`, reference pressure of the pressure-volume relation (mmH2O).
pub const REFERENCE_PRESSURE: f64 = 150.0;
/// `P_op`, shunt valve opening pressure (mmH2O).
pub const OPENING_PRESSURE: f64 = 45.0;
/// `R_a`, absorption resistance.
pub const ABSORPTION_RESISTANCE: f64 = 600.0;
/// `R_i`, resistance of the infusion apparatus.
pub const INFUSION_RESISTANCE: f64 = 600.0;
/// `R_s`, shunt valve resistance.
pub const SHUNT_RESISTANCE: f64 = 60.0;
/// `S_b`, finite bolus rate (cc/min).
pub const BOLUS_RATE: f64 = 40.0;
/// `S_i`, infusion rate (cc/min).
pub const INFUSION_RATE: f64 = 0.216;
/// `t_b` (min).
pub const BOLUS_START: f64 = 5.0;
/// `dt_b` (min).
pub const BOLUS_DURATION: f64 = 5.0;
/// `t_s` (min).
pub const SHUNT_START: f64 = 5.0;
/// `t_0` (min).
pub const PULSE_TIME: f64 = 4.0;
/// `t_i` (min).
pub const INFUSION_START: f64 = 4.0;

// Not part of the published set; chosen so the two-parameter laws stay
// close to the one-parameter ones over 50..300 mmH2O.

/// `k1` of the shifted hyperbolic law (1/cc).
pub const SHIFTED_K1: f64 = 1.0;
/// `k2` of the shifted hyperbolic law (mmH2O/cc).
pub const SHIFTED_K2: f64 = 10.0;
/// `a` of the exponential compliance law (cc/mmH2O).
pub const EXPONENTIAL_A: f64 = 0.004;
/// `b` of the exponential compliance law (1/mmH2O); `b * P_0` stays below 0.1.
pub const EXPONENTIAL_B: f64 = 4.0e-4;

/// Injected volume of the withdrawal used for the recovery figure (cc).
pub const WITHDRAWAL_VOLUME: f64 = -0.2;

/// `(symbol, value, unit)` rows of the typical-value table.
pub const TABLE: &[(&str, f64, &str)] = &[
    ("C_0", COMPLIANCE, "cc/mmH2O"),
    ("I_f_e", FORMATION_RATE, "cc/min"),
    ("k", PV_EXPONENT, "1/cc"),
    ("P_0", INITIAL_PRESSURE, "mmH2O"),
    ("P_d", SINUS_PRESSURE, "mmH2O"),
    ("P_bar", PULSE_HEIGHT, "mmH2O"),
    ("P_prime", REFERENCE_PRESSURE, "mmH2O"),
    ("P_op", OPENING_PRESSURE, "mmH2O"),
    ("R_a", ABSORPTION_RESISTANCE, "mmH2O/ml/min"),
    ("R_i", INFUSION_RESISTANCE, "mmH2O/ml/min"),
    ("R_s", SHUNT_RESISTANCE, "mmH2O/ml/min"),
    ("S_b", BOLUS_RATE, "cc/min"),
    ("S_i", INFUSION_RATE, "cc/min"),
    ("t_b", BOLUS_START, "min"),
    ("dt_b", BOLUS_DURATION, "min"),
    ("t_s", SHUNT_START, "min"),
    ("t_0", PULSE_TIME, "min"),
    ("t_i", INFUSION_START, "min"),
];
