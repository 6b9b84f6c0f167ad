use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A pressure outside the domain of a compliance law.
    #[error("{law} compliance is undefined at P = {pressure} mmH2O")]
    Domain { law: &'static str, pressure: f64 },

    /// A pressure-volume relation left its pressure domain (logarithm of a non-positive number).
    #[error("{law} pressure-volume relation leaves its domain: {detail}")]
    Range { law: &'static str, detail: String },

    #[error("{operation} is not defined for the {law} compliance law")]
    Unsupported {
        operation: &'static str,
        law: &'static str,
    },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("configuration error: {0}")]
    Config(String),

    /// The shunted fixed point does not exceed the valve opening pressure.
    #[error("shunt would be closed: fixed point {fixed_point:.4} mmH2O <= opening pressure {opening_pressure} mmH2O")]
    ShuntClosed {
        fixed_point: f64,
        opening_pressure: f64,
    },

    #[error("singularity at t = {time} min: {reason}")]
    Singularity { time: f64, reason: String },

    #[error("t = {time} min is outside the regime of {solution} (valid for {valid})")]
    OutOfRegime {
        solution: &'static str,
        time: f64,
        valid: String,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("rank-deficient problem: {0}")]
    RankDeficient(String),

    #[error("no closed form for this scenario; closed-form catalog: {catalog}")]
    UnsupportedScenario { catalog: String },

    #[error("malformed trace at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("unknown figure id {0} (expected 1..=7)")]
    UnknownFigure(u32),
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and strictly positive",
        })
    }
}

pub(crate) fn non_negative(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and non-negative",
        })
    }
}

pub(crate) fn finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite",
        })
    }
}
