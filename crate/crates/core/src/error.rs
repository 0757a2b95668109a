use std::fmt;

/// Errors raised anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("jet centers differ: {0:?} vs {1:?}")]
    CenterMismatch(Vec<f64>, Vec<f64>),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{function} is not defined at {value}")]
    JetDomain { function: &'static str, value: f64 },

    #[error("jet order {requested} exceeds the supported maximum {max}")]
    OrderTooHigh { requested: usize, max: usize },

    #[error("jet of order 0 cannot be differentiated")]
    ZeroOrder,

    #[error("point {point:?} lies outside the tubular band (|delta| = {distance} >= {radius})")]
    OutsideBand {
        point: Vec<f64>,
        distance: f64,
        radius: f64,
    },

    #[error("characteristic boundary point at {point:?} (horizontal gradient norm {norm:e})")]
    Characteristic { point: Vec<f64>, norm: f64 },

    #[error("model '{model}' does not support {what}")]
    Unsupported { model: String, what: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("weight support violated: {0}")]
    Support(String),

    #[error("ill-conditioned design (condition number {cond:e}); narrow the basis or widen the t-window")]
    IllConditioned { cond: f64 },

    #[error("CFL violation: dt = {dt:e} exceeds stable bound; use dt <= {suggested:e}")]
    Cfl { dt: f64, suggested: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl fmt::Display) -> Self {
        Error::InvalidArgument(msg.to_string())
    }

    pub fn unsupported(model: impl Into<String>, what: impl Into<String>) -> Self {
        Error::Unsupported {
            model: model.into(),
            what: what.into(),
        }
    }
}
