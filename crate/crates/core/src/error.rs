use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "cavity port rates do not close: kappa_in + kappa_out + kappa_ext = {sum:e} but kappa_total = {total:e} \
         (kappa_total, kappa_in, kappa_out, kappa_ext must satisfy kappa_in + kappa_out + kappa_ext = kappa_total)"
    )]
    PortClosure { total: f64, sum: f64 },

    #[error("missing field: {0}")]
    MissingField(&'static str),

    #[error("cavity denominator |(kappa/2 - i w)^2 + Delta^2| = {magnitude:e} below floor {floor:e} at w = {omega:e} rad/s")]
    DegenerateDenominator { omega: f64, magnitude: f64, floor: f64 },

    #[error("frequency w = {omega:e} rad/s lies outside every mode window and no fallback is configured")]
    UnassignedWindow { omega: f64 },

    #[error("drift matrix is unstable (max eigenvalue real part {max_real:e})")]
    Unstable { max_real: f64 },

    #[error("singular linear system at w = {omega:e} rad/s")]
    Singular { omega: f64 },

    #[error("time step {dt:e} exceeds limit {limit:e}")]
    DtTooLarge { dt: f64, limit: f64 },

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("empty window [{lo_hz}, {hi_hz}] Hz: {points} grid points (need at least {needed})")]
    EmptyWindow { lo_hz: f64, hi_hz: f64, points: usize, needed: usize },

    #[error("spectrum value {value} at {freq_hz} Hz is not positive; cannot express in dB")]
    NonPositivePsd { freq_hz: f64, value: f64 },

    #[error("peak search touched the search-window boundary for mode `{label}`")]
    PeakAtBoundary { label: String },

    #[error("efficiency {value} out of range: {reason}")]
    Efficiency { value: f64, reason: &'static str },

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("non-positive normalization denominator (shot - electronic = {value:e}) at {freq_hz} Hz")]
    NonPositiveDenominator { freq_hz: f64, value: f64 },

    #[error("data value is zero inside fit window at {freq_hz} Hz")]
    ZeroDataValue { freq_hz: f64 },

    #[error("invalid ring-down data: {0}")]
    Ringdown(String),

    #[error("fit problem: {0}")]
    FitProblem(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("parse error in {source_name}: {message}")]
    Parse { source_name: String, message: String },

    #[error("unknown command `{0}`")]
    UnknownCommand(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { key: key.into(), message: message.into() }
    }

    /// Process exit status used by the command-line front end; one code per error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::PortClosure { .. } | Error::MissingField(_) => 3,
            Error::Parse { .. } | Error::InvalidTrace(_) => 4,
            Error::Io(_) => 5,
            Error::UnknownCommand(_) => 64,
            Error::Unstable { .. } | Error::Singular { .. } | Error::DegenerateDenominator { .. } => 6,
            Error::FitProblem(_) | Error::ZeroDataValue { .. } | Error::NonPositiveDenominator { .. } => 7,
            _ => 8,
        }
    }
}
