use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("layer {layer}: {reason}")]
    InvalidLayer { layer: usize, reason: String },

    #[error("dimension mismatch at {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("point outside the unit cube at coordinate {coordinate} (value {value})")]
    OutOfDomain { coordinate: usize, value: f64 },

    #[error("layer range {from}..={to} is invalid for a composition of {layers} layers")]
    LayerRange {
        from: usize,
        to: usize,
        layers: usize,
    },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("enumeration needs {required} members but the cap is {cap}")]
    CapExceeded { required: u128, cap: usize },

    #[error("all sampled pairs were degenerate (x = y)")]
    DegeneratePairs,

    #[error("training diverged after {halvings} learning-rate halvings")]
    Diverged { halvings: u32 },

    #[error(
        "Hölder precondition failed: measured constant {measured} exceeds C_alpha = {claimed}"
    )]
    HolderPrecondition { measured: f64, claimed: f64 },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("{0}")]
    Other(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}
