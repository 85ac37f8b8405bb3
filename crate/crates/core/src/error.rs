use thiserror::Error;

/// Errors raised by state manipulation, optics and protocol routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not unitary: max |U^dagger U - I| = {deviation:e}")]
    NonUnitary { deviation: f64 },

    #[error("matrix shape {rows}x{cols} does not match {modes} target modes")]
    ShapeMismatch { rows: usize, cols: usize, modes: usize },

    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("mode {0} is listed more than once")]
    DuplicateMode(usize),

    #[error("mode index {0} is not registered")]
    UnknownMode(usize),

    #[error("no mode named {0:?}")]
    UnknownModeName(String),

    #[error("no qubit labelled {0:?}")]
    UnknownQubit(String),

    #[error("qubit label {0:?} is registered twice")]
    DuplicateQubit(String),

    #[error("states do not share a mode registry")]
    RegistryMismatch,

    #[error("mode {0} has no dedicated loss ancilla")]
    NoLossMode(usize),

    #[error("loss beamsplitters have unequal efficiencies ({stage}): {first} vs {other}")]
    UnequalEfficiencies {
        stage: &'static str,
        first: f64,
        other: f64,
    },

    #[error("modes {0:?} are expected to be empty before this operation")]
    ModesOccupied(Vec<usize>),

    #[error("graph error: {0}")]
    InvalidGraph(String),

    #[error("{round} round failed ({clicks} clicks); restart the round")]
    RoundFailed { round: &'static str, clicks: u32 },

    #[error("heralding failed: pattern {pattern} rejected")]
    HeraldFailed { pattern: String },

    #[error("correction group has {size} elements, above the bound of {bound}")]
    GroupTooLarge { size: usize, bound: usize },

    #[error("network description error: {0}")]
    Network(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit_interval(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            range: "[0, 1]",
        })
    }
}
