use std::fmt;

/// Image axis named in dimension errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Width,
    Height,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::Width => f.write_str("width"),
            Axis::Height => f.write_str("height"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{axis} {size} is not a multiple of the window size {window}")]
    NotTileable { axis: Axis, size: usize, window: usize },

    #[error("size mismatch: expected {expected:?}, found {found:?}")]
    SizeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("insufficient reference data: {rows} row(s), at least 2 distinct module counts are needed")]
    InsufficientData { rows: usize },

    #[error("simulation deadlock at {time_ns:.3} ns, stalled: {}", stalled.join(", "))]
    Deadlock { time_ns: f64, stalled: Vec<String> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
