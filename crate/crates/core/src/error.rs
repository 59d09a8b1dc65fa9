use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// An operation that needs at least one element got none.
    Empty(&'static str),
    InvalidConfig(String),
    /// Aspect nodes have no aspect neighbours.
    AspectNode,
    UnknownVariant(String),
    Checkpoint(String),
    /// Training produced a non-finite loss; names the first offending tensor.
    Divergence { epoch: usize, tensor: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch {
                what,
                expected,
                found,
            } => write!(f, "dimension mismatch in {what}: expected {expected}, found {found}"),
            Error::Empty(what) => write!(f, "{what} must not be empty"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::AspectNode => write!(f, "aspect nodes have no aspect neighbours"),
            Error::UnknownVariant(v) => write!(f, "unknown ablation variant `{v}`"),
            Error::Checkpoint(msg) => write!(f, "checkpoint error: {msg}"),
            Error::Divergence { epoch, tensor } => write!(
                f,
                "training diverged in epoch {epoch}: first non-finite tensor is `{tensor}`"
            ),
        }
    }
}

impl core::error::Error for Error {}
