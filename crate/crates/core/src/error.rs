use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Operand shapes do not conform for a primitive.
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    /// A precondition of an operation was violated.
    #[error("contract violation: {0}")]
    Contract(String),
    /// A computation produced NaN or infinity.
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err($crate::error::contract(alloc::format!($($fmt)+)));
        }
    };
}
pub(crate) use ensure;
