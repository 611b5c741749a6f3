use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("index {index} out of range for {len} bands")]
    Index { index: usize, len: usize },
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("operation not available in {0} mode")]
    Mode(&'static str),
    #[error("loss became non-finite at iteration {iter} of {phase} (last finite iteration: {last_finite:?})")]
    Divergence {
        phase: &'static str,
        iter: usize,
        last_finite: Option<usize>,
    },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! shape_err {
    ($($arg:tt)*) => {
        $crate::error::Error::Shape(alloc::format!($($arg)*))
    };
}
pub(crate) use shape_err;
