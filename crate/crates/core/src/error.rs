use alloc::string::String;

/// Failure modes shared by every stage of the transceiver pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A dimension condition required by the design is violated.
    #[error("design infeasible: {0}")]
    DesignInfeasible(String),
    #[error("no usable streams: every stream gain is zero")]
    NoUsableStreams,
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidArgument(alloc::format!($($arg)*))
    };
}

macro_rules! infeasible {
    ($($arg:tt)*) => {
        $crate::error::Error::DesignInfeasible(alloc::format!($($arg)*))
    };
}

pub(crate) use {infeasible, invalid};
