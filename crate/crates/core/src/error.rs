use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid configuration: {0}")]
    Configuration(String),
    #[error("invalid phantom: {0}")]
    InvalidPhantom(String),
    #[error("motion is singular at time {time} (det = {det:e})")]
    SingularMotion { time: f64, det: f64 },
    #[error("degenerate motion at angle index {angle_index}: h = {h:e}")]
    DegenerateMotion { angle_index: usize, h: f64 },
    #[error("degenerate landmarks: smallest singular value {sigma_min:e}")]
    DegenerateLandmarks { sigma_min: f64 },
    #[error("search direction has zero norm")]
    ZeroDirection,
    #[error("no object found after thresholding")]
    NoObject,
    #[error("largest component has only {pixels} pixels")]
    ObjectTooSmall { pixels: usize },
}

macro_rules! contract {
    ($($arg:tt)*) => {
        $crate::Error::Contract(alloc::format!($($arg)*))
    };
}
pub(crate) use contract;
