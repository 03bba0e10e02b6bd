use thiserror::Error;

#[derive(Debug, Error)]
pub enum TopoError {
    #[error("empty simplex in input")]
    EmptySimplex,
    #[error("simplex {0:?} has repeated vertices")]
    RepeatedVertex(Vec<u32>),
    #[error("simplex {0:?} is not in the complex")]
    UnknownSimplex(Vec<u32>),
    #[error("expected {expected} filtration values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("filtration is not monotone: face {face:?} ({face_value}) > coface {coface:?} ({coface_value})")]
    NotMonotone {
        face: Vec<u32>,
        face_value: f64,
        coface: Vec<u32>,
        coface_value: f64,
    },
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("cannot transpose positions {0} and {1}: face/coface relation")]
    FaceCofaceSwap(usize, usize),
    #[error("position {0} out of range")]
    OutOfRange(usize),
    #[error("({birth}, {death}) is not a persistence pair")]
    NotAPair { birth: usize, death: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TopoError>;
