use thiserror::Error;

/// Failure modes of the library.
///
/// Times are reported in seconds as `f64` regardless of the scalar type the
/// computation ran in.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric (asymmetry {asymmetry:e})")]
    SymmetryViolation { asymmetry: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("singular mass matrix")]
    SingularMassMatrix,

    #[error("jet order {available} is insufficient, {required} required ({context})")]
    InsufficientOrder {
        required: usize,
        available: usize,
        context: &'static str,
    },

    #[error("unsupported signal: {0}")]
    UnsupportedSignal(String),

    #[error("slack cable: tension of cable {cable} link {link} vanishes at t = {t} s (|Tq| = {magnitude:e} N)")]
    TensionSingularity {
        cable: usize,
        link: usize,
        t: f64,
        magnitude: f64,
    },

    #[error("thrust singularity at t = {t} s (|F| = {magnitude:e} N)")]
    ThrustSingularity { t: f64, magnitude: f64 },

    #[error("yaw singularity at t = {t} s: thrust direction is horizontal")]
    YawSingularity { t: f64 },

    #[error("attachment geometry is rank deficient (rank {rank} < 6)")]
    RankDeficientGeometry { rank: usize },

    #[error("Riccati sweep lost positive semi-definiteness at t = {t} s (min eigenvalue {min_eigenvalue:e})")]
    RiccatiBlowup { t: f64, min_eigenvalue: f64 },

    #[error("t = {t} s outside the gain table horizon [{start}, {end}]")]
    HorizonExceeded { t: f64, start: f64, end: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
