use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not antisymmetric (‖M + Mᵀ‖ = {defect:.3e})")]
    NotAntisymmetric { defect: f64 },

    #[error("matrix is not a rotation (orthogonality defect {orthogonality:.3e}, det {det:.12})")]
    NotRotation { orthogonality: f64, det: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("channel {channel}: normalized error {ratio} outside admissible band (-{lower}, {upper})")]
    EnvelopeViolation {
        channel: usize,
        ratio: f64,
        lower: f64,
        upper: f64,
    },

    #[error("reference vectors are collinear (‖υ₁ × υ₂‖ = {cross_norm:.3e})")]
    CollinearInputs { cross_norm: f64 },

    #[error("zero-length vector cannot be normalized")]
    ZeroVector,

    #[error("degenerate vector geometry (second-smallest singular value {sigma:.3e})")]
    DegenerateGeometry { sigma: f64 },

    #[error("attitude error at the unstable set (‖R̃‖_I = {e1})")]
    NearSingular { e1: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("precondition failed: {0}")]
    Precondition(String),
}
