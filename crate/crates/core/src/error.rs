use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the unfolding pipeline and its building blocks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Shapes or indices that do not fit together.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("group mismatch: representations belong to different groups")]
    GroupMismatch,

    #[error("singular representation matrix for element {element}")]
    SingularRepresentation { element: usize },

    #[error("group closure exceeded {cap} elements")]
    ClosureCap { cap: usize },

    #[error("equivariance residual {residual:.3e} exceeds tolerance {tolerance:.1e}")]
    Equivariance { residual: f64, tolerance: f64 },

    #[error("root search did not converge after {iterations} iterations (last iterate {last}, |det| = {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        last: Complex64,
        residual: f64,
    },

    #[error("{0} is not a characteristic root (residual {1:.3e})")]
    NotARoot(Complex64, f64),

    #[error("defective or mis-ordered spectrum: Gram matrix of the bilinear form is singular")]
    DefectiveSpectrum,

    #[error("inconsistent multiplicities: {0}")]
    Multiplicity(String),

    #[error("induced representation invalid: residual {0:.3e}")]
    InducedRepresentation(f64),

    #[error("jordan structure mismatch: {0}")]
    JordanSpec(String),

    #[error("matrix is not in the commutant of the representation (residual {0:.3e})")]
    NotEquivariant(f64),

    #[error("decomposition residual {residual:.3e} exceeds {tolerance:.1e}: bases are not complementary")]
    Decomposition { residual: f64, tolerance: f64 },

    #[error("adjoint rows dependent; E(W) construction fails")]
    AdjointRowsDependent,

    #[error("stacked delay basis has rank {achieved}, need {required}")]
    RankDeficient { achieved: usize, required: usize },

    #[error("sparsity mask infeasible: least-squares residual {0:.3e}")]
    InfeasibleMask(f64),

    #[error("delays must be distinct and nonnegative: {0}")]
    InvalidDelays(String),

    #[error("versality check failed: rank {rank} of {required} (deficiency {deficiency})")]
    NotVersal {
        rank: usize,
        required: usize,
        deficiency: usize,
    },

    #[error("directions are not in conjugate pairs (direction {0} unmatched)")]
    NotConjugatePairs(usize),

    #[error("reparametrization matrix is singular (sigma_min / sigma_max = {0:.3e})")]
    SingularReparametrization(f64),

    #[error("not a non-resonant double Hopf point (omega gap {0:.3e})")]
    Resonant(f64),

    #[error("double Hopf search did not converge: {0}")]
    DoubleHopf(String),

    #[error("delay matrix M is singular (|det M| = {0:.3e})")]
    SingularDelayMatrix(f64),

    #[error("schema error: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;
