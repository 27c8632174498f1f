use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid hypergraph: {0}")]
    InvalidHypergraph(String),

    #[error("node {node} belongs to no hyperedge")]
    IsolatedNode { node: usize },

    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric: asymmetry {asymmetry:e} exceeds tolerance {tolerance:e}")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("matrix is not positive semi-definite: smallest eigenvalue {min_eigenvalue:e}")]
    NotPsd { min_eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("perturbation norm {norm:e} exceeds the stated bound {delta:e}")]
    PerturbationTooLarge { norm: f64, delta: f64 },

    #[error(
        "perturbed operator is not positive semi-definite (smallest eigenvalue {min_eigenvalue:e}); \
         try a smaller perturbation"
    )]
    PerturbedNotPsd { min_eigenvalue: f64 },

    #[error("additive perturbation does not vanish on ker(S): ker(D) ⊉ ker(S) (residual {residual:e})")]
    KernelCondition { residual: f64 },

    #[error("non-finite value at step {step}")]
    NonFinite { step: usize },

    #[error("non-finite gradient at {path}")]
    NonFiniteGradient { path: String },

    #[error("too few hyperedges: found {found}, need at least {needed}")]
    TooFewHyperedges { found: usize, needed: usize },

    #[error("graphon kernel returned {value} at ({x}, {y}), outside [0, 1]")]
    InvalidKernel { value: f64, x: f64, y: f64 },

    #[error("no connected sample after {attempts} attempts")]
    RetriesExhausted { attempts: usize },

    #[error("empty model space")]
    EmptyModelSpace,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
