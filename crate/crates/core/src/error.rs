use thiserror::Error;

/// Errors surfaced by the detection library.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A caller-supplied parameter violates an operation precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Rejection sampling failed to place a device within the attempt budget.
    #[error("device placement failed after {attempts} rejection attempts (min distance {min_dist_m} m)")]
    PlacementFailed { attempts: usize, min_dist_m: f64 },

    /// A covariance matrix that must be positive definite was not; the
    /// solver state is corrupted.
    #[error("covariance matrix for cell {cell} is not positive definite")]
    NotPositiveDefinite { cell: usize },

    /// A quadratic form that must be real carried an imaginary residue
    /// beyond tolerance, which signals a corrupted inverse cache.
    #[error("imaginary residue {residue:.3e} exceeds tolerance on a quadratic form (cell {cell})")]
    ImaginaryResidue { cell: usize, residue: f64 },

    /// A rank-one inverse update was requested with a step that makes the
    /// Sherman-Morrison denominator nonpositive.
    #[error("infeasible rank-one step: denominator {denominator:.3e} for cell {cell}")]
    InfeasibleStep { cell: usize, denominator: f64 },

    /// Backtracking in the inexact subproblem failed to satisfy the
    /// sufficient-decrease condition within the growth budget.
    #[error("sufficient-decrease backtracking exhausted after {tries} parameter increases")]
    BacktrackingFailed { tries: usize },

    /// The LP solver did not converge.
    #[error("LP solver failed: {0}")]
    LpFailed(String),

    /// A brute-force verification was requested beyond its size limits.
    #[error("problem exceeds brute-force verifier limits: {0}")]
    TooLarge(String),

    /// The Fisher matrix has no retained eigenmodes; sampling is undefined.
    #[error("Fisher matrix has no eigenvalue above the rank cutoff")]
    DegenerateFisher,

    /// File I/O failed while reading or writing an instance snapshot.
    #[error("snapshot I/O: {0}")]
    Io(#[from] std::io::Error),

    /// An instance snapshot file is malformed.
    #[error("snapshot parse error in {file}: {message}")]
    SnapshotParse { file: String, message: String },
}
