use thiserror::Error;

/// Errors raised across the analysis and synthesis pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LureError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix `{name}` is not of the form (.) kron I_d (relative deviation {deviation:.3e})")]
    NonKroneckerStructure { name: &'static str, deviation: f64 },

    #[error("transfer function is identically zero: C A^(r-1) B vanishes for every r <= {order}")]
    NoFiniteRelativeDegree { order: usize },

    #[error("no similarity transform reaches the integrator-observable form: {0}")]
    StructureUnreachable(String),

    #[error("state became non-finite at step {step}")]
    NonFiniteState { step: usize },

    #[error("rank decision for the output-prediction matrix is ambiguous (singular value ratio {ratio:.3e})")]
    RankDecisionAmbiguous { ratio: f64 },

    #[error("system is neither in integrator-observable form nor already canonical")]
    NotObservableForm,

    #[error("K2^T K2 is singular (smallest singular value of K2 is {sigma_min:.3e})")]
    SingularK2 { sigma_min: f64 },

    #[error("integrator correction of {required:.3e} exceeds the allowed {allowed:.3e}")]
    IntegratorOutOfTolerance { required: f64, allowed: f64 },

    #[error("multiplier matrix `{0}` is not doubly hyperdominant")]
    InvalidCone(&'static str),

    #[error("invalid sector or rate: {0}")]
    InvalidSector(String),

    #[error("SDP solver failure: {0}")]
    SolverFailure(String),

    #[error("upper end of the rate bracket ({rho_hi}) is not certifiable")]
    BracketInfeasible { rho_hi: f64 },

    #[error("iterative routine did not converge: {0}")]
    ConvergenceFailure(String),

    #[error("constraint set is empty: {0}")]
    EmptySet(String),

    #[error("Schur complement of the Lyapunov matrix is not positive ({s:.3e})")]
    NonPositiveSchur { s: f64 },

    #[error("certificate does not match the canonical system: {0}")]
    PartitionMismatch(String),

    #[error("run did not converge (last displacement {displacement:.3e})")]
    NotConverged { displacement: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eig:.3e})")]
    NotPositiveDefinite { min_eig: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = LureError> = std::result::Result<T, E>;
