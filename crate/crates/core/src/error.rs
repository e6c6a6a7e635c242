use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("energy-harvesting constraint cannot be met for RIS {0}")]
    EhInfeasible(usize),

    #[error("primary-user QoS constraint cannot be met")]
    QosInfeasible,

    #[error("subproblem infeasible: {0}")]
    SubproblemInfeasible(String),

    #[error("SDP solver did not converge: {0}")]
    SolverFailed(String),

    #[error("no feasible initial point found")]
    InitInfeasible,

    #[error("power-splitting problem infeasible: box and QoS ellipsoid do not intersect")]
    PsInfeasible,
}
