//! Dense dual barrier solver for semidefinite programs with audited robust
//! Newton steps, pluggable noisy subroutine oracles, and a per-iteration
//! subroutine cost estimator.

pub mod error;
pub mod estimator;
pub mod instance;
pub mod ipm;
pub mod linalg;
pub mod oracle;

pub use error::{Error, Result};
pub use estimator::{estimate, ResourceReport};
pub use instance::{CentralPath, DualState, DualityReport, SdpInstance};
pub use ipm::{
    check_conditions, gap_surrogate, planned_iterations, slack_invariant, solve, step,
    ConditionCheck, ConditionReport, IterationRecord, SolveResult, SolveStatus, SolverParams,
    StepOutput,
};
pub use linalg::{DenseMatrix, SymEig, DEFAULT_PSD_FLOOR};
pub use oracle::{ExactOracle, NoiseModel, NoisyOracle, Oracle, RealizedErrorLevels};
