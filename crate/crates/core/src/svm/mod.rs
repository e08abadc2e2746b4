//! Writer-dependent kernel SVMs.

pub mod kernel;
pub mod smo;
pub mod verifier;

pub use kernel::{KernelKind, KernelSpec};
pub use smo::{
    dual_objective, solve_dual, solve_dual_with, ClassWeights, DualSolution, SolverOptions, SolverOutput,
    SupportVector, TrainingSet,
};
pub use verifier::{sample_forgeries, train_user_verifier, PoolEntry, UserVerifier, DEFAULT_FORGERY_COUNT};
