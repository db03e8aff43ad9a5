//! Matrix-free Bregman primal-dual proximal splitting.
//!
//! Solves composite problems `minimize f(x) + g(Ax) + h(x)` through the
//! primal and dual Condat-Vu splittings, PD3O, and a backtracking
//! line-search variant of the dual solver for equality-constrained problems,
//! with proximal steps taken in user-chosen Bregman geometries.
//!
//! The crate is organized around five pieces:
//!
//! - [`linop`]: matrix-free linear operators and the operator norms entering
//!   stepsize conditions;
//! - [`kernel`]: Bregman kernels, distances, and smooth terms;
//! - [`prox`]: Bregman proximal operators and the prox optimality audit;
//! - [`solver`]: the solver steps, stepsize validation, and the run driver;
//! - [`merit`]: Lagrangian gaps, primal-dual distances, merit functions, and
//!   ergodic bound certification.

pub mod kernel;
pub mod linop;
pub mod merit;
pub mod prox;
pub mod solver;
pub mod vec;

pub use kernel::{
    distance, BregmanKernel, KernelError, QuadraticLoss, RelativeEntropyKernel, SmoothTerm,
    SquaredEuclideanKernel,
};
pub use linop::{
    lipschitz_l1, norm_1_2, norm_spectral, op_adjoint, op_apply, DenseOperator, DifferenceOperator,
    LinearOperator, NormTag, OperatorError, SpectralEstimate,
};
pub use merit::{
    ergodic_gap_bound_check, lagrangian, pd3o_distance, pd_distance, ErgodicBound, ErgodicCheck,
    LagrangianSpec, MeritEqualityPenalty, MeritError, MeritL1Inequality, PdVariant,
    PrimalDualDistance,
};
pub use prox::{
    check_prox_optimality, prox_affine_conjugate, prox_entropy_simplex, prox_linf_box,
    BoxProjectionProx, ConstantProx, EntropySimplexProx, LinearConjugateProx, ProxOperator,
    ProxOptimality, ZeroProx,
};
pub use solver::{
    cv_dual_step, cv_primal_step, ls_step, pd3o_step, run, validate_stepsizes, Algorithm,
    CompositeProblem, ConvergenceRecord, DiagnosticsConfig, LineSearchConfig, Method, RunFailure,
    RunOutput, SaddlePoint, SolverError, SolverState, StepSizes, StepWork, StoppingRule, ValueFn,
};
