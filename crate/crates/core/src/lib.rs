//! Implicit Euler for semi-explicit index-1 and Hessenberg index-2 DAEs, with
//! adjoint-based a posteriori estimates of the error in quantities of interest.
//!
//! The solvers are generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below fix the scalar to `f64`, which is what the default tolerances assume.

pub mod adjoint;
pub mod dae;
pub mod error;
pub mod estimator;
pub mod forward;
pub mod numerics;
pub mod problems;
pub mod reduction;
pub mod scalar;

pub use adjoint::{
    algebraic_adjoint_residual, dgy_transpose_dt, linearized_ops_at, solve_adjoint_backward, terminal_condition,
    AdjointPath, AdjointSolution, LinearizedOps, TerminalCondition,
};
pub use dae::{
    check_consistency, check_index_condition, hidden_constraint_residual, ConsistencyReport,
    CustomDae, DaeIndex, DaeProblem, Density, InitialConditions, Qoi, QoiKind, TimeGrid,
    Trajectory,
};
pub use error::{Error, Result};
pub use estimator::{
    cancellation_split, effectivity, estimate_error, estimate_error_with, estimate_with_reference, qoi_value,
    reference_qoi_error, streamed_qoi, ErrorReport, ErrorTerm, ReferenceBackend, ReferenceOutcome,
    ReferenceSettings,
};
pub use forward::{bdf1_for_each, bdf1_solve, Bdf1Stepper, NewtonSettings, SolverStats};
pub use numerics::{
    contract_quadratic, fd_jacobian, gauss_legendre_5, lu_solve, DenseMatrix, LuFactors, Tensor3,
};
pub use reduction::{
    dopri5, reduced_rhs, solve_reference, DenseOutput, Dopri5Settings, ReducedOde, ReferenceTrajectory,
};
pub use scalar::{dot, norm_inf, Real};

pub type Matrix64 = DenseMatrix<f64>;
pub type TimeGrid64 = TimeGrid<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type Qoi64 = Qoi<f64>;
pub type NewtonSettings64 = NewtonSettings<f64>;
pub type ErrorReport64 = ErrorReport<f64>;
pub type AdjointSolution64 = AdjointSolution<f64>;
pub type Matrix32 = DenseMatrix<f32>;
pub type Trajectory32 = Trajectory<f32>;
