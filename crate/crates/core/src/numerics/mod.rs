//! Dense kernels shared by the solvers: LU solves, quadrature, finite-difference
//! Jacobians and the rank-3 contraction used by index-2 reduction.

mod jacobian;
mod matrix;
mod quadrature;
mod tensor;

pub(crate) use jacobian::fd_mixed_second;
pub use jacobian::{fd_derivative, fd_jacobian, fd_second_derivative};
pub use matrix::{lu_solve, DenseMatrix, LuFactors, DEFAULT_PIVOT_FLOOR};
pub use quadrature::{gauss_legendre_5, gl5_points, GL5_NODES, GL5_WEIGHTS};
pub use tensor::{contract_quadratic, Tensor3};
