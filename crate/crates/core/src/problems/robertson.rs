use crate::dae::{DaeIndex, DaeProblem, InitialConditions};
use crate::numerics::{DenseMatrix, Tensor3};
use crate::scalar::Real;

/// Robertson chemical kinetics in semi-explicit index-1 form.
///
/// `y = [y1, y2]`, `z = y3`, with `y1 + y2 + z = 1` as the constraint.
#[derive(Clone, Debug, Default)]
pub struct Robertson;

impl Robertson {
    const K1: f64 = 0.04;
    const K2: f64 = 1e4;
    const K3: f64 = 3e7;
}

impl<T: Real> DaeProblem<T> for Robertson {
    fn name(&self) -> &str {
        "robertson"
    }

    fn n_differential(&self) -> usize {
        2
    }

    fn n_algebraic(&self) -> usize {
        1
    }

    fn index(&self) -> DaeIndex {
        DaeIndex::One
    }

    fn f(&self, y: &[T], z: &[T], _t: T) -> Vec<T> {
        let (k1, k2, k3) = (T::lit(Self::K1), T::lit(Self::K2), T::lit(Self::K3));
        let a = k1 * y[0];
        let b = k2 * y[1] * z[0];
        vec![-a + b, a - b - k3 * y[1] * y[1]]
    }

    fn g(&self, y: &[T], z: &[T], _t: T) -> Vec<T> {
        vec![y[0] + y[1] + z[0] - T::one()]
    }

    fn initial_conditions(&self) -> InitialConditions<T> {
        InitialConditions {
            y0: vec![T::one(), T::zero()],
            z0: vec![T::zero()],
            t0: T::zero(),
        }
    }

    fn f_y(&self, y: &[T], z: &[T], _t: T) -> DenseMatrix<T> {
        let (k1, k2, k3) = (T::lit(Self::K1), T::lit(Self::K2), T::lit(Self::K3));
        let mut j = DenseMatrix::zeros(2, 2);
        j[(0, 0)] = -k1;
        j[(0, 1)] = k2 * z[0];
        j[(1, 0)] = k1;
        j[(1, 1)] = -k2 * z[0] - T::lit(2.0) * k3 * y[1];
        j
    }

    fn f_z(&self, y: &[T], _z: &[T], _t: T) -> DenseMatrix<T> {
        let k2 = T::lit(Self::K2);
        DenseMatrix::column_vector(&[k2 * y[1], -k2 * y[1]])
    }

    fn f_t(&self, _y: &[T], _z: &[T], _t: T) -> Vec<T> {
        vec![T::zero(); 2]
    }

    fn g_y(&self, _y: &[T], _z: &[T], _t: T) -> DenseMatrix<T> {
        DenseMatrix::row_vector(&[T::one(), T::one()])
    }

    fn g_z(&self, _y: &[T], _z: &[T], _t: T) -> DenseMatrix<T> {
        DenseMatrix::identity(1)
    }

    fn g_t(&self, _y: &[T], _z: &[T], _t: T) -> Vec<T> {
        vec![T::zero()]
    }

    fn g_yy(&self, _y: &[T], _z: &[T], _t: T) -> Tensor3<T> {
        Tensor3::zeros(1, 2)
    }

    fn g_yt(&self, _y: &[T], _z: &[T], _t: T) -> DenseMatrix<T> {
        DenseMatrix::zeros(1, 2)
    }

    fn g_tt(&self, _y: &[T], _z: &[T], _t: T) -> Vec<T> {
        vec![T::zero()]
    }

    fn has_analytic_constraint_curvature(&self) -> bool {
        true
    }
}
