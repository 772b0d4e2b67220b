use crate::dae::{DaeIndex, DaeProblem, InitialConditions};
use crate::numerics::{DenseMatrix, Tensor3};
use crate::scalar::Real;

/// Nonlinear, non-autonomous Hessenberg index-2 test problem
///
/// ```text
/// y1' = λ y1 - z
/// y2' = (2λ - sin²t) y2 + sin²t (y1 - 1)²
/// 0   = y2 - (y1 - 1)²
/// ```
///
/// with exact solution `y1 = 1 + e^{λt}`, `y2 = e^{2λt}`, `z = λ`.
#[derive(Clone, Debug)]
pub struct Petzold<T> {
    pub lambda: T,
}

impl<T: Real> Default for Petzold<T> {
    fn default() -> Self {
        Self { lambda: -T::one() }
    }
}

impl<T: Real> DaeProblem<T> for Petzold<T> {
    fn name(&self) -> &str {
        "petzold2"
    }

    fn n_differential(&self) -> usize {
        2
    }

    fn n_algebraic(&self) -> usize {
        1
    }

    fn index(&self) -> DaeIndex {
        DaeIndex::Two
    }

    fn f(&self, y: &[T], z: &[T], t: T) -> Vec<T> {
        let l = self.lambda;
        let s2 = t.sin().powi(2);
        let d = y[0] - T::one();
        vec![l * y[0] - z[0], (l + l - s2) * y[1] + s2 * d * d]
    }

    fn g(&self, y: &[T], _z: &[T], _t: T) -> Vec<T> {
        let d = y[0] - T::one();
        vec![y[1] - d * d]
    }

    fn initial_conditions(&self) -> InitialConditions<T> {
        InitialConditions {
            y0: vec![T::lit(2.0), T::one()],
            z0: vec![self.lambda],
            t0: T::zero(),
        }
    }

    fn analytic_solution(&self, t: T) -> Option<(Vec<T>, Vec<T>)> {
        let e = (self.lambda * t).exp();
        Some((vec![T::one() + e, e * e], vec![self.lambda]))
    }

    fn f_y(&self, y: &[T], _z: &[T], t: T) -> DenseMatrix<T> {
        let l = self.lambda;
        let s2 = t.sin().powi(2);
        let mut j = DenseMatrix::zeros(2, 2);
        j[(0, 0)] = l;
        j[(1, 0)] = T::lit(2.0) * s2 * (y[0] - T::one());
        j[(1, 1)] = l + l - s2;
        j
    }

    fn f_z(&self, _y: &[T], _z: &[T], _t: T) -> DenseMatrix<T> {
        DenseMatrix::column_vector(&[-T::one(), T::zero()])
    }

    fn f_t(&self, y: &[T], _z: &[T], t: T) -> Vec<T> {
        let ds2 = (t + t).sin();
        let d = y[0] - T::one();
        vec![T::zero(), ds2 * (d * d - y[1])]
    }

    fn g_y(&self, y: &[T], _z: &[T], _t: T) -> DenseMatrix<T> {
        DenseMatrix::row_vector(&[-T::lit(2.0) * (y[0] - T::one()), T::one()])
    }

    fn g_t(&self, _y: &[T], _z: &[T], _t: T) -> Vec<T> {
        vec![T::zero()]
    }

    fn g_yy(&self, _y: &[T], _z: &[T], _t: T) -> Tensor3<T> {
        let mut h = Tensor3::zeros(1, 2);
        h.set(0, 0, 0, -T::lit(2.0));
        h
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
