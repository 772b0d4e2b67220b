use crate::dae::{DaeIndex, DaeProblem, InitialConditions};
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Tensor3};
use crate::scalar::Real;

/// Mass, gravity and initial rod length shared by both pendulum formulations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PendulumParams<T> {
    pub mass: T,
    pub gravity: T,
    pub length: T,
}

impl<T: Real> Default for PendulumParams<T> {
    fn default() -> Self {
        Self {
            mass: T::one(),
            gravity: T::lit(9.81),
            length: T::one(),
        }
    }
}

impl<T: Real> PendulumParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > T::zero()) || !(self.length > T::zero()) || !self.gravity.is_finite() {
            return Err(Error::InvalidParams(format!(
                "pendulum needs m > 0 and s > 0 (got m = {}, s = {})",
                self.mass, self.length
            )));
        }
        Ok(())
    }

    fn initial_conditions(&self) -> InitialConditions<T> {
        let (m, g, s) = (self.mass, self.gravity, self.length);
        InitialConditions {
            y0: vec![T::zero(), -s, T::one(), T::zero()],
            z0: vec![m * (T::one() + s * g) / (T::lit(2.0) * s * s)],
            t0: T::zero(),
        }
    }

    fn f(&self, y: &[T], z: &[T]) -> Vec<T> {
        let two = T::lit(2.0);
        vec![
            y[2],
            y[3],
            -two * y[0] * z[0] / self.mass,
            -self.gravity - two * y[1] * z[0] / self.mass,
        ]
    }

    fn f_y(&self, z: &[T]) -> DenseMatrix<T> {
        let c = -T::lit(2.0) * z[0] / self.mass;
        let mut j = DenseMatrix::zeros(4, 4);
        j[(0, 2)] = T::one();
        j[(1, 3)] = T::one();
        j[(2, 0)] = c;
        j[(3, 1)] = c;
        j
    }

    fn f_z(&self, y: &[T]) -> DenseMatrix<T> {
        let c = -T::lit(2.0) / self.mass;
        DenseMatrix::column_vector(&[T::zero(), T::zero(), c * y[0], c * y[1]])
    }
}

/// Planar pendulum with the index-1 (acceleration-level) constraint
/// `m(y3² + y4² - g y2) - 2z(y1² + y2²) = 0`.
#[derive(Clone, Debug)]
pub struct PendulumIndex1<T> {
    pub params: PendulumParams<T>,
}

impl<T: Real> Default for PendulumIndex1<T> {
    fn default() -> Self {
        Self { params: PendulumParams::default() }
    }
}

impl<T: Real> DaeProblem<T> for PendulumIndex1<T> {
    fn name(&self) -> &str {
        "pendulum1"
    }

    fn n_differential(&self) -> usize {
        4
    }

    fn n_algebraic(&self) -> usize {
        1
    }

    fn index(&self) -> DaeIndex {
        DaeIndex::One
    }

    fn f(&self, y: &[T], z: &[T], _t: T) -> Vec<T> {
        self.params.f(y, z)
    }

    fn g(&self, y: &[T], z: &[T], _t: T) -> Vec<T> {
        let p = &self.params;
        let two = T::lit(2.0);
        vec![p.mass * (y[2] * y[2] + y[3] * y[3] - p.gravity * y[1]) - two * z[0] * (y[0] * y[0] + y[1] * y[1])]
    }

    fn initial_conditions(&self) -> InitialConditions<T> {
        self.params.initial_conditions()
    }

    fn f_y(&self, _y: &[T], z: &[T], _t: T) -> DenseMatrix<T> {
        self.params.f_y(z)
    }

    fn f_z(&self, y: &[T], _z: &[T], _t: T) -> DenseMatrix<T> {
        self.params.f_z(y)
    }

    fn f_t(&self, _y: &[T], _z: &[T], _t: T) -> Vec<T> {
        vec![T::zero(); 4]
    }

    fn g_y(&self, y: &[T], z: &[T], _t: T) -> DenseMatrix<T> {
        let p = &self.params;
        let two = T::lit(2.0);
        let four = T::lit(4.0);
        DenseMatrix::row_vector(&[
            -four * z[0] * y[0],
            -p.mass * p.gravity - four * z[0] * y[1],
            two * p.mass * y[2],
            two * p.mass * y[3],
        ])
    }

    fn g_z(&self, y: &[T], _z: &[T], _t: T) -> DenseMatrix<T> {
        DenseMatrix::row_vector(&[-T::lit(2.0) * (y[0] * y[0] + y[1] * y[1])])
    }

    fn g_t(&self, _y: &[T], _z: &[T], _t: T) -> Vec<T> {
        vec![T::zero()]
    }

    fn g_yy(&self, _y: &[T], z: &[T], _t: T) -> Tensor3<T> {
        let mut h = Tensor3::zeros(1, 4);
        let c = -T::lit(4.0) * z[0];
        let d = T::lit(2.0) * self.params.mass;
        h.set(0, 0, 0, c);
        h.set(0, 1, 1, c);
        h.set(0, 2, 2, d);
        h.set(0, 3, 3, d);
        h
    }

    fn g_yt(&self, _y: &[T], _z: &[T], _t: T) -> DenseMatrix<T> {
        DenseMatrix::zeros(1, 4)
    }

    fn g_tt(&self, _y: &[T], _z: &[T], _t: T) -> Vec<T> {
        vec![T::zero()]
    }

    fn has_analytic_constraint_curvature(&self) -> bool {
        true
    }
}

/// Planar pendulum with the velocity-level constraint `y1 y3 + y2 y4 = 0`,
/// a Hessenberg index-2 system.
#[derive(Clone, Debug)]
pub struct PendulumIndex2<T> {
    pub params: PendulumParams<T>,
}

impl<T: Real> Default for PendulumIndex2<T> {
    fn default() -> Self {
        Self { params: PendulumParams::default() }
    }
}

impl<T: Real> DaeProblem<T> for PendulumIndex2<T> {
    fn name(&self) -> &str {
        "pendulum2"
    }

    fn n_differential(&self) -> usize {
        4
    }

    fn n_algebraic(&self) -> usize {
        1
    }

    fn index(&self) -> DaeIndex {
        DaeIndex::Two
    }

    fn f(&self, y: &[T], z: &[T], _t: T) -> Vec<T> {
        self.params.f(y, z)
    }

    fn g(&self, y: &[T], _z: &[T], _t: T) -> Vec<T> {
        vec![y[0] * y[2] + y[1] * y[3]]
    }

    fn initial_conditions(&self) -> InitialConditions<T> {
        self.params.initial_conditions()
    }

    fn f_y(&self, _y: &[T], z: &[T], _t: T) -> DenseMatrix<T> {
        self.params.f_y(z)
    }

    fn f_z(&self, y: &[T], _z: &[T], _t: T) -> DenseMatrix<T> {
        self.params.f_z(y)
    }

    fn f_t(&self, _y: &[T], _z: &[T], _t: T) -> Vec<T> {
        vec![T::zero(); 4]
    }

    fn g_y(&self, y: &[T], _z: &[T], _t: T) -> DenseMatrix<T> {
        DenseMatrix::row_vector(&[y[2], y[3], y[0], y[1]])
    }

    fn g_t(&self, _y: &[T], _z: &[T], _t: T) -> Vec<T> {
        vec![T::zero()]
    }

    fn g_yy(&self, _y: &[T], _z: &[T], _t: T) -> Tensor3<T> {
        let mut h = Tensor3::zeros(1, 4);
        for (j, k) in [(0, 2), (2, 0), (1, 3), (3, 1)] {
            h.set(0, j, k, T::one());
        }
        h
    }

    fn g_yt(&self, _y: &[T], _z: &[T], _t: T) -> DenseMatrix<T> {
        DenseMatrix::zeros(1, 4)
    }

    fn g_tt(&self, _y: &[T], _z: &[T], _t: T) -> Vec<T> {
        vec![T::zero()]
    }

    fn has_analytic_constraint_curvature(&self) -> bool {
        true
    }
}
