use super::matrix::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Rank-3 tensor of shape `(m, n, n)`; slice `i` is the Hessian of constraint `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3<T> {
    m: usize,
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Tensor3<T> {
    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            data: vec![T::zero(); m * n * n],
        }
    }

    /// Stacks `m` square `n x n` slices.
    pub fn from_slices(slices: &[DenseMatrix<T>]) -> Result<Self> {
        let n = slices.first().map_or(0, DenseMatrix::rows);
        let mut t = Self::zeros(slices.len(), n);
        for (i, s) in slices.iter().enumerate() {
            if s.rows() != n || s.cols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "slice {i} is {}x{}, expected {n}x{n}",
                    s.rows(),
                    s.cols()
                )));
            }
            t.data[i * n * n..(i + 1) * n * n].copy_from_slice(s.as_slice());
        }
        Ok(t)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.m, self.n, self.n)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: T) {
        self.data[(i * self.n + j) * self.n + k] = v;
    }

    pub fn slice(&self, i: usize) -> DenseMatrix<T> {
        let nn = self.n * self.n;
        DenseMatrix::from_row_slice(self.n, self.n, &self.data[i * nn..(i + 1) * nn])
            .expect("slice dimensions")
    }

    /// `(vᵀ H_i v)_i` for every slice `H_i`.
    pub fn contract_quadratic(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against tensor with n = {}",
                v.len(),
                self.n
            )));
        }
        Ok((0..self.m)
            .map(|i| {
                let mut acc = T::zero();
                for j in 0..self.n {
                    if v[j] == T::zero() {
                        continue;
                    }
                    let mut row = T::zero();
                    for k in 0..self.n {
                        row = row + self.get(i, j, k) * v[k];
                    }
                    acc = acc + v[j] * row;
                }
                acc
            })
            .collect())
    }

    /// The `m x n` matrix `Σ_k T[i, j, k] v_k`.
    pub fn contract_last(&self, v: &[T]) -> Result<DenseMatrix<T>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against tensor with n = {}",
                v.len(),
                self.n
            )));
        }
        let mut out = DenseMatrix::zeros(self.m, self.n);
        for i in 0..self.m {
            for j in 0..self.n {
                let mut acc = T::zero();
                for (k, &vk) in v.iter().enumerate() {
                    acc = acc + self.get(i, j, k) * vk;
                }
                out[(i, j)] = acc;
            }
        }
        Ok(out)
    }

    /// Largest violation of slice symmetry `|T[i,j,k] - T[i,k,j]|`.
    pub fn symmetry_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.m {
            for j in 0..self.n {
                for k in 0..j {
                    worst = worst.max((self.get(i, j, k) - self.get(i, k, j)).abs());
                }
            }
        }
        worst
    }
}

/// `(vᵀ H_i v)_i`; free-function form of [`Tensor3::contract_quadratic`].
pub fn contract_quadratic<T: Real>(tensor: &Tensor3<T>, v: &[T]) -> Result<Vec<T>> {
    tensor.contract_quadratic(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_tensor() {
        let t = Tensor3::<f64>::zeros(2, 3);
        assert_eq!(t.contract_quadratic(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_slice_is_squared_norm() {
        let t = Tensor3::from_slices(&[DenseMatrix::identity(2)]).unwrap();
        assert_eq!(contract_quadratic(&t, &[3.0, 4.0]).unwrap(), vec![25.0]);
    }

    #[test]
    fn pendulum_constraint_hessian() {
        // g = y1 y3 + y2 y4
        let mut t = Tensor3::<f64>::zeros(1, 4);
        for (j, k) in [(0, 2), (2, 0), (1, 3), (3, 1)] {
            t.set(0, j, k, 1.0);
        }
        assert_eq!(t.symmetry_defect(), 0.0);
        assert_eq!(t.contract_quadratic(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![22.0]);
        let m = t.contract_last(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.row(0), &[3.0, 4.0, 1.0, 2.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let t = Tensor3::<f64>::zeros(1, 3);
        assert!(matches!(
            t.contract_quadratic(&[1.0]),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
