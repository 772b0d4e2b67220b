//! Finite-difference derivatives used when a problem has no analytic oracle.

use super::matrix::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::{all_finite, Real};

fn default_step<T: Real>(x: T) -> T {
    T::epsilon().sqrt() * (T::one() + x.abs())
}

fn second_order_step<T: Real>(x: T) -> T {
    T::epsilon().powf(T::lit(0.25)) * (T::one() + x.abs())
}

fn checked<T: Real>(v: Vec<T>, component: usize) -> Result<Vec<T>> {
    if all_finite(&v) {
        Ok(v)
    } else {
        Err(Error::NonFiniteEvaluation { component })
    }
}

/// Central-difference Jacobian of `func` at `at`.
///
/// Column `j` uses the step `step` when given, otherwise `sqrt(eps) * (1 + |at[j]|)`.
pub fn fd_jacobian<T, F>(mut func: F, at: &[T], step: Option<T>) -> Result<DenseMatrix<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Vec<T>,
{
    if let Some(h) = step {
        if !(h > T::zero()) {
            return Err(Error::InvalidParams(format!("finite-difference step {h}")));
        }
    }
    let base = checked(func(at), usize::MAX)?;
    let mut jac = DenseMatrix::zeros(base.len(), at.len());
    let mut x = at.to_vec();
    for j in 0..at.len() {
        let h = step.unwrap_or_else(|| default_step(at[j]));
        let (hi, lo) = (at[j] + h, at[j] - h);
        x[j] = hi;
        let plus = checked(func(&x), j)?;
        x[j] = lo;
        let minus = checked(func(&x), j)?;
        x[j] = at[j];
        if plus.len() != base.len() || minus.len() != base.len() {
            return Err(Error::DimensionMismatch("function output length varies".into()));
        }
        // Divide by the step actually representable in floating point.
        let inv = T::one() / (hi - lo);
        for i in 0..base.len() {
            jac[(i, j)] = (plus[i] - minus[i]) * inv;
        }
    }
    Ok(jac)
}

/// Central difference of a scalar-parameter vector function.
pub fn fd_derivative<T, F>(mut func: F, at: T) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(T) -> Vec<T>,
{
    let h = default_step(at);
    let (hi, lo) = (at + h, at - h);
    let plus = checked(func(hi), 0)?;
    let minus = checked(func(lo), 0)?;
    let inv = T::one() / (hi - lo);
    Ok(plus.iter().zip(&minus).map(|(&p, &m)| (p - m) * inv).collect())
}

/// Second derivative of a scalar-parameter vector function.
pub fn fd_second_derivative<T, F>(mut func: F, at: T) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(T) -> Vec<T>,
{
    let h = second_order_step(at);
    let plus = checked(func(at + h), 0)?;
    let mid = checked(func(at), 0)?;
    let minus = checked(func(at - h), 0)?;
    let inv = T::one() / (h * h);
    Ok(plus
        .iter()
        .zip(&mid)
        .zip(&minus)
        .map(|((&p, &c), &m)| (p - c - c + m) * inv)
        .collect())
}

/// Mixed second partial `∂²func/∂x_j∂x_k` for every output, by the four-point stencil.
pub(crate) fn fd_mixed_second<T, F>(func: &mut F, at: &[T], j: usize, k: usize) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Vec<T>,
{
    let hj = second_order_step(at[j]);
    let hk = second_order_step(at[k]);
    let mut x = at.to_vec();
    let mut eval = |dj: T, dk: T| {
        x.copy_from_slice(at);
        x[j] = x[j] + dj;
        x[k] = x[k] + dk;
        checked(func(&x), j)
    };
    let pp = eval(hj, hk)?;
    let pm = eval(hj, -hk)?;
    let mp = eval(-hj, hk)?;
    let mm = eval(-hj, -hk)?;
    let inv = T::one() / (T::lit(4.0) * hj * hk);
    Ok((0..pp.len())
        .map(|i| (pp[i] - pm[i] - mp[i] + mm[i]) * inv)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_map() {
        let j = fd_jacobian(|x: &[f64]| x.to_vec(), &[0.3, -2.0, 7.5], None).unwrap();
        let diff = j.sub(&DenseMatrix::identity(3)).unwrap();
        assert!(diff.max_abs() <= 1e-10);
    }

    #[test]
    fn quadratic_map() {
        let j = fd_jacobian(|x: &[f64]| vec![x[0] * x[0], x[0] * x[1]], &[1.0, 1.0], None).unwrap();
        let expected = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert!(j.sub(&expected).unwrap().max_abs() <= 1e-7);
    }

    #[test]
    fn explicit_step() {
        let j = fd_jacobian(|x: &[f64]| vec![x[0].powi(3)], &[2.0], Some(1e-3)).unwrap();
        // central difference error is h^2 * f'''/6 = 1e-6
        assert!((j[(0, 0)] - 12.0).abs() <= 1.1e-6);
        assert!(fd_jacobian(|x: &[f64]| x.to_vec(), &[1.0], Some(0.0)).is_err());
    }

    #[test]
    fn non_finite_reported() {
        let err = fd_jacobian(|x: &[f64]| vec![1.0 / x[0]], &[0.0], None);
        assert!(matches!(err, Err(Error::NonFiniteEvaluation { .. })));
    }

    #[test]
    fn scalar_derivatives() {
        let d = fd_derivative(|t: f64| vec![t.sin()], 0.4).unwrap();
        assert!((d[0] - 0.4f64.cos()).abs() < 1e-8);
        let dd = fd_second_derivative(|t: f64| vec![t.sin()], 0.4).unwrap();
        assert!((dd[0] + 0.4f64.sin()).abs() < 1e-6);
    }

    #[test]
    fn mixed_partial() {
        let mut f = |x: &[f64]| vec![x[0] * x[0] * x[1]];
        let d = fd_mixed_second(&mut f, &[1.5, 2.0], 0, 1).unwrap();
        assert!((d[0] - 3.0).abs() < 1e-6);
        let d00 = fd_mixed_second(&mut f, &[1.5, 2.0], 0, 0).unwrap();
        assert!((d00[0] - 4.0).abs() < 1e-6);
    }
}
