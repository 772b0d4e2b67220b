//! Composite 5-point Gauss–Legendre quadrature.

use crate::error::{Error, Result};
use crate::scalar::{all_finite, Real};

/// Nodes on `[-1, 1]`, ascending.
pub const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_663_992_797_626_878_299,
    -0.538_469_310_105_683_091_036_314_420_700,
    0.0,
    0.538_469_310_105_683_091_036_314_420_700,
    0.906_179_845_938_663_992_797_626_878_299,
];

/// Weights matching [`GL5_NODES`]; they sum to 2.
pub const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_087_514_264_040_720,
    0.478_628_670_499_366_468_041_291_514_836,
    0.568_888_888_888_888_888_888_888_888_889,
    0.478_628_670_499_366_468_041_291_514_836,
    0.236_926_885_056_189_087_514_264_040_720,
];

/// Quadrature points and weights mapped onto `[a, b]`.
#[inline]
pub fn gl5_points<T: Real>(a: T, b: T) -> [(T, T); 5] {
    let half = (b - a) * T::lit(0.5);
    let mid = (a + b) * T::lit(0.5);
    core::array::from_fn(|i| {
        (
            mid + half * T::lit(GL5_NODES[i]),
            half * T::lit(GL5_WEIGHTS[i]),
        )
    })
}

/// Integrates a vector-valued function over `[a, b]` with `subintervals`
/// equal panels of the 5-point Gauss–Legendre rule.
pub fn gauss_legendre_5<T, F>(mut integrand: F, a: T, b: T, subintervals: usize) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(T) -> Vec<T>,
{
    if !(a < b) {
        return Err(Error::InvalidGrid(format!(
            "quadrature interval [{a}, {b}] is empty"
        )));
    }
    if subintervals == 0 {
        return Err(Error::InvalidGrid("zero quadrature subintervals".into()));
    }
    let h = (b - a) / T::from_count(subintervals);
    let mut acc: Option<Vec<T>> = None;
    for k in 0..subintervals {
        let lo = a + h * T::from_count(k);
        let hi = if k + 1 == subintervals { b } else { lo + h };
        for (t, w) in gl5_points(lo, hi) {
            let v = integrand(t);
            if !all_finite(&v) {
                return Err(Error::NonFiniteIntegrand { t: t.to_f64_lossy() });
            }
            match acc.as_mut() {
                None => acc = Some(v.into_iter().map(|x| x * w).collect()),
                Some(sum) => {
                    if sum.len() != v.len() {
                        return Err(Error::DimensionMismatch(
                            "integrand changed length between evaluations".into(),
                        ));
                    }
                    for (s, x) in sum.iter_mut().zip(v) {
                        *s = *s + x * w;
                    }
                }
            }
        }
    }
    Ok(acc.unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_two() {
        let s: f64 = GL5_WEIGHTS.iter().sum();
        assert_relative_eq!(s, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn constant_integrand_exact() {
        let v = gauss_legendre_5(|_| vec![1.0], 0.0, 1.0, 1).unwrap();
        assert_relative_eq!(v[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn degree_nine_exact() {
        let v = gauss_legendre_5(|x: f64| vec![x.powi(9)], 0.0, 1.0, 1).unwrap();
        assert!((v[0] - 0.1).abs() <= 1e-13);
        // Degree 10 is not integrated exactly by a single panel.
        let w = gauss_legendre_5(|x: f64| vec![x.powi(10)], 0.0, 1.0, 1).unwrap();
        assert!((w[0] - 1.0 / 11.0).abs() > 1e-8);
    }

    #[test]
    fn sine_with_four_panels() {
        let v = gauss_legendre_5(|x: f64| vec![x.sin()], 0.0, core::f64::consts::PI, 4).unwrap();
        assert!((v[0] - 2.0).abs() <= 1e-10);
    }

    #[test]
    fn observed_order_on_smooth_integrand() {
        let exact = 1.0 - (-3.0f64).exp();
        let coarse = gauss_legendre_5(|x: f64| vec![3.0 * (-3.0 * x).exp()], 0.0, 1.0, 1).unwrap()[0];
        let fine = gauss_legendre_5(|x: f64| vec![3.0 * (-3.0 * x).exp()], 0.0, 1.0, 2).unwrap()[0];
        let order = ((coarse - exact).abs() / (fine - exact).abs()).log2();
        assert!(order >= 9.0, "observed order {order}");
    }

    #[test]
    fn vector_valued() {
        let v = gauss_legendre_5(|x: f64| vec![x, x * x], 0.0, 2.0, 3).unwrap();
        assert_relative_eq!(v[0], 2.0, epsilon = 1e-14);
        assert_relative_eq!(v[1], 8.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn non_finite_reported() {
        let err = gauss_legendre_5(|x: f64| vec![1.0 / (x - 0.5).abs().min(0.0)], 0.0, 1.0, 1);
        assert!(matches!(err, Err(Error::NonFiniteIntegrand { .. })));
    }

    #[test]
    fn bad_interval() {
        assert!(gauss_legendre_5(|_| vec![1.0], 1.0, 0.0, 1).is_err());
        assert!(gauss_legendre_5(|_| vec![1.0], 0.0, 1.0, 0).is_err());
    }
}
