//! Staggered-grid semi-discretization of the electro-neutral Nernst-Planck
//! system for two monovalent ions on `[0, 1]` with no-flux boundaries.
//!
//! Concentrations `C`, `A` live at the `Ns` cell centers `x_j = (j + 1/2) dx`,
//! the potential gradient `W` at the `Ns - 1` interior edges `(e + 1) dx`.

use crate::dae::{DaeIndex, DaeProblem, InitialConditions};
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Tensor3};
use crate::scalar::Real;

/// How the initial potential gradient is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EnnpeIc {
    /// Solve the hidden constraint of the semi-discrete system exactly.
    #[default]
    Discrete,
    /// Sample the continuum initial gradient at the cell edges.
    Analytic,
}

/// Discrete operators of the semi-discretization.
#[derive(Clone, Debug, PartialEq)]
pub struct EnnpeAssembly<T> {
    pub ns: usize,
    pub dx: T,
    pub d_c: T,
    pub d_a: T,
}

/// Builds the operators for `ns` cells and diffusion coefficients `d_c`, `d_a`.
pub fn ennpe_assemble<T: Real>(ns: usize, d_c: T, d_a: T) -> Result<EnnpeAssembly<T>> {
    if ns < 3 {
        return Err(Error::InvalidGrid(format!("ENNPE needs at least 3 cells, got {ns}")));
    }
    if !(d_c > T::zero()) || !(d_a > T::zero()) {
        return Err(Error::InvalidParams(format!(
            "diffusion coefficients must be positive (D_c = {d_c}, D_a = {d_a})"
        )));
    }
    Ok(EnnpeAssembly {
        ns,
        dx: T::one() / T::from_count(ns),
        d_c,
        d_a,
    })
}

impl<T: Real> EnnpeAssembly<T> {
    pub fn cell_centers(&self) -> Vec<T> {
        (0..self.ns)
            .map(|j| (T::from_count(j) + T::lit(0.5)) * self.dx)
            .collect()
    }

    pub fn cell_edges(&self) -> Vec<T> {
        (1..self.ns).map(|e| T::from_count(e) * self.dx).collect()
    }

    /// Effective diffusivity `2 D_c D_a / (D_c + D_a)`.
    pub fn d_eff(&self) -> T {
        T::lit(2.0) * self.d_c * self.d_a / (self.d_c + self.d_a)
    }

    /// Dense second-difference matrix `M` with Neumann corners.
    pub fn laplacian_matrix(&self) -> DenseMatrix<T> {
        let ns = self.ns;
        let s = T::one() / (self.dx * self.dx);
        let mut m = DenseMatrix::zeros(ns, ns);
        for e in 0..ns - 1 {
            m[(e, e)] = m[(e, e)] - s;
            m[(e + 1, e + 1)] = m[(e + 1, e + 1)] - s;
            m[(e, e + 1)] = s;
            m[(e + 1, e)] = s;
        }
        m
    }

    /// `M v` without forming `M`.
    pub fn apply_laplacian(&self, v: &[T]) -> Vec<T> {
        let s = T::one() / (self.dx * self.dx);
        let mut out = vec![T::zero(); self.ns];
        for e in 0..self.ns - 1 {
            let flux = (v[e + 1] - v[e]) * s;
            out[e] = out[e] + flux;
            out[e + 1] = out[e + 1] - flux;
        }
        out
    }

    /// Conservative drift `B(v, W)`: `B_j = F_j - F_{j-1}` with edge fluxes
    /// `F_e = (v_e + v_{e+1}) W_e / (2 dx)` and zero boundary fluxes.
    pub fn drift(&self, v: &[T], w: &[T]) -> Vec<T> {
        let k = T::one() / (T::lit(2.0) * self.dx);
        let mut out = vec![T::zero(); self.ns];
        for e in 0..self.ns - 1 {
            let flux = (v[e] + v[e + 1]) * w[e] * k;
            out[e] = out[e] + flux;
            out[e + 1] = out[e + 1] - flux;
        }
        out
    }

    /// `∂B/∂v` and `∂B/∂W`.
    pub fn drift_jacobians(&self, v: &[T], w: &[T]) -> (DenseMatrix<T>, DenseMatrix<T>) {
        let ns = self.ns;
        let k = T::one() / (T::lit(2.0) * self.dx);
        let mut dv = DenseMatrix::zeros(ns, ns);
        let mut dw = DenseMatrix::zeros(ns, ns - 1);
        for e in 0..ns - 1 {
            let a = w[e] * k;
            for (row, sign) in [(e, T::one()), (e + 1, -T::one())] {
                dv[(row, e)] = dv[(row, e)] + sign * a;
                dv[(row, e + 1)] = dv[(row, e + 1)] + sign * a;
                dw[(row, e)] = sign * (v[e] + v[e + 1]) * k;
            }
        }
        (dv, dw)
    }
}

/// `(C0, A0, W0)` for the initial profile `2 + cos(πx)`.
pub fn ennpe_initial_conditions<T: Real>(
    assembly: &EnnpeAssembly<T>,
    mode: EnnpeIc,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let pi = T::PI();
    let two = T::lit(2.0);
    let c0: Vec<T> = assembly.cell_centers().iter().map(|&x| two + (pi * x).cos()).collect();
    let a0 = c0.clone();
    let (d_c, d_a, dx) = (assembly.d_c, assembly.d_a, assembly.dx);
    let w0 = match mode {
        EnnpeIc::Discrete => (0..assembly.ns - 1)
            .map(|l| {
                let num = d_c * (c0[l] - c0[l + 1]) / dx - d_a * (a0[l] - a0[l + 1]) / dx;
                let den = d_c * (c0[l] + c0[l + 1]) / two + d_a * (a0[l] + a0[l + 1]) / two;
                num / den
            })
            .collect(),
        EnnpeIc::Analytic => assembly
            .cell_edges()
            .iter()
            .map(|&x| {
                let u = two + (pi * x).cos();
                let ux = -pi * (pi * x).sin();
                (d_a * ux - d_c * ux) / (d_c * u + d_a * u)
            })
            .collect(),
    };
    (c0, a0, w0)
}

/// Exact continuum solution sampled on the staggered grid: `(c, a)` at cell
/// centers and `w` at interior edges.
pub fn ennpe_analytic<T: Real>(assembly: &EnnpeAssembly<T>, t: T) -> (Vec<T>, Vec<T>, Vec<T>) {
    let pi = T::PI();
    let two = T::lit(2.0);
    let decay = (-pi * pi * assembly.d_eff() * t).exp();
    let c: Vec<T> = assembly
        .cell_centers()
        .iter()
        .map(|&x| two + decay * (pi * x).cos())
        .collect();
    let ratio = (assembly.d_a - assembly.d_c) / (assembly.d_a + assembly.d_c);
    let w = assembly
        .cell_edges()
        .iter()
        .map(|&x| ratio * (-pi * decay * (pi * x).sin()) / (two + decay * (pi * x).cos()))
        .collect();
    (c.clone(), c, w)
}

/// The semi-discrete ENNPE system `Ċ = D_c(MC + B(C, W))`,
/// `Ȧ = D_a(MA - B(A, W))`, `0 = Π(C) - Π(A)`.
#[derive(Clone, Debug)]
pub struct Ennpe<T> {
    pub assembly: EnnpeAssembly<T>,
    pub ic: EnnpeIc,
}

impl<T: Real> Ennpe<T> {
    pub fn new(ns: usize, d_c: T, d_a: T, ic: EnnpeIc) -> Result<Self> {
        Ok(Self {
            assembly: ennpe_assemble(ns, d_c, d_a)?,
            ic,
        })
    }
}

impl<T: Real> DaeProblem<T> for Ennpe<T> {
    fn name(&self) -> &str {
        "ennpe"
    }

    fn n_differential(&self) -> usize {
        2 * self.assembly.ns
    }

    fn n_algebraic(&self) -> usize {
        self.assembly.ns - 1
    }

    fn index(&self) -> DaeIndex {
        DaeIndex::Two
    }

    fn f(&self, y: &[T], z: &[T], _t: T) -> Vec<T> {
        let asm = &self.assembly;
        let (c, a) = y.split_at(asm.ns);
        let mc = asm.apply_laplacian(c);
        let ma = asm.apply_laplacian(a);
        let bc = asm.drift(c, z);
        let ba = asm.drift(a, z);
        let mut out = Vec::with_capacity(2 * asm.ns);
        out.extend((0..asm.ns).map(|j| asm.d_c * (mc[j] + bc[j])));
        out.extend((0..asm.ns).map(|j| asm.d_a * (ma[j] - ba[j])));
        out
    }

    fn g(&self, y: &[T], _z: &[T], _t: T) -> Vec<T> {
        let ns = self.assembly.ns;
        (0..ns - 1).map(|j| y[j] - y[ns + j]).collect()
    }

    fn initial_conditions(&self) -> InitialConditions<T> {
        let (c0, a0, w0) = ennpe_initial_conditions(&self.assembly, self.ic);
        InitialConditions {
            y0: c0.into_iter().chain(a0).collect(),
            z0: w0,
            t0: T::zero(),
        }
    }

    fn analytic_solution(&self, t: T) -> Option<(Vec<T>, Vec<T>)> {
        let (c, a, w) = ennpe_analytic(&self.assembly, t);
        Some((c.into_iter().chain(a).collect(), w))
    }

    fn f_y(&self, y: &[T], z: &[T], _t: T) -> DenseMatrix<T> {
        let asm = &self.assembly;
        let ns = asm.ns;
        let (c, a) = y.split_at(ns);
        let lap = asm.laplacian_matrix();
        let (bc, _) = asm.drift_jacobians(c, z);
        let (ba, _) = asm.drift_jacobians(a, z);
        let mut j = DenseMatrix::zeros(2 * ns, 2 * ns);
        j.set_block(0, 0, &lap.add(&bc).expect("square blocks").scaled(asm.d_c));
        j.set_block(ns, ns, &lap.sub(&ba).expect("square blocks").scaled(asm.d_a));
        j
    }

    fn f_z(&self, y: &[T], z: &[T], _t: T) -> DenseMatrix<T> {
        let asm = &self.assembly;
        let ns = asm.ns;
        let (c, a) = y.split_at(ns);
        let (_, wc) = asm.drift_jacobians(c, z);
        let (_, wa) = asm.drift_jacobians(a, z);
        let mut j = DenseMatrix::zeros(2 * ns, ns - 1);
        j.set_block(0, 0, &wc.scaled(asm.d_c));
        j.set_block(ns, 0, &wa.scaled(-asm.d_a));
        j
    }

    fn f_t(&self, _y: &[T], _z: &[T], _t: T) -> Vec<T> {
        vec![T::zero(); 2 * self.assembly.ns]
    }

    fn g_y(&self, _y: &[T], _z: &[T], _t: T) -> DenseMatrix<T> {
        let ns = self.assembly.ns;
        let mut j = DenseMatrix::zeros(ns - 1, 2 * ns);
        for r in 0..ns - 1 {
            j[(r, r)] = T::one();
            j[(r, ns + r)] = -T::one();
        }
        j
    }

    fn g_t(&self, _y: &[T], _z: &[T], _t: T) -> Vec<T> {
        vec![T::zero(); self.assembly.ns - 1]
    }

    fn g_yy(&self, _y: &[T], _z: &[T], _t: T) -> Tensor3<T> {
        Tensor3::zeros(self.assembly.ns - 1, 2 * self.assembly.ns)
    }

    fn g_yt(&self, _y: &[T], _z: &[T], _t: T) -> DenseMatrix<T> {
        DenseMatrix::zeros(self.assembly.ns - 1, 2 * self.assembly.ns)
    }

    fn g_tt(&self, _y: &[T], _z: &[T], _t: T) -> Vec<T> {
        vec![T::zero(); self.assembly.ns - 1]
    }

    fn has_analytic_constraint_curvature(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dae::check_consistency;

    #[test]
    fn three_cell_laplacian() {
        let asm = ennpe_assemble(3, 1.0f64, 2.0).unwrap();
        let s = 9.0;
        let expected = DenseMatrix::from_rows(&[
            vec![-s, s, 0.0],
            vec![s, -2.0 * s, s],
            vec![0.0, s, -s],
        ])
        .unwrap();
        assert!(asm.laplacian_matrix().sub(&expected).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn laplacian_columns_sum_to_zero() {
        for ns in [3, 7, 50] {
            let m = ennpe_assemble(ns, 1.0f64, 2.0).unwrap().laplacian_matrix();
            for j in 0..ns {
                let s: f64 = m.column(j).iter().sum();
                assert!(s.abs() < 1e-9, "column {j} sums to {s}");
            }
        }
    }

    #[test]
    fn drift_telescopes() {
        let asm = ennpe_assemble(11, 1.0f64, 2.0).unwrap();
        let v: Vec<f64> = (0..11).map(|j| 1.0 + (j as f64 * 0.7).sin().abs()).collect();
        let w: Vec<f64> = (0..10).map(|e| (e as f64 * 1.3).cos()).collect();
        let s: f64 = asm.drift(&v, &w).iter().sum();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn constant_state_is_steady() {
        let asm = ennpe_assemble(9, 1.0f64, 2.0).unwrap();
        let v = vec![2.5; 9];
        let w = vec![0.0; 8];
        let mv = asm.apply_laplacian(&v);
        let b = asm.drift(&v, &w);
        assert!(mv.iter().zip(&b).all(|(x, y)| (x + y).abs() < 1e-10));
    }

    #[test]
    fn equal_diffusivities_give_zero_gradient() {
        let asm = ennpe_assemble(20, 1.5f64, 1.5).unwrap();
        for mode in [EnnpeIc::Discrete, EnnpeIc::Analytic] {
            let (_, _, w) = ennpe_initial_conditions(&asm, mode);
            assert!(w.iter().all(|&x| x == 0.0));
        }
        let (_, _, w) = ennpe_analytic(&asm, 0.3);
        assert!(w.iter().all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn discrete_ic_is_consistent() {
        let p = Ennpe::new(50, 1.0, 2.0, EnnpeIc::Discrete).unwrap();
        let rep = check_consistency(&p);
        assert!(rep.passed, "{rep:?}");
        assert!(rep.hidden_residual.unwrap() <= 1e-12);
    }

    #[test]
    fn analytic_ic_converges_to_discrete_at_second_order() {
        let diff = |ns: usize| {
            let asm = ennpe_assemble(ns, 1.0f64, 2.0).unwrap();
            let (_, _, wd) = ennpe_initial_conditions(&asm, EnnpeIc::Discrete);
            let (_, _, wa) = ennpe_initial_conditions(&asm, EnnpeIc::Analytic);
            wd.iter().zip(&wa).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        };
        let ratio = diff(250) / diff(500);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn analytic_solution_limits() {
        let asm = ennpe_assemble(16, 1.0f64, 2.0).unwrap();
        let (c, a, _) = ennpe_analytic(&asm, 0.0);
        let (c0, _, _) = ennpe_initial_conditions(&asm, EnnpeIc::Discrete);
        assert_eq!(c, a);
        assert!(c.iter().zip(&c0).all(|(x, y)| (x - y).abs() < 1e-15));
        let (c, _, w) = ennpe_analytic(&asm, 50.0);
        assert!(c.iter().all(|&x| (x - 2.0).abs() < 1e-12));
        assert!(w.iter().all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn analytic_ic_matches_analytic_solution_at_zero() {
        let asm = ennpe_assemble(16, 1.0f64, 2.0).unwrap();
        let (_, _, w0) = ennpe_initial_conditions(&asm, EnnpeIc::Analytic);
        let (_, _, w) = ennpe_analytic(&asm, 0.0);
        assert!(w0.iter().zip(&w).all(|(x, y)| (x - y).abs() < 1e-14));
    }

    #[test]
    fn too_few_cells() {
        assert!(matches!(ennpe_assemble(2, 1.0f64, 1.0), Err(Error::InvalidGrid(_))));
    }
}
