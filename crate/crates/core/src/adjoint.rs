//! Backward adjoint solves: the adjoint DAE and the adjoint of the index-reduced ODE.

use std::fmt;

use crate::dae::{DaeIndex, DaeProblem, Qoi, TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::numerics::{fd_jacobian, DenseMatrix, LuFactors};
use crate::reduction::reduced_rhs;
use crate::scalar::Real;

/// Which adjoint system is solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AdjointPath {
    /// Adjoint DAE with differential and algebraic multipliers.
    Dae,
    /// Adjoint of the underlying ODE `ẏ = f`, `ż = h`.
    Ode,
}

impl fmt::Display for AdjointPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdjointPath::Dae => "adjoint-dae",
            AdjointPath::Ode => "adjoint-ode",
        })
    }
}

/// How the terminal value of the adjoint was formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TerminalCondition {
    /// `φ(T) = 0`.
    Index1Cumulative,
    /// `φ(T) = ζʸ − g_yᵀ g_z⁻ᵀ ζᶻ`; `algebraic` is false when `ζᶻ = 0`.
    Index1Terminal { algebraic: bool },
    /// `φ(T) = −g_yᵀ S⁻¹ ψᶻ(T)` with `S = f_zᵀ g_yᵀ`.
    Index2Cumulative,
    /// Projected terminal value; `algebraic` is false when `ζᶻ = 0`.
    Index2Terminal { algebraic: bool },
    /// `ν(T) = 0`.
    OdeCumulative,
    /// `ν(T) = ζ`.
    OdeTerminal,
}

/// Jacobians of the DAE (and, on the ODE path, of `h`) at one point of the
/// numerical solution.
#[derive(Clone, Debug)]
pub struct LinearizedOps<T> {
    pub t: T,
    pub fy: DenseMatrix<T>,
    pub fz: DenseMatrix<T>,
    pub gy: DenseMatrix<T>,
    pub gz: DenseMatrix<T>,
    pub hy: Option<DenseMatrix<T>>,
    pub hz: Option<DenseMatrix<T>>,
}

impl<T: Real> LinearizedOps<T> {
    /// Evaluates the Jacobians at `(y, z, t)`.
    pub fn at_state(problem: &dyn DaeProblem<T>, y: &[T], z: &[T], t: T, path: AdjointPath) -> Result<Self> {
        let (hy, hz) = match path {
            AdjointPath::Dae => (None, None),
            AdjointPath::Ode => {
                let hy = fd_jacobian(|yy| h_or_nan(problem, yy, z, t), y, None)?;
                let hz = fd_jacobian(|zz| h_or_nan(problem, y, zz, t), z, None)?;
                // Surface singular reductions instead of NaN Jacobians.
                reduced_rhs(problem, y, z, t)?;
                (Some(hy), Some(hz))
            }
        };
        Ok(Self {
            t,
            fy: problem.f_y(y, z, t),
            fz: problem.f_z(y, z, t),
            gy: problem.g_y(y, z, t),
            gz: problem.g_z(y, z, t),
            hy,
            hz,
        })
    }

    /// `S = f_zᵀ g_yᵀ`, the matrix inverted in the index-2 formulas.
    pub fn schur(&self) -> Result<DenseMatrix<T>> {
        self.fz.transpose().matmul(&self.gy.transpose())
    }

    /// `P = I − f_z (g_y f_z)⁻¹ g_y`.
    pub fn projector(&self) -> Result<DenseMatrix<T>> {
        let gf = self.gy.matmul(&self.fz)?;
        let sol = LuFactors::new(&gf)?.solve_matrix(&self.gy)?;
        DenseMatrix::identity(self.fy.rows()).sub(&self.fz.matmul(&sol)?)
    }

    /// Full Jacobian `[[f_y, f_z], [h_y, h_z]]` of the reduced ODE.
    pub fn ode_jacobian(&self) -> Result<DenseMatrix<T>> {
        let (hy, hz) = match (&self.hy, &self.hz) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::PathMismatch("h Jacobians were not evaluated".into())),
        };
        let (n, m) = (self.fy.rows(), self.gz.rows());
        let mut j = DenseMatrix::zeros(n + m, n + m);
        j.set_block(0, 0, &self.fy);
        j.set_block(0, n, &self.fz);
        j.set_block(n, 0, hy);
        j.set_block(n, n, hz);
        Ok(j)
    }
}

fn h_or_nan<T: Real>(problem: &dyn DaeProblem<T>, y: &[T], z: &[T], t: T) -> Vec<T> {
    match reduced_rhs(problem, y, z, t) {
        Ok((_, h)) => h,
        Err(_) => vec![T::nan(); problem.n_algebraic()],
    }
}

/// Jacobians at the linearly interpolated numerical solution at `t`.
pub fn linearized_ops_at<T: Real>(
    problem: &dyn DaeProblem<T>,
    traj: &Trajectory<T>,
    t: T,
    path: AdjointPath,
) -> Result<LinearizedOps<T>> {
    let (y, z) = traj.interpolate(t)?;
    LinearizedOps::at_state(problem, &y, &z, t, path)
}

/// Time derivative of `g_yᵀ` along the numerical solution at its final time,
/// an `n x m` matrix. Uses `g_yy`, `g_yt` with the last-interval slope when the
/// problem has them analytically, otherwise a backward difference over `delta`.
pub fn dgy_transpose_dt<T: Real>(problem: &dyn DaeProblem<T>, traj: &Trajectory<T>, delta: T) -> Result<DenseMatrix<T>> {
    let grid = traj.grid();
    let t_end = grid.t_end();
    let (y, z) = traj.terminal();
    if problem.has_analytic_constraint_curvature() {
        let (ydot, _) = traj.slope_of(grid.intervals() - 1);
        let rate = problem.g_yy(y, z, t_end).contract_last(&ydot)?.add(&problem.g_yt(y, z, t_end))?;
        return Ok(rate.transpose());
    }
    if !(delta > T::zero()) || delta > t_end - grid.t0() {
        return Err(Error::InvalidGrid(format!("difference step {delta} outside the trajectory")));
    }
    let (yb, zb) = traj.interpolate(t_end - delta)?;
    let hi = problem.g_y(y, z, t_end);
    let lo = problem.g_y(&yb, &zb, t_end - delta);
    Ok(hi.sub(&lo)?.scaled(T::one() / delta).transpose())
}

/// The adjoint value at the final time and how it was formed.
pub fn terminal_condition<T: Real>(
    problem: &dyn DaeProblem<T>,
    qoi: &Qoi<T>,
    ops: &LinearizedOps<T>,
    traj: &Trajectory<T>,
    path: AdjointPath,
    delta: T,
) -> Result<(Vec<T>, TerminalCondition)> {
    let n = problem.n_differential();
    let m = problem.n_algebraic();
    let t_end = traj.grid().t_end();
    if path == AdjointPath::Ode {
        return Ok(match qoi {
            Qoi::Cumulative { .. } => (vec![T::zero(); n + m], TerminalCondition::OdeCumulative),
            Qoi::Terminal { zeta_y, zeta_z } => (
                zeta_y.iter().chain(zeta_z).copied().collect(),
                TerminalCondition::OdeTerminal,
            ),
        });
    }
    match (problem.index(), qoi) {
        (DaeIndex::One, Qoi::Cumulative { .. }) => Ok((vec![T::zero(); n], TerminalCondition::Index1Cumulative)),
        (DaeIndex::One, Qoi::Terminal { zeta_y, zeta_z }) => {
            if is_zero(zeta_z) {
                return Ok((zeta_y.clone(), TerminalCondition::Index1Terminal { algebraic: false }));
            }
            let w = LuFactors::new(&ops.gz.transpose())?.solve(zeta_z)?;
            let corr = ops.gy.tr_matvec(&w);
            Ok((sub(zeta_y, &corr), TerminalCondition::Index1Terminal { algebraic: true }))
        }
        (DaeIndex::Two, Qoi::Cumulative { psi_z, .. }) => {
            let u = LuFactors::new(&ops.schur()?)?.solve(&psi_z(t_end))?;
            let v = ops.gy.tr_matvec(&u);
            Ok((v.into_iter().map(|a| -a).collect(), TerminalCondition::Index2Cumulative))
        }
        (DaeIndex::Two, Qoi::Terminal { zeta_y, zeta_z }) => {
            let lu = LuFactors::new(&ops.schur()?)?;
            let project = |v: &[T]| -> Result<Vec<T>> {
                let w = lu.solve(&ops.fz.tr_matvec(v))?;
                Ok(sub(v, &ops.gy.tr_matvec(&w)))
            };
            if is_zero(zeta_z) {
                return Ok((project(zeta_y)?, TerminalCondition::Index2Terminal { algebraic: false }));
            }
            let u = lu.solve(zeta_z)?;
            let v = ops.gy.tr_matvec(&u);
            let a = ops.fy.tr_matvec(&v);
            let b = dgy_transpose_dt(problem, traj, delta)?.matvec(&u);
            let inner: Vec<T> = (0..n).map(|i| zeta_y[i] - a[i] - b[i]).collect();
            Ok((project(&inner)?, TerminalCondition::Index2Terminal { algebraic: true }))
        }
    }
}

pub(crate) fn is_zero<T: Real>(v: &[T]) -> bool {
    v.iter().all(|a| *a == T::zero())
}

fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&p, &q)| p - q).collect()
}

/// Nodal adjoint values on the refined grid.
#[derive(Clone, Debug)]
pub struct AdjointSolution<T> {
    grid: TimeGrid<T>,
    refinement: usize,
    path: AdjointPath,
    terminal: TerminalCondition,
    n: usize,
    m: usize,
    y: Vec<T>,
    z: Vec<T>,
}

impl<T: Real> AdjointSolution<T> {
    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn refinement(&self) -> usize {
        self.refinement
    }

    pub fn path(&self) -> AdjointPath {
        self.path
    }

    pub fn terminal_condition(&self) -> TerminalCondition {
        self.terminal
    }

    pub fn nodes(&self) -> usize {
        self.grid.intervals() + 1
    }

    /// `φʸ` (or `νʸ`) at refined node `j`.
    pub fn y_at(&self, j: usize) -> &[T] {
        &self.y[j * self.n..(j + 1) * self.n]
    }

    /// `φᶻ` (or `νᶻ`) at refined node `j`.
    pub fn z_at(&self, j: usize) -> &[T] {
        &self.z[j * self.m..(j + 1) * self.m]
    }

    pub(crate) fn lerp_in(&self, j: usize, theta: T) -> (Vec<T>, Vec<T>) {
        let a = T::one() - theta;
        let mix = |lo: &[T], hi: &[T]| -> Vec<T> { lo.iter().zip(hi).map(|(&p, &q)| a * p + theta * q).collect() };
        (mix(self.y_at(j), self.y_at(j + 1)), mix(self.z_at(j), self.z_at(j + 1)))
    }

    /// Linear interpolation between refined nodes.
    pub fn interpolate(&self, t: T) -> Result<(Vec<T>, Vec<T>)> {
        let (j, theta) = self.grid.locate(t)?;
        Ok(self.lerp_in(j, theta))
    }
}

/// Numerical solution at refined node `j` of an `r`-refined grid.
pub(crate) fn forward_at_refined<T: Real>(traj: &Trajectory<T>, r: usize, j: usize) -> (Vec<T>, Vec<T>) {
    let last = traj.grid().intervals();
    if j == last * r {
        let (y, z) = traj.terminal();
        return (y.to_vec(), z.to_vec());
    }
    let k = j / r;
    let theta = T::from_count(j % r) / T::from_count(r);
    traj.lerp_in(k, theta)
}

fn adjoint_err<T: Real>(t: T) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::SingularMatrix { .. } => Error::AdjointStep {
            t: t.to_f64_lossy(),
            source: Box::new(e),
        },
        other => other,
    }
}

/// Solves the adjoint backward in time with implicit Euler on the forward
/// grid refined by `r`, linearizing about the interpolated numerical solution.
pub fn solve_adjoint_backward<T: Real>(
    problem: &dyn DaeProblem<T>,
    traj: &Trajectory<T>,
    qoi: &Qoi<T>,
    path: AdjointPath,
    r: usize,
) -> Result<AdjointSolution<T>> {
    let n = problem.n_differential();
    let m = problem.n_algebraic();
    if traj.n_differential() != n || traj.n_algebraic() != m {
        return Err(Error::DimensionMismatch(format!(
            "trajectory has (n, m) = ({}, {}), problem has ({n}, {m})",
            traj.n_differential(),
            traj.n_algebraic()
        )));
    }
    let grid = traj.grid().refine(r)?;
    let t_end = grid.t_end();
    qoi.validate(n, m, t_end)?;
    let h = grid.dt();
    let nodes = grid.intervals() + 1;
    let last = nodes - 1;

    let psi_at = |t: T| -> (Vec<T>, Vec<T>) {
        match qoi {
            Qoi::Cumulative { psi_y, psi_z } => (psi_y(t), psi_z(t)),
            Qoi::Terminal { .. } => (vec![T::zero(); n], vec![T::zero(); m]),
        }
    };

    let mut ys = vec![T::zero(); nodes * n];
    let mut zs = vec![T::zero(); nodes * m];

    let (yt, zt) = forward_at_refined(traj, r, last);
    let ops_t = LinearizedOps::at_state(problem, &yt, &zt, t_end, path).map_err(adjoint_err(t_end))?;
    let (phi_t, terminal) = terminal_condition(problem, qoi, &ops_t, traj, path, h).map_err(adjoint_err(t_end))?;

    match path {
        AdjointPath::Dae => {
            ys[last * n..].copy_from_slice(&phi_t);
            if problem.index() == DaeIndex::One {
                let (_, psi_z) = psi_at(t_end);
                let rhs: Vec<T> = ops_t
                    .fz
                    .tr_matvec(&phi_t)
                    .iter()
                    .zip(&psi_z)
                    .map(|(&a, &b)| -a - b)
                    .collect();
                let pz = LuFactors::new(&ops_t.gz.transpose())
                    .and_then(|lu| lu.solve(&rhs))
                    .map_err(adjoint_err(t_end))?;
                zs[last * m..].copy_from_slice(&pz);
            }
            let dim = n + m;
            for j in (1..nodes).rev() {
                let t = grid.node(j - 1);
                let (yf, zf) = forward_at_refined(traj, r, j - 1);
                let ops = LinearizedOps::at_state(problem, &yf, &zf, t, path)?;
                let mut a = DenseMatrix::zeros(dim, dim);
                let fyt = ops.fy.transpose();
                let gyt = ops.gy.transpose();
                for p in 0..n {
                    for q in 0..n {
                        a[(p, q)] = -h * fyt[(p, q)];
                    }
                    a[(p, p)] = a[(p, p)] + T::one();
                    for q in 0..m {
                        a[(p, n + q)] = -h * gyt[(p, q)];
                    }
                }
                a.set_block(n, 0, &ops.fz.transpose());
                a.set_block(n, n, &ops.gz.transpose());
                let (psi_y, psi_z) = psi_at(t);
                let mut rhs = Vec::with_capacity(dim);
                rhs.extend((0..n).map(|p| ys[j * n + p] + h * psi_y[p]));
                rhs.extend(psi_z.iter().map(|&v| -v));
                let sol = LuFactors::new(&a).and_then(|lu| lu.solve(&rhs)).map_err(adjoint_err(t))?;
                ys[(j - 1) * n..j * n].copy_from_slice(&sol[..n]);
                zs[(j - 1) * m..j * m].copy_from_slice(&sol[n..]);
            }
            if problem.index() == DaeIndex::Two && last > 0 {
                let (head, tail) = zs.split_at_mut(last * m);
                tail.copy_from_slice(&head[(last - 1) * m..]);
            }
        }
        AdjointPath::Ode => {
            ys[last * n..].copy_from_slice(&phi_t[..n]);
            zs[last * m..].copy_from_slice(&phi_t[n..]);
            let dim = n + m;
            for j in (1..nodes).rev() {
                let t = grid.node(j - 1);
                let (yf, zf) = forward_at_refined(traj, r, j - 1);
                let ops = LinearizedOps::at_state(problem, &yf, &zf, t, path).map_err(adjoint_err(t))?;
                let a = DenseMatrix::identity(dim).sub(&ops.ode_jacobian()?.transpose().scaled(h))?;
                let (psi_y, psi_z) = psi_at(t);
                let mut rhs = Vec::with_capacity(dim);
                rhs.extend((0..n).map(|p| ys[j * n + p] + h * psi_y[p]));
                rhs.extend((0..m).map(|p| zs[j * m + p] + h * psi_z[p]));
                let sol = LuFactors::new(&a).and_then(|lu| lu.solve(&rhs)).map_err(adjoint_err(t))?;
                ys[(j - 1) * n..j * n].copy_from_slice(&sol[..n]);
                zs[(j - 1) * m..j * m].copy_from_slice(&sol[n..]);
            }
        }
    }

    Ok(AdjointSolution {
        grid,
        refinement: r,
        path,
        terminal,
        n,
        m,
        y: ys,
        z: zs,
    })
}

/// Largest `|f_zᵀ φʸ + g_zᵀ φᶻ + ψᶻ|` over the refined nodes of a DAE-path adjoint.
pub fn algebraic_adjoint_residual<T: Real>(
    problem: &dyn DaeProblem<T>,
    traj: &Trajectory<T>,
    qoi: &Qoi<T>,
    adjoint: &AdjointSolution<T>,
) -> Result<T> {
    if adjoint.path != AdjointPath::Dae {
        return Err(Error::PathMismatch("algebraic adjoint equation exists only on the DAE path".into()));
    }
    let mut worst = T::zero();
    for j in 0..adjoint.nodes() {
        let t = adjoint.grid.node(j);
        let (y, z) = forward_at_refined(traj, adjoint.refinement, j);
        let psi_z = match qoi {
            Qoi::Cumulative { psi_z, .. } => psi_z(t),
            Qoi::Terminal { .. } => vec![T::zero(); adjoint.m],
        };
        let a = problem.f_z(&y, &z, t).tr_matvec(adjoint.y_at(j));
        let b = problem.g_z(&y, &z, t).tr_matvec(adjoint.z_at(j));
        for i in 0..adjoint.m {
            worst = worst.max((a[i] + b[i] + psi_z[i]).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dae::{CustomDae, InitialConditions};
    use crate::forward::{bdf1_solve, NewtonSettings};
    use crate::problems::{PendulumIndex1, PendulumIndex2, Petzold, Robertson};

    fn solve(p: &dyn DaeProblem<f64>, dt: f64, t_end: f64) -> Trajectory<f64> {
        let grid = TimeGrid::with_step(0.0, t_end, dt).unwrap();
        bdf1_solve(p, grid, NewtonSettings::default()).unwrap()
    }

    fn growth(a: f64) -> CustomDae<f64> {
        let ic = InitialConditions::<f64> { y0: vec![1.0], z0: vec![1.0], t0: 0.0 };
        CustomDae::new("growth", DaeIndex::One, ic, move |y, _z, _t| vec![a * y[0]], |y, z, _t| {
            vec![y[0] - z[0]]
        })
        .with_f_y(move |_, _, _| DenseMatrix::from_diagonal(&[a]))
        .with_f_z(|_, _, _| DenseMatrix::zeros(1, 1))
        .with_g_y(|_, _, _| DenseMatrix::from_diagonal(&[1.0]))
        .with_g_z(|_, _, _| DenseMatrix::from_diagonal(&[-1.0]))
    }

    #[test]
    fn robertson_constant_constraint_jacobians() {
        let traj = solve(&Robertson, 0.01, 0.1);
        for t in [0.0, 0.033, 0.1] {
            let ops = linearized_ops_at(&Robertson, &traj, t, AdjointPath::Dae).unwrap();
            assert_eq!(ops.gy.as_slice(), &[1.0, 1.0]);
            assert_eq!(ops.gz.as_slice(), &[1.0]);
        }
    }

    #[test]
    fn pendulum_two_constraint_gradient_at_start() {
        let p = PendulumIndex2::<f64>::default();
        let traj = solve(&p, 0.01, 0.1);
        let ops = linearized_ops_at(&p, &traj, 0.0, AdjointPath::Dae).unwrap();
        let ic = DaeProblem::<f64>::initial_conditions(&p);
        let y = &ic.y0;
        assert_eq!(ops.gy.as_slice(), &[y[2], y[3], y[0], y[1]]);
    }

    #[test]
    fn projector_properties() {
        let p = PendulumIndex2::<f64>::default();
        let traj = solve(&p, 0.01, 0.5);
        for t in [0.0, 0.21, 0.5] {
            let ops = linearized_ops_at(&p, &traj, t, AdjointPath::Dae).unwrap();
            let proj = ops.projector().unwrap();
            let sq = proj.matmul(&proj).unwrap();
            assert!(sq.sub(&proj).unwrap().norm_inf() <= 1e-10);
            assert!(ops.gy.matmul(&proj).unwrap().norm_inf() <= 1e-10);
        }
    }

    #[test]
    fn robertson_terminal_algebraic_weight() {
        let traj = solve(&Robertson, 0.01, 0.1);
        let ops = linearized_ops_at(&Robertson, &traj, 0.1, AdjointPath::Dae).unwrap();
        let qoi = Qoi::terminal(vec![0.0, 0.0], vec![1.0]);
        let (phi, kind) = terminal_condition(&Robertson, &qoi, &ops, &traj, AdjointPath::Dae, 0.01).unwrap();
        assert_eq!(phi, vec![-1.0, -1.0]);
        assert_eq!(kind, TerminalCondition::Index1Terminal { algebraic: true });
    }

    #[test]
    fn index_one_differential_terminal_is_zeta() {
        let traj = solve(&Robertson, 0.01, 0.1);
        let ops = linearized_ops_at(&Robertson, &traj, 0.1, AdjointPath::Dae).unwrap();
        let qoi = Qoi::terminal(vec![0.3, -2.0], vec![0.0]);
        let (phi, _) = terminal_condition(&Robertson, &qoi, &ops, &traj, AdjointPath::Dae, 0.01).unwrap();
        assert_eq!(phi, vec![0.3, -2.0]);
        let cum = Qoi::cumulative_constant(vec![1.0, 1.0], vec![5.0]);
        let (phi, _) = terminal_condition(&Robertson, &cum, &ops, &traj, AdjointPath::Dae, 0.01).unwrap();
        assert_eq!(phi, vec![0.0, 0.0]);
    }

    #[test]
    fn index_two_terminal_is_orthogonal_to_fz() {
        let p = PendulumIndex2::<f64>::default();
        let traj = solve(&p, 0.01, 0.3);
        let ops = linearized_ops_at(&p, &traj, 0.3, AdjointPath::Dae).unwrap();
        let qoi = Qoi::terminal(vec![1.0, 2.0, -1.0, 0.5], vec![0.0]);
        let (phi, kind) = terminal_condition(&p, &qoi, &ops, &traj, AdjointPath::Dae, 0.0025).unwrap();
        assert_eq!(kind, TerminalCondition::Index2Terminal { algebraic: false });
        assert!(ops.fz.tr_matvec(&phi)[0].abs() <= 1e-10);
        let qoi = Qoi::terminal(vec![1.0; 4], vec![1.0]);
        let (phi, _) = terminal_condition(&p, &qoi, &ops, &traj, AdjointPath::Dae, 0.0025).unwrap();
        assert!(ops.fz.tr_matvec(&phi)[0].abs() <= 1e-10);
    }

    #[test]
    fn constraint_rate_chain_rule_vs_difference() {
        let p = PendulumIndex2::<f64>::default();
        let traj = solve(&p, 0.001, 0.2);
        let chain = dgy_transpose_dt(&p, &traj, 1e-4).unwrap();
        let (ydot, _) = traj.piecewise_derivative(0.2).unwrap();
        let expect = [ydot[2], ydot[3], ydot[0], ydot[1]];
        for (i, e) in expect.iter().enumerate() {
            assert!((chain[(i, 0)] - e).abs() < 1e-10);
        }
        // Through the default oracles the difference quotient is used.
        let ic = DaeProblem::<f64>::initial_conditions(&p);
        let plain = CustomDae::new(
            "pendulum2-plain",
            DaeIndex::Two,
            ic,
            move |y, z, t| p.f(y, z, t),
            move |y, z, t| DaeProblem::<f64>::g(&PendulumIndex2::default(), y, z, t),
        );
        let fd = dgy_transpose_dt(&plain, &traj, 0.00025).unwrap();
        assert!(fd.sub(&chain).unwrap().norm_inf() < 1e-2 * chain.norm_inf());
    }

    #[test]
    fn petzold_constraint_rate() {
        let p = Petzold::<f64>::default();
        let traj = solve(&p, 0.01, 0.5);
        let d = dgy_transpose_dt(&p, &traj, 0.0025).unwrap();
        let (ydot, _) = traj.piecewise_derivative(0.5).unwrap();
        assert!((d[(0, 0)] + 2.0 * ydot[0]).abs() < 1e-12);
        assert_eq!(d[(1, 0)], 0.0);
    }

    #[test]
    fn scalar_backward_recursion() {
        let a = -0.8;
        let p = growth(a);
        let traj = solve(&p, 0.1, 1.0);
        let qoi = Qoi::terminal(vec![1.0], vec![0.0]);
        let adj = solve_adjoint_backward(&p, &traj, &qoi, AdjointPath::Dae, 2).unwrap();
        let h = 0.05;
        let mut expect = 1.0;
        for j in (0..adj.nodes()).rev() {
            assert!((adj.y_at(j)[0] - expect).abs() <= 1e-13 * expect.abs().max(1.0), "node {j}");
            assert!(adj.z_at(j)[0].abs() <= 1e-15);
            expect /= 1.0 - a * h;
        }
    }

    #[test]
    fn terminal_value_is_bit_exact() {
        let p = PendulumIndex1::<f64>::default();
        let traj = solve(&p, 0.01, 0.2);
        let qoi = Qoi::terminal(vec![1.0, 0.0, 1.0, 0.0], vec![0.0]);
        let adj = solve_adjoint_backward(&p, &traj, &qoi, AdjointPath::Dae, 4).unwrap();
        assert_eq!(adj.nodes(), 4 * 20 + 1);
        assert_eq!(adj.y_at(adj.nodes() - 1), &[1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn adjoint_is_linear() {
        let p = PendulumIndex1::<f64>::default();
        let traj = solve(&p, 0.01, 0.2);
        let a = Qoi::terminal(vec![1.0, -2.0, 0.5, 0.0], vec![0.3]);
        let b = Qoi::terminal(vec![0.0, 1.0, 1.0, -1.5], vec![-1.0]);
        let ab = Qoi::terminal(vec![2.0, -3.0, 2.0, -1.5], vec![-0.4]);
        for path in [AdjointPath::Dae, AdjointPath::Ode] {
            let sa = solve_adjoint_backward(&p, &traj, &a, path, 2).unwrap();
            let sb = solve_adjoint_backward(&p, &traj, &b, path, 2).unwrap();
            let sab = solve_adjoint_backward(&p, &traj, &ab, path, 2).unwrap();
            for j in 0..sa.nodes() {
                for i in 0..4 {
                    let lin = 2.0 * sa.y_at(j)[i] + sb.y_at(j)[i];
                    assert!((lin - sab.y_at(j)[i]).abs() <= 1e-10 * lin.abs().max(1.0));
                }
                let lin = 2.0 * sa.z_at(j)[0] + sb.z_at(j)[0];
                assert!((lin - sab.z_at(j)[0]).abs() <= 1e-10 * lin.abs().max(1.0));
            }
        }
    }

    #[test]
    fn robertson_algebraic_residual() {
        let traj = solve(&Robertson, 0.001, 0.1);
        let qoi = Qoi::cumulative_constant(vec![1.0, 1.0], vec![0.0]);
        let adj = solve_adjoint_backward(&Robertson, &traj, &qoi, AdjointPath::Dae, 4).unwrap();
        assert!(algebraic_adjoint_residual(&Robertson, &traj, &qoi, &adj).unwrap() <= 1e-12);
    }

    #[test]
    fn index_two_algebraic_residual() {
        let p = Petzold::<f64>::default();
        let traj = solve(&p, 0.01, 1.0);
        let qoi = Qoi::cumulative_constant(vec![0.0, 0.0], vec![1.0]);
        let adj = solve_adjoint_backward(&p, &traj, &qoi, AdjointPath::Dae, 4).unwrap();
        assert_eq!(adj.terminal_condition(), TerminalCondition::Index2Cumulative);
        assert!(algebraic_adjoint_residual(&p, &traj, &qoi, &adj).unwrap() <= 1e-12);
    }

    #[test]
    fn ode_path_terminal() {
        let traj = solve(&Robertson, 0.01, 0.1);
        let qoi = Qoi::terminal(vec![0.0, 1.0], vec![2.0]);
        let adj = solve_adjoint_backward(&Robertson, &traj, &qoi, AdjointPath::Ode, 4).unwrap();
        let last = adj.nodes() - 1;
        assert_eq!(adj.y_at(last), &[0.0, 1.0]);
        assert_eq!(adj.z_at(last), &[2.0]);
        assert_eq!(adj.terminal_condition(), TerminalCondition::OdeTerminal);
    }

    #[test]
    fn mismatched_qoi_rejected() {
        let traj = solve(&Robertson, 0.01, 0.1);
        let qoi = Qoi::terminal(vec![1.0], vec![0.0]);
        assert!(matches!(
            solve_adjoint_backward(&Robertson, &traj, &qoi, AdjointPath::Dae, 4),
            Err(Error::InvalidQoi(_))
        ));
    }
}
