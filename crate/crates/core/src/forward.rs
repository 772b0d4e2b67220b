//! Implicit Euler (BDF-1) time stepping with a damped Newton solve per step.

use crate::dae::{DaeProblem, TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, LuFactors};
use crate::scalar::{norm_inf, Real};

/// Controls for the per-step Newton iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonSettings<T> {
    /// Residual infinity-norm threshold.
    pub tol: T,
    pub max_iters: usize,
    /// Maximum number of step halvings in the backtracking line search.
    pub max_halvings: usize,
    /// Keep the last LU factorization across iterations and steps and only
    /// refactor when the contraction degrades.
    pub reuse_jacobian: bool,
}

impl<T: Real> Default for NewtonSettings<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-12),
            max_iters: 50,
            max_halvings: 20,
            reuse_jacobian: false,
        }
    }
}

impl<T: Real> NewtonSettings<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero()) || !self.tol.is_finite() {
            return Err(Error::InvalidParams(format!("Newton tolerance {} must be positive", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParams("Newton needs at least one iteration".into()));
        }
        Ok(())
    }
}

/// Work counters accumulated by a [`Bdf1Stepper`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub steps: usize,
    pub newton_iterations: usize,
    pub factorizations: usize,
}

/// Streaming implicit Euler integrator holding only the current state.
pub struct Bdf1Stepper<'a, T: Real> {
    problem: &'a dyn DaeProblem<T>,
    settings: NewtonSettings<T>,
    grid: TimeGrid<T>,
    k: usize,
    y: Vec<T>,
    z: Vec<T>,
    lu: Option<LuFactors<T>>,
    stats: SolverStats,
}

impl<'a, T: Real> Bdf1Stepper<'a, T> {
    /// Starts at the problem's initial conditions.
    pub fn new(problem: &'a dyn DaeProblem<T>, grid: TimeGrid<T>, settings: NewtonSettings<T>) -> Result<Self> {
        let ic = problem.initial_conditions();
        Self::from_state(problem, grid, settings, ic.y0, ic.z0)
    }

    /// Starts from an explicit state at `grid.t0()`.
    pub fn from_state(
        problem: &'a dyn DaeProblem<T>,
        grid: TimeGrid<T>,
        settings: NewtonSettings<T>,
        y0: Vec<T>,
        z0: Vec<T>,
    ) -> Result<Self> {
        settings.validate()?;
        if y0.len() != problem.n_differential() || z0.len() != problem.n_algebraic() {
            return Err(Error::DimensionMismatch(format!(
                "initial state ({}, {}) for a problem with (n, m) = ({}, {})",
                y0.len(),
                z0.len(),
                problem.n_differential(),
                problem.n_algebraic()
            )));
        }
        Ok(Self {
            problem,
            settings,
            grid,
            k: 0,
            y: y0,
            z: z0,
            lu: None,
            stats: SolverStats::default(),
        })
    }

    #[inline]
    pub fn step_index(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn time(&self) -> T {
        self.grid.node(self.k)
    }

    #[inline]
    pub fn y(&self) -> &[T] {
        &self.y
    }

    #[inline]
    pub fn z(&self) -> &[T] {
        &self.z
    }

    #[inline]
    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    pub fn is_finished(&self) -> bool {
        self.k >= self.grid.intervals()
    }

    fn residual(&self, x: &[T], t: T, dt: T) -> Vec<T> {
        let n = self.y.len();
        let (y, z) = x.split_at(n);
        let f = self.problem.f(y, z, t);
        let g = self.problem.g(y, z, t);
        let mut r = Vec::with_capacity(x.len());
        for i in 0..n {
            r.push(y[i] - self.y[i] - dt * f[i]);
        }
        r.extend(g);
        r
    }

    fn factor(&mut self, x: &[T], t: T, dt: T) -> Result<LuFactors<T>> {
        let n = self.y.len();
        let m = self.z.len();
        let (y, z) = x.split_at(n);
        let p = self.problem;
        let mut jac = DenseMatrix::zeros(n + m, n + m);
        let mut a = p.f_y(y, z, t).scaled(-dt);
        for i in 0..n {
            a[(i, i)] = a[(i, i)] + T::one();
        }
        jac.set_block(0, 0, &a);
        if m > 0 {
            jac.set_block(0, n, &p.f_z(y, z, t).scaled(-dt));
            jac.set_block(n, 0, &p.g_y(y, z, t));
            jac.set_block(n, n, &p.g_z(y, z, t));
        }
        self.stats.factorizations += 1;
        LuFactors::new(&jac)
    }

    /// Advances one step; returns the new node index.
    pub fn step(&mut self) -> Result<usize> {
        if self.is_finished() {
            return Err(Error::InvalidGrid("stepper already reached the final time".into()));
        }
        let t = self.grid.node(self.k + 1);
        let dt = t - self.grid.node(self.k);
        let n = self.y.len();
        let tol = self.settings.tol;
        let eps = T::epsilon();
        let mut x: Vec<T> = self.y.iter().chain(self.z.iter()).copied().collect();
        let mut r = self.residual(&x, t, dt);
        let mut rn = norm_inf(&r);
        let mut converged = rn <= tol;
        let mut iters = 0;
        while !converged && iters < self.settings.max_iters {
            iters += 1;
            let stale = self.settings.reuse_jacobian && self.lu.is_some();
            if !stale {
                self.lu = Some(self.factor(&x, t, dt)?);
            }
            let neg: Vec<T> = r.iter().map(|&v| -v).collect();
            let dx = self.lu.as_ref().expect("factorization").solve(&neg)?;
            if stale {
                let trial: Vec<T> = x.iter().zip(&dx).map(|(&a, &b)| a + b).collect();
                let rt = self.residual(&trial, t, dt);
                let rtn = norm_inf(&rt);
                if rtn <= tol || rtn <= T::lit(0.5) * rn {
                    x = trial;
                    r = rt;
                    rn = rtn;
                    converged = rn <= tol;
                } else {
                    self.lu = None;
                }
                continue;
            }
            let mut lambda = T::one();
            let mut best: Option<(Vec<T>, Vec<T>, T)> = None;
            for _ in 0..=self.settings.max_halvings {
                let trial: Vec<T> = x.iter().zip(&dx).map(|(&a, &b)| a + lambda * b).collect();
                let rt = self.residual(&trial, t, dt);
                let rtn = norm_inf(&rt);
                if rtn.is_finite() && best.as_ref().map_or(true, |b| rtn < b.2) {
                    best = Some((trial, rt, rtn));
                }
                if rtn.is_finite() && rtn < rn {
                    break;
                }
                lambda = lambda * T::lit(0.5);
            }
            let step_small = norm_inf(&dx) <= T::lit(16.0) * eps * (T::one() + norm_inf(&x));
            match best {
                Some((trial, rt, rtn)) if rtn < rn => {
                    x = trial;
                    r = rt;
                    rn = rtn;
                    converged = rn <= tol;
                }
                _ => {
                    // Stagnation at round-off level counts as convergence.
                    if step_small && rn <= T::lit(100.0) * tol {
                        converged = true;
                    } else {
                        break;
                    }
                }
            }
            if !converged && step_small && rn <= T::lit(100.0) * tol {
                converged = true;
            }
        }
        self.stats.newton_iterations += iters;
        if !converged {
            return Err(Error::NewtonDiverged {
                step: self.k + 1,
                t: t.to_f64_lossy(),
                residual: rn.to_f64_lossy(),
            });
        }
        self.z = x.split_off(n);
        self.y = x;
        self.k += 1;
        self.stats.steps += 1;
        Ok(self.k)
    }
}

/// Runs implicit Euler over `grid`, calling `visit(k, t_k, Y_k, Z_k)` for every
/// node including the initial one, without storing the trajectory.
pub fn bdf1_for_each<T, F>(
    problem: &dyn DaeProblem<T>,
    grid: TimeGrid<T>,
    settings: NewtonSettings<T>,
    mut visit: F,
) -> Result<SolverStats>
where
    T: Real,
    F: FnMut(usize, T, &[T], &[T]),
{
    let mut stepper = Bdf1Stepper::new(problem, grid, settings)?;
    visit(0, stepper.time(), stepper.y(), stepper.z());
    while !stepper.is_finished() {
        let k = stepper.step()?;
        visit(k, stepper.time(), stepper.y(), stepper.z());
    }
    Ok(stepper.stats())
}

/// Solves the DAE with implicit Euler on `grid` and returns all nodal values.
pub fn bdf1_solve<T: Real>(
    problem: &dyn DaeProblem<T>,
    grid: TimeGrid<T>,
    settings: NewtonSettings<T>,
) -> Result<Trajectory<T>> {
    let nodes = grid.intervals() + 1;
    let (n, m) = (problem.n_differential(), problem.n_algebraic());
    let mut ys = Vec::with_capacity(nodes * n);
    let mut zs = Vec::with_capacity(nodes * m);
    bdf1_for_each(problem, grid, settings, |_, _, y, z| {
        ys.extend_from_slice(y);
        zs.extend_from_slice(z);
    })?;
    Trajectory::from_flat(grid, n, m, ys, zs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dae::{CustomDae, DaeIndex, InitialConditions};

    fn decay() -> CustomDae<f64> {
        let ic = InitialConditions { y0: vec![1.0], z0: vec![1.0], t0: 0.0 };
        CustomDae::new("decay", DaeIndex::One, ic, |y, _z, _t| vec![-y[0]], |y, z, _t| vec![y[0] - z[0]])
    }

    #[test]
    fn scalar_linear_one_step() {
        let p = decay();
        let grid = TimeGrid::new(0.0, 0.1, 1).unwrap();
        let traj = bdf1_solve(&p, grid, NewtonSettings::default()).unwrap();
        let (y, z) = traj.terminal();
        assert!((y[0] - 1.0 / 1.1).abs() < 1e-13);
        assert!((z[0] - 1.0 / 1.1).abs() < 1e-13);
    }

    #[test]
    fn matches_closed_form_recursion() {
        let p = decay();
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let traj = bdf1_solve(&p, grid, NewtonSettings::default()).unwrap();
        for k in 0..=10 {
            let exact = 1.1f64.powi(-(k as i32));
            assert!((traj.y_at(k)[0] - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn reuse_agrees_with_fresh_jacobians() {
        let ic = InitialConditions::<f64> { y0: vec![1.0], z0: vec![1.0], t0: 0.0 };
        let p = CustomDae::new(
            "nl",
            DaeIndex::One,
            ic,
            |y, z, _t| vec![-y[0] * z[0]],
            |y, z, _t| vec![z[0] - y[0] * y[0]],
        );
        let grid = TimeGrid::new(0.0, 1.0, 50).unwrap();
        let a = bdf1_solve(&p, grid, NewtonSettings::default()).unwrap();
        let settings = NewtonSettings { reuse_jacobian: true, ..Default::default() };
        let b = bdf1_solve(&p, grid, settings).unwrap();
        for k in 0..=50 {
            assert!((a.y_at(k)[0] - b.y_at(k)[0]).abs() < 1e-11);
        }
    }

    #[test]
    fn deterministic() {
        let p = decay();
        let grid = TimeGrid::new(0.0, 2.0, 37).unwrap();
        let a = bdf1_solve(&p, grid, NewtonSettings::default()).unwrap();
        let b = bdf1_solve(&p, grid, NewtonSettings::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn singular_constraint_reported() {
        let ic = InitialConditions { y0: vec![1.0], z0: vec![0.0], t0: 0.0 };
        // g does not depend on z while tagged index-1
        let p = CustomDae::new("bad", DaeIndex::One, ic, |y, z, _t| vec![-y[0] + 0.0 * z[0]], |y, _z, _t| vec![y[0] - 1.0]);
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let err = bdf1_solve(&p, grid, NewtonSettings::default()).unwrap_err();
        assert!(matches!(err, Error::SingularMatrix { .. }), "{err}");
    }

    #[test]
    fn divergence_reported() {
        let ic = InitialConditions { y0: vec![1.0], z0: vec![1.0], t0: 0.0 };
        // z^2 + 1 = 0 has no real root
        let p = CustomDae::new("nr", DaeIndex::One, ic, |_y, _z, _t| vec![0.0], |_y, z, _t| vec![z[0] * z[0] + 1.0]);
        let grid = TimeGrid::new(0.0, 1.0, 1).unwrap();
        let settings = NewtonSettings { max_iters: 5, ..Default::default() };
        let err = bdf1_solve(&p, grid, settings).unwrap_err();
        assert!(matches!(err, Error::NewtonDiverged { step: 1, .. } | Error::SingularMatrix { .. }), "{err}");
    }

    #[test]
    fn invalid_settings() {
        let s = NewtonSettings::<f64> { tol: 0.0, ..Default::default() };
        assert!(s.validate().is_err());
        let s = NewtonSettings::<f64> { max_iters: 0, ..Default::default() };
        assert!(s.validate().is_err());
    }

    #[test]
    fn f32_solve() {
        let ic = InitialConditions { y0: vec![1.0f32], z0: vec![1.0f32], t0: 0.0 };
        let p = CustomDae::new("decay32", DaeIndex::One, ic, |y: &[f32], _z: &[f32], _t| vec![-y[0]], |y: &[f32], z: &[f32], _t| vec![y[0] - z[0]]);
        let grid = TimeGrid::new(0.0f32, 0.1, 1).unwrap();
        let settings = NewtonSettings { tol: 1e-6f32, ..Default::default() };
        let traj = bdf1_solve(&p, grid, settings).unwrap();
        assert!((traj.terminal().0[0] - 1.0 / 1.1).abs() < 1e-5);
    }
}
