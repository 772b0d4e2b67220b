//! Problem and solution data model: semi-explicit DAEs, uniform time grids,
//! piecewise-linear trajectories and quantities of interest.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{
    fd_derivative, fd_jacobian, fd_mixed_second, fd_second_derivative, DenseMatrix, LuFactors,
    Tensor3,
};
use crate::scalar::{norm_inf, Real};

/// Differential index of a semi-explicit DAE.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DaeIndex {
    /// `ẏ = f(y, z, t)`, `0 = g(y, z, t)` with `g_z` nonsingular.
    One,
    /// Hessenberg form: `0 = g(y, t)` with `g_y f_z` nonsingular.
    Two,
}

impl fmt::Display for DaeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DaeIndex::One => write!(f, "index-1"),
            DaeIndex::Two => write!(f, "Hessenberg index-2"),
        }
    }
}

/// Consistent initial values `(y0, z0)` at `t0`.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialConditions<T> {
    pub y0: Vec<T>,
    pub z0: Vec<T>,
    pub t0: T,
}

/// A semi-explicit DAE `ẏ = f(y, z, t)`, `0 = g(y, z, t)`.
///
/// Only `f`, `g` and the initial conditions are required. Every derivative
/// oracle falls back to finite differences; built-in problems override all of
/// them analytically. For [`DaeIndex::Two`] problems `g` must ignore `z`.
pub trait DaeProblem<T: Real>: Send + Sync {
    fn name(&self) -> &str;

    /// Number of differential variables `n`.
    fn n_differential(&self) -> usize;

    /// Number of algebraic variables `m`.
    fn n_algebraic(&self) -> usize;

    fn index(&self) -> DaeIndex;

    fn f(&self, y: &[T], z: &[T], t: T) -> Vec<T>;

    fn g(&self, y: &[T], z: &[T], t: T) -> Vec<T>;

    fn initial_conditions(&self) -> InitialConditions<T>;

    /// Exact solution `(y(t), z(t))` when known.
    fn analytic_solution(&self, _t: T) -> Option<(Vec<T>, Vec<T>)> {
        None
    }

    fn f_y(&self, y: &[T], z: &[T], t: T) -> DenseMatrix<T> {
        fd_jacobian(|v| self.f(v, z, t), y, None).expect("finite-difference f_y")
    }

    fn f_z(&self, y: &[T], z: &[T], t: T) -> DenseMatrix<T> {
        fd_jacobian(|v| self.f(y, v, t), z, None).expect("finite-difference f_z")
    }

    fn f_t(&self, y: &[T], z: &[T], t: T) -> Vec<T> {
        fd_derivative(|s| self.f(y, z, s), t).expect("finite-difference f_t")
    }

    fn g_y(&self, y: &[T], z: &[T], t: T) -> DenseMatrix<T> {
        fd_jacobian(|v| self.g(v, z, t), y, None).expect("finite-difference g_y")
    }

    fn g_z(&self, y: &[T], z: &[T], t: T) -> DenseMatrix<T> {
        match self.index() {
            DaeIndex::Two => DenseMatrix::zeros(self.n_algebraic(), self.n_algebraic()),
            DaeIndex::One => {
                fd_jacobian(|v| self.g(y, v, t), z, None).expect("finite-difference g_z")
            }
        }
    }

    fn g_t(&self, y: &[T], z: &[T], t: T) -> Vec<T> {
        fd_derivative(|s| self.g(y, z, s), t).expect("finite-difference g_t")
    }

    /// Hessians of each constraint with respect to `y`, shape `(m, n, n)`.
    fn g_yy(&self, y: &[T], z: &[T], t: T) -> Tensor3<T> {
        let (n, m) = (self.n_differential(), self.n_algebraic());
        let mut out = Tensor3::zeros(m, n);
        let mut g = |v: &[T]| self.g(v, z, t);
        for j in 0..n {
            for k in 0..=j {
                let d = fd_mixed_second(&mut g, y, j, k).expect("finite-difference g_yy");
                for (i, &v) in d.iter().enumerate() {
                    out.set(i, j, k, v);
                    out.set(i, k, j, v);
                }
            }
        }
        out
    }

    /// `∂(g_y)/∂t`, an `m x n` matrix.
    fn g_yt(&self, y: &[T], z: &[T], t: T) -> DenseMatrix<T> {
        let (n, m) = (self.n_differential(), self.n_algebraic());
        let mut at = y.to_vec();
        at.push(t);
        let mut g = |v: &[T]| self.g(&v[..n], z, v[n]);
        let mut out = DenseMatrix::zeros(m, n);
        for j in 0..n {
            let d = fd_mixed_second(&mut g, &at, j, n).expect("finite-difference g_yt");
            out.set_column(j, &d);
        }
        out
    }

    fn g_tt(&self, y: &[T], z: &[T], t: T) -> Vec<T> {
        fd_second_derivative(|s| self.g(y, z, s), t).expect("finite-difference g_tt")
    }

    /// Whether `g_yy` and `g_yt` are exact rather than finite differences.
    fn has_analytic_constraint_curvature(&self) -> bool {
        false
    }
}

/// Residual norms of the initial conditions against the explicit and (index-2)
/// hidden constraints.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyReport<T> {
    pub constraint_residual: T,
    pub hidden_residual: Option<T>,
    pub passed: bool,
}

/// Threshold applied by [`check_consistency`].
pub const CONSISTENCY_TOL: f64 = 1e-10;

/// Evaluates `‖g(y0, z0, t0)‖∞` and, for index-2, `‖g_y f + g_t‖∞` at `t0`.
pub fn check_consistency<T: Real>(problem: &dyn DaeProblem<T>) -> ConsistencyReport<T> {
    let ic = problem.initial_conditions();
    let tol = T::lit(CONSISTENCY_TOL);
    let constraint_residual = norm_inf(&problem.g(&ic.y0, &ic.z0, ic.t0));
    let hidden_residual = match problem.index() {
        DaeIndex::One => None,
        DaeIndex::Two => Some(hidden_constraint_residual(problem, &ic.y0, &ic.z0, ic.t0)),
    };
    let passed = constraint_residual <= tol && hidden_residual.map_or(true, |h| h <= tol);
    ConsistencyReport {
        constraint_residual,
        hidden_residual,
        passed,
    }
}

/// `‖g_y f + g_t‖∞` at `(y, z, t)`.
pub fn hidden_constraint_residual<T: Real>(
    problem: &dyn DaeProblem<T>,
    y: &[T],
    z: &[T],
    t: T,
) -> T {
    let gy = problem.g_y(y, z, t);
    let f = problem.f(y, z, t);
    let gt = problem.g_t(y, z, t);
    let r: Vec<T> = gy.matvec(&f).iter().zip(&gt).map(|(&a, &b)| a + b).collect();
    norm_inf(&r)
}

/// Verifies the structural index condition at the initial point: `g_z`
/// nonsingular for index-1, `g_y f_z` nonsingular for index-2.
pub fn check_index_condition<T: Real>(problem: &dyn DaeProblem<T>) -> Result<()> {
    let ic = problem.initial_conditions();
    let (y, z, t) = (&ic.y0, &ic.z0, ic.t0);
    let m = match problem.index() {
        DaeIndex::One => problem.g_z(y, z, t),
        DaeIndex::Two => problem.g_y(y, z, t).matmul(&problem.f_z(y, z, t))?,
    };
    LuFactors::new(&m).map(|_| ())
}

/// Uniform grid `t_k = t0 + k dt`, `k = 0..=intervals`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid<T> {
    t0: T,
    t_end: T,
    intervals: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(t0: T, t_end: T, intervals: usize) -> Result<Self> {
        if !(t_end > t0) || !t0.is_finite() || !t_end.is_finite() {
            return Err(Error::InvalidGrid(format!("empty time span [{t0}, {t_end}]")));
        }
        if intervals == 0 {
            return Err(Error::InvalidGrid("grid needs at least one interval".into()));
        }
        Ok(Self {
            t0,
            t_end,
            intervals,
        })
    }

    /// Grid with step `dt`; `(t_end - t0) / dt` must be an integer to 1e-12 relative.
    pub fn with_step(t0: T, t_end: T, dt: T) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(Error::InvalidGrid(format!("non-positive step {dt}")));
        }
        let ratio = (t_end - t0) / dt;
        let n = ratio.round();
        if n < T::one() || (ratio - n).abs() > T::lit(1e-12) * n {
            return Err(Error::InvalidGrid(format!(
                "step {dt} does not divide [{t0}, {t_end}]"
            )));
        }
        Self::new(t0, t_end, n.to_usize().expect("interval count"))
    }

    #[inline]
    pub fn t0(&self) -> T {
        self.t0
    }

    #[inline]
    pub fn t_end(&self) -> T {
        self.t_end
    }

    #[inline]
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    #[inline]
    pub fn dt(&self) -> T {
        (self.t_end - self.t0) / T::from_count(self.intervals)
    }

    /// Time of node `k`; the last node is `t_end` exactly.
    #[inline]
    pub fn node(&self, k: usize) -> T {
        if k == self.intervals {
            self.t_end
        } else {
            self.t0 + self.dt() * T::from_count(k)
        }
    }

    /// The same span with every interval split into `factor` pieces.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidGrid("refinement factor 0".into()));
        }
        Self::new(self.t0, self.t_end, self.intervals * factor)
    }

    fn check_domain(&self, t: T) -> Result<T> {
        let slack = T::lit(1e-12) * self.t_end.abs().max(T::one());
        if !(t >= self.t0 - slack && t <= self.t_end + slack) {
            return Err(Error::OutOfDomain {
                t: t.to_f64_lossy(),
                t0: self.t0.to_f64_lossy(),
                t_end: self.t_end.to_f64_lossy(),
            });
        }
        Ok(t.max(self.t0).min(self.t_end))
    }

    /// Locates `t` as interval `k` and fraction `θ ∈ [0, 1]` with
    /// `t = t_k + θ dt`. Exact node times give `θ = 0` (or `k = N - 1`,
    /// `θ = 1` at `t_end`).
    pub fn locate(&self, t: T) -> Result<(usize, T)> {
        let t = self.check_domain(t)?;
        let dt = self.dt();
        let n = self.intervals;
        let guess = ((t - self.t0) / dt).floor().to_usize().unwrap_or(0).min(n);
        for k in [guess, guess.saturating_sub(1), (guess + 1).min(n)] {
            if self.node(k) == t {
                return Ok(if k == n { (n - 1, T::one()) } else { (k, T::zero()) });
            }
        }
        let k = guess.min(n - 1);
        let theta = ((t - self.node(k)) / dt).max(T::zero()).min(T::one());
        Ok((k, theta))
    }

    /// Interval whose slope applies at `t`: the left interval at interior
    /// nodes, the first interval at `t0`.
    pub fn slope_interval(&self, t: T) -> Result<usize> {
        let (k, theta) = self.locate(t)?;
        Ok(if theta == T::zero() && k > 0 { k - 1 } else { k })
    }
}

/// Nodal numerical solution on a uniform grid, continuous piecewise linear in time.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    grid: TimeGrid<T>,
    n: usize,
    m: usize,
    y: Vec<T>,
    z: Vec<T>,
}

impl<T: Real> Trajectory<T> {
    /// Builds a trajectory from flat node-major storage.
    pub fn from_flat(grid: TimeGrid<T>, n: usize, m: usize, y: Vec<T>, z: Vec<T>) -> Result<Self> {
        let nodes = grid.intervals() + 1;
        if y.len() != nodes * n || z.len() != nodes * m {
            return Err(Error::DimensionMismatch(format!(
                "{} nodes need {} y and {} z entries, got {} and {}",
                nodes,
                nodes * n,
                nodes * m,
                y.len(),
                z.len()
            )));
        }
        Ok(Self { grid, n, m, y, z })
    }

    pub fn from_nodes(grid: TimeGrid<T>, ys: &[Vec<T>], zs: &[Vec<T>]) -> Result<Self> {
        let n = ys.first().map_or(0, Vec::len);
        let m = zs.first().map_or(0, Vec::len);
        if ys.iter().any(|v| v.len() != n) || zs.iter().any(|v| v.len() != m) {
            return Err(Error::DimensionMismatch("ragged nodal values".into()));
        }
        Self::from_flat(
            grid,
            n,
            m,
            ys.iter().flatten().copied().collect(),
            zs.iter().flatten().copied().collect(),
        )
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    #[inline]
    pub fn n_differential(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn n_algebraic(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn y_at(&self, k: usize) -> &[T] {
        &self.y[k * self.n..(k + 1) * self.n]
    }

    #[inline]
    pub fn z_at(&self, k: usize) -> &[T] {
        &self.z[k * self.m..(k + 1) * self.m]
    }

    /// Values on interval `k` at fraction `theta`.
    pub(crate) fn lerp_in(&self, k: usize, theta: T) -> (Vec<T>, Vec<T>) {
        if theta == T::zero() {
            return (self.y_at(k).to_vec(), self.z_at(k).to_vec());
        }
        if theta == T::one() {
            return (self.y_at(k + 1).to_vec(), self.z_at(k + 1).to_vec());
        }
        let a = T::one() - theta;
        let mix = |lo: &[T], hi: &[T]| -> Vec<T> {
            lo.iter().zip(hi).map(|(&p, &q)| a * p + theta * q).collect()
        };
        (
            mix(self.y_at(k), self.y_at(k + 1)),
            mix(self.z_at(k), self.z_at(k + 1)),
        )
    }

    /// Slope of interval `k`.
    pub(crate) fn slope_of(&self, k: usize) -> (Vec<T>, Vec<T>) {
        let inv = T::one() / self.grid.dt();
        let diff = |lo: &[T], hi: &[T]| -> Vec<T> {
            lo.iter().zip(hi).map(|(&p, &q)| (q - p) * inv).collect()
        };
        (
            diff(self.y_at(k), self.y_at(k + 1)),
            diff(self.z_at(k), self.z_at(k + 1)),
        )
    }

    /// Linear interpolation between the two nodes bracketing `t`.
    pub fn interpolate(&self, t: T) -> Result<(Vec<T>, Vec<T>)> {
        let (k, theta) = self.grid.locate(t)?;
        Ok(self.lerp_in(k, theta))
    }

    /// Slope of the piecewise-linear solution at `t` (left slope at nodes).
    pub fn piecewise_derivative(&self, t: T) -> Result<(Vec<T>, Vec<T>)> {
        Ok(self.slope_of(self.grid.slope_interval(t)?))
    }

    /// Final nodal values.
    pub fn terminal(&self) -> (&[T], &[T]) {
        let k = self.grid.intervals();
        (self.y_at(k), self.z_at(k))
    }
}

/// A time-dependent weight `ψ(t)`.
pub type Density<T> = Arc<dyn Fn(T) -> Vec<T> + Send + Sync>;

/// A linear functional of the solution whose error is to be estimated.
#[derive(Clone)]
pub enum Qoi<T> {
    /// `∫ (y, ψʸ) + (z, ψᶻ) dt` over the whole grid span.
    Cumulative { psi_y: Density<T>, psi_z: Density<T> },
    /// `(y(T), ζʸ) + (z(T), ζᶻ)`.
    Terminal { zeta_y: Vec<T>, zeta_z: Vec<T> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QoiKind {
    Cumulative,
    Terminal,
}

impl<T: Real> Qoi<T> {
    pub fn cumulative(psi_y: Density<T>, psi_z: Density<T>) -> Self {
        Qoi::Cumulative { psi_y, psi_z }
    }

    /// Cumulative QoI with constant densities.
    pub fn cumulative_constant(psi_y: Vec<T>, psi_z: Vec<T>) -> Self {
        Qoi::Cumulative {
            psi_y: Arc::new(move |_| psi_y.clone()),
            psi_z: Arc::new(move |_| psi_z.clone()),
        }
    }

    pub fn terminal(zeta_y: Vec<T>, zeta_z: Vec<T>) -> Self {
        Qoi::Terminal { zeta_y, zeta_z }
    }

    pub fn kind(&self) -> QoiKind {
        match self {
            Qoi::Cumulative { .. } => QoiKind::Cumulative,
            Qoi::Terminal { .. } => QoiKind::Terminal,
        }
    }

    /// Checks weight dimensions against a problem with `n` differential and
    /// `m` algebraic variables, sampling densities at `t`.
    pub fn validate(&self, n: usize, m: usize, t: T) -> Result<()> {
        let (wy, wz) = match self {
            Qoi::Cumulative { psi_y, psi_z } => (psi_y(t), psi_z(t)),
            Qoi::Terminal { zeta_y, zeta_z } => (zeta_y.clone(), zeta_z.clone()),
        };
        if wy.len() != n || wz.len() != m {
            return Err(Error::InvalidQoi(format!(
                "weights of length ({}, {}) for a problem with (n, m) = ({n}, {m})",
                wy.len(),
                wz.len()
            )));
        }
        if !crate::scalar::all_finite(&wy) || !crate::scalar::all_finite(&wz) {
            return Err(Error::InvalidQoi("non-finite weights".into()));
        }
        Ok(())
    }
}

impl<T: Real> fmt::Debug for Qoi<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Qoi::Cumulative { .. } => f.write_str("Qoi::Cumulative"),
            Qoi::Terminal { zeta_y, zeta_z } => f
                .debug_struct("Qoi::Terminal")
                .field("zeta_y", zeta_y)
                .field("zeta_z", zeta_z)
                .finish(),
        }
    }
}

type VecFn<T> = Box<dyn Fn(&[T], &[T], T) -> Vec<T> + Send + Sync>;
type MatFn<T> = Box<dyn Fn(&[T], &[T], T) -> DenseMatrix<T> + Send + Sync>;
type SolutionFn<T> = Box<dyn Fn(T) -> (Vec<T>, Vec<T>) + Send + Sync>;

/// A DAE assembled from closures. Jacobians that are not supplied are
/// computed by finite differences.
pub struct CustomDae<T> {
    name: String,
    index: DaeIndex,
    ic: InitialConditions<T>,
    f: VecFn<T>,
    g: VecFn<T>,
    f_y: Option<MatFn<T>>,
    f_z: Option<MatFn<T>>,
    g_y: Option<MatFn<T>>,
    g_z: Option<MatFn<T>>,
    solution: Option<SolutionFn<T>>,
}

impl<T: Real> CustomDae<T> {
    pub fn new(
        name: impl Into<String>,
        index: DaeIndex,
        ic: InitialConditions<T>,
        f: impl Fn(&[T], &[T], T) -> Vec<T> + Send + Sync + 'static,
        g: impl Fn(&[T], &[T], T) -> Vec<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            index,
            ic,
            f: Box::new(f),
            g: Box::new(g),
            f_y: None,
            f_z: None,
            g_y: None,
            g_z: None,
            solution: None,
        }
    }

    pub fn with_f_y(mut self, j: impl Fn(&[T], &[T], T) -> DenseMatrix<T> + Send + Sync + 'static) -> Self {
        self.f_y = Some(Box::new(j));
        self
    }

    pub fn with_f_z(mut self, j: impl Fn(&[T], &[T], T) -> DenseMatrix<T> + Send + Sync + 'static) -> Self {
        self.f_z = Some(Box::new(j));
        self
    }

    pub fn with_g_y(mut self, j: impl Fn(&[T], &[T], T) -> DenseMatrix<T> + Send + Sync + 'static) -> Self {
        self.g_y = Some(Box::new(j));
        self
    }

    pub fn with_g_z(mut self, j: impl Fn(&[T], &[T], T) -> DenseMatrix<T> + Send + Sync + 'static) -> Self {
        self.g_z = Some(Box::new(j));
        self
    }

    pub fn with_solution(mut self, s: impl Fn(T) -> (Vec<T>, Vec<T>) + Send + Sync + 'static) -> Self {
        self.solution = Some(Box::new(s));
        self
    }
}

impl<T: Real> DaeProblem<T> for CustomDae<T> {
    fn name(&self) -> &str {
        &self.name
    }

    fn n_differential(&self) -> usize {
        self.ic.y0.len()
    }

    fn n_algebraic(&self) -> usize {
        self.ic.z0.len()
    }

    fn index(&self) -> DaeIndex {
        self.index
    }

    fn f(&self, y: &[T], z: &[T], t: T) -> Vec<T> {
        (self.f)(y, z, t)
    }

    fn g(&self, y: &[T], z: &[T], t: T) -> Vec<T> {
        (self.g)(y, z, t)
    }

    fn initial_conditions(&self) -> InitialConditions<T> {
        self.ic.clone()
    }

    fn analytic_solution(&self, t: T) -> Option<(Vec<T>, Vec<T>)> {
        self.solution.as_ref().map(|s| s(t))
    }

    fn f_y(&self, y: &[T], z: &[T], t: T) -> DenseMatrix<T> {
        match &self.f_y {
            Some(j) => j(y, z, t),
            None => fd_jacobian(|v| self.f(v, z, t), y, None).expect("finite-difference f_y"),
        }
    }

    fn f_z(&self, y: &[T], z: &[T], t: T) -> DenseMatrix<T> {
        match &self.f_z {
            Some(j) => j(y, z, t),
            None => fd_jacobian(|v| self.f(y, v, t), z, None).expect("finite-difference f_z"),
        }
    }

    fn g_y(&self, y: &[T], z: &[T], t: T) -> DenseMatrix<T> {
        match &self.g_y {
            Some(j) => j(y, z, t),
            None => fd_jacobian(|v| self.g(v, z, t), y, None).expect("finite-difference g_y"),
        }
    }

    fn g_z(&self, y: &[T], z: &[T], t: T) -> DenseMatrix<T> {
        match (&self.g_z, self.index) {
            (_, DaeIndex::Two) => DenseMatrix::zeros(self.n_algebraic(), self.n_algebraic()),
            (Some(j), DaeIndex::One) => j(y, z, t),
            (None, DaeIndex::One) => {
                fd_jacobian(|v| self.g(y, v, t), z, None).expect("finite-difference g_z")
            }
        }
    }
}
