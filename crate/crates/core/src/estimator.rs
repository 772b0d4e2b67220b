//! Adjoint-weighted residual estimates of the error in a quantity of interest,
//! reference errors and effectivity ratios.

use std::fmt;

use crate::adjoint::{
    dgy_transpose_dt, is_zero, solve_adjoint_backward, AdjointPath, AdjointSolution,
    LinearizedOps, TerminalCondition,
};
use crate::dae::{DaeIndex, DaeProblem, Qoi, TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::forward::{bdf1_for_each, NewtonSettings};
use crate::numerics::{LuFactors, GL5_NODES, GL5_WEIGHTS};
use crate::reduction::{reduced_rhs, solve_reference, Dopri5Settings, ReducedOde};
use crate::scalar::{dot, Real};

/// One named contribution to an estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorTerm<T> {
    pub name: &'static str,
    pub value: T,
}

/// Term-by-term error estimate, optionally compared against a reference error.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport<T> {
    pub path: AdjointPath,
    pub terms: Vec<ErrorTerm<T>>,
    pub total: T,
    /// `Q(X)` for the numerical solution.
    pub qoi_value: T,
    pub reference_error: Option<T>,
    pub effectivity: Option<T>,
    /// Set when the reference error is too small relative to `Q(X)` for the
    /// ratio to mean anything.
    pub unreliable: bool,
}

/// Below this `|reference| / |Q(X)|` the effectivity is flagged.
pub const UNRELIABLE_RATIO: f64 = 1e-10;

impl<T: Real> ErrorReport<T> {
    fn from_terms(path: AdjointPath, terms: Vec<ErrorTerm<T>>, qoi_value: T) -> Self {
        let total = terms.iter().fold(T::zero(), |acc, t| acc + t.value);
        Self {
            path,
            terms,
            total,
            qoi_value,
            reference_error: None,
            effectivity: None,
            unreliable: false,
        }
    }

    pub fn term(&self, name: &str) -> Option<T> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }

    /// Attaches a reference error and computes the effectivity.
    pub fn with_reference(mut self, reference_error: T) -> Result<Self> {
        self.effectivity = Some(effectivity(self.total, reference_error)?);
        self.reference_error = Some(reference_error);
        self.unreliable = reference_error.abs() < T::lit(UNRELIABLE_RATIO) * self.qoi_value.abs();
        Ok(self)
    }
}

impl<T: Real> fmt::Display for ErrorReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: estimate {:.6e}", self.path, self.total.to_f64_lossy())?;
        if let (Some(r), Some(e)) = (self.reference_error, self.effectivity) {
            write!(f, ", reference {:.6e}, effectivity {:.4}", r.to_f64_lossy(), e.to_f64_lossy())?;
            if self.unreliable {
                f.write_str(" (unreliable)")?;
            }
        }
        Ok(())
    }
}

/// `estimate / reference`.
pub fn effectivity<T: Real>(estimate: T, reference_error: T) -> Result<T> {
    if reference_error == T::zero() {
        return Err(Error::ZeroReference);
    }
    Ok(estimate / reference_error)
}

fn check_match<T: Real>(
    problem: &dyn DaeProblem<T>,
    traj: &Trajectory<T>,
    qoi: &Qoi<T>,
    adjoint: &AdjointSolution<T>,
) -> Result<()> {
    let fine = traj.grid().refine(adjoint.refinement())?;
    if fine != *adjoint.grid() {
        return Err(Error::PathMismatch("adjoint grid is not a refinement of the trajectory grid".into()));
    }
    let expected = match (adjoint.path(), problem.index(), qoi) {
        (AdjointPath::Ode, _, Qoi::Cumulative { .. }) => TerminalCondition::OdeCumulative,
        (AdjointPath::Ode, _, Qoi::Terminal { .. }) => TerminalCondition::OdeTerminal,
        (AdjointPath::Dae, DaeIndex::One, Qoi::Cumulative { .. }) => TerminalCondition::Index1Cumulative,
        (AdjointPath::Dae, DaeIndex::Two, Qoi::Cumulative { .. }) => TerminalCondition::Index2Cumulative,
        (AdjointPath::Dae, DaeIndex::One, Qoi::Terminal { zeta_z, .. }) => TerminalCondition::Index1Terminal {
            algebraic: !is_zero(zeta_z),
        },
        (AdjointPath::Dae, DaeIndex::Two, Qoi::Terminal { zeta_z, .. }) => TerminalCondition::Index2Terminal {
            algebraic: !is_zero(zeta_z),
        },
    };
    if adjoint.terminal_condition() != expected {
        return Err(Error::PathMismatch(format!(
            "adjoint built for {:?}, QoI and problem need {expected:?}",
            adjoint.terminal_condition()
        )));
    }
    Ok(())
}

/// Visits every Gauss point of every refined panel with
/// `(j, t, weight, θ in the refined panel, Y, Z, Ẏ, Ż)`.
fn for_each_gauss_point<T, F>(traj: &Trajectory<T>, r: usize, mut visit: F) -> Result<()>
where
    T: Real,
    F: FnMut(usize, T, T, T, &[T], &[T], &[T], &[T]) -> Result<()>,
{
    let grid = traj.grid().refine(r)?;
    let half = grid.dt() * T::lit(0.5);
    let rr = T::from_count(r);
    for k in 0..traj.grid().intervals() {
        let (ydot, zdot) = traj.slope_of(k);
        for s in 0..r {
            let j = k * r + s;
            let lo = grid.node(j);
            let hi = grid.node(j + 1);
            let w_half = (hi - lo) * T::lit(0.5);
            for q in 0..5 {
                let theta = (T::one() + T::lit(GL5_NODES[q])) * T::lit(0.5);
                let t = lo + w_half + w_half * T::lit(GL5_NODES[q]);
                let (y, z) = traj.lerp_in(k, (T::from_count(s) + theta) / rr);
                visit(j, t, half * T::lit(GL5_WEIGHTS[q]), theta, &y, &z, &ydot, &zdot)?;
            }
        }
    }
    Ok(())
}

fn finite_or<T: Real>(v: T, t: T) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteIntegrand { t: t.to_f64_lossy() })
    }
}

/// `Q(X)` for the piecewise-linear numerical solution, integrated over the
/// `r`-refined panels for cumulative QoIs.
pub fn qoi_value<T: Real>(traj: &Trajectory<T>, qoi: &Qoi<T>, r: usize) -> Result<T> {
    match qoi {
        Qoi::Terminal { zeta_y, zeta_z } => {
            let (y, z) = traj.terminal();
            Ok(dot(zeta_y, y) + dot(zeta_z, z))
        }
        Qoi::Cumulative { psi_y, psi_z } => {
            let mut acc = T::zero();
            for_each_gauss_point(traj, r, |_, t, w, _, y, z, _, _| {
                acc = acc + w * finite_or(dot(&psi_y(t), y) + dot(&psi_z(t), z), t)?;
                Ok(())
            })?;
            Ok(acc)
        }
    }
}

/// Error estimate with zero initial error.
pub fn estimate_error<T: Real>(
    problem: &dyn DaeProblem<T>,
    traj: &Trajectory<T>,
    qoi: &Qoi<T>,
    adjoint: &AdjointSolution<T>,
) -> Result<ErrorReport<T>> {
    estimate_error_with(problem, traj, qoi, adjoint, None)
}

/// Error estimate; `initial_error` is `(e_y(0), e_z(0))` when the initial
/// values are themselves inexact.
pub fn estimate_error_with<T: Real>(
    problem: &dyn DaeProblem<T>,
    traj: &Trajectory<T>,
    qoi: &Qoi<T>,
    adjoint: &AdjointSolution<T>,
    initial_error: Option<(&[T], &[T])>,
) -> Result<ErrorReport<T>> {
    check_match(problem, traj, qoi, adjoint)?;
    let r = adjoint.refinement();
    let path = adjoint.path();
    let (n, m) = (problem.n_differential(), problem.n_algebraic());

    let initial = match initial_error {
        None => T::zero(),
        Some((ey, ez)) => {
            if ey.len() != n || ez.len() != m {
                return Err(Error::DimensionMismatch("initial error has the wrong shape".into()));
            }
            let mut v = dot(ey, adjoint.y_at(0));
            if path == AdjointPath::Ode {
                v = v + dot(ez, adjoint.z_at(0));
            }
            v
        }
    };

    let mut res_y = T::zero();
    let mut res_z = T::zero();
    for_each_gauss_point(traj, r, |j, t, w, theta, y, z, ydot, zdot| {
        let (ay, az) = adjoint.lerp_in(j, theta);
        let f = problem.f(y, z, t);
        let ry: T = (0..n).map(|i| ay[i] * (f[i] - ydot[i])).sum();
        let rz = match path {
            AdjointPath::Dae => dot(&az, &problem.g(y, z, t)),
            AdjointPath::Ode => {
                let (_, h) = reduced_rhs(problem, y, z, t)?;
                (0..m).map(|i| az[i] * (h[i] - zdot[i])).sum()
            }
        };
        res_y = res_y + w * finite_or(ry, t)?;
        res_z = res_z + w * finite_or(rz, t)?;
        Ok(())
    })?;

    let mut terms = vec![
        ErrorTerm { name: "initial_condition", value: initial },
        ErrorTerm { name: "residual_y", value: res_y },
        ErrorTerm {
            name: match path {
                AdjointPath::Dae => "constraint_z",
                AdjointPath::Ode => "residual_z",
            },
            value: res_z,
        },
    ];
    if path == AdjointPath::Dae {
        terms.extend(boundary_terms(problem, traj, qoi, adjoint)?);
    }
    Ok(ErrorReport::from_terms(path, terms, qoi_value(traj, qoi, r)?))
}

fn boundary_terms<T: Real>(
    problem: &dyn DaeProblem<T>,
    traj: &Trajectory<T>,
    qoi: &Qoi<T>,
    adjoint: &AdjointSolution<T>,
) -> Result<Vec<ErrorTerm<T>>> {
    let grid = traj.grid();
    let t_end = grid.t_end();
    let (y, z) = traj.terminal();
    let g = problem.g(y, z, t_end);
    let ops = LinearizedOps::at_state(problem, y, z, t_end, AdjointPath::Dae)?;
    let neg = |v: T| -v;
    Ok(match adjoint.terminal_condition() {
        TerminalCondition::Index1Terminal { algebraic: true } => {
            let Qoi::Terminal { zeta_z, .. } = qoi else { unreachable!() };
            let w = LuFactors::new(&ops.gz.transpose())?.solve(zeta_z)?;
            vec![ErrorTerm { name: "boundary_constraint", value: neg(dot(&w, &g)) }]
        }
        TerminalCondition::Index2Cumulative => {
            let Qoi::Cumulative { psi_z, .. } = qoi else { unreachable!() };
            let u = LuFactors::new(&ops.schur()?)?.solve(&psi_z(t_end))?;
            vec![ErrorTerm { name: "boundary_constraint", value: neg(dot(&g, &u)) }]
        }
        TerminalCondition::Index2Terminal { algebraic } => {
            let Qoi::Terminal { zeta_y, zeta_z } = qoi else { unreachable!() };
            let lu = LuFactors::new(&ops.schur()?)?;
            let b1 = neg(dot(&lu.solve(&ops.fz.tr_matvec(zeta_y))?, &g));
            let mut out = vec![ErrorTerm { name: "boundary_constraint", value: b1 }];
            if algebraic {
                let u = lu.solve(zeta_z)?;
                let v = ops.gy.tr_matvec(&u);
                let (ydot, _) = traj.slope_of(grid.intervals() - 1);
                let f = problem.f(y, z, t_end);
                let mut lin = ops.fy.tr_matvec(&v);
                let rate = dgy_transpose_dt(problem, traj, adjoint.grid().dt())?.matvec(&u);
                for (a, b) in lin.iter_mut().zip(&rate) {
                    *a = *a + *b;
                }
                let b4 = dot(&lu.solve(&ops.fz.tr_matvec(&lin))?, &g);
                let gt = problem.g_t(y, z, t_end);
                let dg: Vec<T> = ops.gy.matvec(&ydot).iter().zip(&gt).map(|(&a, &b)| a + b).collect();
                out.extend([
                    ErrorTerm { name: "boundary_flux", value: neg(dot(&v, &f)) },
                    ErrorTerm { name: "boundary_slope", value: dot(&v, &ydot) },
                    ErrorTerm { name: "boundary_linearized", value: b4 },
                    ErrorTerm { name: "boundary_constraint_rate", value: neg(dot(&u, &dg)) },
                ]);
            }
            out
        }
        _ => Vec::new(),
    })
}

/// Per-block residual integrals `⟨φʸ_i, f_i − Ẏ_i⟩` over `parts` contiguous,
/// equal blocks of the differential variables.
pub fn cancellation_split<T: Real>(
    problem: &dyn DaeProblem<T>,
    traj: &Trajectory<T>,
    adjoint: &AdjointSolution<T>,
    parts: usize,
) -> Result<Vec<T>> {
    let n = problem.n_differential();
    if parts == 0 || n % parts != 0 {
        return Err(Error::PartitionMismatch { len: n, parts });
    }
    if traj.grid().refine(adjoint.refinement())? != *adjoint.grid() {
        return Err(Error::PathMismatch("adjoint grid is not a refinement of the trajectory grid".into()));
    }
    let width = n / parts;
    let mut acc = vec![T::zero(); parts];
    for_each_gauss_point(traj, adjoint.refinement(), |j, t, w, theta, y, z, ydot, _| {
        let (ay, _) = adjoint.lerp_in(j, theta);
        let f = problem.f(y, z, t);
        for (p, slot) in acc.iter_mut().enumerate() {
            let s: T = (p * width..(p + 1) * width).map(|i| ay[i] * (f[i] - ydot[i])).sum();
            *slot = *slot + w * finite_or(s, t)?;
        }
        Ok(())
    })?;
    Ok(acc)
}

/// Source of the "true" solution for reference errors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ReferenceBackend {
    /// The problem's closed-form solution.
    Analytic,
    /// Adaptive Dormand–Prince on the reduced ODE, falling back to
    /// [`ReferenceBackend::FineBdfRichardson`] when it cannot reach the tolerance.
    RkAdaptive,
    /// Two implicit Euler runs on grids `factor` and `2 factor` times finer,
    /// Richardson-extrapolated in the QoI.
    FineBdfRichardson,
}

impl fmt::Display for ReferenceBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReferenceBackend::Analytic => "analytic",
            ReferenceBackend::RkAdaptive => "rk-adaptive",
            ReferenceBackend::FineBdfRichardson => "fine-bdf-richardson",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceSettings<T> {
    pub backend: ReferenceBackend,
    pub dopri: Dopri5Settings<T>,
    pub richardson_factor: usize,
    pub newton: NewtonSettings<T>,
    /// Fall back to the Richardson reference when the RK solve fails with a
    /// step-size underflow or unreachable tolerance.
    pub fallback: bool,
}

impl<T: Real> Default for ReferenceSettings<T> {
    fn default() -> Self {
        Self {
            backend: ReferenceBackend::RkAdaptive,
            dopri: Dopri5Settings::default(),
            richardson_factor: 64,
            newton: NewtonSettings {
                reuse_jacobian: true,
                ..NewtonSettings::default()
            },
            fallback: true,
        }
    }
}

/// A reference error and the backend that actually produced it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceOutcome<T> {
    /// `Q(x) − Q(X)`.
    pub error: T,
    pub reference_qoi: T,
    pub backend: ReferenceBackend,
}

/// Integrates `ψ · (x − X)` over the refined panels, or evaluates `ζ · (x − X)`
/// at the final time, for a pointwise reference `x(t)`.
fn pointwise_reference_error<T, F>(traj: &Trajectory<T>, qoi: &Qoi<T>, r: usize, mut exact: F) -> Result<T>
where
    T: Real,
    F: FnMut(T) -> Result<(Vec<T>, Vec<T>)>,
{
    match qoi {
        Qoi::Terminal { zeta_y, zeta_z } => {
            let (ye, ze) = exact(traj.grid().t_end())?;
            let (y, z) = traj.terminal();
            let dy: Vec<T> = ye.iter().zip(y).map(|(&a, &b)| a - b).collect();
            let dz: Vec<T> = ze.iter().zip(z).map(|(&a, &b)| a - b).collect();
            Ok(dot(zeta_y, &dy) + dot(zeta_z, &dz))
        }
        Qoi::Cumulative { psi_y, psi_z } => {
            let mut acc = T::zero();
            for_each_gauss_point(traj, r, |_, t, w, _, y, z, _, _| {
                let (ye, ze) = exact(t)?;
                let (py, pz) = (psi_y(t), psi_z(t));
                let s: T = (0..y.len()).map(|i| py[i] * (ye[i] - y[i])).sum::<T>()
                    + (0..z.len()).map(|i| pz[i] * (ze[i] - z[i])).sum::<T>();
                acc = acc + w * finite_or(s, t)?;
                Ok(())
            })?;
            Ok(acc)
        }
    }
}

/// `Q` of an implicit Euler run on `grid`, without storing the trajectory.
pub fn streamed_qoi<T: Real>(
    problem: &dyn DaeProblem<T>,
    grid: TimeGrid<T>,
    qoi: &Qoi<T>,
    newton: NewtonSettings<T>,
) -> Result<T> {
    let mut acc = T::zero();
    let mut prev: Option<(T, Vec<T>, Vec<T>)> = None;
    let mut bad: Option<T> = None;
    bdf1_for_each(problem, grid, newton, |_, t, y, z| {
        if let Qoi::Cumulative { psi_y, psi_z } = qoi {
            if let Some((t0, y0, z0)) = &prev {
                let half = (t - *t0) * T::lit(0.5);
                for q in 0..5 {
                    let th = (T::one() + T::lit(GL5_NODES[q])) * T::lit(0.5);
                    let tq = *t0 + half + half * T::lit(GL5_NODES[q]);
                    let lerp = |a: &[T], b: &[T]| -> Vec<T> {
                        a.iter().zip(b).map(|(&p, &r)| p + th * (r - p)).collect()
                    };
                    let v = dot(&psi_y(tq), &lerp(y0, y)) + dot(&psi_z(tq), &lerp(z0, z));
                    if !v.is_finite() {
                        bad.get_or_insert(tq);
                    }
                    acc = acc + half * T::lit(GL5_WEIGHTS[q]) * v;
                }
            }
            prev = Some((t, y.to_vec(), z.to_vec()));
        } else if t == grid.t_end() {
            if let Qoi::Terminal { zeta_y, zeta_z } = qoi {
                acc = dot(zeta_y, y) + dot(zeta_z, z);
            }
        }
    })?;
    match bad {
        Some(t) => Err(Error::NonFiniteIntegrand { t: t.to_f64_lossy() }),
        None => Ok(acc),
    }
}

/// `Q(x) − Q(X)` from the selected reference backend.
pub fn reference_qoi_error<T: Real>(
    problem: &dyn DaeProblem<T>,
    traj: &Trajectory<T>,
    qoi: &Qoi<T>,
    r: usize,
    settings: &ReferenceSettings<T>,
) -> Result<ReferenceOutcome<T>> {
    qoi.validate(problem.n_differential(), problem.n_algebraic(), traj.grid().t_end())?;
    let q_num = qoi_value(traj, qoi, r)?;
    let outcome = |error: T, backend| ReferenceOutcome {
        error,
        reference_qoi: q_num + error,
        backend,
    };
    match settings.backend {
        ReferenceBackend::Analytic => {
            if problem.analytic_solution(traj.grid().t0()).is_none() {
                return Err(Error::NoAnalyticSolution(problem.name().to_string()));
            }
            let err = pointwise_reference_error(traj, qoi, r, |t| {
                problem
                    .analytic_solution(t)
                    .ok_or_else(|| Error::NoAnalyticSolution(problem.name().to_string()))
            })?;
            Ok(outcome(err, ReferenceBackend::Analytic))
        }
        ReferenceBackend::RkAdaptive => {
            let ode = ReducedOde::new(problem);
            match solve_reference(&ode, traj.grid().t_end(), settings.dopri) {
                Ok(reference) => {
                    let err = pointwise_reference_error(traj, qoi, r, |t| reference.eval(t))?;
                    Ok(outcome(err, ReferenceBackend::RkAdaptive))
                }
                Err(Error::StepSizeUnderflow { .. } | Error::ToleranceUnreachable(_)) if settings.fallback => {
                    reference_qoi_error(
                        problem,
                        traj,
                        qoi,
                        r,
                        &ReferenceSettings {
                            backend: ReferenceBackend::FineBdfRichardson,
                            ..*settings
                        },
                    )
                }
                Err(e) => Err(e),
            }
        }
        ReferenceBackend::FineBdfRichardson => {
            let factor = settings.richardson_factor;
            if factor == 0 {
                return Err(Error::InvalidParams("Richardson factor must be positive".into()));
            }
            let coarse = traj.grid().refine(factor)?;
            let fine = traj.grid().refine(2 * factor)?;
            let q1 = streamed_qoi(problem, coarse, qoi, settings.newton)?;
            let q2 = streamed_qoi(problem, fine, qoi, settings.newton)?;
            let q_ref = T::lit(2.0) * q2 - q1;
            Ok(outcome(q_ref - q_num, ReferenceBackend::FineBdfRichardson))
        }
    }
}

/// Adjoint solve, estimate and reference error for one trajectory.
pub fn estimate_with_reference<T: Real>(
    problem: &dyn DaeProblem<T>,
    traj: &Trajectory<T>,
    qoi: &Qoi<T>,
    path: AdjointPath,
    r: usize,
    reference: &ReferenceSettings<T>,
) -> Result<ErrorReport<T>> {
    let adjoint = solve_adjoint_backward(problem, traj, qoi, path, r)?;
    let report = estimate_error(problem, traj, qoi, &adjoint)?;
    let reference = reference_qoi_error(problem, traj, qoi, r, reference)?;
    report.with_reference(reference.error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dae::{CustomDae, InitialConditions};
    use crate::forward::bdf1_solve;
    use crate::numerics::DenseMatrix;
    use crate::problems::{PendulumIndex1, PendulumIndex2, Petzold, Robertson};

    fn solve(p: &dyn DaeProblem<f64>, dt: f64, t_end: f64) -> Trajectory<f64> {
        let grid = TimeGrid::with_step(0.0, t_end, dt).unwrap();
        bdf1_solve(p, grid, NewtonSettings::default()).unwrap()
    }

    fn decay() -> CustomDae<f64> {
        let ic = InitialConditions::<f64> { y0: vec![1.0], z0: vec![1.0], t0: 0.0 };
        CustomDae::new("decay", DaeIndex::One, ic, |y, _z, _t| vec![-y[0]], |y, z, _t| vec![y[0] - z[0]])
            .with_f_y(|_, _, _| DenseMatrix::from_diagonal(&[-1.0]))
            .with_f_z(|_, _, _| DenseMatrix::zeros(1, 1))
            .with_g_y(|_, _, _| DenseMatrix::from_diagonal(&[1.0]))
            .with_g_z(|_, _, _| DenseMatrix::from_diagonal(&[-1.0]))
            .with_solution(|t: f64| (vec![(-t).exp()], vec![(-t).exp()]))
    }

    fn ramp() -> CustomDae<f64> {
        let ic = InitialConditions::<f64> { y0: vec![0.0], z0: vec![0.0], t0: 0.0 };
        CustomDae::new("ramp", DaeIndex::One, ic, |_y, _z, _t| vec![1.0], |y, z, _t| vec![y[0] - z[0]])
    }

    #[test]
    fn zero_residual_gives_zero_estimate() {
        let p = ramp();
        let traj = solve(&p, 0.125, 1.0);
        for qoi in [
            Qoi::cumulative_constant(vec![1.0], vec![0.5]),
            Qoi::terminal(vec![1.0], vec![2.0]),
        ] {
            for path in [AdjointPath::Dae, AdjointPath::Ode] {
                let adj = solve_adjoint_backward(&p, &traj, &qoi, path, 4).unwrap();
                let rep = estimate_error(&p, &traj, &qoi, &adj).unwrap();
                assert_eq!(rep.total, 0.0, "{path} {qoi:?}");
            }
        }
    }

    #[test]
    fn scalar_reference_error_closed_form() {
        let p = decay();
        let traj = solve(&p, 0.1, 1.0);
        let qoi = Qoi::terminal(vec![1.0], vec![0.0]);
        let expect = (-1.0f64).exp() - (1.0f64 / 1.1).powi(10);
        assert!((expect + 0.017663848).abs() < 1e-9);
        for backend in [ReferenceBackend::Analytic, ReferenceBackend::RkAdaptive] {
            let s = ReferenceSettings { backend, ..Default::default() };
            let out = reference_qoi_error(&p, &traj, &qoi, 4, &s).unwrap();
            assert!((out.error - expect).abs() < 1e-10, "{backend}: {}", out.error);
        }
        let s = ReferenceSettings { backend: ReferenceBackend::FineBdfRichardson, ..Default::default() };
        let out = reference_qoi_error(&p, &traj, &qoi, 4, &s).unwrap();
        assert!((out.error - expect).abs() < 1e-6, "{}", out.error);
    }

    #[test]
    fn reference_of_exact_solution_is_zero() {
        let p = ramp().with_solution(|t| (vec![t], vec![t]));
        let traj = solve(&p, 0.25, 1.0);
        let qoi = Qoi::cumulative_constant(vec![1.0], vec![1.0]);
        let s = ReferenceSettings { backend: ReferenceBackend::Analytic, ..Default::default() };
        assert!(reference_qoi_error(&p, &traj, &qoi, 4, &s).unwrap().error.abs() < 1e-15);
    }

    #[test]
    fn missing_analytic_solution() {
        let traj = solve(&Robertson, 0.01, 0.1);
        let qoi = Qoi::terminal(vec![1.0, 0.0], vec![0.0]);
        let s = ReferenceSettings { backend: ReferenceBackend::Analytic, ..Default::default() };
        assert!(matches!(
            reference_qoi_error(&Robertson, &traj, &qoi, 4, &s),
            Err(Error::NoAnalyticSolution(_))
        ));
    }

    #[test]
    fn scalar_estimate_tracks_reference() {
        let p = decay();
        let traj = solve(&p, 0.01, 1.0);
        let qoi = Qoi::terminal(vec![1.0], vec![0.0]);
        let adj = solve_adjoint_backward(&p, &traj, &qoi, AdjointPath::Dae, 4).unwrap();
        let s = ReferenceSettings { backend: ReferenceBackend::Analytic, ..Default::default() };
        let reference = reference_qoi_error(&p, &traj, &qoi, 4, &s).unwrap().error;
        let rep = estimate_error(&p, &traj, &qoi, &adj).unwrap().with_reference(reference).unwrap();
        let eff = rep.effectivity.unwrap();
        assert!((eff - 1.0).abs() < 0.02, "{eff}");
        assert!(!rep.unreliable);
    }

    #[test]
    fn term_sum_identity() {
        let p = PendulumIndex2::<f64>::default();
        let traj = solve(&p, 0.01, 0.5);
        let qoi = Qoi::terminal(vec![1.0; 4], vec![1.0]);
        let adj = solve_adjoint_backward(&p, &traj, &qoi, AdjointPath::Dae, 4).unwrap();
        let rep = estimate_error(&p, &traj, &qoi, &adj).unwrap();
        assert_eq!(rep.terms.len(), 8);
        let sum: f64 = rep.terms.iter().map(|t| t.value).sum();
        assert!((sum - rep.total).abs() <= 1e-14 * rep.total.abs());
    }

    #[test]
    fn initial_error_hook() {
        let p = decay();
        let traj = solve(&p, 0.1, 1.0);
        let qoi = Qoi::terminal(vec![1.0], vec![0.0]);
        let adj = solve_adjoint_backward(&p, &traj, &qoi, AdjointPath::Dae, 1).unwrap();
        let base = estimate_error(&p, &traj, &qoi, &adj).unwrap();
        let shifted = estimate_error_with(&p, &traj, &qoi, &adj, Some((&[0.5], &[0.0]))).unwrap();
        let phi0 = adj.y_at(0)[0];
        assert!((shifted.total - base.total - 0.5 * phi0).abs() < 1e-15);
    }

    #[test]
    fn mismatched_adjoint_rejected() {
        let p = PendulumIndex1::<f64>::default();
        let traj = solve(&p, 0.01, 0.2);
        let a = Qoi::terminal(vec![1.0, 0.0, 0.0, 0.0], vec![0.0]);
        let b = Qoi::terminal(vec![1.0, 0.0, 0.0, 0.0], vec![1.0]);
        let adj = solve_adjoint_backward(&p, &traj, &a, AdjointPath::Dae, 2).unwrap();
        assert!(matches!(estimate_error(&p, &traj, &b, &adj), Err(Error::PathMismatch(_))));
        let other = solve(&p, 0.02, 0.2);
        assert!(matches!(estimate_error(&p, &other, &a, &adj), Err(Error::PathMismatch(_))));
    }

    #[test]
    fn effectivity_cases() {
        assert_eq!(effectivity(2.0, 2.0).unwrap(), 1.0);
        assert_eq!(effectivity(1.0, 0.0), Err(Error::ZeroReference));
    }

    #[test]
    fn split_partitions() {
        let p = Petzold::<f64>::default();
        let traj = solve(&p, 0.01, 0.5);
        let qoi = Qoi::terminal(vec![1.0, 1.0], vec![0.0]);
        let adj = solve_adjoint_backward(&p, &traj, &qoi, AdjointPath::Dae, 2).unwrap();
        assert_eq!(
            cancellation_split(&p, &traj, &adj, 3),
            Err(Error::PartitionMismatch { len: 2, parts: 3 })
        );
        let parts = cancellation_split(&p, &traj, &adj, 2).unwrap();
        let whole = estimate_error(&p, &traj, &qoi, &adj).unwrap().term("residual_y").unwrap();
        assert!((parts[0] + parts[1] - whole).abs() <= 1e-13 * whole.abs());
    }
}
