//! Index reduction to the underlying ODE `ẏ = f`, `ż = h` and an adaptive
//! Dormand–Prince 5(4) integrator for high-accuracy reference solutions.

use crate::dae::{DaeIndex, DaeProblem};
use crate::error::{Error, Result};
use crate::numerics::LuFactors;
use crate::scalar::{all_finite, norm_inf, Real};

/// Right-hand side `(f, h)` of the index-reduced ODE at `(y, z, t)`.
///
/// Index-1: `h = -g_z⁻¹ (g_y f + g_t)`.
/// Index-2: `h = -(g_y f_z)⁻¹ (fᵀ g_yy f + g_y f_y f + 2 g_yt f + g_y f_t + g_tt)`.
pub fn reduced_rhs<T: Real>(
    problem: &dyn DaeProblem<T>,
    y: &[T],
    z: &[T],
    t: T,
) -> Result<(Vec<T>, Vec<T>)> {
    let f = problem.f(y, z, t);
    let gy = problem.g_y(y, z, t);
    let (lhs, rhs) = match problem.index() {
        DaeIndex::One => {
            let gt = problem.g_t(y, z, t);
            let rhs: Vec<T> = gy.matvec(&f).iter().zip(&gt).map(|(&a, &b)| a + b).collect();
            (problem.g_z(y, z, t), rhs)
        }
        DaeIndex::Two => {
            let fy = problem.f_y(y, z, t);
            let fz = problem.f_z(y, z, t);
            let quad = problem.g_yy(y, z, t).contract_quadratic(&f)?;
            let gyfyf = gy.matvec(&fy.matvec(&f));
            let gytf = problem.g_yt(y, z, t).matvec(&f);
            let gyft = gy.matvec(&problem.f_t(y, z, t));
            let gtt = problem.g_tt(y, z, t);
            let two = T::lit(2.0);
            let rhs = (0..quad.len())
                .map(|i| quad[i] + gyfyf[i] + two * gytf[i] + gyft[i] + gtt[i])
                .collect();
            (gy.matmul(&fz)?, rhs)
        }
    };
    let sol = LuFactors::new(&lhs)?.solve(&rhs)?;
    Ok((f, sol.into_iter().map(|v| -v).collect()))
}

/// The index-reduced ODE of a DAE, with its constraints as invariants.
pub struct ReducedOde<'a, T: Real> {
    problem: &'a dyn DaeProblem<T>,
}

impl<'a, T: Real> ReducedOde<'a, T> {
    pub fn new(problem: &'a dyn DaeProblem<T>) -> Self {
        Self { problem }
    }

    pub fn problem(&self) -> &'a dyn DaeProblem<T> {
        self.problem
    }

    /// `n + m`.
    pub fn dim(&self) -> usize {
        self.problem.n_differential() + self.problem.n_algebraic()
    }

    /// Stacked right-hand side for the state `x = [y; z]`.
    pub fn rhs(&self, t: T, x: &[T]) -> Result<Vec<T>> {
        let (y, z) = x.split_at(self.problem.n_differential());
        let (mut f, h) = reduced_rhs(self.problem, y, z, t)?;
        f.extend(h);
        Ok(f)
    }

    /// `g` and, for index-2, the hidden constraint `g_y f + g_t`, stacked.
    pub fn invariants(&self, t: T, x: &[T]) -> Vec<T> {
        let p = self.problem;
        let (y, z) = x.split_at(p.n_differential());
        let mut out = p.g(y, z, t);
        if p.index() == DaeIndex::Two {
            let f = p.f(y, z, t);
            let gt = p.g_t(y, z, t);
            out.extend(p.g_y(y, z, t).matvec(&f).iter().zip(&gt).map(|(&a, &b)| a + b));
        }
        out
    }
}

/// Tolerances and limits for [`dopri5`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dopri5Settings<T> {
    pub atol: T,
    pub rtol: T,
    /// Initial step; estimated from the problem when `None`.
    pub h0: Option<T>,
    pub max_steps: usize,
}

impl<T: Real> Default for Dopri5Settings<T> {
    fn default() -> Self {
        Self {
            atol: T::lit(1e-12),
            rtol: T::lit(1e-10),
            h0: None,
            max_steps: 5_000_000,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Piecewise quartic continuous extension of an accepted DOPRI5 run.
#[derive(Clone, Debug)]
pub struct DenseOutput<T> {
    dim: usize,
    starts: Vec<T>,
    steps: Vec<T>,
    coeffs: Vec<T>,
    t0: T,
    t_end: T,
}

impl<T: Real> DenseOutput<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn accepted_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn span(&self) -> (T, T) {
        (self.t0, self.t_end)
    }

    /// Interpolated state at `t`.
    pub fn eval(&self, t: T) -> Result<Vec<T>> {
        let slack = T::lit(1e-12) * self.t_end.abs().max(T::one());
        if !(t >= self.t0 - slack && t <= self.t_end + slack) {
            return Err(Error::OutOfDomain {
                t: t.to_f64_lossy(),
                t0: self.t0.to_f64_lossy(),
                t_end: self.t_end.to_f64_lossy(),
            });
        }
        let k = match self.starts.partition_point(|&s| s <= t) {
            0 => 0,
            p => p - 1,
        };
        let theta = (t - self.starts[k]) / self.steps[k];
        let theta1 = T::one() - theta;
        let r = &self.coeffs[k * 5 * self.dim..(k + 1) * 5 * self.dim];
        let d = self.dim;
        Ok((0..d)
            .map(|i| {
                r[i] + theta
                    * (r[d + i] + theta1 * (r[2 * d + i] + theta * (r[3 * d + i] + theta1 * r[4 * d + i])))
            })
            .collect())
    }

    /// State at the end of the integration interval.
    pub fn final_state(&self) -> Result<Vec<T>> {
        self.eval(self.t_end)
    }
}

fn weighted_rms<T: Real>(v: &[T], scale: &[T]) -> T {
    let s: T = v.iter().zip(scale).map(|(&a, &s)| (a / s) * (a / s)).sum();
    (s / T::from_count(v.len().max(1))).sqrt()
}

fn axpy_combo<T: Real>(x: &[T], h: T, terms: &[(f64, &[T])]) -> Vec<T> {
    (0..x.len())
        .map(|i| {
            let mut acc = T::zero();
            for &(c, k) in terms {
                acc = acc + T::lit(c) * k[i];
            }
            x[i] + h * acc
        })
        .collect()
}

/// Integrates `ẋ = rhs(t, x)` from `t0` to `t1` with the Dormand–Prince 5(4)
/// pair under PI step-size control and returns the dense output.
pub fn dopri5<T, F>(mut rhs: F, t0: T, t1: T, x0: &[T], settings: Dopri5Settings<T>) -> Result<DenseOutput<T>>
where
    T: Real,
    F: FnMut(T, &[T]) -> Result<Vec<T>>,
{
    let eps = T::epsilon();
    if !(settings.atol >= T::zero()) || !(settings.rtol > T::lit(10.0) * eps) {
        return Err(Error::ToleranceUnreachable(format!(
            "atol = {}, rtol = {} (rtol must exceed 10 machine epsilons)",
            settings.atol, settings.rtol
        )));
    }
    if !(t1 > t0) {
        return Err(Error::InvalidGrid(format!("empty integration span [{t0}, {t1}]")));
    }
    let dim = x0.len();
    let (atol, rtol) = (settings.atol, settings.rtol);
    let beta = T::lit(0.04);
    let expo1 = T::lit(0.2) - beta * T::lit(0.75);
    let (facc1, facc2, safe) = (T::lit(5.0), T::lit(0.1), T::lit(0.9));

    let scale = |a: &[T], b: &[T]| -> Vec<T> {
        a.iter().zip(b).map(|(&u, &v)| atol + rtol * u.abs().max(v.abs())).collect()
    };

    let mut t = t0;
    let mut x = x0.to_vec();
    let mut k1 = rhs(t, &x)?;
    let span = t1 - t0;

    let mut h = match settings.h0 {
        Some(h) if h > T::zero() => h,
        _ => {
            let sk = scale(&x, &x);
            let d0 = weighted_rms(&x, &sk);
            let d1 = weighted_rms(&k1, &sk);
            let mut h0 = if d0 < T::lit(1e-10) || d1 < T::lit(1e-10) {
                T::lit(1e-6)
            } else {
                T::lit(0.01) * d0 / d1
            };
            h0 = h0.min(span);
            let xe: Vec<T> = x.iter().zip(&k1).map(|(&a, &b)| a + h0 * b).collect();
            let f1 = rhs(t + h0, &xe)?;
            let diff: Vec<T> = f1.iter().zip(&k1).map(|(&a, &b)| a - b).collect();
            let d2 = weighted_rms(&diff, &sk) / h0;
            let dm = d1.max(d2);
            let h1 = if dm <= T::lit(1e-15) {
                (h0 * T::lit(1e-3)).max(T::lit(1e-6))
            } else {
                (T::lit(0.01) / dm).powf(T::lit(0.2))
            };
            (T::lit(100.0) * h0).min(h1).min(span)
        }
    };

    let mut out = DenseOutput {
        dim,
        starts: Vec::new(),
        steps: Vec::new(),
        coeffs: Vec::new(),
        t0,
        t_end: t1,
    };
    let mut facold = T::lit(1e-4);
    let mut rejected = false;
    let mut steps = 0usize;
    loop {
        if steps >= settings.max_steps {
            return Err(Error::ToleranceUnreachable(format!(
                "step budget of {} exhausted at t = {t}",
                settings.max_steps
            )));
        }
        if T::lit(0.1) * h.abs() <= t.abs() * eps {
            return Err(Error::StepSizeUnderflow {
                t: t.to_f64_lossy(),
                h: h.to_f64_lossy(),
            });
        }
        let last = t + T::lit(1.01) * h >= t1;
        if last {
            h = t1 - t;
        }
        steps += 1;

        let x2 = axpy_combo(&x, h, &[(A21, &k1)]);
        let k2 = rhs(t + T::lit(C2) * h, &x2)?;
        let x3 = axpy_combo(&x, h, &[(A31, &k1), (A32, &k2)]);
        let k3 = rhs(t + T::lit(C3) * h, &x3)?;
        let x4 = axpy_combo(&x, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        let k4 = rhs(t + T::lit(C4) * h, &x4)?;
        let x5 = axpy_combo(&x, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        let k5 = rhs(t + T::lit(C5) * h, &x5)?;
        let x6 = axpy_combo(&x, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        let tph = t + h;
        let k6 = rhs(tph, &x6)?;
        let xn = axpy_combo(&x, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = rhs(tph, &xn)?;

        let errv: Vec<T> = (0..dim)
            .map(|i| {
                h * (T::lit(E1) * k1[i]
                    + T::lit(E3) * k3[i]
                    + T::lit(E4) * k4[i]
                    + T::lit(E5) * k5[i]
                    + T::lit(E6) * k6[i]
                    + T::lit(E7) * k7[i])
            })
            .collect();
        let sk = scale(&x, &xn);
        let err = if all_finite(&xn) && all_finite(&k7) {
            weighted_rms(&errv, &sk)
        } else {
            T::infinity()
        };
        if !err.is_finite() {
            h = h * T::lit(0.1);
            rejected = true;
            continue;
        }

        let fac11 = err.powf(expo1);
        let fac = (fac11 / facold.powf(beta)).min(facc1 * safe).max(facc2 * safe) / safe;
        let mut hnew = h / fac;

        if err <= T::one() {
            facold = err.max(T::lit(1e-4));
            let mut dense = Vec::with_capacity(5 * dim);
            let ydiff: Vec<T> = xn.iter().zip(&x).map(|(&a, &b)| a - b).collect();
            let bspl: Vec<T> = (0..dim).map(|i| h * k1[i] - ydiff[i]).collect();
            dense.extend_from_slice(&x);
            dense.extend_from_slice(&ydiff);
            dense.extend_from_slice(&bspl);
            dense.extend((0..dim).map(|i| ydiff[i] - h * k7[i] - bspl[i]));
            dense.extend((0..dim).map(|i| {
                h * (T::lit(D1) * k1[i]
                    + T::lit(D3) * k3[i]
                    + T::lit(D4) * k4[i]
                    + T::lit(D5) * k5[i]
                    + T::lit(D6) * k6[i]
                    + T::lit(D7) * k7[i])
            }));
            out.starts.push(t);
            out.steps.push(h);
            out.coeffs.extend(dense);
            k1 = k7;
            x = xn;
            t = if last { t1 } else { tph };
            if last {
                return Ok(out);
            }
            if rejected {
                hnew = hnew.min(h);
            }
            rejected = false;
            h = hnew;
        } else {
            hnew = h / (facc1.min(fac11 / safe));
            rejected = true;
            h = hnew;
        }
    }
}

/// Dense reference solution of a DAE obtained through its reduced ODE.
#[derive(Clone, Debug)]
pub struct ReferenceTrajectory<T> {
    pub output: DenseOutput<T>,
    pub n: usize,
    /// Largest invariant residual seen at accepted step ends.
    pub max_invariant_drift: T,
}

impl<T: Real> ReferenceTrajectory<T> {
    pub fn eval(&self, t: T) -> Result<(Vec<T>, Vec<T>)> {
        let mut x = self.output.eval(t)?;
        let z = x.split_off(self.n);
        Ok((x, z))
    }
}

/// Integrates the reduced ODE from the problem's initial conditions to `t_end`.
pub fn solve_reference<T: Real>(
    ode: &ReducedOde<'_, T>,
    t_end: T,
    settings: Dopri5Settings<T>,
) -> Result<ReferenceTrajectory<T>> {
    let p = ode.problem();
    let ic = p.initial_conditions();
    let x0: Vec<T> = ic.y0.iter().chain(ic.z0.iter()).copied().collect();
    let output = dopri5(|t, x| ode.rhs(t, x), ic.t0, t_end, &x0, settings)?;
    let mut drift = T::zero();
    for (k, &s) in output.starts.iter().enumerate() {
        let x = &output.coeffs[k * 5 * output.dim..k * 5 * output.dim + output.dim];
        drift = drift.max(norm_inf(&ode.invariants(s, x)));
    }
    drift = drift.max(norm_inf(&ode.invariants(t_end, &output.final_state()?)));
    Ok(ReferenceTrajectory {
        output,
        n: p.n_differential(),
        max_invariant_drift: drift,
    })
}
