use thiserror::Error;

/// Errors produced by the solvers, estimators and problem builders.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("singular matrix: pivot {pivot:.3e} at column {column} is below the floor {floor:.1e}")]
    SingularMatrix {
        column: usize,
        pivot: f64,
        floor: f64,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("integrand is not finite at t = {t}")]
    NonFiniteIntegrand { t: f64 },
    #[error("function evaluation is not finite (input component {component})")]
    NonFiniteEvaluation { component: usize },
    #[error("time {t} is outside [{t0}, {t_end}]")]
    OutOfDomain { t: f64, t0: f64, t_end: f64 },
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("Newton iteration did not converge at step {step} (t = {t}, residual {residual:.3e})")]
    NewtonDiverged { step: usize, t: f64, residual: f64 },
    #[error("singular matrix in backward adjoint step at t = {t}: {source}")]
    AdjointStep {
        t: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("requested tolerances are unreachable: {0}")]
    ToleranceUnreachable(String),
    #[error("adjoint solution does not match the QoI/problem: {0}")]
    PathMismatch(String),
    #[error("reference error is zero; effectivity undefined")]
    ZeroReference,
    #[error("problem `{0}` has no analytic solution")]
    NoAnalyticSolution(String),
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("invalid problem parameters: {0}")]
    InvalidParams(String),
    #[error("cannot split {len} components into {parts} equal parts")]
    PartitionMismatch { len: usize, parts: usize },
    #[error("invalid QoI: {0}")]
    InvalidQoi(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
