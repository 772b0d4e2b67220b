//! Sweep execution.

use std::time::Instant;

use adjoint_dae::{
    bdf1_solve, estimate_error_with, reference_qoi_error, solve_adjoint_backward, AdjointPath, ReferenceOutcome,
    TimeGrid64, Trajectory64,
};
use rayon::prelude::*;

use crate::config::Experiment;
use crate::report::{Outcome, Row, RowValues, Table};

/// Runs every `(dt, T)` cell, in parallel on `jobs` threads (0 picks the
/// rayon default). Rows come back ordered dt-major, then T, then method.
/// A failing cell turns into failed rows; the other cells still run.
pub fn run_experiment(exp: &Experiment, jobs: usize) -> Result<Table, rayon::ThreadPoolBuildError> {
    let cells: Vec<(f64, f64)> = exp
        .config
        .dt
        .iter()
        .flat_map(|&dt| exp.config.t_end.iter().map(move |&t| (dt, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let rows: Vec<Vec<Row>> = pool.install(|| cells.par_iter().map(|&(dt, t)| run_cell(exp, dt, t)).collect());
    Ok(Table { rows: rows.into_iter().flatten().collect() })
}

fn shared_work(exp: &Experiment, dt: f64, t_end: f64) -> adjoint_dae::Result<(Trajectory64, ReferenceOutcome<f64>)> {
    let t0 = exp.problem.initial_conditions().t0;
    let grid = TimeGrid64::with_step(t0, t_end, dt)?;
    let traj = bdf1_solve(exp.problem.as_ref(), grid, exp.newton)?;
    let reference = reference_qoi_error(exp.problem.as_ref(), &traj, &exp.qoi, exp.config.r, &exp.reference)?;
    Ok((traj, reference))
}

fn estimate(
    exp: &Experiment,
    traj: &Trajectory64,
    reference: &ReferenceOutcome<f64>,
    path: AdjointPath,
) -> adjoint_dae::Result<RowValues> {
    let problem = exp.problem.as_ref();
    let adjoint = solve_adjoint_backward(problem, traj, &exp.qoi, path, exp.config.r)?;
    let initial = exp.initial_error.as_ref().map(|(y, z)| (y.as_slice(), z.as_slice()));
    let report = estimate_error_with(problem, traj, &exp.qoi, &adjoint, initial)?.with_reference(reference.error)?;
    Ok(RowValues {
        estimate: report.total,
        reference_error: report.reference_error,
        effectivity: report.effectivity,
        terms: report.terms.iter().map(|t| (t.name.to_string(), t.value)).collect(),
    })
}

/// The forward solve and reference are shared by every method in the cell,
/// so each row's wall time includes them.
fn run_cell(exp: &Experiment, dt: f64, t_end: f64) -> Vec<Row> {
    let start = Instant::now();
    let shared = shared_work(exp, dt, t_end);
    let shared_ms = start.elapsed().as_secs_f64() * 1e3;
    exp.config
        .method
        .paths()
        .iter()
        .map(|&path| {
            let start = Instant::now();
            let outcome = match &shared {
                Ok((traj, reference)) => match estimate(exp, traj, reference, path) {
                    Ok(values) => Outcome::Ok(values),
                    Err(e) => Outcome::Failed(e.to_string()),
                },
                Err(e) => Outcome::Failed(e.to_string()),
            };
            Row {
                problem: exp.config.problem.clone(),
                dt,
                t_end,
                method: path,
                outcome,
                wall_ms: shared_ms + start.elapsed().as_secs_f64() * 1e3,
            }
        })
        .collect()
}
