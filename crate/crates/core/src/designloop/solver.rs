//! Solver adapter contract and the Clarabel interior-point backend.

use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transcriber::solution::relaxation_residuals;
use crate::transcriber::{ConicProgram, Solution, SolveStatus, SolverStats};

/// Environment variable overriding both solver tolerances.
pub const TOLERANCE_ENV: &str = "MICROSIZE_SOLVER_TOL";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Primal/dual feasibility tolerance on the scaled data.
    pub feasibility: f64,
    /// Absolute and relative duality-gap tolerance.
    pub gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { feasibility: 1e-8, gap: 1e-8 }
    }
}

impl Tolerances {
    /// Applies `MICROSIZE_SOLVER_TOL` when set.
    pub fn with_env_override(self) -> Result<Self> {
        match std::env::var(TOLERANCE_ENV) {
            Ok(raw) => {
                let tol: f64 = raw
                    .trim()
                    .parse()
                    .map_err(|_| Error::Validation(format!("{TOLERANCE_ENV} is not a number: `{raw}`")))?;
                if !(tol > 0.0 && tol < 1.0) {
                    return Err(Error::Validation(format!("{TOLERANCE_ENV} must lie in (0, 1), got {tol}")));
                }
                Ok(Self { feasibility: tol, gap: tol })
            }
            Err(_) => Ok(self),
        }
    }
}

/// Anything that can solve a [`ConicProgram`].
///
/// Implementations must be deterministic for fixed inputs and must tolerate
/// concurrent calls.
pub trait SolverAdapter: Sync {
    fn name(&self) -> &str;

    fn solve(&self, program: &ConicProgram, tolerances: &Tolerances) -> Result<Solution>;
}

/// Clarabel interior-point solver.
#[derive(Clone, Debug)]
pub struct ClarabelAdapter {
    pub max_iter: u32,
    /// Largest scaled violation accepted from a reduced-accuracy solve.
    pub reduced_accuracy_violation: f64,
}

impl Default for ClarabelAdapter {
    fn default() -> Self {
        Self { max_iter: 200, reduced_accuracy_violation: 1e-6 }
    }
}

/// Stacks the program as `s = b - A x` with `s` in zero, non-negative and
/// second-order cones, in that order.
fn assemble(program: &ConicProgram) -> (CscMatrix<f64>, Vec<f64>, Vec<SupportedConeT<f64>>) {
    let n = program.n_vars();
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut b = Vec::new();
    let mut offset = 0;
    for block in [&program.eq, &program.ineq] {
        rows.extend(block.a.rows.iter().map(|r| r + offset));
        cols.extend_from_slice(&block.a.cols);
        vals.extend_from_slice(&block.a.vals);
        b.extend_from_slice(&block.b);
        offset += block.a.nrows;
    }
    let mut cones = vec![
        SupportedConeT::ZeroConeT(program.eq.len()),
        SupportedConeT::NonnegativeConeT(program.ineq.len()),
    ];
    // Cone rows are stored as A_c x + b_c, so the slack form needs -A_c.
    for cone in &program.cones {
        rows.extend(cone.a.rows.iter().map(|r| r + offset));
        cols.extend_from_slice(&cone.a.cols);
        vals.extend(cone.a.vals.iter().map(|v| -v));
        b.extend_from_slice(&cone.b);
        offset += cone.dim();
        cones.push(SupportedConeT::SecondOrderConeT(cone.dim()));
    }
    let a = CscMatrix::new_from_triplets(offset, n, rows, cols, vals);
    (a, b, cones)
}

impl SolverAdapter for ClarabelAdapter {
    fn name(&self) -> &str {
        "clarabel"
    }

    fn solve(&self, program: &ConicProgram, tolerances: &Tolerances) -> Result<Solution> {
        program.check()?;
        let n = program.n_vars();
        let (a, b, cones) = assemble(program);
        let p = CscMatrix::<f64>::zeros((n, n));
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(self.max_iter)
            .tol_feas(tolerances.feasibility)
            .tol_gap_abs(tolerances.gap)
            .tol_gap_rel(tolerances.gap)
            .build()
            .map_err(|e| Error::Solver(format!("invalid solver settings: {e:?}")))?;
        let started = Instant::now();
        let mut solver = DefaultSolver::new(&p, &program.objective, &a, &b, &cones, settings)
            .map_err(|e| Error::Solver(format!("solver setup failed: {e:?}")))?;
        solver.solve();
        let raw = solver.solution.status;
        let x = solver.solution.x.clone();
        let max_violation = program.max_violation(&x);
        let status = match raw {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::AlmostSolved if max_violation <= self.reduced_accuracy_violation => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            _ => SolveStatus::NumericalFailure,
        };
        let mut solution = Solution {
            status,
            objective: program.objective_value(&x),
            x,
            stats: SolverStats {
                solver: self.name().into(),
                iterations: solver.solution.iterations,
                solve_time_s: started.elapsed().as_secs_f64(),
                max_violation,
                raw_status: format!("{raw:?}"),
            },
            residuals: None,
        };
        if solution.is_optimal() {
            solution.residuals = Some(relaxation_residuals(program, &solution));
        }
        Ok(solution)
    }
}
