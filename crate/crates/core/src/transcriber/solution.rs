//! Solver results, relaxation residuals and the cost breakdown.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::program::ConicProgram;
use crate::components::battery::internal_power;
use crate::components::params::VehicleParams;
use crate::error::{Error, Result};

/// Relative slack below which a step counts as sitting on a box bound.
pub const CLAMP_TOL: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub solver: String,
    pub iterations: u32,
    pub solve_time_s: f64,
    /// Largest scaled constraint violation of the returned point.
    pub max_violation: f64,
    /// Raw status reported by the backend.
    pub raw_status: String,
}

/// Largest relaxation residuals over the steps that are not bound-clamped.
///
/// All residuals except `battery_cone` are divided by `P_em,max`;
/// `battery_cone` is `|(P_i - P_b) P_oc - P_i^2| / max(P_oc^2, 1)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// Slack of the active driveline branch.
    pub drive: f64,
    /// Slack of the loss inequality.
    pub loss: f64,
    /// Distance of `P_i` from the exact smaller root for the solved `P_b`.
    pub battery: f64,
    pub battery_cone: f64,
    /// Steps excluded because a box bound was active.
    pub clamped_steps: Vec<usize>,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.drive.max(self.loss).max(self.battery).max(self.battery_cone)
    }
}

/// Primal solution of a conic program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    /// Objective including the constant term [currency].
    pub objective: f64,
    pub x: Vec<f64>,
    pub stats: SolverStats,
    pub residuals: Option<Residuals>,
}

/// Solution exchange format: status, objective and named primal values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionEnvelope {
    pub status: SolveStatus,
    pub objective: f64,
    pub variables: BTreeMap<String, Vec<f64>>,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> &[f64] {
        &self.x[range]
    }

    pub fn variables(&self, program: &ConicProgram) -> BTreeMap<String, Vec<f64>> {
        program
            .layout
            .blocks()
            .into_iter()
            .map(|(name, r)| (name.to_string(), self.x[r].to_vec()))
            .collect()
    }

    pub fn to_envelope(&self, program: &ConicProgram) -> SolutionEnvelope {
        SolutionEnvelope { status: self.status, objective: self.objective, variables: self.variables(program) }
    }

    /// Rebuilds a solution from the exchange format; residuals are recomputed when optimal.
    pub fn from_envelope(program: &ConicProgram, env: &SolutionEnvelope) -> Result<Self> {
        let mut x = vec![0.0; program.n_vars()];
        for (name, range) in program.layout.blocks() {
            let values = env
                .variables
                .get(name)
                .ok_or_else(|| Error::Parse(format!("solution is missing variable `{name}`")))?;
            if values.len() != range.len() {
                return Err(Error::Parse(format!(
                    "variable `{name}` has {} values, expected {}",
                    values.len(),
                    range.len()
                )));
            }
            x[range].copy_from_slice(values);
        }
        let mut sol = Solution {
            status: env.status,
            objective: env.objective,
            stats: SolverStats {
                solver: "imported".into(),
                max_violation: program.max_violation(&x),
                ..Default::default()
            },
            x,
            residuals: None,
        };
        if sol.is_optimal() {
            sol.residuals = Some(relaxation_residuals(program, &sol));
        }
        Ok(sol)
    }
}

/// Per-step battery cone residual `|(P_i - P_b) P_oc - P_i^2| / max(P_oc^2, 1)`.
pub fn battery_cone_residual(solution: &Solution, program: &ConicProgram) -> Vec<f64> {
    let l = &program.layout;
    let [p1, p2] = program.meta.p_oc;
    let e_max = solution.x[l.e_b_max];
    (0..l.steps)
        .map(|k| {
            let p_i = solution.x[l.p_i.start + k];
            let p_b = solution.x[l.p_b.start + k];
            let p_oc = p1 * solution.x[l.e_b.start + k] + p2 * e_max;
            ((p_i - p_b) * p_oc - p_i * p_i).abs() / (p_oc * p_oc).max(1.0)
        })
        .collect()
}

/// Steps at which a box bound (motor envelope, internal power limit or SoE
/// limit) is active, so a relaxation may legitimately hold with slack.
pub fn clamped_steps(program: &ConicProgram, solution: &Solution) -> Vec<usize> {
    let l = &program.layout;
    let m = &program.meta;
    let x = &solution.x;
    let p_tol = CLAMP_TOL * m.p_em_max;
    let e_max = x[l.e_b_max];
    let e_tol = CLAMP_TOL * e_max.max(1.0);
    let [b1, b2] = m.p_i_max;
    (0..l.steps)
        .filter(|&k| {
            let p_em = x[l.p_em.start + k];
            let w = program.exogenous.omega_per_ratio[k] * x[l.gamma_at(k)];
            let envelope = (m.t_em_max * w).min(m.km1 * w + m.km2).min(m.p_em_max);
            let p_i = x[l.p_i.start + k];
            let p_i_max = b1 * x[l.e_b.start + k] + b2 * e_max;
            let e_next = x[l.e_b.start + k + 1];
            let e_now = x[l.e_b.start + k];
            (w > 0.0 && envelope - p_em.abs() <= p_tol)
                || p_i_max - p_i.abs() <= p_tol
                || (e_max - e_next).abs() <= e_tol
                || (e_max - e_now).abs() <= e_tol && p_i < 0.0
        })
        .collect()
}

/// Relaxation residuals at an optimal point.
pub fn relaxation_residuals(program: &ConicProgram, solution: &Solution) -> Residuals {
    let l = &program.layout;
    let m = &program.meta;
    let exo = &program.exogenous;
    let x = &solution.x;
    let clamped = clamped_steps(program, solution);
    let cone = battery_cone_residual(solution, program);
    let [p1, p2] = m.p_oc;
    let e_max = x[l.e_b_max];
    let mut out = Residuals { clamped_steps: clamped.clone(), ..Default::default() };
    let mut is_clamped = vec![false; l.steps];
    for k in clamped {
        is_clamped[k] = true;
    }
    for k in 0..l.steps {
        if is_clamped[k] {
            continue;
        }
        let p_em = x[l.p_em.start + k];
        let p_dc = x[l.p_dc.start + k];
        let p_b = x[l.p_b.start + k];
        let p_i = x[l.p_i.start + k];
        let w = exo.omega_per_ratio[k] * x[l.gamma_at(k)];
        // The exogenous motor power is the active driveline lower bound; where
        // it is clipped at -P_em,max the step is clamped and skipped above.
        out.drive = out.drive.max((p_em - exo.p_em_bar[k]).abs() / m.p_em_max);
        let loss = if exo.omega_per_ratio[k] == 0.0 {
            0.0
        } else {
            let [a1, a2, a3] = exo.loss_coeffs[k];
            a1 + a2 * w + a3 * w * w
        };
        out.loss = out.loss.max((p_dc - p_em - loss).abs() / m.p_em_max);
        let p_oc = p1 * x[l.e_b.start + k] + p2 * e_max;
        let exact = internal_power(p_oc, p_b).unwrap_or(p_oc / 2.0);
        out.battery = out.battery.max((p_i - exact).abs() / m.p_em_max);
        out.battery_cone = out.battery_cone.max(cone[k]);
    }
    out
}

/// Lifetime cost split [currency].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Electricity over the vehicle lifetime.
    pub c_op: f64,
    /// Battery, motor and fixed additional cost.
    pub c_comp: f64,
    pub tco: f64,
}

/// Operational and component costs of a solved design.
pub fn cost_breakdown(params: &VehicleParams, p_em_max: f64, e_b_max: f64, delta_e: f64, d_cycle: f64) -> CostBreakdown {
    let c_op = delta_e / 1000.0 * params.c_el * params.d_max_km * 1000.0 / d_cycle;
    let c_comp = params.c_bat * e_b_max / 1000.0 + params.c_em * p_em_max / 1000.0 + params.c_add;
    CostBreakdown { c_op, c_comp, tco: c_op + c_comp }
}

/// Cost breakdown of an optimal solution; checks it against the solver objective.
pub fn objective_breakdown(solution: &Solution, program: &ConicProgram, params: &VehicleParams) -> Result<CostBreakdown> {
    let l = &program.layout;
    let m = &program.meta;
    let costs = cost_breakdown(params, m.p_em_max, solution.x[l.e_b_max], solution.x[l.delta_e], m.d_cycle);
    let regularization = m.ratio_weight * solution.x[l.design_ratio()];
    let objective = program.objective_value(&solution.x);
    let gap = (objective - regularization - costs.tco).abs();
    if gap > 1e-6 * costs.tco.abs().max(1.0) {
        return Err(Error::Validation(format!(
            "cost breakdown {} differs from the program objective {} by {gap}",
            costs.tco,
            objective - regularization
        )));
    }
    Ok(costs)
}
