//! Mass fixed point for one motor size.
//!
//! Starting from an initial vehicle mass, each iteration fixes the mass,
//! precomputes the loss coefficients, solves the conic program and recomputes
//! the vehicle mass from the solved battery capacity and ratio. The loop stops
//! once the mass used for the solve matches the mass it implies.

use serde::{Deserialize, Serialize};

use super::solver::{SolverAdapter, Tolerances};
use crate::components::battery::BatteryModel;
use crate::components::mass::{mass_closure, MassBreakdown};
use crate::components::motor::{scale_motor, MotorModel};
use crate::components::params::VehicleParams;
use crate::components::requirements::ratio_window;
use crate::cycle::DriveCycle;
use crate::error::{Error, Infeasibility, Result};
use crate::transcriber::{
    objective_breakdown, transcribe_with, ConicProgram, CostBreakdown, Residuals, Solution, SolveStatus,
    TranscribeOptions,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointSettings {
    /// Mass tolerance [kg].
    pub eps: f64,
    pub max_iter: usize,
    /// Initial vehicle mass [kg]; `None` uses frame mass + 3 kg.
    pub m_v0: Option<f64>,
    pub tolerances: Tolerances,
    pub transcription: TranscribeOptions,
}

impl Default for FixedPointSettings {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            max_iter: 25,
            m_v0: None,
            tolerances: Tolerances::default(),
            transcription: TranscribeOptions::default(),
        }
    }
}

/// Solved transmission design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RatioDesign {
    Fgt { gamma: f64 },
    Cvt { gamma_min: f64, gamma_max: f64 },
}

impl RatioDesign {
    /// Ratio that sets the gearbox mass (`gamma_fgt` or `gamma_max`).
    pub fn sizing(&self) -> f64 {
        match *self {
            RatioDesign::Fgt { gamma } => gamma,
            RatioDesign::Cvt { gamma_max, .. } => gamma_max,
        }
    }
}

/// Optimal control trajectories of a design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectories {
    /// Sample times [s], `N + 1` entries.
    pub time: Vec<f64>,
    pub speed: Vec<f64>,
    /// Battery energy [Wh], `N + 1` entries.
    pub e_b: Vec<f64>,
    /// Per-step values, `N` entries each [W].
    pub p_req: Vec<f64>,
    pub p_em: Vec<f64>,
    pub p_dc: Vec<f64>,
    pub p_b: Vec<f64>,
    pub p_i: Vec<f64>,
    /// Ratio per step.
    pub gamma: Vec<f64>,
    /// Motor speed per step [rad/s].
    pub omega: Vec<f64>,
}

/// One converged design for a motor size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub p_em_max: f64,
    /// Battery capacity [Wh].
    pub e_b_max: f64,
    /// Battery energy used over one cycle [Wh].
    pub delta_e: f64,
    pub ratio: RatioDesign,
    pub mass: MassBreakdown,
    /// Vehicle mass used for the final solve [kg].
    pub m_v_solve: f64,
    pub iterations: usize,
    /// Implied vehicle mass after each iteration, preceded by the initial guess [kg].
    pub trace: Vec<f64>,
    pub costs: CostBreakdown,
    pub transmission: String,
    pub d_cycle: f64,
    pub trajectories: Trajectories,
    pub residuals: Residuals,
    /// Residuals of every solve in the loop.
    pub residual_history: Vec<Residuals>,
    pub solver_iterations: Vec<u32>,
}

impl DesignPoint {
    pub fn m_v(&self) -> f64 {
        self.mass.m_v
    }

    /// Largest relaxation residual over every solve in the loop.
    pub fn worst_residual(&self) -> f64 {
        self.residual_history.iter().map(Residuals::max).fold(0.0, f64::max)
    }
}

fn extract(program: &ConicProgram, solution: &Solution, cycle: &DriveCycle, cvt: bool) -> (RatioDesign, Trajectories) {
    let l = &program.layout;
    let x = &solution.x;
    let exo = &program.exogenous;
    let steps = l.steps;
    let mut gamma: Vec<f64> = (0..steps).map(|k| x[l.gamma_at(k)]).collect();
    let ratio = if cvt {
        let gamma_min = x[l.design_ratio()];
        let coverage = match program.meta.encoding {
            crate::transcriber::RatioEncoding::PerStep { coverage } => coverage,
            crate::transcriber::RatioEncoding::Scalar => 1.0,
        };
        let gamma_max = coverage * gamma_min;
        // Standstill steps leave the ratio free; report them at gamma_max.
        for (k, g) in gamma.iter_mut().enumerate() {
            if exo.omega_per_ratio[k] == 0.0 {
                *g = gamma_max;
            }
        }
        RatioDesign::Cvt { gamma_min, gamma_max }
    } else {
        RatioDesign::Fgt { gamma: x[l.design_ratio()] }
    };
    let omega = gamma.iter().zip(&exo.omega_per_ratio).map(|(g, c)| g * c).collect();
    let traj = Trajectories {
        time: cycle.timestamps(),
        speed: cycle.speed().to_vec(),
        e_b: x[l.e_b.clone()].to_vec(),
        p_req: exo.p_req.clone(),
        p_em: x[l.p_em.clone()].to_vec(),
        p_dc: x[l.p_dc.clone()].to_vec(),
        p_b: x[l.p_b.clone()].to_vec(),
        p_i: x[l.p_i.clone()].to_vec(),
        gamma,
        omega,
    };
    (ratio, traj)
}

/// Runs the mass fixed point for motor size `p_em_max` [W].
pub fn mass_fixed_point(
    cycle: &DriveCycle,
    params: &VehicleParams,
    motor: &MotorModel,
    battery: &BatteryModel,
    p_em_max: f64,
    settings: &FixedPointSettings,
    solver: &dyn SolverAdapter,
) -> Result<DesignPoint> {
    params.validate()?;
    if settings.max_iter == 0 || !(settings.eps > 0.0) {
        return Err(Error::Validation("fixed point needs max_iter >= 1 and eps > 0".into()));
    }
    let scaled = scale_motor(motor, p_em_max)?;
    let cvt = params.transmission.is_cvt();
    let m_v0 = settings.m_v0.unwrap_or(params.m_f + 3.0);
    if !(m_v0 > 0.0) {
        return Err(Error::Validation(format!("initial vehicle mass must be positive, got {m_v0}")));
    }

    let mut m_v_star = m_v0;
    let mut m_v_bar = 0.0;
    let mut trace = vec![m_v0];
    let mut residual_history = Vec::new();
    let mut solver_iterations = Vec::new();
    let mut last = None;
    let mut iterations = 0;
    while (m_v_bar - m_v_star).abs() >= settings.eps {
        if iterations == settings.max_iter {
            return Err(Error::NonConvergence { iterations, trace });
        }
        iterations += 1;
        m_v_bar = m_v_star;
        let m_bar = m_v_bar + params.m_d;
        ratio_window(cycle, params, &scaled, m_bar).map_err(Error::Infeasible)?;

        let program = transcribe_with(cycle, params, &scaled, battery, m_bar, settings.transcription)?;
        let solution = solver.solve(&program, &settings.tolerances)?;
        match solution.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => {
                return Err(Error::Infeasible(Infeasibility {
                    p_em_max,
                    constraints: vec!["battery".into()],
                    detail: format!(
                        "ratio window is non-empty but the program is infeasible at m = {m_bar:.3} kg \
                         (internal power or state-of-energy limits)"
                    ),
                }))
            }
            SolveStatus::NumericalFailure => {
                return Err(Error::Solver(format!(
                    "{} returned {} at P_em,max = {p_em_max} W, m = {m_bar:.3} kg",
                    solution.stats.solver, solution.stats.raw_status
                )))
            }
        }
        let l = &program.layout;
        let (ratio, _) = extract(&program, &solution, cycle, cvt);
        let e_b_max = solution.x[l.e_b_max];
        m_v_star = mass_closure(params, p_em_max, e_b_max, ratio.sizing()).m_v;
        trace.push(m_v_star);
        residual_history.push(solution.residuals.clone().unwrap_or_default());
        solver_iterations.push(solution.stats.iterations);
        log::debug!("P_em,max = {p_em_max} W iteration {iterations}: m_v {m_v_bar:.6} -> {m_v_star:.6} kg");
        last = Some((program, solution, m_v_bar));
    }

    let (program, solution, m_v_solve) = last.expect("loop runs at least once");
    let l = &program.layout;
    let (ratio, trajectories) = extract(&program, &solution, cycle, cvt);
    let e_b_max = solution.x[l.e_b_max];
    let costs = objective_breakdown(&solution, &program, params)?;
    Ok(DesignPoint {
        p_em_max,
        e_b_max,
        delta_e: solution.x[l.delta_e],
        mass: mass_closure(params, p_em_max, e_b_max, ratio.sizing()),
        ratio,
        m_v_solve,
        iterations,
        trace,
        costs,
        transmission: params.transmission.name().into(),
        d_cycle: cycle.distance(),
        trajectories,
        residuals: solution.residuals.clone().unwrap_or_default(),
        residual_history,
        solver_iterations,
    })
}
