//! Forward simulation of a finished design on the original models.
//!
//! The driveline split is applied exactly, motor losses come from the scaled
//! reference map, and internal battery power is the smaller root of the
//! equivalent-circuit quadratic with the open-circuit power taken from the cell
//! table (or, in substitution mode, from the affine fit the optimizer used).

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::components::battery::{internal_power, BatteryModel, BatteryPack};
use crate::components::dynamics::{required_power, split_driveline};
use crate::components::motor::{scale_motor, MotorModel, ScaledMotor};
use crate::components::params::VehicleParams;
use crate::cycle::DriveCycle;
use crate::designloop::DesignPoint;
use crate::error::{Error, Result};

/// Relative slack allowed on envelope checks.
const ENVELOPE_TOL: f64 = 1e-6;

/// Source of the open-circuit power during simulation.
#[derive(Clone, Copy, Debug)]
pub enum OpenCircuit<'a> {
    /// Cell-table pack model.
    Table(&'a BatteryPack),
    /// Affine fit, isolating the relaxation from the fit error.
    Fit(&'a BatteryModel),
}

impl OpenCircuit<'_> {
    fn p_oc(&self, e_b: f64, e_b_max: f64) -> f64 {
        match self {
            OpenCircuit::Table(pack) => pack.p_oc(e_b, e_b_max),
            OpenCircuit::Fit(model) => model.p_oc(e_b, e_b_max),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            OpenCircuit::Table(_) => "table",
            OpenCircuit::Fit(_) => "fit",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFlags {
    pub torque_limited: bool,
    pub power_limited: bool,
    pub overspeed: bool,
    /// Operating point outside the loss map; the lookup was clamped.
    pub map_clamped: bool,
    /// The pack cannot deliver the terminal power.
    pub cone_infeasible: bool,
}

impl StepFlags {
    pub fn any(&self) -> bool {
        self.torque_limited || self.power_limited || self.overspeed || self.map_clamped || self.cone_infeasible
    }
}

/// One simulated step; also the trace CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t_s: f64,
    pub v_mps: f64,
    pub p_req_w: f64,
    pub p_em_w: f64,
    pub p_brake_w: f64,
    pub gamma: f64,
    pub omega_radps: f64,
    pub torque_nm: f64,
    pub p_loss_w: f64,
    pub p_b_w: f64,
    pub p_oc_w: f64,
    pub p_i_w: f64,
    /// Battery energy at the start of the step.
    pub e_b_wh: f64,
    pub torque_limited: bool,
    pub power_limited: bool,
    pub overspeed: bool,
    pub map_clamped: bool,
    pub cone_infeasible: bool,
}

impl TraceRow {
    pub fn flags(&self) -> StepFlags {
        StepFlags {
            torque_limited: self.torque_limited,
            power_limited: self.power_limited,
            overspeed: self.overspeed,
            map_clamped: self.map_clamped,
            cone_infeasible: self.cone_infeasible,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub p_em_max: f64,
    pub e_b_max: f64,
    /// Gross mass of the final solve, used for the power demand [kg].
    pub m: f64,
    pub dt: f64,
    pub transmission: String,
    pub open_circuit: String,
    pub rows: Vec<TraceRow>,
    /// Battery energy at every sample, `N + 1` entries [Wh].
    pub e_b: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagCounts {
    pub torque_limited: usize,
    pub power_limited: usize,
    pub overspeed: usize,
    pub map_clamped: usize,
    pub cone_infeasible: usize,
}

impl SimulationTrace {
    /// Energy drawn over the cycle [Wh].
    pub fn delta_e(&self) -> f64 {
        self.e_b[0] - self.e_b[self.e_b.len() - 1]
    }

    pub fn flag_counts(&self) -> FlagCounts {
        let mut c = FlagCounts::default();
        for r in &self.rows {
            c.torque_limited += r.torque_limited as usize;
            c.power_limited += r.power_limited as usize;
            c.overspeed += r.overspeed as usize;
            c.map_clamped += r.map_clamped as usize;
            c.cone_infeasible += r.cone_infeasible as usize;
        }
        c
    }

    pub fn is_feasible(&self) -> bool {
        self.rows.iter().all(|r| !r.flags().any())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Simulates `design` on `cycle`.
///
/// The cycle must have the same number of steps as the design's trajectories;
/// the ratio per step is replayed from them.
pub fn simulate(
    design: &DesignPoint,
    cycle: &DriveCycle,
    params: &VehicleParams,
    motor: &MotorModel,
    open_circuit: OpenCircuit,
) -> Result<SimulationTrace> {
    let steps = cycle.steps();
    let gamma = &design.trajectories.gamma;
    if gamma.len() != steps {
        return Err(Error::Validation(format!(
            "design has a ratio trajectory of {} steps but the cycle has {steps}",
            gamma.len()
        )));
    }
    let scaled = scale_motor(motor, design.p_em_max)?;
    let m = design.m_v_solve + params.m_d;
    let dt = cycle.dt();
    let p_req = required_power(cycle, params, m);
    let times = cycle.timestamps();
    let e_max = design.e_b_max;
    let mut e = params.zeta_max * e_max;
    let mut e_b = vec![e];
    let mut rows = Vec::with_capacity(steps);
    for k in 0..steps {
        let v = cycle.speed()[k];
        let omega = v * params.gamma_fd / params.r_w * gamma[k];
        let envelope = envelope(&scaled, omega);
        let (p_em, p_brake) = split_driveline(params, p_req[k], -envelope);
        let torque = if omega > 0.0 { p_em / omega } else { 0.0 };
        let mut flags = StepFlags {
            torque_limited: p_em.abs() > scaled.t_max() * omega * (1.0 + ENVELOPE_TOL) + ENVELOPE_TOL,
            power_limited: p_em.abs()
                > scaled.power_limit(omega).min(scaled.p_em_max) * (1.0 + ENVELOPE_TOL) + ENVELOPE_TOL,
            overspeed: omega > scaled.omega_max() * (1.0 + ENVELOPE_TOL),
            ..Default::default()
        };
        let p_loss = if omega > 0.0 {
            let l = scaled.map_loss(omega, torque);
            flags.map_clamped = l.clamped;
            l.loss
        } else {
            0.0
        };
        let p_b = p_em + p_loss + params.p_aux;
        let p_oc = open_circuit.p_oc(e, e_max);
        let p_i = match internal_power(p_oc, p_b) {
            Some(p) => p,
            None => {
                flags.cone_infeasible = true;
                p_oc / 2.0
            }
        };
        rows.push(TraceRow {
            t_s: times[k],
            v_mps: v,
            p_req_w: p_req[k],
            p_em_w: p_em,
            p_brake_w: p_brake,
            gamma: gamma[k],
            omega_radps: omega,
            torque_nm: torque,
            p_loss_w: p_loss,
            p_b_w: p_b,
            p_oc_w: p_oc,
            p_i_w: p_i,
            e_b_wh: e,
            torque_limited: flags.torque_limited,
            power_limited: flags.power_limited,
            overspeed: flags.overspeed,
            map_clamped: flags.map_clamped,
            cone_infeasible: flags.cone_infeasible,
        });
        e -= p_i * dt / 3600.0;
        e_b.push(e);
    }
    Ok(SimulationTrace {
        p_em_max: design.p_em_max,
        e_b_max: e_max,
        m,
        dt,
        transmission: design.transmission.clone(),
        open_circuit: open_circuit.name().into(),
        rows,
        e_b,
    })
}

/// Largest mechanical power magnitude the scaled motor delivers at `omega` [W].
fn envelope(motor: &ScaledMotor, omega: f64) -> f64 {
    (motor.t_max() * omega).min(motor.power_limit(omega)).min(motor.p_em_max).max(0.0)
}

/// Comparison of simulated and optimized consumption.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub p_em_max: f64,
    pub transmission: String,
    pub open_circuit: String,
    pub delta_e_opt_wh: f64,
    pub delta_e_sim_wh: f64,
    /// `|sim - opt| / opt` in percent.
    pub gap_pct: f64,
    pub flags: FlagCounts,
    pub min_soe: f64,
    pub mean_motoring_efficiency: f64,
}

pub fn summarize(design: &DesignPoint, trace: &SimulationTrace, motor: &MotorModel) -> Result<ValidationSummary> {
    let opt = design.delta_e;
    let sim = trace.delta_e();
    let points = operating_points(trace, motor)?;
    Ok(ValidationSummary {
        p_em_max: design.p_em_max,
        transmission: design.transmission.clone(),
        open_circuit: trace.open_circuit.clone(),
        delta_e_opt_wh: opt,
        delta_e_sim_wh: sim,
        gap_pct: if opt != 0.0 { 100.0 * (sim - opt).abs() / opt.abs() } else { 0.0 },
        flags: trace.flag_counts(),
        min_soe: trace.e_b.iter().copied().fold(f64::INFINITY, f64::min) / trace.e_b_max,
        mean_motoring_efficiency: points.mean_motoring_efficiency,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub step: usize,
    pub omega: f64,
    /// Negative while regenerating.
    pub torque: f64,
    pub efficiency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoints {
    pub transmission: String,
    pub points: Vec<OperatingPoint>,
    /// Mean map efficiency over motoring points; zero if there are none.
    pub mean_motoring_efficiency: f64,
    pub motoring: usize,
    pub regenerating: usize,
}

/// Moving-step operating points of a trace with their map efficiency.
pub fn operating_points(trace: &SimulationTrace, motor: &MotorModel) -> Result<OperatingPoints> {
    let scaled = scale_motor(motor, trace.p_em_max)?;
    let points: Vec<OperatingPoint> = trace
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.omega_radps > 0.0 && r.p_em_w != 0.0)
        .map(|(step, r)| OperatingPoint {
            step,
            omega: r.omega_radps,
            torque: r.torque_nm,
            efficiency: scaled.efficiency(r.omega_radps, r.torque_nm),
        })
        .collect();
    let motoring: Vec<f64> = points.iter().filter(|p| p.torque > 0.0).map(|p| p.efficiency).collect();
    let mean = if motoring.is_empty() { 0.0 } else { motoring.iter().sum::<f64>() / motoring.len() as f64 };
    Ok(OperatingPoints {
        transmission: trace.transmission.clone(),
        mean_motoring_efficiency: mean,
        motoring: motoring.len(),
        regenerating: points.len() - motoring.len(),
        points,
    })
}
