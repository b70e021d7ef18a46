//! Motor-size sweep and selection of the lowest-TCO design.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fixed_point::{mass_fixed_point, DesignPoint, FixedPointSettings};
use super::solver::SolverAdapter;
use crate::components::battery::BatteryModel;
use crate::components::motor::MotorModel;
use crate::components::params::VehicleParams;
use crate::components::requirements::acceleration_power;
use crate::cycle::DriveCycle;
use crate::error::{Error, Infeasibility, Result};

/// Ascending grid `min, min + step, ...` up to and including `max` [W].
pub fn size_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(min > 0.0) || !(max >= min) || !(step > 0.0) {
        return Err(Error::Validation(format!(
            "grid needs 0 < min <= max and step > 0, got min {min}, max {max}, step {step}"
        )));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| min + i as f64 * step).collect())
}

/// Outcome of one motor size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SweepEntry {
    Feasible(Box<DesignPoint>),
    Infeasible(Infeasibility),
    /// Solver failure or non-convergence.
    Failed { p_em_max: f64, message: String },
}

impl SweepEntry {
    pub fn p_em_max(&self) -> f64 {
        match self {
            SweepEntry::Feasible(d) => d.p_em_max,
            SweepEntry::Infeasible(i) => i.p_em_max,
            SweepEntry::Failed { p_em_max, .. } => *p_em_max,
        }
    }

    pub fn design(&self) -> Option<&DesignPoint> {
        match self {
            SweepEntry::Feasible(d) => Some(d),
            _ => None,
        }
    }

    pub fn tco(&self) -> Option<f64> {
        self.design().map(|d| d.costs.tco)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub label: String,
    pub transmission: String,
    pub grid: Vec<f64>,
    pub entries: Vec<SweepEntry>,
    /// Index of the lowest-TCO feasible entry.
    pub best: usize,
}

impl SweepResult {
    pub fn best_design(&self) -> &DesignPoint {
        self.entries[self.best].design().expect("best entry is feasible")
    }

    pub fn feasible(&self) -> impl Iterator<Item = &DesignPoint> {
        self.entries.iter().filter_map(SweepEntry::design)
    }

    pub fn infeasible(&self) -> impl Iterator<Item = &Infeasibility> {
        self.entries.iter().filter_map(|e| match e {
            SweepEntry::Infeasible(i) => Some(i),
            _ => None,
        })
    }

    /// True when some sizes failed or were infeasible.
    pub fn is_partial(&self) -> bool {
        self.entries.iter().any(|e| e.design().is_none())
    }
}

/// Runs the mass fixed point for every grid size in parallel.
///
/// Sizes below the acceleration bound at the initial mass are marked without
/// solving. Fails only when no size is feasible; the error lists every size.
pub fn sweep(
    cycle: &DriveCycle,
    params: &VehicleParams,
    motor: &MotorModel,
    battery: &BatteryModel,
    grid: &[f64],
    settings: &FixedPointSettings,
    solver: &dyn SolverAdapter,
) -> Result<SweepResult> {
    params.validate()?;
    if grid.is_empty() {
        return Err(Error::Validation("motor size grid is empty".into()));
    }
    if let Some(w) = grid.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(Error::Validation(format!("motor size grid must be ascending ({} then {})", w[0], w[1])));
    }
    let m_start = settings.m_v0.unwrap_or(params.m_f + 3.0) + params.m_d;
    let accel_bound = acceleration_power(params, m_start);

    let entries: Vec<SweepEntry> = grid
        .par_iter()
        .map(|&p_em_max| {
            if p_em_max < accel_bound {
                return SweepEntry::Infeasible(Infeasibility {
                    p_em_max,
                    constraints: vec!["acceleration".into()],
                    detail: format!("needs P_em,max >= {accel_bound:.1} W at m = {m_start:.2} kg"),
                });
            }
            match mass_fixed_point(cycle, params, motor, battery, p_em_max, settings, solver) {
                Ok(d) => SweepEntry::Feasible(Box::new(d)),
                Err(Error::Infeasible(i)) => SweepEntry::Infeasible(i),
                Err(e) => SweepEntry::Failed { p_em_max, message: e.to_string() },
            }
        })
        .collect();

    let best = entries
        .iter()
        .enumerate()
        .filter_map(|(i, e)| e.tco().map(|t| (i, t)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);
    let Some(best) = best else {
        if let Some(SweepEntry::Failed { p_em_max, message }) =
            entries.iter().find(|e| matches!(e, SweepEntry::Failed { .. }))
        {
            return Err(Error::Solver(format!("no feasible motor size; P_em,max = {p_em_max} W: {message}")));
        }
        let records = entries
            .into_iter()
            .filter_map(|e| match e {
                SweepEntry::Infeasible(i) => Some(i),
                _ => None,
            })
            .collect();
        return Err(Error::SweepInfeasible(records));
    };
    for e in &entries {
        if let SweepEntry::Failed { p_em_max, message } = e {
            log::warn!("P_em,max = {p_em_max} W failed: {message}");
        }
    }
    Ok(SweepResult {
        label: cycle.label().to_string(),
        transmission: params.transmission.name().into(),
        grid: grid.to_vec(),
        entries,
        best,
    })
}
