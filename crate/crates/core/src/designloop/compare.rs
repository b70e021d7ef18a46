//! Differences between the best designs of two sweeps.

use serde::{Deserialize, Serialize};

use super::sweep::SweepResult;

/// One quantity in a base and an alternative scenario.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDelta {
    pub base: f64,
    pub other: f64,
    pub abs: f64,
    /// Relative change in percent; zero when the base is zero.
    pub pct: f64,
}

impl ScenarioDelta {
    pub fn new(base: f64, other: f64) -> Self {
        let abs = other - base;
        let pct = if base == 0.0 { 0.0 } else { 100.0 * abs / base };
        Self { base, other, abs, pct }
    }
}

/// Best-design deltas from `base` to `other`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub base: String,
    pub other: String,
    pub tco: ScenarioDelta,
    pub c_comp: ScenarioDelta,
    pub c_el: ScenarioDelta,
    /// Ratio that sizes the gearbox (`gamma_fgt` or `gamma_max`).
    pub gamma: ScenarioDelta,
    pub p_em_max: ScenarioDelta,
    pub e_b_max: ScenarioDelta,
    pub m_v: ScenarioDelta,
}

fn scenario_name(s: &SweepResult) -> String {
    format!("{} {}", s.label, s.transmission)
}

pub fn compare_scenarios(base: &SweepResult, other: &SweepResult) -> TrendReport {
    let a = base.best_design();
    let b = other.best_design();
    TrendReport {
        base: scenario_name(base),
        other: scenario_name(other),
        tco: ScenarioDelta::new(a.costs.tco, b.costs.tco),
        c_comp: ScenarioDelta::new(a.costs.c_comp, b.costs.c_comp),
        c_el: ScenarioDelta::new(a.costs.c_op, b.costs.c_op),
        gamma: ScenarioDelta::new(a.ratio.sizing(), b.ratio.sizing()),
        p_em_max: ScenarioDelta::new(a.p_em_max, b.p_em_max),
        e_b_max: ScenarioDelta::new(a.e_b_max, b.e_b_max),
        m_v: ScenarioDelta::new(a.m_v(), b.m_v()),
    }
}
