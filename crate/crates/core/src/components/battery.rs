//! Equivalent-circuit battery pack and its affine open-circuit power fits.
//!
//! Battery energies are in Wh. The fitted coefficients are per Wh of energy,
//! so `P_oc = p1 E_b + p2 E_b,max` and `P_i,max = b1 E_b + b2 E_b,max` are in W.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::motor::{least_squares, linspace};
use crate::error::{Error, Result};

/// Normalized RMSE above which a fit is rejected.
pub const MAX_FIT_RMSE: f64 = 0.05;
const WINDOW_SAMPLES: usize = 101;

/// Cell equivalent circuit tabulated over state of energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellTable {
    pub soe: Vec<f64>,
    /// Open-circuit voltage [V].
    pub voc: Vec<f64>,
    /// Internal resistance [Ohm].
    pub r: Vec<f64>,
    /// Current limit [A].
    pub i_max: Vec<f64>,
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let n = xs.len();
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|a| *a <= x) - 1;
    let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + w * (ys[i + 1] - ys[i])
}

impl CellTable {
    /// Voltage affine in SoE from `v_empty` to `v_full`, constant resistance and current limit.
    pub fn affine_voc(v_empty: f64, v_full: f64, r: f64, i_max: f64, points: usize) -> Self {
        let soe = linspace(0.0, 1.0, points.max(2));
        let voc = soe.iter().map(|s| v_empty + (v_full - v_empty) * s).collect();
        let n = soe.len();
        Self { soe, voc, r: vec![r; n], i_max: vec![i_max; n] }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.soe.len();
        if n < 2 || self.voc.len() != n || self.r.len() != n || self.i_max.len() != n {
            return Err(Error::Validation("cell table columns must have equal length >= 2".into()));
        }
        if self.soe.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Validation("cell table SoE must be strictly increasing".into()));
        }
        if self.soe[0] > 0.0 || self.soe[n - 1] < 1.0 {
            return Err(Error::Validation("cell table must cover SoE in [0, 1]".into()));
        }
        if self.voc.iter().chain(&self.r).chain(&self.i_max).any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::Validation("cell voltage, resistance and current limit must be positive".into()));
        }
        Ok(())
    }

    pub fn voc_at(&self, soe: f64) -> f64 {
        interp(&self.soe, &self.voc, soe)
    }

    pub fn r_at(&self, soe: f64) -> f64 {
        interp(&self.soe, &self.r, soe)
    }

    pub fn i_max_at(&self, soe: f64) -> f64 {
        interp(&self.soe, &self.i_max, soe)
    }
}

/// Series/parallel arrangement of the reference pack.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackLayout {
    pub series: usize,
    pub parallel: usize,
    /// Cell capacity [Ah].
    pub capacity_ah: f64,
    /// Nominal pack voltage [V].
    pub v_nom: f64,
}

/// Reference pack built from a cell table. Larger packs add parallel strings,
/// so every power scales with `E_b,max / e_pack_ref` at fixed SoE.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryPack {
    pub cell: CellTable,
    pub layout: PackLayout,
}

impl BatteryPack {
    pub fn new(cell: CellTable, layout: PackLayout) -> Result<Self> {
        cell.validate()?;
        if layout.series == 0 || layout.parallel == 0 || !(layout.capacity_ah > 0.0 && layout.v_nom > 0.0) {
            return Err(Error::Validation("pack layout needs positive counts, capacity and voltage".into()));
        }
        Ok(Self { cell, layout })
    }

    /// Reference pack energy [Wh].
    pub fn e_pack_ref(&self) -> f64 {
        self.layout.capacity_ah * self.layout.parallel as f64 * self.layout.v_nom
    }

    /// Open-circuit power `Voc^2 / R` of the reference pack [W].
    pub fn reference_p_oc(&self, soe: f64) -> f64 {
        let ns = self.layout.series as f64;
        let np = self.layout.parallel as f64;
        let v = ns * self.cell.voc_at(soe);
        let r = ns * self.cell.r_at(soe) / np;
        v * v / r
    }

    /// Maximum internal power `Voc I_max` of the reference pack [W].
    pub fn reference_p_i_max(&self, soe: f64) -> f64 {
        let ns = self.layout.series as f64;
        let np = self.layout.parallel as f64;
        ns * self.cell.voc_at(soe) * np * self.cell.i_max_at(soe)
    }

    /// Open-circuit power of a pack with capacity `e_b_max` [Wh] at energy `e_b` [Wh].
    pub fn p_oc(&self, e_b: f64, e_b_max: f64) -> f64 {
        self.reference_p_oc(e_b / e_b_max) * e_b_max / self.e_pack_ref()
    }

    pub fn p_i_max(&self, e_b: f64, e_b_max: f64) -> f64 {
        self.reference_p_i_max(e_b / e_b_max) * e_b_max / self.e_pack_ref()
    }
}

/// Affine battery fits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryModel {
    /// `P_oc` coefficient on `E_b` [W/Wh].
    pub p1: f64,
    /// `P_oc` coefficient on `E_b,max` [W/Wh].
    pub p2: f64,
    /// `P_i,max` coefficient on `E_b` [W/Wh].
    pub b1: f64,
    /// `P_i,max` coefficient on `E_b,max` [W/Wh].
    pub b2: f64,
    pub e_pack_ref: f64,
    pub v_nom: f64,
    /// SoE window the fits were made over.
    pub window: [f64; 2],
    /// RMSE of the `P_oc` fit divided by the largest `P_oc` in the window.
    pub fit_rmse_norm: f64,
    /// Same measure for the `P_i,max` fit.
    pub p_i_max_rmse_norm: f64,
}

impl BatteryModel {
    pub fn p_oc(&self, e_b: f64, e_b_max: f64) -> f64 {
        self.p1 * e_b + self.p2 * e_b_max
    }

    pub fn p_i_max(&self, e_b: f64, e_b_max: f64) -> f64 {
        self.b1 * e_b + self.b2 * e_b_max
    }
}

/// Fits `y(soe) ~ c1 soe + c0` by least squares; returns `(c1, c0, normalized RMSE)`.
fn affine_fit(soe: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = soe.len();
    let x = DMatrix::from_fn(n, 2, |r, c| if c == 0 { soe[r] } else { 1.0 });
    let c = least_squares(&x, &DVector::from_column_slice(y))?;
    let sq: f64 = soe.iter().zip(y).map(|(s, y)| (c[0] * s + c[1] - y).powi(2)).sum();
    let scale = y.iter().copied().fold(0.0, f64::max);
    Ok((c[0], c[1], (sq / n as f64).sqrt() / scale))
}

/// Fits the affine `P_oc` and `P_i,max` models over the SoE window.
pub fn fit_battery(pack: &BatteryPack, window: [f64; 2]) -> Result<BatteryModel> {
    let [lo, hi] = window;
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(Error::Validation(format!("SoE window must satisfy 0 <= lo < hi <= 1, got {window:?}")));
    }
    let e_ref = pack.e_pack_ref();
    let soe = linspace(lo, hi, WINDOW_SAMPLES);
    let p_oc: Vec<f64> = soe.iter().map(|s| pack.reference_p_oc(*s) / e_ref).collect();
    let p_i: Vec<f64> = soe.iter().map(|s| pack.reference_p_i_max(*s) / e_ref).collect();
    let (p1, p2, rmse) = affine_fit(&soe, &p_oc)?;
    let (b1, b2, rmse_i) = affine_fit(&soe, &p_i)?;
    for (name, value) in [("P_oc", rmse), ("P_i,max", rmse_i)] {
        if value > MAX_FIT_RMSE {
            return Err(Error::Fit(format!(
                "affine {name} fit has normalized RMSE {:.2}% (> {:.0}%)",
                100.0 * value,
                100.0 * MAX_FIT_RMSE
            )));
        }
    }
    for s in [lo, hi] {
        if p1 * s + p2 <= 0.0 || b1 * s + b2 <= 0.0 {
            return Err(Error::Fit(format!("affine battery fit is non-positive at SoE {s}")));
        }
    }
    Ok(BatteryModel {
        p1,
        p2,
        b1,
        b2,
        e_pack_ref: e_ref,
        v_nom: pack.layout.v_nom,
        window,
        fit_rmse_norm: rmse,
        p_i_max_rmse_norm: rmse_i,
    })
}

/// Internal power drawn for terminal power `p_b` when the cone is tight: the
/// smaller root of `P_i^2 - P_oc P_i + P_oc P_b = 0`. `None` when the pack
/// cannot deliver `p_b`.
pub fn internal_power(p_oc: f64, p_b: f64) -> Option<f64> {
    let disc = p_oc * p_oc - 4.0 * p_oc * p_b;
    if disc < 0.0 {
        return None;
    }
    // Numerically stable form of (P_oc - sqrt(disc)) / 2.
    let root = disc.sqrt();
    Some(2.0 * p_oc * p_b / (p_oc + root))
}
