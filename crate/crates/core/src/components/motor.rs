//! Motor loss map, speed-polynomial loss coefficients and size scaling.
//!
//! The reference map is synthesized from a parametric loss shape
//! (copper + friction + iron + constant). Losses are then fitted, for each
//! mechanical power level, as a quadratic in motor speed along the
//! constant-power contour. A motor of another size reuses the table with all
//! powers, torques and coefficients scaled by `p_em_max / p_max_ref`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of speed points in a synthesized map.
pub const MAP_SPEED_POINTS: usize = 601;
/// Number of torque points in a synthesized map.
pub const MAP_TORQUE_POINTS: usize = 101;
/// Number of power levels in the coefficient table.
pub const POWER_LEVELS: usize = 201;
/// Share of excluded power levels above which the fit is rejected.
const MAX_EXCLUDED_SHARE: f64 = 0.10;
const ENVELOPE_TOL: f64 = 1e-9;

/// Parametric loss `c_cu T^2 + c_fr w + c_fe w^2 + c_0` [W].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossShape {
    pub c_cu: f64,
    pub c_fr: f64,
    pub c_fe: f64,
    pub c_0: f64,
}

impl LossShape {
    pub fn loss(&self, omega: f64, torque: f64) -> f64 {
        self.c_cu * torque * torque + self.c_fr * omega + self.c_fe * omega * omega + self.c_0
    }
}

/// Rating and envelope of a motor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotorRating {
    /// Rated maximum mechanical power [W].
    pub p_max_ref: f64,
    /// Maximum torque [Nm].
    pub t_max_ref: f64,
    /// Maximum speed [rad/s].
    pub omega_max: f64,
    /// Slope of the power limit `k_m1 w + k_m2` [W s/rad], non-positive.
    pub km1_ref: f64,
    /// Offset of the power limit [W], non-negative.
    pub km2_ref: f64,
}

impl MotorRating {
    fn validate(&self) -> Result<()> {
        if !(self.p_max_ref > 0.0 && self.t_max_ref > 0.0 && self.omega_max > 0.0) {
            return Err(Error::Validation("motor rating must have positive power, torque and speed".into()));
        }
        if !(self.km1_ref <= 0.0 && self.km2_ref >= 0.0) {
            return Err(Error::Validation(format!(
                "power limit coefficients need k_m1 <= 0 and k_m2 >= 0, got {} and {}",
                self.km1_ref, self.km2_ref
            )));
        }
        Ok(())
    }

    /// Power limit `k_m1 w + k_m2` at speed `omega` [W].
    pub fn power_limit(&self, omega: f64) -> f64 {
        self.km1_ref * omega + self.km2_ref
    }

    /// Whether mechanical power `p` at speed `omega` lies inside the torque and power envelope.
    pub fn contains(&self, omega: f64, p: f64) -> bool {
        let tol = ENVELOPE_TOL * self.p_max_ref;
        p.abs() <= self.t_max_ref * omega + tol && p.abs() <= self.power_limit(omega) + tol
    }
}

/// Loss [W] tabulated on a rectangular speed x torque grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossMap {
    pub omega: Vec<f64>,
    pub torque: Vec<f64>,
    /// Row-major: `loss[i * torque.len() + j]` belongs to `(omega[i], torque[j])`.
    pub loss: Vec<f64>,
}

/// Result of a map lookup.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lookup {
    pub loss: f64,
    /// The query lay outside the grid and was clamped to its edge.
    pub clamped: bool,
}

fn bracket(axis: &[f64], x: f64) -> (usize, f64, bool) {
    let n = axis.len();
    let tol = ENVELOPE_TOL * (axis[n - 1] - axis[0]);
    if x <= axis[0] {
        return (0, 0.0, x < axis[0] - tol);
    }
    if x >= axis[n - 1] {
        return (n - 2, 1.0, x > axis[n - 1] + tol);
    }
    let i = axis.partition_point(|a| *a <= x) - 1;
    let i = i.min(n - 2);
    (i, (x - axis[i]) / (axis[i + 1] - axis[i]), false)
}

impl LossMap {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.loss[i * self.torque.len() + j]
    }

    /// Bilinear interpolation, clamped at the grid edges.
    pub fn lookup(&self, omega: f64, torque: f64) -> Lookup {
        let (i, u, ci) = bracket(&self.omega, omega);
        let (j, w, cj) = bracket(&self.torque, torque);
        let l00 = self.at(i, j);
        let l01 = self.at(i, j + 1);
        let l10 = self.at(i + 1, j);
        let l11 = self.at(i + 1, j + 1);
        let loss = (1.0 - u) * ((1.0 - w) * l00 + w * l01) + u * ((1.0 - w) * l10 + w * l11);
        Lookup { loss, clamped: ci || cj }
    }
}

/// Loss coefficients `(a1, a2, a3)` per mechanical power level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffTable {
    pub levels: Vec<f64>,
    /// `None` marks a level whose contour had too few points to fit.
    pub coeffs: Vec<Option<[f64; 3]>>,
}

impl CoeffTable {
    /// Coefficients of the included level nearest to `p` [W].
    pub fn nearest(&self, p: f64) -> [f64; 3] {
        let mut best = None;
        let mut best_dist = f64::INFINITY;
        for (level, c) in self.levels.iter().zip(&self.coeffs) {
            if let Some(c) = c {
                let d = (level - p).abs();
                if d < best_dist {
                    best_dist = d;
                    best = Some(*c);
                }
            }
        }
        best.expect("coefficient table has at least one fitted level")
    }

    pub fn excluded_levels(&self) -> Vec<f64> {
        self.levels
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, c)| c.is_none())
            .map(|(l, _)| *l)
            .collect()
    }
}

/// Reference motor: rating, loss map and (once fitted) the coefficient table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotorModel {
    pub rating: MotorRating,
    pub loss_map: LossMap,
    pub coeff_table: Option<CoeffTable>,
    /// Fit RMSE over the envelope grid points, divided by `p_max_ref`.
    pub fit_rmse_norm: Option<f64>,
    /// Where the map came from.
    pub source: String,
}

impl MotorModel {
    pub fn coefficients(&self) -> Result<&CoeffTable> {
        self.coeff_table
            .as_ref()
            .ok_or_else(|| Error::Fit("motor loss coefficients have not been fitted".into()))
    }

    /// Map efficiency: `P / (P + loss)` when motoring, `(P + loss) / P` when
    /// generating, zero at zero power.
    pub fn efficiency(&self, omega: f64, torque: f64) -> f64 {
        let p = omega * torque;
        let loss = self.loss_map.lookup(omega, torque).loss;
        if p > 0.0 {
            p / (p + loss)
        } else if p < 0.0 {
            ((p + loss) / p).max(0.0)
        } else {
            0.0
        }
    }
}

/// Tabulates `shape` over `[0, omega_max] x [-t_max_ref, t_max_ref]`.
pub fn synthesize_motor_map(shape: LossShape, rating: MotorRating) -> Result<MotorModel> {
    rating.validate()?;
    let coeffs = [shape.c_cu, shape.c_fr, shape.c_fe, shape.c_0];
    if coeffs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::Validation(format!("loss shape coefficients must be non-negative: {shape:?}")));
    }
    let omega = linspace(0.0, rating.omega_max, MAP_SPEED_POINTS);
    let torque = linspace(-rating.t_max_ref, rating.t_max_ref, MAP_TORQUE_POINTS);
    let mut loss = Vec::with_capacity(omega.len() * torque.len());
    for &w in &omega {
        for &t in &torque {
            let l = shape.loss(w, t);
            if l < 0.0 {
                return Err(Error::Validation(format!("loss shape is negative at w = {w}, T = {t}")));
            }
            loss.push(l);
        }
    }
    Ok(MotorModel {
        rating,
        loss_map: LossMap { omega, torque, loss },
        coeff_table: None,
        fit_rmse_norm: None,
        source: format!(
            "synthetic loss shape c_cu={} c_fr={} c_fe={} c_0={}",
            shape.c_cu, shape.c_fr, shape.c_fe, shape.c_0
        ),
    })
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Least-squares solution of `x * c = y`.
pub(crate) fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    x.clone()
        .svd(true, true)
        .solve(y, 1e-12)
        .map_err(|e| Error::Fit(format!("least-squares solve failed: {e}")))
}

fn fit_quadratic(points: &[(f64, f64)], omega_scale: f64) -> Result<[f64; 3]> {
    let n = points.len();
    let x = DMatrix::from_fn(n, 3, |r, c| (points[r].0 / omega_scale).powi(c as i32));
    let y = DVector::from_iterator(n, points.iter().map(|p| p.1));
    let c = least_squares(&x, &y)?;
    if c[2] >= 0.0 {
        return Ok([c[0], c[1] / omega_scale, c[2] / (omega_scale * omega_scale)]);
    }
    let x = DMatrix::from_fn(n, 2, |r, c| (points[r].0 / omega_scale).powi(c as i32));
    let c = least_squares(&x, &y)?;
    Ok([c[0], c[1] / omega_scale, 0.0])
}

/// Fits `a1 + a2 w + a3 w^2` (with `a3 >= 0`) to the loss along each
/// constant-power contour.
///
/// Contour points are the grid speeds `w > 0` at which the level lies inside
/// the torque and power envelope; the loss there is interpolated in torque.
pub fn fit_loss_coefficients(model: &MotorModel) -> Result<MotorModel> {
    let rating = model.rating;
    let levels = linspace(-rating.p_max_ref, rating.p_max_ref, POWER_LEVELS);
    let speeds: Vec<f64> = model.loss_map.omega.iter().copied().filter(|w| *w > 0.0).collect();
    let mut coeffs = Vec::with_capacity(levels.len());
    for &p in &levels {
        let points: Vec<(f64, f64)> = speeds
            .iter()
            .filter(|&&w| rating.contains(w, p))
            .map(|&w| (w, model.loss_map.lookup(w, p / w).loss))
            .collect();
        if points.len() < 3 {
            coeffs.push(None);
            continue;
        }
        coeffs.push(Some(fit_quadratic(&points, rating.omega_max)?));
    }
    let table = CoeffTable { levels, coeffs };
    let excluded = table.excluded_levels();
    if excluded.len() as f64 > MAX_EXCLUDED_SHARE * table.levels.len() as f64 {
        return Err(Error::Fit(format!(
            "{} of {} power levels have fewer than 3 contour points",
            excluded.len(),
            table.levels.len()
        )));
    }
    if !excluded.is_empty() {
        log::info!("motor fit excluded {} power levels: {:?}", excluded.len(), excluded);
    }
    let mut fitted = MotorModel { coeff_table: Some(table), ..model.clone() };
    fitted.fit_rmse_norm = Some(fit_rmse_norm(&fitted)?);
    Ok(fitted)
}

/// RMSE of the coefficient table against the map at every grid point with
/// `w > 0` inside the envelope and `|P| <= p_max_ref`, divided by `p_max_ref`.
pub fn fit_rmse_norm(model: &MotorModel) -> Result<f64> {
    let table = model.coefficients()?;
    let rating = model.rating;
    let map = &model.loss_map;
    let mut sq = 0.0;
    let mut count = 0usize;
    for (i, &w) in map.omega.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        for (j, &t) in map.torque.iter().enumerate() {
            let p = w * t;
            if !rating.contains(w, p) || p.abs() > rating.p_max_ref {
                continue;
            }
            let [a1, a2, a3] = table.nearest(p);
            let err = a1 + a2 * w + a3 * w * w - map.at(i, j);
            sq += err * err;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Fit("no map points inside the envelope".into()));
    }
    Ok((sq / count as f64).sqrt() / rating.p_max_ref)
}

/// A reference motor scaled to another rated power.
#[derive(Clone, Debug)]
pub struct ScaledMotor<'a> {
    pub model: &'a MotorModel,
    pub p_em_max: f64,
}

/// Scales torque, power limits, coefficients and map losses by `p_em_max / p_max_ref`.
pub fn scale_motor(model: &MotorModel, p_em_max: f64) -> Result<ScaledMotor<'_>> {
    if !(p_em_max > 0.0 && p_em_max.is_finite()) {
        return Err(Error::Validation(format!("motor size must be positive, got {p_em_max}")));
    }
    model.coefficients()?;
    Ok(ScaledMotor { model, p_em_max })
}

impl<'a> ScaledMotor<'a> {
    pub fn scale(&self) -> f64 {
        self.p_em_max / self.model.rating.p_max_ref
    }

    pub fn rescale(&self, p_em_max: f64) -> Result<ScaledMotor<'a>> {
        scale_motor(self.model, p_em_max)
    }

    pub fn t_max(&self) -> f64 {
        self.model.rating.t_max_ref * self.scale()
    }

    pub fn km1(&self) -> f64 {
        self.model.rating.km1_ref * self.scale()
    }

    pub fn km2(&self) -> f64 {
        self.model.rating.km2_ref * self.scale()
    }

    pub fn omega_max(&self) -> f64 {
        self.model.rating.omega_max
    }

    /// Loss coefficients for exogenous motor power `p_bar` [W].
    pub fn coefficients(&self, p_bar: f64) -> [f64; 3] {
        let s = self.scale();
        let table = self.model.coeff_table.as_ref().expect("checked in scale_motor");
        table.nearest(p_bar / s).map(|a| a * s)
    }

    /// Polynomial loss prediction at speed `omega` for exogenous power `p_bar` [W].
    pub fn polynomial_loss(&self, p_bar: f64, omega: f64) -> f64 {
        let [a1, a2, a3] = self.coefficients(p_bar);
        a1 + a2 * omega + a3 * omega * omega
    }

    /// Map loss of the scaled motor at `(omega, torque)`.
    pub fn map_loss(&self, omega: f64, torque: f64) -> Lookup {
        let s = self.scale();
        let l = self.model.loss_map.lookup(omega, torque / s);
        Lookup { loss: l.loss * s, clamped: l.clamped }
    }

    pub fn efficiency(&self, omega: f64, torque: f64) -> f64 {
        self.model.efficiency(omega, torque / self.scale())
    }

    pub fn power_limit(&self, omega: f64) -> f64 {
        self.km1() * omega + self.km2()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference() -> MotorModel {
        synthesize_motor_map(presets::reference_loss_shape(), presets::reference_motor()).unwrap()
    }

    fn fitted() -> &'static MotorModel {
        static MODEL: std::sync::OnceLock<MotorModel> = std::sync::OnceLock::new();
        MODEL.get_or_init(|| fit_loss_coefficients(&reference()).unwrap())
    }

    #[test]
    fn standstill_loss_is_constant_term() {
        let m = reference();
        assert_eq!(m.loss_map.lookup(0.0, 0.0).loss, presets::reference_loss_shape().c_0);
    }

    #[test]
    fn copper_term_is_quadratic() {
        let shape = LossShape { c_cu: 3.0, c_fr: 0.0, c_fe: 0.0, c_0: 0.0 };
        assert_eq!(shape.loss(100.0, 4.0), 4.0 * shape.loss(100.0, 2.0));
    }

    #[test]
    fn negative_shape_rejected() {
        let shape = LossShape { c_cu: 1.0, c_fr: -1.0, c_fe: 0.0, c_0: 0.0 };
        assert!(matches!(synthesize_motor_map(shape, presets::reference_motor()), Err(Error::Validation(_))));
    }

    /// With the four-term loss shape the efficiency has no interior stationary
    /// point, so the grid maximum sits on the envelope boundary.
    #[test]
    fn peak_efficiency_on_envelope_boundary() {
        let m = reference();
        let r = m.rating;
        let map = &m.loss_map;
        let inside = |i: isize, j: isize| -> bool {
            if i < 1 || j < 0 || i >= map.omega.len() as isize || j >= map.torque.len() as isize {
                return false;
            }
            let (w, t) = (map.omega[i as usize], map.torque[j as usize]);
            t > 0.0 && r.contains(w, w * t)
        };
        let mut best = (0, 0, 0.0);
        for i in 1..map.omega.len() {
            for j in 0..map.torque.len() {
                if inside(i as isize, j as isize) {
                    let (w, t) = (map.omega[i], map.torque[j]);
                    let eta = w * t / (w * t + map.at(i, j));
                    if eta > best.2 {
                        best = (i, j, eta);
                    }
                }
            }
        }
        let (i, j) = (best.0 as isize, best.1 as isize);
        let on_boundary = [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|(di, dj)| !inside(i + di, j + dj));
        assert!(on_boundary);
        assert!(best.2 > 0.80 && best.2 < 0.90, "peak efficiency {}", best.2);
    }

    #[test]
    fn torque_independent_loss_fits_exactly() {
        let shape = LossShape { c_cu: 0.0, ..presets::reference_loss_shape() };
        let m = fit_loss_coefficients(&synthesize_motor_map(shape, presets::reference_motor()).unwrap()).unwrap();
        assert!(m.fit_rmse_norm.unwrap() < 1e-9);
        let [a1, a2, a3] = m.coeff_table.unwrap().nearest(300.0);
        assert_relative_eq!(a1, shape.c_0, max_relative = 1e-8);
        assert_relative_eq!(a2, shape.c_fr, max_relative = 1e-8);
        assert_relative_eq!(a3, shape.c_fe, max_relative = 1e-8);
    }

    #[test]
    fn reference_fit_quality() {
        let m = fitted();
        let table = m.coeff_table.as_ref().unwrap();
        assert!(m.fit_rmse_norm.unwrap() <= 0.03, "{:?}", m.fit_rmse_norm);
        assert!(table.coeffs.iter().flatten().all(|c| c[2] >= 0.0));
        assert!(table.excluded_levels().len() as f64 <= 0.1 * POWER_LEVELS as f64);
    }

    #[test]
    fn rmse_oracle_matches_direct_evaluation() {
        // Independent evaluation from the loss formula rather than the stored map.
        let m = fitted();
        let shape = presets::reference_loss_shape();
        let r = m.rating;
        let table = m.coeff_table.as_ref().unwrap();
        let mut sq = 0.0;
        let mut n = 0.0;
        for k in 1..MAP_SPEED_POINTS {
            let w = r.omega_max * k as f64 / (MAP_SPEED_POINTS - 1) as f64;
            for j in 0..MAP_TORQUE_POINTS {
                let t = -r.t_max_ref + 2.0 * r.t_max_ref * j as f64 / (MAP_TORQUE_POINTS - 1) as f64;
                let p = w * t;
                if p.abs() > r.p_max_ref || p.abs() > r.km1_ref * w + r.km2_ref + 1e-6 || p.abs() > r.t_max_ref * w + 1e-6 {
                    continue;
                }
                let c = table.nearest(p);
                let e = c[0] + c[1] * w + c[2] * w * w - shape.loss(w, t);
                sq += e * e;
                n += 1.0;
            }
        }
        assert_relative_eq!((sq / n).sqrt() / r.p_max_ref, m.fit_rmse_norm.unwrap(), max_relative = 1e-6);
    }

    #[test]
    fn adjacent_levels_are_continuous() {
        let m = fitted();
        let table = m.coeff_table.as_ref().unwrap();
        let fitted: Vec<(f64, [f64; 3])> = table
            .levels
            .iter()
            .zip(&table.coeffs)
            .filter_map(|(p, c)| c.map(|c| (*p, c)))
            .collect();
        let mut shared = 0;
        for pair in fitted.windows(2) {
            let ((p0, c0), (p1, c1)) = (pair[0], pair[1]);
            for &w in &m.loss_map.omega {
                if w <= 0.0 || !m.rating.contains(w, p0) || !m.rating.contains(w, p1) {
                    continue;
                }
                shared += 1;
                let l = |c: &[f64; 3]| c[0] + c[1] * w + c[2] * w * w;
                assert!((l(&c0) - l(&c1)).abs() < 0.01 * m.rating.p_max_ref, "levels {p0}/{p1} at w = {w}");
            }
        }
        assert!(shared > 1000);
    }

    #[test]
    fn scaling_identity_and_doubling() {
        let m = fitted();
        let same = scale_motor(m, m.rating.p_max_ref).unwrap();
        assert_eq!(same.t_max(), m.rating.t_max_ref);
        assert_eq!(same.coefficients(250.0), m.coeff_table.as_ref().unwrap().nearest(250.0));
        let double = scale_motor(m, 2.0 * m.rating.p_max_ref).unwrap();
        assert_eq!(double.t_max(), 2.0 * m.rating.t_max_ref);
        let base = same.coefficients(250.0);
        let scaled = double.coefficients(500.0);
        for k in 0..3 {
            assert_relative_eq!(scaled[k], 2.0 * base[k], max_relative = 1e-12);
        }
    }

    #[test]
    fn empty_contours_fail_the_fit() {
        let rating = MotorRating { km2_ref: 100.0, ..presets::reference_motor() };
        let m = synthesize_motor_map(presets::reference_loss_shape(), rating).unwrap();
        assert!(matches!(fit_loss_coefficients(&m), Err(Error::Fit(_))));
    }

    #[test]
    fn model_json_round_trip() {
        let m = fitted();
        let json = serde_json::to_string(m).unwrap();
        let back: MotorModel = serde_json::from_str(&json).unwrap();
        assert_eq!(&back, m);
    }

    proptest! {
        #[test]
        fn rescaling_back_is_identity(p in 100.0f64..5000.0, q in 100.0f64..5000.0, pbar in -900.0f64..900.0) {
            let m = fitted();
            let base = scale_motor(m, m.rating.p_max_ref).unwrap();
            let there = scale_motor(m, p).unwrap().rescale(q).unwrap().rescale(m.rating.p_max_ref).unwrap();
            prop_assert!((there.t_max() - base.t_max()).abs() <= 1e-12 * base.t_max());
            let (a, b) = (there.coefficients(pbar), base.coefficients(pbar));
            for k in 0..3 {
                prop_assert!((a[k] - b[k]).abs() <= 1e-12 * b[k].abs().max(1e-300));
            }
        }

        #[test]
        fn efficiency_is_size_invariant(p in 200.0f64..5000.0, rel_w in 0.05f64..1.0, rel_t in -1.0f64..1.0) {
            let m = fitted();
            let w = rel_w * m.rating.omega_max;
            let base = scale_motor(m, m.rating.p_max_ref).unwrap();
            let scaled = scale_motor(m, p).unwrap();
            let t_base = rel_t * base.t_max();
            let t_scaled = rel_t * scaled.t_max();
            let eff = |s: &ScaledMotor, t: f64| {
                let pm = w * t;
                let l = s.map_loss(w, t).loss;
                if pm >= 0.0 { pm / (pm + l) } else { (pm + l) / pm }
            };
            prop_assert!((eff(&base, t_base) - eff(&scaled, t_scaled)).abs() < 1e-12);
        }
    }
}
