//! Performance requirements and the admissible transmission-ratio window.
//!
//! Ratios below are expressed in terms of the design ratio: `gamma_fgt` for a
//! fixed gear, `gamma_min` for a CVT (whose upper ratio is `c_f gamma_min`).

use serde::{Deserialize, Serialize};

use super::dynamics::{required_power, tractive_power};
use super::motor::ScaledMotor;
use super::params::{Transmission, VehicleParams};
use crate::cycle::DriveCycle;
use crate::error::Infeasibility;

/// Requirement bounds for one motor size and mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequirementReport {
    /// Smallest ratio (`gamma_fgt`, or `gamma_max` for a CVT) that can start on `theta_start`.
    pub grade_gamma_min: f64,
    /// Ratio band (`gamma_fgt`, or `gamma_min` for a CVT) that holds top speed on a flat road.
    pub top_speed_band: [f64; 2],
    /// Motor size needed to reach top speed within `t_acc` [W].
    pub accel_min_power: f64,
    pub accel_ok: bool,
}

/// Required wheel torque at top speed on a flat road [Nm].
pub fn top_speed_torque(params: &VehicleParams, m: f64) -> f64 {
    tractive_power(params, m, params.v_max, 0.0, 0.0) / params.v_max * params.r_w
}

/// Motor size needed for the acceleration requirement [W].
pub fn acceleration_power(params: &VehicleParams, m: f64) -> f64 {
    params.v_max * params.v_max * m / params.t_acc / params.eta()
}

/// Evaluates gradeability, top speed and acceleration.
pub fn check_requirements(
    params: &VehicleParams,
    p_em_max: f64,
    t_em_max: f64,
    km: (f64, f64),
    m: f64,
) -> RequirementReport {
    let eta = params.eta();
    let (km1, km2) = km;
    let grade_torque = m * params.g * params.theta_start_angle().sin() * params.r_w;
    let grade_gamma_min = grade_torque / (eta * t_em_max * params.gamma_fd);

    let t_req = top_speed_torque(params, m);
    let torque_lo = t_req / (t_em_max * eta * params.gamma_fd);
    let headroom = km2 * params.r_w / params.v_max - t_req / eta;
    let power_hi = if km1 < 0.0 {
        headroom / (-km1 * params.gamma_fd)
    } else if headroom >= 0.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    };

    let accel_min_power = acceleration_power(params, m);
    RequirementReport {
        grade_gamma_min,
        top_speed_band: [torque_lo, power_hi],
        accel_min_power,
        accel_ok: p_em_max * eta >= params.v_max * params.v_max * m / params.t_acc,
    }
}

/// One side of the ratio window with the constraint that sets it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioBound {
    pub value: f64,
    pub source: String,
}

/// Admissible design ratio (`gamma_fgt`, or `gamma_min` for a CVT).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioWindow {
    pub lower: RatioBound,
    pub upper: RatioBound,
}

impl RatioWindow {
    pub fn is_empty(&self) -> bool {
        !(self.lower.value <= self.upper.value)
    }
}

struct Band {
    lower: RatioBound,
    upper: RatioBound,
}

impl Band {
    fn new() -> Self {
        Self {
            lower: RatioBound { value: 0.0, source: "positivity".into() },
            upper: RatioBound { value: f64::INFINITY, source: "none".into() },
        }
    }

    fn raise(&mut self, value: f64, source: impl FnOnce() -> String) {
        if value > self.lower.value {
            self.lower = RatioBound { value, source: source() };
        }
    }

    fn cap(&mut self, value: f64, source: impl FnOnce() -> String) {
        if value < self.upper.value {
            self.upper = RatioBound { value, source: source() };
        }
    }
}

/// Interval analysis of every ratio constraint for a fixed motor and mass.
///
/// Motoring steps must satisfy the torque and power envelope at the drive
/// power `P_req / eta`; moving steps must respect the speed limit. Returns the
/// admissible window, or an infeasibility naming the binding constraints.
pub fn ratio_window(
    cycle: &DriveCycle,
    params: &VehicleParams,
    motor: &ScaledMotor,
    m_bar: f64,
) -> Result<RatioWindow, Infeasibility> {
    let p_em_max = motor.p_em_max;
    let report = check_requirements(params, p_em_max, motor.t_max(), (motor.km1(), motor.km2()), m_bar);
    let fail = |constraints: Vec<String>, detail: String| Infeasibility { p_em_max, constraints, detail };
    if !report.accel_ok {
        return Err(fail(
            vec!["acceleration".into()],
            format!("needs P_em,max >= {:.1} W at m = {:.2} kg", report.accel_min_power, m_bar),
        ));
    }

    let c_f = match params.transmission {
        Transmission::Fgt { .. } => 1.0,
        Transmission::Cvt { c_f, .. } => c_f,
    };
    let eta = params.eta();
    let k_speed = params.gamma_fd / params.r_w;

    // Design-ratio band (gamma_fgt or gamma_min) and the band every per-step
    // ratio must reach. For a CVT a per-step lower bound lo is reachable when
    // c_f gamma_min >= lo, and an upper bound hi when gamma_min <= hi.
    let mut band = Band::new();
    band.raise(report.grade_gamma_min / c_f, || "gradeability".into());
    band.raise(report.top_speed_band[0], || "top-speed torque".into());
    band.cap(report.top_speed_band[1], || "top-speed power".into());

    let p_req = required_power(cycle, params, m_bar);
    for (k, (&v, &p)) in cycle.speed().iter().zip(&p_req).enumerate().take(cycle.steps()) {
        if v <= 0.0 {
            continue;
        }
        let mut step = Band::new();
        step.cap(params.omega_em_max / (k_speed * v), || format!("overspeed (step {k})"));
        if p > 0.0 {
            let p_em = p / eta;
            if p_em > p_em_max || (motor.km1() == 0.0 && p_em > motor.km2()) {
                return Err(fail(
                    vec![format!("cycle power (step {k})")],
                    format!("step needs {p_em:.1} W of motor power"),
                ));
            }
            step.raise(p_em / (motor.t_max() * k_speed * v), || format!("cycle torque (step {k})"));
            if motor.km1() < 0.0 {
                step.cap((motor.km2() - p_em) / (-motor.km1() * k_speed * v), || format!("cycle power (step {k})"));
            }
        }
        if step.lower.value > step.upper.value {
            return Err(fail(
                vec![step.lower.source.clone(), step.upper.source.clone()],
                format!(
                    "step needs ratio >= {:.3} and <= {:.3}",
                    step.lower.value, step.upper.value
                ),
            ));
        }
        band.raise(step.lower.value / c_f, || step.lower.source.clone());
        band.cap(step.upper.value, || step.upper.source.clone());
    }

    let window = RatioWindow { lower: band.lower, upper: band.upper };
    if window.is_empty() {
        return Err(fail(
            vec![window.lower.source.clone(), window.upper.source.clone()],
            format!("ratio window [{:.3}, {:.3}] is empty", window.lower.value, window.upper.value),
        ));
    }
    Ok(window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_abs_diff_eq;

    #[test]
    fn scooter_acceleration_bound() {
        let p = presets::scooter();
        let r = check_requirements(&p, 590.0, 2.95, (-0.1475, 678.5), 87.7);
        let by_hand = (25.0f64 / 3.6).powi(2) * 87.7 / 7.5 / 0.97;
        assert_abs_diff_eq!(r.accel_min_power, by_hand, epsilon = 1e-9);
        assert_abs_diff_eq!(r.accel_min_power, 581.3, epsilon = 0.1);
        assert!(r.accel_ok);
        assert!(!check_requirements(&p, 580.0, 2.9, (-0.145, 667.0), 87.7).accel_ok);
    }

    #[test]
    fn scooter_gradeability_torque() {
        let p = presets::scooter();
        let r = check_requirements(&p, 590.0, 1.0, (-0.1475, 678.5), 87.7);
        // With T_max = 1 Nm the ratio bound equals the required torque at ratio 1.
        let torque_at = |gamma: f64| r.grade_gamma_min / gamma;
        let by_hand = 87.7 * 9.81 * (0.1f64.atan()).sin() * 0.125 / (0.97 * 5.91);
        assert_abs_diff_eq!(torque_at(5.91), by_hand, epsilon = 1e-12);
        assert_abs_diff_eq!(torque_at(5.91), 1.87, epsilon = 0.005);
    }

    #[test]
    fn flat_start_needs_no_ratio() {
        let p = VehicleParams { theta_start: 0.0, ..presets::scooter() };
        assert_eq!(check_requirements(&p, 590.0, 2.95, (-0.1475, 678.5), 87.7).grade_gamma_min, 0.0);
    }

    #[test]
    fn top_speed_band_edges() {
        let p = presets::scooter();
        let (t_max, km1, km2) = (2.95, -0.1475, 678.5);
        let r = check_requirements(&p, 590.0, t_max, (km1, km2), 87.7);
        let t_req = top_speed_torque(&p, 87.7);
        let [lo, hi] = r.top_speed_band;
        assert_abs_diff_eq!(t_req, t_max * 0.97 * lo, epsilon = 1e-12);
        assert_abs_diff_eq!(t_req, (km1 * hi + km2 * 0.125 / p.v_max) * 0.97, epsilon = 1e-9);
    }

    #[test]
    fn window_names_acceleration() {
        let model = crate::components::motor::fit_loss_coefficients(
            &crate::components::motor::synthesize_motor_map(presets::reference_loss_shape(), presets::reference_motor())
                .unwrap(),
        )
        .unwrap();
        let motor = crate::components::motor::scale_motor(&model, 400.0).unwrap();
        let cycle = presets::urban_cycle(presets::VehicleClass::Scooter).unwrap();
        let err = ratio_window(&cycle, &presets::scooter(), &motor, 87.7).unwrap_err();
        assert_eq!(err.constraints, vec!["acceleration".to_string()]);
    }
}
