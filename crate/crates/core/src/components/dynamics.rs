//! Quasi-static longitudinal dynamics and the driveline power split.

use super::params::VehicleParams;
use crate::cycle::DriveCycle;

/// Power at the wheels for one operating point [W].
///
/// `P_req = (m (a + c_rr g cos(theta) + g sin(theta)) + 0.5 rho_a c_d A_f v^2) v`.
pub fn tractive_power(params: &VehicleParams, m: f64, v: f64, a: f64, theta: f64) -> f64 {
    let inertial = m * (a + params.c_rr * params.g * theta.cos() + params.g * theta.sin());
    let aero = 0.5 * params.rho_a * params.c_d * params.a_f * v * v;
    (inertial + aero) * v
}

/// Required propulsion power per cycle sample [W].
pub fn required_power(cycle: &DriveCycle, params: &VehicleParams, m: f64) -> Vec<f64> {
    cycle
        .speed()
        .iter()
        .zip(cycle.accel())
        .zip(cycle.grade())
        .map(|((&v, &a), &th)| tractive_power(params, m, v, a, th))
        .collect()
}

/// Lower bound on motor power implied by the relaxed driveline equation.
///
/// Motoring needs `P_req / eta`; braking lets the motor absorb at most
/// `eta R_b P_req`. The result is clipped below at `-p_em_max`.
pub fn motor_power_bound(params: &VehicleParams, p_req: f64, p_em_max: f64) -> f64 {
    let eta = params.eta();
    (p_req / eta).max(p_req * eta * params.r_b).max(-p_em_max)
}

/// Exogenous motor power used to look up the loss coefficients [W].
pub fn exogenous_motor_power(
    cycle: &DriveCycle,
    params: &VehicleParams,
    m_bar: f64,
    p_em_max: f64,
) -> Vec<f64> {
    required_power(cycle, params, m_bar)
        .into_iter()
        .map(|p| motor_power_bound(params, p, p_em_max))
        .collect()
}

/// Exact driveline split into motor and friction-brake power.
///
/// `p_em_min` is the most negative motor power the envelope allows at this
/// operating point. Returns `(P_em, P_brake)` with `P_brake >= 0`, zero while
/// motoring.
pub fn split_driveline(params: &VehicleParams, p_req: f64, p_em_min: f64) -> (f64, f64) {
    let eta = params.eta();
    if p_req >= 0.0 {
        return (p_req / eta, 0.0);
    }
    if params.r_b == 0.0 {
        return (0.0, -p_req);
    }
    let p_em = (eta * params.r_b * p_req).max(p_em_min.min(0.0));
    let p_brake = p_em / (eta * params.r_b) - p_req;
    (p_em, p_brake.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn rest_needs_no_power() {
        assert_eq!(tractive_power(&presets::scooter(), 87.7, 0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn scooter_cruise() {
        let p = presets::scooter();
        let by_hand = (87.7 * 0.03 * 9.81 + 0.5 * 1.225 * 1.0 * 0.68 * 25.0) * 5.0;
        let flat = tractive_power(&p, 87.7, 5.0, 0.0, 0.0);
        assert_abs_diff_eq!(flat, by_hand, epsilon = 1e-9);
        assert_abs_diff_eq!(flat, 181.1, epsilon = 0.05);
        let theta = 0.1f64.atan();
        let hill = tractive_power(&p, 87.7, 5.0, 0.0, theta);
        let grade_term = 87.7 * 9.81 * theta.sin() * 5.0;
        let rolling_change = 87.7 * 0.03 * 9.81 * (theta.cos() - 1.0) * 5.0;
        assert_abs_diff_eq!(hill - flat, grade_term + rolling_change, epsilon = 1e-9);
        assert_abs_diff_eq!(grade_term, 428.1, epsilon = 0.1);
    }

    #[test]
    fn exogenous_branches() {
        let p = presets::scooter();
        assert_abs_diff_eq!(motor_power_bound(&p, 100.0, 500.0), 100.0 / 0.97, epsilon = 1e-12);
        assert_abs_diff_eq!(motor_power_bound(&p, 100.0, 500.0), 103.09, epsilon = 0.005);
        assert_abs_diff_eq!(motor_power_bound(&p, -100.0, 500.0), -48.5, epsilon = 1e-12);
        assert_eq!(motor_power_bound(&p, 0.0, 500.0), 0.0);
        assert_eq!(motor_power_bound(&p, -5000.0, 500.0), -500.0);
    }

    #[test]
    fn no_regeneration_sends_braking_to_friction() {
        let p = VehicleParams { r_b: 0.0, ..presets::scooter() };
        assert_eq!(motor_power_bound(&p, -100.0, 500.0), 0.0);
        assert_eq!(split_driveline(&p, -100.0, -500.0), (0.0, 100.0));
    }

    #[test]
    fn split_clamped_by_envelope() {
        let p = presets::scooter();
        let (p_em, brake) = split_driveline(&p, -1000.0, -200.0);
        assert_eq!(p_em, -200.0);
        assert_abs_diff_eq!(brake, -200.0 / (0.97 * 0.5) + 1000.0, epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn split_satisfies_driveline_equation(p_req in -3000.0f64..3000.0, lim in 0.0f64..3000.0, r_b in 0.0f64..=1.0) {
            let p = VehicleParams { r_b, ..presets::scooter() };
            let (p_em, brake) = split_driveline(&p, p_req, -lim);
            prop_assert!(brake >= 0.0);
            if p_em >= 0.0 && p_req >= 0.0 {
                prop_assert_eq!(brake, 0.0);
                prop_assert!((p.eta() * p_em - p_req).abs() < 1e-9);
            } else if r_b > 0.0 {
                prop_assert!((p_em / (p.eta() * r_b) - brake - p_req).abs() < 1e-6);
            }
            prop_assert!(p_em >= -lim - 1e-12);
        }
    }
}
