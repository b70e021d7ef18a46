//! Exhaustive grid search over design and control for very short cycles.
//!
//! Evaluates the exact (unrelaxed) driveline, loss and battery equations at
//! every grid point and keeps the cheapest feasible one.

use microsize::components::battery::BatteryModel;
use microsize::components::motor::ScaledMotor;
use microsize::components::params::VehicleParams;
use microsize::cycle::DriveCycle;

#[allow(dead_code)]
pub struct GridOptimum {
    pub objective: f64,
    pub gamma: f64,
    pub e_b_max: f64,
    pub evaluated: usize,
}

pub struct Grid {
    pub gamma: Vec<f64>,
    pub e_b_max: Vec<f64>,
    /// Extra motor power above the driveline demand tried at each step [W].
    pub p_em_offsets: Vec<f64>,
}

fn demand(params: &VehicleParams, m: f64, v: f64, a: f64, theta: f64) -> f64 {
    let resist = m * (a + params.c_rr * params.g * theta.cos() + params.g * theta.sin());
    (resist + 0.5 * params.rho_a * params.c_d * params.a_f * v * v) * v
}

pub fn search(
    cycle: &DriveCycle,
    params: &VehicleParams,
    motor: &ScaledMotor,
    battery: &BatteryModel,
    m: f64,
    ratio_weight: f64,
    grid: &Grid,
) -> Option<GridOptimum> {
    let steps = cycle.steps();
    assert!(steps <= 12, "grid search is exponential in the horizon");
    let eta = params.eta();
    let p_max = motor.p_em_max;
    let dt = cycle.dt();
    let d_cycle: f64 = cycle.speed().iter().map(|v| v * dt).sum();
    let p_req: Vec<f64> = (0..steps)
        .map(|k| demand(params, m, cycle.speed()[k], cycle.accel()[k], cycle.grade()[k]))
        .collect();
    let p_bar: Vec<f64> =
        p_req.iter().map(|p| (p / eta).max(eta * params.r_b * p).max(-p_max)).collect();
    let coeffs: Vec<[f64; 3]> = p_bar.iter().map(|p| motor.coefficients(*p)).collect();

    let theta = params.theta_start.atan();
    let grade_need = m * params.g * theta.sin() * params.r_w;
    let top_torque = demand(params, m, params.v_max, 0.0, 0.0) / params.v_max * params.r_w;
    let wheel_torque = eta * motor.t_max() * params.gamma_fd;
    let range_factor = params.d_exp_km * 1000.0 / (d_cycle * (1.0 - params.zeta_min));
    let op_rate = params.c_el / 1000.0 * params.d_max_km * 1000.0 / d_cycle;
    let constant = params.c_em * p_max / 1000.0 + params.c_add;

    let choices = grid.p_em_offsets.len();
    let combos = choices.pow(steps as u32);
    let mut best: Option<GridOptimum> = None;
    let mut evaluated = 0;
    for &gamma in &grid.gamma {
        if gamma < 0.0
            || gamma * wheel_torque < grade_need
            || gamma * wheel_torque < top_torque
            || eta * (motor.km1() * params.gamma_fd * gamma / params.r_w * params.v_max + motor.km2())
                < top_torque * params.v_max / params.r_w
        {
            continue;
        }
        let omega: Vec<f64> = cycle.speed()[..steps].iter().map(|v| v * params.gamma_fd / params.r_w * gamma).collect();
        if omega.iter().any(|w| *w > motor.omega_max()) {
            continue;
        }
        'combo: for combo in 0..combos {
            let mut p_em = vec![0.0; steps];
            let mut code = combo;
            for k in 0..steps {
                p_em[k] = p_bar[k] + grid.p_em_offsets[code % choices];
                code /= choices;
                let limit = (motor.t_max() * omega[k]).min(motor.km1() * omega[k] + motor.km2()).min(p_max);
                if p_em[k] < p_req[k] / eta - 1e-9
                    || p_em[k] < eta * params.r_b * p_req[k] - 1e-9
                    || p_em[k].abs() > limit + 1e-9
                {
                    continue 'combo;
                }
            }
            let p_b: Vec<f64> = (0..steps)
                .map(|k| {
                    let [a1, a2, a3] = coeffs[k];
                    let loss = if omega[k] > 0.0 { a1 + a2 * omega[k] + a3 * omega[k] * omega[k] } else { 0.0 };
                    p_em[k] + loss + params.p_aux
                })
                .collect();
            'energy: for &e_max in &grid.e_b_max {
                evaluated += 1;
                let mut e = params.zeta_max * e_max;
                for k in 0..steps {
                    let p_oc = battery.p1 * e + battery.p2 * e_max;
                    let disc = p_oc * p_oc - 4.0 * p_oc * p_b[k];
                    if disc < 0.0 {
                        continue 'energy;
                    }
                    let p_i = (p_oc - disc.sqrt()) / 2.0;
                    if p_i.abs() > battery.b1 * e + battery.b2 * e_max {
                        continue 'energy;
                    }
                    e -= p_i * dt / 3600.0;
                    if e < params.zeta_min * e_max || e > params.zeta_max * e_max + 1e-9 {
                        continue 'energy;
                    }
                }
                let used = params.zeta_max * e_max - e;
                if used * range_factor > e_max {
                    continue;
                }
                let objective = op_rate * used + params.c_bat / 1000.0 * e_max + constant + ratio_weight * gamma;
                if best.as_ref().map_or(true, |b| objective < b.objective) {
                    best = Some(GridOptimum { objective, gamma, e_b_max: e_max, evaluated: 0 });
                }
            }
        }
    }
    best.map(|b| GridOptimum { evaluated, ..b })
}
