//! Euler-forward transcription of the sizing and control problem at a fixed
//! motor size and a fixed vehicle mass.
//!
//! Powers are in W, battery energies in Wh, time in s. Per step `k` the
//! program couples motor power, electrical power, terminal power and internal
//! battery power through the relaxed driveline, loss and battery constraints;
//! globally it adds the initial charge, the range requirement and the
//! gradeability and top-speed requirements.

use super::program::{ConicProgram, Exogenous, ProgramMeta, RatioEncoding, VarLayout};
use crate::components::battery::BatteryModel;
use crate::components::dynamics::{motor_power_bound, required_power};
use crate::components::motor::ScaledMotor;
use crate::components::params::{Transmission, VehicleParams};
use crate::components::requirements::top_speed_torque;
use crate::cycle::DriveCycle;
use crate::error::{Error, Result};

/// Default weight on the design ratio [currency per unit ratio].
///
/// Small enough to leave the costs untouched at reporting precision; it picks
/// the lightest transmission among otherwise equal-cost ratios.
pub const DEFAULT_RATIO_WEIGHT: f64 = 1e-3;

/// Knobs that change the program without changing the model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TranscribeOptions {
    /// Ratio encoding; `None` follows the transmission kind.
    pub encoding: Option<RatioEncoding>,
    /// Emit the range requirement on the battery capacity.
    pub range_constraint: bool,
    pub ratio_weight: f64,
}

impl Default for TranscribeOptions {
    fn default() -> Self {
        Self { encoding: None, range_constraint: true, ratio_weight: DEFAULT_RATIO_WEIGHT }
    }
}

/// Builds the conic program with default options.
pub fn transcribe(
    cycle: &DriveCycle,
    params: &VehicleParams,
    motor: &ScaledMotor,
    battery: &BatteryModel,
    m_bar: f64,
) -> Result<ConicProgram> {
    transcribe_with(cycle, params, motor, battery, m_bar, TranscribeOptions::default())
}

pub fn transcribe_with(
    cycle: &DriveCycle,
    params: &VehicleParams,
    motor: &ScaledMotor,
    battery: &BatteryModel,
    m_bar: f64,
    opts: TranscribeOptions,
) -> Result<ConicProgram> {
    params.validate()?;
    if !(m_bar > 0.0) {
        return Err(Error::Transcription(format!("mass must be positive, got {m_bar}")));
    }
    let d_cycle = cycle.distance();
    if !(d_cycle > 0.0) {
        return Err(Error::Transcription("cycle distance is zero; the range requirement is undefined".into()));
    }
    let encoding = opts.encoding.unwrap_or(match params.transmission {
        Transmission::Fgt { .. } => RatioEncoding::Scalar,
        Transmission::Cvt { c_f, .. } => RatioEncoding::PerStep { coverage: c_f },
    });
    let steps = cycle.steps();
    let dt = cycle.dt();
    let p_em_max = motor.p_em_max;
    let eta = params.eta();
    let (t_max, km1, km2) = (motor.t_max(), motor.km1(), motor.km2());

    let p_req: Vec<f64> = required_power(cycle, params, m_bar)[..steps].to_vec();
    let p_em_bar: Vec<f64> = p_req.iter().map(|p| motor_power_bound(params, *p, p_em_max)).collect();
    let loss_coeffs: Vec<[f64; 3]> = p_em_bar.iter().map(|p| motor.coefficients(*p)).collect();
    if let Some(k) = loss_coeffs.iter().position(|c| c[2] < 0.0) {
        return Err(Error::Transcription(format!(
            "loss coefficient a3 = {} at step {k} is negative; the loss constraint is not convex",
            loss_coeffs[k][2]
        )));
    }
    let speed = cycle.speed()[..steps].to_vec();
    let omega_per_ratio: Vec<f64> = speed.iter().map(|v| v * params.gamma_fd / params.r_w).collect();

    let layout = VarLayout::new(steps, encoding);
    let meta = ProgramMeta {
        dt,
        steps,
        p_em_max,
        m_bar,
        d_cycle,
        encoding,
        t_em_max: t_max,
        km1,
        km2,
        objective_constant: params.c_em * p_em_max / 1000.0 + params.c_add,
        ratio_weight: opts.ratio_weight,
        p_oc: [battery.p1, battery.p2],
        p_i_max: [battery.b1, battery.b2],
        energy_unit: "Wh".into(),
        initial_soe: format!("E_b[0] = zeta_max E_b,max (zeta_max = {})", params.zeta_max),
        range_constraint: opts.range_constraint,
    };
    let exo = Exogenous { speed, p_req, p_em_bar, loss_coeffs, omega_per_ratio };
    let mut prog = ConicProgram::empty(layout.clone(), meta, exo.clone());
    let l = &layout;
    let sigma = p_em_max;
    let e_max = l.e_b_max;

    for k in 0..steps {
        let (pem, pdc, pb, pi) = (l.p_em.start + k, l.p_dc.start + k, l.p_b.start + k, l.p_i.start + k);
        let g = l.gamma_at(k);
        let c = exo.omega_per_ratio[k];
        let preq = exo.p_req[k];
        let [a1, a2, a3] = exo.loss_coeffs[k];

        // Relaxed driveline: P_req <= eta P_em and eta R_b P_req <= P_em.
        prog.ineq.push(&[(pem, -1.0)], -preq / eta, format!("drive_motoring[{k}]"));
        prog.ineq.push(&[(pem, -1.0)], -eta * params.r_b * preq, format!("drive_braking[{k}]"));
        prog.ineq.push(&[(pem, 1.0)], p_em_max, format!("size_upper[{k}]"));
        prog.ineq.push(&[(pem, -1.0)], p_em_max, format!("size_lower[{k}]"));

        // Torque and power envelope, linear in (P_em, gamma).
        prog.ineq.push(&[(pem, 1.0), (g, -t_max * c)], 0.0, format!("torque_upper[{k}]"));
        prog.ineq.push(&[(pem, -1.0), (g, -t_max * c)], 0.0, format!("torque_lower[{k}]"));
        prog.ineq.push(&[(pem, 1.0), (g, -km1 * c)], km2, format!("power_upper[{k}]"));
        prog.ineq.push(&[(pem, -1.0), (g, -km1 * c)], km2, format!("power_lower[{k}]"));

        // Electrical power. At standstill the motor is switched off.
        if c == 0.0 {
            prog.ineq.push(&[(pem, 1.0), (pdc, -1.0)], 0.0, format!("loss_standstill[{k}]"));
        } else {
            prog.ineq.push(&[(g, 1.0)], params.omega_em_max / c, format!("overspeed[{k}]"));
            let t_terms = [(pdc, 1.0), (pem, -1.0), (g, -a2 * c)];
            if a3 == 0.0 {
                prog.ineq.push(&[(pdc, -1.0), (pem, 1.0), (g, a2 * c)], -a1, format!("loss[{k}]"));
            } else {
                // a3 w^2 <= t with t = P_dc - P_em - a1 - a2 w, as x^2 <= t sigma.
                let x = (a3 * sigma).sqrt() * c;
                prog.push_cone(
                    &[(&t_terms, sigma - a1), (&[(g, 2.0 * x)], 0.0), (&t_terms, -a1 - sigma)],
                    format!("loss[{k}]"),
                );
            }
        }

        // Battery: P_b = P_dc + P_aux, cone on (P_i, P_b, P_oc), internal power limits.
        prog.eq.push(&[(pb, 1.0), (pdc, -1.0)], params.p_aux, format!("terminal[{k}]"));
        let e = l.e_b.start + k;
        let [p1, p2] = [battery.p1, battery.p2];
        prog.push_cone(
            &[
                (&[(pi, 1.0), (pb, -1.0), (e, p1), (e_max, p2)], 0.0),
                (&[(pi, 2.0)], 0.0),
                (&[(pi, 1.0), (pb, -1.0), (e, -p1), (e_max, -p2)], 0.0),
            ],
            format!("battery[{k}]"),
        );
        prog.ineq.push(&[(pi, 1.0), (e, -battery.b1), (e_max, -battery.b2)], 0.0, format!("internal_upper[{k}]"));
        prog.ineq.push(&[(pi, -1.0), (e, -battery.b1), (e_max, -battery.b2)], 0.0, format!("internal_lower[{k}]"));

        prog.eq.push(&[(e + 1, 1.0), (e, -1.0), (pi, dt / 3600.0)], 0.0, format!("soe_dynamics[{k}]"));

        if let RatioEncoding::PerStep { coverage } = encoding {
            let gmin = l.gamma_min.expect("per-step layout has gamma_min");
            prog.ineq.push(&[(g, -1.0), (gmin, 1.0)], 0.0, format!("band_lower[{k}]"));
            prog.ineq.push(&[(g, 1.0), (gmin, -coverage)], 0.0, format!("band_upper[{k}]"));
        }
    }

    for k in 0..=steps {
        let e = l.e_b.start + k;
        prog.ineq.push(&[(e, -1.0), (e_max, params.zeta_min)], 0.0, format!("soe_lower[{k}]"));
        prog.ineq.push(&[(e, 1.0), (e_max, -params.zeta_max)], 0.0, format!("soe_upper[{k}]"));
    }
    prog.eq.push(&[(l.e_b.start, 1.0), (e_max, -params.zeta_max)], 0.0, "initial_charge");
    prog.eq.push(&[(l.delta_e, 1.0), (l.e_b.start, -1.0), (l.e_b.end - 1, 1.0)], 0.0, "energy_used");
    if opts.range_constraint {
        let factor = params.d_exp_km * 1000.0 / (d_cycle * (1.0 - params.zeta_min));
        prog.ineq.push(&[(e_max, -1.0), (l.delta_e, factor)], 0.0, "range");
    }

    // Requirements on the ratio that sees the start gradient (gamma_fgt or
    // gamma_max) and the one that sees top speed (gamma_fgt or gamma_min).
    let design = l.design_ratio();
    let coverage = match encoding {
        RatioEncoding::Scalar => 1.0,
        RatioEncoding::PerStep { coverage } => coverage,
    };
    prog.ineq.push(&[(design, -1.0)], 0.0, "ratio_positive");
    let wheel_torque = eta * t_max * params.gamma_fd;
    let grade_load = m_bar * params.g * params.theta_start_angle().sin() * params.r_w;
    prog.ineq.push(&[(design, -wheel_torque * coverage)], -grade_load, "gradeability");
    let t_req = top_speed_torque(params, m_bar);
    prog.ineq.push(&[(design, -wheel_torque)], -t_req, "top_speed_torque");
    prog.ineq.push(
        &[(design, -eta * km1 * params.gamma_fd)],
        eta * km2 * params.r_w / params.v_max - t_req,
        "top_speed_power",
    );

    let op_rate = params.c_el / 1000.0 * params.d_max_km * 1000.0 / d_cycle;
    prog.objective[l.delta_e] = op_rate;
    prog.objective[e_max] = params.c_bat / 1000.0;
    prog.objective[design] = opts.ratio_weight;

    prog.check()?;
    Ok(prog)
}
