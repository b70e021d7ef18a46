//! Shipped parameter sets, the reference motor, the default cell table and the
//! bundled synthetic cycles.

use crate::components::battery::{fit_battery, BatteryModel, BatteryPack, CellTable, PackLayout};
use crate::components::motor::{fit_loss_coefficients, synthesize_motor_map, LossShape, MotorModel, MotorRating};
use crate::components::params::{Transmission, VehicleParams};
use crate::cycle::{self, DriveCycle, GradientProfileSpec};
use crate::error::Result;

/// Vehicle classes with a shipped parameter set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VehicleClass {
    Scooter,
    Moped,
}

impl std::str::FromStr for VehicleClass {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scooter" => Ok(Self::Scooter),
            "moped" => Ok(Self::Moped),
            other => Err(crate::error::Error::Validation(format!(
                "unknown vehicle preset `{other}` (expected `scooter` or `moped`)"
            ))),
        }
    }
}

/// Default fixed-gear gearbox specific mass [kg].
pub fn rho_fgt(class: VehicleClass) -> f64 {
    match class {
        VehicleClass::Scooter => 0.01,
        VehicleClass::Moped => 0.075,
    }
}

/// Electric scooter with a fixed-gear transmission.
pub fn scooter() -> VehicleParams {
    VehicleParams {
        m_d: 75.0,
        m_f: 10.0,
        c_rr: 0.03,
        g: 9.81,
        rho_a: 1.225,
        c_d: 1.0,
        a_f: 0.68,
        r_w: 0.125,
        gamma_fd: 1.0,
        eta_gb: 0.97,
        eta_fd: 1.0,
        r_b: 0.5,
        p_aux: 10.0,
        zeta_min: 0.2,
        zeta_max: 1.0,
        rho_em: 0.5,
        rho_bat: 4.73,
        c_el: 0.22,
        c_bat: 285.0,
        c_em: 101.0,
        c_add: 88.0,
        d_max_km: 8000.0,
        d_exp_km: 25.0,
        t_acc: 7.5,
        theta_start: 0.10,
        v_max: 25.0 / 3.6,
        omega_em_max: 600.0,
        mu_x: Some(0.4),
        transmission: Transmission::Fgt { rho_fgt: rho_fgt(VehicleClass::Scooter) },
    }
}

/// Electric moped with a fixed-gear transmission.
pub fn moped_fgt() -> VehicleParams {
    VehicleParams {
        m_d: 75.0,
        m_f: 60.0,
        c_rr: 0.015,
        g: 9.81,
        rho_a: 1.225,
        c_d: 0.7,
        a_f: 0.7,
        r_w: 0.193,
        gamma_fd: 1.0,
        eta_gb: 0.97,
        eta_fd: 1.0,
        r_b: 0.5,
        p_aux: 10.0,
        zeta_min: 0.2,
        zeta_max: 1.0,
        rho_em: 0.5,
        rho_bat: 4.73,
        c_el: 0.22,
        c_bat: 285.0,
        c_em: 101.0,
        c_add: 209.0,
        d_max_km: 120000.0,
        d_exp_km: 100.0,
        t_acc: 11.0,
        theta_start: 0.20,
        v_max: 45.0 / 3.6,
        omega_em_max: 600.0,
        mu_x: Some(0.4),
        transmission: Transmission::Fgt { rho_fgt: rho_fgt(VehicleClass::Moped) },
    }
}

/// Electric moped with a continuously variable transmission.
pub fn moped_cvt() -> VehicleParams {
    VehicleParams {
        eta_gb: 0.88,
        eta_fd: 0.97,
        c_em: 150.0,
        transmission: Transmission::Cvt { c_f: 2.7, m_cvt_base: 0.5, rho_cvt: 0.05 },
        ..moped_fgt()
    }
}

pub fn vehicle(class: VehicleClass) -> VehicleParams {
    match class {
        VehicleClass::Scooter => scooter(),
        VehicleClass::Moped => moped_fgt(),
    }
}

/// Rating of the reference motor used to synthesize and fit the loss map.
pub fn reference_motor() -> MotorRating {
    MotorRating {
        p_max_ref: 1000.0,
        t_max_ref: 5.0,
        omega_max: 600.0,
        km1_ref: -0.25,
        km2_ref: 1150.0,
    }
}

/// Loss shape with a peak efficiency of roughly 86 %.
pub fn reference_loss_shape() -> LossShape {
    LossShape { c_cu: 2.0, c_fr: 0.3, c_fe: 8e-4, c_0: 20.0 }
}

/// 18650-class cell: open-circuit voltage affine from 2.8 V to 4.2 V,
/// 20 mOhm internal resistance, 20 A current limit.
pub fn default_cell() -> CellTable {
    CellTable::affine_voc(2.8, 4.2, 0.02, 20.0, 21)
}

pub const DEFAULT_SERIES: usize = 13;
pub const DEFAULT_PARALLEL: usize = 1;
pub const DEFAULT_CELL_CAPACITY_AH: f64 = 2.5;
pub const DEFAULT_PACK_VOLTAGE: f64 = 48.0;
/// State-of-energy window of the affine battery fit.
pub const DEFAULT_FIT_WINDOW: [f64; 2] = [0.2, 1.0];

/// Synthesized and fitted reference motor.
pub fn reference_motor_model() -> Result<MotorModel> {
    fit_loss_coefficients(&synthesize_motor_map(reference_loss_shape(), reference_motor())?)
}

pub fn default_pack() -> Result<BatteryPack> {
    BatteryPack::new(
        default_cell(),
        PackLayout {
            series: DEFAULT_SERIES,
            parallel: DEFAULT_PARALLEL,
            capacity_ah: DEFAULT_CELL_CAPACITY_AH,
            v_nom: DEFAULT_PACK_VOLTAGE,
        },
    )
}

/// Affine battery model of the default pack over the default window.
pub fn default_battery_model() -> Result<BatteryModel> {
    fit_battery(&default_pack()?, DEFAULT_FIT_WINDOW)
}

const SCOOTER_URBAN: &str = include_str!("../data/cycles/scooter_urban.csv");
const MOPED_URBAN: &str = include_str!("../data/cycles/moped_urban.csv");

/// Bundled urban cycle for the vehicle class, resampled to 1 s.
pub fn urban_cycle(class: VehicleClass) -> Result<DriveCycle> {
    match class {
        VehicleClass::Scooter => cycle::read_cycle(SCOOTER_URBAN.as_bytes(), "scooter_urban", 1.0),
        VehicleClass::Moped => cycle::read_cycle(MOPED_URBAN.as_bytes(), "moped_urban", 1.0),
    }
}

/// Hill profile overlaid on the bundled urban cycle for the hilly scenario.
pub fn hill_profile(class: VehicleClass) -> GradientProfileSpec {
    let segments = match class {
        VehicleClass::Scooter => vec![
            (150.0, 0.0),
            (250.0, 0.06),
            (150.0, 0.0),
            (250.0, -0.06),
            (100.0, 0.04),
            (100.0, -0.04),
        ],
        VehicleClass::Moped => vec![
            (400.0, 0.0),
            (700.0, 0.08),
            (300.0, 0.0),
            (700.0, -0.08),
            (500.0, 0.05),
            (500.0, -0.05),
        ],
    };
    GradientProfileSpec { segments, smoothing: 5 }
}

/// Bundled cycle with the hill profile overlaid and climb speeds attenuated.
pub fn hilly_cycle(class: VehicleClass) -> Result<DriveCycle> {
    let flat = urban_cycle(class)?;
    let label = format!("{}_hilly", flat.label());
    Ok(cycle::synthesize_gradient(&flat, &hill_profile(class), true)?.with_label(label))
}
