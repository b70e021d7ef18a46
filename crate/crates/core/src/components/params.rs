use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Transmission layout and its mass parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Transmission {
    /// Fixed-gear transmission; gearbox mass `rho_fgt * gamma^2` [kg].
    Fgt { rho_fgt: f64 },
    /// Continuously variable transmission with ratio coverage `c_f = gamma_max / gamma_min`;
    /// gearbox mass `m_cvt_base + rho_cvt * gamma_max^2` [kg].
    Cvt { c_f: f64, m_cvt_base: f64, rho_cvt: f64 },
}

impl Transmission {
    pub fn is_cvt(&self) -> bool {
        matches!(self, Transmission::Cvt { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Transmission::Fgt { .. } => "FGT",
            Transmission::Cvt { .. } => "CVT",
        }
    }
}

/// Vehicle, cost and requirement parameters.
///
/// Units follow the usual parameter tables: masses in kg, specific masses in
/// kg/kW and kg/kWh, costs in currency per kWh or kW, distances in km, and
/// `theta_start` as a rise/run fraction. `v_max` is in m/s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub m_d: f64,
    pub m_f: f64,
    pub c_rr: f64,
    pub g: f64,
    pub rho_a: f64,
    pub c_d: f64,
    pub a_f: f64,
    pub r_w: f64,
    pub gamma_fd: f64,
    pub eta_gb: f64,
    pub eta_fd: f64,
    /// Regenerative braking fraction in [0, 1].
    pub r_b: f64,
    pub p_aux: f64,
    pub zeta_min: f64,
    pub zeta_max: f64,
    pub rho_em: f64,
    pub rho_bat: f64,
    pub c_el: f64,
    pub c_bat: f64,
    pub c_em: f64,
    pub c_add: f64,
    pub d_max_km: f64,
    pub d_exp_km: f64,
    pub t_acc: f64,
    pub theta_start: f64,
    pub v_max: f64,
    pub omega_em_max: f64,
    /// Tyre friction coefficient. Parsed and reported, not used by any constraint.
    #[serde(default)]
    pub mu_x: Option<f64>,
    pub transmission: Transmission,
}

impl VehicleParams {
    /// Combined driveline efficiency `eta_gb * eta_fd`.
    pub fn eta(&self) -> f64 {
        self.eta_gb * self.eta_fd
    }

    /// Start gradient as an angle [rad].
    pub fn theta_start_angle(&self) -> f64 {
        self.theta_start.atan()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m_d", self.m_d),
            ("m_f", self.m_f),
            ("g", self.g),
            ("rho_a", self.rho_a),
            ("c_d", self.c_d),
            ("A_f", self.a_f),
            ("r_w", self.r_w),
            ("gamma_fd", self.gamma_fd),
            ("rho_em", self.rho_em),
            ("rho_bat", self.rho_bat),
            ("c_el", self.c_el),
            ("c_bat", self.c_bat),
            ("c_em", self.c_em),
            ("D_max", self.d_max_km),
            ("D_exp", self.d_exp_km),
            ("t_acc", self.t_acc),
            ("v_max", self.v_max),
            ("omega_em_max", self.omega_em_max),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Validation(format!("`{name}` must be positive, got {value}")));
            }
        }
        let non_negative = [
            ("c_rr", self.c_rr),
            ("P_aux", self.p_aux),
            ("c_add", self.c_add),
            ("theta_start", self.theta_start),
        ];
        for (name, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::Validation(format!("`{name}` must be non-negative, got {value}")));
            }
        }
        for (name, value) in [("eta_gb", self.eta_gb), ("eta_fd", self.eta_fd)] {
            if !(value > 0.0 && value <= 1.0) {
                return Err(Error::Validation(format!("`{name}` must lie in (0, 1], got {value}")));
            }
        }
        if !(0.0..=1.0).contains(&self.r_b) {
            return Err(Error::Validation(format!("`R_b` must lie in [0, 1], got {}", self.r_b)));
        }
        if !(self.zeta_min >= 0.0 && self.zeta_min < self.zeta_max && self.zeta_max <= 1.0) {
            return Err(Error::Validation(format!(
                "SoE bounds must satisfy 0 <= zeta_min < zeta_max <= 1, got [{}, {}]",
                self.zeta_min, self.zeta_max
            )));
        }
        match self.transmission {
            Transmission::Fgt { rho_fgt } => {
                if !(rho_fgt > 0.0) {
                    return Err(Error::Validation(format!("`rho_fgt` must be positive, got {rho_fgt}")));
                }
            }
            Transmission::Cvt { c_f, m_cvt_base, rho_cvt } => {
                if !(c_f > 1.0 && c_f.is_finite()) {
                    return Err(Error::Validation(format!("`c_f` must exceed 1 for a CVT, got {c_f}")));
                }
                if !(m_cvt_base >= 0.0 && rho_cvt > 0.0) {
                    return Err(Error::Validation(
                        "`m_cvt_base` must be non-negative and `rho_cvt` positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}
