use serde::{Deserialize, Serialize};

use super::params::{Transmission, VehicleParams};

/// Component masses of one design [kg].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassBreakdown {
    pub m_em: f64,
    pub m_bat: f64,
    pub m_gb: f64,
    pub m_f: f64,
    /// Vehicle mass without driver.
    pub m_v: f64,
    /// Gross mass including the driver.
    pub m: f64,
}

/// Gearbox mass for the sizing ratio (`gamma_fgt`, or `gamma_max` for a CVT) [kg].
pub fn gearbox_mass(transmission: &Transmission, gamma_sizing: f64) -> f64 {
    match *transmission {
        Transmission::Fgt { rho_fgt } => rho_fgt * gamma_sizing * gamma_sizing,
        Transmission::Cvt { m_cvt_base, rho_cvt, .. } => m_cvt_base + rho_cvt * gamma_sizing * gamma_sizing,
    }
}

/// Vehicle mass implied by a motor size [W], battery capacity [Wh] and sizing ratio.
pub fn mass_closure(params: &VehicleParams, p_em_max: f64, e_b_max: f64, gamma_sizing: f64) -> MassBreakdown {
    let m_em = params.rho_em * p_em_max / 1000.0;
    let m_bat = params.rho_bat * e_b_max / 1000.0;
    let m_gb = gearbox_mass(&params.transmission, gamma_sizing);
    let m_v = m_em + m_bat + m_gb + params.m_f;
    MassBreakdown { m_em, m_bat, m_gb, m_f: params.m_f, m_v, m: m_v + params.m_d }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_abs_diff_eq;

    #[test]
    fn scooter_flat_optimum_closes() {
        let m = mass_closure(&presets::scooter(), 590.0, 435.0, 5.91);
        assert_abs_diff_eq!(m.m_em, 0.295, epsilon = 1e-12);
        assert_abs_diff_eq!(m.m_bat, 2.05755, epsilon = 1e-12);
        assert_abs_diff_eq!(m.m_gb, 0.349281, epsilon = 1e-12);
        assert_abs_diff_eq!(m.m_v, 12.7, epsilon = 0.1);
        assert_abs_diff_eq!(m.m, m.m_v + 75.0, epsilon = 1e-12);
    }

    #[test]
    fn moped_optima_close() {
        let fgt = mass_closure(&presets::moped_fgt(), 2370.0, 2549.0, 5.03);
        assert_abs_diff_eq!(fgt.m_v, 75.1, epsilon = 0.1);
        let cvt = mass_closure(&presets::moped_cvt(), 2550.0, 2874.0, 7.57);
        assert_abs_diff_eq!(cvt.m_v, 78.2, epsilon = 0.1);
    }

    #[test]
    fn components_sum_to_vehicle_mass() {
        let m = mass_closure(&presets::moped_cvt(), 2000.0, 1000.0, 6.0);
        assert_abs_diff_eq!(m.m_v, m.m_em + m.m_bat + m.m_gb + m.m_f, epsilon = 1e-12);
        assert_abs_diff_eq!(m.m_gb, 0.5 + 0.05 * 36.0, epsilon = 1e-12);
    }
}
