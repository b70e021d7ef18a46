mod common;
mod oracle;

use std::time::Instant;

use microsize::components::mass::mass_closure;
use microsize::components::motor::scale_motor;
use microsize::cycle::DriveCycle;
use microsize::designloop::{
    mass_fixed_point, size_grid, sweep, ClarabelAdapter, FixedPointSettings, RatioDesign, SweepEntry,
};
use microsize::presets::{self, VehicleClass};
use microsize::transcriber::{transcribe, DEFAULT_RATIO_WEIGHT};
use microsize::Error;

fn settings(m_v0: f64) -> FixedPointSettings {
    FixedPointSettings { m_v0: Some(m_v0), ..Default::default() }
}

#[test]
fn fixed_point_is_independent_of_the_initial_mass() {
    for (params, cycle, p_em_max) in [
        // Large enough to pass the pre-checks from a 30 kg start.
        (presets::scooter(), presets::urban_cycle(VehicleClass::Scooter).unwrap(), 720.0),
        (presets::scooter(), presets::hilly_cycle(VehicleClass::Scooter).unwrap(), 800.0),
    ] {
        let masses: Vec<f64> = [5.0, 15.0, 30.0]
            .iter()
            .map(|m0| {
                let d = mass_fixed_point(
                    &cycle,
                    &params,
                    common::motor(),
                    common::battery(),
                    p_em_max,
                    &settings(*m0),
                    &ClarabelAdapter::default(),
                )
                .unwrap();
                assert!(d.iterations <= 10, "{} iterations from {m0} kg", d.iterations);
                d.m_v()
            })
            .collect();
        let lo = masses.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = masses.iter().cloned().fold(0.0, f64::max);
        assert!((hi - lo) / lo <= 5e-4, "{}: {masses:?}", cycle.label());
    }
}

#[test]
fn converged_mass_reproduces_its_own_closure() {
    let params = presets::scooter();
    let cycle = presets::urban_cycle(VehicleClass::Scooter).unwrap();
    let s = FixedPointSettings::default();
    let d = mass_fixed_point(&cycle, &params, common::motor(), common::battery(), 620.0, &s, &ClarabelAdapter::default())
        .unwrap();
    let closure = mass_closure(&params, d.p_em_max, d.e_b_max, d.ratio.sizing());
    assert!((closure.m_v - d.m_v_solve).abs() < s.eps);
    assert_eq!(closure, d.mass);
    assert_eq!(d.trace.len(), d.iterations + 1);
    assert_eq!(d.residual_history.len(), d.iterations);
    assert!(matches!(d.ratio, RatioDesign::Fgt { .. }));
    assert_eq!(d.trajectories.e_b.len(), cycle.len());
    assert_eq!(d.trajectories.p_em.len(), cycle.steps());
}

#[test]
fn fixed_point_trace_contracts() {
    let params = presets::moped_cvt();
    let cycle = presets::urban_cycle(VehicleClass::Moped).unwrap();
    let d = mass_fixed_point(&cycle, &params, common::motor(), common::battery(), 2700.0, &settings(30.0), &ClarabelAdapter::default())
        .unwrap();
    let steps: Vec<f64> = d.trace.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    for w in steps[1..].windows(2) {
        if w[1] > w[0] {
            eprintln!("non-monotone mass update: {steps:?}");
        }
    }
    assert!(d.iterations <= 10);
    match d.ratio {
        RatioDesign::Cvt { gamma_min, gamma_max } => assert!((gamma_max - 2.7 * gamma_min).abs() < 1e-9),
        _ => panic!("expected a CVT design"),
    }
}

#[test]
fn standstill_cycle_converges_immediately() {
    // Every step is at rest, so energy use and battery size do not depend on mass.
    let mut speed = vec![0.0; 10];
    speed.push(0.5);
    let cycle = DriveCycle::flat("parked", 1.0, speed).unwrap();
    let params = presets::scooter();
    let d = mass_fixed_point(&cycle, &params, common::motor(), common::battery(), 800.0, &settings(12.0), &ClarabelAdapter::default())
        .unwrap();
    // The ratio still sits on the mass-dependent gradeability bound, so the
    // gearbox mass settles one iteration later.
    assert!(d.iterations <= 3, "{}", d.iterations);
    let aux_only = params.p_aux * 10.0 / 3600.0;
    assert!((d.delta_e - aux_only).abs() / aux_only < 0.01, "{} vs {aux_only}", d.delta_e);
    let factor = params.d_exp_km * 1000.0 / (cycle.distance() * (1.0 - params.zeta_min));
    assert!((d.e_b_max - d.delta_e * factor).abs() / d.e_b_max < 1e-6);
}

#[test]
fn exceeding_the_iteration_budget_reports_the_trace() {
    let params = presets::scooter();
    let cycle = presets::urban_cycle(VehicleClass::Scooter).unwrap();
    let s = FixedPointSettings { m_v0: Some(30.0), max_iter: 1, ..Default::default() };
    match mass_fixed_point(&cycle, &params, common::motor(), common::battery(), 720.0, &s, &ClarabelAdapter::default()) {
        Err(Error::NonConvergence { iterations, trace }) => {
            assert_eq!(iterations, 1);
            assert_eq!(trace.len(), 2);
            assert_eq!(trace[0], 30.0);
        }
        other => panic!("expected non-convergence, got {other:?}"),
    }
}

#[test]
fn undersized_motor_names_the_binding_requirement() {
    let params = presets::scooter();
    let cycle = presets::hilly_cycle(VehicleClass::Scooter).unwrap();
    let err = mass_fixed_point(&cycle, &params, common::motor(), common::battery(), 600.0, &FixedPointSettings::default(), &ClarabelAdapter::default())
        .unwrap_err();
    match err {
        Error::Infeasible(i) => assert!(i.constraints.iter().any(|c| c.starts_with("cycle")), "{i}"),
        other => panic!("expected infeasibility, got {other}"),
    }
}

#[test]
fn sweep_below_the_acceleration_bound_is_infeasible() {
    let params = presets::scooter();
    let cycle = presets::urban_cycle(VehicleClass::Scooter).unwrap();
    // Hand bound: v_max^2 m / (t_acc eta) at the initial mass (m_f + 3 kg + driver).
    let m = params.m_f + 3.0 + params.m_d;
    let bound = params.v_max.powi(2) * m / params.t_acc / params.eta();
    let grid = size_grid(300.0, 570.0, 30.0).unwrap();
    assert!(grid.iter().all(|p| *p < bound));
    match sweep(&cycle, &params, common::motor(), common::battery(), &grid, &FixedPointSettings::default(), &ClarabelAdapter::default()) {
        Err(Error::SweepInfeasible(records)) => {
            assert_eq!(records.len(), grid.len());
            assert!(records.iter().all(|r| r.constraints == vec!["acceleration".to_string()]));
        }
        other => panic!("expected a sweep error, got {other:?}"),
    }
}

#[test]
fn single_size_sweep_selects_it() {
    let params = presets::scooter();
    let cycle = presets::urban_cycle(VehicleClass::Scooter).unwrap();
    let s = sweep(&cycle, &params, common::motor(), common::battery(), &[620.0], &FixedPointSettings::default(), &ClarabelAdapter::default())
        .unwrap();
    assert_eq!(s.best, 0);
    assert_eq!(s.best_design().p_em_max, 620.0);
    assert!(!s.is_partial());
}

#[test]
fn sweep_selects_the_cheapest_feasible_size() {
    let params = presets::scooter();
    let cycle = presets::hilly_cycle(VehicleClass::Scooter).unwrap();
    let grid = size_grid(560.0, 720.0, 20.0).unwrap();
    let s = sweep(&cycle, &params, common::motor(), common::battery(), &grid, &FixedPointSettings::default(), &ClarabelAdapter::default())
        .unwrap();
    assert_eq!(s.grid, grid);
    assert_eq!(s.entries.len(), grid.len());
    let best = s.best_design().costs.tco;
    for e in &s.entries {
        if let Some(tco) = e.tco() {
            assert!(best <= tco);
        }
    }
    assert!(s.is_partial());
    for e in &s.entries {
        if let SweepEntry::Infeasible(i) = e {
            assert!(!i.constraints.is_empty());
        }
    }
    assert!(s.entries.iter().zip(&grid).all(|(e, p)| e.p_em_max() == *p));
}

#[test]
fn sweep_serialization_is_deterministic() {
    let params = presets::scooter();
    let cycle = presets::urban_cycle(VehicleClass::Scooter).unwrap();
    let grid = size_grid(580.0, 640.0, 20.0).unwrap();
    let run = || {
        let s = sweep(&cycle, &params, common::motor(), common::battery(), &grid, &FixedPointSettings::default(), &ClarabelAdapter::default())
            .unwrap();
        serde_json::to_string(&s).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn sweep_rejects_bad_grids() {
    let params = presets::scooter();
    let cycle = presets::urban_cycle(VehicleClass::Scooter).unwrap();
    let s = FixedPointSettings::default();
    let solver = ClarabelAdapter::default();
    for grid in [vec![], vec![600.0, 600.0], vec![650.0, 600.0]] {
        let err = sweep(&cycle, &params, common::motor(), common::battery(), &grid, &s, &solver).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }
    assert_eq!(size_grid(300.0, 800.0, 10.0).unwrap().len(), 51);
    assert_eq!(size_grid(2000.0, 3000.0, 10.0).unwrap().last(), Some(&3000.0));
    assert!(size_grid(300.0, 200.0, 10.0).is_err());
}

#[test]
fn tiny_horizon_grid_search_matches_the_conic_optimum() {
    let cycle = DriveCycle::flat("tiny", 1.0, vec![0.0, 1.5, 3.0, 4.5, 5.5, 5.5, 4.5]).unwrap();
    assert_eq!(cycle.steps(), 6);
    let params = presets::scooter();
    let motor = scale_motor(common::motor(), 650.0).unwrap();
    let m = 88.0;
    let program = transcribe(&cycle, &params, &motor, common::battery(), m).unwrap();
    let sol = common::solve(&program);
    assert!(sol.is_optimal());

    let start = Instant::now();
    let grid = oracle::Grid {
        gamma: (1..=240).map(|i| i as f64 * 0.05).collect(),
        e_b_max: (1..=1500).map(|i| i as f64 * 2.0).collect(),
        p_em_offsets: vec![0.0, 0.05 * motor.p_em_max],
    };
    let best = oracle::search(&cycle, &params, &motor, common::battery(), m, DEFAULT_RATIO_WEIGHT, &grid).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "grid search took {elapsed} s");
    // The grid point is feasible for the exact model, hence for the relaxation.
    assert!(best.objective >= sol.objective * (1.0 - 1e-6), "{} < {}", best.objective, sol.objective);
    assert!(best.objective <= sol.objective * 1.01, "{} vs {}", best.objective, sol.objective);
    assert!(best.evaluated > 0);
}
