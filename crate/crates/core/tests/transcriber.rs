mod common;

use approx::assert_relative_eq;
use microsize::components::battery::internal_power;
use microsize::components::motor::{scale_motor, CoeffTable};
use microsize::cycle::DriveCycle;
use microsize::presets;
use microsize::transcriber::{
    battery_cone_residual, cost_breakdown, objective_breakdown, transcribe, transcribe_with, ConicProgram,
    RatioEncoding, Solution, SolveStatus, TranscribeOptions,
};
use microsize::Error;

fn scooter_program(cycle: &DriveCycle, opts: TranscribeOptions) -> ConicProgram {
    let params = presets::scooter();
    let motor = scale_motor(common::motor(), 650.0).unwrap();
    transcribe_with(cycle, &params, &motor, common::battery(), 88.0, opts).unwrap()
}

fn ineq_row(program: &ConicProgram, tag: &str) -> (Vec<(usize, f64)>, f64) {
    let i = program.ineq.tags.iter().position(|t| t == tag).unwrap_or_else(|| panic!("no row `{tag}`"));
    let a = &program.ineq.a;
    let terms = (0..a.nnz()).filter(|&j| a.rows[j] == i).map(|j| (a.cols[j], a.vals[j])).collect();
    (terms, program.ineq.b[i])
}

#[test]
fn standstill_step_draws_only_auxiliary_power() {
    // Step 0 is at rest; the only sample after it sets a non-zero cycle distance.
    let cycle = DriveCycle::flat("rest", 1.0, vec![0.0, 0.5]).unwrap();
    assert_eq!(cycle.steps(), 1);
    let program = scooter_program(&cycle, TranscribeOptions::default());
    let sol = common::solve(&program);
    assert_eq!(sol.status, SolveStatus::Optimal);
    let l = &program.layout;
    assert!(sol.x[l.p_em.start].abs() < 1e-6);
    assert!(sol.x[l.p_dc.start].abs() < 1e-6);
    let aux = presets::scooter().p_aux;
    // Oracle: the smaller quadratic root at the initial open-circuit power.
    let e0 = sol.x[l.e_b.start];
    let p_oc = common::battery().p_oc(e0, sol.x[l.e_b_max]);
    let expected = internal_power(p_oc, aux).unwrap() / 3600.0;
    assert_relative_eq!(sol.x[l.delta_e], expected, max_relative = 1e-5);
    assert_relative_eq!(sol.x[l.delta_e], aux / 3600.0, max_relative = 0.01);
}

#[test]
fn cvt_ratio_coverage() {
    // Published CVT optimum: gamma_min 2.80 with c_f 2.7 gives 7.56 against the reported 7.57.
    assert!((2.80f64 * 2.7 - 7.57).abs() <= 0.02);

    let cycle = presets::urban_cycle(presets::VehicleClass::Moped).unwrap();
    let params = presets::moped_cvt();
    let motor = scale_motor(common::motor(), 2600.0).unwrap();
    let program = transcribe(&cycle, &params, &motor, common::battery(), 155.0).unwrap();
    assert_eq!(program.meta.encoding, RatioEncoding::PerStep { coverage: 2.7 });
    let sol = common::solve(&program);
    assert!(sol.is_optimal());
    let l = &program.layout;
    let gamma_min = sol.x[l.gamma_min.unwrap()];
    for k in 0..l.steps {
        let g = sol.x[l.gamma_at(k)];
        assert!(g >= gamma_min * (1.0 - 1e-7) && g <= 2.7 * gamma_min * (1.0 + 1e-7), "step {k}: {g}");
    }
}

#[test]
fn overspeed_bound_at_top_speed() {
    let cycle = DriveCycle::flat("cruise", 1.0, vec![6.944; 4]).unwrap();
    let program = scooter_program(&cycle, TranscribeOptions::default());
    let (terms, rhs) = ineq_row(&program, "overspeed[0]");
    assert_eq!(terms, vec![(program.layout.gamma.start, 1.0)]);
    // omega_max r_w / (gamma_fd v) = 600 * 0.125 / 6.944
    assert!((rhs - 10.80).abs() < 0.005, "{rhs}");
}

#[test]
fn standstill_steps_have_no_overspeed_row() {
    let cycle = common::trapezoid(5.0, 4, 6);
    let program = scooter_program(&cycle, TranscribeOptions::default());
    let moving = cycle.speed()[..cycle.steps()].iter().filter(|v| **v > 0.0).count();
    let rows = program.ineq.tags.iter().filter(|t| t.starts_with("overspeed")).count();
    assert_eq!(rows, moving);
    assert!(program.ineq.tags.iter().any(|t| t == "loss_standstill[0]"));
}

#[test]
fn negative_quadratic_coefficient_is_rejected() {
    let mut model = common::motor().clone();
    let table = model.coeff_table.as_ref().unwrap();
    model.coeff_table = Some(CoeffTable {
        levels: table.levels.clone(),
        coeffs: table.coeffs.iter().map(|c| c.map(|[a1, a2, _]| [a1, a2, -1e-3])).collect(),
    });
    let motor = scale_motor(&model, 650.0).unwrap();
    let cycle = common::trapezoid(5.0, 4, 6);
    let err = transcribe(&cycle, &presets::scooter(), &motor, common::battery(), 88.0).unwrap_err();
    assert!(matches!(err, Error::Transcription(ref m) if m.contains("a3")), "{err}");
}

#[test]
fn battery_cone_residual_detects_perturbation() {
    let cycle = common::trapezoid(5.0, 5, 10);
    let program = scooter_program(&cycle, TranscribeOptions::default());
    let sol = common::solve(&program);
    let base = battery_cone_residual(&sol, &program);
    assert!(base.iter().all(|r| *r < 1e-6), "{base:?}");

    let j = 7;
    let mut perturbed = sol.clone();
    perturbed.x[program.layout.p_i.start + j] += 1.0;
    let after = battery_cone_residual(&perturbed, &program);
    for (k, (a, b)) in base.iter().zip(&after).enumerate() {
        if k == j {
            assert!(*b > a + 1e-6, "step {k}: {a} -> {b}");
        } else {
            assert_eq!(a, b);
        }
    }
}

#[test]
fn zero_terminal_power_has_zero_cone_residual() {
    let cycle = DriveCycle::flat("rest", 1.0, vec![0.0, 0.5]).unwrap();
    let program = scooter_program(&cycle, TranscribeOptions::default());
    let mut x = vec![0.0; program.n_vars()];
    x[program.layout.e_b_max] = 500.0;
    x[program.layout.e_b.start] = 500.0;
    let sol = Solution {
        status: SolveStatus::Optimal,
        objective: 0.0,
        x,
        stats: Default::default(),
        residuals: None,
    };
    assert_eq!(battery_cone_residual(&sol, &program), vec![0.0]);
}

#[test]
fn component_costs_close_on_published_optima() {
    let scooter = cost_breakdown(&presets::scooter(), 590.0, 435.0, 0.0, 1000.0);
    assert!((scooter.c_comp - 271.6).abs() < 0.05);
    assert!((scooter.c_comp - 272.0).abs() <= 1.0);
    let moped = cost_breakdown(&presets::moped_fgt(), 2370.0, 2549.0, 0.0, 1000.0);
    assert!((moped.c_comp - 1174.8).abs() < 0.05);
    assert!((moped.c_comp - 1175.0).abs() <= 1.0);
    assert_eq!(scooter.c_op, 0.0);
    assert_eq!(scooter.tco, scooter.c_comp);
}

#[test]
fn operating_cost_scales_to_lifetime_distance() {
    let params = presets::scooter();
    // 20 Wh over 1 km, 0.22 per kWh, lifetime distance from the parameter set.
    let c = cost_breakdown(&params, 590.0, 435.0, 20.0, 1000.0);
    assert_relative_eq!(c.c_op, 0.020 * 0.22 * params.d_max_km, max_relative = 1e-12);
}

#[test]
fn breakdown_matches_solver_objective() {
    let cycle = common::trapezoid(6.0, 6, 30);
    let program = scooter_program(&cycle, TranscribeOptions::default());
    let sol = common::solve(&program);
    let costs = objective_breakdown(&sol, &program, &presets::scooter()).unwrap();
    let reg = program.meta.ratio_weight * sol.x[program.layout.design_ratio()];
    assert_relative_eq!(costs.tco + reg, sol.objective, max_relative = 1e-6);
}

#[test]
fn dropping_the_range_constraint_never_raises_the_optimum() {
    let cycle = common::trapezoid(6.0, 6, 30);
    let with = common::solve(&scooter_program(&cycle, TranscribeOptions::default()));
    let without = common::solve(&scooter_program(
        &cycle,
        TranscribeOptions { range_constraint: false, ..Default::default() },
    ));
    assert!(with.is_optimal() && without.is_optimal());
    assert!(without.objective <= with.objective * (1.0 + 1e-7), "{} > {}", without.objective, with.objective);
}

#[test]
fn per_step_encoding_with_unit_coverage_matches_scalar() {
    let cycle = presets::urban_cycle(presets::VehicleClass::Scooter).unwrap();
    let scalar = common::solve(&scooter_program(&cycle, TranscribeOptions::default()));
    let per_step = common::solve(&scooter_program(
        &cycle,
        TranscribeOptions { encoding: Some(RatioEncoding::PerStep { coverage: 1.0 }), ..Default::default() },
    ));
    assert!(scalar.is_optimal() && per_step.is_optimal());
    assert_relative_eq!(scalar.objective, per_step.objective, max_relative = 1e-6);
}

#[test]
fn transcription_is_deterministic() {
    let cycle = presets::hilly_cycle(presets::VehicleClass::Scooter).unwrap();
    let a = scooter_program(&cycle, TranscribeOptions::default()).to_json().unwrap();
    let b = scooter_program(&cycle, TranscribeOptions::default()).to_json().unwrap();
    assert_eq!(a, b);
}

#[test]
fn energy_dynamics_telescope() {
    let cycle = presets::urban_cycle(presets::VehicleClass::Scooter).unwrap();
    let program = scooter_program(&cycle, TranscribeOptions::default());
    let sol = common::solve(&program);
    let l = &program.layout;
    let drawn: f64 = sol.x[l.p_i.clone()].iter().map(|p| p * program.meta.dt / 3600.0).sum();
    let e = &sol.x[l.e_b.clone()];
    assert_relative_eq!(drawn, e[0] - e[e.len() - 1], max_relative = 1e-6);
    assert_relative_eq!(sol.x[l.delta_e], e[0] - e[e.len() - 1], max_relative = 1e-6);
    assert_relative_eq!(e[0], presets::scooter().zeta_max * sol.x[l.e_b_max], max_relative = 1e-8);
}

#[test]
fn relaxations_are_tight_on_the_urban_cycle() {
    let cycle = presets::urban_cycle(presets::VehicleClass::Scooter).unwrap();
    let program = scooter_program(&cycle, TranscribeOptions::default());
    let sol = common::solve(&program);
    let r = sol.residuals.as_ref().unwrap();
    assert!(r.max() <= 1e-4, "{r:?}");
    assert!(r.clamped_steps.len() < cycle.steps() / 4);
}

#[test]
fn program_and_solution_round_trip_through_json() {
    let cycle = common::trapezoid(5.0, 4, 8);
    let program = scooter_program(&cycle, TranscribeOptions::default());
    let back = ConicProgram::from_json(&program.to_json().unwrap()).unwrap();
    assert_eq!(back, program);

    let sol = common::solve(&program);
    let env = sol.to_envelope(&program);
    let json = serde_json::to_string(&env).unwrap();
    let imported = Solution::from_envelope(&program, &serde_json::from_str(&json).unwrap()).unwrap();
    assert_eq!(imported.x, sol.x);
    assert_eq!(imported.residuals, sol.residuals);
}

#[test]
fn every_cone_references_declared_variables() {
    let cycle = presets::urban_cycle(presets::VehicleClass::Moped).unwrap();
    let motor = scale_motor(common::motor(), 2600.0).unwrap();
    let program = transcribe(&cycle, &presets::moped_cvt(), &motor, common::battery(), 155.0).unwrap();
    program.check().unwrap();
    assert!(program.cones.iter().all(|c| c.dim() == 3));
    assert_eq!(program.meta.steps, cycle.len() - 1);
}
