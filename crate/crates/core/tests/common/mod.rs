#![allow(dead_code)]

use std::sync::OnceLock;

use microsize::components::battery::BatteryModel;
use microsize::components::motor::MotorModel;
use microsize::cycle::DriveCycle;
use microsize::designloop::{ClarabelAdapter, SolverAdapter, Tolerances};
use microsize::presets;
use microsize::transcriber::{ConicProgram, Solution};

pub fn motor() -> &'static MotorModel {
    static MODEL: OnceLock<MotorModel> = OnceLock::new();
    MODEL.get_or_init(|| presets::reference_motor_model().unwrap())
}

pub fn battery() -> &'static BatteryModel {
    static MODEL: OnceLock<BatteryModel> = OnceLock::new();
    MODEL.get_or_init(|| presets::default_battery_model().unwrap())
}

pub fn solve(program: &ConicProgram) -> Solution {
    ClarabelAdapter::default().solve(program, &Tolerances::default()).unwrap()
}

/// Accelerate, cruise at `v` and brake, sampled at 1 s.
pub fn trapezoid(v: f64, ramp: usize, cruise: usize) -> DriveCycle {
    let mut speed = vec![0.0];
    for i in 1..=ramp {
        speed.push(v * i as f64 / ramp as f64);
    }
    speed.extend(std::iter::repeat(v).take(cruise));
    for i in (0..ramp).rev() {
        speed.push(v * i as f64 / ramp as f64);
    }
    DriveCycle::flat("trapezoid", 1.0, speed).unwrap()
}
