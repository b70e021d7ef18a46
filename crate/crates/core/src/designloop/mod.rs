//! Mass fixed point per motor size, the motor-size sweep and scenario comparison.

pub mod compare;
pub mod fixed_point;
pub mod solver;
pub mod sweep;

pub use compare::{compare_scenarios, ScenarioDelta, TrendReport};
pub use fixed_point::{mass_fixed_point, DesignPoint, FixedPointSettings, RatioDesign};
pub use solver::{ClarabelAdapter, SolverAdapter, Tolerances};
pub use sweep::{size_grid, sweep, SweepEntry, SweepResult};
