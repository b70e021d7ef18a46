//! Discretization of the co-design problem into a second-order cone program.

pub mod program;
pub mod solution;
pub mod transcribe;

pub use program::{ConeBlock, ConicProgram, LinearBlock, RatioEncoding, SparseMatrix, VarLayout};
pub use solution::{
    battery_cone_residual, cost_breakdown, objective_breakdown, relaxation_residuals, CostBreakdown, Residuals,
    Solution, SolutionEnvelope, SolveStatus, SolverStats,
};
pub use transcribe::{transcribe, transcribe_with, TranscribeOptions, DEFAULT_RATIO_WEIGHT};
