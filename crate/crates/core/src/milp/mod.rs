//! Mixed-integer model of the joint batching, orientation and nesting
//! problem: construction, LP-format export, solution import and the
//! batch-count trial loop.

mod build;
mod lp;
mod model;
mod solution;
mod trial;

pub use build::{big_m_values, build_model, loose_big_m, BigMTable, ModelOptions};
pub use lp::emit_lp;
pub use model::{Constraint, Family, LinearModel, Sense, VarId, VarKey, VarKind, Variable};
pub use solution::{
    check_assignment, decode_plan, encode_plan, parse_solution, write_solution, Assignment, BINARY_REJECT_TOLERANCE,
    BINARY_ROUND_TOLERANCE,
};
pub use trial::{
    batch_count_trial, initial_batch_count, SolveHook, SolveOutcome, TrialResult, TrialStep, TrialVerdict,
};
