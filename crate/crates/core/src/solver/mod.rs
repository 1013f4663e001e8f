//! Plan search: an exact enumerator for tiny instances and a greedy
//! constructor with local search for realistic ones.

mod brute;
mod heuristic;

pub use brute::{brute_force_capped, brute_force_optimal, BruteForceHook, BruteForceLimits};
pub use heuristic::{
    construct_initial, local_search, local_search_capped, solve_heuristic, HeuristicOutcome, SearchBudget,
};
