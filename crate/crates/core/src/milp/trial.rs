use serde::Serialize;

use super::build::{build_model, ModelOptions};
use super::model::LinearModel;
use super::solution::decode_plan;
use crate::domain::{Instance, Plan};
use crate::error::{Error, Result};

/// Verdict of an external or embedded solver on one model.
#[derive(Debug, Clone, PartialEq)]
pub enum SolveOutcome {
    /// Values for every model variable.
    Optimal(Vec<f64>),
    Infeasible,
}

/// Solves a model to optimality or proves it infeasible.
pub trait SolveHook {
    fn solve(&mut self, model: &LinearModel) -> Result<SolveOutcome>;
}

impl<F> SolveHook for F
where
    F: FnMut(&LinearModel) -> Result<SolveOutcome>,
{
    fn solve(&mut self, model: &LinearModel) -> Result<SolveOutcome> {
        self(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialVerdict {
    Infeasible,
    /// The optimum opened every available batch.
    Saturated,
    Accepted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrialStep {
    pub available_batches: usize,
    pub opened_batches: Option<usize>,
    pub verdict: TrialVerdict,
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub plan: Plan,
    pub available_batches: usize,
    pub steps: Vec<TrialStep>,
}

/// `ceil(eta · parts)`, at least 1, guarded against representation error
/// such as `0.1 · 30 = 3.0000000000000004`.
pub fn initial_batch_count(eta: f64, parts: usize) -> usize {
    ((eta * parts as f64 - 1e-9).ceil() as usize).max(1)
}

/// Grows the number of available batches from `ceil(eta · |J|)` until the
/// optimum leaves at least one batch unopened or every part may have its
/// own batch.
pub fn batch_count_trial(
    instance: &Instance,
    eta: f64,
    options: ModelOptions,
    hook: &mut dyn SolveHook,
) -> Result<TrialResult> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidInput(format!("eta must lie in (0, 1), got {eta}")));
    }
    let parts = instance.parts.len();
    if parts == 0 {
        return Err(Error::InvalidInput("instance has no parts".into()));
    }
    let mut n_b = initial_batch_count(eta, parts).min(parts);
    let mut steps = Vec::new();
    loop {
        let model = build_model(instance, n_b, options)?;
        match hook.solve(&model)? {
            SolveOutcome::Infeasible => {
                steps.push(TrialStep {
                    available_batches: n_b,
                    opened_batches: None,
                    verdict: TrialVerdict::Infeasible,
                });
                if n_b >= parts {
                    return Err(Error::Infeasible(format!("no feasible plan even with {n_b} batches")));
                }
            }
            SolveOutcome::Optimal(values) => {
                let plan = decode_plan(&values, &model, instance)?;
                let opened = plan.batches.len();
                if opened < n_b || n_b >= parts {
                    steps.push(TrialStep {
                        available_batches: n_b,
                        opened_batches: Some(opened),
                        verdict: TrialVerdict::Accepted,
                    });
                    return Ok(TrialResult { plan, available_batches: n_b, steps });
                }
                steps.push(TrialStep {
                    available_batches: n_b,
                    opened_batches: Some(opened),
                    verdict: TrialVerdict::Saturated,
                });
            }
        }
        n_b += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_count_is_a_guarded_ceiling() {
        assert_eq!(initial_batch_count(0.3, 20), 6);
        assert_eq!(initial_batch_count(0.1, 30), 3);
        assert_eq!(initial_batch_count(0.4, 2), 1);
        assert_eq!(initial_batch_count(0.01, 5), 1);
        assert_eq!(initial_batch_count(0.5, 5), 3);
    }
}
