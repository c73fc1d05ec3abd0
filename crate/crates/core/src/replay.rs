//! Re-execution of archived test cases.

use serde::{Deserialize, Serialize};

use crate::action::EnvAction;
use crate::archive::ObjectiveId;
use crate::env::Environment;
use crate::error::Result;
use crate::scalar::Scalar;
use crate::state::DiscretizedState;
use crate::testcase::TestCase;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayStep {
    pub index: usize,
    pub state: DiscretizedState,
    pub action: EnvAction,
    pub rewards: Vec<f64>,
    pub terminal: bool,
}

/// Why a replay did not follow the recording.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Divergence {
    /// The observed state differs from the recorded one.
    State { step: usize, expected: DiscretizedState, observed: DiscretizedState },
    /// The episode ended before the recording did.
    EndedEarly { step: usize },
    /// The environment refused the recorded action.
    Rejected { step: usize, message: String },
}

impl Divergence {
    pub fn step(&self) -> usize {
        match self {
            Divergence::State { step, .. } | Divergence::EndedEarly { step } | Divergence::Rejected { step, .. } => *step,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub objective: ObjectiveId,
    pub steps: Vec<ReplayStep>,
    pub divergence: Option<Divergence>,
    /// 0-based index of the first step at which the objective was violated.
    pub violation_step: Option<usize>,
    pub recorded_len: usize,
}

impl ReplayReport {
    /// True when the recording was followed exactly and the objective is
    /// first violated at its final step.
    pub fn reproduced(&self) -> bool {
        self.divergence.is_none() && self.recorded_len > 0 && self.violation_step == Some(self.recorded_len - 1)
    }
}

/// Replays `tc` from a fresh reset of `env`, comparing every observed state
/// with the recorded one.
pub fn replay_test_case<T, E>(env: &mut E, tc: &TestCase, objective: ObjectiveId) -> Result<ReplayReport>
where
    T: Scalar,
    E: Environment<T> + ?Sized,
{
    let mut report =
        ReplayReport { objective, steps: Vec::new(), divergence: None, violation_step: None, recorded_len: tc.len() };
    let mut observed = env.reset();
    for (i, step) in tc.steps.iter().enumerate() {
        if observed != step.state {
            report.divergence = Some(Divergence::State { step: i, expected: step.state, observed });
            break;
        }
        if env.is_terminal() {
            report.divergence = Some(Divergence::EndedEarly { step: i });
            break;
        }
        let out = match env.perform(step.action) {
            Ok(out) => out,
            Err(e) => {
                report.divergence = Some(Divergence::Rejected { step: i, message: e.to_string() });
                break;
            }
        };
        if report.violation_step.is_none() && out.rewards.is_violation(objective) {
            report.violation_step = Some(i);
        }
        report.steps.push(ReplayStep {
            index: i,
            state: step.state,
            action: step.action,
            rewards: out.rewards.to_f64(),
            terminal: out.terminal,
        });
        observed = env.observe();
    }
    Ok(report)
}
