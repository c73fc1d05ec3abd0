use serde::{Deserialize, Serialize};

use crate::action::EnvAction;
use crate::state::DiscretizedState;

/// One executed step: the observed state and the action applied in it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Step {
    pub state: DiscretizedState,
    pub action: EnvAction,
}

/// Ordered state/action sequence replayable from a seeded initial environment.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TestCase {
    pub steps: Vec<Step>,
    pub seed: u64,
    pub env_id: String,
}

impl TestCase {
    pub fn new(env_id: impl Into<String>, seed: u64) -> Self {
        Self { steps: Vec::new(), seed, env_id: env_id.into() }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn push(&mut self, state: DiscretizedState, action: EnvAction) {
        self.steps.push(Step { state, action });
    }

    pub fn actions(&self) -> impl Iterator<Item = EnvAction> + '_ {
        self.steps.iter().map(|s| s.action)
    }

    /// Copy of the first `len` steps.
    pub fn prefix(&self, len: usize) -> TestCase {
        TestCase { steps: self.steps[..len.min(self.steps.len())].to_vec(), seed: self.seed, env_id: self.env_id.clone() }
    }
}
