use std::sync::Arc;

use crate::action::EnvAction;
use crate::env::{Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::reward::RewardVector;
use crate::scalar::Scalar;
use crate::state::{DiscretizedState, Tenths};

/// Rewards and terminal flag produced by a script for one step.
#[derive(Clone, Debug, PartialEq)]
pub struct ScriptStep {
    pub rewards: Vec<f64>,
    pub terminal: bool,
}

/// Maps the actions performed so far in the episode (the latest one last)
/// to the outcome of the latest step.
pub type ScriptFn = Arc<dyn Fn(&[EnvAction]) -> ScriptStep + Send + Sync>;

/// Environment whose rewards are a pure function of the episode's action
/// history. The observation encodes the step count and the last action.
#[derive(Clone)]
pub struct ScriptedEnv {
    id: String,
    n: usize,
    j_max: usize,
    seed: u64,
    actions: Vec<EnvAction>,
    script: ScriptFn,
    history: Vec<EnvAction>,
    terminal: bool,
}

impl ScriptedEnv {
    pub fn new(id: impl Into<String>, n_objectives: usize, j_max: usize, script: ScriptFn) -> Self {
        Self {
            id: id.into(),
            n: n_objectives,
            j_max,
            seed: 0,
            actions: EnvAction::ALL.to_vec(),
            script,
            history: Vec::new(),
            terminal: false,
        }
    }

    pub fn with_actions(mut self, actions: Vec<EnvAction>) -> Self {
        self.actions = actions;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn history(&self) -> &[EnvAction] {
        &self.history
    }

    fn encode(history: &[EnvAction]) -> DiscretizedState {
        let mut s = DiscretizedState::default();
        s.ev.vx = Tenths(history.len().min(i16::MAX as usize) as i16);
        if let Some(last) = history.last() {
            s.ev.grid_x = (last.index() % 10) as u8;
            s.ev.grid_y = (last.index() / 10 + 1) as u8;
        }
        s
    }
}

impl<T: Scalar> Environment<T> for ScriptedEnv {
    fn env_id(&self) -> &str {
        &self.id
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn n_objectives(&self) -> usize {
        self.n
    }

    fn j_max(&self) -> usize {
        self.j_max
    }

    fn actions(&self) -> &[EnvAction] {
        &self.actions
    }

    fn reset(&mut self) -> DiscretizedState {
        self.history.clear();
        self.terminal = false;
        Self::encode(&self.history)
    }

    fn observe(&self) -> DiscretizedState {
        Self::encode(&self.history)
    }

    fn perform(&mut self, action: EnvAction) -> Result<StepOutcome<T>> {
        if self.terminal {
            return Err(Error::Contract("perform called on a terminal scripted episode".into()));
        }
        if !self.actions.contains(&action) {
            return Err(Error::UnsupportedAction { action: action.to_string(), env_id: self.id.clone() });
        }
        self.history.push(action);
        let out = (self.script)(&self.history);
        if out.rewards.len() != self.n {
            return Err(Error::RewardLength { expected: self.n, got: out.rewards.len() });
        }
        self.terminal = out.terminal || self.history.len() >= self.j_max;
        let rewards = RewardVector::new(out.rewards.into_iter().map(T::of).collect())?;
        Ok(StepOutcome { rewards, terminal: self.terminal, raw: None })
    }

    fn is_terminal(&self) -> bool {
        self.terminal
    }

    fn steps_taken(&self) -> usize {
        self.history.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::SENTINEL;

    #[test]
    fn script_sees_full_history() {
        let script: ScriptFn = Arc::new(|h: &[EnvAction]| ScriptStep {
            rewards: vec![if h.len() == 2 && h[0] == EnvAction::FogUp { SENTINEL } else { 1.0 }],
            terminal: false,
        });
        let mut e = ScriptedEnv::new("scripted", 1, 5, script);
        Environment::<f64>::reset(&mut e);
        let a: StepOutcome<f64> = e.perform(EnvAction::FogUp).unwrap();
        let b: StepOutcome<f64> = e.perform(EnvAction::NoOp).unwrap();
        assert_eq!(a.rewards[0], 1.0);
        assert_eq!(b.rewards[0], SENTINEL);
        assert_ne!(Environment::<f64>::observe(&e), ScriptedEnv::encode(&[]));
    }
}
