use crate::action::EnvAction;
use crate::env::{Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::reward::RewardVector;
use crate::scalar::{Scalar, SENTINEL};
use crate::state::{DiscretizedState, Tenths};

/// Deterministic chain: `ThrottleUp` advances one position, `NoOp` stays.
/// Acting in the last position pays `end_reward` and ends the episode.
///
/// With the default sentinel end reward, reaching the end is a violation of
/// the single objective. The optimal discounted value of position `k` is
/// `end_reward * gamma^(len - 1 - k)`.
#[derive(Clone, Debug)]
pub struct ChainMdp {
    id: String,
    len: usize,
    seed: u64,
    end_reward: f64,
    j_max: usize,
    pos: usize,
    steps: usize,
    terminal: bool,
}

const CHAIN_ACTIONS: [EnvAction; 2] = [EnvAction::ThrottleUp, EnvAction::NoOp];

impl ChainMdp {
    pub fn new(len: usize, seed: u64) -> Self {
        Self::with_end_reward(len, seed, SENTINEL)
    }

    pub fn with_end_reward(len: usize, seed: u64, end_reward: f64) -> Self {
        assert!(len >= 2, "chain needs at least two positions");
        Self { id: format!("chain:{len}"), len, seed, end_reward, j_max: 50, pos: 0, steps: 0, terminal: false }
    }

    pub fn with_j_max(mut self, j_max: usize) -> Self {
        self.j_max = j_max.max(1);
        self
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    /// Observation encoding of a chain position.
    pub fn state_of(pos: usize) -> DiscretizedState {
        let mut s = DiscretizedState::default();
        s.ev.grid_x = pos.min(9) as u8;
        s.ev.vx = Tenths(pos as i16);
        s
    }
}

impl<T: Scalar> Environment<T> for ChainMdp {
    fn env_id(&self) -> &str {
        &self.id
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn n_objectives(&self) -> usize {
        1
    }

    fn j_max(&self) -> usize {
        self.j_max
    }

    fn actions(&self) -> &[EnvAction] {
        &CHAIN_ACTIONS
    }

    fn reset(&mut self) -> DiscretizedState {
        self.pos = 0;
        self.steps = 0;
        self.terminal = false;
        Self::state_of(0)
    }

    fn observe(&self) -> DiscretizedState {
        Self::state_of(self.pos)
    }

    fn perform(&mut self, action: EnvAction) -> Result<StepOutcome<T>> {
        if self.terminal {
            return Err(Error::Contract("perform called on a terminal chain episode".into()));
        }
        let reward = if self.pos == self.len - 1 {
            self.terminal = true;
            self.end_reward
        } else {
            match action {
                EnvAction::ThrottleUp => self.pos += 1,
                EnvAction::NoOp => {}
                other => {
                    return Err(Error::UnsupportedAction { action: other.to_string(), env_id: self.id.clone() });
                }
            }
            0.0
        };
        self.steps += 1;
        if self.steps >= self.j_max {
            self.terminal = true;
        }
        Ok(StepOutcome { rewards: RewardVector::new(vec![T::of(reward)])?, terminal: self.terminal, raw: None })
    }

    fn is_terminal(&self) -> bool {
        self.terminal
    }

    fn steps_taken(&self) -> usize {
        self.steps
    }

    fn objective_names(&self) -> Vec<String> {
        vec!["reach_end".into()]
    }
}
