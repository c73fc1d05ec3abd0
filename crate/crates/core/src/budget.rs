use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

/// Environment-step budget shared by every search approach.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    total_steps: u64,
    consumed_steps: u64,
}

impl Budget {
    pub fn new(total_steps: u64) -> Self {
        Self { total_steps, consumed_steps: 0 }
    }

    pub fn total(&self) -> u64 {
        self.total_steps
    }

    pub fn consumed(&self) -> u64 {
        self.consumed_steps
    }

    pub fn remaining(&self) -> u64 {
        self.total_steps - self.consumed_steps
    }

    pub fn exhausted(&self) -> bool {
        self.consumed_steps >= self.total_steps
    }

    /// Records one environment step.
    pub fn charge(&mut self) -> Result<()> {
        if self.exhausted() {
            return Err(contract("budget charged past its total"));
        }
        self.consumed_steps += 1;
        Ok(())
    }
}
