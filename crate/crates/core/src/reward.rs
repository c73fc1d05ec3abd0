use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::archive::ObjectiveId;
use crate::error::{contract, Result};
use crate::scalar::Scalar;

/// Per-objective rewards observed at one environment step.
///
/// Entry `i` equals the sentinel exactly when objective `i` was violated at
/// that step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound = "T: Scalar")]
pub struct RewardVector<T>(Vec<T>);

impl<T: Scalar> RewardVector<T> {
    /// Fails on negative or non-finite entries.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < T::zero()) {
            return Err(contract(format!("reward[{i}] = {v} must be finite and non-negative")));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn get(&self, objective: ObjectiveId) -> Option<T> {
        self.0.get(objective.index()).copied()
    }

    pub fn is_violation(&self, objective: ObjectiveId) -> bool {
        self.get(objective) == Some(T::sentinel())
    }

    /// Objectives whose sentinel fired at this step, in index order.
    pub fn violations(&self) -> impl Iterator<Item = ObjectiveId> + '_ {
        let s = T::sentinel();
        self.0
            .iter()
            .enumerate()
            .filter(move |(_, v)| **v == s)
            .map(|(i, _)| ObjectiveId(i))
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.as_f64()).collect()
    }
}

impl<T> Index<usize> for RewardVector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

/// True iff any step's reward for `objective` is the violation sentinel.
pub fn satisfy<T: Scalar>(rewards: &[RewardVector<T>], objective: ObjectiveId) -> Result<bool> {
    let mut hit = false;
    for (j, w) in rewards.iter().enumerate() {
        let v = w.get(objective).ok_or_else(|| {
            contract(format!("objective {} out of range for step {j} with {} rewards", objective.index(), w.len()))
        })?;
        hit |= v == T::sentinel();
    }
    Ok(hit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rv(v: &[f64]) -> RewardVector<f64> {
        RewardVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn satisfy_examples() {
        let o = ObjectiveId(0);
        assert!(satisfy(&[rv(&[2.0]), rv(&[5.0]), rv(&[1_000_000.0])], o).unwrap());
        assert!(!satisfy(&[rv(&[2.0]), rv(&[999_999.0])], o).unwrap());
        assert!(!satisfy::<f64>(&[], o).unwrap());
        assert!(satisfy(&[rv(&[2.0])], ObjectiveId(1)).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RewardVector::new(vec![1.0, -0.5]).is_err());
        assert!(RewardVector::new(vec![f64::NAN]).is_err());
        assert!(RewardVector::new(vec![f32::INFINITY]).is_err());
    }

    #[test]
    fn violations_lists_sentinels() {
        let w = rv(&[1.0, 1_000_000.0, 3.0, 1_000_000.0]);
        let v: Vec<_> = w.violations().collect();
        assert_eq!(v, vec![ObjectiveId(1), ObjectiveId(3)]);
    }
}
