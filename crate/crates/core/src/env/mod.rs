//! Environments under test.
//!
//! An environment is reset to a seeded initial configuration, observed as a
//! [`DiscretizedState`], and advanced one step at a time by an [`EnvAction`],
//! returning one reward per objective.

mod chain;
mod lanesim;
mod rewards;
mod scripted;

pub use chain::ChainMdp;
pub use lanesim::{LaneSim, LaneSimConfig, LightCycle, RoadType, Snapshot, LANESIM_OBJECTIVES};
pub use rewards::{normalized_distance, reward_distance, reward_traffic_light, MIN_NORMALIZED_DISTANCE};
pub use scripted::{ScriptFn, ScriptStep, ScriptedEnv};

use crate::action::EnvAction;
use crate::error::{Error, Result};
use crate::reward::RewardVector;
use crate::scalar::Scalar;
use crate::state::DiscretizedState;

/// Result of performing one action.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome<T> {
    pub rewards: RewardVector<T>,
    pub terminal: bool,
    /// Environment-native rewards, present when some channel was promoted
    /// to the sentinel (e.g. a binary traffic-light reward).
    pub raw: Option<RewardVector<T>>,
}

pub trait Environment<T: Scalar> {
    fn env_id(&self) -> &str;

    fn seed(&self) -> u64;

    fn n_objectives(&self) -> usize;

    /// Per-episode step cap.
    fn j_max(&self) -> usize;

    /// Actions this environment accepts, in canonical order.
    fn actions(&self) -> &[EnvAction];

    /// Restores the seeded initial configuration and returns its observation.
    fn reset(&mut self) -> DiscretizedState;

    /// Current observation; never mutates the environment.
    fn observe(&self) -> DiscretizedState;

    /// Advances one time step.
    fn perform(&mut self, action: EnvAction) -> Result<StepOutcome<T>>;

    fn is_terminal(&self) -> bool;

    /// Steps performed since the last reset.
    fn steps_taken(&self) -> usize;

    fn objective_names(&self) -> Vec<String> {
        (0..self.n_objectives()).map(|i| format!("o{i}")).collect()
    }
}

/// Parsed form of an environment id string.
#[derive(Clone, Debug, PartialEq)]
pub enum EnvKind {
    LaneSim(RoadType),
    Chain(usize),
}

impl EnvKind {
    pub fn parse(env_id: &str) -> Result<Self> {
        let unknown = || Error::UnknownEnv(env_id.to_string());
        let (family, arg) = env_id.split_once(':').ok_or_else(unknown)?;
        match family {
            "lanesim" => Ok(EnvKind::LaneSim(arg.parse().map_err(|_| unknown())?)),
            "chain" => {
                let n: usize = arg.parse().map_err(|_| unknown())?;
                if n < 2 {
                    return Err(unknown());
                }
                Ok(EnvKind::Chain(n))
            }
            _ => Err(unknown()),
        }
    }
}

/// Environment ids recognised by [`build_env`], with a short description.
pub fn known_envs() -> Vec<(&'static str, &'static str)> {
    vec![
        ("lanesim:straight", "LaneSim, straight road, 6 objectives"),
        ("lanesim:left", "LaneSim, left turn, 6 objectives"),
        ("lanesim:right", "LaneSim, right turn, 6 objectives"),
        ("chain:5", "5-state chain MDP oracle, 1 objective"),
    ]
}

/// Builds an environment from its id. `lanesim` ids take their road type
/// from the id and everything else from `config` (defaults when `None`).
pub fn build_env<T: Scalar>(env_id: &str, seed: u64, config: Option<&LaneSimConfig>) -> Result<Box<dyn Environment<T> + Send>> {
    match EnvKind::parse(env_id)? {
        EnvKind::LaneSim(road) => {
            let mut cfg = config.cloned().unwrap_or_default();
            cfg.road = road;
            Ok(Box::new(LaneSim::new(cfg, seed)?))
        }
        EnvKind::Chain(n) => Ok(Box::new(ChainMdp::new(n, seed))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_known_ids() {
        assert_eq!(EnvKind::parse("lanesim:straight").unwrap(), EnvKind::LaneSim(RoadType::Straight));
        assert_eq!(EnvKind::parse("lanesim:left").unwrap(), EnvKind::LaneSim(RoadType::LeftTurn));
        assert_eq!(EnvKind::parse("lanesim:right").unwrap(), EnvKind::LaneSim(RoadType::RightTurn));
        assert_eq!(EnvKind::parse("chain:5").unwrap(), EnvKind::Chain(5));
        for bad in ["lanesim", "lanesim:up", "chain:x", "chain:1", "carla:town05"] {
            assert!(matches!(EnvKind::parse(bad), Err(Error::UnknownEnv(_))), "{bad}");
        }
    }

    #[test]
    fn every_listed_env_builds() {
        for (id, _) in known_envs() {
            let env = build_env::<f64>(id, 3, None).unwrap();
            assert_eq!(env.env_id(), id);
            assert_eq!(env.seed(), 3);
        }
    }
}
