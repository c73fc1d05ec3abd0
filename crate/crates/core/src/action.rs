use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of distinct environment actions.
pub const ACTION_COUNT: usize = 17;

/// One unit change applied to the dynamic elements of the environment.
///
/// The declaration order is the canonical total order used for iteration,
/// Q-table layout and tie-breaking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EnvAction {
    ThrottleUp,
    ThrottleDown,
    SteerUp,
    SteerDown,
    LightUp,
    LightDown,
    WeatherUp,
    WeatherDown,
    FogUp,
    FogDown,
    PedSpeedUp,
    PedSpeedDown,
    PedDirXUp,
    PedDirXDown,
    PedDirYUp,
    PedDirYDown,
    NoOp,
}

impl EnvAction {
    pub const ALL: [EnvAction; ACTION_COUNT] = [
        EnvAction::ThrottleUp,
        EnvAction::ThrottleDown,
        EnvAction::SteerUp,
        EnvAction::SteerDown,
        EnvAction::LightUp,
        EnvAction::LightDown,
        EnvAction::WeatherUp,
        EnvAction::WeatherDown,
        EnvAction::FogUp,
        EnvAction::FogDown,
        EnvAction::PedSpeedUp,
        EnvAction::PedSpeedDown,
        EnvAction::PedDirXUp,
        EnvAction::PedDirXDown,
        EnvAction::PedDirYUp,
        EnvAction::PedDirYDown,
        EnvAction::NoOp,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvAction::ThrottleUp => "ThrottleUp",
            EnvAction::ThrottleDown => "ThrottleDown",
            EnvAction::SteerUp => "SteerUp",
            EnvAction::SteerDown => "SteerDown",
            EnvAction::LightUp => "LightUp",
            EnvAction::LightDown => "LightDown",
            EnvAction::WeatherUp => "WeatherUp",
            EnvAction::WeatherDown => "WeatherDown",
            EnvAction::FogUp => "FogUp",
            EnvAction::FogDown => "FogDown",
            EnvAction::PedSpeedUp => "PedSpeedUp",
            EnvAction::PedSpeedDown => "PedSpeedDown",
            EnvAction::PedDirXUp => "PedDirXUp",
            EnvAction::PedDirXDown => "PedDirXDown",
            EnvAction::PedDirYUp => "PedDirYUp",
            EnvAction::PedDirYDown => "PedDirYDown",
            EnvAction::NoOp => "NoOp",
        }
    }
}

impl fmt::Display for EnvAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvAction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown action `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_matches_indices() {
        for (i, a) in EnvAction::ALL.iter().enumerate() {
            assert_eq!(a.index(), i);
            assert_eq!(EnvAction::from_index(i), Some(*a));
            assert_eq!(a.name().parse::<EnvAction>().unwrap(), *a);
        }
        assert!(EnvAction::ALL.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(EnvAction::from_index(ACTION_COUNT), None);
    }

    #[test]
    fn serializes_as_variant_name() {
        let s = serde_json::to_string(&EnvAction::PedDirYDown).unwrap();
        assert_eq!(s, "\"PedDirYDown\"");
    }
}
