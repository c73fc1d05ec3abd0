//! Discretized observations.
//!
//! Every continuous quantity is stored as an integer count of tenths so that
//! equality and hashing never depend on floating point comparison.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{contract, Result};

/// Fixed-point value with one decimal digit.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tenths(pub i16);

impl Tenths {
    pub const ZERO: Tenths = Tenths(0);

    /// Rounds to the nearest tenth, halves away from zero, saturating at the
    /// `i16` range.
    pub fn quantize(x: f64) -> Self {
        Self::saturate((x * 10.0).round())
    }

    /// Rounds to the nearest multiple of `step` (in units, e.g. `2.5`).
    pub fn quantize_step(x: f64, step: f64) -> Self {
        let k = (x / step).round();
        Self::saturate((k * step * 10.0).round())
    }

    fn saturate(t: f64) -> Self {
        if t.is_nan() {
            return Tenths(0);
        }
        Tenths(t.clamp(i16::MIN as f64, i16::MAX as f64) as i16)
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 10.0
    }
}

impl fmt::Debug for Tenths {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1}", self.value())
    }
}

impl fmt::Display for Tenths {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1}", self.value())
    }
}

impl Serialize for Tenths {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for Tenths {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let x = f64::deserialize(d)?;
        let scaled = x * 10.0;
        let r = scaled.round();
        if !x.is_finite() || (scaled - r).abs() > 1e-6 || r < i16::MIN as f64 || r > i16::MAX as f64 {
            return Err(D::Error::custom(format!("{x} is not a one-decimal fixed-point value")));
        }
        Ok(Tenths(r as i16))
    }
}

/// Maps `x` in `[lo, hi)` onto one of ten equal cells, clamping outside values.
pub fn grid_cell(x: f64, lo: f64, hi: f64) -> u8 {
    if !x.is_finite() || hi <= lo {
        return 0;
    }
    let c = ((x - lo) / (hi - lo) * 10.0).floor();
    c.clamp(0.0, 9.0) as u8
}

/// Position cell, velocity and acceleration of a vehicle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VehicleState {
    pub grid_x: u8,
    pub grid_y: u8,
    pub vx: Tenths,
    pub vy: Tenths,
    pub ax: Tenths,
    pub ay: Tenths,
}

/// Heading and velocity of the pedestrian.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PedestrianState {
    pub dir_x: Tenths,
    pub dir_y: Tenths,
    pub vx: Tenths,
    pub vy: Tenths,
}

/// Hashable snapshot of the environment: ego vehicle, vehicle in front
/// (relative to the ego vehicle), pedestrian, weather, fog and light.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DiscretizedState {
    pub ev: VehicleState,
    pub vif: VehicleState,
    pub ped: PedestrianState,
    pub weather: Tenths,
    pub fog: Tenths,
    pub light: Tenths,
}

/// Tenths per weather/fog/light increment.
pub const LEVEL_STEP_TENTHS: i16 = 25;

impl DiscretizedState {
    /// Checks every field against its declared discrete range.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("ev", &self.ev), ("vif", &self.vif)] {
            if v.grid_x > 9 || v.grid_y > 9 {
                return Err(contract(format!("{name} grid cell ({}, {}) outside 0..=9", v.grid_x, v.grid_y)));
            }
        }
        let level = |name: &str, t: Tenths, lo: i16, hi: i16| {
            if t.0 < lo || t.0 > hi || (t.0 - lo) % LEVEL_STEP_TENTHS != 0 {
                Err(contract(format!("{name} = {t} is not on its 2.5 grid in [{}, {}]", lo / 10, hi / 10)))
            } else {
                Ok(())
            }
        };
        level("weather", self.weather, 0, 1000)?;
        level("fog", self.fog, 0, 1000)?;
        level("light", self.light, -300, 1200)?;
        for (name, t) in [("ped.dir_x", self.ped.dir_x), ("ped.dir_y", self.ped.dir_y)] {
            if t.0.abs() > 10 {
                return Err(contract(format!("{name} = {t} outside [-1, 1]")));
            }
        }
        Ok(())
    }
}
