use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Reward assigned to a step at which a requirement is violated.
pub const SENTINEL: f64 = 1_000_000.0;

/// Real number type used for rewards, Q-values and learning rates.
///
/// Implemented for `f32` and `f64`. Environments compute their physics in
/// `f64` and hand rewards over through [`Scalar::of`].
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal, saturating to the type's range.
    fn of(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(|| {
            if x.is_sign_negative() {
                Self::min_value()
            } else {
                Self::max_value()
            }
        })
    }

    fn sentinel() -> Self {
        Self::of(SENTINEL)
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentinel_is_exact_in_both_widths() {
        assert_eq!(f32::sentinel(), 1_000_000.0f32);
        assert_eq!(f64::sentinel(), SENTINEL);
        assert_eq!(f32::sentinel().as_f64(), SENTINEL);
    }
}
