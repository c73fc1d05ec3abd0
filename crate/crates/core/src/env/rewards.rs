use crate::error::{contract, Result};
use crate::scalar::SENTINEL;

/// Smallest normalized distance reported for a non-violating step, which
/// caps distance rewards at 1000, far below the sentinel.
pub const MIN_NORMALIZED_DISTANCE: f64 = 1e-3;

/// `1/d` for `d > 0`, the sentinel for `d == 0`.
pub fn reward_distance(d_normalized: f64) -> Result<f64> {
    if d_normalized.is_nan() || d_normalized < 0.0 {
        return Err(contract(format!("normalized distance {d_normalized} must be >= 0")));
    }
    Ok(if d_normalized > 0.0 { 1.0 / d_normalized } else { SENTINEL })
}

/// Binary traffic-rule reward, with the violation promoted to the sentinel.
pub fn reward_traffic_light(violated: bool) -> f64 {
    if violated {
        SENTINEL
    } else {
        0.0
    }
}

/// Maps a physical clearance onto `(0, 1]`, or exactly `0` on contact.
pub fn normalized_distance(clearance_m: f64, scale_m: f64) -> f64 {
    if clearance_m <= 0.0 {
        0.0
    } else {
        (clearance_m / scale_m).clamp(MIN_NORMALIZED_DISTANCE, 1.0)
    }
}
