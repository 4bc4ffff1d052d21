//! Phase wrapping helpers.

use std::f64::consts::{PI, TAU};

/// Reduces an angle into `[0, 2π)`.
#[inline]
pub fn wrap_2pi(x: f64) -> f64 {
    // one-step fast paths for the common case of a small excursion
    if (0.0..TAU).contains(&x) {
        return x;
    }
    if (-TAU..0.0).contains(&x) {
        let r = x + TAU;
        return if r >= TAU { 0.0 } else { r };
    }
    if (TAU..2.0 * TAU).contains(&x) {
        let r = x - TAU;
        return if r >= TAU { 0.0 } else { r };
    }
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Reduces an angle into `[-π, π)`.
#[inline]
pub fn wrap_pi(x: f64) -> f64 {
    let r = wrap_2pi(x + PI) - PI;
    if r >= PI {
        r - TAU
    } else {
        r
    }
}
