//! Standard normal density, distribution function and Mills ratio.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Φ(x)` without cancellation.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Mills ratio `(1 - Φ(x)) / φ(x)` for `x >= 0`.
///
/// Finite and smooth for every non-negative argument; beyond `x = 30` the
/// direct quotient underflows and a continued fraction takes over.
pub fn mills_ratio(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 30.0 {
        return normal_sf(x) / normal_pdf(x);
    }
    // R(x) = 1 / (x + 1 / (x + 2 / (x + 3 / (x + ...)))), evaluated backwards.
    let mut tail = x;
    for k in (1..=60).rev() {
        tail = x + k as f64 / tail;
    }
    1.0 / tail
}

pub fn sqrt_2pi() -> f64 {
    (2.0 * PI).sqrt()
}
