//! Standard normal helpers with care in the far tails.

use statrs::distribution::{ContinuousCDF, Normal};
use libm::erfc;
use std::f64::consts::FRAC_1_SQRT_2;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this the Mills-ratio continued fraction replaces `erfc`.
const TAIL: f64 = -5.0;

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// Φ(x).
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Φ⁻¹(p). Returns ±∞ at the endpoints.
pub fn norm_ppf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    Normal::standard().inverse_cdf(p)
}

/// Mills ratio R(t) = (1 − Φ(t)) / φ(t) for t ≥ 3 via Laplace's continued
/// fraction, evaluated bottom-up.
fn mills_ratio_upper(t: f64) -> f64 {
    let mut acc = t;
    for k in (1..=60).rev() {
        acc = t + k as f64 / acc;
    }
    1.0 / acc
}

/// ln Φ(x), finite for every finite x.
pub fn norm_log_cdf(x: f64) -> f64 {
    if x < TAIL {
        -0.5 * x * x - LN_SQRT_2PI + mills_ratio_upper(-x).ln()
    } else if x > 5.0 {
        // ln(1 − Φ(−x)) with Φ(−x) tiny
        (-norm_cdf(-x)).ln_1p()
    } else {
        norm_cdf(x).ln()
    }
}

/// φ(x)/Φ(x), the first derivative of ln Φ.
pub fn inv_mills(x: f64) -> f64 {
    if x < TAIL {
        1.0 / mills_ratio_upper(-x)
    } else {
        norm_pdf(x) / norm_cdf(x)
    }
}

/// Two-sided normal p-value 2·(1 − Φ(|z|)).
pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() * FRAC_1_SQRT_2)
}

/// Logistic function 1 / (1 + e^{−x}) without overflow.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln σ(x) = −ln(1 + e^{−x}).
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}
