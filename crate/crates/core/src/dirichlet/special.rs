//! Log-gamma, digamma and trigamma for positive real arguments.
//!
//! All three shift the argument upward with the functional recurrence and
//! then apply the asymptotic (Stirling / Bernoulli) series.

use crate::error::{Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

const LOG_GAMMA_SHIFT: f64 = 15.0;
const PSI_SHIFT: f64 = 6.0;
const TRIGAMMA_SHIFT: f64 = 10.0;

/// B_{2n} / (2n (2n - 1)), n = 1..8
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

/// B_{2n} / (2n), n = 1..8
const PSI_SERIES: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32_760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
];

/// B_{2n}, n = 1..8
const TRIGAMMA_SERIES: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

fn check(z: f64, name: &str) -> Result<()> {
    if z > 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} needs a positive finite argument, got {z}")))
    }
}

/// Horner evaluation of `sum c_n t^n` for `n = 0..`, in the variable `t`.
fn series(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

const FACTORIAL_MAX: f64 = 23.0;

/// Natural log of the gamma function, `z > 0`.
pub fn log_gamma(z: f64) -> Result<f64> {
    check(z, "log_gamma")?;
    Ok(log_gamma_unchecked(z))
}

pub(crate) fn log_gamma_unchecked(z: f64) -> f64 {
    // small integers: ln((z-1)!) directly, free of the cancellation in the
    // shifted series (the product is exact through 22!)
    if z.fract() == 0.0 && z <= FACTORIAL_MAX {
        let mut f = 1.0;
        let mut k = 2.0;
        while k < z {
            f *= k;
            k += 1.0;
        }
        return f.ln();
    }
    let mut x = z;
    let mut prod = 1.0;
    while x < LOG_GAMMA_SHIFT {
        prod *= x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let stirling = (x - 0.5) * x.ln() - x + HALF_LN_2PI + inv * series(&STIRLING, inv * inv);
    stirling - prod.ln()
}

/// Digamma `ψ(z) = d/dz ln Γ(z)`, `z > 0`.
pub fn digamma(z: f64) -> Result<f64> {
    check(z, "digamma")?;
    Ok(digamma_unchecked(z))
}

pub(crate) fn digamma_unchecked(z: f64) -> f64 {
    let mut x = z;
    let mut acc = 0.0;
    while x < PSI_SHIFT {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    acc + x.ln() - 0.5 / x - inv2 * series(&PSI_SERIES, inv2)
}

/// Trigamma `ψ'(z)`, `z > 0`.
pub fn trigamma(z: f64) -> Result<f64> {
    check(z, "trigamma")?;
    Ok(trigamma_unchecked(z))
}

pub(crate) fn trigamma_unchecked(z: f64) -> f64 {
    let mut x = z;
    let mut acc = 0.0;
    while x < TRIGAMMA_SHIFT {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + inv + 0.5 * inv2 + inv * inv2 * series(&TRIGAMMA_SERIES, inv2)
}
