//! State entropies with `P₊ = P₋ = (1 − P₀)/2`, in bits.

use crate::error::{ensure_positive, Result, SztError};
use crate::prior::Prior;

fn check_p0(p0: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p0) {
        return Err(SztError::InvalidInput(format!("p0 must lie in [0, 1], got {p0}")));
    }
    Ok(())
}

/// `-p log₂ p` with `0 log 0 = 0`.
#[inline]
fn h(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

pub fn entropy_bt(p0: f64) -> Result<f64> {
    check_p0(p0)?;
    let side = 0.5 * (1.0 - p0);
    Ok(2.0 * h(side) + h(p0))
}

/// The zero mass splits evenly between `0⁺` and `0⁻`.
pub fn entropy_szt(p0: f64) -> Result<f64> {
    check_p0(p0)?;
    let side = 0.5 * (1.0 - p0);
    Ok(2.0 * h(side) + 2.0 * h(0.5 * p0))
}

/// `H_SZT − H_BT`, which equals `p0` bits.
pub fn entropy_gap(p0: f64) -> Result<f64> {
    check_p0(p0)?;
    Ok(p0)
}

/// `P₀ = Pr(|w| ≤ Δ)`.
pub fn dead_zone_mass(prior: &Prior, delta: f64) -> Result<f64> {
    ensure_positive("dead_zone_mass", "delta", delta)?;
    Ok(prior.abs_cdf(delta))
}
