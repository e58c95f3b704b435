//! PAC-Bayes risk bound and the categorical KL algebra of the split zero.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SztError};
use crate::numerics::LN_2;

/// `L̂ + √((KL + ln(2√N/δ)) / (2(N−1)))`.
pub fn pac_bayes_bound(emp_loss: f64, kl: f64, n: u64, delta_conf: f64) -> Result<f64> {
    if n < 2 {
        return Err(SztError::InvalidInput(format!("sample count must be at least 2, got {n}")));
    }
    if !(0.0..=1.0).contains(&emp_loss) {
        return Err(SztError::InvalidInput(format!("empirical loss must lie in [0, 1], got {emp_loss}")));
    }
    if !(kl >= 0.0 && kl.is_finite()) {
        return Err(SztError::InvalidInput(format!("KL must be finite and non-negative, got {kl}")));
    }
    if !(delta_conf > 0.0 && delta_conf < 1.0) {
        return Err(SztError::InvalidInput(format!("confidence delta must lie in (0, 1), got {delta_conf}")));
    }
    let n = n as f64;
    let complexity = kl + (2.0 * n.sqrt() / delta_conf).ln();
    Ok(emp_loss + (complexity / (2.0 * (n - 1.0))).sqrt())
}

/// `√(d P₀ ln 2 / (2(N−1)))`.
pub fn pac_bayes_gap(d: u64, p0: f64, n: u64) -> Result<f64> {
    if d < 1 || n < 2 {
        return Err(SztError::InvalidInput(format!("need d >= 1 and N >= 2, got d = {d}, N = {n}")));
    }
    if !(0.0..=1.0).contains(&p0) {
        return Err(SztError::InvalidInput(format!("p0 must lie in [0, 1], got {p0}")));
    }
    Ok((d as f64 * p0 * LN_2 / (2.0 * (n as f64 - 1.0))).sqrt())
}

/// `d · P₀ · ln 2` nats.
pub fn kl_reduction(d: u64, p0: f64) -> f64 {
    d as f64 * p0 * LN_2
}

/// `Σ q_i ln(q_i / p_i)` with `0 ln 0 = 0`. `p` may be any positive
/// measure; it is not renormalized.
pub fn kl_categorical(q: &[f64], p: &[f64]) -> Result<f64> {
    if q.len() != p.len() {
        return Err(SztError::LengthMismatch(format!("{} posterior vs {} prior categories", q.len(), p.len())));
    }
    let mut total = 0.0;
    for (&qi, &pi) in q.iter().zip(p) {
        if !(qi >= 0.0 && pi >= 0.0) {
            return Err(SztError::InvalidInput(format!("masses must be non-negative, got q = {qi}, p = {pi}")));
        }
        if qi > 0.0 {
            if pi == 0.0 {
                return Err(SztError::InvalidInput("posterior mass on a category the prior excludes".into()));
            }
            total += qi * (qi / pi).ln();
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlSplitReport {
    pub kl_bt: f64,
    /// Four-state KL with the prior placing the full zero mass on each of
    /// `0⁺` and `0⁻`.
    pub kl_szt: f64,
    pub difference: f64,
    pub expected: f64,
    /// Four-state KL against the normalized prior that halves the zero mass.
    pub kl_szt_normalized: f64,
    pub difference_normalized: f64,
}

fn check_simplex(name: &str, v: &[f64; 3]) -> Result<()> {
    let sum: f64 = v.iter().sum();
    if v.iter().any(|x| !(*x >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
        return Err(SztError::InvalidInput(format!("{name} {v:?} is not a probability vector")));
    }
    Ok(())
}

/// One weight with three-state posterior `(P₋, P₀, P₊)` and prior
/// `(π₋, π₀, π₊)`. The four-state posterior splits `P₀` evenly across the
/// signed zeros.
pub fn kl_split_check(posterior: [f64; 3], prior: [f64; 3]) -> Result<KlSplitReport> {
    check_simplex("posterior", &posterior)?;
    check_simplex("prior", &prior)?;
    let [q_neg, q0, q_pos] = posterior;
    let [p_neg, p0, p_pos] = prior;
    let q4 = [q_neg, 0.5 * q0, 0.5 * q0, q_pos];
    let kl_bt = kl_categorical(&posterior, &prior)?;
    let kl_szt = kl_categorical(&q4, &[p_neg, p0, p0, p_pos])?;
    let kl_szt_normalized = kl_categorical(&q4, &[p_neg, 0.5 * p0, 0.5 * p0, p_pos])?;
    Ok(KlSplitReport {
        kl_bt,
        kl_szt,
        difference: kl_bt - kl_szt,
        expected: q0 * LN_2,
        kl_szt_normalized,
        difference_normalized: kl_bt - kl_szt_normalized,
    })
}
