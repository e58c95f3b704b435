//! Straight-through backward rules, stochastic rounding, and Monte Carlo
//! bias/variance measurement inside the dead zone.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code::TernaryCode;
use crate::error::{ensure_finite, ensure_positive, Result, SztError};
use crate::numerics::{erf, RunningStats, SQRT_2, SQRT_PI};
use crate::prior::Prior;
use crate::rng::RandomSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SteKind {
    Bt,
    Szt,
    Sr,
}

impl SteKind {
    pub const ALL: [SteKind; 3] = [SteKind::Bt, SteKind::Szt, SteKind::Sr];

    pub fn name(self) -> &'static str {
        match self {
            SteKind::Bt => "bt",
            SteKind::Szt => "szt",
            SteKind::Sr => "sr",
        }
    }

    pub fn is_deterministic(self) -> bool {
        !matches!(self, SteKind::Sr)
    }
}

impl std::str::FromStr for SteKind {
    type Err = SztError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bt" => Ok(SteKind::Bt),
            "szt" => Ok(SteKind::Szt),
            "sr" => Ok(SteKind::Sr),
            other => Err(SztError::InvalidInput(format!("unknown estimator '{other}' (expected bt, szt or sr)"))),
        }
    }
}

/// Per-weight multiplier applied to the upstream gradient.
#[inline]
pub fn ste_factor(kind: SteKind, w: f64, delta: f64, code: TernaryCode) -> f64 {
    if kind == SteKind::Szt && w.abs() <= delta {
        f64::from(code.stored_sign())
    } else {
        1.0
    }
}

pub fn ste_backward(
    kind: SteKind,
    w: f64,
    delta: f64,
    code: TernaryCode,
    upstream: &[f64],
    rng: Option<&mut RandomSource>,
) -> Result<Vec<f64>> {
    ensure_finite("ste_backward", "w", w)?;
    ensure_positive("ste_backward", "delta", delta)?;
    if kind == SteKind::Sr && rng.is_none() {
        return Err(SztError::MissingRandomness);
    }
    let f = ste_factor(kind, w, delta, code);
    Ok(upstream.iter().map(|g| f * g).collect())
}

/// Distance-weighted stochastic rounding to `{-1, 0, +1}` (zero stored as `0⁺`).
pub fn sr_round(w: f64, delta: f64, rng: &mut RandomSource) -> TernaryCode {
    let u = w.abs() / delta;
    let up = u >= 1.0 || rng.uniform() < u;
    match (up, w < 0.0) {
        (false, _) => TernaryCode::ZeroPlus,
        (true, false) => TernaryCode::PlusOne,
        (true, true) => TernaryCode::MinusOne,
    }
}

fn ensure_in_zone(op: &'static str, w: f64, delta: f64) -> Result<()> {
    ensure_finite(op, "w", w)?;
    ensure_positive(op, "delta", delta)?;
    if w.abs() > delta {
        return Err(SztError::OutOfDomain { op, detail: format!("|w| = {} exceeds delta = {delta}", w.abs()) });
    }
    Ok(())
}

pub fn bias_bound(kind: SteKind, w: f64, delta: f64, g_norm: f64) -> Result<f64> {
    ensure_in_zone("bias_bound", w, delta)?;
    if !(g_norm >= 0.0) {
        return Err(SztError::InvalidInput(format!("g_norm must be non-negative, got {g_norm}")));
    }
    Ok(match kind {
        SteKind::Bt => g_norm,
        SteKind::Szt => w.abs() / delta * g_norm,
        SteKind::Sr => 0.0,
    })
}

pub fn variance_bound(kind: SteKind, delta: f64, g_norm: f64) -> Result<f64> {
    ensure_positive("variance_bound", "delta", delta)?;
    if !(g_norm >= 0.0) {
        return Err(SztError::InvalidInput(format!("g_norm must be non-negative, got {g_norm}")));
    }
    Ok(match kind {
        SteKind::Bt | SteKind::Szt => 0.0,
        SteKind::Sr => 0.25 * delta * delta * g_norm * g_norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasVarianceReport {
    pub bias_sq: f64,
    pub variance: f64,
    pub mse: f64,
    pub trials: u64,
    /// Standard error of `variance` across trials.
    pub variance_std_err: f64,
}

/// Dead-zone estimator output of one trial, measured against a true
/// gradient of zero.
///
/// * BT passes `g` unchanged.
/// * SZT passes `sgn(q)·(|w|/Δ)·g`: the stored-sign update attenuated by the
///   normalized distance to the zero crossing.
/// * SR passes `(Δ·v(q) − w)·g` with `q` drawn by [`sr_round`].
fn dead_zone_sample(kind: SteKind, w: f64, delta: f64, g: &[f64], rng: &mut RandomSource) -> Vec<f64> {
    let factor = match kind {
        SteKind::Bt => 1.0,
        SteKind::Szt => {
            let sign = if w < 0.0 { -1.0 } else { 1.0 };
            sign * w.abs() / delta
        }
        SteKind::Sr => delta * f64::from(sr_round(w, delta, rng).numeric_value()) - w,
    };
    g.iter().map(|x| factor * x).collect()
}

pub fn mse_estimate_mc(kind: SteKind, w: f64, delta: f64, g: &[f64], trials: u64, seed: u64) -> Result<BiasVarianceReport> {
    ensure_in_zone("mse_estimate_mc", w, delta)?;
    if trials == 0 {
        return Err(SztError::InvalidInput("trials must be at least 1".into()));
    }
    if let Some(bad) = g.iter().find(|x| !x.is_finite()) {
        return Err(SztError::InvalidInput(format!("non-finite gradient entry {bad}")));
    }
    let root = RandomSource::new(seed);
    let samples: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| dead_zone_sample(kind, w, delta, g, &mut root.child(t)))
        .collect();

    let mut per_dim = vec![RunningStats::new(); g.len()];
    for s in &samples {
        for (stats, &x) in per_dim.iter_mut().zip(s) {
            stats.push(x);
        }
    }
    let mean: Vec<f64> = per_dim.iter().map(RunningStats::mean).collect();
    let bias_sq = mean.iter().map(|m| m * m).sum::<f64>();
    let spread: RunningStats = samples
        .iter()
        .map(|s| s.iter().zip(&mean).map(|(x, m)| (x - m).powi(2)).sum::<f64>())
        .collect();
    let variance = per_dim.iter().map(RunningStats::variance).sum::<f64>();
    Ok(BiasVarianceReport {
        bias_sq,
        variance,
        mse: bias_sq + variance,
        trials,
        variance_std_err: spread.std_error(),
    })
}

/// `E[(|w|/Δ)² | |w| ≤ Δ]` at `Δ = kσ`.
pub fn avg_dead_zone_mse(prior: &Prior, k: f64) -> Result<f64> {
    ensure_positive("avg_dead_zone_mse", "k", k)?;
    match prior {
        Prior::Laplace { .. } => {
            let a = SQRT_2 * k;
            let em1 = a.exp_m1();
            Ok((em1 - a - k * k) / (k * k * em1))
        }
        Prior::Gaussian { .. } => {
            Ok(1.0 / (k * k) - SQRT_2 * (-0.5 * k * k).exp() / (SQRT_PI * k * erf(k / SQRT_2)))
        }
        _ => avg_dead_zone_mse_quadrature(prior, k),
    }
}

/// Quadrature route of [`avg_dead_zone_mse`] over the truncated density.
pub fn avg_dead_zone_mse_quadrature(prior: &Prior, k: f64) -> Result<f64> {
    ensure_positive("avg_dead_zone_mse", "k", k)?;
    let delta = k * prior.sigma();
    let mass = prior.abs_cdf(delta);
    if !(mass > 0.0) {
        return Err(SztError::InvalidInput(format!("prior puts no mass inside the dead zone at k = {k}")));
    }
    let num = prior.integrate_against(|w| (w / delta).powi(2), -delta, delta)?;
    Ok(num / mass)
}

/// Iterates `m ← βm + ĝ` inside the dead zone and returns `‖m‖²` after
/// every step. BT's true in-zone Jacobian is 0, so `ĝ = 0`; SZT and SR feed
/// the gradient sequence through (cycled if shorter than `steps`).
pub fn momentum_simulate(kind: SteKind, beta: f64, m0: f64, g_seq: &[f64], steps: usize) -> Result<Vec<f64>> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(SztError::InvalidInput(format!("beta must lie in (0, 1), got {beta}")));
    }
    ensure_finite("momentum_simulate", "m0", m0)?;
    if kind != SteKind::Bt && g_seq.is_empty() && steps > 0 {
        return Err(SztError::InvalidInput("gradient sequence is empty".into()));
    }
    let mut m = m0;
    let mut out = Vec::with_capacity(steps);
    for t in 0..steps {
        let g = match kind {
            SteKind::Bt => 0.0,
            _ => g_seq[t % g_seq.len()],
        };
        m = beta * m + g;
        out.push(m * m);
    }
    Ok(out)
}
