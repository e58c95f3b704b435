//! First-passage Monte Carlo for the Ornstein–Uhlenbeck weight proxy
//! `dW = −κW dt + σ dB`, its boundary-value oracle, and the per-step
//! renewal model of dead-zone events.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::sensitivity::{phi_f_unchecked, phi_r_unchecked};
use crate::analysis::StepDist;
use crate::error::{ensure_positive, Result, SztError};
use crate::numerics::{integrate, RunningStats};
use crate::prior::Prior;
use crate::rng::RandomSource;

/// Per-path step cap of the Euler–Maruyama loop.
pub const MAX_STEPS_PER_PATH: u64 = 100_000_000;
/// Per-trial step cap of the renewal loop.
pub const MAX_RENEWAL_STEPS: u64 = 1_000_000_000;

/// Bridge exponents above this give crossing probabilities below `e^-40`.
const BRIDGE_CUTOFF: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    pub kappa: f64,
    pub sigma: f64,
    pub delta: f64,
    pub dt: f64,
    pub trials: u64,
    pub seed: u64,
}

impl OuParams {
    /// Parameters with the step set to `resolution · Δ²/σ²`.
    pub fn with_resolution(kappa: f64, sigma: f64, delta: f64, resolution: f64, trials: u64, seed: u64) -> Self {
        Self { kappa, sigma, delta, dt: resolution * delta * delta / (sigma * sigma), trials, seed }
    }

    pub fn lambda(&self) -> f64 {
        self.kappa * self.delta / self.sigma
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("OuParams", "kappa", self.kappa)?;
        ensure_positive("OuParams", "sigma", self.sigma)?;
        ensure_positive("OuParams", "delta", self.delta)?;
        ensure_positive("OuParams", "dt", self.dt)?;
        let limit = self.delta * self.delta / (100.0 * self.sigma * self.sigma);
        if self.dt > limit {
            return Err(SztError::InvalidInput(format!(
                "dt = {} exceeds the resolution limit delta²/(100 sigma²) = {limit}",
                self.dt
            )));
        }
        if self.trials == 0 {
            return Err(SztError::InvalidInput("trials must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfptEstimate {
    pub mean: f64,
    pub ci95_halfwidth: f64,
    pub std_error: f64,
    pub trials_escaped: u64,
}

fn exit_time(p: &OuParams, rng: &mut RandomSource) -> Result<f64> {
    let decay = 1.0 - p.kappa * p.dt;
    let sd = p.sigma * p.dt.sqrt();
    let bridge = 2.0 / (p.sigma * p.sigma * p.dt);
    let mut w = 0.0f64;
    let mut steps = 0u64;
    loop {
        let prev = w;
        w = decay * w + sd * rng.standard_normal();
        steps += 1;
        if w.abs() >= p.delta {
            return Ok(steps as f64 * p.dt);
        }
        let up = bridge * (p.delta - prev) * (p.delta - w);
        let down = bridge * (p.delta + prev) * (p.delta + w);
        if up.min(down) < BRIDGE_CUTOFF && rng.uniform() < (-up).exp() + (-down).exp() {
            return Ok(steps as f64 * p.dt);
        }
        if steps >= MAX_STEPS_PER_PATH {
            return Err(SztError::NonEscape { steps, last_state: w, barrier: p.delta });
        }
    }
}

/// Euler–Maruyama paths from `W₀ = 0` until the first step with `|W| ≥ Δ`,
/// or until a Brownian-bridge draw detects a crossing inside a step.
pub fn ou_mfpt_mc(p: &OuParams) -> Result<MfptEstimate> {
    p.validate()?;
    let root = RandomSource::new(p.seed);
    let times: Vec<f64> = (0..p.trials)
        .into_par_iter()
        .map(|t| exit_time(p, &mut root.child(t)))
        .collect::<Result<_>>()?;
    let stats: RunningStats = times.into_iter().collect();
    Ok(MfptEstimate {
        mean: stats.mean(),
        ci95_halfwidth: 1.96 * stats.std_error(),
        std_error: stats.std_error(),
        trials_escaped: stats.count(),
    })
}

/// Mean exit time from `0` solving `½σ²τ'' − κwτ' = −1`, `τ(±Δ) = 0`:
/// `τ(0) = (2/σ²) ∫₀^Δ ∫₀^y e^{κ(y² − z²)/σ²} dz dy`.
pub fn ou_mfpt_bvp(kappa: f64, sigma: f64, delta: f64) -> Result<f64> {
    ensure_positive("ou_mfpt_bvp", "kappa", kappa)?;
    ensure_positive("ou_mfpt_bvp", "sigma", sigma)?;
    ensure_positive("ou_mfpt_bvp", "delta", delta)?;
    let c = kappa / (sigma * sigma);
    let inner = |y: f64| -> Result<f64> {
        Ok(integrate(|z| (c * (y * y - z * z)).exp(), 0.0, y, 1e-12, 1e-300)?.value)
    };
    // Surface inner failures after the outer pass.
    let failure = std::cell::RefCell::new(None);
    let outer = integrate(
        |y| match inner(y) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        0.0,
        delta,
        1e-10,
        1e-300,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(2.0 / (sigma * sigma) * outer.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenewalEstimate {
    pub mean_t_f: f64,
    pub mean_t_r: f64,
    pub se_t_f: f64,
    pub se_t_r: f64,
    pub var_t_f: f64,
    pub var_t_r: f64,
    /// `mean_t_f / mean_t_r` and its delta-method standard error.
    pub ratio: f64,
    pub ratio_se: f64,
    pub trials: u64,
}

/// Each step draws `S`, then fires a forward event with probability
/// `Φ_F(S)` and, independently, a representational event with probability
/// `Φ_R(S)`. Waiting times count steps up to and including the first event.
pub fn renewal_mc(step: &StepDist, prior: &Prior, delta: f64, trials: u64, seed: u64) -> Result<RenewalEstimate> {
    step.validate(delta)?;
    if trials == 0 {
        return Err(SztError::InvalidInput("trials must be at least 1".into()));
    }
    let root = RandomSource::new(seed);
    let waits: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = root.child(t);
            let (mut t_f, mut t_r) = (None, None);
            let mut n = 0u64;
            while t_f.is_none() || t_r.is_none() {
                n += 1;
                if n > MAX_RENEWAL_STEPS {
                    return Err(SztError::NonEscape { steps: n - 1, last_state: 0.0, barrier: delta });
                }
                let s = step.sample(&mut rng);
                let fire_f = rng.uniform() < phi_f_unchecked(prior, delta, s);
                let fire_r = rng.uniform() < phi_r_unchecked(prior, s);
                if fire_f && t_f.is_none() {
                    t_f = Some(n as f64);
                }
                if fire_r && t_r.is_none() {
                    t_r = Some(n as f64);
                }
            }
            Ok((t_f.unwrap_or_default(), t_r.unwrap_or_default()))
        })
        .collect::<Result<_>>()?;

    let f: RunningStats = waits.iter().map(|w| w.0).collect();
    let r: RunningStats = waits.iter().map(|w| w.1).collect();
    let n = waits.len() as f64;
    let cov = waits.iter().map(|w| (w.0 - f.mean()) * (w.1 - r.mean())).sum::<f64>() / (n - 1.0).max(1.0);
    let ratio = f.mean() / r.mean();
    let rel_var = f.sample_variance() / (n * f.mean().powi(2)) + r.sample_variance() / (n * r.mean().powi(2))
        - 2.0 * cov / (n * f.mean() * r.mean());
    Ok(RenewalEstimate {
        mean_t_f: f.mean(),
        mean_t_r: r.mean(),
        se_t_f: f.std_error(),
        se_t_r: r.std_error(),
        var_t_f: f.sample_variance(),
        var_t_r: r.sample_variance(),
        ratio,
        ratio_se: ratio * rel_var.max(0.0).sqrt(),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guard_rejects_coarse_steps() {
        let p = OuParams { kappa: 1.0, sigma: 1.0, delta: 1.0, dt: 0.02, trials: 10, seed: 0 };
        assert!(p.validate().is_err());
        assert!(OuParams { dt: 0.01, ..p }.validate().is_ok());
        assert!(OuParams { trials: 0, dt: 0.01, ..p }.validate().is_err());
    }

    #[test]
    fn bvp_brownian_limit_and_scaling() {
        let v = ou_mfpt_bvp(1e-6, 1.0, 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-3);
        let a = ou_mfpt_bvp(0.7, 1.0, 1.3).unwrap();
        let b = ou_mfpt_bvp(0.7, 2.5, 2.5 * 1.3).unwrap();
        assert!((a - b).abs() < 1e-9 * a);
    }

    #[test]
    fn mc_is_seed_reproducible() {
        let p = OuParams::with_resolution(1.0, 1.0, 1.0, 1e-3, 200, 4);
        assert_eq!(ou_mfpt_mc(&p).unwrap(), ou_mfpt_mc(&p).unwrap());
    }

    #[test]
    fn mc_tracks_bvp_at_moderate_resolution() {
        let p = OuParams::with_resolution(1.0, 1.0, 1.0, 1e-4, 2000, 8);
        let mc = ou_mfpt_mc(&p).unwrap();
        let exact = ou_mfpt_bvp(1.0, 1.0, 1.0).unwrap();
        assert!((mc.mean - exact).abs() < 4.0 * mc.std_error + 0.02 * exact, "{mc:?} vs {exact}");
    }

    #[test]
    fn renewal_deterministic_step() {
        let prior = Prior::laplace(1.0).unwrap();
        let step = StepDist::Deterministic { s0: 0.3 };
        let r = renewal_mc(&step, &prior, 2f64.sqrt(), 20_000, 1).unwrap();
        let p_r = phi_r_unchecked(&prior, 0.3);
        assert!((r.mean_t_r - 1.0 / p_r).abs() < 4.0 * r.se_t_r);
    }
}
