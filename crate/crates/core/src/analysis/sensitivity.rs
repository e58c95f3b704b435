//! Per-step switching probabilities of a dead-zone weight.
//!
//! For a step of size `s`, `Φ_F(s) = Pr(Δ − s < |w| ≤ Δ)` is the chance of
//! a numeric change (`0 ↔ ±1`) and `Φ_R(s) = Pr(|w| < s)` the chance of a
//! representational change (`0⁺ ↔ 0⁻`).

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Result, SztError};
use crate::numerics::integrate;
use crate::prior::{Prior, QUAD_REL_TOL};
use crate::rng::RandomSource;

/// Distribution of the step magnitude `S`, supported in `(0, Δ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StepDist {
    Deterministic { s0: f64 },
    /// Exponential with the given mean, truncated to `(0, upper)`.
    Exponential { mean: f64, upper: f64 },
    Empirical(Vec<f64>),
}

impl StepDist {
    pub fn validate(&self, delta: f64) -> Result<()> {
        let inside = |s: f64| s > 0.0 && s < delta;
        let ok = match self {
            StepDist::Deterministic { s0 } => inside(*s0),
            StepDist::Exponential { mean, upper } => *mean > 0.0 && mean.is_finite() && *upper > 0.0 && *upper <= delta,
            StepDist::Empirical(v) => !v.is_empty() && v.iter().all(|&s| inside(s)),
        };
        if ok {
            Ok(())
        } else {
            Err(SztError::OutOfDomain { op: "StepDist", detail: format!("step law {self:?} not supported in (0, {delta})") })
        }
    }

    /// Normalizer `μ(1 − e^{−U/μ})` of the truncated exponential.
    fn exp_norm(mean: f64, upper: f64) -> f64 {
        -mean * (-upper / mean).exp_m1()
    }

    /// `M_S(θ) − 1`, evaluated without cancellation.
    pub fn mgf_minus_one(&self, theta: f64) -> f64 {
        match self {
            StepDist::Deterministic { s0 } => (theta * s0).exp_m1(),
            StepDist::Exponential { mean, upper } => {
                let a = theta - 1.0 / mean;
                let z = Self::exp_norm(*mean, *upper);
                let integral = if a == 0.0 { *upper } else { (a * upper).exp_m1() / a };
                (integral - z) / z
            }
            StepDist::Empirical(v) => v.iter().map(|s| (theta * s).exp_m1()).sum::<f64>() / v.len() as f64,
        }
    }

    /// `E[f(S)]`.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        match self {
            StepDist::Deterministic { s0 } => Ok(f(*s0)),
            StepDist::Exponential { mean, upper } => {
                let z = Self::exp_norm(*mean, *upper);
                Ok(integrate(|s| f(s) * (-s / mean).exp() / z, 0.0, *upper, QUAD_REL_TOL, 1e-300)?.value)
            }
            StepDist::Empirical(v) => Ok(v.iter().map(|&s| f(s)).sum::<f64>() / v.len() as f64),
        }
    }

    pub fn sample(&self, rng: &mut RandomSource) -> f64 {
        match self {
            StepDist::Deterministic { s0 } => *s0,
            StepDist::Exponential { mean, upper } => {
                let u = rng.uniform();
                (-mean * (u * (-upper / mean).exp_m1()).ln_1p()).min(*upper)
            }
            StepDist::Empirical(v) => v[rng.below(v.len())],
        }
    }
}

fn check_step(op: &'static str, delta: f64, s: f64) -> Result<()> {
    ensure_positive(op, "delta", delta)?;
    if !(s > 0.0 && s < delta) {
        return Err(SztError::OutOfDomain { op, detail: format!("step {s} outside (0, {delta})") });
    }
    Ok(())
}

pub(crate) fn phi_f_unchecked(prior: &Prior, delta: f64, s: f64) -> f64 {
    match prior {
        Prior::Laplace { b } | Prior::HalfLaplace { b } => (-delta / b).exp() * (s / b).exp_m1(),
        _ => prior.abs_mass(delta - s, delta),
    }
}

pub(crate) fn phi_r_unchecked(prior: &Prior, s: f64) -> f64 {
    match prior {
        Prior::Laplace { b } | Prior::HalfLaplace { b } => -(-s / b).exp_m1(),
        _ => prior.abs_cdf(s),
    }
}

pub fn phi_f(prior: &Prior, delta: f64, s: f64) -> Result<f64> {
    check_step("phi_f", delta, s)?;
    Ok(phi_f_unchecked(prior, delta, s))
}

pub fn phi_r(prior: &Prior, delta: f64, s: f64) -> Result<f64> {
    check_step("phi_r", delta, s)?;
    Ok(phi_r_unchecked(prior, s))
}

/// [`phi_f`] by integrating the density over both boundary shells.
pub fn phi_f_quadrature(prior: &Prior, delta: f64, s: f64) -> Result<f64> {
    check_step("phi_f", delta, s)?;
    let one = |_: f64| 1.0;
    Ok(prior.integrate_against(one, delta - s, delta)? + prior.integrate_against(one, -delta, s - delta)?)
}

/// [`phi_r`] by integrating the density over `(−s, s)`.
pub fn phi_r_quadrature(prior: &Prior, delta: f64, s: f64) -> Result<f64> {
    check_step("phi_r", delta, s)?;
    prior.integrate_against(|_| 1.0, -s, s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub phi_f: f64,
    pub phi_r: f64,
    /// `Φ_R / Φ_F`, `+∞` when `Φ_F = 0`.
    pub ratio: f64,
    /// `p(0) / p(Δ)`.
    pub lower_bound: f64,
    pub bound_holds: bool,
    /// `Φ_R ≤ m·s·p(0)`, `Φ_F ≥ m·s·p(Δ)` and `Φ_R ≥ Φ_F`, with `m = 2` for
    /// symmetric priors and `m = 1` on the half-line.
    pub sandwich_holds: bool,
}

pub fn sensitivity_ratio(prior: &Prior, delta: f64, s: f64) -> Result<SensitivityReport> {
    let phi_f = phi_f(prior, delta, s)?;
    let phi_r = phi_r(prior, delta, s)?;
    let ratio = if phi_f > 0.0 { phi_r / phi_f } else { f64::INFINITY };
    let lower_bound = prior.peak_ratio(delta);
    let m = if prior.is_half_line() { 1.0 } else { 2.0 };
    let sandwich_holds =
        phi_r <= m * s * prior.density(0.0) && phi_f >= m * s * prior.density(delta) && phi_r >= phi_f;
    Ok(SensitivityReport { phi_f, phi_r, ratio, lower_bound, bound_holds: ratio >= lower_bound, sandwich_holds })
}

/// `e^{Δ/b} (1 − M_S(−1/b)) / (M_S(1/b) − 1)` for a Laplace(b) prior.
pub fn expected_ratio(step: &StepDist, b: f64, delta: f64) -> Result<f64> {
    ensure_positive("expected_ratio", "b", b)?;
    step.validate(delta)?;
    Ok((delta / b).exp() * -step.mgf_minus_one(-1.0 / b) / step.mgf_minus_one(1.0 / b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelEvents {
    pub delta: f64,
    pub e_f: f64,
    pub e_r: f64,
    /// `p_c(0) / p_c(Δ_c)`.
    pub density_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvents {
    pub channels: Vec<ChannelEvents>,
    pub e_f: f64,
    pub e_r: f64,
    pub ratio: f64,
    pub min_density_ratio: f64,
    pub max_density_ratio: f64,
    pub min_channel_ratio: f64,
}

/// Expected event counts `N·E[Φ(S)]` per channel `(p_c, Δ_c)` and summed.
pub fn feedback_events(n_steps: u64, step: &StepDist, channels: &[(Prior, f64)]) -> Result<FeedbackEvents> {
    if n_steps == 0 {
        return Err(SztError::InvalidInput("n_steps must be at least 1".into()));
    }
    if channels.is_empty() {
        return Err(SztError::InvalidInput("at least one channel required".into()));
    }
    let n = n_steps as f64;
    let per = channels
        .iter()
        .map(|(prior, delta)| {
            step.validate(*delta)?;
            Ok(ChannelEvents {
                delta: *delta,
                e_f: n * step.expect(|s| phi_f_unchecked(prior, *delta, s))?,
                e_r: n * step.expect(|s| phi_r_unchecked(prior, s))?,
                density_ratio: prior.peak_ratio(*delta),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let e_f: f64 = per.iter().map(|c| c.e_f).sum();
    let e_r: f64 = per.iter().map(|c| c.e_r).sum();
    let fold = |init: f64, pick: fn(f64, f64) -> f64, key: fn(&ChannelEvents) -> f64| {
        per.iter().map(key).fold(init, pick)
    };
    Ok(FeedbackEvents {
        e_f,
        e_r,
        ratio: e_r / e_f,
        min_density_ratio: fold(f64::INFINITY, f64::min, |c| c.density_ratio),
        max_density_ratio: fold(0.0, f64::max, |c| c.density_ratio),
        min_channel_ratio: fold(f64::INFINITY, f64::min, |c| c.e_r / c.e_f),
        channels: per,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SQRT_2;

    fn laplace() -> Prior {
        Prior::laplace(1.0).unwrap()
    }

    #[test]
    fn laplace_values() {
        let f = phi_f(&laplace(), SQRT_2, 0.1).unwrap();
        let r = phi_r(&laplace(), SQRT_2, 0.1).unwrap();
        assert!((f - 0.02557).abs() < 1e-5, "{f}");
        assert!((r - 0.09516).abs() < 1e-5, "{r}");
        let rep = sensitivity_ratio(&laplace(), SQRT_2, 0.1).unwrap();
        assert!((rep.ratio - 3.722).abs() < 1e-3);
        assert!((rep.lower_bound - SQRT_2.exp()).abs() < 1e-12);
        assert!(!rep.bound_holds);
        assert!(rep.sandwich_holds);
    }

    #[test]
    fn small_step_limit_reaches_density_ratio() {
        let rep = sensitivity_ratio(&laplace(), SQRT_2, 1e-7).unwrap();
        assert!((rep.ratio / rep.lower_bound - 1.0).abs() < 1e-6);
        assert!(phi_f(&laplace(), SQRT_2, 1e-12).unwrap() < 1e-11);
    }

    #[test]
    fn quadrature_routes_agree() {
        for p in [laplace(), Prior::gaussian(1.0).unwrap(), Prior::half_gaussian(0.7).unwrap()] {
            for s in [0.05, 0.3, 0.9] {
                let d = 1.0;
                let (a, b) = (phi_f(&p, d, s).unwrap(), phi_f_quadrature(&p, d, s).unwrap());
                assert!((a - b).abs() < 1e-10, "{} phi_f {a} {b}", p.name());
                let (a, b) = (phi_r(&p, d, s).unwrap(), phi_r_quadrature(&p, d, s).unwrap());
                assert!((a - b).abs() < 1e-10, "{} phi_r {a} {b}", p.name());
            }
        }
    }

    #[test]
    fn step_domain_enforced() {
        assert!(phi_f(&laplace(), 1.0, 1.0).is_err());
        assert!(phi_r(&laplace(), 1.0, 0.0).is_err());
        assert!(expected_ratio(&StepDist::Deterministic { s0: 2.0 }, 1.0, 1.0).is_err());
    }

    #[test]
    fn mgf_reduction_and_exponential_case() {
        let det = expected_ratio(&StepDist::Deterministic { s0: 0.1 }, 1.0, SQRT_2).unwrap();
        let closed = sensitivity_ratio(&laplace(), SQRT_2, 0.1).unwrap().ratio;
        assert!((det - closed).abs() < 1e-12);

        let step = StepDist::Exponential { mean: 0.05, upper: SQRT_2 };
        let via_expect = step.expect(|s| (s / 1.0).exp() - 1.0).unwrap();
        assert!((via_expect - step.mgf_minus_one(1.0)).abs() < 1e-12);
    }

    #[test]
    fn feedback_examples() {
        let step = StepDist::Deterministic { s0: 0.1 };
        let one = feedback_events(1000, &step, &[(laplace(), SQRT_2)]).unwrap();
        assert!((one.e_r - 95.16).abs() < 0.01);
        assert!((one.e_f - 25.57).abs() < 0.01);
        let two = feedback_events(1000, &step, &[(laplace(), SQRT_2), (laplace(), SQRT_2)]).unwrap();
        assert_eq!(two.e_f, 2.0 * one.e_f);
        assert_eq!(two.e_r, 2.0 * one.e_r);
    }
}
