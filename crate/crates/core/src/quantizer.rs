//! Forward quantizers, threshold calibration and forward reconstruction error.
//!
//! Reconstruction for the error computations uses the levels
//! `{-Δ, 0, +Δ}` (scale = Δ). The packed tensor stores the scale
//! separately so a unit-scale decode to `{-1, 0, +1}` is also available.

use serde::{Deserialize, Serialize};

use crate::code::TernaryCode;
use crate::error::{ensure_finite, ensure_positive, Result, SztError};
use crate::numerics::{erf, minimize_bounded, SQRT_2};
use crate::prior::Prior;
use crate::tensor::{channel_of, numel, Granularity, PackedTernaryTensor};

/// Balanced ternary: `|w| <= Δ` maps to the single zero (stored as `0⁺`).
pub fn encode_bt(w: f64, delta: f64) -> Result<TernaryCode> {
    ensure_finite("encode_bt", "w", w)?;
    ensure_positive("encode_bt", "delta", delta)?;
    Ok(bt_code(w, delta))
}

/// Signed-zero ternary: the dead zone keeps the sign of `w`; `w = 0`
/// (either signed zero) maps to `0⁺`.
pub fn encode_szt(w: f64, delta: f64) -> Result<TernaryCode> {
    ensure_finite("encode_szt", "w", w)?;
    ensure_positive("encode_szt", "delta", delta)?;
    Ok(szt_code(w, delta))
}

/// Activation variant with separate positive and negative thresholds.
pub fn encode_szt_activation(u: f64, delta_pos: f64, delta_neg: f64) -> Result<TernaryCode> {
    ensure_finite("encode_szt_activation", "u", u)?;
    ensure_positive("encode_szt_activation", "delta_pos", delta_pos)?;
    ensure_positive("encode_szt_activation", "delta_neg", delta_neg)?;
    Ok(if u > delta_pos {
        TernaryCode::PlusOne
    } else if u >= 0.0 {
        TernaryCode::ZeroPlus
    } else if u >= -delta_neg {
        TernaryCode::ZeroMinus
    } else {
        TernaryCode::MinusOne
    })
}

#[inline]
pub(crate) fn bt_code(w: f64, delta: f64) -> TernaryCode {
    if w > delta {
        TernaryCode::PlusOne
    } else if w < -delta {
        TernaryCode::MinusOne
    } else {
        TernaryCode::ZeroPlus
    }
}

#[inline]
pub(crate) fn szt_code(w: f64, delta: f64) -> TernaryCode {
    if w > delta {
        TernaryCode::PlusOne
    } else if w >= 0.0 {
        TernaryCode::ZeroPlus
    } else if w >= -delta {
        TernaryCode::ZeroMinus
    } else {
        TernaryCode::MinusOne
    }
}

/// Squared reconstruction error of one weight against levels `{-Δ, 0, Δ}`.
#[inline]
pub fn reconstruction_error_sq(w: f64, delta: f64) -> f64 {
    let r = w - delta * f64::from(szt_code(w, delta).numeric_value());
    r * r
}

#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdRule {
    /// Δ = sample standard deviation.
    SigmaRule,
    /// Δ = k · sample standard deviation.
    FixedK(f64),
    /// Δ = MSE-optimal threshold of the given prior.
    PriorOptimal(Prior),
}

impl ThresholdRule {
    pub fn label(&self) -> String {
        match self {
            ThresholdRule::SigmaRule => "sigma".into(),
            ThresholdRule::FixedK(k) => format!("fixed-k:{k}"),
            ThresholdRule::PriorOptimal(p) => format!("prior-optimal:{}", p.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScaleRule {
    /// Decode to `{-1, 0, +1}`.
    Unit,
    /// Decode to `{-Δ, 0, +Δ}`.
    EqualThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZeroTiebreak {
    ToZeroPlus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerQuantConfig {
    pub granularity: Granularity,
    pub threshold_rule: ThresholdRule,
    pub scale_rule: ScaleRule,
    pub zero_tiebreak: ZeroTiebreak,
}

impl Default for LayerQuantConfig {
    fn default() -> Self {
        Self {
            granularity: Granularity::PerLayer,
            threshold_rule: ThresholdRule::SigmaRule,
            scale_rule: ScaleRule::EqualThreshold,
            zero_tiebreak: ZeroTiebreak::ToZeroPlus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub delta: f64,
    pub k: f64,
    pub forward_mse: f64,
    pub rule: String,
}

/// Mean-centred sample standard deviation (n - 1 denominator).
pub fn sample_std(weights: &[f64]) -> Result<f64> {
    if weights.len() < 2 {
        return Err(SztError::Calibration(format!("need at least 2 weights, got {}", weights.len())));
    }
    if let Some(bad) = weights.iter().find(|w| !w.is_finite()) {
        return Err(SztError::InvalidInput(format!("non-finite weight {bad}")));
    }
    let n = weights.len() as f64;
    let mean = weights.iter().sum::<f64>() / n;
    let var = weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    if !(std > 0.0) {
        return Err(SztError::Calibration("weights have zero variance; threshold would be 0".into()));
    }
    Ok(std)
}

/// Mean squared reconstruction error of a concrete population.
pub fn empirical_mse(weights: &[f64], delta: f64) -> f64 {
    weights.iter().map(|&w| reconstruction_error_sq(w, delta)).sum::<f64>() / weights.len() as f64
}

pub fn calibrate(weights: &[f64], rule: &ThresholdRule) -> Result<CalibrationResult> {
    match rule {
        ThresholdRule::SigmaRule | ThresholdRule::FixedK(_) => {
            let k = match rule {
                ThresholdRule::FixedK(k) => {
                    ensure_positive("calibrate", "k", *k)?;
                    *k
                }
                _ => 1.0,
            };
            let sigma = sample_std(weights)?;
            let delta = k * sigma;
            Ok(CalibrationResult { delta, k, forward_mse: empirical_mse(weights, delta), rule: rule.label() })
        }
        ThresholdRule::PriorOptimal(prior) => {
            let delta = optimal_threshold(prior)?;
            Ok(CalibrationResult {
                delta,
                k: delta / prior.sigma(),
                forward_mse: mse_forward(prior, delta)?,
                rule: rule.label(),
            })
        }
    }
}

/// Relative abscissa tolerance for the numeric threshold search.
const OPT_X_TOL: f64 = 1e-7;

/// MSE-minimizing threshold. Laplace uses the closed form `√2·b`; the other
/// parametric priors are minimized directly over `(0, 4σ]`.
pub fn optimal_threshold(prior: &Prior) -> Result<f64> {
    match prior {
        Prior::Laplace { b } => Ok(SQRT_2 * b),
        Prior::Empirical(_) => Err(SztError::Unsupported(
            "optimal_threshold needs a parametric prior; calibrate empirical weights with the sigma rule".into(),
        )),
        _ => optimal_threshold_numeric(prior),
    }
}

/// Direct minimization of [`mse_forward`], for any parametric prior.
pub fn optimal_threshold_numeric(prior: &Prior) -> Result<f64> {
    if !prior.is_parametric() {
        return Err(SztError::Unsupported("numeric threshold search needs a parametric prior".into()));
    }
    let sigma = prior.sigma();
    // Quadrature failures surface as +∞ so the search stays bracketed.
    let objective = |d: f64| mse_forward(prior, d).unwrap_or(f64::INFINITY);
    let best = minimize_bounded(objective, 1e-9 * sigma, 4.0 * sigma, OPT_X_TOL * sigma);
    Ok(best.x)
}

/// Expected squared reconstruction error `E[(w - Δ·v(Q(w)))²]`.
pub fn mse_forward(prior: &Prior, delta: f64) -> Result<f64> {
    ensure_positive("mse_forward", "delta", delta)?;
    match prior {
        Prior::Laplace { b } => Ok(2.0 * b * b - (-delta / b).exp() * (2.0 * b * delta + delta * delta)),
        Prior::Empirical(e) => Ok(empirical_mse(e.samples(), delta)),
        _ => mse_forward_quadrature(prior, delta),
    }
}

/// The quadrature route of [`mse_forward`], valid for every prior.
pub fn mse_forward_quadrature(prior: &Prior, delta: f64) -> Result<f64> {
    ensure_positive("mse_forward", "delta", delta)?;
    prior.expect(|w| reconstruction_error_sq(w, delta), &[delta])
}

/// Probability mass inside `[-Δ, Δ]` for an `N(0, σ²)` prior.
pub fn gaussian_dead_zone_mass(k: f64) -> f64 {
    erf(k / SQRT_2)
}

/// Quantizes a dense row-major tensor, calibrating one threshold per layer
/// or per channel slice.
pub fn quantize_tensor(weights: &[f64], dims: &[usize], config: &LayerQuantConfig) -> Result<PackedTernaryTensor> {
    quantize_tensor_with_report(weights, dims, config).map(|(t, _)| t)
}

pub fn quantize_tensor_with_report(
    weights: &[f64],
    dims: &[usize],
    config: &LayerQuantConfig,
) -> Result<(PackedTernaryTensor, Vec<CalibrationResult>)> {
    if weights.is_empty() {
        return Err(SztError::InvalidInput("cannot quantize an empty tensor".into()));
    }
    let n = numel(dims)?;
    if n != weights.len() {
        return Err(SztError::ShapeMismatch(format!("dims {dims:?} describe {n} elements, got {}", weights.len())));
    }
    if let Some(bad) = weights.iter().find(|w| !w.is_finite()) {
        return Err(SztError::InvalidInput(format!("non-finite weight {bad}")));
    }
    let calibrations = match config.granularity {
        Granularity::PerLayer => vec![calibrate(weights, &config.threshold_rule)?],
        Granularity::PerChannel(axis) => {
            if axis >= dims.len() {
                return Err(SztError::ShapeMismatch(format!("channel axis {axis} out of range for rank {}", dims.len())));
            }
            let mut slices = vec![Vec::new(); dims[axis]];
            for (i, &w) in weights.iter().enumerate() {
                slices[channel_of(i, dims, axis)].push(w);
            }
            slices
                .iter()
                .map(|s| calibrate(s, &config.threshold_rule))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let thresholds: Vec<f64> = calibrations.iter().map(|c| c.delta).collect();
    let scales: Vec<f64> = match config.scale_rule {
        ScaleRule::Unit => vec![1.0; thresholds.len()],
        ScaleRule::EqualThreshold => thresholds.clone(),
    };
    let codes: Vec<TernaryCode> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let group = match config.granularity {
                Granularity::PerLayer => 0,
                Granularity::PerChannel(axis) => channel_of(i, dims, axis),
            };
            szt_code(w, thresholds[group])
        })
        .collect();
    let tensor = PackedTernaryTensor::from_codes(dims.to_vec(), config.granularity, thresholds, scales, &codes)?;
    Ok((tensor, calibrations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomSource;
    use TernaryCode::*;

    #[test]
    fn bt_cases() {
        assert_eq!(encode_bt(1.5, 1.0).unwrap(), PlusOne);
        assert_eq!(encode_bt(-0.3, 1.0).unwrap(), ZeroPlus);
        assert_eq!(encode_bt(-1.01, 1.0).unwrap(), MinusOne);
        assert_eq!(encode_bt(1.0, 1.0).unwrap(), ZeroPlus);
    }

    #[test]
    fn szt_cases() {
        assert_eq!(encode_szt(0.5, 1.0).unwrap(), ZeroPlus);
        assert_eq!(encode_szt(-0.3, 1.0).unwrap(), ZeroMinus);
        assert_eq!(encode_szt(0.0, 1.0).unwrap(), ZeroPlus);
        assert_eq!(encode_szt(-0.0, 1.0).unwrap(), ZeroPlus);
        assert_eq!(encode_szt(-1.0, 1.0).unwrap(), ZeroMinus);
        assert_eq!(encode_szt(1.0, 1.0).unwrap(), ZeroPlus);
        assert_eq!(encode_szt(1.0000001, 1.0).unwrap(), PlusOne);
    }

    #[test]
    fn activation_cases() {
        assert_eq!(encode_szt_activation(0.4, 0.5, 0.5).unwrap(), ZeroPlus);
        assert_eq!(encode_szt_activation(-0.1, 0.5, 0.5).unwrap(), ZeroMinus);
        assert_eq!(encode_szt_activation(0.6, 0.5, 0.5).unwrap(), PlusOne);
        assert_eq!(encode_szt_activation(-0.6, 0.5, 0.7).unwrap(), ZeroMinus);
        assert_eq!(encode_szt_activation(-0.8, 0.5, 0.7).unwrap(), MinusOne);
    }

    #[test]
    fn encoders_reject_bad_input() {
        assert!(encode_szt(f64::NAN, 1.0).is_err());
        assert!(encode_bt(f64::INFINITY, 1.0).is_err());
        assert!(encode_szt(0.1, 0.0).is_err());
        assert!(encode_szt_activation(0.1, 1.0, -1.0).is_err());
    }

    #[test]
    fn quantize_elementwise_example() {
        let w = [0.5, -0.3, 1.5, -1.01];
        let k = 1.0 / sample_std(&w).unwrap();
        let config = LayerQuantConfig { threshold_rule: ThresholdRule::FixedK(k), ..Default::default() };
        let t = quantize_tensor(&w, &[4], &config).unwrap();
        assert!((t.thresholds()[0] - 1.0).abs() < 1e-12);
        assert_eq!(t.codes(), vec![ZeroPlus, ZeroMinus, PlusOne, MinusOne]);
    }

    #[test]
    fn sigma_rule_on_standard_normal_population() {
        let mut rng = RandomSource::new(5);
        let w: Vec<f64> = (0..100_000).map(|_| rng.standard_normal()).collect();
        let t = quantize_tensor(&w, &[100_000], &LayerQuantConfig::default()).unwrap();
        assert!((t.thresholds()[0] - 1.0).abs() < 0.02);
    }

    #[test]
    fn per_channel_thresholds_follow_rows() {
        // Rows have sample standard deviation exactly 1 and 2.
        let base = [-1.5, -0.5, 0.5, 1.5];
        let s = sample_std(&base).unwrap();
        let mut w: Vec<f64> = base.iter().map(|x| x / s).collect();
        w.extend(base.iter().map(|x| 2.0 * x / s));
        let config = LayerQuantConfig { granularity: Granularity::PerChannel(0), ..Default::default() };
        let t = quantize_tensor(&w, &[2, 4], &config).unwrap();
        assert!((t.thresholds()[0] - 1.0).abs() < 1e-12);
        assert!((t.thresholds()[1] - 2.0).abs() < 1e-12);
        assert_eq!(t.scales(), t.thresholds());
    }

    #[test]
    fn quantize_errors() {
        let config = LayerQuantConfig::default();
        assert!(quantize_tensor(&[], &[0], &config).is_err());
        assert!(matches!(quantize_tensor(&[1.0, 1.0, 1.0], &[3], &config), Err(SztError::Calibration(_))));
        let bad_axis = LayerQuantConfig { granularity: Granularity::PerChannel(2), ..Default::default() };
        assert!(matches!(quantize_tensor(&[1.0, 2.0], &[2], &bad_axis), Err(SztError::ShapeMismatch(_))));
        assert!(matches!(quantize_tensor(&[1.0, 2.0], &[3], &config), Err(SztError::ShapeMismatch(_))));
    }

    #[test]
    fn calibrate_prior_optimal() {
        let laplace = calibrate(&[], &ThresholdRule::PriorOptimal(Prior::laplace(1.0).unwrap())).unwrap();
        assert!((laplace.delta - SQRT_2).abs() < 1e-15);
        assert!((laplace.k - 1.0).abs() < 1e-15);

        let gauss = calibrate(&[], &ThresholdRule::PriorOptimal(Prior::gaussian(1.0).unwrap())).unwrap();
        assert!((gauss.delta - 0.88).abs() < 0.01, "{}", gauss.delta);
        assert!((gauss.k - gauss.delta).abs() < 1e-15);
    }

    #[test]
    fn half_line_optima_from_direct_minimization() {
        // For the half-Laplace the error is 2b² - e^{-Δ/b}(Δ² + 2bΔ); its
        // derivative e^{-Δ/b}(Δ²/b - 2b) vanishes at Δ = √2 b = σ.
        let b = 0.8;
        let d = optimal_threshold(&Prior::half_laplace(b).unwrap()).unwrap();
        assert!((d - SQRT_2 * b).abs() < 1e-6, "{d}");
        // The half-Gaussian error integral equals the symmetric one.
        let hg = optimal_threshold(&Prior::half_gaussian(1.0).unwrap()).unwrap();
        let g = optimal_threshold(&Prior::gaussian(1.0).unwrap()).unwrap();
        assert!((hg - g).abs() < 1e-6);
    }

    #[test]
    fn optimal_threshold_rejects_empirical() {
        let e = Prior::empirical(&[1.0, -1.0, 0.5]).unwrap();
        assert!(matches!(optimal_threshold(&e), Err(SztError::Unsupported(_))));
    }

    #[test]
    fn laplace_mse_closed_form_value() {
        let v = mse_forward(&Prior::laplace(1.0).unwrap(), SQRT_2).unwrap();
        let expected = 2.0 - (-SQRT_2).exp() * (2.0 * SQRT_2 + 2.0);
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.8261).abs() < 1e-4);
        // Bound σ²/(1 + k²) with σ² = 2, k = 1.
        assert!(v <= 1.0);
    }

    #[test]
    fn laplace_closed_form_matches_quadrature() {
        let p = Prior::laplace(0.6).unwrap();
        for d in [0.1, 0.5, 0.85, 2.0] {
            let a = mse_forward(&p, d).unwrap();
            let b = mse_forward_quadrature(&p, d).unwrap();
            assert!((a - b).abs() <= 1e-8 * a, "{d}: {a} vs {b}");
        }
    }

    #[test]
    fn mse_tends_to_second_moment_at_small_threshold() {
        for p in [
            Prior::laplace(1.0).unwrap(),
            Prior::gaussian(1.5).unwrap(),
            Prior::half_laplace(0.5).unwrap(),
            Prior::half_gaussian(1.0).unwrap(),
        ] {
            let v = mse_forward(&p, 1e-6).unwrap();
            let s2 = p.sigma().powi(2);
            assert!((v - s2).abs() < 1e-5 * s2.max(1.0), "{}: {v} vs {s2}", p.name());
        }
    }
}
