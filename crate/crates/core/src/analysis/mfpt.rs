//! Dead-zone escape-time formulas, with `λ = κΔ/σ`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Result};
use crate::numerics::{erf, SQRT_PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MfptKind {
    Bt,
    Szt,
}

/// `E[τ_BT] = (√π / 2κ)(e^{λ²} erf λ − λ√π)/λ` and `E[τ_SZT] = 1/κ`.
pub fn mfpt_closed(kind: MfptKind, kappa: f64, sigma: f64, delta: f64) -> Result<f64> {
    ensure_positive("mfpt_closed", "kappa", kappa)?;
    ensure_positive("mfpt_closed", "sigma", sigma)?;
    ensure_positive("mfpt_closed", "delta", delta)?;
    Ok(match kind {
        MfptKind::Szt => 1.0 / kappa,
        MfptKind::Bt => {
            let lambda = kappa * delta / sigma;
            SQRT_PI / (2.0 * kappa) * ((lambda * lambda).exp() * erf(lambda) - lambda * SQRT_PI) / lambda
        }
    })
}

/// `(√π / 2λ) e^{λ²}`.
pub fn mfpt_ratio(lambda: f64) -> f64 {
    SQRT_PI / (2.0 * lambda) * (lambda * lambda).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        assert_eq!(mfpt_closed(MfptKind::Szt, 0.5, 1.0, 1.0).unwrap(), 2.0);
        let bt = mfpt_closed(MfptKind::Bt, 1.0, 1.0, 1.0).unwrap();
        assert!((bt - 0.4593).abs() < 1e-4, "{bt}");
        assert!((mfpt_ratio(1.0) - SQRT_PI / 2.0 * std::f64::consts::E).abs() < 1e-15);
        assert!(mfpt_closed(MfptKind::Bt, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn ratio_increases_past_one() {
        let mut prev = mfpt_ratio(1.0);
        for i in 1..=200 {
            let r = mfpt_ratio(1.0 + 0.02 * f64::from(i));
            assert!(r > prev);
            prev = r;
        }
    }
}
