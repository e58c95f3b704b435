//! Weight and activation priors.
//!
//! `sigma()` is the root-mean-square scale `sqrt(E[w²])`. For the two
//! symmetric kinds this is the standard deviation; for the half-line kinds
//! it is the scale the threshold ratio `k = Δ/σ` is quoted against
//! (`√2·b` for half-Laplace, `σ` for half-Gaussian).

use crate::error::{ensure_positive, Result, SztError};
use crate::numerics::{erf, integrate, integrate_to_infinity, SQRT_2, SQRT_PI};
use crate::rng::RandomSource;

/// Relative tolerance used for every density quadrature in the crate.
pub const QUAD_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    Laplace { b: f64 },
    Gaussian { sigma: f64 },
    HalfLaplace { b: f64 },
    HalfGaussian { sigma: f64 },
    Empirical(EmpiricalPrior),
}

/// Sample-backed prior; densities come from a Freedman–Diaconis histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalPrior {
    sorted: Vec<f64>,
    sorted_abs: Vec<f64>,
    std_dev: f64,
    hist_start: f64,
    bin_width: f64,
    counts: Vec<usize>,
}

impl EmpiricalPrior {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(SztError::InvalidInput("empirical prior samples must be finite".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        if sorted.len() < 2 || sorted.first() == sorted.last() {
            return Err(SztError::InvalidInput("empirical prior needs at least two distinct samples".into()));
        }
        let n = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let var = sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let std_dev = var.sqrt();

        let quantile = |q: f64| {
            let pos = q * (n - 1.0);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(sorted.len() - 1);
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        };
        let iqr = quantile(0.75) - quantile(0.25);
        let range = sorted[sorted.len() - 1] - sorted[0];
        let mut bin_width = 2.0 * iqr / n.cbrt();
        if !(bin_width > 0.0) {
            bin_width = range / n.sqrt().ceil();
        }
        let bins = ((range / bin_width).floor() as usize + 1).min(1 << 20);
        let hist_start = sorted[0];
        let mut counts = vec![0usize; bins];
        for &x in &sorted {
            let idx = (((x - hist_start) / bin_width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        let mut sorted_abs: Vec<f64> = sorted.iter().map(|x| x.abs()).collect();
        sorted_abs.sort_by(f64::total_cmp);
        Ok(Self { sorted, sorted_abs, std_dev, hist_start, bin_width, counts })
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    fn density(&self, w: f64) -> f64 {
        let offset = (w - self.hist_start) / self.bin_width;
        if offset < 0.0 || offset >= self.counts.len() as f64 {
            return 0.0;
        }
        self.counts[offset as usize] as f64 / (self.sorted.len() as f64 * self.bin_width)
    }

    /// Fraction of samples with `|w| <= x`.
    fn abs_cdf(&self, x: f64) -> f64 {
        let k = self.sorted_abs.partition_point(|&a| a <= x);
        k as f64 / self.sorted_abs.len() as f64
    }

    fn mean_of<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.sorted.iter().map(|&w| f(w)).sum::<f64>() / self.sorted.len() as f64
    }
}

impl Prior {
    pub fn laplace(b: f64) -> Result<Self> {
        ensure_positive("Prior::laplace", "b", b)?;
        Ok(Prior::Laplace { b })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        ensure_positive("Prior::gaussian", "sigma", sigma)?;
        Ok(Prior::Gaussian { sigma })
    }

    pub fn half_laplace(b: f64) -> Result<Self> {
        ensure_positive("Prior::half_laplace", "b", b)?;
        Ok(Prior::HalfLaplace { b })
    }

    pub fn half_gaussian(sigma: f64) -> Result<Self> {
        ensure_positive("Prior::half_gaussian", "sigma", sigma)?;
        Ok(Prior::HalfGaussian { sigma })
    }

    pub fn empirical(samples: &[f64]) -> Result<Self> {
        Ok(Prior::Empirical(EmpiricalPrior::new(samples)?))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Prior::Laplace { .. } => "laplace",
            Prior::Gaussian { .. } => "gaussian",
            Prior::HalfLaplace { .. } => "half-laplace",
            Prior::HalfGaussian { .. } => "half-gaussian",
            Prior::Empirical(_) => "empirical",
        }
    }

    pub fn is_parametric(&self) -> bool {
        !matches!(self, Prior::Empirical(_))
    }

    pub fn is_half_line(&self) -> bool {
        matches!(self, Prior::HalfLaplace { .. } | Prior::HalfGaussian { .. })
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(self, Prior::Laplace { .. } | Prior::Gaussian { .. })
    }

    /// Root-mean-square scale (sample standard deviation for `Empirical`).
    pub fn sigma(&self) -> f64 {
        match self {
            Prior::Laplace { b } | Prior::HalfLaplace { b } => SQRT_2 * b,
            Prior::Gaussian { sigma } | Prior::HalfGaussian { sigma } => *sigma,
            Prior::Empirical(e) => e.std_dev,
        }
    }

    pub fn density(&self, w: f64) -> f64 {
        match self {
            Prior::Laplace { b } => (-w.abs() / b).exp() / (2.0 * b),
            Prior::Gaussian { sigma } => gaussian_density(w, *sigma),
            Prior::HalfLaplace { b } => {
                if w < 0.0 {
                    0.0
                } else {
                    (-w / b).exp() / b
                }
            }
            Prior::HalfGaussian { sigma } => {
                if w < 0.0 {
                    0.0
                } else {
                    2.0 * gaussian_density(w, *sigma)
                }
            }
            Prior::Empirical(e) => e.density(w),
        }
    }

    /// `P(|w| <= x)`, closed form for parametric kinds.
    pub fn abs_cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x == f64::INFINITY {
            return 1.0;
        }
        match self {
            Prior::Laplace { b } | Prior::HalfLaplace { b } => -(-x / b).exp_m1(),
            Prior::Gaussian { sigma } | Prior::HalfGaussian { sigma } => erf(x / (sigma * SQRT_2)),
            Prior::Empirical(e) => e.abs_cdf(x),
        }
    }

    /// `P(lo < |w| <= hi)` for `0 <= lo <= hi`.
    pub fn abs_mass(&self, lo: f64, hi: f64) -> f64 {
        match self {
            // Written to keep relative precision when both ends are in the tail.
            Prior::Laplace { b } | Prior::HalfLaplace { b } => (-lo / b).exp() * -(-(hi - lo) / b).exp_m1(),
            _ => self.abs_cdf(hi) - self.abs_cdf(lo),
        }
    }

    /// `∫_lo^hi f(w) p(w) dw` by adaptive quadrature; `hi` may be `+∞`.
    /// Empirical priors return the sample average of `f` over `(lo, hi]`.
    pub fn integrate_against<F: Fn(f64) -> f64>(&self, f: F, lo: f64, hi: f64) -> Result<f64> {
        if let Prior::Empirical(e) = self {
            return Ok(e.mean_of(|w| if w > lo && w <= hi { f(w) } else { 0.0 }));
        }
        let lo = if self.is_half_line() { lo.max(0.0) } else { lo };
        if hi <= lo {
            return Ok(0.0);
        }
        let g = |w: f64| f(w) * self.density(w);
        if hi.is_infinite() {
            Ok(integrate_to_infinity(g, lo, QUAD_REL_TOL, 1e-300)?.value)
        } else {
            Ok(integrate(g, lo, hi, QUAD_REL_TOL, 1e-300)?.value)
        }
    }

    /// `E[f(w)]` over the whole support, split at `±breaks` for accuracy.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F, breaks: &[f64]) -> Result<f64> {
        if let Prior::Empirical(e) = self {
            return Ok(e.mean_of(f));
        }
        let mut cuts: Vec<f64> = breaks.iter().flat_map(|&x| [x.abs(), -x.abs()]).collect();
        cuts.push(0.0);
        if self.is_half_line() {
            cuts.retain(|&x| x >= 0.0);
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut total = 0.0;
        if !self.is_half_line() {
            let mirrored = |u: f64| f(-u) * self.density(-u);
            total += integrate_to_infinity(mirrored, -cuts[0], QUAD_REL_TOL, 1e-300)?.value;
        }
        for pair in cuts.windows(2) {
            total += self.integrate_against(&f, pair[0], pair[1])?;
        }
        total += self.integrate_against(&f, *cuts.last().expect("non-empty"), f64::INFINITY)?;
        Ok(total)
    }

    pub fn sample(&self, rng: &mut RandomSource) -> f64 {
        match self {
            Prior::Laplace { b } => rng.laplace(*b),
            Prior::Gaussian { sigma } => rng.normal(0.0, *sigma),
            Prior::HalfLaplace { b } => -b * rng.uniform_open().ln(),
            Prior::HalfGaussian { sigma } => (sigma * rng.standard_normal()).abs(),
            Prior::Empirical(e) => e.sorted[rng.below(e.sorted.len())],
        }
    }

    /// The density ratio `p(0) / p(x)`.
    pub fn peak_ratio(&self, x: f64) -> f64 {
        match self {
            Prior::Laplace { b } | Prior::HalfLaplace { b } => (x.abs() / b).exp(),
            Prior::Gaussian { sigma } | Prior::HalfGaussian { sigma } => (0.5 * (x / sigma).powi(2)).exp(),
            Prior::Empirical(_) => self.density(0.0) / self.density(x),
        }
    }
}

#[inline]
fn gaussian_density(w: f64, sigma: f64) -> f64 {
    let z = w / sigma;
    (-0.5 * z * z).exp() / (sigma * SQRT_2 * SQRT_PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parametric() -> Vec<Prior> {
        vec![
            Prior::laplace(0.7).unwrap(),
            Prior::gaussian(1.3).unwrap(),
            Prior::half_laplace(0.5).unwrap(),
            Prior::half_gaussian(2.0).unwrap(),
        ]
    }

    #[test]
    fn densities_integrate_to_one() {
        for p in parametric() {
            let total = p.expect(|_| 1.0, &[1.0]).unwrap();
            assert!((total - 1.0).abs() < 1e-10, "{}: {total}", p.name());
        }
    }

    #[test]
    fn sigma_is_root_mean_square() {
        for p in parametric() {
            let second = p.expect(|w| w * w, &[1.0]).unwrap();
            assert!((second.sqrt() - p.sigma()).abs() < 1e-9, "{}", p.name());
        }
    }

    #[test]
    fn abs_cdf_matches_quadrature() {
        for p in parametric() {
            for x in [0.1, 0.5, 1.7] {
                let lo = if p.is_half_line() { 0.0 } else { -x };
                let quad = p.integrate_against(|_| 1.0, lo, x).unwrap();
                assert!((quad - p.abs_cdf(x)).abs() < 1e-12, "{} at {x}", p.name());
            }
        }
    }

    #[test]
    fn symmetric_kinds_are_even() {
        for p in [Prior::laplace(1.0).unwrap(), Prior::gaussian(1.0).unwrap()] {
            for w in [0.1, 0.9, 2.5] {
                assert_eq!(p.density(w), p.density(-w));
            }
        }
        assert_eq!(Prior::half_laplace(1.0).unwrap().density(-0.1), 0.0);
    }

    #[test]
    fn empirical_requires_two_distinct_samples() {
        assert!(Prior::empirical(&[1.0]).is_err());
        assert!(Prior::empirical(&[2.0, 2.0, 2.0]).is_err());
        assert!(Prior::empirical(&[1.0, 2.0]).is_ok());
    }

    #[test]
    fn empirical_density_tracks_the_source() {
        let mut rng = RandomSource::new(11);
        let samples: Vec<f64> = (0..200_000).map(|_| rng.standard_normal()).collect();
        let e = Prior::empirical(&samples).unwrap();
        let g = Prior::gaussian(1.0).unwrap();
        assert!((e.density(0.0) - g.density(0.0)).abs() < 0.02);
        assert!((e.abs_cdf(1.0) - g.abs_cdf(1.0)).abs() < 0.005);
        assert!((e.sigma() - 1.0).abs() < 0.01);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Prior::laplace(0.0).is_err());
        assert!(Prior::gaussian(-1.0).is_err());
        assert!(Prior::half_gaussian(f64::NAN).is_err());
    }
}
