//! Ternary matrix-vector products and multi-layer error propagation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code::TernaryCode;
use crate::error::{Result, SztError};
use crate::numerics::RunningStats;
use crate::prior::Prior;
use crate::quantizer::{bt_code, szt_code};
use crate::rng::RandomSource;
use crate::tensor::{Granularity, PackedTernaryTensor};

/// Scale layout of a rank-2 code matrix.
enum ScaleAxis {
    Layer,
    Row,
    Column,
}

fn matrix_shape(m: &PackedTernaryTensor, x_len: usize) -> Result<(usize, usize, ScaleAxis)> {
    let dims = m.dims();
    if dims.len() != 2 {
        return Err(SztError::ShapeMismatch(format!("expected a rank-2 code matrix, got dims {dims:?}")));
    }
    let (rows, cols) = (dims[0], dims[1]);
    if x_len != cols {
        return Err(SztError::ShapeMismatch(format!("matrix has {cols} columns, vector has {x_len} entries")));
    }
    let axis = match m.granularity() {
        Granularity::PerLayer => ScaleAxis::Layer,
        Granularity::PerChannel(0) => ScaleAxis::Row,
        Granularity::PerChannel(_) => ScaleAxis::Column,
    };
    Ok((rows, cols, axis))
}

/// Signed sum `Σ_j v(q_ij)·x_j` using only additions and subtractions.
#[inline]
fn signed_sum<T, A>(m: &PackedTernaryTensor, row: usize, cols: usize, x: &[T], mut acc: A, weight: impl Fn(usize, T) -> A) -> A
where
    T: Copy,
    A: std::ops::AddAssign + std::ops::SubAssign,
{
    let base = row * cols;
    for (j, &xj) in x.iter().enumerate() {
        match m.code(base + j) {
            TernaryCode::PlusOne => acc += weight(j, xj),
            TernaryCode::MinusOne => acc -= weight(j, xj),
            TernaryCode::ZeroPlus | TernaryCode::ZeroMinus => {}
        }
    }
    acc
}

/// `y = diag(s) · V · x` for a `rows × cols` code matrix with decoded
/// values `V = v(q)`. Per-column scales are folded into `x` first.
pub fn ternary_gemv(m: &PackedTernaryTensor, x: &[f64]) -> Result<Vec<f64>> {
    let (rows, cols, axis) = matrix_shape(m, x.len())?;
    let scales = m.scales();
    Ok((0..rows)
        .into_par_iter()
        .map(|i| match axis {
            ScaleAxis::Layer => scales[0] * signed_sum(m, i, cols, x, 0.0, |_, v| v),
            ScaleAxis::Row => scales[i] * signed_sum(m, i, cols, x, 0.0, |_, v| v),
            ScaleAxis::Column => signed_sum(m, i, cols, x, 0.0, |j, v| scales[j] * v),
        })
        .collect())
}

/// Unscaled integer product `V · x`, accumulated in 64 bits.
pub fn ternary_gemv_int(m: &PackedTernaryTensor, x: &[i32]) -> Result<Vec<i64>> {
    let (rows, cols, _) = matrix_shape(m, x.len())?;
    Ok((0..rows)
        .into_par_iter()
        .map(|i| signed_sum(m, i, cols, x, 0i64, |_, v| i64::from(v)))
        .collect())
}

/// A dense affine layer `y = W x + b` with `W` stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || weights.len() != rows * cols || bias.len() != rows {
            return Err(SztError::ShapeMismatch(format!(
                "layer {rows}x{cols} needs {} weights and {rows} biases, got {} and {}",
                rows * cols,
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self { rows, cols, weights, bias })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.cols)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

/// Layers applied in order; layer `l` maps `n_l` inputs to `n_{l+1}` outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearStack {
    layers: Vec<DenseLayer>,
}

impl LinearStack {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(SztError::InvalidInput("a stack needs at least one layer".into()));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[1].cols != pair[0].rows {
                return Err(SztError::ShapeMismatch(format!(
                    "layer {} outputs {} values but layer {} expects {}",
                    l,
                    pair[0].rows,
                    l + 1,
                    pair[1].cols
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Random stack with weights drawn from `prior` and zero biases.
    pub fn random(widths: &[usize], prior: &Prior, rng: &mut RandomSource) -> Result<Self> {
        if widths.len() < 2 {
            return Err(SztError::InvalidInput("need at least input and output widths".into()));
        }
        let layers = widths
            .windows(2)
            .map(|w| {
                let weights = (0..w[0] * w[1]).map(|_| prior.sample(rng)).collect();
                DenseLayer::new(w[1], w[0], weights, vec![0.0; w[1]])
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").rows
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.layers.iter().fold(x.to_vec(), |h, layer| layer.apply(&h))
    }
}

/// Dense product `A · B` of row-major matrices.
fn matmul(a: &[f64], a_rows: usize, a_cols: usize, b: &[f64], b_cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; a_rows * b_cols];
    for i in 0..a_rows {
        for k in 0..a_cols {
            let aik = a[i * a_cols + k];
            if aik != 0.0 {
                for j in 0..b_cols {
                    out[i * b_cols + j] += aik * b[k * b_cols + j];
                }
            }
        }
    }
    out
}

/// Output error `E‖e‖²` when every layer output receives independent
/// zero-mean noise of per-coordinate variance `eps_var`:
/// `Σ_l ‖W_L ⋯ W_{l+1}‖_F² · eps_var`, the last layer's own term being
/// `n_out · eps_var`.
pub fn stacked_error_variance(stack: &LinearStack, eps_var: f64) -> Result<f64> {
    if !(eps_var >= 0.0 && eps_var.is_finite()) {
        return Err(SztError::InvalidInput(format!("eps_var must be finite and non-negative, got {eps_var}")));
    }
    let out = stack.output_dim();
    // Running suffix product P = W_L ⋯ W_{l+1}, starting at the identity.
    let mut suffix: Vec<f64> = (0..out * out).map(|i| if i / out == i % out { 1.0 } else { 0.0 }).collect();
    let mut suffix_cols = out;
    let mut total = 0.0;
    for layer in stack.layers().iter().rev() {
        total += suffix.iter().map(|v| v * v).sum::<f64>();
        suffix = matmul(&suffix, out, suffix_cols, &layer.weights, layer.cols);
        suffix_cols = layer.cols;
    }
    Ok(total * eps_var)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
}

/// Monte Carlo oracle for [`stacked_error_variance`]: propagates standard
/// normal inputs through the clean and the noise-injected stack.
pub fn noise_injection_mc(stack: &LinearStack, eps_var: f64, trials: u64, seed: u64) -> Result<MonteCarloEstimate> {
    if trials == 0 {
        return Err(SztError::InvalidInput("trials must be at least 1".into()));
    }
    let sd = eps_var.sqrt();
    let root = RandomSource::new(seed);
    let sq: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = root.child(t);
            let x: Vec<f64> = (0..stack.input_dim()).map(|_| rng.standard_normal()).collect();
            let mut clean = x.clone();
            let mut noisy = x;
            for layer in stack.layers() {
                clean = layer.apply(&clean);
                noisy = layer.apply(&noisy);
                for v in noisy.iter_mut() {
                    *v += sd * rng.standard_normal();
                }
            }
            clean.iter().zip(&noisy).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        })
        .collect();
    let stats: RunningStats = sq.into_iter().collect();
    Ok(MonteCarloEstimate { mean: stats.mean(), std_error: stats.std_error(), trials })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrReport {
    /// Output error second moment `E‖y − ỹ‖²` under BT codes.
    pub var_bt: f64,
    pub var_szt: f64,
    /// Mean squared weight reconstruction error under BT and SZT codes.
    pub weight_mse_bt: f64,
    pub weight_mse_szt: f64,
    pub outputs_identical: bool,
    pub trials: u64,
}

fn quantize_layer(layer: &DenseLayer, delta: f64, encode: fn(f64, f64) -> TernaryCode) -> Result<PackedTernaryTensor> {
    let codes: Vec<TernaryCode> = layer.weights.iter().map(|&w| encode(w, delta)).collect();
    PackedTernaryTensor::from_codes(vec![layer.rows, layer.cols], Granularity::PerLayer, vec![delta], vec![delta], &codes)
}

fn quantized_forward(codes: &[PackedTernaryTensor], stack: &LinearStack, x: &[f64]) -> Result<Vec<f64>> {
    let mut h = x.to_vec();
    for (m, layer) in codes.iter().zip(stack.layers()) {
        h = ternary_gemv(m, &h)?;
        for (v, b) in h.iter_mut().zip(&layer.bias) {
            *v += b;
        }
    }
    Ok(h)
}

/// Quantizes every layer under BT and SZT with threshold and scale `delta`,
/// then compares both quantized stacks with the full-precision stack on
/// inputs drawn from `prior`.
pub fn stacked_snr_mc(stack: &LinearStack, prior: &Prior, delta: f64, trials: u64, seed: u64) -> Result<SnrReport> {
    if trials == 0 {
        return Err(SztError::InvalidInput("trials must be at least 1".into()));
    }
    crate::error::ensure_positive("stacked_snr_mc", "delta", delta)?;
    let bt: Vec<_> = stack.layers().iter().map(|l| quantize_layer(l, delta, bt_code)).collect::<Result<_>>()?;
    let szt: Vec<_> = stack.layers().iter().map(|l| quantize_layer(l, delta, szt_code)).collect::<Result<_>>()?;

    let weight_mse = |codes: &[PackedTernaryTensor]| {
        let mut stats = RunningStats::new();
        for (m, layer) in codes.iter().zip(stack.layers()) {
            for (w, r) in layer.weights.iter().zip(m.dequantize()) {
                stats.push((w - r).powi(2));
            }
        }
        stats.mean()
    };

    let root = RandomSource::new(seed);
    let rows: Vec<(f64, f64, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(f64, f64, bool)> {
            let mut rng = root.child(t);
            let x: Vec<f64> = (0..stack.input_dim()).map(|_| prior.sample(&mut rng)).collect();
            let clean = stack.forward(&x);
            let y_bt = quantized_forward(&bt, stack, &x)?;
            let y_szt = quantized_forward(&szt, stack, &x)?;
            let err = |y: &[f64]| clean.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            let same = y_bt.iter().zip(&y_szt).all(|(a, b)| a.to_bits() == b.to_bits());
            Ok((err(&y_bt), err(&y_szt), same))
        })
        .collect::<Result<_>>()?;

    let var_bt: RunningStats = rows.iter().map(|r| r.0).collect();
    let var_szt: RunningStats = rows.iter().map(|r| r.1).collect();
    Ok(SnrReport {
        var_bt: var_bt.mean(),
        var_szt: var_szt.mean(),
        weight_mse_bt: weight_mse(&bt),
        weight_mse_szt: weight_mse(&szt),
        outputs_identical: rows.iter().all(|r| r.2),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use TernaryCode::*;

    fn matrix(rows: usize, cols: usize, codes: &[TernaryCode], scales: Vec<f64>, g: Granularity) -> PackedTernaryTensor {
        PackedTernaryTensor::from_codes(vec![rows, cols], g, scales.clone(), scales, codes).unwrap()
    }

    #[test]
    fn gemv_examples() {
        let m = matrix(1, 3, &[PlusOne, ZeroMinus, MinusOne], vec![1.0], Granularity::PerLayer);
        assert_eq!(ternary_gemv(&m, &[2.0, 3.0, 4.0]).unwrap(), vec![-2.0]);
        assert_eq!(ternary_gemv_int(&m, &[2, 3, 4]).unwrap(), vec![-2]);

        let zeros = matrix(2, 2, &[ZeroPlus, ZeroMinus, ZeroMinus, ZeroPlus], vec![3.0], Granularity::PerLayer);
        assert_eq!(ternary_gemv(&zeros, &[1.0, -7.0]).unwrap(), vec![0.0, 0.0]);

        assert!(matches!(ternary_gemv(&m, &[1.0]), Err(SztError::ShapeMismatch(_))));
    }

    #[test]
    fn gemv_scale_axes() {
        let codes = [PlusOne, PlusOne, MinusOne, PlusOne];
        let rows = matrix(2, 2, &codes, vec![2.0, 3.0], Granularity::PerChannel(0));
        assert_eq!(ternary_gemv(&rows, &[1.0, 1.0]).unwrap(), vec![4.0, 0.0]);
        let cols = matrix(2, 2, &codes, vec![2.0, 3.0], Granularity::PerChannel(1));
        assert_eq!(ternary_gemv(&cols, &[1.0, 1.0]).unwrap(), vec![5.0, 1.0]);
    }

    #[test]
    fn stacked_variance_examples() {
        let identity = DenseLayer::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0; 2]).unwrap();
        let one = LinearStack::new(vec![identity.clone()]).unwrap();
        assert!((stacked_error_variance(&one, 0.1).unwrap() - 0.2).abs() < 1e-15);

        // Second layer with ‖W‖_F² = 4 after an identity first layer.
        let w2 = DenseLayer::new(2, 2, vec![2.0, 0.0, 0.0, 0.0], vec![0.0; 2]).unwrap();
        let two = LinearStack::new(vec![identity, w2]).unwrap();
        assert!((stacked_error_variance(&two, 0.1).unwrap() - (0.4 + 0.2)).abs() < 1e-15);
    }

    #[test]
    fn stack_shape_checks() {
        let a = DenseLayer::new(3, 2, vec![0.0; 6], vec![0.0; 3]).unwrap();
        let b = DenseLayer::new(2, 2, vec![0.0; 4], vec![0.0; 2]).unwrap();
        assert!(LinearStack::new(vec![a, b]).is_err());
        assert!(DenseLayer::new(2, 2, vec![0.0; 3], vec![0.0; 2]).is_err());
    }

    #[test]
    fn zero_stack_has_zero_error() {
        let z = DenseLayer::new(3, 3, vec![0.0; 9], vec![0.0; 3]).unwrap();
        let stack = LinearStack::new(vec![z.clone(), z]).unwrap();
        let r = stacked_snr_mc(&stack, &Prior::gaussian(1.0).unwrap(), 0.5, 100, 1).unwrap();
        assert_eq!(r.var_bt, 0.0);
        assert_eq!(r.var_szt, 0.0);
        assert!(r.outputs_identical);
    }
}
