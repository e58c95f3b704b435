//! Toy quantization-aware training: a two-layer ReLU network whose latent
//! weights are re-encoded every step, decoded for the forward pass, and
//! updated by SGD with momentum through a straight-through estimator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::code::{pack_codes, TernaryCode};
use crate::error::{Result, SztError};
use crate::grad::{sr_round, ste_factor, SteKind};
use crate::kernel::ternary_gemv;
use crate::quantizer::{bt_code, calibrate, szt_code, LayerQuantConfig, ScaleRule};
use crate::rng::RandomSource;
use crate::tensor::{Granularity, PackedTernaryTensor};

const INIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;
const DATA_STREAM: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Regression,
    Parity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SynthTask {
    /// `y = A x + noise · ε` with `x, ε` standard normal.
    Regression { inputs: usize, outputs: usize, noise: f64 },
    /// `±1` inputs; the label is 1 when an odd number of inputs is negative.
    Parity { bits: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub kind: TaskKind,
    pub input_dim: usize,
    pub output_dim: usize,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Parity datasets with `size ≥ 2^bits` enumerate every input pattern in
/// order (cyclically); smaller ones draw patterns at random.
pub fn synth_dataset(task: &SynthTask, size: usize, seed: u64) -> Result<Dataset> {
    if size == 0 {
        return Err(SztError::InvalidInput("dataset size must be at least 1".into()));
    }
    let mut rng = RandomSource::with_stream(seed, DATA_STREAM);
    match *task {
        SynthTask::Regression { inputs, outputs, noise } => {
            if inputs == 0 || outputs == 0 || !(noise >= 0.0) {
                return Err(SztError::InvalidInput(format!("bad regression task {task:?}")));
            }
            let scale = 1.0 / (inputs as f64).sqrt();
            let a: Vec<f64> = (0..inputs * outputs).map(|_| scale * rng.standard_normal()).collect();
            let xs: Vec<Vec<f64>> = (0..size).map(|_| (0..inputs).map(|_| rng.standard_normal()).collect()).collect();
            let ys = xs
                .iter()
                .map(|x| {
                    a.chunks_exact(inputs)
                        .map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + noise * rng.standard_normal())
                        .collect()
                })
                .collect();
            Ok(Dataset { kind: TaskKind::Regression, input_dim: inputs, output_dim: outputs, inputs: xs, targets: ys })
        }
        SynthTask::Parity { bits } => {
            if bits == 0 || bits > 30 {
                return Err(SztError::InvalidInput(format!("parity bits must lie in 1..=30, got {bits}")));
            }
            let patterns = 1usize << bits;
            let mut xs = Vec::with_capacity(size);
            let mut ys = Vec::with_capacity(size);
            for i in 0..size {
                let p = if size >= patterns { i % patterns } else { rng.below(patterns) };
                let x: Vec<f64> = (0..bits).map(|j| if p >> j & 1 == 1 { -1.0 } else { 1.0 }).collect();
                ys.push(vec![f64::from(p.count_ones() % 2)]);
                xs.push(x);
            }
            Ok(Dataset { kind: TaskKind::Parity, input_dim: bits, output_dim: 1, inputs: xs, targets: ys })
        }
    }
}

/// Latent weights of `in → hidden → out`, row-major `(out_features × in_features)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyNet {
    pub input_dim: usize,
    pub hidden: usize,
    pub output_dim: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    #[serde(skip, default = "default_quant")]
    pub quant: [LayerQuantConfig; 2],
    pub deltas: [f64; 2],
}

fn default_quant() -> [LayerQuantConfig; 2] {
    [LayerQuantConfig::default(), LayerQuantConfig::default()]
}

impl ToyNet {
    /// He-normal weights, zero biases, thresholds calibrated from the
    /// initial weights.
    pub fn new(input_dim: usize, hidden: usize, output_dim: usize, seed: u64) -> Result<Self> {
        Self::with_quant(input_dim, hidden, output_dim, seed, default_quant())
    }

    pub fn with_quant(
        input_dim: usize,
        hidden: usize,
        output_dim: usize,
        seed: u64,
        quant: [LayerQuantConfig; 2],
    ) -> Result<Self> {
        if input_dim == 0 || hidden == 0 || output_dim == 0 {
            return Err(SztError::ShapeMismatch(format!("layer widths must be positive: {input_dim}, {hidden}, {output_dim}")));
        }
        if quant.iter().any(|q| q.granularity != Granularity::PerLayer) {
            return Err(SztError::Unsupported("the training harness uses per-layer thresholds".into()));
        }
        let mut rng = RandomSource::with_stream(seed, INIT_STREAM);
        let mut draw = |n: usize, fan_in: usize| -> Vec<f64> {
            let sd = (2.0 / fan_in as f64).sqrt();
            (0..n).map(|_| sd * rng.standard_normal()).collect()
        };
        let w1 = draw(hidden * input_dim, input_dim);
        let w2 = draw(output_dim * hidden, hidden);
        let mut net = Self {
            input_dim,
            hidden,
            output_dim,
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: vec![0.0; output_dim],
            quant,
            deltas: [0.0; 2],
        };
        net.calibrate_thresholds()?;
        Ok(net)
    }

    pub fn calibrate_thresholds(&mut self) -> Result<()> {
        self.deltas = [
            calibrate(&self.w1, &self.quant[0].threshold_rule)?.delta,
            calibrate(&self.w2, &self.quant[1].threshold_rule)?.delta,
        ];
        Ok(())
    }

    fn scale(&self, layer: usize) -> f64 {
        match self.quant[layer].scale_rule {
            ScaleRule::Unit => 1.0,
            ScaleRule::EqualThreshold => self.deltas[layer],
        }
    }

    fn layer_weights(&self, layer: usize) -> &[f64] {
        if layer == 0 {
            &self.w1
        } else {
            &self.w2
        }
    }

    fn layer_dims(&self, layer: usize) -> Vec<usize> {
        if layer == 0 {
            vec![self.hidden, self.input_dim]
        } else {
            vec![self.output_dim, self.hidden]
        }
    }

    /// Deterministic codes of one layer under BT or SZT encoding.
    pub fn encode_layer(&self, layer: usize, kind: SteKind) -> Vec<TernaryCode> {
        let delta = self.deltas[layer];
        let enc: fn(f64, f64) -> TernaryCode = if kind == SteKind::Szt { szt_code } else { bt_code };
        self.layer_weights(layer).iter().map(|&w| enc(w, delta)).collect()
    }

    /// Packs codes of layer `layer` with its threshold and decode scale.
    pub fn pack_layer(&self, layer: usize, codes: &[TernaryCode]) -> Result<PackedTernaryTensor> {
        PackedTernaryTensor::from_codes(
            self.layer_dims(layer),
            Granularity::PerLayer,
            vec![self.deltas[layer]],
            vec![self.scale(layer)],
            codes,
        )
    }

    fn is_finite(&self) -> bool {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaRefresh {
    #[default]
    Never,
    PerEpoch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub ste: SteKind,
    pub epochs: usize,
    pub batch: usize,
    /// Learning rate per step; the last entry repeats once exhausted.
    pub lr_schedule: Vec<f64>,
    pub beta: f64,
    pub seed: u64,
    pub delta_refresh: DeltaRefresh,
    pub hidden: usize,
    /// Stream id of the stochastic-rounding generator.
    pub sr_stream: u64,
    /// Keep the codes of every step in the report.
    pub record_codes: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            ste: SteKind::Szt,
            epochs: 20,
            batch: 16,
            lr_schedule: vec![0.05],
            beta: 0.9,
            seed: 0,
            delta_refresh: DeltaRefresh::Never,
            hidden: 16,
            sr_stream: 3,
            record_codes: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 || self.hidden == 0 {
            return Err(SztError::InvalidInput("epochs, batch and hidden must be at least 1".into()));
        }
        if self.lr_schedule.is_empty() || self.lr_schedule.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(SztError::InvalidInput(format!("learning rates must be positive, got {:?}", self.lr_schedule)));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(SztError::InvalidInput(format!("beta must lie in [0, 1), got {}", self.beta)));
        }
        Ok(())
    }

    pub fn lr_at(&self, step: u64) -> f64 {
        let i = (step as usize).min(self.lr_schedule.len().saturating_sub(1));
        self.lr_schedule.get(i).copied().unwrap_or(0.0)
    }
}

/// Momentum buffers, the previous step's codes and the SR generator.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub step: u64,
    pub epoch: usize,
    m_w1: Vec<f64>,
    m_b1: Vec<f64>,
    m_w2: Vec<f64>,
    m_b2: Vec<f64>,
    prev_codes: Option<[Vec<TernaryCode>; 2]>,
    rng: RandomSource,
}

impl OptimizerState {
    pub fn new(net: &ToyNet, config: &TrainConfig) -> Self {
        Self {
            step: 0,
            epoch: 0,
            m_w1: vec![0.0; net.w1.len()],
            m_b1: vec![0.0; net.b1.len()],
            m_w2: vec![0.0; net.w2.len()],
            m_b2: vec![0.0; net.b2.len()],
            prev_codes: None,
            rng: RandomSource::with_stream(config.seed, config.sr_stream),
        }
    }

    /// Codes used by the most recent step.
    pub fn last_codes(&self) -> Option<&[Vec<TernaryCode>; 2]> {
        self.prev_codes.as_ref()
    }

    /// Momentum of the latent weights of `layer`.
    pub fn momentum(&self, layer: usize) -> &[f64] {
        if layer == 0 {
            &self.m_w1
        } else {
            &self.m_w2
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transitions {
    /// Changes of the decoded value (`0 ↔ ±1`, `+1 ↔ −1`).
    pub numeric: u64,
    /// Changes between `0⁺` and `0⁻`.
    pub representational: u64,
}

impl std::ops::AddAssign for Transitions {
    fn add_assign(&mut self, o: Self) {
        self.numeric += o.numeric;
        self.representational += o.representational;
    }
}

pub fn count_transitions(prev: &[TernaryCode], next: &[TernaryCode]) -> Result<Transitions> {
    if prev.len() != next.len() {
        return Err(SztError::LengthMismatch(format!("{} vs {} codes", prev.len(), next.len())));
    }
    let mut t = Transitions::default();
    for (a, b) in prev.iter().zip(next) {
        if a.numeric_value() != b.numeric_value() {
            t.numeric += 1;
        } else if a != b {
            t.representational += 1;
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub loss: f64,
    pub transitions: Transitions,
}

struct ExampleGrad {
    loss: f64,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

/// Loss and output gradient for one example.
fn loss_and_grad(kind: TaskKind, y: &[f64], t: &[f64]) -> (f64, Vec<f64>) {
    match kind {
        TaskKind::Regression => {
            let n = y.len() as f64;
            let loss = y.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
            (loss, y.iter().zip(t).map(|(a, b)| 2.0 * (a - b) / n).collect())
        }
        TaskKind::Parity => {
            let z = y[0];
            let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
            let sigmoid = 1.0 / (1.0 + (-z).exp());
            (softplus - t[0] * z, vec![sigmoid - t[0]])
        }
    }
}

fn example_grad(
    net: &ToyNet,
    m1: &PackedTernaryTensor,
    m2: &PackedTernaryTensor,
    w2_decoded: &[f64],
    kind: TaskKind,
    x: &[f64],
    t: &[f64],
) -> Result<ExampleGrad> {
    let mut pre = ternary_gemv(m1, x)?;
    for (p, b) in pre.iter_mut().zip(&net.b1) {
        *p += b;
    }
    let h: Vec<f64> = pre.iter().map(|&p| p.max(0.0)).collect();
    let mut y = ternary_gemv(m2, &h)?;
    for (v, b) in y.iter_mut().zip(&net.b2) {
        *v += b;
    }
    let (loss, dy) = loss_and_grad(kind, &y, t);

    let mut w2 = vec![0.0; net.w2.len()];
    let mut dh = vec![0.0; net.hidden];
    for (o, &g) in dy.iter().enumerate() {
        let row = o * net.hidden;
        for j in 0..net.hidden {
            w2[row + j] = g * h[j];
            dh[j] += w2_decoded[row + j] * g;
        }
    }
    let dpre: Vec<f64> = dh.iter().zip(&pre).map(|(&d, &p)| if p > 0.0 { d } else { 0.0 }).collect();
    let mut w1 = vec![0.0; net.w1.len()];
    for (j, &g) in dpre.iter().enumerate() {
        let row = j * net.input_dim;
        for (k, &xk) in x.iter().enumerate() {
            w1[row + k] = g * xk;
        }
    }
    Ok(ExampleGrad { loss, w1, b1: dpre, w2, b2: dy })
}

fn encode_step(net: &ToyNet, kind: SteKind, rng: &mut RandomSource) -> [Vec<TernaryCode>; 2] {
    match kind {
        SteKind::Sr => [0, 1].map(|l| {
            let delta = net.deltas[l];
            net.layer_weights(l).iter().map(|&w| sr_round(w, delta, rng)).collect()
        }),
        _ => [net.encode_layer(0, kind), net.encode_layer(1, kind)],
    }
}

fn accumulate(acc: &mut [f64], add: &[f64]) {
    for (a, b) in acc.iter_mut().zip(add) {
        *a += b;
    }
}

/// Mean loss of the quantized network over `indices`, with BT or SZT codes.
pub fn evaluate_loss(net: &ToyNet, kind: SteKind, data: &Dataset, indices: &[usize]) -> Result<f64> {
    let m1 = net.pack_layer(0, &net.encode_layer(0, kind))?;
    let m2 = net.pack_layer(1, &net.encode_layer(1, kind))?;
    let w2_decoded = m2.dequantize();
    let losses: Vec<f64> = indices
        .par_iter()
        .map(|&i| example_grad(net, &m1, &m2, &w2_decoded, data.kind, &data.inputs[i], &data.targets[i]).map(|g| g.loss))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / indices.len() as f64)
}

/// One iteration: encode, decode, forward, loss, straight-through backward,
/// and a momentum update of the latent weights. Transitions compare this
/// step's codes with the previous step's.
pub fn qat_step(
    net: &mut ToyNet,
    data: &Dataset,
    batch: &[usize],
    config: &TrainConfig,
    state: &mut OptimizerState,
) -> Result<StepOutcome> {
    if batch.is_empty() {
        return Err(SztError::InvalidInput("empty batch".into()));
    }
    if data.input_dim != net.input_dim || data.output_dim != net.output_dim {
        return Err(SztError::ShapeMismatch(format!(
            "dataset is {}→{}, network is {}→{}",
            data.input_dim, data.output_dim, net.input_dim, net.output_dim
        )));
    }
    if let Some(&bad) = batch.iter().find(|&&i| i >= data.len()) {
        return Err(SztError::InvalidInput(format!("batch index {bad} out of range for {} examples", data.len())));
    }
    if !net.is_finite() {
        return Err(SztError::Divergence { epoch: state.epoch, step: state.step, loss: f64::NAN });
    }

    let kind = config.ste;
    let codes = encode_step(net, kind, &mut state.rng);
    let mut transitions = Transitions::default();
    if let Some(prev) = &state.prev_codes {
        transitions += count_transitions(&prev[0], &codes[0])?;
        transitions += count_transitions(&prev[1], &codes[1])?;
    }
    let m1 = net.pack_layer(0, &codes[0])?;
    let m2 = net.pack_layer(1, &codes[1])?;
    let w2_decoded = m2.dequantize();

    let per_example: Vec<ExampleGrad> = batch
        .par_iter()
        .map(|&i| example_grad(net, &m1, &m2, &w2_decoded, data.kind, &data.inputs[i], &data.targets[i]))
        .collect::<Result<_>>()?;
    let mut total = ExampleGrad {
        loss: 0.0,
        w1: vec![0.0; net.w1.len()],
        b1: vec![0.0; net.b1.len()],
        w2: vec![0.0; net.w2.len()],
        b2: vec![0.0; net.b2.len()],
    };
    for g in &per_example {
        total.loss += g.loss;
        accumulate(&mut total.w1, &g.w1);
        accumulate(&mut total.b1, &g.b1);
        accumulate(&mut total.w2, &g.w2);
        accumulate(&mut total.b2, &g.b2);
    }
    let inv = 1.0 / batch.len() as f64;
    let loss = total.loss * inv;
    if !loss.is_finite() {
        return Err(SztError::Divergence { epoch: state.epoch, step: state.step, loss });
    }

    let lr = config.lr_at(state.step);
    let beta = config.beta;
    let update = |w: &mut [f64], m: &mut [f64], g: &[f64], codes: Option<(&[TernaryCode], f64)>| {
        for i in 0..w.len() {
            let factor = codes.map_or(1.0, |(c, delta)| ste_factor(kind, w[i], delta, c[i]));
            m[i] = beta * m[i] + factor * g[i] * inv;
            w[i] -= lr * m[i];
        }
    };
    update(&mut net.w1, &mut state.m_w1, &total.w1, Some((&codes[0], net.deltas[0])));
    update(&mut net.b1, &mut state.m_b1, &total.b1, None);
    update(&mut net.w2, &mut state.m_w2, &total.w2, Some((&codes[1], net.deltas[1])));
    update(&mut net.b2, &mut state.m_b2, &total.b2, None);

    state.prev_codes = Some(codes);
    state.step += 1;
    Ok(StepOutcome { loss, transitions })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub ste: SteKind,
    pub loss_curve: Vec<f64>,
    pub numeric_transitions: u64,
    pub representational_transitions: u64,
    /// SHA-256 of the final latent parameters and last codes, hex encoded.
    pub checkpoint_digest: String,
    pub steps: u64,
    pub final_deltas: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code_snapshots: Option<Vec<[Vec<TernaryCode>; 2]>>,
}

/// SHA-256 over `w1, b1, w2, b2` as little-endian f64 followed by the packed
/// codes of both layers.
pub fn checkpoint_digest(net: &ToyNet, codes: &[Vec<TernaryCode>; 2]) -> String {
    let mut h = Sha256::new();
    for part in [&net.w1, &net.b1, &net.w2, &net.b2] {
        for v in part.iter() {
            h.update(v.to_le_bytes());
        }
    }
    for c in codes {
        h.update(pack_codes(c));
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn train(config: &TrainConfig, data: &Dataset) -> Result<RunReport> {
    train_with_net(config, data).map(|(_, r)| r)
}

/// Trains a freshly initialized network and returns it with the report.
pub fn train_with_net(config: &TrainConfig, data: &Dataset) -> Result<(ToyNet, RunReport)> {
    config.validate()?;
    if data.is_empty() {
        return Err(SztError::InvalidInput("dataset is empty".into()));
    }
    let mut net = ToyNet::new(data.input_dim, config.hidden, data.output_dim, config.seed)?;
    let mut state = OptimizerState::new(&net, config);
    let shuffler = RandomSource::with_stream(config.seed, SHUFFLE_STREAM);
    let mut totals = Transitions::default();
    let mut loss_curve = Vec::with_capacity(config.epochs);
    let mut snapshots = config.record_codes.then(Vec::new);

    for epoch in 0..config.epochs {
        state.epoch = epoch;
        if epoch > 0 && config.delta_refresh == DeltaRefresh::PerEpoch {
            net.calibrate_thresholds()?;
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        shuffler.child(epoch as u64).shuffle(&mut order);
        let mut weighted = 0.0;
        for batch in order.chunks(config.batch) {
            let out = qat_step(&mut net, data, batch, config, &mut state)?;
            totals += out.transitions;
            weighted += out.loss * batch.len() as f64;
            if let (Some(s), Some(c)) = (snapshots.as_mut(), state.last_codes()) {
                s.push(c.clone());
            }
        }
        loss_curve.push(weighted / data.len() as f64);
    }
    let codes = state.last_codes().expect("at least one step ran");
    let report = RunReport {
        ste: config.ste,
        loss_curve,
        numeric_transitions: totals.numeric,
        representational_transitions: totals.representational,
        checkpoint_digest: checkpoint_digest(&net, codes),
        steps: state.step,
        final_deltas: net.deltas,
        code_snapshots: snapshots,
    };
    Ok((net, report))
}
