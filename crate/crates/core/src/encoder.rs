//! Trainable embedding network and its supervised contrastive objective.
//!
//! The encoder maps a scattering feature tensor to a unit-norm embedding:
//! channel-attention gate, two 3x3 stride-2 convolutions with rectifiers,
//! global average pooling, and an affine head followed by L2 normalization.
//! Everything is plain f64 with hand-written backpropagation, so gradients
//! can be checked against finite differences exactly.

use ndarray::{Array1, Array2, Array3, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::io::{read_weights, write_weights};
use crate::scattering::ScatterFeatures;
use crate::waveform::PulseMatrix;

pub const CONV1_OUT: usize = 32;
pub const CONV2_OUT: usize = 64;
pub const EMBED_DIM: usize = 64;
/// Channel-attention bottleneck reduction.
pub const ATTENTION_REDUCTION: usize = 4;

/// Unit-norm embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub vector: Vec<f64>,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// All trainable parameters of the embedding network.
#[derive(Debug, Clone)]
pub struct EncoderParams {
    /// Gate bottleneck: (C/r, C) weight + (C/r,) bias.
    pub attn_w1: Array2<f64>,
    pub attn_b1: Array1<f64>,
    /// Gate expansion: (C, C/r) weight + (C,) bias.
    pub attn_w2: Array2<f64>,
    pub attn_b2: Array1<f64>,
    /// (32, C, 3, 3) kernels + (32,) bias, stride 2, padding 1.
    pub conv1_w: Array4<f64>,
    pub conv1_b: Array1<f64>,
    /// (64, 32, 3, 3) kernels + (64,) bias, stride 2, padding 1.
    pub conv2_w: Array4<f64>,
    pub conv2_b: Array1<f64>,
    /// (D_emb, 64) weight + (D_emb,) bias.
    pub head_w: Array2<f64>,
    pub head_b: Array1<f64>,
}

impl EncoderParams {
    /// He-style initialization (zero biases) for `channels` input channels.
    pub fn init(channels: usize, seed: u64) -> Result<Self> {
        if channels < ATTENTION_REDUCTION {
            return Err(CoreError::config("too few channels for the attention bottleneck"));
        }
        let hidden = channels / ATTENTION_REDUCTION;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        fn he_draw(rng: &mut ChaCha8Rng, fan_in: usize) -> f64 {
            Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap().sample(rng)
        }
        let attn_w1 =
            Array2::from_shape_simple_fn((hidden, channels), || he_draw(&mut rng, channels));
        let attn_w2 =
            Array2::from_shape_simple_fn((channels, hidden), || he_draw(&mut rng, hidden));
        let conv1_w = Array4::from_shape_simple_fn((CONV1_OUT, channels, 3, 3), || {
            he_draw(&mut rng, channels * 9)
        });
        let conv2_w = Array4::from_shape_simple_fn((CONV2_OUT, CONV1_OUT, 3, 3), || {
            he_draw(&mut rng, CONV1_OUT * 9)
        });
        let head_w =
            Array2::from_shape_simple_fn((EMBED_DIM, CONV2_OUT), || he_draw(&mut rng, CONV2_OUT));
        Ok(EncoderParams {
            attn_w1,
            attn_b1: Array1::zeros(hidden),
            attn_w2,
            attn_b2: Array1::zeros(channels),
            conv1_w,
            conv1_b: Array1::zeros(CONV1_OUT),
            conv2_w,
            conv2_b: Array1::zeros(CONV2_OUT),
            head_w,
            head_b: Array1::zeros(EMBED_DIM),
        })
    }

    pub fn channels(&self) -> usize {
        self.attn_w1.dim().1
    }

    pub fn zeros_like(&self) -> Self {
        EncoderParams {
            attn_w1: Array2::zeros(self.attn_w1.dim()),
            attn_b1: Array1::zeros(self.attn_b1.dim()),
            attn_w2: Array2::zeros(self.attn_w2.dim()),
            attn_b2: Array1::zeros(self.attn_b2.dim()),
            conv1_w: Array4::zeros(self.conv1_w.dim()),
            conv1_b: Array1::zeros(self.conv1_b.dim()),
            conv2_w: Array4::zeros(self.conv2_w.dim()),
            conv2_b: Array1::zeros(self.conv2_b.dim()),
            head_w: Array2::zeros(self.head_w.dim()),
            head_b: Array1::zeros(self.head_b.dim()),
        }
    }

    /// Canonical flat iteration order shared by gradients, optimizer state
    /// and the weights file.
    fn for_each<'a>(&'a self) -> impl Iterator<Item = &'a f64> {
        self.attn_w1
            .iter()
            .chain(self.attn_b1.iter())
            .chain(self.attn_w2.iter())
            .chain(self.attn_b2.iter())
            .chain(self.conv1_w.iter())
            .chain(self.conv1_b.iter())
            .chain(self.conv2_w.iter())
            .chain(self.conv2_b.iter())
            .chain(self.head_w.iter())
            .chain(self.head_b.iter())
    }

    fn for_each_mut<'a>(&'a mut self) -> impl Iterator<Item = &'a mut f64> {
        self.attn_w1
            .iter_mut()
            .chain(self.attn_b1.iter_mut())
            .chain(self.attn_w2.iter_mut())
            .chain(self.attn_b2.iter_mut())
            .chain(self.conv1_w.iter_mut())
            .chain(self.conv1_b.iter_mut())
            .chain(self.conv2_w.iter_mut())
            .chain(self.conv2_b.iter_mut())
            .chain(self.head_w.iter_mut())
            .chain(self.head_b.iter_mut())
    }

    fn tensor_layout(&self) -> Vec<(&'static str, Vec<usize>)> {
        vec![
            ("attn_w1", self.attn_w1.shape().to_vec()),
            ("attn_b1", self.attn_b1.shape().to_vec()),
            ("attn_w2", self.attn_w2.shape().to_vec()),
            ("attn_b2", self.attn_b2.shape().to_vec()),
            ("conv1_w", self.conv1_w.shape().to_vec()),
            ("conv1_b", self.conv1_b.shape().to_vec()),
            ("conv2_w", self.conv2_w.shape().to_vec()),
            ("conv2_b", self.conv2_b.shape().to_vec()),
            ("head_w", self.head_w.shape().to_vec()),
            ("head_b", self.head_b.shape().to_vec()),
        ]
    }

    /// Write all tensors to a weights manifest + binary blob.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut flat = self.for_each();
        let tensors: Vec<(String, Vec<usize>, Vec<f64>)> = self
            .tensor_layout()
            .into_iter()
            .map(|(name, shape)| {
                let len: usize = shape.iter().product();
                let values: Vec<f64> = flat.by_ref().take(len).copied().collect();
                (name.to_string(), shape, values)
            })
            .collect();
        write_weights(path, &tensors)
    }

    /// Load tensors previously written by [`EncoderParams::save`].
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let tensors = read_weights(path)?;
        let channels = tensors
            .iter()
            .find(|(name, _, _)| name == "attn_w1")
            .map(|(_, shape, _)| shape[1])
            .ok_or_else(|| CoreError::config("weights file is missing attn_w1"))?;
        let mut params = EncoderParams::init(channels, 0)?;
        if tensors.len() != params.tensor_layout().len()
            || tensors
                .iter()
                .zip(params.tensor_layout())
                .any(|((n, s, _), (name, shape))| n != name || *s != shape)
        {
            return Err(CoreError::config("weights file layout does not match the encoder"));
        }
        let values: Vec<f64> = tensors.into_iter().flat_map(|(_, _, v)| v).collect();
        if values.len() != params.for_each().count() {
            return Err(CoreError::dimension("weights blob has the wrong length"));
        }
        for (dst, src) in params.for_each_mut().zip(&values) {
            *dst = *src;
        }
        Ok(params)
    }
}

/// Supervised-contrastive training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Base samples per batch; each contributes three views.
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub temperature: f64,
    /// Augmentation noise level as a fraction of sample RMS.
    pub augment_noise_sigma: f64,
    /// Maximum circular fast-time shift (samples) during augmentation.
    pub max_shift: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            epochs: 50,
            learning_rate: 5e-4,
            temperature: 0.07,
            augment_noise_sigma: 0.1,
            max_shift: 8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.temperature <= 0.0 {
            return Err(CoreError::config("temperature must be positive"));
        }
        if self.batch_size == 0 {
            return Err(CoreError::config("batch size must be positive"));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct ConvTrace {
    /// Post-rectifier output of the layer.
    activated: Array3<f64>,
    /// Pre-rectifier output (for the rectifier mask).
    pre: Array3<f64>,
}

/// All intermediates needed for backpropagation through one forward pass.
pub struct ForwardTrace {
    input: Array3<f64>,
    descriptor: Array1<f64>,
    hidden_pre: Array1<f64>,
    hidden: Array1<f64>,
    gates: Array1<f64>,
    gated: Array3<f64>,
    conv1: ConvTrace,
    conv2: ConvTrace,
    pooled: Array1<f64>,
    /// Pre-normalization head output.
    pub raw: Array1<f64>,
}

fn conv_stride2(x: &Array3<f64>, w: &Array4<f64>, b: &Array1<f64>) -> Array3<f64> {
    let (cin, h, wd) = x.dim();
    let (cout, cin_w, _, _) = w.dim();
    debug_assert_eq!(cin, cin_w);
    let (ho, wo) = ((h + 1) / 2, (wd + 1) / 2);
    let mut out = Array3::zeros((cout, ho, wo));
    for o in 0..cout {
        for i in 0..ho {
            for j in 0..wo {
                let mut acc = b[o];
                for c in 0..cin {
                    for di in 0..3usize {
                        for dj in 0..3usize {
                            // padding 1: source index 2i + di - 1
                            let si = 2 * i + di;
                            let sj = 2 * j + dj;
                            if si == 0 || sj == 0 || si > h || sj > wd {
                                continue;
                            }
                            acc += w[(o, c, di, dj)] * x[(c, si - 1, sj - 1)];
                        }
                    }
                }
                out[(o, i, j)] = acc;
            }
        }
    }
    out
}

fn conv_stride2_backward(
    x: &Array3<f64>,
    w: &Array4<f64>,
    d_out: &Array3<f64>,
    d_x: &mut Array3<f64>,
    d_w: &mut Array4<f64>,
    d_b: &mut Array1<f64>,
) {
    let (cin, h, wd) = x.dim();
    let (cout, ho, wo) = d_out.dim();
    for o in 0..cout {
        for i in 0..ho {
            for j in 0..wo {
                let g = d_out[(o, i, j)];
                if g == 0.0 {
                    continue;
                }
                d_b[o] += g;
                for c in 0..cin {
                    for di in 0..3usize {
                        for dj in 0..3usize {
                            let si = 2 * i + di;
                            let sj = 2 * j + dj;
                            if si == 0 || sj == 0 || si > h || sj > wd {
                                continue;
                            }
                            d_w[(o, c, di, dj)] += g * x[(c, si - 1, sj - 1)];
                            d_x[(c, si - 1, sj - 1)] += g * w[(o, c, di, dj)];
                        }
                    }
                }
            }
        }
    }
}

fn check_finite(name: &str, values: impl IntoIterator<Item = f64>) -> Result<()> {
    if values.into_iter().any(|v| !v.is_finite()) {
        return Err(CoreError::numeric(format!("non-finite value after {name}")));
    }
    Ok(())
}

/// Channel-attention gate: spatial mean -> bottleneck affine -> rectifier ->
/// expansion affine -> logistic, then per-channel scaling of the input.
pub fn attention_gate(f: &ScatterFeatures, params: &EncoderParams) -> Result<ScatterFeatures> {
    let trace = attention_forward(&f.tensor, params)?;
    Ok(ScatterFeatures { tensor: trace.3, channels: f.channels.clone() })
}

#[allow(clippy::type_complexity)]
fn attention_forward(
    x: &Array3<f64>,
    params: &EncoderParams,
) -> Result<(Array1<f64>, (Array1<f64>, Array1<f64>), Array1<f64>, Array3<f64>)> {
    let (c, _, _) = x.dim();
    if c != params.channels() {
        return Err(CoreError::dimension(format!(
            "feature tensor has {c} channels, encoder expects {}",
            params.channels()
        )));
    }
    let descriptor: Array1<f64> =
        Array1::from_iter((0..c).map(|ci| x.index_axis(ndarray::Axis(0), ci).mean().unwrap()));
    let hidden_pre = params.attn_w1.dot(&descriptor) + &params.attn_b1;
    let hidden = hidden_pre.mapv(|v| v.max(0.0));
    let gate_pre = params.attn_w2.dot(&hidden) + &params.attn_b2;
    let gates = gate_pre.mapv(sigmoid);
    let mut gated = x.clone();
    for ci in 0..c {
        gated.index_axis_mut(ndarray::Axis(0), ci).mapv_inplace(|v| v * gates[ci]);
    }
    check_finite("attention gate", gates.iter().copied())?;
    Ok((descriptor, (hidden_pre, hidden), gates, gated))
}

/// Forward pass keeping every intermediate needed for backpropagation.
pub fn forward_trace(f: &ScatterFeatures, params: &EncoderParams) -> Result<ForwardTrace> {
    check_finite("input", f.tensor.iter().copied())?;
    let (descriptor, (hidden_pre, hidden), gates, gated) = attention_forward(&f.tensor, params)?;
    let pre1 = conv_stride2(&gated, &params.conv1_w, &params.conv1_b);
    check_finite("conv1", pre1.iter().copied())?;
    let act1 = pre1.mapv(|v| v.max(0.0));
    let pre2 = conv_stride2(&act1, &params.conv2_w, &params.conv2_b);
    check_finite("conv2", pre2.iter().copied())?;
    let act2 = pre2.mapv(|v| v.max(0.0));
    let (c2, h2, w2) = act2.dim();
    let spatial = (h2 * w2) as f64;
    let pooled: Array1<f64> = Array1::from_iter(
        (0..c2).map(|ci| act2.index_axis(ndarray::Axis(0), ci).sum() / spatial),
    );
    let raw = params.head_w.dot(&pooled) + &params.head_b;
    check_finite("head", raw.iter().copied())?;
    Ok(ForwardTrace {
        input: f.tensor.clone(),
        descriptor,
        hidden_pre,
        hidden,
        gates,
        gated,
        conv1: ConvTrace { activated: act1, pre: pre1 },
        conv2: ConvTrace { activated: act2, pre: pre2 },
        pooled,
        raw,
    })
}

/// Unit-norm embedding of a feature tensor.
pub fn embed_forward(f: &ScatterFeatures, params: &EncoderParams) -> Result<Embedding> {
    let trace = forward_trace(f, params)?;
    let norm = trace.raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(CoreError::numeric("degenerate embedding norm"));
    }
    Ok(Embedding { vector: trace.raw.iter().map(|v| v / norm).collect() })
}

/// Backpropagate a gradient w.r.t. the raw (pre-normalization) head output,
/// accumulating parameter gradients into `grads`.
pub fn backward(trace: &ForwardTrace, params: &EncoderParams, d_raw: &Array1<f64>, grads: &mut EncoderParams) {
    // Head.
    for (r, &g) in d_raw.iter().enumerate() {
        grads.head_b[r] += g;
        for c in 0..CONV2_OUT {
            grads.head_w[(r, c)] += g * trace.pooled[c];
        }
    }
    let d_pooled = params.head_w.t().dot(d_raw);
    // Pooling and conv2 rectifier.
    let (c2, h2, w2) = trace.conv2.activated.dim();
    let spatial = (h2 * w2) as f64;
    let mut d_pre2 = Array3::zeros((c2, h2, w2));
    for ci in 0..c2 {
        let g = d_pooled[ci] / spatial;
        for i in 0..h2 {
            for j in 0..w2 {
                if trace.conv2.pre[(ci, i, j)] > 0.0 {
                    d_pre2[(ci, i, j)] = g;
                }
            }
        }
    }
    let mut d_act1 = Array3::zeros(trace.conv1.activated.dim());
    conv_stride2_backward(
        &trace.conv1.activated,
        &params.conv2_w,
        &d_pre2,
        &mut d_act1,
        &mut grads.conv2_w,
        &mut grads.conv2_b,
    );
    // Conv1 rectifier.
    let mut d_pre1 = d_act1;
    for (d, &p) in d_pre1.iter_mut().zip(trace.conv1.pre.iter()) {
        if p <= 0.0 {
            *d = 0.0;
        }
    }
    let mut d_gated = Array3::zeros(trace.gated.dim());
    conv_stride2_backward(
        &trace.gated,
        &params.conv1_w,
        &d_pre1,
        &mut d_gated,
        &mut grads.conv1_w,
        &mut grads.conv1_b,
    );
    // Attention gate: gated = g_c * x. The input is data, so only the gate
    // path flows back into parameters.
    let c = params.channels();
    let mut d_gates = Array1::zeros(c);
    for ci in 0..c {
        let gx = &d_gated.index_axis(ndarray::Axis(0), ci) * &trace.input.index_axis(ndarray::Axis(0), ci);
        d_gates[ci] = gx.sum();
    }
    let d_gate_pre: Array1<f64> = Array1::from_iter(
        d_gates.iter().zip(trace.gates.iter()).map(|(&dg, &g)| dg * g * (1.0 - g)),
    );
    for (r, &g) in d_gate_pre.iter().enumerate() {
        grads.attn_b2[r] += g;
        for h in 0..trace.hidden.len() {
            grads.attn_w2[(r, h)] += g * trace.hidden[h];
        }
    }
    let mut d_hidden = params.attn_w2.t().dot(&d_gate_pre);
    for (d, &p) in d_hidden.iter_mut().zip(trace.hidden_pre.iter()) {
        if p <= 0.0 {
            *d = 0.0;
        }
    }
    for (r, &g) in d_hidden.iter().enumerate() {
        grads.attn_b1[r] += g;
        for ci in 0..c {
            grads.attn_w1[(r, ci)] += g * trace.descriptor[ci];
        }
    }
}

/// Add circular complex Gaussian noise at `sigma * RMS` and a uniform random
/// circular fast-time shift in `[-max_shift, max_shift]`.
pub fn augment(sample: &PulseMatrix, cfg: &TrainConfig, draw_seed: u64) -> PulseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(draw_seed);
    let (q, l) = sample.data.dim();
    let mut out = sample.clone();
    if cfg.augment_noise_sigma > 0.0 {
        let rms = (sample.data.iter().map(|z| z.norm_sqr()).sum::<f64>() / (q * l) as f64).sqrt();
        let comp = Normal::new(0.0, cfg.augment_noise_sigma * rms / 2f64.sqrt()).unwrap();
        for v in out.data.iter_mut() {
            *v += num_complex::Complex64::new(comp.sample(&mut rng), comp.sample(&mut rng));
        }
    }
    if cfg.max_shift > 0 {
        let s = rng.gen_range(-(cfg.max_shift as i64)..=(cfg.max_shift as i64));
        let shift = s.rem_euclid(l as i64) as usize;
        if shift != 0 {
            let src = out.data.clone();
            for r in 0..q {
                for col in 0..l {
                    out.data[(r, (col + shift) % l)] = src[(r, col)];
                }
            }
        }
    }
    out
}

/// Supervised contrastive loss over a batch of raw embeddings, with the
/// analytic gradient w.r.t. those raw vectors. Embeddings are L2-normalized
/// internally; positives are all other same-label views.
pub fn scl_loss(raw: &Array2<f64>, labels: &[usize], tau: f64) -> Result<(f64, Array2<f64>)> {
    let (n, d) = raw.dim();
    if labels.len() != n {
        return Err(CoreError::dimension("label count must match batch size"));
    }
    if tau <= 0.0 {
        return Err(CoreError::parameter("temperature must be positive"));
    }
    // Normalize.
    let mut norms = vec![0.0f64; n];
    let mut alpha = raw.clone();
    for i in 0..n {
        let nm = raw.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        if nm == 0.0 || !nm.is_finite() {
            return Err(CoreError::numeric("zero or non-finite embedding in batch"));
        }
        norms[i] = nm;
        alpha.row_mut(i).mapv_inplace(|v| v / nm);
    }
    for (i, &li) in labels.iter().enumerate() {
        if !labels.iter().enumerate().any(|(p, &lp)| p != i && lp == li) {
            return Err(CoreError::parameter(format!(
                "anchor {i} has no positive in the batch"
            )));
        }
    }
    let sims = alpha.dot(&alpha.t());
    let mut loss = 0.0;
    let mut d_alpha: Array2<f64> = Array2::zeros((n, d));
    for i in 0..n {
        let positives: Vec<usize> =
            (0..n).filter(|&p| p != i && labels[p] == labels[i]).collect();
        let np = positives.len() as f64;
        // Stabilized softmax over A(i) = batch \ {i}.
        let max_s = (0..n)
            .filter(|&b| b != i)
            .map(|b| sims[(i, b)] / tau)
            .fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = (0..n)
            .filter(|&b| b != i)
            .map(|b| ((sims[(i, b)] / tau) - max_s).exp())
            .sum();
        for &p in &positives {
            loss -= ((sims[(i, p)] / tau) - max_s - denom.ln()) / np;
        }
        for b in 0..n {
            if b == i {
                continue;
            }
            let soft = ((sims[(i, b)] / tau) - max_s).exp() / denom;
            let mut coef = soft;
            if labels[b] == labels[i] {
                coef -= 1.0 / np;
            }
            let scale = coef / tau;
            for k in 0..d {
                d_alpha[(i, k)] += scale * alpha[(b, k)];
                d_alpha[(b, k)] += scale * alpha[(i, k)];
            }
        }
    }
    // Through normalization: d_raw = (d_alpha - (d_alpha . alpha) alpha) / norm.
    let mut d_raw = Array2::zeros((n, d));
    for i in 0..n {
        let dot: f64 = d_alpha.row(i).iter().zip(alpha.row(i)).map(|(a, b)| a * b).sum();
        for k in 0..d {
            d_raw[(i, k)] = (d_alpha[(i, k)] - dot * alpha[(i, k)]) / norms[i];
        }
    }
    Ok((loss, d_raw))
}

/// One feature view entering training: the tensor, its class, and the index
/// of the base sample it was derived from.
#[derive(Debug, Clone)]
pub struct TrainView {
    pub features: ScatterFeatures,
    pub label: usize,
    pub origin: usize,
}

/// Deterministic seed for the v-th augmented view of base sample `origin`.
fn view_seed(cfg_seed: u64, origin: usize, view: usize) -> u64 {
    crate::scene::splitmix64(
        cfg_seed ^ (origin as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (view as u64) << 56,
    )
}

/// Precompute the three training views (original + two fixed augmentations)
/// of each labeled sample and extract their scattering features once, so the
/// training loop works purely on tensors.
pub fn prepare_training_views(
    samples: &[(PulseMatrix, usize)],
    bank: &crate::scattering::FilterBank,
    scatter_cfg: &crate::scattering::ScatterConfig,
    cfg: &TrainConfig,
) -> Result<Vec<TrainView>> {
    use rayon::prelude::*;
    samples
        .par_iter()
        .enumerate()
        .map(|(origin, (matrix, label))| {
            let mut views = Vec::with_capacity(3);
            for v in 0..3usize {
                let m = if v == 0 {
                    matrix.clone()
                } else {
                    augment(matrix, cfg, view_seed(cfg.seed, origin, v))
                };
                let features = crate::scattering::scatter(&m, bank, scatter_cfg)?;
                views.push(TrainView { features, label: *label, origin });
            }
            Ok(views)
        })
        .collect::<Result<Vec<_>>>()
        .map(|nested| nested.into_iter().flatten().collect())
}

struct Adam {
    m: EncoderParams,
    v: EncoderParams,
    t: u64,
}

impl Adam {
    fn new(template: &EncoderParams) -> Self {
        Adam { m: template.zeros_like(), v: template.zeros_like(), t: 0 }
    }

    fn step(&mut self, params: &mut EncoderParams, grads: &EncoderParams, lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let bc1 = 1.0 - B1.powi(self.t as i32);
        let bc2 = 1.0 - B2.powi(self.t as i32);
        for (((p, g), m), v) in params
            .for_each_mut()
            .zip(grads.for_each())
            .zip(self.m.for_each_mut())
            .zip(self.v.for_each_mut())
        {
            *m = B1 * *m + (1.0 - B1) * g;
            *v = B2 * *v + (1.0 - B2) * g * g;
            let mh = *m / bc1;
            let vh = *v / bc2;
            *p -= lr * mh / (vh.sqrt() + EPS);
        }
    }
}

/// Train the encoder with the supervised contrastive objective.
///
/// Batches are built over base samples: each drawn base sample contributes
/// its three views, so a batch of N_B bases presents 3·N_B embeddings and
/// every anchor is guaranteed at least two positives. Returns the trained
/// parameters and the per-epoch mean loss per anchor.
pub fn train_encoder(
    views: &[TrainView],
    cfg: &TrainConfig,
) -> Result<(EncoderParams, Vec<f64>)> {
    use rayon::prelude::*;
    cfg.validate()?;
    let num_bases = views.iter().map(|v| v.origin).max().map_or(0, |m| m + 1);
    if num_bases < 2 {
        return Err(CoreError::parameter("need at least two base samples"));
    }
    let classes: std::collections::BTreeSet<usize> = views.iter().map(|v| v.label).collect();
    if classes.len() < 2 {
        return Err(CoreError::parameter("need at least two classes"));
    }
    let channels = views[0].features.tensor.dim().0;
    let mut by_origin: Vec<Vec<usize>> = vec![Vec::new(); num_bases];
    for (i, v) in views.iter().enumerate() {
        by_origin[v.origin].push(i);
    }
    let mut params = EncoderParams::init(channels, cfg.seed)?;
    let mut adam = Adam::new(&params);
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..num_bases).collect();
    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5045_504F ^ (epoch as u64) << 32);
        // Fisher-Yates with the epoch-seeded generator.
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut epoch_loss = 0.0;
        let mut epoch_anchors = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let idx: Vec<usize> =
                chunk.iter().flat_map(|&o| by_origin[o].iter().copied()).collect();
            let labels: Vec<usize> = idx.iter().map(|&i| views[i].label).collect();
            let traces: Vec<ForwardTrace> = idx
                .par_iter()
                .map(|&i| forward_trace(&views[i].features, &params))
                .collect::<Result<Vec<_>>>()?;
            let dim = traces[0].raw.len();
            let mut raw = Array2::zeros((idx.len(), dim));
            for (r, t) in traces.iter().enumerate() {
                raw.row_mut(r).assign(&t.raw);
            }
            let (loss, d_raw) = scl_loss(&raw, &labels, cfg.temperature)?;
            if !loss.is_finite() {
                return Err(CoreError::Training {
                    epoch,
                    message: "loss became non-finite".to_string(),
                });
            }
            epoch_loss += loss;
            epoch_anchors += idx.len();
            let partials: Vec<EncoderParams> = traces
                .par_iter()
                .enumerate()
                .map(|(r, t)| {
                    let mut g = params.zeros_like();
                    backward(t, &params, &d_raw.row(r).to_owned(), &mut g);
                    g
                })
                .collect();
            let mut grads = params.zeros_like();
            for p in &partials {
                for (dst, src) in grads.for_each_mut().zip(p.for_each()) {
                    *dst += src;
                }
            }
            adam.step(&mut params, &grads, cfg.learning_rate);
        }
        curve.push(if epoch_anchors > 0 { epoch_loss / epoch_anchors as f64 } else { 0.0 });
    }
    Ok((params, curve))
}
