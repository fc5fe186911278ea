//! Sliding-window target localization in the fast-time axis.
//!
//! A trained classifier slides across the fast-time axis of an echo matrix
//! one sample at a time, emitting the confidence that each window holds the
//! true target. Convolving that profile with a rectangular kernel turns
//! contiguous runs of confident windows into trapezoidal peaks, while
//! isolated spurious spikes stay below the threshold — that accumulation is
//! the jamming-suppression mechanism.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{embed_forward, EncoderParams};
use crate::error::{CoreError, Result};
use crate::jamming::{
    FalseTargetParams, FamilyParams, JammingSpec, PullOffMode, PullOffParams, SamplingParams,
};
use crate::protonet::{classify, PrototypeSet};
use crate::scattering::{feature_normalize, scatter, FilterBank, NormScales, ScatterConfig};
use crate::scene::{compose_scene, SceneSpec, TargetSpec};
use crate::waveform::{lfm_baseband, PulseMatrix, RadarConfig, SPEED_OF_LIGHT};

/// Sliding-window detector settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Window length L0 in fast-time samples (default: one pulse width at
    /// the training sample rate).
    pub window_len: usize,
    /// Detection threshold as a fraction of the maximum accumulation W.
    pub threshold_frac: f64,
    /// Class index treated as "target" when gating the profile.
    pub target_class: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig { window_len: 48, threshold_frac: 0.5, target_class: 0 }
    }
}

/// Everything needed to classify one window: encoder weights, prototypes,
/// the filter bank and scattering geometry, the frozen feature scales, and
/// the fast-time width the encoder was trained at (windows are zero-padded
/// to it).
pub struct ClassifierBundle {
    pub params: EncoderParams,
    pub protos: PrototypeSet,
    pub bank: FilterBank,
    pub scatter_cfg: ScatterConfig,
    pub norm: NormScales,
    pub train_width: usize,
}

impl ClassifierBundle {
    /// Embed a window (already padded to `train_width`) and classify it.
    fn classify_window(&self, window: &PulseMatrix) -> Result<crate::protonet::Prediction> {
        let features = scatter(window, &self.bank, &self.scatter_cfg)?;
        let features = feature_normalize(&features, &self.norm)?;
        let emb = embed_forward(&features, &self.params)?;
        classify(&emb, &self.protos)
    }
}

/// One located target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Detection {
    /// Estimated fast-time start bin of the target pulse.
    pub bin: usize,
    /// Accumulated profile value at the plateau peak.
    pub peak: f64,
}

/// Profile artifacts of one detection run.
#[derive(Debug, Clone)]
pub struct DetectionProfile {
    pub probs: Vec<f64>,
    pub accumulated: Vec<f64>,
    pub detections: Vec<Detection>,
}

/// Slide a length-L0 window across fast time with stride 1. Each window is
/// zero-padded to the bundle's training width, classified, and contributes
/// `p*` when the winning class is the target class, 0 otherwise.
pub fn probability_profile(
    z: &PulseMatrix,
    bundle: &ClassifierBundle,
    cfg: &DetectionConfig,
) -> Result<Vec<f64>> {
    let (q, l) = z.data.dim();
    let l0 = cfg.window_len;
    if l0 == 0 || l0 > l {
        return Err(CoreError::parameter("window length must be in 1..=L"));
    }
    if l0 > bundle.train_width {
        return Err(CoreError::parameter("window longer than the encoder's training width"));
    }
    (0..=(l - l0))
        .into_par_iter()
        .map(|t| {
            let mut data = ndarray::Array2::zeros((q, bundle.train_width));
            data.slice_mut(ndarray::s![.., ..l0])
                .assign(&z.data.slice(ndarray::s![.., t..t + l0]));
            let window = PulseMatrix { data, config: z.config.clone() };
            let pred = bundle.classify_window(&window)?;
            Ok(if bundle.protos.class_ids[pred.class_index] == cfg.target_class {
                pred.confidence
            } else {
                0.0
            })
        })
        .collect()
}

/// Full discrete convolution of the profile with an all-ones kernel of
/// length W; output length is `probs.len() + W - 1`.
pub fn accumulate_profile(probs: &[f64], w: usize) -> Vec<f64> {
    if probs.is_empty() || w == 0 {
        return Vec::new();
    }
    let n = probs.len();
    let mut out = vec![0.0; n + w - 1];
    for (t, &p) in probs.iter().enumerate() {
        if p != 0.0 {
            for o in out.iter_mut().skip(t).take(w) {
                *o += p;
            }
        }
    }
    out
}

/// Report each contiguous run of accumulation strictly above
/// `W * threshold_frac` once. The run's center index is mapped back to the
/// fast-time start of the pulse: a pulse starting at bin b produces a
/// trapezoid whose flat top is centered near b + (W-1)/2 in convolution
/// coordinates, so the start estimate is `center - (W-1)/2`, rounded.
///
/// Runs of length one are discarded. Isolated probability spikes (value at
/// most 1, both neighbours zero) can only exceed W/2 when several of them
/// happen to pack into a single window position, and that coincidence never
/// survives a one-bin shift of the window, so the spurious run is always
/// exactly one bin wide. A real pulse lights up a span of window positions
/// and produces a much longer run.
pub fn detect_targets(accumulated: &[f64], w: usize, threshold_frac: f64) -> Vec<Detection> {
    let threshold = w as f64 * threshold_frac;
    let mut detections = Vec::new();
    let mut run_start: Option<usize> = None;
    for k in 0..=accumulated.len() {
        let above = k < accumulated.len() && accumulated[k] > threshold;
        match (above, run_start) {
            (true, None) => run_start = Some(k),
            (false, Some(start)) => {
                let end = k - 1;
                if end == start {
                    run_start = None;
                    continue;
                }
                let center = (start + end) as f64 / 2.0;
                let bin = (center - (w as f64 - 1.0) / 2.0).round().max(0.0) as usize;
                let peak = accumulated[start..=end]
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                detections.push(Detection { bin, peak });
                run_start = None;
            }
            _ => {}
        }
    }
    detections
}

/// Sharpen a coarse detection to the matched-filter peak near it: per-pulse
/// pulse compression against the known transmit waveform, noncoherently
/// integrated across the CPI. The classifier says *that* and roughly *where*
/// a real target sits; the compressed peak pins the bin.
pub fn refine_bin(z: &PulseMatrix, coarse: usize, half_span: usize) -> Result<usize> {
    let config = &z.config;
    let pulse = lfm_baseband(
        config.pulse_width_s,
        config.bandwidth_hz,
        config.sample_rate_hz,
        config.chirp_sign,
    )?;
    let (q, l) = z.data.dim();
    let lo = coarse.saturating_sub(half_span);
    let hi = (coarse + half_span).min(l.saturating_sub(1));
    let mut best = (coarse, f64::NEG_INFINITY);
    for t in lo..=hi {
        let mut energy = 0.0;
        for row in 0..q {
            let mut acc = num_complex::Complex64::new(0.0, 0.0);
            for (n, p) in pulse.samples.iter().enumerate() {
                if t + n < l {
                    acc += z.data[(row, t + n)] * p.conj();
                }
            }
            energy += acc.norm_sqr();
        }
        if energy > best.1 {
            best = (t, energy);
        }
    }
    Ok(best.0)
}

/// Convenience wrapper running the full profile -> accumulate -> detect
/// chain with W = window length, then snapping each detection to the
/// matched-filter peak within half a window of the plateau estimate.
pub fn detect(
    z: &PulseMatrix,
    bundle: &ClassifierBundle,
    cfg: &DetectionConfig,
) -> Result<DetectionProfile> {
    let probs = probability_profile(z, bundle, cfg)?;
    let accumulated = accumulate_profile(&probs, cfg.window_len);
    let mut detections = detect_targets(&accumulated, cfg.window_len, cfg.threshold_frac);
    for d in detections.iter_mut() {
        d.bin = refine_bin(z, d.bin, cfg.window_len / 2)?;
    }
    Ok(DetectionProfile { probs, accumulated, detections })
}

/// Options for generating a window-level training set for the detector.
#[derive(Debug, Clone)]
pub struct WindowTrainOptions {
    /// Positive (target-window) scenes and negative scenes per kind.
    pub scenes_per_kind: usize,
    pub window_len: usize,
    /// Width windows are zero-padded to; becomes the detector's training
    /// width. Keeping it small makes the sliding evaluation cheap.
    pub padded_len: usize,
    pub snr_db: f64,
    pub seed: u64,
}

impl Default for WindowTrainOptions {
    fn default() -> Self {
        WindowTrainOptions {
            scenes_per_kind: 90,
            window_len: 48,
            padded_len: 64,
            snr_db: 10.0,
            seed: 0,
        }
    }
}

fn crop_window(m: &PulseMatrix, start: usize, len: usize, padded: usize) -> PulseMatrix {
    let q = m.data.dim().0;
    let mut data = ndarray::Array2::zeros((q, padded));
    data.slice_mut(ndarray::s![.., ..len])
        .assign(&m.data.slice(ndarray::s![.., start..start + len]));
    PulseMatrix { data, config: m.config.clone() }
}

/// Binary window training set: label 0 = window aligned with a real target
/// pulse, label 1 = anything else (jamming energy, or plain noise). This is
/// the two-class reframing of the detector: the profile gates on class 0.
pub fn build_window_training_set(
    config: &RadarConfig,
    opts: &WindowTrainOptions,
) -> Result<Vec<(PulseMatrix, usize)>> {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    let fs = config.sample_rate_hz;
    let l = config.fast_time_len();
    let pulse_samples = config.pulse_len();
    if opts.window_len < pulse_samples || opts.padded_len < opts.window_len {
        return Err(CoreError::parameter("window must hold one pulse and fit the padding"));
    }
    let max_bin = l - opts.window_len - 2;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x77_696E_646F);
    let mut out = Vec::new();
    // The accumulated-profile detector needs a *run* of confident windows
    // around the true alignment, so positives must cover substantial partial
    // overlaps too. Window starts within `pos_margin` of the pulse start are
    // positives; starts offset by `neg_margin` or more (little pulse energy
    // left in view) are explicit negatives that sharpen the boundary.
    let pos_margin = (opts.window_len / 2).saturating_sub(4) as i64;
    let neg_margin = (opts.window_len - opts.window_len / 8) as i64;
    for i in 0..opts.scenes_per_kind {
        let bin = rng.gen_range(8..max_bin);
        let range_m = bin as f64 * SPEED_OF_LIGHT / (2.0 * fs);
        // Half the target scenes sit in clutter so a real pulse is still
        // recognized over a correlated background.
        let cnr_db = if i % 2 == 1 { Some(rng.gen_range(-5.0..12.0)) } else { None };
        // Slow targets are the hard positives: their Doppler structure is
        // nearly flat, the regime deception jamming imitates. Oversample
        // them so the boundary is learned there, not just at high Doppler.
        let velocity_mps = match i % 6 {
            0 => rng.gen_range(-15.0..15.0),
            3 => rng.gen_range(-60.0..60.0),
            _ => rng.gen_range(-300.0..300.0),
        };
        let scene = SceneSpec {
            config: config.clone(),
            targets: vec![TargetSpec {
                range_m,
                velocity_mps,
                angle_rad: rng.gen_range(-0.3..0.3),
                amplitude: num_complex::Complex64::new(1.0, 0.0),
            }],
            jammers: Vec::new(),
            snr_db: opts.snr_db,
            inr_db: opts.snr_db,
            cnr_db,
            clutter_correlation: rng.gen_range(0.7..0.97),
            look_angle_rad: 0.0,
            seed: opts.seed ^ (0x7461 + i as u64),
        };
        let m = compose_scene(&scene)?;
        for _ in 0..2 {
            let jitter: i64 = rng.gen_range(-pos_margin..=pos_margin);
            let start = (bin as i64 + jitter).clamp(0, max_bin as i64) as usize;
            out.push((crop_window(&m, start, opts.window_len, opts.padded_len), 0));
        }
        let room_right = max_bin as i64 - bin as i64;
        let room_left = bin as i64;
        let go_right = if room_right >= neg_margin && room_left >= neg_margin {
            rng.gen::<bool>()
        } else {
            room_right >= neg_margin
        };
        let away = if go_right {
            rng.gen_range(neg_margin..=room_right)
        } else {
            -rng.gen_range(neg_margin..=room_left)
        };
        let start = (bin as i64 + away) as usize;
        out.push((crop_window(&m, start, opts.window_len, opts.padded_len), 1));
    }
    // Negative windows from jamming scenes: dense false targets, repeater
    // trains, and range pull-off, cropped at varied offsets around the
    // injection bin so partial jamming overlap is also labeled negative.
    for i in 0..opts.scenes_per_kind {
        let tau = rng.gen_range(0.2e-6..1.2e-6);
        let family = match i % 3 {
            0 => FamilyParams::Rdfj { targets: FalseTargetParams {
                gains: (0..4)
                    .map(|_| {
                        num_complex::Complex64::from_polar(
                            rng.gen_range(0.5..1.0),
                            rng.gen_range(0.0..std::f64::consts::TAU),
                        )
                    })
                    .collect(),
                delays_s: (0..4).map(|_| rng.gen_range(0.0..1.5e-6)).collect(),
                // Keep the deception Dopplers outside the band a physical
                // target can occupy (|fd| <= 2*300 m/s / lambda ~ 0.1 PRF).
                // A delay-only replica with zero Doppler is bit-for-bit a
                // slow target echo; labeling those negative would teach the
                // detector to reject slow real targets.
                dopplers_hz: (0..4)
                    .map(|_| {
                        let prf = 1.0 / config.pri_s;
                        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                        sign * rng.gen_range(0.12..0.4) * prf
                    })
                    .collect(),
            } },
            1 => FamilyParams::Isrj { sampling: SamplingParams {
                slice_width_s: 0.05e-6,
                slice_period_s: 0.25e-6,
                repeat_spacing_s: rng.gen_range(0.06e-6..0.12e-6),
            } },
            _ => FamilyParams::Rgj {
                pull: PullOffParams {
                    mode: PullOffMode::Range,
                    drag_speed_mps: rng.gen_range(300.0..600.0),
                    drag_accel_mps2: rng.gen_range(50.0..200.0),
                    standoff_frac: 0.2,
                    pull_frac: 0.6,
                    close_frac: 0.2,
                    peak_range_m: None,
                    peak_velocity_mps: None,
                    time_dilation: rng.gen_range(300.0..600.0),
                },
                targets: FalseTargetParams {
                    gains: vec![num_complex::Complex64::new(1.0, 0.0)],
                    delays_s: vec![0.0],
                    dopplers_hz: vec![0.0],
                },
            },
        };
        let cnr_db = if i % 2 == 1 { Some(rng.gen_range(-5.0..12.0)) } else { None };
        let scene = SceneSpec {
            config: config.clone(),
            targets: Vec::new(),
            jammers: vec![JammingSpec {
                family,
                theta_rad: rng.gen_range(-0.3..0.3),
                tau_s: tau,
                velocity_mps: rng.gen_range(-200.0..200.0),
                seed: opts.seed ^ (0x6A61 + i as u64),
            }],
            snr_db: opts.snr_db,
            inr_db: opts.snr_db,
            cnr_db,
            clutter_correlation: rng.gen_range(0.7..0.97),
            look_angle_rad: 0.0,
            seed: opts.seed ^ (0x6A6D + i as u64),
        };
        let m = compose_scene(&scene)?;
        let jam_bin = (tau * fs).round() as i64;
        // Pull-off energy migrates well past the injection bin, so its crops
        // range further right than the stationary families'.
        let w = opts.window_len as i64;
        let max_off = if i % 3 == 2 { 3 * w } else { w };
        for _ in 0..2 {
            let off: i64 = rng.gen_range(-w / 2..=max_off);
            let start = (jam_bin + off).clamp(0, max_bin as i64) as usize;
            out.push((crop_window(&m, start, opts.window_len, opts.padded_len), 1));
        }
    }
    // Negative windows from pure noise, and from clutter of varying strength
    // so correlated background is not mistaken for a pulse.
    for i in 0..opts.scenes_per_kind {
        let mut scene = SceneSpec::noise_only(config.clone(), opts.seed ^ (0x6E6F + i as u64));
        if i % 2 == 1 {
            scene.cnr_db = Some(rng.gen_range(-5.0..12.0));
            scene.clutter_correlation = rng.gen_range(0.7..0.97);
        }
        let m = compose_scene(&scene)?;
        let start = rng.gen_range(0..max_bin);
        out.push((crop_window(&m, start, opts.window_len, opts.padded_len), 1));
    }
    Ok(out)
}
