//! Scene composition and labeled dataset production.
//!
//! A scene is the beamformed sum of point-target echoes, jamming sources,
//! optional correlated clutter and white noise, each scaled to its power
//! ratio relative to unit noise power. The dataset factory draws per-sample
//! parameters from the training or widened testing protocol and is fully
//! deterministic in (seed, class, index).

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::jamming::{
    self, CombParams, FalseTargetParams, FamilyParams, JammingSpec, PullOffMode, PullOffParams,
    SamplingParams, SmearParams,
};
use crate::waveform::{
    doppler_frequency, drfm_intercept, lfm_baseband, spatial_gain, PulseMatrix, RadarConfig,
    SPEED_OF_LIGHT,
};

/// Fast-time width of every dataset sample, fixed across protocols.
pub const SAMPLE_FAST_LEN: usize = 241;
/// Slow-time height of every dataset sample.
pub const SAMPLE_PULSES: usize = 128;
/// Number of classes: point target plus ten jamming families.
pub const NUM_CLASSES: usize = 11;

/// One point scatterer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetSpec {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub angle_rad: f64,
    pub amplitude: Complex64,
}

impl TargetSpec {
    pub fn delay_s(&self) -> f64 {
        2.0 * self.range_m / SPEED_OF_LIGHT
    }
}

/// Full scene description: sources, power ratios and the noise seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    pub config: RadarConfig,
    pub targets: Vec<TargetSpec>,
    pub jammers: Vec<JammingSpec>,
    pub snr_db: f64,
    pub inr_db: f64,
    pub cnr_db: Option<f64>,
    pub clutter_correlation: f64,
    pub look_angle_rad: f64,
    pub seed: u64,
}

impl SceneSpec {
    /// A quiet scene: nothing but noise.
    pub fn noise_only(config: RadarConfig, seed: u64) -> Self {
        SceneSpec {
            config,
            targets: Vec::new(),
            jammers: Vec::new(),
            snr_db: 0.0,
            inr_db: 0.0,
            cnr_db: None,
            clutter_correlation: 0.9,
            look_angle_rad: 0.0,
            seed,
        }
    }
}

/// One dataset entry: echo matrix plus its class.
///
/// Label order is fixed: 0 point target, 1 RDFJ, 2 VDFJ, 3 RVDJ, 4 ISFJ,
/// 5 ISRJ, 6 CSJ, 7 RGJ, 8 VGJ, 9 RVGJ, 10 SSJ.
#[derive(Debug, Clone)]
pub struct LabeledSample {
    pub matrix: PulseMatrix,
    pub label: u8,
}

/// Echo of one point target: the transmit pulse delayed by 2R/c, Doppler
/// phase coherent over absolute time `q*Tr + n/fs`.
pub fn target_echo(t: &TargetSpec, config: &RadarConfig) -> Result<PulseMatrix> {
    config.validate()?;
    let tau = t.delay_s();
    if tau < 0.0 {
        return Err(CoreError::parameter("target range must be nonnegative"));
    }
    if tau + config.pulse_width_s >= config.pri_s {
        return Err(CoreError::parameter("target echo does not fit inside the PRI"));
    }
    let fs = config.sample_rate_hz;
    let delay = (tau * fs).round() as usize;
    let fd = doppler_frequency(t.velocity_mps, config.carrier_hz);
    let pulse = lfm_baseband(config.pulse_width_s, config.bandwidth_hz, fs, config.chirp_sign)?;
    let mut m = PulseMatrix::zeros(config);
    let len = config.fast_time_len();
    for q in 0..config.num_pulses {
        let t0 = q as f64 * config.pri_s;
        for (i, &x) in pulse.samples.iter().enumerate() {
            let n = delay + i;
            if n >= len {
                break;
            }
            let ph = 2.0 * std::f64::consts::PI * fd * (t0 + n as f64 / fs);
            m.data[(q, n)] = t.amplitude * x * Complex64::from_polar(1.0, ph);
        }
    }
    Ok(m)
}

fn standard_complex<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// I.i.d. circular complex Gaussian matrix with unit per-sample power.
pub fn complex_noise(num_pulses: usize, fast_len: usize, seed: u64) -> Array2<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((num_pulses, fast_len), || standard_complex(&mut rng))
}

/// Clutter as fast-time AR(1) correlated complex Gaussian, unit average
/// power; `correlation` is the lag-1 coefficient.
pub fn clutter(
    num_pulses: usize,
    fast_len: usize,
    seed: u64,
    correlation: f64,
) -> Result<Array2<Complex64>> {
    if !(0.0..1.0).contains(&correlation) {
        return Err(CoreError::parameter("clutter correlation must be in [0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let innov = (1.0 - correlation * correlation).sqrt();
    let mut m = Array2::zeros((num_pulses, fast_len));
    for q in 0..num_pulses {
        let mut prev = standard_complex(&mut rng);
        m[(q, 0)] = prev;
        for n in 1..fast_len {
            prev = prev * correlation + standard_complex(&mut rng) * innov;
            m[(q, n)] = prev;
        }
    }
    Ok(m)
}

/// Scale a component so its mean power over nonzero entries equals
/// `reference_power * 10^(ratio_db/10)`.
pub fn scale_to_ratio(
    signal: &mut PulseMatrix,
    ratio_db: f64,
    reference_power: f64,
) -> Result<()> {
    let current = signal
        .support_mean_power()
        .ok_or_else(|| CoreError::parameter("cannot scale a zero-energy signal"))?;
    let wanted = reference_power * 10f64.powf(ratio_db / 10.0);
    let factor = (wanted / current).sqrt();
    signal.scale(Complex64::new(factor, 0.0));
    Ok(())
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable per-(seed, class, index) sub-seed.
pub fn sample_seed(seed: u64, class: usize, index: usize) -> u64 {
    splitmix64(seed ^ splitmix64(class as u64 ^ splitmix64(index as u64)))
}

/// Beamformed scene: targets at SNR, jammers at INR, optional clutter at
/// CNR, all relative to unit noise power, plus the noise itself.
///
/// Each component is passed through the receive beamformer gain at its own
/// angle and then rescaled, so the power ratios hold exactly at the output.
pub fn compose_scene(s: &SceneSpec) -> Result<PulseMatrix> {
    s.config.validate()?;
    let q = s.config.num_pulses;
    let l = s.config.fast_time_len();
    let mut out = PulseMatrix::zeros(&s.config);
    out.data = complex_noise(q, l, splitmix64(s.seed ^ 0x6E6F_6973)); // "nois"

    for t in &s.targets {
        let mut echo = target_echo(t, &s.config)?;
        let gain = spatial_gain(&s.config.rx_weights, t.angle_rad)?;
        if gain.norm() < 1e-12 {
            return Err(CoreError::parameter("target falls in a beamformer null"));
        }
        echo.scale(gain);
        scale_to_ratio(&mut echo, s.snr_db, 1.0)?;
        out.add_assign(&echo)?;
    }

    for j in &s.jammers {
        // Slice-repeat generators apply the spec's delay themselves; every
        // other family consumes an already-delayed intercept.
        let intercept_tau = match &j.family {
            FamilyParams::Isfj { .. } | FamilyParams::Isrj { .. } => 0.0,
            _ => j.tau_s,
        };
        let r = drfm_intercept(&s.config, j.theta_rad, intercept_tau, j.velocity_mps)?;
        let mut m = jamming::generate(j, &r, &s.config)?;
        let gain = spatial_gain(&s.config.rx_weights, j.theta_rad)?;
        if gain.norm() < 1e-12 {
            return Err(CoreError::parameter("jammer falls in a beamformer null"));
        }
        m.scale(gain);
        scale_to_ratio(&mut m, s.inr_db, 1.0)?;
        out.add_assign(&m)?;
    }

    if let Some(cnr) = s.cnr_db {
        let c = clutter(q, l, splitmix64(s.seed ^ 0x636C_7574), s.clutter_correlation)?; // "clut"
        let mut cm = PulseMatrix { data: c, config: s.config.clone() };
        scale_to_ratio(&mut cm, cnr, 1.0)?;
        out.add_assign(&cm)?;
    }
    Ok(out)
}

/// Which Table-style parameter column to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Train,
    Test,
}

/// Dataset factory options.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetOptions {
    pub protocol: Protocol,
    pub per_class: usize,
    pub seed: u64,
    /// Force SNR and INR to a fixed value instead of drawing from the
    /// protocol range (single-SNR experiments).
    pub snr_override_db: Option<f64>,
}

/// Per-sample parameter record written into the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleRecord {
    pub label: u8,
    pub index: usize,
    pub family: String,
    pub seed: u64,
    pub snr_db: f64,
    pub inr_db: f64,
    pub cnr_db: Option<f64>,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub sample_rate_hz: f64,
    pub pulse_width_s: f64,
    pub pri_s: f64,
}

/// Sidecar description of a generated dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub protocol: Protocol,
    pub per_class: usize,
    pub seed: u64,
    pub snr_override_db: Option<f64>,
    pub num_pulses: usize,
    pub fast_len: usize,
    pub samples: Vec<SampleRecord>,
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

fn random_phase_gain<R: Rng>(rng: &mut R, lo_mag: f64, hi_mag: f64) -> Complex64 {
    let mag = uniform(rng, lo_mag, hi_mag);
    Complex64::from_polar(mag, uniform(rng, 0.0, 2.0 * std::f64::consts::PI))
}

fn draw_config<R: Rng>(protocol: Protocol, rng: &mut R) -> RadarConfig {
    let mut c = RadarConfig::table_train();
    if protocol == Protocol::Test {
        c.carrier_hz = uniform(rng, 8.0e9, 12.0e9);
        c.bandwidth_hz = uniform(rng, 20.0e6, 60.0e6);
        c.sample_rate_hz = 68.0e6;
        c.pulse_width_s = uniform(rng, 1.0e-6, 10.0e-6);
        let min_pri = 2.0 * c.pulse_width_s;
        c.pri_s = uniform(rng, min_pri.max(5.0e-6), 50.0e-6);
    }
    c
}

fn draw_false_targets<R: Rng>(
    rng: &mut R,
    count: usize,
    cfg: &RadarConfig,
    base_tau_s: f64,
    with_delay: bool,
    with_doppler: bool,
) -> FalseTargetParams {
    let fs = cfg.sample_rate_hz;
    // Delay headroom after the base intercept delay; keep targets inside the
    // observed window even when the full PRI is wider.
    let observed = (cfg.fast_time_len().min(SAMPLE_FAST_LEN)) as f64;
    let used = (base_tau_s + cfg.pulse_width_s) * fs;
    let headroom_s = ((observed - used - 2.0).max(0.0) / fs).max(0.0);
    let prf = cfg.prf();
    let mut gains = Vec::with_capacity(count);
    let mut delays = Vec::with_capacity(count);
    let mut dopplers = Vec::with_capacity(count);
    for _ in 0..count {
        gains.push(random_phase_gain(rng, 0.5, 1.0));
        delays.push(if with_delay { uniform(rng, 0.0, headroom_s) } else { 0.0 });
        dopplers.push(if with_doppler { uniform(rng, -0.4, 0.4) * prf } else { 0.0 });
    }
    FalseTargetParams { gains, delays_s: delays, dopplers_hz: dopplers }
}

fn draw_pulloff<R: Rng>(rng: &mut R, mode: PullOffMode) -> PullOffParams {
    PullOffParams {
        mode,
        drag_speed_mps: uniform(rng, 300.0, 600.0),
        drag_accel_mps2: uniform(rng, 50.0, 200.0),
        standoff_frac: 0.2,
        pull_frac: 0.6,
        close_frac: 0.2,
        peak_range_m: None,
        peak_velocity_mps: None,
        // One recorded CPI compresses a longer engagement; dilation keeps the
        // range walk inside a visible span of bins.
        time_dilation: uniform(rng, 300.0, 600.0),
    }
}

fn draw_family<R: Rng>(
    class: u8,
    protocol: Protocol,
    cfg: &RadarConfig,
    base_tau_s: f64,
    rng: &mut R,
) -> Result<FamilyParams> {
    let test = protocol == Protocol::Test;
    let family = match class {
        1..=3 => {
            let count = if test { rng.gen_range(4..=10) } else { rng.gen_range(3..=9) };
            let (d, f) = match class {
                1 => (true, false),
                2 => (false, true),
                _ => (true, true),
            };
            let targets = draw_false_targets(rng, count, cfg, base_tau_s, d, f);
            match class {
                1 => FamilyParams::Rdfj { targets },
                2 => FamilyParams::Vdfj { targets },
                _ => FamilyParams::Rvdj { targets },
            }
        }
        4 | 5 => {
            let sampling = SamplingParams {
                slice_width_s: 0.05e-6,
                slice_period_s: 0.25e-6,
                repeat_spacing_s: if class == 5 {
                    uniform(rng, 0.06e-6, 0.12e-6)
                } else {
                    0.0
                },
            };
            if class == 4 {
                FamilyParams::Isfj { sampling }
            } else {
                FamilyParams::Isrj { sampling }
            }
        }
        6 => {
            let k = if test { rng.gen_range(5..=15) } else { 10 };
            let fs = cfg.sample_rate_hz;
            let mut amplitudes = Vec::with_capacity(k);
            let mut frequencies = Vec::with_capacity(k);
            for i in 0..k {
                amplitudes.push(random_phase_gain(rng, 0.5, 1.0));
                // One tooth per sub-band plus jitter keeps teeth distinct.
                let center = (i as f64 + 0.5) / k as f64 - 0.5;
                frequencies.push((center + uniform(rng, -0.2, 0.2) / k as f64) * 0.8 * fs);
            }
            FamilyParams::Csj {
                comb: CombParams { amplitudes, frequencies_hz: frequencies },
            }
        }
        7..=9 => {
            let mode = match class {
                7 => PullOffMode::Range,
                8 => PullOffMode::Velocity,
                _ => PullOffMode::Both,
            };
            let pull = draw_pulloff(rng, mode);
            let targets = FalseTargetParams {
                gains: vec![random_phase_gain(rng, 0.7, 1.0)],
                delays_s: vec![0.0],
                dopplers_hz: vec![0.0],
            };
            match class {
                7 => FamilyParams::Rgj { pull, targets },
                8 => FamilyParams::Vgj { pull, targets },
                _ => FamilyParams::Rvgj { pull, targets },
            }
        }
        10 => {
            let ns = if test { rng.gen_range(4..=8) } else { 5 };
            FamilyParams::Ssj { smear: SmearParams { subpulses: ns } }
        }
        _ => return Err(CoreError::parameter("jamming class must be 1..=10")),
    };
    Ok(family)
}

/// Draw and compose one labeled sample. Deterministic in (options.seed,
/// class, index); the matrix is cropped/fixed to 128 x 241 regardless of the
/// drawn PRI and sampling rate.
pub fn generate_sample(
    opts: &DatasetOptions,
    class: u8,
    index: usize,
) -> Result<(LabeledSample, SampleRecord)> {
    if class as usize >= NUM_CLASSES {
        return Err(CoreError::parameter("class label must be 0..=10"));
    }
    let seed = sample_seed(opts.seed, class as usize, index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = draw_config(opts.protocol, &mut rng);
    let test = opts.protocol == Protocol::Test;

    let (snr, inr) = match opts.snr_override_db {
        Some(v) => (v, v),
        None => {
            if test {
                (uniform(&mut rng, -10.0, 15.0), uniform(&mut rng, -10.0, 15.0))
            } else {
                (uniform(&mut rng, -6.0, 10.0), uniform(&mut rng, -6.0, 10.0))
            }
        }
    };
    let cnr = if test { Some(uniform(&mut rng, -10.0, 10.0)) } else { None };

    let observed = cfg.fast_time_len().min(SAMPLE_FAST_LEN) as f64;
    let fs = cfg.sample_rate_hz;
    let mut spec = SceneSpec {
        config: cfg.clone(),
        targets: Vec::new(),
        jammers: Vec::new(),
        snr_db: snr,
        inr_db: inr,
        cnr_db: cnr,
        clutter_correlation: 0.9,
        look_angle_rad: 0.0,
        seed,
    };
    let family_name;
    if class == 0 {
        let n_targets = if test { rng.gen_range(1..=3) } else { 1 };
        for _ in 0..n_targets {
            // Keep the echo leading edge inside the observed window.
            let max_bin = (observed - 8.0).max(1.0);
            let tau = uniform(&mut rng, 0.0, max_bin) / fs;
            let full_budget = cfg.pri_s - cfg.pulse_width_s - 2.0 / fs;
            let tau = tau.min(full_budget.max(0.0));
            spec.targets.push(TargetSpec {
                range_m: tau * SPEED_OF_LIGHT / 2.0,
                velocity_mps: uniform(&mut rng, -300.0, 300.0),
                angle_rad: uniform(&mut rng, -1.0, 1.0),
                amplitude: random_phase_gain(&mut rng, 1.0, 1.0),
            });
        }
        family_name = "TARGET".to_string();
    } else {
        // Base intercept delay: small for slice-repeat families (their
        // replicas extend the support), wider for the rest.
        let tau_budget = if class == 4 || class == 5 {
            0.5e-6
        } else {
            ((observed / fs - cfg.pulse_width_s) * 0.3).max(0.0)
        };
        let tau = uniform(&mut rng, 0.0, tau_budget);
        let family = draw_family(class, opts.protocol, &cfg, tau, &mut rng)?;
        family_name = family.name().to_string();
        spec.jammers.push(JammingSpec {
            family,
            theta_rad: uniform(&mut rng, -1.0, 1.0),
            tau_s: tau,
            velocity_mps: uniform(&mut rng, -300.0, 300.0),
            seed,
        });
    }

    let full = compose_scene(&spec)?;
    let matrix = crop_to_sample(full);
    let record = SampleRecord {
        label: class,
        index,
        family: family_name,
        seed,
        snr_db: snr,
        inr_db: inr,
        cnr_db: cnr,
        carrier_hz: cfg.carrier_hz,
        bandwidth_hz: cfg.bandwidth_hz,
        sample_rate_hz: cfg.sample_rate_hz,
        pulse_width_s: cfg.pulse_width_s,
        pri_s: cfg.pri_s,
    };
    Ok((LabeledSample { matrix, label: class }, record))
}

/// Crop the fast-time axis to the fixed sample width (the training-protocol
/// grid is exactly 241 wide already; wider test-protocol PRIs are windowed to
/// their first 241 samples).
fn crop_to_sample(full: PulseMatrix) -> PulseMatrix {
    if full.fast_len() == SAMPLE_FAST_LEN {
        return full;
    }
    let cropped = full
        .data
        .slice(ndarray::s![.., ..SAMPLE_FAST_LEN])
        .to_owned();
    PulseMatrix { data: cropped, config: full.config }
}

/// Produce `11 * per_class` labeled samples plus the manifest. Samples are
/// ordered class-major (all of class 0, then class 1, ...). Work fans out
/// across threads; per-sample seeding makes the result schedule-independent.
pub fn generate_dataset(opts: &DatasetOptions) -> Result<(Vec<LabeledSample>, DatasetManifest)> {
    if opts.per_class == 0 {
        return Err(CoreError::parameter("per_class must be >= 1"));
    }
    let jobs: Vec<(u8, usize)> = (0..NUM_CLASSES as u8)
        .flat_map(|c| (0..opts.per_class).map(move |i| (c, i)))
        .collect();
    let results: Vec<Result<(LabeledSample, SampleRecord)>> = jobs
        .par_iter()
        .map(|&(c, i)| generate_sample(opts, c, i))
        .collect();
    let mut samples = Vec::with_capacity(jobs.len());
    let mut records = Vec::with_capacity(jobs.len());
    for r in results {
        let (s, rec) = r?;
        samples.push(s);
        records.push(rec);
    }
    let manifest = DatasetManifest {
        protocol: opts.protocol,
        per_class: opts.per_class,
        seed: opts.seed,
        snr_override_db: opts.snr_override_db,
        num_pulses: SAMPLE_PULSES,
        fast_len: SAMPLE_FAST_LEN,
        samples: records,
    };
    Ok((samples, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg() -> RadarConfig {
        RadarConfig::table_train()
    }

    #[test]
    fn target_echo_zero_range_row_is_pulse() {
        let c = cfg();
        let t = TargetSpec {
            range_m: 0.0,
            velocity_mps: 0.0,
            angle_rad: 0.0,
            amplitude: Complex64::new(1.0, 0.0),
        };
        let m = target_echo(&t, &c).unwrap();
        let pulse = lfm_baseband(c.pulse_width_s, c.bandwidth_hz, c.sample_rate_hz, 1.0).unwrap();
        for (n, &x) in pulse.samples.iter().enumerate() {
            assert!((m.data[(0, n)] - x).norm() < 1e-12);
        }
        for n in pulse.len()..c.fast_time_len() {
            assert_eq!(m.data[(0, n)].norm(), 0.0);
        }
    }

    #[test]
    fn target_echo_support_bin() {
        // 2R/c*fs = 60 exactly.
        let c = cfg();
        let r = 60.0 / c.sample_rate_hz * SPEED_OF_LIGHT / 2.0;
        let t = TargetSpec {
            range_m: r,
            velocity_mps: 150.0,
            angle_rad: 0.2,
            amplitude: Complex64::new(0.7, 0.1),
        };
        let m = target_echo(&t, &c).unwrap();
        let row = m.data.row(40);
        let first = row.iter().position(|z| z.norm() > 0.0).unwrap();
        assert_eq!(first, 60);
    }

    #[test]
    fn target_echo_matched_filter_peak() {
        // Oracle correlation against the transmit pulse for random ranges.
        let c = cfg();
        let pulse = lfm_baseband(c.pulse_width_s, c.bandwidth_hz, c.sample_rate_hz, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let bin = rng.gen_range(0..180usize);
            let r = bin as f64 / c.sample_rate_hz * SPEED_OF_LIGHT / 2.0;
            let t = TargetSpec {
                range_m: r,
                velocity_mps: uniform(&mut rng, -300.0, 300.0),
                angle_rad: 0.0,
                amplitude: Complex64::new(1.0, 0.0),
            };
            let m = target_echo(&t, &c).unwrap();
            let row = m.data.row(0);
            let mut best = (0usize, 0.0f64);
            for cand in 0..c.fast_time_len() - pulse.len() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, &x) in pulse.samples.iter().enumerate() {
                    acc += row[cand + i] * x.conj();
                }
                if acc.norm() > best.1 {
                    best = (cand, acc.norm());
                }
            }
            assert_eq!(best.0, bin);
        }
    }

    #[test]
    fn target_echo_rejects_out_of_pri() {
        let c = cfg();
        let t = TargetSpec {
            range_m: SPEED_OF_LIGHT * c.pri_s / 2.0,
            velocity_mps: 0.0,
            angle_rad: 0.0,
            amplitude: Complex64::new(1.0, 0.0),
        };
        assert!(target_echo(&t, &c).is_err());
    }

    #[test]
    fn noise_unit_power_and_zero_mean() {
        // Chi-square bound: mean power over 30 848 samples within [0.96, 1.04].
        let m = complex_noise(128, 241, 7);
        let n = (128 * 241) as f64;
        let power: f64 = m.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
        assert!((0.96..=1.04).contains(&power), "mean power {power}");
        let mean = m.iter().sum::<Complex64>() / n;
        assert!(mean.norm() < 0.02, "mean magnitude {}", mean.norm());
    }

    #[test]
    fn noise_is_deterministic() {
        let a = complex_noise(16, 31, 12345);
        let b = complex_noise(16, 31, 12345);
        assert_eq!(a, b);
        let c = complex_noise(16, 31, 12346);
        assert_ne!(a, c);
    }

    #[test]
    fn clutter_lag_one_correlation() {
        let rho = 0.9;
        let m = clutter(128, 241, 3, rho).unwrap();
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for q in 0..128 {
            for n in 0..240 {
                num += m[(q, n + 1)] * m[(q, n)].conj();
                den += m[(q, n)].norm_sqr();
            }
        }
        let est = (num / den).re;
        assert!((est - rho).abs() < 0.03, "lag-1 estimate {est}");
        let power: f64 = m.iter().map(|z| z.norm_sqr()).sum::<f64>() / (128.0 * 241.0);
        assert!((0.96..=1.04).contains(&power), "clutter power {power}");
    }

    #[test]
    fn clutter_zero_correlation_is_white() {
        let m = clutter(64, 241, 5, 0.0).unwrap();
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for q in 0..64 {
            for n in 0..240 {
                num += m[(q, n + 1)] * m[(q, n)].conj();
                den += m[(q, n)].norm_sqr();
            }
        }
        assert!((num / den).re.abs() < 0.03);
    }

    #[test]
    fn clutter_rejects_unit_correlation() {
        assert!(clutter(4, 4, 0, 1.0).is_err());
    }

    #[test]
    fn scale_to_ratio_exact_power() {
        let c = cfg();
        let t = TargetSpec {
            range_m: 100.0,
            velocity_mps: 50.0,
            angle_rad: 0.0,
            amplitude: Complex64::new(0.3, 0.4),
        };
        let mut m = target_echo(&t, &c).unwrap();
        scale_to_ratio(&mut m, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(m.support_mean_power().unwrap(), 1.0, epsilon = 1e-12);
        scale_to_ratio(&mut m, 10.0, 1.0).unwrap();
        assert_abs_diff_eq!(m.support_mean_power().unwrap(), 10.0, epsilon = 1e-9);
    }

    #[test]
    fn scale_to_ratio_preserves_support() {
        let c = cfg();
        let t = TargetSpec {
            range_m: 200.0,
            velocity_mps: 0.0,
            angle_rad: 0.0,
            amplitude: Complex64::new(1.0, 0.0),
        };
        let mut m = target_echo(&t, &c).unwrap();
        let before: Vec<bool> = m.data.iter().map(|z| z.norm() == 0.0).collect();
        scale_to_ratio(&mut m, -13.0, 1.0).unwrap();
        let after: Vec<bool> = m.data.iter().map(|z| z.norm() == 0.0).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn scale_to_ratio_rejects_zero_signal() {
        let c = cfg();
        let mut m = PulseMatrix::zeros(&c);
        assert!(scale_to_ratio(&mut m, 0.0, 1.0).is_err());
    }

    #[test]
    fn compose_scene_noise_only() {
        let c = cfg();
        let s = SceneSpec::noise_only(c.clone(), 11);
        let z = compose_scene(&s).unwrap();
        let expected = complex_noise(c.num_pulses, c.fast_time_len(), splitmix64(11 ^ 0x6E6F_6973));
        assert_eq!(z.data, expected);
    }

    #[test]
    fn compose_scene_target_component_power() {
        // Subtracting the same-seed noise realization exposes the pre-noise
        // target component; its support-mean power must be 10^(SNR/10).
        let c = cfg();
        let snr = 7.0;
        let mut s = SceneSpec::noise_only(c.clone(), 21);
        s.snr_db = snr;
        s.targets.push(TargetSpec {
            range_m: 300.0,
            velocity_mps: 120.0,
            angle_rad: 0.3,
            amplitude: Complex64::new(1.0, 0.0),
        });
        let with = compose_scene(&s).unwrap();
        let noise = compose_scene(&SceneSpec::noise_only(c, 21)).unwrap();
        let diff = &with.data - &noise.data;
        let (mut acc, mut count) = (0.0, 0usize);
        for z in diff.iter() {
            let p = z.norm_sqr();
            if p > 1e-20 {
                acc += p;
                count += 1;
            }
        }
        assert_abs_diff_eq!(acc / count as f64, 10f64.powf(snr / 10.0), epsilon = 1e-9);
    }

    #[test]
    fn compose_scene_is_linear_in_sources() {
        // Two disjoint-source scenes with the same seed differ from their
        // union by exactly one repeated noise realization.
        let c = cfg();
        let seed = 33;
        let target = TargetSpec {
            range_m: 150.0,
            velocity_mps: -80.0,
            angle_rad: 0.1,
            amplitude: Complex64::new(1.0, 0.0),
        };
        let jammer = JammingSpec {
            family: FamilyParams::Ssj { smear: SmearParams { subpulses: 5 } },
            theta_rad: -0.4,
            tau_s: 0.3e-6,
            velocity_mps: 60.0,
            seed,
        };
        let mut both = SceneSpec::noise_only(c.clone(), seed);
        both.snr_db = 3.0;
        both.inr_db = 6.0;
        both.targets.push(target.clone());
        both.jammers.push(jammer.clone());

        let mut only_t = SceneSpec::noise_only(c.clone(), seed);
        only_t.snr_db = 3.0;
        only_t.targets.push(target);
        let mut only_j = SceneSpec::noise_only(c.clone(), seed);
        only_j.inr_db = 6.0;
        only_j.jammers.push(jammer);
        let noise = compose_scene(&SceneSpec::noise_only(c, seed)).unwrap();

        let zb = compose_scene(&both).unwrap();
        let zt = compose_scene(&only_t).unwrap();
        let zj = compose_scene(&only_j).unwrap();
        let recon = &zt.data + &zj.data - &noise.data;
        let err = (&zb.data - &recon).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "linearity residual {err}");
    }

    #[test]
    fn generate_sample_shapes_and_determinism() {
        let opts = DatasetOptions {
            protocol: Protocol::Train,
            per_class: 1,
            seed: 2024,
            snr_override_db: None,
        };
        for class in 0..NUM_CLASSES as u8 {
            let (a, rec) = generate_sample(&opts, class, 0).unwrap();
            assert_eq!(a.matrix.num_pulses(), SAMPLE_PULSES);
            assert_eq!(a.matrix.fast_len(), SAMPLE_FAST_LEN);
            assert_eq!(a.label, class);
            assert_eq!(rec.carrier_hz, 10.0e9);
            assert!(rec.cnr_db.is_none());
            let (b, _) = generate_sample(&opts, class, 0).unwrap();
            assert_eq!(a.matrix.data, b.matrix.data);
        }
    }

    #[test]
    fn generate_sample_test_protocol_shapes() {
        let opts = DatasetOptions {
            protocol: Protocol::Test,
            per_class: 1,
            seed: 5,
            snr_override_db: None,
        };
        for class in [0u8, 3, 5, 6, 9] {
            let (s, rec) = generate_sample(&opts, class, 0).unwrap();
            assert_eq!(s.matrix.num_pulses(), SAMPLE_PULSES);
            assert_eq!(s.matrix.fast_len(), SAMPLE_FAST_LEN);
            assert_eq!(rec.sample_rate_hz, 68.0e6);
            assert!((8.0e9..=12.0e9).contains(&rec.carrier_hz));
            assert!(rec.cnr_db.is_some());
        }
    }

    #[test]
    fn snr_override_pins_ratios() {
        let opts = DatasetOptions {
            protocol: Protocol::Train,
            per_class: 1,
            seed: 9,
            snr_override_db: Some(10.0),
        };
        let (_, rec) = generate_sample(&opts, 2, 0).unwrap();
        assert_eq!(rec.snr_db, 10.0);
        assert_eq!(rec.inr_db, 10.0);
    }

    #[test]
    fn dataset_order_and_manifest() {
        let opts = DatasetOptions {
            protocol: Protocol::Train,
            per_class: 2,
            seed: 77,
            snr_override_db: None,
        };
        let (samples, manifest) = generate_dataset(&opts).unwrap();
        assert_eq!(samples.len(), 22);
        assert_eq!(manifest.samples.len(), 22);
        for (i, s) in samples.iter().enumerate() {
            assert_eq!(s.label as usize, i / 2);
            assert_eq!(manifest.samples[i].label, s.label);
            assert!((-6.0..=10.0).contains(&manifest.samples[i].snr_db));
        }
        assert_eq!(manifest.samples[2].family, "RDFJ");
        assert_eq!(manifest.samples[20].family, "SSJ");
    }

    #[test]
    fn dataset_regeneration_is_bit_identical() {
        let opts = DatasetOptions {
            protocol: Protocol::Train,
            per_class: 1,
            seed: 4242,
            snr_override_db: None,
        };
        let (a, _) = generate_dataset(&opts).unwrap();
        let (b, _) = generate_dataset(&opts).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.matrix.data, y.matrix.data);
        }
    }
}
