//! Single-channel generators for the ten DRFM deception jamming families.
//!
//! Every generator works on the scalar DRFM intercept `r(t)` produced by
//! [`crate::waveform::drfm_intercept`] and emits a slow-time x fast-time
//! matrix. Spatial (array) factors are applied later, when a scene composes
//! sources through the receive beamformer.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::waveform::{doppler_frequency, ComplexSeries, PulseMatrix, RadarConfig, SPEED_OF_LIGHT};

/// Dense-false-target parameters shared by RDFJ/VDFJ/RVDJ and the pull-off
/// families built on top of them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FalseTargetParams {
    /// Complex gain per false target.
    pub gains: Vec<Complex64>,
    /// Extra delay per false target, seconds (RDFJ/RVDJ; all equal for VDFJ).
    pub delays_s: Vec<f64>,
    /// False Doppler per target, Hz (VDFJ/RVDJ; all zero for RDFJ).
    pub dopplers_hz: Vec<f64>,
}

impl FalseTargetParams {
    pub fn count(&self) -> usize {
        self.gains.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.gains.len();
        if n == 0 {
            return Err(CoreError::parameter("at least one false target required"));
        }
        if self.delays_s.len() != n || self.dopplers_hz.len() != n {
            return Err(CoreError::dimension(
                "gains, delays and dopplers must share one length",
            ));
        }
        Ok(())
    }
}

/// Intermittent-sampling gate geometry for ISFJ/ISRJ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplingParams {
    /// Width of one sampling slice, seconds.
    pub slice_width_s: f64,
    /// Period of the sampling gate, seconds.
    pub slice_period_s: f64,
    /// Spacing between repeated copies of each slice (ISRJ), seconds.
    pub repeat_spacing_s: f64,
}

impl SamplingParams {
    /// Number of gate periods over one pulse: `floor(Tp/T_a) + 1`.
    pub fn slice_count(&self, pulse_width_s: f64) -> usize {
        (pulse_width_s / self.slice_period_s).floor() as usize + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.slice_width_s <= 0.0 {
            return Err(CoreError::parameter("slice width must be positive"));
        }
        if self.slice_width_s > self.slice_period_s {
            return Err(CoreError::parameter("slice width must not exceed the period"));
        }
        if self.repeat_spacing_s < 0.0 {
            return Err(CoreError::parameter("repeat spacing must be nonnegative"));
        }
        Ok(())
    }
}

/// Comb-spectrum tooth set for CSJ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CombParams {
    pub amplitudes: Vec<Complex64>,
    pub frequencies_hz: Vec<f64>,
}

impl CombParams {
    pub fn teeth(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        if self.amplitudes.is_empty() || self.amplitudes.len() != self.frequencies_hz.len() {
            return Err(CoreError::dimension("amplitudes and frequencies must match"));
        }
        if self.frequencies_hz.iter().any(|f| f.abs() >= fs / 2.0) {
            return Err(CoreError::parameter("comb tooth frequency aliases: |f_k| >= fs/2"));
        }
        Ok(())
    }
}

/// Smeared-spectrum (sub-pulse) parameters for SSJ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmearParams {
    pub subpulses: usize,
}

/// Which false-target parameter the pull-off trajectory drags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PullOffMode {
    Range,
    Velocity,
    Both,
}

/// Piecewise stand-off / pull / close trajectory of a gate pull-off jammer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PullOffParams {
    pub mode: PullOffMode,
    pub drag_speed_mps: f64,
    pub drag_accel_mps2: f64,
    /// Fractions of the CPI spent in each period; must sum to 1.
    pub standoff_frac: f64,
    pub pull_frac: f64,
    pub close_frac: f64,
    /// Optional cap on the dragged range deviation, meters.
    pub peak_range_m: Option<f64>,
    /// Optional cap on the dragged velocity deviation, m/s.
    pub peak_velocity_mps: Option<f64>,
    /// Engagement-time dilation. A pull-off engagement spans many CPIs; one
    /// recorded CPI sees the drag compressed by this factor so the range walk
    /// is visible inside a single sample. 1.0 = literal single-CPI physics.
    #[serde(default = "default_time_dilation")]
    pub time_dilation: f64,
}

fn default_time_dilation() -> f64 {
    1.0
}

impl PullOffParams {
    pub fn validate(&self) -> Result<()> {
        let sum = self.standoff_frac + self.pull_frac + self.close_frac;
        if self.standoff_frac < 0.0 || self.pull_frac < 0.0 || self.close_frac < 0.0 {
            return Err(CoreError::parameter("period fractions must be nonnegative"));
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CoreError::parameter("period fractions must sum to 1"));
        }
        if self.drag_speed_mps < 0.0 || self.drag_accel_mps2 < 0.0 {
            return Err(CoreError::parameter("drag speed/acceleration must be nonnegative"));
        }
        if !(self.time_dilation > 0.0) {
            return Err(CoreError::parameter("time dilation must be positive"));
        }
        Ok(())
    }
}

/// Tagged selection of one jamming family plus its parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum FamilyParams {
    #[serde(rename = "RDFJ")]
    Rdfj { targets: FalseTargetParams },
    #[serde(rename = "VDFJ")]
    Vdfj { targets: FalseTargetParams },
    #[serde(rename = "RVDJ")]
    Rvdj { targets: FalseTargetParams },
    #[serde(rename = "ISFJ")]
    Isfj { sampling: SamplingParams },
    #[serde(rename = "ISRJ")]
    Isrj { sampling: SamplingParams },
    #[serde(rename = "CSJ")]
    Csj { comb: CombParams },
    #[serde(rename = "SSJ")]
    Ssj { smear: SmearParams },
    #[serde(rename = "RGJ")]
    Rgj { pull: PullOffParams, targets: FalseTargetParams },
    #[serde(rename = "VGJ")]
    Vgj { pull: PullOffParams, targets: FalseTargetParams },
    #[serde(rename = "RVGJ")]
    Rvgj { pull: PullOffParams, targets: FalseTargetParams },
}

impl FamilyParams {
    /// Class label of the family in the fixed dataset ordering.
    pub fn class_label(&self) -> u8 {
        match self {
            FamilyParams::Rdfj { .. } => 1,
            FamilyParams::Vdfj { .. } => 2,
            FamilyParams::Rvdj { .. } => 3,
            FamilyParams::Isfj { .. } => 4,
            FamilyParams::Isrj { .. } => 5,
            FamilyParams::Csj { .. } => 6,
            FamilyParams::Rgj { .. } => 7,
            FamilyParams::Vgj { .. } => 8,
            FamilyParams::Rvgj { .. } => 9,
            FamilyParams::Ssj { .. } => 10,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FamilyParams::Rdfj { .. } => "RDFJ",
            FamilyParams::Vdfj { .. } => "VDFJ",
            FamilyParams::Rvdj { .. } => "RVDJ",
            FamilyParams::Isfj { .. } => "ISFJ",
            FamilyParams::Isrj { .. } => "ISRJ",
            FamilyParams::Csj { .. } => "CSJ",
            FamilyParams::Ssj { .. } => "SSJ",
            FamilyParams::Rgj { .. } => "RGJ",
            FamilyParams::Vgj { .. } => "VGJ",
            FamilyParams::Rvgj { .. } => "RVGJ",
        }
    }
}

/// One jammer: family + geometry + per-spec seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JammingSpec {
    #[serde(flatten)]
    pub family: FamilyParams,
    /// Jammer angle, radians.
    pub theta_rad: f64,
    /// Base intercept delay, seconds.
    pub tau_s: f64,
    /// True jammer platform radial velocity, m/s.
    pub velocity_mps: f64,
    pub seed: u64,
}

fn delay_samples(tau: f64, fs: f64) -> usize {
    (tau * fs).round().max(0.0) as usize
}

/// First sample index of the nonzero support of `r`, or None.
fn support_start(r: &ComplexSeries) -> Option<usize> {
    r.samples.iter().position(|z| z.norm_sqr() > 0.0)
}

fn support_end(r: &ComplexSeries) -> Option<usize> {
    r.samples.iter().rposition(|z| z.norm_sqr() > 0.0)
}

/// One fast-time row of a dense-false-target superposition: per false target
/// a delayed copy of `r` scaled by its gain and a Doppler phase coherent over
/// absolute time `q*Tr + n/fs`.
fn dense_false_target_row(
    r: &ComplexSeries,
    gains: &[Complex64],
    delay_bins: &[usize],
    dopplers_hz: &[f64],
    pulse_index: usize,
    config: &RadarConfig,
) -> Vec<Complex64> {
    let len = r.len();
    let fs = config.sample_rate_hz;
    let t0 = pulse_index as f64 * config.pri_s;
    let mut row = vec![Complex64::new(0.0, 0.0); len];
    for ((&gain, &d), &f) in gains.iter().zip(delay_bins).zip(dopplers_hz) {
        if f == 0.0 {
            for n in d..len {
                row[n] += gain * r.samples[n - d];
            }
        } else {
            for n in d..len {
                let src = r.samples[n - d];
                if src.norm_sqr() > 0.0 {
                    let t = t0 + n as f64 / fs;
                    let ph = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * f * t);
                    row[n] += gain * src * ph;
                }
            }
        }
    }
    row
}

fn check_delay_fits(r: &ComplexSeries, delay_bins: &[usize], len: usize) -> Result<()> {
    let end = support_end(r).unwrap_or(0);
    for &d in delay_bins {
        if end + d >= len {
            return Err(CoreError::parameter(
                "false-target delay pushes the pulse beyond the PRI",
            ));
        }
    }
    Ok(())
}

/// Range-dense false targets: delayed scaled copies of `r`, the same on every
/// pulse.
pub fn rdfj(r: &ComplexSeries, p: &FalseTargetParams, config: &RadarConfig) -> Result<PulseMatrix> {
    p.validate()?;
    let fs = config.sample_rate_hz;
    let bins: Vec<usize> = p.delays_s.iter().map(|&t| delay_samples(t, fs)).collect();
    check_delay_fits(r, &bins, r.len())?;
    let zeros = vec![0.0; p.count()];
    build_rows(r, config, |q| {
        dense_false_target_row(r, &p.gains, &bins, &zeros, q, config)
    })
}

/// Velocity-dense false targets: one delay, a comb of false Dopplers with
/// phase continuous across pulses.
pub fn vdfj(r: &ComplexSeries, p: &FalseTargetParams, config: &RadarConfig) -> Result<PulseMatrix> {
    p.validate()?;
    let prf = config.prf();
    if p.dopplers_hz.iter().any(|f| f.abs() >= prf / 2.0) {
        return Err(CoreError::parameter("false Doppler must satisfy |f_i| < PRF/2"));
    }
    let bins = vec![0usize; p.count()];
    build_rows(r, config, |q| {
        dense_false_target_row(r, &p.gains, &bins, &p.dopplers_hz, q, config)
    })
}

/// Range-velocity-dense false targets: per-target (delay, Doppler) pairs.
pub fn rvdj(r: &ComplexSeries, p: &FalseTargetParams, config: &RadarConfig) -> Result<PulseMatrix> {
    p.validate()?;
    let fs = config.sample_rate_hz;
    let bins: Vec<usize> = p.delays_s.iter().map(|&t| delay_samples(t, fs)).collect();
    check_delay_fits(r, &bins, r.len())?;
    build_rows(r, config, |q| {
        dense_false_target_row(r, &p.gains, &bins, &p.dopplers_hz, q, config)
    })
}

/// Interrupted-sampling forwarding: the delayed intercept multiplied by a
/// periodic 0/1 gate anchored at the pulse leading edge.
pub fn isfj(
    r: &ComplexSeries,
    p: &SamplingParams,
    tau_c: f64,
    config: &RadarConfig,
) -> Result<PulseMatrix> {
    p.validate()?;
    let gated = isfj_row(r, p, tau_c, config)?;
    build_rows(r, config, |_| gated.clone())
}

fn isfj_row(
    r: &ComplexSeries,
    p: &SamplingParams,
    tau_c: f64,
    config: &RadarConfig,
) -> Result<Vec<Complex64>> {
    let fs = config.sample_rate_hz;
    let len = r.len();
    let dc = delay_samples(tau_c, fs);
    if let Some(end) = support_end(r) {
        if end + dc >= len {
            return Err(CoreError::parameter("ISFJ delay pushes the pulse beyond the PRI"));
        }
    }
    let mut delayed = vec![Complex64::new(0.0, 0.0); len];
    for n in dc..len {
        delayed[n] = r.samples[n - dc];
    }
    let series = ComplexSeries { samples: delayed.clone(), sample_rate_hz: fs };
    let lead = support_start(&series).unwrap_or(0);
    let d = p.slice_count(config.pulse_width_s);
    let period = p.slice_period_s * fs;
    let width = p.slice_width_s * fs;
    let mut row = vec![Complex64::new(0.0, 0.0); len];
    for k in 0..d {
        let start = lead + (k as f64 * period).round() as usize;
        let stop = lead + (k as f64 * period + width).round() as usize;
        for n in start..stop.min(len) {
            row[n] = delayed[n];
        }
    }
    Ok(row)
}

/// Interrupted-sampling repeater: each ISFJ slice replayed `D+1` times at the
/// repeat spacing (discrete convolution with a delta train).
pub fn isrj(
    r: &ComplexSeries,
    p: &SamplingParams,
    tau_c: f64,
    config: &RadarConfig,
) -> Result<PulseMatrix> {
    p.validate()?;
    let gated = isfj_row(r, p, tau_c, config)?;
    let len = gated.len();
    let d = p.slice_count(config.pulse_width_s);
    let spacing = delay_samples(p.repeat_spacing_s, config.sample_rate_hz);
    let last = gated.iter().rposition(|z| z.norm_sqr() > 0.0).unwrap_or(0);
    if last + d * spacing >= len {
        return Err(CoreError::parameter("ISRJ repeats overflow the PRI"));
    }
    let mut row = vec![Complex64::new(0.0, 0.0); len];
    for k in 0..=d {
        let off = k * spacing;
        for n in 0..len - off {
            row[n + off] += gated[n];
        }
    }
    build_rows(r, config, |_| row.clone())
}

/// Smeared spectrum: the intercepted pulse time-compressed by the sub-pulse
/// count and replicated at sub-pulse spacing.
pub fn ssj(r: &ComplexSeries, p: &SmearParams, config: &RadarConfig) -> Result<PulseMatrix> {
    let ns = p.subpulses;
    if ns < 2 {
        return Err(CoreError::parameter("SSJ needs at least 2 sub-pulses"));
    }
    let pulse_len = config.pulse_len();
    if ns > pulse_len {
        return Err(CoreError::parameter("sub-pulse count exceeds pulse sample count"));
    }
    let len = r.len();
    let lead = support_start(r).unwrap_or(0);
    // Compress: every Ns-th sample of the pulse region.
    let sub_len = pulse_len.div_ceil(ns);
    let mut compressed = vec![Complex64::new(0.0, 0.0); sub_len];
    for (i, c) in compressed.iter_mut().enumerate() {
        let src = lead + i * ns;
        if src < len {
            *c = r.samples[src];
        }
    }
    let fs = config.sample_rate_hz;
    let mut row = vec![Complex64::new(0.0, 0.0); len];
    for i in 1..=ns {
        let off = lead + ((i as f64) * config.pulse_width_s * fs / ns as f64).round() as usize;
        for (k, &c) in compressed.iter().enumerate() {
            let n = off + k;
            if n < len {
                row[n] += c;
            }
        }
    }
    build_rows(r, config, |_| row.clone())
}

/// Comb spectrum: a persistent sum of complex tones spanning the whole PRI,
/// identical on every pulse.
pub fn csj(p: &CombParams, config: &RadarConfig) -> Result<PulseMatrix> {
    p.validate(config.sample_rate_hz)?;
    let len = config.fast_time_len();
    let fs = config.sample_rate_hz;
    let mut row = vec![Complex64::new(0.0, 0.0); len];
    for (n, v) in row.iter_mut().enumerate() {
        let t = n as f64 / fs;
        for (&a, &f) in p.amplitudes.iter().zip(&p.frequencies_hz) {
            *v += a * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * f * t);
        }
    }
    let mut m = PulseMatrix::zeros(config);
    for q in 0..config.num_pulses {
        for (n, &v) in row.iter().enumerate() {
            m.data[(q, n)] = v;
        }
    }
    Ok(m)
}

/// Per-pulse offset produced by the pull-off trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PullOffOffset {
    /// Additional delay (seconds) and/or Doppler (Hz) to apply on this pulse.
    Active { delay_s: f64, doppler_hz: f64 },
    /// Closing period: the jammer contributes nothing.
    Vanished,
}

/// Evaluate the stand-off / pull / close schedule at pulse `q`.
///
/// During the pulling period the dragged range offset is
/// `2 (v_d t + a t^2 / 2) / c` seconds and the dragged Doppler offset
/// `2 (v_d + a t) f0 / c` Hz, with `t` measured from the start of pulling.
pub fn pulloff_trajectory(
    p: &PullOffParams,
    cpi_duration: f64,
    pulse_index: usize,
    pri_s: f64,
    carrier_hz: f64,
) -> Result<PullOffOffset> {
    p.validate()?;
    let t = pulse_index as f64 * pri_s;
    let t1 = p.standoff_frac * cpi_duration;
    let t2 = (p.standoff_frac + p.pull_frac) * cpi_duration;
    if t < t1 {
        return Ok(PullOffOffset::Active { delay_s: 0.0, doppler_hz: 0.0 });
    }
    if t >= t2 {
        return Ok(PullOffOffset::Vanished);
    }
    let dt = (t - t1) * p.time_dilation;
    let mut range_dev = p.drag_speed_mps * dt + 0.5 * p.drag_accel_mps2 * dt * dt;
    if let Some(cap) = p.peak_range_m {
        range_dev = range_dev.min(cap);
    }
    let mut vel_dev = p.drag_speed_mps + p.drag_accel_mps2 * dt;
    if let Some(cap) = p.peak_velocity_mps {
        vel_dev = vel_dev.min(cap);
    }
    let (delay_s, doppler_hz) = match p.mode {
        PullOffMode::Range => (2.0 * range_dev / SPEED_OF_LIGHT, 0.0),
        PullOffMode::Velocity => (0.0, doppler_frequency(vel_dev, carrier_hz)),
        PullOffMode::Both => (
            2.0 * range_dev / SPEED_OF_LIGHT,
            doppler_frequency(vel_dev, carrier_hz),
        ),
    };
    Ok(PullOffOffset::Active { delay_s, doppler_hz })
}

/// RGJ/VGJ/RVGJ: the matching dense-false-target generator with the per-pulse
/// trajectory offset added to its delays and/or Dopplers; closing-period rows
/// are zero.
pub fn apply_pulloff(
    r: &ComplexSeries,
    pull: &PullOffParams,
    targets: &FalseTargetParams,
    config: &RadarConfig,
) -> Result<PulseMatrix> {
    pull.validate()?;
    targets.validate()?;
    let fs = config.sample_rate_hz;
    let cpi = config.cpi_duration();
    let len = r.len();
    // Worst-case delay check at the end of the pulling period.
    let max_pull_bins = {
        let t_end = pull.pull_frac * cpi * pull.time_dilation;
        let mut dev = pull.drag_speed_mps * t_end + 0.5 * pull.drag_accel_mps2 * t_end * t_end;
        if let Some(cap) = pull.peak_range_m {
            dev = dev.min(cap);
        }
        match pull.mode {
            PullOffMode::Velocity => 0,
            _ => delay_samples(2.0 * dev / SPEED_OF_LIGHT, fs),
        }
    };
    let base_bins: Vec<usize> = targets.delays_s.iter().map(|&t| delay_samples(t, fs)).collect();
    let worst: Vec<usize> = base_bins.iter().map(|&b| b + max_pull_bins).collect();
    check_delay_fits(r, &worst, len)?;

    let mut m = PulseMatrix::zeros(config);
    for q in 0..config.num_pulses {
        match pulloff_trajectory(pull, cpi, q, config.pri_s, config.carrier_hz)? {
            PullOffOffset::Vanished => {}
            PullOffOffset::Active { delay_s, doppler_hz } => {
                let bins: Vec<usize> = targets
                    .delays_s
                    .iter()
                    .map(|&t| delay_samples(t + delay_s, fs))
                    .collect();
                let dops: Vec<f64> =
                    targets.dopplers_hz.iter().map(|&f| f + doppler_hz).collect();
                let row = dense_false_target_row(r, &targets.gains, &bins, &dops, q, config);
                for (n, v) in row.into_iter().enumerate() {
                    m.data[(q, n)] = v;
                }
            }
        }
    }
    Ok(m)
}

/// Dispatch a spec to its generator; `r` must be the jammer's DRFM intercept.
pub fn generate(spec: &JammingSpec, r: &ComplexSeries, config: &RadarConfig) -> Result<PulseMatrix> {
    match &spec.family {
        FamilyParams::Rdfj { targets } => rdfj(r, targets, config),
        FamilyParams::Vdfj { targets } => vdfj(r, targets, config),
        FamilyParams::Rvdj { targets } => rvdj(r, targets, config),
        FamilyParams::Isfj { sampling } => isfj(r, sampling, spec.tau_s, config),
        FamilyParams::Isrj { sampling } => isrj(r, sampling, spec.tau_s, config),
        FamilyParams::Csj { comb } => csj(comb, config),
        FamilyParams::Ssj { smear } => ssj(r, smear, config),
        FamilyParams::Rgj { pull, targets }
        | FamilyParams::Vgj { pull, targets }
        | FamilyParams::Rvgj { pull, targets } => apply_pulloff(r, pull, targets, config),
    }
}

fn build_rows<F>(r: &ComplexSeries, config: &RadarConfig, mut row_fn: F) -> Result<PulseMatrix>
where
    F: FnMut(usize) -> Vec<Complex64>,
{
    if r.len() != config.fast_time_len() {
        return Err(CoreError::dimension("intercept length must match the PRI grid"));
    }
    let mut m = PulseMatrix::zeros(config);
    for q in 0..config.num_pulses {
        let row = row_fn(q);
        for (n, v) in row.into_iter().enumerate() {
            m.data[(q, n)] = v;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::drfm_intercept;
    use approx::assert_abs_diff_eq;

    fn cfg() -> RadarConfig {
        RadarConfig::table_train()
    }

    fn intercept(config: &RadarConfig) -> ComplexSeries {
        drfm_intercept(config, 0.05, 0.0, 0.0).unwrap()
    }

    fn one(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn rdfj_identity_single_target() {
        let c = cfg();
        let r = intercept(&c);
        let p = FalseTargetParams {
            gains: vec![one(1.0)],
            delays_s: vec![0.0],
            dopplers_hz: vec![0.0],
        };
        let m = rdfj(&r, &p, &c).unwrap();
        for q in 0..c.num_pulses {
            for n in 0..r.len() {
                assert_eq!(m.data[(q, n)], r.samples[n]);
            }
        }
    }

    #[test]
    fn rdfj_disjoint_supports() {
        let c = cfg();
        let r = intercept(&c);
        let delta = 2.0 * c.pulse_width_s;
        let p = FalseTargetParams {
            gains: vec![one(1.0), one(1.0)],
            delays_s: vec![0.0, delta],
            dopplers_hz: vec![0.0, 0.0],
        };
        let m = rdfj(&r, &p, &c).unwrap();
        let row = m.data.row(0);
        let pl = c.pulse_len();
        let gap_start = pl;
        let gap_end = (delta * c.sample_rate_hz).round() as usize;
        assert!(row.iter().take(pl).all(|z| z.norm() > 0.0));
        assert!((gap_start..gap_end).all(|n| row[n].norm() == 0.0));
        assert!((gap_end..gap_end + pl).all(|n| row[n].norm() > 0.0));
    }

    #[test]
    fn rdfj_rejects_overflow() {
        let c = cfg();
        let r = intercept(&c);
        let p = FalseTargetParams {
            gains: vec![one(1.0)],
            delays_s: vec![c.pri_s],
            dopplers_hz: vec![0.0],
        };
        assert!(rdfj(&r, &p, &c).is_err());
    }

    #[test]
    fn vdfj_zero_doppler_is_plain_echo() {
        let c = cfg();
        let r = intercept(&c);
        let p = FalseTargetParams {
            gains: vec![one(1.0)],
            delays_s: vec![0.0],
            dopplers_hz: vec![0.0],
        };
        let m = vdfj(&r, &p, &c).unwrap();
        for q in [0usize, 5, 127] {
            for n in 0..r.len() {
                assert_eq!(m.data[(q, n)], r.samples[n]);
            }
        }
    }

    #[test]
    fn vdfj_interpulse_phase_advance() {
        // f1 = PRF/4 advances the slow-time phase by pi/2 per pulse.
        let c = cfg();
        let r = intercept(&c);
        let f1 = c.prf() / 4.0;
        let p = FalseTargetParams {
            gains: vec![one(1.0)],
            delays_s: vec![0.0],
            dopplers_hz: vec![f1],
        };
        let m = vdfj(&r, &p, &c).unwrap();
        let bin = 10;
        for q in 0..c.num_pulses - 1 {
            let ratio = m.data[(q + 1, bin)] / m.data[(q, bin)];
            let step = 2.0 * std::f64::consts::PI * f1 * c.pri_s;
            assert_abs_diff_eq!(ratio.arg(), step, epsilon = 1e-9);
        }
    }

    #[test]
    fn vdfj_slow_time_spectrum_peaks() {
        // Brute-force slow-time DFT: one dominant bin per distinct tone.
        let c = cfg();
        let r = intercept(&c);
        let q = c.num_pulses;
        let tones = [c.prf() * 10.0 / q as f64, c.prf() * 30.0 / q as f64, -c.prf() * 25.0 / q as f64];
        let p = FalseTargetParams {
            gains: vec![one(1.0); 3],
            delays_s: vec![0.0; 3],
            dopplers_hz: tones.to_vec(),
        };
        let m = vdfj(&r, &p, &c).unwrap();
        let bin = 5;
        let mut mags = vec![0.0f64; q];
        for (k, mag) in mags.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for qq in 0..q {
                let ph = -2.0 * std::f64::consts::PI * (k * qq) as f64 / q as f64;
                acc += m.data[(qq, bin)] * Complex64::from_polar(1.0, ph);
            }
            *mag = acc.norm();
        }
        let peak = mags.iter().cloned().fold(0.0, f64::max);
        let strong: Vec<usize> = (0..q).filter(|&k| mags[k] > 0.5 * peak).collect();
        assert_eq!(strong.len(), 3, "strong bins: {strong:?}");
    }

    #[test]
    fn rvdj_reduces_to_rdfj_bit_exact() {
        let c = cfg();
        let r = intercept(&c);
        let p = FalseTargetParams {
            gains: vec![one(1.0), one(0.5), one(2.0)],
            delays_s: vec![0.0, 1.5e-6, 2.5e-6],
            dopplers_hz: vec![0.0, 0.0, 0.0],
        };
        let a = rvdj(&r, &p, &c).unwrap();
        let b = rdfj(&r, &p, &c).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn rvdj_reduces_to_vdfj_bit_exact() {
        let c = cfg();
        let r = intercept(&c);
        let f = [3000.0, -8000.0];
        let p = FalseTargetParams {
            gains: vec![one(1.0), one(0.7)],
            delays_s: vec![0.0, 0.0],
            dopplers_hz: f.to_vec(),
        };
        let a = rvdj(&r, &p, &c).unwrap();
        let b = vdfj(&r, &p, &c).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn rvdj_four_distinct_peaks_after_matched_processing() {
        // Oracle: matched filter along fast time + DFT along slow time; each
        // (delay, Doppler) pair must light its own cell.
        let c = cfg();
        let r = intercept(&c);
        let q = c.num_pulses as f64;
        let delays = [0.0, 1.0e-6, 2.0e-6, 3.0e-6];
        let dopplers = [
            c.prf() * 8.0 / q,
            c.prf() * 24.0 / q,
            c.prf() * 40.0 / q,
            c.prf() * 56.0 / q,
        ];
        let p = FalseTargetParams {
            gains: vec![one(1.0); 4],
            delays_s: delays.to_vec(),
            dopplers_hz: dopplers.to_vec(),
        };
        let m = rvdj(&r, &p, &c).unwrap();
        let pulse =
            crate::waveform::lfm_baseband(c.pulse_width_s, c.bandwidth_hz, c.sample_rate_hz, 1.0)
                .unwrap();
        let l = c.fast_time_len();
        let nq = c.num_pulses;
        for (i, (&d, &f)) in delays.iter().zip(dopplers.iter()).enumerate() {
            let dbin = (d * c.sample_rate_hz).round() as usize;
            let kbin = (f / c.prf() * nq as f64).round() as usize;
            // Matched filter at each delay bin for the Doppler-compensated sum.
            let mut best = (0usize, 0.0f64);
            for cand in 0..l - pulse.len() {
                let mut acc = Complex64::new(0.0, 0.0);
                for qq in 0..nq {
                    let slow = Complex64::from_polar(
                        1.0,
                        -2.0 * std::f64::consts::PI * (kbin * qq) as f64 / nq as f64,
                    );
                    let mut mf = Complex64::new(0.0, 0.0);
                    for (ni, &x) in pulse.samples.iter().enumerate() {
                        mf += m.data[(qq, cand + ni)] * x.conj();
                    }
                    acc += mf * slow;
                }
                if acc.norm() > best.1 {
                    best = (cand, acc.norm());
                }
            }
            assert!(
                (best.0 as i64 - dbin as i64).abs() <= 1,
                "target {i}: peak at {} expected {dbin}",
                best.0
            );
        }
    }

    #[test]
    fn isfj_degenerate_gate_is_identity() {
        let c = cfg();
        let r = intercept(&c);
        let p = SamplingParams {
            slice_width_s: 0.25e-6,
            slice_period_s: 0.25e-6,
            repeat_spacing_s: 0.0,
        };
        let m = isfj(&r, &p, 0.0, &c).unwrap();
        for n in 0..r.len() {
            assert_eq!(m.data[(0, n)], r.samples[n]);
        }
    }

    #[test]
    fn isfj_slice_count_formula() {
        let p = SamplingParams {
            slice_width_s: 0.05e-6,
            slice_period_s: 0.25e-6,
            repeat_spacing_s: 0.0,
        };
        assert_eq!(p.slice_count(1.0e-6), 5);
    }

    #[test]
    fn isfj_zero_outside_gates() {
        let c = cfg();
        let r = intercept(&c);
        let p = SamplingParams {
            slice_width_s: 0.05e-6,
            slice_period_s: 0.25e-6,
            repeat_spacing_s: 0.0,
        };
        let m = isfj(&r, &p, 0.0, &c).unwrap();
        let fs = c.sample_rate_hz;
        let width = (0.05e-6 * fs).round() as usize;
        let period = 0.25e-6 * fs;
        let row = m.data.row(0);
        for n in 0..r.len() {
            let in_gate = (0..p.slice_count(c.pulse_width_s)).any(|k| {
                let s = (k as f64 * period).round() as usize;
                n >= s && n < s + width
            });
            if !in_gate {
                assert_eq!(row[n].norm(), 0.0, "sample {n} should be gated out");
            }
        }
    }

    #[test]
    fn isfj_rejects_zero_width() {
        let c = cfg();
        let r = intercept(&c);
        let p = SamplingParams {
            slice_width_s: 0.0,
            slice_period_s: 0.25e-6,
            repeat_spacing_s: 0.05e-6,
        };
        assert!(isfj(&r, &p, 0.0, &c).is_err());
    }

    #[test]
    fn isrj_single_term_equals_isfj() {
        // Tp < T_a forces D = 1; with spacing 0 the repeats collapse. Use a
        // short pulse config so D*spacing stays inside the PRI trivially.
        let mut c = cfg();
        c.pulse_width_s = 0.2e-6;
        let r = drfm_intercept(&c, 0.0, 0.0, 0.0).unwrap();
        let p = SamplingParams {
            slice_width_s: 0.05e-6,
            slice_period_s: 0.25e-6,
            repeat_spacing_s: 0.0,
        };
        let a = isrj(&r, &p, 0.0, &c).unwrap();
        let b = isfj(&r, &p, 0.0, &c).unwrap();
        // D = floor(0.2/0.25)+1 = 1, spacing 0: ISRJ = 2x the single slice.
        for n in 0..r.len() {
            assert!((a.data[(0, n)] - b.data[(0, n)] * 2.0).norm() < 1e-12);
        }
    }

    #[test]
    fn isrj_disjoint_replication_energy() {
        let c = cfg();
        let r = intercept(&c);
        let p = SamplingParams {
            slice_width_s: 0.05e-6,
            slice_period_s: 2.0e-6,
            repeat_spacing_s: 0.3e-6,
        };
        // D = floor(1/2)+1 = 1 gate; slice of ~2.4 samples, repeated D+1 = 2
        // times at 14-sample spacing: disjoint copies.
        let a = isrj(&r, &p, 0.0, &c).unwrap();
        let b = isfj(&r, &p, 0.0, &c).unwrap();
        let ea: f64 = a.data.row(0).iter().map(|z| z.norm_sqr()).sum();
        let eb: f64 = b.data.row(0).iter().map(|z| z.norm_sqr()).sum();
        assert_abs_diff_eq!(ea, 2.0 * eb, epsilon = 1e-9);
    }

    #[test]
    fn isrj_oracle_gate_then_replicate() {
        // Independent sample-domain oracle on the Table-1 geometry: gate the
        // delayed intercept, then superpose shifted copies. Must match bit for
        // bit.
        let c = cfg();
        let r = intercept(&c);
        let p = SamplingParams {
            slice_width_s: 0.05e-6,
            slice_period_s: 0.25e-6,
            repeat_spacing_s: 0.1e-6,
        };
        let m = isrj(&r, &p, 0.0, &c).unwrap();

        let fs = c.sample_rate_hz;
        let len = r.len();
        let d = (c.pulse_width_s / p.slice_period_s).floor() as usize + 1;
        let width = p.slice_width_s * fs;
        let period = p.slice_period_s * fs;
        let mut gate = vec![false; len];
        for k in 0..d {
            let s = (k as f64 * period).round() as usize;
            let e = (k as f64 * period + width).round() as usize;
            for g in gate.iter_mut().take(e.min(len)).skip(s) {
                *g = true;
            }
        }
        let gated: Vec<Complex64> = (0..len)
            .map(|n| if gate[n] { r.samples[n] } else { Complex64::new(0.0, 0.0) })
            .collect();
        let spacing = (p.repeat_spacing_s * fs).round() as usize;
        let mut expect = vec![Complex64::new(0.0, 0.0); len];
        for k in 0..=d {
            for n in 0..len {
                let m = n + k * spacing;
                if m < len {
                    expect[m] += gated[n];
                }
            }
        }
        for n in 0..len {
            assert_eq!(m.data[(0, n)], expect[n], "mismatch at sample {n}");
        }
    }

    #[test]
    fn isrj_rejects_repeat_overflow() {
        let c = cfg();
        let r = intercept(&c);
        let p = SamplingParams {
            slice_width_s: 0.05e-6,
            slice_period_s: 0.25e-6,
            repeat_spacing_s: 1.0e-6,
        };
        assert!(isrj(&r, &p, 0.0, &c).is_err());
    }

    #[test]
    fn ssj_subpulse_supports() {
        let c = cfg();
        let r = intercept(&c);
        let ns = 5;
        let m = ssj(&r, &SmearParams { subpulses: ns }, &c).unwrap();
        let row = m.data.row(0);
        let fs = c.sample_rate_hz;
        let sub_len = c.pulse_len().div_ceil(ns);
        // Brute-force support detection: each sub-pulse starts at
        // round(i*Tp*fs/Ns).
        for i in 1..=ns {
            let start = ((i as f64) * c.pulse_width_s * fs / ns as f64).round() as usize;
            assert!(row[start].norm() > 0.0, "sub-pulse {i} missing at {start}");
        }
        let first = row.iter().position(|z| z.norm() > 0.0).unwrap();
        assert_eq!(first, (c.pulse_width_s * fs / ns as f64).round() as usize);
        let last = row.iter().rposition(|z| z.norm() > 0.0).unwrap();
        assert!(last < c.pulse_len() + sub_len + 1);
    }

    #[test]
    fn ssj_rejects_oversized_subpulse_count() {
        let c = cfg();
        let r = intercept(&c);
        assert!(ssj(&r, &SmearParams { subpulses: 1 }, &c).is_err());
        assert!(ssj(&r, &SmearParams { subpulses: 1000 }, &c).is_err());
    }

    #[test]
    fn csj_constant_tooth() {
        let c = cfg();
        let p = CombParams { amplitudes: vec![one(1.0)], frequencies_hz: vec![0.0] };
        let m = csj(&p, &c).unwrap();
        for z in m.data.iter() {
            assert_abs_diff_eq!(z.re, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn csj_rejects_aliasing() {
        let c = cfg();
        let p = CombParams {
            amplitudes: vec![one(1.0)],
            frequencies_hz: vec![c.sample_rate_hz],
        };
        assert!(csj(&p, &c).is_err());
    }

    #[test]
    fn csj_dft_peak_per_tooth() {
        // Brute-force fast-time DFT peak finding for 10 well-separated teeth.
        let c = cfg();
        let k = 10;
        let l = c.fast_time_len();
        let fs = c.sample_rate_hz;
        let freqs: Vec<f64> = (0..k)
            .map(|i| (i as f64 - 4.5) * fs / 12.0 / 2.0)
            .collect();
        let p = CombParams { amplitudes: vec![one(1.0); k], frequencies_hz: freqs.clone() };
        let m = csj(&p, &c).unwrap();
        let row: Vec<Complex64> = m.data.row(0).to_vec();
        let mags: Vec<f64> = (0..l)
            .map(|kk| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (n, &x) in row.iter().enumerate() {
                    let ph = -2.0 * std::f64::consts::PI * (kk * n) as f64 / l as f64;
                    acc += x * Complex64::from_polar(1.0, ph);
                }
                acc.norm()
            })
            .collect();
        let peak = mags.iter().cloned().fold(0.0, f64::max);
        let mut maxima = 0;
        for i in 0..l {
            let prev = mags[(i + l - 1) % l];
            let next = mags[(i + 1) % l];
            if mags[i] > prev && mags[i] >= next && mags[i] > 0.5 * peak {
                maxima += 1;
            }
        }
        assert_eq!(maxima, k);
    }

    fn pull_params(mode: PullOffMode) -> PullOffParams {
        PullOffParams {
            mode,
            drag_speed_mps: 300.0,
            drag_accel_mps2: 0.0,
            standoff_frac: 0.2,
            pull_frac: 0.6,
            close_frac: 0.2,
            peak_range_m: None,
            peak_velocity_mps: None,
            time_dilation: 1.0,
        }
    }

    #[test]
    fn pulloff_standoff_is_zero() {
        let c = cfg();
        let p = pull_params(PullOffMode::Range);
        let off = pulloff_trajectory(&p, c.cpi_duration(), 0, c.pri_s, c.carrier_hz).unwrap();
        assert_eq!(off, PullOffOffset::Active { delay_s: 0.0, doppler_hz: 0.0 });
    }

    #[test]
    fn pulloff_closing_vanishes() {
        let c = cfg();
        let p = pull_params(PullOffMode::Range);
        let q = c.num_pulses - 1;
        let off = pulloff_trajectory(&p, c.cpi_duration(), q, c.pri_s, c.carrier_hz).unwrap();
        assert_eq!(off, PullOffOffset::Vanished);
    }

    #[test]
    fn pulloff_range_offset_value() {
        // 1 ms into pulling at 300 m/s: delay = 2*0.3/c s.
        let c = cfg();
        let mut p = pull_params(PullOffMode::Range);
        // Make the CPI long enough that 1 ms sits inside the pulling period.
        let cpi = 10.0e-3;
        p.standoff_frac = 0.0;
        p.pull_frac = 0.8;
        p.close_frac = 0.2;
        let pri = 1.0e-3;
        let off = pulloff_trajectory(&p, cpi, 1, pri, c.carrier_hz).unwrap();
        match off {
            PullOffOffset::Active { delay_s, .. } => {
                assert_abs_diff_eq!(delay_s, 2.0 * 0.3 / SPEED_OF_LIGHT, epsilon = 1e-18);
            }
            _ => panic!("expected active offset"),
        }
    }

    #[test]
    fn pulloff_dilation_scales_walk_linearly() {
        let c = cfg();
        let mut p = pull_params(PullOffMode::Range);
        p.standoff_frac = 0.0;
        p.pull_frac = 1.0;
        p.close_frac = 0.0;
        let q = 50;
        let base = match pulloff_trajectory(&p, c.cpi_duration(), q, c.pri_s, c.carrier_hz).unwrap()
        {
            PullOffOffset::Active { delay_s, .. } => delay_s,
            _ => panic!("expected active"),
        };
        p.time_dilation = 500.0;
        let dilated =
            match pulloff_trajectory(&p, c.cpi_duration(), q, c.pri_s, c.carrier_hz).unwrap() {
                PullOffOffset::Active { delay_s, .. } => delay_s,
                _ => panic!("expected active"),
            };
        assert_abs_diff_eq!(dilated, 500.0 * base, epsilon = 1e-20);
    }

    #[test]
    fn pulloff_rejects_bad_fractions() {
        let mut p = pull_params(PullOffMode::Range);
        p.close_frac = 0.5;
        assert!(p.validate().is_err());
    }

    #[test]
    fn apply_pulloff_null_trajectory_matches_base() {
        let c = cfg();
        let r = intercept(&c);
        let targets = FalseTargetParams {
            gains: vec![one(1.0), one(0.5)],
            delays_s: vec![0.5e-6, 1.5e-6],
            dopplers_hz: vec![2000.0, -4000.0],
        };
        let pull = PullOffParams {
            mode: PullOffMode::Both,
            drag_speed_mps: 0.0,
            drag_accel_mps2: 0.0,
            standoff_frac: 0.5,
            pull_frac: 0.5,
            close_frac: 0.0,
            peak_range_m: None,
            peak_velocity_mps: None,
            time_dilation: 1.0,
        };
        let a = apply_pulloff(&r, &pull, &targets, &c).unwrap();
        let b = rvdj(&r, &targets, &c).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn apply_pulloff_closing_rows_zero() {
        let c = cfg();
        let r = intercept(&c);
        let targets = FalseTargetParams {
            gains: vec![one(1.0)],
            delays_s: vec![0.0],
            dopplers_hz: vec![0.0],
        };
        let pull = pull_params(PullOffMode::Range);
        let m = apply_pulloff(&r, &pull, &targets, &c).unwrap();
        let t2 = 0.8 * c.cpi_duration();
        for q in 0..c.num_pulses {
            let t = q as f64 * c.pri_s;
            let energy: f64 = m.data.row(q).iter().map(|z| z.norm_sqr()).sum();
            if t >= t2 {
                assert_eq!(energy, 0.0, "closing row {q} must be empty");
            } else {
                assert!(energy > 0.0, "active row {q} must carry the jammer");
            }
        }
    }

    #[test]
    fn jamming_spec_json_discriminator() {
        let spec = JammingSpec {
            family: FamilyParams::Isrj {
                sampling: SamplingParams {
                    slice_width_s: 0.05e-6,
                    slice_period_s: 0.25e-6,
                    repeat_spacing_s: 0.1e-6,
                },
            },
            theta_rad: 0.1,
            tau_s: 0.5e-6,
            velocity_mps: 0.0,
            seed: 7,
        };
        let json = serde_json::to_value(&spec).unwrap();
        assert_eq!(json["family"], "ISRJ");
        let back: JammingSpec = serde_json::from_value(json).unwrap();
        assert_eq!(back.family.class_label(), 5);
    }

    #[test]
    fn generators_are_deterministic() {
        let c = cfg();
        let r = intercept(&c);
        let p = FalseTargetParams {
            gains: vec![one(1.0), one(0.3)],
            delays_s: vec![0.2e-6, 1.1e-6],
            dopplers_hz: vec![1000.0, -2500.0],
        };
        let a = rvdj(&r, &p, &c).unwrap();
        let b = rvdj(&r, &p, &c).unwrap();
        assert_eq!(a.data, b.data);
    }
}
