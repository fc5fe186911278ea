//! Transmit-waveform, array-geometry and DRFM-intercept primitives.
//!
//! Everything downstream (echo composition, jamming generators) is built from
//! the linear-FM baseband pulse, uniform-linear-array steering vectors and the
//! scalar signal intercepted by a jammer's receiver.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Propagation speed used for all range/Doppler conversions, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Radar system configuration for one coherent processing interval.
///
/// `fast_time_len` is derived: `round(pri * sample_rate) + guard_samples`.
/// The single guard sample matches the fixed 241-column sample shape used by
/// the dataset protocols (240 samples cover one PRI at the training-set rate).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadarConfig {
    pub num_tx: usize,
    pub num_rx: usize,
    pub num_pulses: usize,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub sample_rate_hz: f64,
    pub pulse_width_s: f64,
    pub pri_s: f64,
    /// Transmit weights, length `num_tx`.
    pub tx_weights: Vec<Complex64>,
    /// Receive beamforming weights, length `num_rx`. Defaults to the steering
    /// vector of the look direction.
    pub rx_weights: Vec<Complex64>,
    /// +1.0 for an up-chirp, -1.0 for a down-chirp.
    pub chirp_sign: f64,
    /// Extra fast-time samples appended after one PRI.
    pub guard_samples: usize,
}

impl RadarConfig {
    /// Training-protocol configuration: 10 GHz carrier, 40 MHz bandwidth,
    /// 48 MHz sampling, 1 us pulse, 5 us PRI, 128 pulses, single channel.
    pub fn table_train() -> Self {
        RadarConfig {
            num_tx: 1,
            num_rx: 4,
            num_pulses: 128,
            carrier_hz: 10.0e9,
            bandwidth_hz: 40.0e6,
            sample_rate_hz: 48.0e6,
            pulse_width_s: 1.0e-6,
            pri_s: 5.0e-6,
            tx_weights: vec![Complex64::new(1.0, 0.0)],
            rx_weights: steering_vector(0.0, 4),
            chirp_sign: 1.0,
            guard_samples: 1,
        }
    }

    /// Fast-time samples per pulse row, `round(pri*fs) + guard`.
    pub fn fast_time_len(&self) -> usize {
        (self.pri_s * self.sample_rate_hz).round() as usize + self.guard_samples
    }

    /// Samples in one transmitted pulse.
    pub fn pulse_len(&self) -> usize {
        (self.pulse_width_s * self.sample_rate_hz).round() as usize
    }

    /// Pulse repetition frequency, Hz.
    pub fn prf(&self) -> f64 {
        1.0 / self.pri_s
    }

    /// Duration of the coherent processing interval, seconds.
    pub fn cpi_duration(&self) -> f64 {
        self.num_pulses as f64 * self.pri_s
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_tx < 1 || self.num_rx < 1 || self.num_pulses < 1 {
            return Err(CoreError::parameter("M, N and Q must all be >= 1"));
        }
        if !(self.pulse_width_s > 0.0 && self.pulse_width_s < self.pri_s) {
            return Err(CoreError::parameter("require 0 < Tp < Tr"));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz <= self.sample_rate_hz) {
            return Err(CoreError::parameter("require 0 < B <= fs"));
        }
        if self.tx_weights.len() != self.num_tx {
            return Err(CoreError::dimension("tx_weights length must equal num_tx"));
        }
        if self.rx_weights.len() != self.num_rx {
            return Err(CoreError::dimension("rx_weights length must equal num_rx"));
        }
        if !self.rx_weights.iter().all(|w| w.re.is_finite() && w.im.is_finite()) {
            return Err(CoreError::parameter("rx_weights must be finite"));
        }
        Ok(())
    }
}

/// A complex baseband time series with its sampling rate.
#[derive(Debug, Clone)]
pub struct ComplexSeries {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
}

impl ComplexSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }
}

/// Slow-time x fast-time echo matrix for one CPI.
///
/// Row index is the pulse (slow time), column index the fast-time sample.
#[derive(Debug, Clone)]
pub struct PulseMatrix {
    pub data: Array2<Complex64>,
    pub config: RadarConfig,
}

impl PulseMatrix {
    pub fn zeros(config: &RadarConfig) -> Self {
        PulseMatrix {
            data: Array2::zeros((config.num_pulses, config.fast_time_len())),
            config: config.clone(),
        }
    }

    pub fn num_pulses(&self) -> usize {
        self.data.nrows()
    }

    pub fn fast_len(&self) -> usize {
        self.data.ncols()
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Mean power over the nonzero entries; None if the matrix is all zero.
    pub fn support_mean_power(&self) -> Option<f64> {
        let mut acc = 0.0;
        let mut count = 0usize;
        for z in self.data.iter() {
            let p = z.norm_sqr();
            if p > 0.0 {
                acc += p;
                count += 1;
            }
        }
        if count == 0 {
            None
        } else {
            Some(acc / count as f64)
        }
    }

    /// Elementwise sum; shapes must match.
    pub fn add_assign(&mut self, other: &PulseMatrix) -> Result<()> {
        if self.data.dim() != other.data.dim() {
            return Err(CoreError::dimension("pulse matrix shapes differ"));
        }
        self.data += &other.data;
        Ok(())
    }

    pub fn scale(&mut self, factor: Complex64) {
        self.data.mapv_inplace(|z| z * factor);
    }
}

/// Unit-magnitude LFM chirp sweeping -B/2..B/2 over the pulse.
///
/// Sample n carries phase `sign * pi * (B/Tp) * (t_n - Tp/2)^2` with
/// `t_n = n/fs`, so the instantaneous frequency is centered in the pulse.
pub fn lfm_baseband(tp: f64, bandwidth: f64, fs: f64, sign: f64) -> Result<ComplexSeries> {
    if tp <= 0.0 || bandwidth <= 0.0 || fs <= 0.0 {
        return Err(CoreError::parameter("Tp, B and fs must be positive"));
    }
    if bandwidth > fs {
        return Err(CoreError::parameter("complex baseband sampling needs B <= fs"));
    }
    let n = (tp * fs).round() as usize;
    let rate = bandwidth / tp;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / fs - tp / 2.0;
            Complex64::from_polar(1.0, sign * std::f64::consts::PI * rate * t * t)
        })
        .collect();
    Ok(ComplexSeries { samples, sample_rate_hz: fs })
}

/// Steering vector of a half-wavelength uniform linear array:
/// element n is `exp(j*pi*n*sin(theta))`.
pub fn steering_vector(theta: f64, n_elems: usize) -> Vec<Complex64> {
    (0..n_elems)
        .map(|n| Complex64::from_polar(1.0, std::f64::consts::PI * n as f64 * theta.sin()))
        .collect()
}

/// Two-way Doppler shift `2 v f0 / c` in Hz.
pub fn doppler_frequency(velocity: f64, carrier_hz: f64) -> f64 {
    2.0 * velocity * carrier_hz / SPEED_OF_LIGHT
}

/// Beamformer response `w^H a(theta)` collapsed to one scalar gain.
pub fn spatial_gain(weights: &[Complex64], theta: f64) -> Result<Complex64> {
    let sv = steering_vector(theta, weights.len());
    if weights.is_empty() {
        return Err(CoreError::dimension("empty weight vector"));
    }
    Ok(weights.iter().zip(sv.iter()).map(|(w, a)| w.conj() * a).sum())
}

/// Signal intercepted by a single-antenna DRFM receiver over one PRI:
/// a delayed, Doppler-shifted combination of the transmit channels,
/// `r(t) = e^{-j 2 pi f_d t} sum_m w_m^* a_m(theta) x_m(t - tau)`.
///
/// The delay is quantized to the nearest fast-time sample.
pub fn drfm_intercept(
    config: &RadarConfig,
    theta: f64,
    tau: f64,
    velocity: f64,
) -> Result<ComplexSeries> {
    config.validate()?;
    if tau < 0.0 {
        return Err(CoreError::parameter("intercept delay must be nonnegative"));
    }
    if tau + config.pulse_width_s >= config.pri_s {
        return Err(CoreError::parameter(
            "pulse truncation: tau + Tp must stay inside the PRI",
        ));
    }
    let fs = config.sample_rate_hz;
    let len = config.fast_time_len();
    let delay = (tau * fs).round() as usize;
    let fd = doppler_frequency(velocity, config.carrier_hz);
    let at = steering_vector(theta, config.num_tx);
    // All transmit channels share the LFM envelope; channel weighting collapses
    // to one complex factor per element.
    let pulse = lfm_baseband(config.pulse_width_s, config.bandwidth_hz, fs, config.chirp_sign)?;
    let gain: Complex64 = config
        .tx_weights
        .iter()
        .zip(at.iter())
        .map(|(w, a)| w.conj() * a)
        .sum();

    let mut samples = vec![Complex64::new(0.0, 0.0); len];
    for (i, &x) in pulse.samples.iter().enumerate() {
        let n = delay + i;
        if n >= len {
            break;
        }
        let t = n as f64 / fs;
        let doppler = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * fd * t);
        samples[n] = doppler * gain * x;
    }
    Ok(ComplexSeries { samples, sample_rate_hz: fs })
}
