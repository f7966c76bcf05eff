//! Baseband FMCW signal synthesis: target beat tones, chirp-like interference
//! gated by the receiver bandwidth, and seeded Gaussian noise.
//!
//! All operations are pure functions of their inputs and safe to call from any
//! number of threads.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Automotive radar band limits (advisory only; the model is frequency-agnostic).
pub const AUTOMOTIVE_BAND_HZ: (f64, f64) = (76e9, 81e9);

/// Transmit chirp parameters. The slope is pinned to `bandwidth / chirp_duration`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveformParams {
    /// Carrier frequency f_c (Hz).
    pub carrier_freq: f64,
    /// Sweep bandwidth B (Hz).
    pub bandwidth: f64,
    /// Chirp duration T (s).
    pub chirp_duration: f64,
    /// Chirp rate k = B / T (Hz/s).
    pub slope: f64,
}

impl WaveformParams {
    /// Builds waveform parameters with the slope derived as B / T.
    pub fn new(carrier_freq: f64, bandwidth: f64, chirp_duration: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::InvalidWaveform(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        if !(chirp_duration > 0.0) || !chirp_duration.is_finite() {
            return Err(Error::InvalidWaveform(format!(
                "chirp duration must be positive, got {chirp_duration}"
            )));
        }
        if !carrier_freq.is_finite() || carrier_freq < 0.0 {
            return Err(Error::InvalidWaveform(format!(
                "carrier frequency must be finite and non-negative, got {carrier_freq}"
            )));
        }
        Ok(Self {
            carrier_freq,
            bandwidth,
            chirp_duration,
            slope: bandwidth / chirp_duration,
        })
    }

    /// Builds from an explicit slope, rejecting triples inconsistent with k = B / T.
    pub fn from_parts(
        carrier_freq: f64,
        bandwidth: f64,
        chirp_duration: f64,
        slope: f64,
    ) -> Result<Self> {
        let wf = Self::new(carrier_freq, bandwidth, chirp_duration)?;
        let rel = (slope - wf.slope).abs() / wf.slope.abs().max(1.0);
        if rel > 1e-9 {
            return Err(Error::InvalidWaveform(format!(
                "slope {slope:.6e} inconsistent with B/T = {:.6e}",
                wf.slope
            )));
        }
        Ok(wf)
    }

    /// Advisory check against the 76-81 GHz automotive band.
    pub fn band_warning(&self) -> Option<String> {
        let (lo, hi) = AUTOMOTIVE_BAND_HZ;
        if self.carrier_freq < lo || self.carrier_freq > hi {
            Some(format!(
                "carrier frequency {:.3e} Hz outside the automotive band [{lo:.0e}, {hi:.0e}]",
                self.carrier_freq
            ))
        } else {
            None
        }
    }
}

/// Receiver sampling and anti-alias filter characteristics.
/// The pass frequency is pinned to f_s / 2 (perfect anti-alias assumption).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverConfig {
    /// Sample rate f_s (Hz).
    pub sample_rate: f64,
    /// Number of samples N within one chirp.
    pub num_samples: usize,
    /// Anti-alias pass frequency f_r = f_s / 2 (Hz).
    pub cutoff: f64,
}

impl ReceiverConfig {
    pub fn new(sample_rate: f64, num_samples: usize, waveform: &WaveformParams) -> Result<Self> {
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(Error::InvalidReceiver(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if num_samples < 2 {
            return Err(Error::InvalidReceiver(format!(
                "need at least 2 samples, got {num_samples}"
            )));
        }
        let span = num_samples as f64 / sample_rate;
        // allow a one-sample slack so N = f_s * T fits exactly
        if span > waveform.chirp_duration * (1.0 + 1e-9) + 1.0 / sample_rate {
            return Err(Error::InvalidReceiver(format!(
                "sample window {span:.3e} s exceeds chirp duration {:.3e} s",
                waveform.chirp_duration
            )));
        }
        Ok(Self {
            sample_rate,
            num_samples,
            cutoff: sample_rate / 2.0,
        })
    }

    /// Sample instant of sample n, with t = 0 at the first sample of the chirp.
    #[inline]
    pub fn sample_time(&self, n: usize) -> f64 {
        n as f64 / self.sample_rate
    }
}

/// One target echo: a beat tone at frequency k * tau.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetEcho {
    /// Two-way propagation delay tau_t (s).
    pub delay: f64,
    /// Linear echo amplitude P_t.
    pub amplitude: f64,
}

impl TargetEcho {
    pub fn new(delay: f64, amplitude: f64) -> Result<Self> {
        if !(delay >= 0.0) || !delay.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "target delay must be non-negative, got {delay}"
            )));
        }
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "target amplitude must be positive, got {amplitude}"
            )));
        }
        Ok(Self { delay, amplitude })
    }

    /// Beat frequency k * tau_t (Hz).
    pub fn beat_freq(&self, waveform: &WaveformParams) -> f64 {
        waveform.slope * self.delay
    }

    /// Warns when the beat tone falls above the anti-alias cutoff.
    pub fn filter_warning(
        &self,
        waveform: &WaveformParams,
        receiver: &ReceiverConfig,
    ) -> Option<String> {
        let fb = self.beat_freq(waveform);
        if fb >= receiver.cutoff {
            Some(format!(
                "target beat frequency {fb:.3e} Hz at or above cutoff {:.3e} Hz; \
                 the tone is filtered out in a real receiver",
                receiver.cutoff
            ))
        } else {
            None
        }
    }
}

/// One FMCW/CW interferer as seen by the victim receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceSource {
    /// Interferer chirp rate k_i (Hz/s). May equal the reference slope (CW-like case).
    pub slope: f64,
    /// Interferer delay tau_i (s); may be negative (interferer chirp started late).
    pub delay: f64,
    /// Linear amplitude P_i.
    pub amplitude: f64,
}

impl InterferenceSource {
    pub fn new(slope: f64, delay: f64, amplitude: f64) -> Result<Self> {
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "interferer amplitude must be positive, got {amplitude}"
            )));
        }
        if !slope.is_finite() || !delay.is_finite() {
            return Err(Error::InvalidScenario(
                "interferer slope and delay must be finite".into(),
            ));
        }
        Ok(Self {
            slope,
            delay,
            amplitude,
        })
    }
}

/// A full synthetic measurement: sources, noise level, and RNG seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub waveform: WaveformParams,
    pub receiver: ReceiverConfig,
    #[serde(default)]
    pub targets: Vec<TargetEcho>,
    #[serde(default)]
    pub interferers: Vec<InterferenceSource>,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

impl Scenario {
    /// Collects advisory warnings (band check, filtered-out targets).
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(w) = self.waveform.band_warning() {
            out.push(w);
        }
        for t in &self.targets {
            if let Some(w) = t.filter_warning(&self.waveform, &self.receiver) {
                out.push(w);
            }
        }
        out
    }

    /// Copy with all interferers stripped, for reference comparisons.
    pub fn without_interference(&self) -> Scenario {
        Scenario {
            interferers: Vec::new(),
            ..self.clone()
        }
    }
}

/// Real-valued baseband samples on the uniform grid t_n = n / f_s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSignal {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
}

impl SampledSignal {
    pub fn zeros(len: usize, sample_rate: f64) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sum of squared samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    /// Elementwise sum; panics on length mismatch.
    pub fn add_assign(&mut self, other: &SampledSignal) {
        assert_eq!(self.len(), other.len());
        for (a, b) in self.samples.iter_mut().zip(&other.samples) {
            *a += b;
        }
    }

    /// Elementwise difference `self - other`.
    pub fn sub(&self, other: &SampledSignal) -> SampledSignal {
        assert_eq!(self.len(), other.len());
        SampledSignal {
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a - b)
                .collect(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.samples.iter().all(|s| s.is_finite())
    }
}

/// Beat tone of a single target echo after down-conversion:
/// `P_t * sin(pi k (tau^2 - 2 t tau) + 2 pi f_c tau)`.
pub fn target_baseband(
    waveform: &WaveformParams,
    target: &TargetEcho,
    receiver: &ReceiverConfig,
) -> SampledSignal {
    target_baseband_with_phase(waveform, target, receiver, 0.0)
}

/// Target tone with an extra constant phase, used for synthetic-Doppler frames.
pub fn target_baseband_with_phase(
    waveform: &WaveformParams,
    target: &TargetEcho,
    receiver: &ReceiverConfig,
    extra_phase: f64,
) -> SampledSignal {
    let k = waveform.slope;
    let tau = target.delay;
    let const_phase = PI * k * tau * tau + 2.0 * PI * waveform.carrier_freq * tau + extra_phase;
    let omega = -2.0 * PI * k * tau; // radians per second
    let samples = (0..receiver.num_samples)
        .map(|n| {
            let t = receiver.sample_time(n);
            target.amplitude * (const_phase + omega * t).sin()
        })
        .collect();
    SampledSignal {
        samples,
        sample_rate: receiver.sample_rate,
    }
}

/// Time interval within the chirp where a baseband interferer passes the
/// anti-alias filter. Outside this interval the interference is exactly zero.
///
/// For the CW-like degenerate case `k_i == k` the instantaneous frequency is
/// constant and the support is the whole chirp.
pub fn interference_support(
    waveform: &WaveformParams,
    interferer: &InterferenceSource,
    receiver: &ReceiverConfig,
) -> (f64, f64) {
    let t_max = waveform.chirp_duration;
    let dk = interferer.slope - waveform.slope;
    if dk == 0.0 {
        return (0.0, t_max);
    }
    let center = interferer.slope * interferer.delay / dk;
    let half = (receiver.cutoff / dk).abs();
    let (a, b) = (center - half, center + half);
    let start = a.max(0.0);
    let end = b.min(t_max);
    if start > end {
        // no overlap with the chirp; collapse to an empty interval
        let p = start.clamp(0.0, t_max);
        (p, p)
    } else {
        (start, end)
    }
}

/// Baseband interference chirp, gated to its anti-alias support:
/// `P_i * sin(pi ((k_i - k) t^2 - 2 k_i t tau_i + k_i tau_i^2) + 2 pi f_c tau_i)`
/// inside the support interval, exactly zero outside.
pub fn interference_baseband(
    waveform: &WaveformParams,
    interferer: &InterferenceSource,
    receiver: &ReceiverConfig,
) -> SampledSignal {
    let (t_start, t_end) = interference_support(waveform, interferer, receiver);
    let mut out = SampledSignal::zeros(receiver.num_samples, receiver.sample_rate);
    if t_end <= t_start {
        return out;
    }
    let dk = interferer.slope - waveform.slope;
    let ki = interferer.slope;
    let tau = interferer.delay;
    let const_phase = PI * ki * tau * tau + 2.0 * PI * waveform.carrier_freq * tau;
    let n_start = (t_start * receiver.sample_rate).ceil() as usize;
    let n_end = ((t_end * receiver.sample_rate).floor() as usize).min(receiver.num_samples - 1);
    for n in n_start..=n_end.min(receiver.num_samples - 1) {
        let t = receiver.sample_time(n);
        let phase = PI * (dk * t * t - 2.0 * ki * t * tau) + const_phase;
        out.samples[n] = interferer.amplitude * phase.sin();
    }
    out
}

/// Full synthetic measurement: sum of all target tones and gated interference
/// chirps plus seeded white Gaussian noise. Deterministic for a fixed scenario.
pub fn synthesize_scenario(scenario: &Scenario) -> SampledSignal {
    synthesize_chirp(scenario, 0, 0.0)
}

/// Frame of `num_chirps` chirps sharing the scenario's sources, with the target
/// phase rotated by `phase_step` radians per chirp (synthetic Doppler). Noise is
/// redrawn per chirp from a seed derived from the scenario seed and chirp index.
pub fn synthesize_frame(scenario: &Scenario, num_chirps: usize, phase_step: f64) -> Vec<SampledSignal> {
    (0..num_chirps)
        .map(|m| synthesize_chirp(scenario, m as u64, m as f64 * phase_step))
        .collect()
}

fn synthesize_chirp(scenario: &Scenario, chirp_index: u64, target_phase: f64) -> SampledSignal {
    let rx = &scenario.receiver;
    let mut out = SampledSignal::zeros(rx.num_samples, rx.sample_rate);
    for t in &scenario.targets {
        out.add_assign(&target_baseband_with_phase(
            &scenario.waveform,
            t,
            rx,
            target_phase,
        ));
    }
    for i in &scenario.interferers {
        out.add_assign(&interference_baseband(&scenario.waveform, i, rx));
    }
    if scenario.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed.wrapping_add(chirp_index));
        let normal = Normal::new(0.0, scenario.noise_std).expect("valid noise std");
        for s in &mut out.samples {
            *s += normal.sample(&mut rng);
        }
    }
    out
}
