//! Windowed-sinc FIR high-pass design and application, used to suppress
//! near-DC cross-talk before mitigation. The same taps are applied to the
//! measurement and to every dictionary hypothesis.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_model::{ReceiverConfig, SampledSignal};

/// Linear-phase FIR high-pass filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCoeffs {
    pub taps: Vec<f64>,
    /// -6 dB cutoff frequency (Hz).
    pub cutoff: f64,
    /// Transition bandwidth the design targeted (Hz).
    pub transition_width: f64,
}

impl FilterCoeffs {
    /// Single unit tap; passes signals through unchanged.
    pub fn identity() -> Self {
        Self {
            taps: vec![1.0],
            cutoff: 0.0,
            transition_width: 0.0,
        }
    }

    /// DC gain (sum of taps); near zero for high-pass designs.
    pub fn dc_gain(&self) -> f64 {
        self.taps.iter().sum()
    }

    /// Complex magnitude response at frequency `f` for sample rate `fs`.
    pub fn magnitude_at(&self, f: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * f / fs;
        let (mut re, mut im) = (0.0, 0.0);
        for (n, &h) in self.taps.iter().enumerate() {
            re += h * (w * n as f64).cos();
            im -= h * (w * n as f64).sin();
        }
        (re * re + im * im).sqrt()
    }
}

/// Designs a Hamming-windowed-sinc high-pass by spectral inversion of a
/// unit-DC-gain low-pass, so the DC gain is zero up to rounding.
pub fn design_highpass(
    cutoff: f64,
    transition_width: f64,
    receiver: &ReceiverConfig,
) -> Result<FilterCoeffs> {
    if !(cutoff > 0.0) || cutoff >= receiver.cutoff {
        return Err(Error::InvalidCutoff(cutoff));
    }
    let tw = if transition_width > 0.0 {
        transition_width
    } else {
        cutoff
    };
    // Hamming window needs ~3.3 / (tw / fs) taps for the target transition
    let mut num_taps = (3.3 * receiver.sample_rate / tw).ceil() as usize;
    if num_taps % 2 == 0 {
        num_taps += 1;
    }
    num_taps = num_taps.clamp(11, receiver.num_samples | 1);
    if num_taps % 2 == 0 {
        num_taps -= 1;
    }
    let mid = (num_taps - 1) / 2;
    let fc = cutoff / receiver.sample_rate;
    let mut lowpass: Vec<f64> = (0..num_taps)
        .map(|n| {
            let m = n as f64 - mid as f64;
            let sinc = if m == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * m).sin() / (PI * m)
            };
            let window = 0.54 - 0.46 * (2.0 * PI * n as f64 / (num_taps - 1) as f64).cos();
            sinc * window
        })
        .collect();
    let dc: f64 = lowpass.iter().sum();
    for h in &mut lowpass {
        *h /= dc;
    }
    let taps: Vec<f64> = lowpass
        .iter()
        .enumerate()
        .map(|(n, &h)| if n == mid { 1.0 - h } else { -h })
        .collect();
    Ok(FilterCoeffs {
        taps,
        cutoff,
        transition_width: tw,
    })
}

/// Causal FIR convolution truncated to the input length.
pub fn apply_filter(signal: &SampledSignal, filter: &FilterCoeffs) -> SampledSignal {
    let n = signal.len();
    let mut out = vec![0.0; n];
    for (i, y) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &h) in filter.taps.iter().enumerate() {
            if j > i {
                break;
            }
            acc += h * signal.samples[i - j];
        }
        *y = acc;
    }
    SampledSignal {
        samples: out,
        sample_rate: signal.sample_rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_model::WaveformParams;

    fn rx() -> ReceiverConfig {
        let w = WaveformParams::new(77e9, 1e9, 1e-4).unwrap();
        ReceiverConfig::new(2e7, 2000, &w).unwrap()
    }

    #[test]
    fn dc_gain_near_zero() {
        let f = design_highpass(5e5, 2e5, &rx()).unwrap();
        assert!(f.dc_gain().abs() < 1e-3);
        assert!(f.magnitude_at(0.0, 2e7) < 1e-3);
    }

    #[test]
    fn tone_above_cutoff_passes() {
        let r = rx();
        let f = design_highpass(5e5, 2e5, &r).unwrap();
        // oracle: frequency response from the DFT of the taps
        let gain_db = 20.0 * f.magnitude_at(3e6, r.sample_rate).log10();
        assert!(gain_db.abs() < 1.0, "gain {gain_db} dB");
    }

    #[test]
    fn dc_signal_rejected() {
        let r = rx();
        let f = design_highpass(5e5, 2e5, &r).unwrap();
        let dc = SampledSignal {
            samples: vec![1.0; r.num_samples],
            sample_rate: r.sample_rate,
        };
        let out = apply_filter(&dc, &f);
        // ignore the filter warm-up transient
        let settled: f64 = out.samples[f.taps.len()..].iter().map(|s| s * s).sum();
        assert!(settled / dc.energy() < 1e-4);
    }

    #[test]
    fn identity_filter_is_transparent() {
        let r = rx();
        let sig = SampledSignal {
            samples: (0..r.num_samples).map(|n| (n as f64 * 0.01).sin()).collect(),
            sample_rate: r.sample_rate,
        };
        let out = apply_filter(&sig, &FilterCoeffs::identity());
        assert_eq!(out.samples, sig.samples);
    }

    #[test]
    fn invalid_cutoff_rejected() {
        let r = rx();
        assert!(design_highpass(0.0, 1e5, &r).is_err());
        assert!(design_highpass(r.cutoff, 1e5, &r).is_err());
    }
}
