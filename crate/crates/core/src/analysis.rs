//! Range-spectrum computation and SNIR metrics for before/after comparisons.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_model::SampledSignal;

/// Numerical floor for dB conversion of zero power.
pub const DB_FLOOR: f64 = -300.0;

/// Guard cells excluded around target bins when estimating the floor.
pub const FLOOR_GUARD_BINS: usize = 3;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum WindowKind {
    Rectangular,
    #[default]
    Hann,
}

impl WindowKind {
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::Rectangular => vec![1.0; n],
            WindowKind::Hann => (0..n)
                .map(|i| {
                    let x = std::f64::consts::PI * i as f64 / (n - 1) as f64;
                    x.sin() * x.sin()
                })
                .collect(),
        }
    }
}

/// One-sided power spectrum of a real baseband chirp, coherent-gain compensated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RangeSpectrum {
    /// Power per bin (dB), length N/2 + 1.
    pub power_db: Vec<f64>,
    /// Bin center frequencies (Hz).
    pub bin_freqs: Vec<f64>,
    pub window: WindowKind,
    /// One-sided squared magnitudes scaled so that, with a rectangular window,
    /// they sum to the time-domain energy (Parseval).
    pub parseval_power: Vec<f64>,
}

impl RangeSpectrum {
    pub fn num_bins(&self) -> usize {
        self.power_db.len()
    }

    /// Bin spacing (Hz).
    pub fn bin_width(&self) -> f64 {
        self.bin_freqs[1] - self.bin_freqs[0]
    }

    /// Range axis in meters for a chirp of the given slope: r = f c / (2 k).
    pub fn range_axis(&self, slope: f64) -> Vec<f64> {
        self.bin_freqs
            .iter()
            .map(|f| f * SPEED_OF_LIGHT / (2.0 * slope))
            .collect()
    }

    /// Sum of the Parseval-scaled one-sided powers.
    pub fn total_power(&self) -> f64 {
        self.parseval_power.iter().sum()
    }
}

/// Windowed one-sided power spectrum in dB. The coherent gain of the window is
/// compensated so a bin-centered tone peaks at the same level for any window.
pub fn range_spectrum(signal: &SampledSignal, window: WindowKind) -> RangeSpectrum {
    let n = signal.len();
    assert!(n >= 2, "need at least 2 samples");
    let w = window.coefficients(n);
    let coherent_gain: f64 = w.iter().sum();

    let mut buf: Vec<Complex<f64>> = signal
        .samples
        .iter()
        .zip(&w)
        .map(|(s, wi)| Complex::new(s * wi, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let bins = n / 2 + 1;
    let bin_hz = signal.sample_rate / n as f64;
    let mut power_db = Vec::with_capacity(bins);
    let mut parseval_power = Vec::with_capacity(bins);
    let mut bin_freqs = Vec::with_capacity(bins);
    for k in 0..bins {
        let double = if k == 0 || (n % 2 == 0 && k == n / 2) {
            1.0
        } else {
            2.0
        };
        let mag_sq = buf[k].norm_sqr();
        // amplitude estimate a = double * |X| / coherent_gain
        let amp_sq = double * double * mag_sq / (coherent_gain * coherent_gain);
        power_db.push(if amp_sq > 0.0 {
            (10.0 * amp_sq.log10()).max(DB_FLOOR)
        } else {
            DB_FLOOR
        });
        // Parseval scaling: sum_k c_k |X_k|^2 / n equals the time-domain
        // energy for the rectangular window
        parseval_power.push(double * mag_sq / n as f64);
        bin_freqs.push(k as f64 * bin_hz);
    }
    RangeSpectrum {
        power_db,
        bin_freqs,
        window,
        parseval_power,
    }
}

/// Peak-over-median SNIR of a spectrum given known or detected target bins.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnirEstimate {
    pub target_bins: Vec<usize>,
    pub signal_power_db: f64,
    /// Median of non-target bins (targets and guard cells excluded).
    pub floor_db: f64,
    pub snir_db: f64,
}

pub fn snir_estimate(spectrum: &RangeSpectrum, target_bins: &[usize]) -> SnirEstimate {
    let bins = spectrum.num_bins();
    let mut excluded = vec![false; bins];
    for &b in target_bins {
        let lo = b.saturating_sub(FLOOR_GUARD_BINS);
        let hi = (b + FLOOR_GUARD_BINS).min(bins - 1);
        for cell in excluded.iter_mut().take(hi + 1).skip(lo) {
            *cell = true;
        }
    }
    let signal_power_db = target_bins
        .iter()
        .map(|&b| spectrum.power_db[b])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut floor_bins: Vec<f64> = spectrum
        .power_db
        .iter()
        .zip(&excluded)
        .filter(|(_, &ex)| !ex)
        .map(|(&p, _)| p)
        .collect();
    floor_bins.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let floor_db = if floor_bins.is_empty() {
        DB_FLOOR
    } else {
        let mid = floor_bins.len() / 2;
        if floor_bins.len() % 2 == 0 {
            0.5 * (floor_bins[mid - 1] + floor_bins[mid])
        } else {
            floor_bins[mid]
        }
    };
    SnirEstimate {
        target_bins: target_bins.to_vec(),
        signal_power_db,
        floor_db,
        snir_db: signal_power_db - floor_db,
    }
}

/// Before/after (and optionally versus-reference) spectral comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// after - before, per bin (dB).
    pub per_bin_delta_db: Vec<f64>,
    pub snir_before_db: f64,
    pub snir_after_db: f64,
    pub snir_improvement_db: f64,
    /// Max absolute gap between after and reference at the target bins (dB).
    pub gap_to_reference_db: Option<f64>,
}

pub fn compare_runs(
    before: &RangeSpectrum,
    after: &RangeSpectrum,
    reference: Option<&RangeSpectrum>,
    target_bins: &[usize],
) -> Result<ComparisonReport> {
    if before.num_bins() != after.num_bins() {
        return Err(Error::LengthMismatch {
            expected: before.num_bins(),
            got: after.num_bins(),
        });
    }
    if let Some(r) = reference {
        if r.num_bins() != before.num_bins() {
            return Err(Error::LengthMismatch {
                expected: before.num_bins(),
                got: r.num_bins(),
            });
        }
    }
    let per_bin_delta_db = after
        .power_db
        .iter()
        .zip(&before.power_db)
        .map(|(a, b)| a - b)
        .collect();
    let snir_before_db = snir_estimate(before, target_bins).snir_db;
    let snir_after_db = snir_estimate(after, target_bins).snir_db;
    let gap_to_reference_db = reference.map(|r| {
        target_bins
            .iter()
            .map(|&b| (after.power_db[b] - r.power_db[b]).abs())
            .fold(0.0, f64::max)
    });
    Ok(ComparisonReport {
        per_bin_delta_db,
        snir_before_db,
        snir_after_db,
        snir_improvement_db: snir_after_db - snir_before_db,
        gap_to_reference_db,
    })
}

/// Index of the strongest bin, skipping the first `skip` near-DC bins.
pub fn peak_bin(spectrum: &RangeSpectrum, skip: usize) -> usize {
    spectrum
        .power_db
        .iter()
        .enumerate()
        .skip(skip)
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(n: usize, fs: f64, freq: f64, amp: f64) -> SampledSignal {
        SampledSignal {
            samples: (0..n)
                .map(|i| amp * (2.0 * PI * freq * i as f64 / fs).sin())
                .collect(),
            sample_rate: fs,
        }
    }

    #[test]
    fn rect_tone_peaks_at_its_bin() {
        let n = 512;
        let fs = 1e6;
        let bin = 37;
        let s = tone(n, fs, bin as f64 * fs / n as f64, 1.0);
        let sp = range_spectrum(&s, WindowKind::Rectangular);
        assert_eq!(peak_bin(&sp, 0), bin);
        // amplitude 1 tone -> 10*log10(1) = 0 dB after gain compensation
        assert!(sp.power_db[bin].abs() < 1e-6);
    }

    #[test]
    fn zero_signal_floors_out() {
        let s = SampledSignal::zeros(128, 1e6);
        let sp = range_spectrum(&s, WindowKind::Rectangular);
        assert!(sp.power_db.iter().all(|&p| p == DB_FLOOR));
    }

    #[test]
    fn hann_peak_matches_rect_after_gain_compensation() {
        let n = 1024;
        let fs = 1e6;
        let bin = 100;
        let s = tone(n, fs, bin as f64 * fs / n as f64, 0.5);
        let rect = range_spectrum(&s, WindowKind::Rectangular);
        let hann = range_spectrum(&s, WindowKind::Hann);
        // oracle: closed-form coherent gain sum(w)/N already folded in
        assert!((rect.power_db[bin] - hann.power_db[bin]).abs() < 0.1);
    }

    #[test]
    fn parseval_identity_rectangular() {
        let s = SampledSignal {
            samples: (0..300).map(|n| ((n * 37 + 11) % 83) as f64 / 41.5 - 1.0).collect(),
            sample_rate: 1e6,
        };
        let sp = range_spectrum(&s, WindowKind::Rectangular);
        let rel = (sp.total_power() - s.energy()).abs() / s.energy();
        assert!(rel < 1e-6, "parseval mismatch: {rel}");
    }

    #[test]
    fn one_sided_fold_matches_full_dft() {
        let n = 64;
        let s = SampledSignal {
            samples: (0..n).map(|i| ((i * 7 + 3) % 13) as f64 - 6.0).collect(),
            sample_rate: 1e3,
        };
        let sp = range_spectrum(&s, WindowKind::Rectangular);
        // full-DFT oracle
        for k in 0..=n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, x) in s.samples.iter().enumerate() {
                let ang = -2.0 * PI * (k * i) as f64 / n as f64;
                re += x * ang.cos();
                im += x * ang.sin();
            }
            let double = if k == 0 || k == n / 2 { 1.0 } else { 2.0 };
            let expected = double * (re * re + im * im) / n as f64;
            assert!((sp.parseval_power[k] - expected).abs() < 1e-6 * expected.max(1.0));
        }
    }

    #[test]
    fn snir_of_known_tone_over_noise() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let n = 2048;
        let fs = 1e6;
        let bin = 300;
        let amp = 1.0;
        let noise_std = 0.1;
        let mut s = tone(n, fs, bin as f64 * fs / n as f64, amp);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(0.0, noise_std).unwrap();
        for x in &mut s.samples {
            *x += normal.sample(&mut rng);
        }
        let sp = range_spectrum(&s, WindowKind::Rectangular);
        let est = snir_estimate(&sp, &[bin]);
        // oracle: tone power amp^2, per-bin noise power amp_sq of a noise bin
        // = 2 * sigma^2 / N up to median-vs-mean bias
        let expected = 10.0 * (amp * amp / (2.0 * noise_std * noise_std / n as f64)).log10();
        assert!(
            (est.snir_db - expected).abs() < 1.6,
            "snir {} vs expected {expected}",
            est.snir_db
        );
    }

    #[test]
    fn single_tone_no_noise_caps_at_guard() {
        let n = 256;
        let fs = 1e6;
        let bin = 32;
        let s = tone(n, fs, bin as f64 * fs / n as f64, 1.0);
        let sp = range_spectrum(&s, WindowKind::Rectangular);
        let est = snir_estimate(&sp, &[bin]);
        assert!(est.floor_db <= DB_FLOOR + 150.0);
        assert!(est.snir_db > 200.0);
    }

    #[test]
    fn compare_identity_and_reference() {
        let s = tone(256, 1e6, 5e4, 1.0);
        let sp = range_spectrum(&s, WindowKind::Hann);
        let rep = compare_runs(&sp, &sp, Some(&sp), &[13]).unwrap();
        assert!(rep.per_bin_delta_db.iter().all(|&d| d == 0.0));
        assert_eq!(rep.snir_improvement_db, 0.0);
        assert_eq!(rep.gap_to_reference_db, Some(0.0));

        let short = range_spectrum(&tone(128, 1e6, 5e4, 1.0), WindowKind::Hann);
        assert!(compare_runs(&sp, &short, None, &[13]).is_err());
    }
}
