//! Orthogonal Matching Pursuit over an [`AtomBank`]: greedy atom selection by
//! quadrature correlation, full least-squares refit of all selected atoms via
//! an incrementally updated QR factorization, and residual update until a
//! stopping rule fires.
//!
//! The correlation scan over the dictionary is data-parallel; with the
//! `parallel` feature it runs on rayon, otherwise sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::{AtomBank, AtomWaveforms};
use crate::error::{Error, Result};
use crate::signal_model::SampledSignal;

/// Stopping rules and scan options for one OMP run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OmpConfig {
    /// Hard cap on iterations.
    pub max_iterations: usize,
    /// Stop when the relative residual-energy decrease of an iteration falls
    /// below this fraction; the atom of that iteration is discarded.
    pub energy_variation_threshold: f64,
    /// Stop when residual energy falls below this fraction of the input energy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absolute_residual_threshold: Option<f64>,
    /// Divide correlations by the per-atom column norm so unequal-duration
    /// atoms compete fairly.
    pub normalize_correlation: bool,
}

impl Default for OmpConfig {
    fn default() -> Self {
        Self {
            max_iterations: 16,
            energy_variation_threshold: 0.01,
            absolute_residual_threshold: Some(1e-6),
            normalize_correlation: true,
        }
    }
}

impl OmpConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidScenario("max_iterations must be >= 1".into()));
        }
        let ok = |x: f64| x > 0.0 && x < 1.0;
        if !ok(self.energy_variation_threshold) {
            return Err(Error::InvalidScenario(
                "energy_variation_threshold must be in (0, 1)".into(),
            ));
        }
        if let Some(t) = self.absolute_residual_threshold {
            if !ok(t) {
                return Err(Error::InvalidScenario(
                    "absolute_residual_threshold must be in (0, 1)".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Why a run terminated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxIterations,
    ResidualThreshold,
    EnergyVariation,
    RankDeficient,
}

/// Complex coefficient of one selected atom, realized as a sine/cosine pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomCoefficient {
    pub atom_index: usize,
    pub in_phase: f64,
    pub quadrature: f64,
}

impl AtomCoefficient {
    pub fn magnitude(&self) -> f64 {
        (self.in_phase * self.in_phase + self.quadrature * self.quadrature).sqrt()
    }

    pub fn phase(&self) -> f64 {
        self.quadrature.atan2(self.in_phase)
    }
}

/// Support set, coefficients, residual, and per-iteration energy accounting.
#[derive(Debug, Clone)]
pub struct OmpResult {
    pub support: Vec<usize>,
    pub coefficients: Vec<AtomCoefficient>,
    pub residual: SampledSignal,
    pub reconstruction: SampledSignal,
    pub iterations_run: usize,
    /// Input energy followed by the residual energy after each kept iteration.
    pub residual_energy_history: Vec<f64>,
    pub stop_reason: StopReason,
}

/// Argmax over atoms of the correlation score with the residual.
/// Ties break to the lowest index; an all-zero residual returns index 0.
pub fn correlate_select<B: AtomBank>(bank: &B, residual: &SampledSignal, normalized: bool) -> (usize, f64) {
    #[cfg(feature = "parallel")]
    {
        correlate_select_par(bank, residual, normalized)
    }
    #[cfg(not(feature = "parallel"))]
    {
        correlate_select_seq(bank, residual, normalized)
    }
}

/// Sequential scan; also the reference side of the parallel/sequential benches.
pub fn correlate_select_seq<B: AtomBank>(
    bank: &B,
    residual: &SampledSignal,
    normalized: bool,
) -> (usize, f64) {
    let mut best = (0usize, f64::NEG_INFINITY);
    for idx in 0..bank.num_atoms() {
        let score = bank.correlate(idx, &residual.samples).score(normalized);
        if score > best.1 {
            best = (idx, score);
        }
    }
    if best.1 == f64::NEG_INFINITY {
        (0, 0.0)
    } else {
        best
    }
}

/// Rayon scan with an argmax reduction; tie-breaking is deterministic because
/// equal scores always resolve to the lower index regardless of chunking.
#[cfg(feature = "parallel")]
pub fn correlate_select_par<B: AtomBank>(
    bank: &B,
    residual: &SampledSignal,
    normalized: bool,
) -> (usize, f64) {
    (0..bank.num_atoms())
        .into_par_iter()
        .map(|idx| (idx, bank.correlate(idx, &residual.samples).score(normalized)))
        .reduce(
            || (0usize, f64::NEG_INFINITY),
            |a, b| {
                if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        )
}

/// Incremental thin-QR of the selected real column pairs (modified
/// Gram-Schmidt), supporting append and rollback of the newest pair.
struct IncrementalQr {
    n: usize,
    /// Orthonormal columns.
    q: Vec<Vec<f64>>,
    /// Upper-triangular factor, column-major: r[j] has j+1 entries.
    r: Vec<Vec<f64>>,
}

impl IncrementalQr {
    fn new(n: usize) -> Self {
        Self {
            n,
            q: Vec::new(),
            r: Vec::new(),
        }
    }

    fn push_column(&mut self, col: &[f64]) -> Result<()> {
        assert_eq!(col.len(), self.n);
        let orig_norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut v = col.to_vec();
        let mut r_col = Vec::with_capacity(self.q.len() + 1);
        for q in &self.q {
            let dot: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= dot * qi;
            }
            r_col.push(dot);
        }
        // second MGS pass for orthogonality at high dynamic range
        for (j, q) in self.q.iter().enumerate() {
            let dot: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= dot * qi;
            }
            r_col[j] += dot;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= orig_norm * 1e-10 || norm == 0.0 {
            return Err(Error::RankDeficient);
        }
        for vi in &mut v {
            *vi /= norm;
        }
        r_col.push(norm);
        self.q.push(v);
        self.r.push(r_col);
        Ok(())
    }

    fn pop_column(&mut self) {
        self.q.pop();
        self.r.pop();
    }

    /// Solves R w = Q^T y by back substitution.
    fn solve(&self, y: &[f64]) -> Vec<f64> {
        let m = self.q.len();
        let qty: Vec<f64> = self
            .q
            .iter()
            .map(|q| q.iter().zip(y).map(|(a, b)| a * b).sum())
            .collect();
        let mut w = vec![0.0; m];
        for j in (0..m).rev() {
            let mut acc = qty[j];
            for i in (j + 1)..m {
                acc -= self.r[i][j] * w[i];
            }
            w[j] = acc / self.r[j][j];
        }
        w
    }
}

fn full_column(wave: &AtomWaveforms, component: usize, n: usize) -> Vec<f64> {
    let mut col = vec![0.0; n];
    let src = if component == 0 {
        &wave.in_phase
    } else {
        &wave.quadrature
    };
    col[wave.start..wave.start + src.len()].copy_from_slice(src);
    col
}

/// Least-squares coefficients minimizing `||y - E w||_2` over the sine/cosine
/// column pairs of the given atoms.
pub fn least_squares_fit(atoms: &[AtomWaveforms], y: &SampledSignal) -> Result<Vec<(f64, f64)>> {
    let n = y.len();
    let mut qr = IncrementalQr::new(n);
    for wave in atoms {
        qr.push_column(&full_column(wave, 0, n))?;
        qr.push_column(&full_column(wave, 1, n))?;
    }
    let w = qr.solve(&y.samples);
    Ok(w.chunks(2).map(|c| (c[0], c[1])).collect())
}

/// Full OMP loop: select, refit, update residual, check stopping rules.
pub fn omp_run<B: AtomBank>(bank: &B, y: &SampledSignal, config: &OmpConfig) -> Result<OmpResult> {
    config.validate()?;
    let n = bank.signal_len();
    if y.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if !y.all_finite() {
        return Err(Error::InvalidScenario("input signal has non-finite samples".into()));
    }

    let input_energy = y.energy();
    let mut qr = IncrementalQr::new(n);
    let mut support: Vec<usize> = Vec::new();
    let mut selected_waves: Vec<AtomWaveforms> = Vec::new();
    let mut residual = y.clone();
    let mut reconstruction = SampledSignal::zeros(n, y.sample_rate);
    let mut coefficients: Vec<AtomCoefficient> = Vec::new();
    let mut history = vec![input_energy];
    let mut iterations_run = 0;
    let stop_reason;

    let rebuild = |w: &[f64], waves: &[AtomWaveforms], support: &[usize]| {
        let mut recon = SampledSignal::zeros(n, y.sample_rate);
        let mut coeffs = Vec::with_capacity(support.len());
        for (i, (wave, &idx)) in waves.iter().zip(support).enumerate() {
            let (ai, aq) = (w[2 * i], w[2 * i + 1]);
            wave.accumulate(ai, aq, &mut recon.samples);
            coeffs.push(AtomCoefficient {
                atom_index: idx,
                in_phase: ai,
                quadrature: aq,
            });
        }
        (recon, coeffs)
    };

    loop {
        let last_energy = *history.last().unwrap();
        if let Some(t) = config.absolute_residual_threshold {
            if last_energy <= t * input_energy {
                stop_reason = StopReason::ResidualThreshold;
                break;
            }
        }
        if iterations_run >= config.max_iterations {
            stop_reason = StopReason::MaxIterations;
            break;
        }

        let (m, score) = correlate_select(bank, &residual, config.normalize_correlation);
        if score <= 0.0 || support.contains(&m) {
            // nothing left to explain (or numerical stall): stop without adding
            stop_reason = StopReason::EnergyVariation;
            break;
        }
        iterations_run += 1;

        let wave = bank.waveforms(m)?;
        let col_i = full_column(&wave, 0, n);
        let col_q = full_column(&wave, 1, n);
        if qr.push_column(&col_i).is_err() {
            stop_reason = StopReason::RankDeficient;
            break;
        }
        if qr.push_column(&col_q).is_err() {
            qr.pop_column();
            stop_reason = StopReason::RankDeficient;
            break;
        }
        support.push(m);
        selected_waves.push(wave);

        let w = qr.solve(&y.samples);
        let (recon, coeffs) = rebuild(&w, &selected_waves, &support);
        let new_residual = y.sub(&recon);
        let mut new_energy = new_residual.energy();
        // clamp sub-epsilon upticks from the floating-point refit
        if new_energy > last_energy && new_energy < last_energy * (1.0 + 1e-12) {
            new_energy = last_energy;
        }

        let rel_decrease = if last_energy > 0.0 {
            (last_energy - new_energy) / last_energy
        } else {
            0.0
        };
        if rel_decrease < config.energy_variation_threshold {
            // the atom explained too little; discard it and stop
            qr.pop_column();
            qr.pop_column();
            support.pop();
            selected_waves.pop();
            stop_reason = StopReason::EnergyVariation;
            if !support.is_empty() {
                let w = qr.solve(&y.samples);
                let (recon, coeffs) = rebuild(&w, &selected_waves, &support);
                residual = y.sub(&recon);
                reconstruction = recon;
                coefficients = coeffs;
            }
            break;
        }

        residual = new_residual;
        reconstruction = recon;
        coefficients = coeffs;
        history.push(new_energy);
    }

    Ok(OmpResult {
        support,
        coefficients,
        residual,
        reconstruction,
        iterations_run,
        residual_energy_history: history,
        stop_reason,
    })
}
