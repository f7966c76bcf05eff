//! Reduced 2-parameter chirplet dictionary: time-shift and slope hypotheses with
//! start frequency pinned to the anti-alias cutoff and duration coupled to the
//! slope by the receiver bandwidth.
//!
//! Atom waveforms are stored windowed (only the nonzero span), since a full
//! coarse grid materialized at signal length would not fit in memory. The OMP
//! engine accesses atoms through [`AtomBank`], either synthesizing them on the
//! fly from a [`DictionaryGrid`] or reading precomputed (possibly filtered)
//! waveforms from a [`MaterializedDictionary`].

use std::collections::HashSet;
use std::f64::consts::PI;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::highpass::FilterCoeffs;
use crate::signal_model::ReceiverConfig;

/// Default minimum slope magnitude: the slowest dictionary chirp sweeps at
/// least two DFT bins over the chirp, keeping pure target tones out.
pub fn default_k_min(receiver: &ReceiverConfig, chirp_duration: f64) -> f64 {
    2.0 * receiver.sample_rate / (receiver.num_samples as f64 * chirp_duration)
}

/// One time-shift/slope hypothesis of the reduced chirplet basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChirpletAtom {
    /// Window start T_tau (s).
    pub time_shift: f64,
    /// Chirp rate k_kappa (Hz/s).
    pub slope: f64,
    /// Window length, coupled to the slope: min(2 f_r / |k|, T) (s).
    pub duration: f64,
    /// Start frequency, pinned to the receiver cutoff f_r (Hz).
    pub start_freq: f64,
}

impl ChirpletAtom {
    pub fn new(
        time_shift: f64,
        slope: f64,
        receiver: &ReceiverConfig,
        chirp_duration: f64,
        k_min: f64,
    ) -> Result<Self> {
        let duration = atom_duration(slope, receiver, chirp_duration, k_min)?;
        Ok(Self {
            time_shift,
            slope,
            duration,
            start_freq: receiver.cutoff,
        })
    }

    /// Sample-index window [start, end] (inclusive) covered by this atom, or
    /// `None` when it misses the sample interval entirely.
    fn sample_window(&self, receiver: &ReceiverConfig) -> Option<(usize, usize)> {
        let fs = receiver.sample_rate;
        let n = receiver.num_samples;
        let lo = (self.time_shift * fs - 1e-9).ceil().max(0.0);
        let hi = ((self.time_shift + self.duration) * fs + 1e-9).floor();
        if hi < lo || lo >= n as f64 || hi < 0.0 {
            return None;
        }
        let start = lo as usize;
        let end = (hi as usize).min(n - 1);
        if start > end {
            None
        } else {
            Some((start, end))
        }
    }
}

/// Slope-coupled atom duration: min(|2 f_r / k|, T).
pub fn atom_duration(
    slope: f64,
    receiver: &ReceiverConfig,
    chirp_duration: f64,
    k_min: f64,
) -> Result<f64> {
    if slope.abs() < k_min {
        return Err(Error::SlopeTooSmall {
            slope,
            min: k_min,
        });
    }
    Ok((2.0 * receiver.cutoff / slope.abs()).min(chirp_duration))
}

/// Sine/cosine realization of one atom, stored over its nonzero window only.
#[derive(Debug, Clone)]
pub struct AtomWaveforms {
    /// Index of the first nonzero sample in the full-length signal.
    pub start: usize,
    /// Sine component over the window.
    pub in_phase: Vec<f64>,
    /// Cosine component over the window.
    pub quadrature: Vec<f64>,
    /// Euclidean norm of the in-phase column.
    pub norm: f64,
    /// Euclidean norm of the quadrature column.
    pub quad_norm: f64,
    /// Inner product of the two columns. Near the Nyquist rate they are far
    /// from orthogonal, so normalization needs the full 2x2 Gram matrix.
    pub cross: f64,
}

impl AtomWaveforms {
    /// Scatters `amp_i * in_phase + amp_q * quadrature` into a full-length buffer.
    pub fn accumulate(&self, amp_i: f64, amp_q: f64, out: &mut [f64]) {
        for (k, (si, sq)) in self.in_phase.iter().zip(&self.quadrature).enumerate() {
            out[self.start + k] += amp_i * si + amp_q * sq;
        }
    }

    /// Correlation of both components with a full-length residual.
    pub fn correlate(&self, residual: &[f64]) -> Correlation {
        let seg = &residual[self.start..self.start + self.in_phase.len()];
        let mut ci = 0.0;
        let mut cq = 0.0;
        for ((r, si), sq) in seg.iter().zip(&self.in_phase).zip(&self.quadrature) {
            ci += r * si;
            cq += r * sq;
        }
        Correlation {
            in_phase: ci,
            quadrature: cq,
            norm: self.norm,
            quad_norm: self.quad_norm,
            cross: self.cross,
        }
    }
}

/// Quadrature correlation of one atom with a residual.
#[derive(Debug, Clone, Copy)]
pub struct Correlation {
    pub in_phase: f64,
    pub quadrature: f64,
    pub norm: f64,
    pub quad_norm: f64,
    pub cross: f64,
}

impl Correlation {
    /// Magnitude of the quadrature correlation. When `normalized`, the norm of
    /// the orthogonal projection of the residual onto the atom's sine/cosine
    /// span (via the 2x2 Gram matrix), so degenerate pairs — mirrored slopes or
    /// truncated near-Nyquist windows — don't produce inflated scores.
    pub fn score(&self, normalized: bool) -> f64 {
        let (ci, cq) = (self.in_phase, self.quadrature);
        if !normalized {
            return (ci * ci + cq * cq).sqrt();
        }
        let gss = self.norm * self.norm;
        let gcc = self.quad_norm * self.quad_norm;
        let gsc = self.cross;
        let det = gss * gcc - gsc * gsc;
        if det > 1e-9 * gss * gcc {
            let e = (gcc * ci * ci - 2.0 * gsc * ci * cq + gss * cq * cq) / det;
            e.max(0.0).sqrt()
        } else {
            // columns (nearly) collinear: fall back to the better single column
            let a = if self.norm > 1e-12 { ci.abs() / self.norm } else { 0.0 };
            let b = if self.quad_norm > 1e-12 { cq.abs() / self.quad_norm } else { 0.0 };
            a.max(b)
        }
    }
}

/// Windowed sine/cosine pair for an atom, phase referenced to the window start:
/// `sin(2 pi (f_r (t - T_tau) + k/2 (t - T_tau)^2))`.
pub fn synthesize_atom(atom: &ChirpletAtom, receiver: &ReceiverConfig) -> Result<AtomWaveforms> {
    let (start, end) = atom.sample_window(receiver).ok_or(Error::EmptyWindow)?;
    let fs = receiver.sample_rate;
    let len = end - start + 1;
    let mut in_phase = Vec::with_capacity(len);
    let mut quadrature = Vec::with_capacity(len);
    let mut norm_sq = 0.0;
    let mut quad_sq = 0.0;
    let mut cross = 0.0;
    for n in start..=end {
        let u = n as f64 / fs - atom.time_shift;
        let phase = 2.0 * PI * (atom.start_freq * u + 0.5 * atom.slope * u * u);
        let (s, c) = phase.sin_cos();
        norm_sq += s * s;
        quad_sq += c * c;
        cross += s * c;
        in_phase.push(s);
        quadrature.push(c);
    }
    if norm_sq + quad_sq <= 0.0 {
        return Err(Error::EmptyWindow);
    }
    Ok(AtomWaveforms {
        start,
        in_phase,
        quadrature,
        norm: norm_sq.sqrt(),
        quad_norm: quad_sq.sqrt(),
        cross,
    })
}

/// Uniform access to a set of atoms for the correlation scan and refit.
pub trait AtomBank: Sync {
    fn num_atoms(&self) -> usize;
    fn signal_len(&self) -> usize;
    fn sample_rate(&self) -> f64;
    fn atom(&self, idx: usize) -> &ChirpletAtom;
    fn correlate(&self, idx: usize, residual: &[f64]) -> Correlation;
    fn waveforms(&self, idx: usize) -> Result<AtomWaveforms>;
}

/// The full hypothesis grid (matrix A), stored as parameters only.
#[derive(Debug, Clone)]
pub struct DictionaryGrid {
    pub atoms: Vec<ChirpletAtom>,
    pub slope_hypotheses: usize,
    pub time_hypotheses: usize,
    pub slope_range: (f64, f64),
    pub time_range: (f64, f64),
    pub receiver: ReceiverConfig,
    pub chirp_duration: f64,
    pub k_min: f64,
    /// Coarse cell sizes, used to span fine-search regions.
    pub slope_step: f64,
    pub time_step: f64,
    /// True when atoms form the full M_kappa x M_tau product in Eq-order
    /// (time-shift index varying fastest); false for merged fine grids.
    pub is_product: bool,
}

fn linspace(a: f64, b: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![0.5 * (a + b)];
    }
    let step = (b - a) / (m - 1) as f64;
    (0..m).map(|i| a + i as f64 * step).collect()
}

/// Slope hypothesis placement over `range` excluding the band (-k_min, k_min).
fn slope_values(range: (f64, f64), m: usize, k_min: f64) -> Result<(Vec<f64>, f64)> {
    let (lo, hi) = range;
    if !(lo < hi) {
        return Err(Error::InvalidRange(format!("empty slope range [{lo}, {hi}]")));
    }
    let neg = (lo.min(-k_min), hi.min(-k_min));
    let pos = (lo.max(k_min), hi.max(k_min));
    let has_neg = neg.0 < neg.1;
    let has_pos = pos.0 < pos.1;
    if !has_neg && !has_pos {
        return Err(Error::InvalidRange(format!(
            "slope range [{lo}, {hi}] lies inside the forbidden band (+-{k_min:.3e})"
        )));
    }
    let (mut values, step) = match (has_neg, has_pos) {
        (true, false) => {
            let v = linspace(neg.0, neg.1, m);
            (v, span_step(neg, m))
        }
        (false, true) => {
            let v = linspace(pos.0, pos.1, m);
            (v, span_step(pos, m))
        }
        (true, true) => {
            let m_neg = m / 2;
            let m_pos = m - m_neg;
            if m_neg == 0 {
                let v = linspace(pos.0, pos.1, m);
                (v, span_step(pos, m))
            } else {
                let mut v = linspace(neg.0, neg.1, m_neg);
                v.extend(linspace(pos.0, pos.1, m_pos));
                (v, span_step(neg, m_neg).max(span_step(pos, m_pos)))
            }
        }
        (false, false) => unreachable!(),
    };
    // linspace endpoints at +-k_min can round a hair into the forbidden band
    for v in &mut values {
        if v.abs() < k_min {
            *v = k_min.copysign(*v);
        }
    }
    Ok((values, step))
}

fn span_step(range: (f64, f64), m: usize) -> f64 {
    if m <= 1 {
        range.1 - range.0
    } else {
        (range.1 - range.0) / (m - 1) as f64
    }
}

/// Builds the uniform product grid of Eq-ordered atoms
/// `[c_11, ..., c_tau 1, ..., c_1 kappa, ..., c_tau kappa]`.
pub fn build_grid(
    slope_range: (f64, f64),
    time_range: (f64, f64),
    m_kappa: usize,
    m_tau: usize,
    receiver: &ReceiverConfig,
    chirp_duration: f64,
    k_min_override: Option<f64>,
) -> Result<DictionaryGrid> {
    if m_kappa < 1 || m_tau < 1 {
        return Err(Error::InvalidRange(
            "need at least one hypothesis per dimension".into(),
        ));
    }
    if !(time_range.0 <= time_range.1) {
        return Err(Error::InvalidRange(format!(
            "empty time range [{}, {}]",
            time_range.0, time_range.1
        )));
    }
    let k_min = k_min_override.unwrap_or_else(|| default_k_min(receiver, chirp_duration));
    let (slopes, slope_step) = slope_values(slope_range, m_kappa, k_min)?;
    let times = linspace(time_range.0, time_range.1, m_tau);
    let time_step = span_step(time_range, m_tau);
    let mut atoms = Vec::with_capacity(slopes.len() * times.len());
    for &k in &slopes {
        for &t in &times {
            atoms.push(ChirpletAtom::new(t, k, receiver, chirp_duration, k_min)?);
        }
    }
    Ok(DictionaryGrid {
        atoms,
        slope_hypotheses: m_kappa,
        time_hypotheses: m_tau,
        slope_range,
        time_range,
        receiver: *receiver,
        chirp_duration,
        k_min,
        slope_step,
        time_step,
        is_product: true,
    })
}

impl DictionaryGrid {
    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// Recovers (slope index, time index) from a flattened atom index.
    /// Only meaningful for product grids.
    pub fn index_to_pair(&self, idx: usize) -> (usize, usize) {
        debug_assert!(self.is_product);
        (idx / self.time_hypotheses, idx % self.time_hypotheses)
    }

    /// Flattens (slope index, time index) back to an atom index.
    pub fn pair_to_index(&self, kappa: usize, tau: usize) -> usize {
        debug_assert!(self.is_product);
        kappa * self.time_hypotheses + tau
    }

    /// Parameter hash used to key dictionary cache files.
    pub fn params_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.receiver.sample_rate.to_le_bytes());
        h.update((self.receiver.num_samples as u64).to_le_bytes());
        h.update(self.chirp_duration.to_le_bytes());
        h.update(self.k_min.to_le_bytes());
        h.update((self.atoms.len() as u64).to_le_bytes());
        for a in &self.atoms {
            h.update(a.time_shift.to_le_bytes());
            h.update(a.slope.to_le_bytes());
        }
        h.finalize().into()
    }
}

impl AtomBank for DictionaryGrid {
    fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    fn signal_len(&self) -> usize {
        self.receiver.num_samples
    }

    fn sample_rate(&self) -> f64 {
        self.receiver.sample_rate
    }

    fn atom(&self, idx: usize) -> &ChirpletAtom {
        &self.atoms[idx]
    }

    /// On-the-fly correlation: synthesizes the windowed sine/cosine pair sample
    /// by sample without allocating.
    fn correlate(&self, idx: usize, residual: &[f64]) -> Correlation {
        let atom = &self.atoms[idx];
        let Some((start, end)) = atom.sample_window(&self.receiver) else {
            return Correlation {
                in_phase: 0.0,
                quadrature: 0.0,
                norm: 0.0,
                quad_norm: 0.0,
                cross: 0.0,
            };
        };
        let fs = self.receiver.sample_rate;
        let mut ci = 0.0;
        let mut cq = 0.0;
        let mut norm_sq = 0.0;
        let mut quad_sq = 0.0;
        let mut cross = 0.0;
        for n in start..=end.min(residual.len() - 1) {
            let u = n as f64 / fs - atom.time_shift;
            let phase = 2.0 * PI * (atom.start_freq * u + 0.5 * atom.slope * u * u);
            let (s, c) = phase.sin_cos();
            let r = residual[n];
            ci += r * s;
            cq += r * c;
            norm_sq += s * s;
            quad_sq += c * c;
            cross += s * c;
        }
        Correlation {
            in_phase: ci,
            quadrature: cq,
            norm: norm_sq.sqrt(),
            quad_norm: quad_sq.sqrt(),
            cross,
        }
    }

    fn waveforms(&self, idx: usize) -> Result<AtomWaveforms> {
        synthesize_atom(&self.atoms[idx], &self.receiver)
    }
}

/// Fine grid around the atoms a coarse search selected: for each detection, a
/// uniform grid spanning +-1 coarse cell in slope and time-shift, with
/// overlapping regions merged by deduplication.
pub fn refine_grid(
    support: &[usize],
    coarse: &DictionaryGrid,
    m_kappa_fine: usize,
    m_tau_fine: usize,
) -> Result<DictionaryGrid> {
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    let slope_step = 2.0 * coarse.slope_step / (m_kappa_fine.max(2) - 1) as f64;
    let time_step = 2.0 * coarse.time_step / (m_tau_fine.max(2) - 1) as f64;
    // dedup on the fine lattice (half-step resolution) so overlapping regions
    // from adjacent detections merge even when values differ by rounding
    let quantize = |x: f64, step: f64| -> i64 {
        if step > 0.0 {
            (2.0 * x / step).round() as i64
        } else {
            0
        }
    };
    let mut seen: HashSet<(i64, i64)> = HashSet::new();
    let mut atoms = Vec::new();
    for &idx in support {
        let center = &coarse.atoms[idx];
        // the detected atom itself stays a hypothesis: an even point count
        // straddles the center without landing on it
        if seen.insert((
            quantize(center.slope, slope_step),
            quantize(center.time_shift, time_step),
        )) {
            atoms.push(*center);
        }
        let slopes = linspace(
            center.slope - coarse.slope_step,
            center.slope + coarse.slope_step,
            m_kappa_fine,
        );
        let times = linspace(
            center.time_shift - coarse.time_step,
            center.time_shift + coarse.time_step,
            m_tau_fine,
        );
        for &raw_k in &slopes {
            // stay inside the coarse slope range and outside the forbidden band
            let mut k = raw_k.clamp(coarse.slope_range.0, coarse.slope_range.1);
            if k.abs() < coarse.k_min {
                k = if center.slope >= 0.0 {
                    coarse.k_min
                } else {
                    -coarse.k_min
                };
            }
            for &raw_t in &times {
                let t = raw_t.clamp(coarse.time_range.0, coarse.time_range.1);
                if seen.insert((quantize(k, slope_step), quantize(t, time_step))) {
                    atoms.push(ChirpletAtom::new(
                        t,
                        k,
                        &coarse.receiver,
                        coarse.chirp_duration,
                        coarse.k_min,
                    )?);
                }
            }
        }
    }
    Ok(DictionaryGrid {
        atoms,
        slope_hypotheses: m_kappa_fine,
        time_hypotheses: m_tau_fine,
        slope_range: coarse.slope_range,
        time_range: coarse.time_range,
        receiver: coarse.receiver,
        chirp_duration: coarse.chirp_duration,
        k_min: coarse.k_min,
        slope_step,
        time_step,
        is_product: false,
    })
}

/// Grid with atom waveforms synthesized up front (and optionally filtered).
#[derive(Debug, Clone)]
pub struct MaterializedDictionary {
    pub grid: DictionaryGrid,
    pub waveforms: Vec<AtomWaveforms>,
}

/// Synthesizes every atom waveform of the grid. Atoms whose window misses the
/// sample interval entirely become empty (zero-norm) columns, matching the
/// lazy grid's zero correlation for them.
pub fn materialize(grid: &DictionaryGrid) -> Result<MaterializedDictionary> {
    let waveforms = map_atoms(grid, |atom| {
        match synthesize_atom(atom, &grid.receiver) {
            Err(Error::EmptyWindow) => Ok(empty_waveforms()),
            other => other,
        }
    })?;
    Ok(MaterializedDictionary {
        grid: grid.clone(),
        waveforms,
    })
}

fn empty_waveforms() -> AtomWaveforms {
    AtomWaveforms {
        start: 0,
        in_phase: Vec::new(),
        quadrature: Vec::new(),
        norm: 0.0,
        quad_norm: 0.0,
        cross: 0.0,
    }
}

/// Materializes the grid with every atom passed through the given FIR filter,
/// so filtered measurements correlate against equally filtered hypotheses.
/// Norms are recomputed after filtering.
pub fn filter_dictionary(
    grid: &DictionaryGrid,
    filter: &FilterCoeffs,
) -> Result<MaterializedDictionary> {
    let n = grid.receiver.num_samples;
    let waveforms = map_atoms(grid, |atom| {
        match synthesize_atom(atom, &grid.receiver) {
            Err(Error::EmptyWindow) => Ok(empty_waveforms()),
            Ok(raw) => Ok(filter_windowed(&raw, filter, n)),
            Err(e) => Err(e),
        }
    })?;
    Ok(MaterializedDictionary {
        grid: grid.clone(),
        waveforms,
    })
}

fn map_atoms<F>(grid: &DictionaryGrid, f: F) -> Result<Vec<AtomWaveforms>>
where
    F: Fn(&ChirpletAtom) -> Result<AtomWaveforms> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        grid.atoms.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        grid.atoms.iter().map(f).collect()
    }
}

/// Causal FIR convolution of a windowed waveform, truncated to signal length.
fn filter_windowed(wave: &AtomWaveforms, filter: &FilterCoeffs, signal_len: usize) -> AtomWaveforms {
    let taps = &filter.taps;
    let out_len = (wave.in_phase.len() + taps.len() - 1).min(signal_len - wave.start);
    let conv = |x: &[f64]| -> Vec<f64> {
        let mut y = vec![0.0; out_len];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, &h) in taps.iter().enumerate() {
                if i + j < out_len {
                    y[i + j] += xi * h;
                }
            }
        }
        y
    };
    let in_phase = conv(&wave.in_phase);
    let quadrature = conv(&wave.quadrature);
    let norm = in_phase.iter().map(|s| s * s).sum::<f64>().sqrt();
    let quad_norm = quadrature.iter().map(|c| c * c).sum::<f64>().sqrt();
    let cross = in_phase.iter().zip(&quadrature).map(|(s, c)| s * c).sum();
    AtomWaveforms {
        start: wave.start,
        in_phase,
        quadrature,
        norm,
        quad_norm,
        cross,
    }
}

impl AtomBank for MaterializedDictionary {
    fn num_atoms(&self) -> usize {
        self.grid.atoms.len()
    }

    fn signal_len(&self) -> usize {
        self.grid.receiver.num_samples
    }

    fn sample_rate(&self) -> f64 {
        self.grid.receiver.sample_rate
    }

    fn atom(&self, idx: usize) -> &ChirpletAtom {
        &self.grid.atoms[idx]
    }

    fn correlate(&self, idx: usize, residual: &[f64]) -> Correlation {
        self.waveforms[idx].correlate(residual)
    }

    fn waveforms(&self, idx: usize) -> Result<AtomWaveforms> {
        Ok(self.waveforms[idx].clone())
    }
}

const CACHE_MAGIC: &[u8; 8] = b"CHIRPDIC";
const CACHE_VERSION: u32 = 1;

impl MaterializedDictionary {
    /// Writes the packed waveforms with a header keyed on the grid parameter hash.
    pub fn save_cache(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&self.grid.params_hash())?;
        w.write_all(&(self.waveforms.len() as u64).to_le_bytes())?;
        w.write_all(&(self.grid.receiver.num_samples as u64).to_le_bytes())?;
        w.write_all(&self.grid.receiver.sample_rate.to_le_bytes())?;
        for (atom, wave) in self.grid.atoms.iter().zip(&self.waveforms) {
            w.write_all(&atom.time_shift.to_le_bytes())?;
            w.write_all(&atom.slope.to_le_bytes())?;
            w.write_all(&atom.duration.to_le_bytes())?;
            w.write_all(&atom.start_freq.to_le_bytes())?;
            w.write_all(&(wave.start as u64).to_le_bytes())?;
            w.write_all(&(wave.in_phase.len() as u64).to_le_bytes())?;
            for v in wave.in_phase.iter().chain(&wave.quadrature) {
                w.write_all(&v.to_le_bytes())?;
            }
            w.write_all(&wave.norm.to_le_bytes())?;
            w.write_all(&wave.quad_norm.to_le_bytes())?;
            w.write_all(&wave.cross.to_le_bytes())?;
        }
        Ok(())
    }

    /// Loads a cache written by [`save_cache`], validating it against the
    /// expected grid's parameter hash.
    pub fn load_cache(path: &Path, expected: &DictionaryGrid) -> Result<Self> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::CacheMismatch);
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != CACHE_VERSION {
            return Err(Error::CacheMismatch);
        }
        let mut hash = [0u8; 32];
        r.read_exact(&mut hash)?;
        if hash != expected.params_hash() {
            return Err(Error::CacheMismatch);
        }
        let num_atoms = read_u64(&mut r)? as usize;
        let signal_len = read_u64(&mut r)? as usize;
        let sample_rate = read_f64(&mut r)?;
        if num_atoms != expected.atoms.len()
            || signal_len != expected.receiver.num_samples
            || sample_rate != expected.receiver.sample_rate
        {
            return Err(Error::CacheMismatch);
        }
        let mut waveforms = Vec::with_capacity(num_atoms);
        for _ in 0..num_atoms {
            // atom parameters are re-derivable from the grid; skip past them
            for _ in 0..4 {
                read_f64(&mut r)?;
            }
            let start = read_u64(&mut r)? as usize;
            let len = read_u64(&mut r)? as usize;
            let mut in_phase = Vec::with_capacity(len);
            let mut quadrature = Vec::with_capacity(len);
            for _ in 0..len {
                in_phase.push(read_f64(&mut r)?);
            }
            for _ in 0..len {
                quadrature.push(read_f64(&mut r)?);
            }
            let norm = read_f64(&mut r)?;
            let quad_norm = read_f64(&mut r)?;
            let cross = read_f64(&mut r)?;
            waveforms.push(AtomWaveforms {
                start,
                in_phase,
                quadrature,
                norm,
                quad_norm,
                cross,
            });
        }
        Ok(Self {
            grid: expected.clone(),
            waveforms,
        })
    }
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
