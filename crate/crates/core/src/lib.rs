//! Blind mitigation of FMCW/CW mutual interference in automotive radar
//! baseband signals.
//!
//! Interference from another chirp radar appears after down-conversion as a
//! short, band-limited chirp whose start frequency and duration are fixed by
//! the receiver's anti-alias filter. This crate models that signal, builds a
//! reduced chirplet dictionary over the two remaining free parameters
//! (time-shift and slope), reconstructs the interference sparsely with
//! Orthogonal Matching Pursuit, and subtracts it — leaving the target beat
//! tones intact.
//!
//! Modules:
//! - [`signal_model`]: synthetic baseband chirps (targets, interference, noise)
//! - [`dictionary`]: reduced chirplet hypothesis grids and atom waveforms
//! - [`omp`]: greedy sparse reconstruction with incremental QR refitting
//! - [`highpass`]: FIR preprocessing applied to signal and dictionary alike
//! - [`mitigation`]: the two-stage coarse/fine search pipeline
//! - [`analysis`]: range spectra and SNIR accounting
//! - [`io`]: config files, signal formats, run manifests
//!
//! The dictionary correlation scan is data-parallel; the default `parallel`
//! feature runs it on rayon, and disabling it yields a sequential build.

pub mod analysis;
pub mod dictionary;
pub mod error;
pub mod highpass;
pub mod io;
pub mod mitigation;
pub mod omp;
pub mod signal_model;

pub use error::{Error, Result};
