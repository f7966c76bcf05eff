//! File formats: TOML scenario and mitigation configs, signal import/export
//! (single-column CSV with a sample-rate header, or raw little-endian f32),
//! and per-run manifests for reproducibility.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mitigation::MitigationConfig;
use crate::signal_model::{
    InterferenceSource, ReceiverConfig, SampledSignal, Scenario, TargetEcho, WaveformParams,
};

// ---------------------------------------------------------------------------
// scenario files

#[derive(Debug, Serialize, Deserialize)]
struct WaveformSpec {
    carrier_freq_hz: f64,
    bandwidth_hz: f64,
    chirp_duration_s: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ReceiverSpec {
    sample_rate_hz: f64,
    num_samples: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct TargetSpec {
    delay_s: f64,
    amplitude: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct InterfererSpec {
    slope_hz_per_s: f64,
    delay_s: f64,
    amplitude: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioFile {
    #[serde(default)]
    noise_std: f64,
    #[serde(default)]
    rng_seed: u64,
    waveform: WaveformSpec,
    receiver: ReceiverSpec,
    #[serde(default)]
    targets: Vec<TargetSpec>,
    #[serde(default)]
    interferers: Vec<InterfererSpec>,
}

pub fn read_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    let file: ScenarioFile =
        toml::from_str(&text).map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))?;
    let waveform = WaveformParams::new(
        file.waveform.carrier_freq_hz,
        file.waveform.bandwidth_hz,
        file.waveform.chirp_duration_s,
    )?;
    let receiver = ReceiverConfig::new(file.receiver.sample_rate_hz, file.receiver.num_samples, &waveform)?;
    let targets = file
        .targets
        .iter()
        .map(|t| TargetEcho::new(t.delay_s, t.amplitude))
        .collect::<Result<Vec<_>>>()?;
    let interferers = file
        .interferers
        .iter()
        .map(|i| InterferenceSource::new(i.slope_hz_per_s, i.delay_s, i.amplitude))
        .collect::<Result<Vec<_>>>()?;
    Ok(Scenario {
        waveform,
        receiver,
        targets,
        interferers,
        noise_std: file.noise_std,
        rng_seed: file.rng_seed,
    })
}

pub fn write_scenario(scenario: &Scenario, path: &Path) -> Result<()> {
    let file = ScenarioFile {
        noise_std: scenario.noise_std,
        rng_seed: scenario.rng_seed,
        waveform: WaveformSpec {
            carrier_freq_hz: scenario.waveform.carrier_freq,
            bandwidth_hz: scenario.waveform.bandwidth,
            chirp_duration_s: scenario.waveform.chirp_duration,
        },
        receiver: ReceiverSpec {
            sample_rate_hz: scenario.receiver.sample_rate,
            num_samples: scenario.receiver.num_samples,
        },
        targets: scenario
            .targets
            .iter()
            .map(|t| TargetSpec {
                delay_s: t.delay,
                amplitude: t.amplitude,
            })
            .collect(),
        interferers: scenario
            .interferers
            .iter()
            .map(|i| InterfererSpec {
                slope_hz_per_s: i.slope,
                delay_s: i.delay,
                amplitude: i.amplitude,
            })
            .collect(),
    };
    let text = toml::to_string(&file).map_err(|e| Error::ConfigParse(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// mitigation config files (waveform/receiver + algorithm settings)

#[derive(Debug, Serialize, Deserialize)]
struct MitigationFile {
    waveform: WaveformSpec,
    receiver: ReceiverSpec,
    #[serde(flatten)]
    mitigation: MitigationConfig,
}

pub fn read_mitigation_config(
    path: &Path,
) -> Result<(WaveformParams, ReceiverConfig, MitigationConfig)> {
    let text = std::fs::read_to_string(path)?;
    let file: MitigationFile =
        toml::from_str(&text).map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))?;
    let waveform = WaveformParams::new(
        file.waveform.carrier_freq_hz,
        file.waveform.bandwidth_hz,
        file.waveform.chirp_duration_s,
    )?;
    let receiver = ReceiverConfig::new(file.receiver.sample_rate_hz, file.receiver.num_samples, &waveform)?;
    Ok((waveform, receiver, file.mitigation))
}

pub fn write_mitigation_config(
    waveform: &WaveformParams,
    receiver: &ReceiverConfig,
    config: &MitigationConfig,
    path: &Path,
) -> Result<()> {
    let file = MitigationFile {
        waveform: WaveformSpec {
            carrier_freq_hz: waveform.carrier_freq,
            bandwidth_hz: waveform.bandwidth,
            chirp_duration_s: waveform.chirp_duration,
        },
        receiver: ReceiverSpec {
            sample_rate_hz: receiver.sample_rate,
            num_samples: receiver.num_samples,
        },
        mitigation: config.clone(),
    };
    let text = toml::to_string(&file).map_err(|e| Error::ConfigParse(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// signal files

/// Writes a signal. `.csv` gets a `sample_rate=<Hz>` header followed by one
/// sample per line; any other extension is raw little-endian f32.
pub fn write_signal(signal: &SampledSignal, path: &Path) -> Result<()> {
    if has_extension(path, "csv") {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "sample_rate={}", signal.sample_rate)?;
        for s in &signal.samples {
            writeln!(w, "{s}")?;
        }
    } else {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        for s in &signal.samples {
            w.write_all(&(*s as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a signal. CSV carries its own sample rate; raw f32 requires one.
pub fn read_signal(path: &Path, sample_rate: Option<f64>) -> Result<SampledSignal> {
    if has_extension(path, "csv") {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::SignalFormat("empty file".into()))??;
        let rate = header
            .strip_prefix("sample_rate=")
            .ok_or_else(|| Error::SignalFormat("missing sample_rate header".into()))?
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::SignalFormat(format!("bad sample rate: {e}")))?;
        let mut samples = Vec::new();
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            samples.push(
                t.parse::<f64>()
                    .map_err(|e| Error::SignalFormat(format!("bad sample '{t}': {e}")))?,
            );
        }
        Ok(SampledSignal {
            samples,
            sample_rate: rate,
        })
    } else {
        let rate = sample_rate.ok_or_else(|| {
            Error::SignalFormat("raw f32 signals need an external sample rate".into())
        })?;
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() % 4 != 0 {
            return Err(Error::SignalFormat("truncated f32 file".into()));
        }
        let samples = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Ok(SampledSignal {
            samples,
            sample_rate: rate,
        })
    }
}

fn has_extension(path: &Path, ext: &str) -> bool {
    path.extension()
        .map(|e| e.eq_ignore_ascii_case(ext))
        .unwrap_or(false)
}

// ---------------------------------------------------------------------------
// spectra

/// Two-column CSV `freq_hz,power_db` (with an optional range column when a
/// slope is supplied) ready for external plotting.
pub fn write_spectrum_csv(
    spectrum: &crate::analysis::RangeSpectrum,
    slope: Option<f64>,
    path: &Path,
) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    match slope {
        Some(k) => {
            writeln!(w, "freq_hz,range_m,power_db")?;
            let ranges = spectrum.range_axis(k);
            for ((f, r), p) in spectrum
                .bin_freqs
                .iter()
                .zip(&ranges)
                .zip(&spectrum.power_db)
            {
                writeln!(w, "{f},{r},{p}")?;
            }
        }
        None => {
            writeln!(w, "freq_hz,power_db")?;
            for (f, p) in spectrum.bin_freqs.iter().zip(&spectrum.power_db) {
                writeln!(w, "{f},{p}")?;
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// run manifests

/// Record of one CLI run: inputs, outputs (with hashes), seed, and timings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_path: Option<PathBuf>,
    #[serde(default)]
    pub input_paths: Vec<PathBuf>,
    #[serde(default)]
    pub output_paths: Vec<PathBuf>,
    #[serde(default)]
    pub output_hashes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub stage_timings_s: Vec<(String, f64)>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_path: None,
            input_paths: Vec::new(),
            output_paths: Vec::new(),
            output_hashes: Vec::new(),
            seed: None,
            stage_timings_s: Vec::new(),
        }
    }

    /// Registers an output file and records its content hash.
    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        let mut h = Sha256::new();
        h.update(&bytes);
        self.output_paths.push(path.to_path_buf());
        self.output_hashes.push(hex_string(&h.finalize()));
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::ConfigParse(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::ConfigParse(e.to_string()))
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_round_trip_csv_and_raw() {
        let dir = tempfile::tempdir().unwrap();
        let sig = SampledSignal {
            samples: (0..100).map(|n| (n as f64 * 0.1).sin()).collect(),
            sample_rate: 2e7,
        };
        let csv = dir.path().join("sig.csv");
        write_signal(&sig, &csv).unwrap();
        let back = read_signal(&csv, None).unwrap();
        assert_eq!(back.sample_rate, sig.sample_rate);
        assert_eq!(back.len(), sig.len());
        for (a, b) in back.samples.iter().zip(&sig.samples) {
            assert!((a - b).abs() < 1e-12);
        }

        let raw = dir.path().join("sig.f32");
        write_signal(&sig, &raw).unwrap();
        let back = read_signal(&raw, Some(2e7)).unwrap();
        assert_eq!(back.len(), sig.len());
        for (a, b) in back.samples.iter().zip(&sig.samples) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(read_signal(&raw, None).is_err());
    }

    #[test]
    fn scenario_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let w = WaveformParams::new(77e9, 1e9, 1e-4).unwrap();
        let rx = ReceiverConfig::new(2e7, 2000, &w).unwrap();
        let s = Scenario {
            waveform: w,
            receiver: rx,
            targets: vec![TargetEcho::new(4e-7, 1.0).unwrap()],
            interferers: vec![InterferenceSource::new(1.2e13, 1e-5, 30.0).unwrap()],
            noise_std: 0.01,
            rng_seed: 42,
        };
        let path = dir.path().join("test.scenario");
        write_scenario(&s, &path).unwrap();
        let back = read_scenario(&path).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn bad_config_reports_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.scenario");
        std::fs::write(&path, "waveform = 12\n").unwrap();
        assert!(matches!(read_scenario(&path), Err(Error::ConfigParse(_))));
    }

    #[test]
    fn mitigation_config_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let w = WaveformParams::new(77e9, 1e9, 1e-4).unwrap();
        let rx = ReceiverConfig::new(2e7, 2000, &w).unwrap();
        let cfg = MitigationConfig::default();
        let path = dir.path().join("mit.toml");
        write_mitigation_config(&w, &rx, &cfg, &path).unwrap();
        let (w2, rx2, cfg2) = read_mitigation_config(&path).unwrap();
        assert_eq!(w2, w);
        assert_eq!(rx2, rx);
        assert_eq!(cfg2, cfg);
    }

    #[test]
    fn manifest_save_load() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("x.csv");
        std::fs::write(&out, "hello").unwrap();
        let mut m = RunManifest::new("simulate");
        m.seed = Some(42);
        m.add_output(&out).unwrap();
        let mpath = dir.path().join("run.manifest.toml");
        m.save(&mpath).unwrap();
        let back = RunManifest::load(&mpath).unwrap();
        assert_eq!(back.command, "simulate");
        assert_eq!(back.output_hashes, m.output_hashes);
    }
}
