//! Command-line front door: scenario simulation, mitigation of stored signals,
//! spectral analysis, and OMP benchmark timing.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use chirpmit::analysis::{range_spectrum, WindowKind};
use chirpmit::dictionary::MaterializedDictionary;
use chirpmit::error::Error;
use chirpmit::io;
use chirpmit::mitigation::{
    coarse_grid, mitigate, mitigate_frame, two_stage_search, MitigationReport, StageBank,
};
use chirpmit::signal_model::{synthesize_scenario, SampledSignal};

#[derive(Parser)]
#[command(name = "chirpmit", version, about = "FMCW interference mitigation by sparse chirplet reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a scenario into a signal file plus its interference-free companion.
    Simulate {
        /// Scenario config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output stem; writes <out>.csv, <out>_reference.csv, <out>.manifest.toml.
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario RNG seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Remove interference from a stored signal.
    Mitigate {
        /// Input signal (.csv with sample_rate header, or raw LE f32).
        #[arg(long)]
        signal: PathBuf,
        /// Mitigation config (TOML with waveform/receiver sections).
        #[arg(long)]
        config: PathBuf,
        /// Output stem; writes <out>_clean.csv, <out>.report.toml, <out>.manifest.toml.
        #[arg(long)]
        out: PathBuf,
        /// Emit a per-iteration OMP trace CSV.
        #[arg(long)]
        verbose: bool,
        /// Treat the input as this many concatenated chirps and mitigate them
        /// concurrently.
        #[arg(long, default_value_t = 1)]
        frames: usize,
    },
    /// Compare range spectra before/after mitigation (and against a reference).
    Analyze {
        #[arg(long)]
        before: PathBuf,
        #[arg(long)]
        after: PathBuf,
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Comma-separated target bin indices.
        #[arg(long)]
        targets: String,
        /// Sample rate for raw f32 inputs (Hz).
        #[arg(long)]
        sample_rate: Option<f64>,
        /// Output stem for spectra CSVs and the comparison report.
        #[arg(long)]
        out: PathBuf,
    },
    /// Time the OMP stages with the dictionary pre-built and cached.
    Bench {
        #[arg(long)]
        signal: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 10)]
        repetitions: usize,
        /// Dictionary cache file (created when absent).
        #[arg(long)]
        cache: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ConfigParse(_)
        | Error::InvalidWaveform(_)
        | Error::InvalidReceiver(_)
        | Error::InvalidScenario(_)
        | Error::InvalidRange(_)
        | Error::InvalidCutoff(_)
        | Error::CacheMismatch => 2,
        Error::Io(_) | Error::SignalFormat(_) => 4,
        _ => 3,
    }
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut name = stem.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(suffix);
    stem.with_file_name(name)
}

fn run(cli: Cli) -> chirpmit::Result<()> {
    match cli.command {
        Command::Simulate { config, out, seed } => cmd_simulate(&config, &out, seed),
        Command::Mitigate {
            signal,
            config,
            out,
            verbose,
            frames,
        } => cmd_mitigate(&signal, &config, &out, verbose, frames),
        Command::Analyze {
            before,
            after,
            reference,
            targets,
            sample_rate,
            out,
        } => cmd_analyze(&before, &after, reference.as_deref(), &targets, sample_rate, &out),
        Command::Bench {
            signal,
            config,
            repetitions,
            cache,
        } => cmd_bench(&signal, &config, repetitions, cache.as_deref()),
    }
}

fn cmd_simulate(config: &Path, out: &Path, seed: Option<u64>) -> chirpmit::Result<()> {
    let t0 = Instant::now();
    let mut scenario = io::read_scenario(config)?;
    if let Some(s) = seed {
        scenario.rng_seed = s;
    }
    for w in scenario.warnings() {
        eprintln!("warning: {w}");
    }
    let signal = synthesize_scenario(&scenario);
    let reference = synthesize_scenario(&scenario.without_interference());

    let signal_path = with_suffix(out, ".csv");
    let reference_path = with_suffix(out, "_reference.csv");
    io::write_signal(&signal, &signal_path)?;
    io::write_signal(&reference, &reference_path)?;

    let mut manifest = io::RunManifest::new("simulate");
    manifest.config_path = Some(config.to_path_buf());
    manifest.seed = Some(scenario.rng_seed);
    manifest.add_output(&signal_path)?;
    manifest.add_output(&reference_path)?;
    manifest
        .stage_timings_s
        .push(("simulate".into(), t0.elapsed().as_secs_f64()));
    manifest.save(&with_suffix(out, ".manifest.toml"))?;
    println!(
        "wrote {} ({} samples) and {}",
        signal_path.display(),
        signal.len(),
        reference_path.display()
    );
    Ok(())
}

fn cmd_mitigate(
    signal_path: &Path,
    config_path: &Path,
    out: &Path,
    verbose: bool,
    frames: usize,
) -> chirpmit::Result<()> {
    let t0 = Instant::now();
    let (waveform, receiver, config) = io::read_mitigation_config(config_path)?;
    let input = io::read_signal(signal_path, Some(receiver.sample_rate))?;
    let n = receiver.num_samples;
    if input.len() != n * frames.max(1) {
        return Err(Error::LengthMismatch {
            expected: n * frames.max(1),
            got: input.len(),
        });
    }

    let mut manifest = io::RunManifest::new("mitigate");
    manifest.config_path = Some(config_path.to_path_buf());
    manifest.input_paths.push(signal_path.to_path_buf());

    if frames <= 1 {
        let (clean, report) = mitigate(&input, &waveform, &receiver, &config)?;
        let clean_path = with_suffix(out, "_clean.csv");
        io::write_signal(&clean, &clean_path)?;
        let report_path = with_suffix(out, ".report.toml");
        std::fs::write(
            &report_path,
            toml::to_string(&report).map_err(|e| Error::ConfigParse(e.to_string()))?,
        )?;
        if verbose {
            write_trace(&report, &with_suffix(out, ".trace.csv"))?;
            manifest.add_output(&with_suffix(out, ".trace.csv"))?;
        }
        manifest.add_output(&clean_path)?;
        manifest.add_output(&report_path)?;
        println!(
            "detections: {}  SNIR {:.1} -> {:.1} dB (improvement {:.1} dB)",
            report.detected_interferers.len(),
            report.snir_before_db,
            report.snir_after_db,
            report.snir_improvement_db
        );
    } else {
        let chirps: Vec<SampledSignal> = (0..frames)
            .map(|f| SampledSignal {
                samples: input.samples[f * n..(f + 1) * n].to_vec(),
                sample_rate: input.sample_rate,
            })
            .collect();
        let results = mitigate_frame(&chirps, &waveform, &receiver, &config)?;
        let mut all_clean = Vec::with_capacity(input.len());
        let mut rows = String::from(MitigationReport::CSV_HEADER);
        rows.push('\n');
        for (clean, report) in &results {
            all_clean.extend_from_slice(&clean.samples);
            rows.push_str(&report.csv_row());
            rows.push('\n');
        }
        let clean_path = with_suffix(out, "_clean.csv");
        io::write_signal(
            &SampledSignal {
                samples: all_clean,
                sample_rate: input.sample_rate,
            },
            &clean_path,
        )?;
        let report_path = with_suffix(out, ".reports.csv");
        std::fs::write(&report_path, rows)?;
        manifest.add_output(&clean_path)?;
        manifest.add_output(&report_path)?;
        println!("mitigated {frames} chirps");
    }
    manifest
        .stage_timings_s
        .push(("mitigate".into(), t0.elapsed().as_secs_f64()));
    manifest.save(&with_suffix(out, ".manifest.toml"))?;
    Ok(())
}

fn write_trace(report: &MitigationReport, path: &Path) -> chirpmit::Result<()> {
    let mut text = String::from("stage,iteration,residual_energy\n");
    for (i, e) in report.coarse_energy_history.iter().enumerate() {
        text.push_str(&format!("coarse,{i},{e}\n"));
    }
    for (i, e) in report.fine_energy_history.iter().enumerate() {
        text.push_str(&format!("fine,{i},{e}\n"));
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn cmd_analyze(
    before_path: &Path,
    after_path: &Path,
    reference_path: Option<&Path>,
    targets: &str,
    sample_rate: Option<f64>,
    out: &Path,
) -> chirpmit::Result<()> {
    let target_bins: Vec<usize> = targets
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| Error::ConfigParse(format!("bad target bin '{s}': {e}")))
        })
        .collect::<chirpmit::Result<_>>()?;

    let before = io::read_signal(before_path, sample_rate)?;
    let after = io::read_signal(after_path, sample_rate)?;
    let reference = reference_path
        .map(|p| io::read_signal(p, sample_rate))
        .transpose()?;

    let sp_before = range_spectrum(&before, WindowKind::Hann);
    let sp_after = range_spectrum(&after, WindowKind::Hann);
    let sp_ref = reference.as_ref().map(|r| range_spectrum(r, WindowKind::Hann));

    let report =
        chirpmit::analysis::compare_runs(&sp_before, &sp_after, sp_ref.as_ref(), &target_bins)?;

    io::write_spectrum_csv(&sp_before, None, &with_suffix(out, "_before.csv"))?;
    io::write_spectrum_csv(&sp_after, None, &with_suffix(out, "_after.csv"))?;
    if let Some(sp) = &sp_ref {
        io::write_spectrum_csv(sp, None, &with_suffix(out, "_reference.csv"))?;
    }

    #[derive(serde::Serialize)]
    struct CompareFile {
        snir_before_db: f64,
        snir_after_db: f64,
        snir_improvement_db: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        gap_to_reference_db: Option<f64>,
        target_bins: Vec<usize>,
    }
    let file = CompareFile {
        snir_before_db: report.snir_before_db,
        snir_after_db: report.snir_after_db,
        snir_improvement_db: report.snir_improvement_db,
        gap_to_reference_db: report.gap_to_reference_db,
        target_bins,
    };
    std::fs::write(
        with_suffix(out, ".compare.toml"),
        toml::to_string(&file).map_err(|e| Error::ConfigParse(e.to_string()))?,
    )?;
    println!(
        "SNIR improvement {:.1} dB{}",
        report.snir_improvement_db,
        report
            .gap_to_reference_db
            .map(|g| format!(", gap to reference {g:.1} dB"))
            .unwrap_or_default()
    );
    Ok(())
}

fn cmd_bench(
    signal_path: &Path,
    config_path: &Path,
    repetitions: usize,
    cache: Option<&Path>,
) -> chirpmit::Result<()> {
    let (waveform, receiver, config) = io::read_mitigation_config(config_path)?;
    let y = io::read_signal(signal_path, Some(receiver.sample_rate))?;
    if y.len() != receiver.num_samples {
        return Err(Error::LengthMismatch {
            expected: receiver.num_samples,
            got: y.len(),
        });
    }

    // dictionary pre-built (and cached) outside the timed region
    let grid = coarse_grid(&waveform, &receiver, &config)?;
    let materialized = match cache {
        Some(path) if path.exists() => MaterializedDictionary::load_cache(path, &grid)?,
        Some(path) => {
            let m = chirpmit::dictionary::materialize(&grid)?;
            m.save_cache(path)?;
            m
        }
        None => chirpmit::dictionary::materialize(&grid)?,
    };
    let bank = StageBank::Materialized(materialized);

    let reps = repetitions.max(1);
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t0 = Instant::now();
        let stages = two_stage_search(&y, &bank, &config, None)?;
        let elapsed = t0.elapsed().as_secs_f64();
        std::hint::black_box(&stages.fine);
        times.push(elapsed);
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = times[times.len() / 2];
    println!("repetitions: {reps}");
    println!("omp_time_min_s: {:.6}", times[0]);
    println!("omp_time_median_s: {median:.6}");
    println!("omp_time_max_s: {:.6}", times[times.len() - 1]);
    // fixed anchor so runs on different machines are comparable at a glance
    println!("reference_anchor_s: 0.070000");
    Ok(())
}
