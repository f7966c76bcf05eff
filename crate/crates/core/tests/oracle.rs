//! Equivalence of the production OMP engine against a naive dense reference
//! implementation, over randomized small instances.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use chirpmit::dictionary::{build_grid, AtomBank, DictionaryGrid};
use chirpmit::omp::{omp_run, OmpConfig};
use chirpmit::signal_model::{ReceiverConfig, SampledSignal, WaveformParams};

/// Full-length dense column pair (sine, cosine) for one atom.
fn dense_columns(grid: &DictionaryGrid, idx: usize, n: usize) -> (DVector<f64>, DVector<f64>) {
    let wave = grid.waveforms(idx).unwrap();
    let mut s = DVector::zeros(n);
    let mut c = DVector::zeros(n);
    for (k, (&si, &qi)) in wave.in_phase.iter().zip(&wave.quadrature).enumerate() {
        s[wave.start + k] = si;
        c[wave.start + k] = qi;
    }
    (s, c)
}

struct ReferenceResult {
    support: Vec<usize>,
    coefficients: Vec<(f64, f64)>,
    residual_energy: f64,
}

/// Textbook OMP: greedy selection by projection energy onto each atom's
/// sine/cosine span, then a full pseudoinverse refit of all selected columns.
fn reference_omp(grid: &DictionaryGrid, y: &SampledSignal, iterations: usize) -> ReferenceResult {
    let n = y.len();
    let m = grid.num_atoms();
    let columns: Vec<(DVector<f64>, DVector<f64>)> =
        (0..m).map(|i| dense_columns(grid, i, n)).collect();
    let yv = DVector::from_vec(y.samples.clone());

    let mut support: Vec<usize> = Vec::new();
    let mut residual = yv.clone();
    let mut weights = DVector::zeros(0);
    for _ in 0..iterations {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, (s, c)) in columns.iter().enumerate() {
            if support.contains(&i) {
                continue;
            }
            let e = DMatrix::from_columns(&[s.clone(), c.clone()]);
            let gram = e.transpose() * &e;
            let Some(gi) = gram.try_inverse() else {
                continue;
            };
            let w = gi * e.transpose() * &residual;
            let score = (&e * w).norm();
            if score > best.1 {
                best = (i, score);
            }
        }
        support.push(best.0);

        let cols: Vec<DVector<f64>> = support
            .iter()
            .flat_map(|&i| [columns[i].0.clone(), columns[i].1.clone()])
            .collect();
        let e = DMatrix::from_columns(&cols);
        let gram = e.transpose() * &e;
        weights = gram.try_inverse().expect("full rank") * e.transpose() * &yv;
        residual = &yv - e * &weights;
    }
    let coefficients = (0..support.len())
        .map(|i| (weights[2 * i], weights[2 * i + 1]))
        .collect();
    ReferenceResult {
        support,
        coefficients,
        residual_energy: residual.norm_squared(),
    }
}

#[test]
fn omp_matches_reference_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for case in 0..100 {
        let chirp_duration = 1e-4;
        let n = rng.random_range(64..=256);
        let sample_rate = n as f64 / chirp_duration;
        let waveform = WaveformParams::new(77e9, 1e9, chirp_duration).unwrap();
        let receiver = ReceiverConfig::new(sample_rate, n, &waveform).unwrap();

        // positive-only slopes keep every window inside the chirp and avoid
        // exact mirror-atom score ties
        let f_r = receiver.cutoff;
        let k_lo = 8.0 * f_r / chirp_duration * (1.0 + rng.random::<f64>());
        let k_hi = k_lo * (2.0 + 2.0 * rng.random::<f64>());
        let m_kappa = rng.random_range(2..=8);
        let m_tau = rng.random_range(4..=(64 / m_kappa));
        let grid = build_grid(
            (k_lo, k_hi),
            (0.0, chirp_duration / 2.0),
            m_kappa,
            m_tau,
            &receiver,
            chirp_duration,
            None,
        )
        .unwrap();

        let planted = rng.random_range(1..=3.min(grid.num_atoms()));
        let mut indices: Vec<usize> = (0..grid.num_atoms()).collect();
        indices.shuffle(&mut rng);
        let mut y = SampledSignal::zeros(n, sample_rate);
        for &idx in &indices[..planted] {
            let wave = grid.waveforms(idx).unwrap();
            let amp = 0.5 + 1.5 * rng.random::<f64>();
            let phase = std::f64::consts::TAU * rng.random::<f64>();
            wave.accumulate(amp * phase.cos(), amp * phase.sin(), &mut y.samples);
        }
        for s in &mut y.samples {
            *s += 1e-3 * (rng.random::<f64>() - 0.5);
        }

        let config = OmpConfig {
            max_iterations: planted,
            energy_variation_threshold: 1e-12,
            absolute_residual_threshold: None,
            normalize_correlation: true,
        };
        let got = omp_run(&grid, &y, &config).unwrap();
        let want = reference_omp(&grid, &y, planted);

        assert_eq!(got.support, want.support, "case {case}: support differs");
        for (c, &(wi, wq)) in got.coefficients.iter().zip(&want.coefficients) {
            assert!(
                (c.in_phase - wi).abs() < 1e-6 && (c.quadrature - wq).abs() < 1e-6,
                "case {case}: coefficient mismatch ({}, {}) vs ({wi}, {wq})",
                c.in_phase,
                c.quadrature
            );
        }
        let got_energy = got.residual.energy();
        assert!(
            (got_energy - want.residual_energy).abs()
                <= 1e-9 * want.residual_energy.max(f64::MIN_POSITIVE),
            "case {case}: residual energy {got_energy} vs {}",
            want.residual_energy
        );
    }
}
