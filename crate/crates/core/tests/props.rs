//! Property tests for the analytic invariants: slope-coupled atom durations
//! and exact gating of interference outside its anti-alias support.

use approx::assert_relative_eq;
use proptest::prelude::*;

use chirpmit::dictionary::{atom_duration, default_k_min};
use chirpmit::signal_model::{
    interference_baseband, interference_support, InterferenceSource, ReceiverConfig,
    WaveformParams,
};

fn setup() -> (WaveformParams, ReceiverConfig) {
    let w = WaveformParams::new(77e9, 1e9, 1e-4).unwrap();
    let rx = ReceiverConfig::new(2e7, 2000, &w).unwrap();
    (w, rx)
}

proptest! {
    #[test]
    fn duration_couples_to_slope(mag in 1e9f64..1e14, negative in any::<bool>()) {
        let (w, rx) = setup();
        let k_min = default_k_min(&rx, w.chirp_duration);
        let slope = if negative { -mag } else { mag };
        let d = atom_duration(slope, &rx, w.chirp_duration, k_min).unwrap();
        assert_relative_eq!(
            d,
            (2.0 * rx.cutoff / mag).min(w.chirp_duration),
            max_relative = 1e-12
        );
        prop_assert!(d > 0.0 && d <= w.chirp_duration);
    }

    #[test]
    fn sub_minimum_slopes_are_rejected(frac in 0.0f64..0.999) {
        let (w, rx) = setup();
        let k_min = default_k_min(&rx, w.chirp_duration);
        prop_assert!(atom_duration(frac * k_min, &rx, w.chirp_duration, k_min).is_err());
        prop_assert!(atom_duration(-frac * k_min, &rx, w.chirp_duration, k_min).is_err());
    }

    #[test]
    fn interference_is_zero_outside_its_support(
        dk in prop::sample::select(vec![-5e12f64, -7.3e11, 3.1e11, 1.9e12, 4.8e12]),
        delay in -2e-5f64..9e-5,
        amplitude in 0.1f64..100.0,
    ) {
        let (w, rx) = setup();
        let source = InterferenceSource::new(w.slope + dk, delay, amplitude).unwrap();
        let (t_start, t_end) = interference_support(&w, &source, &rx);
        let signal = interference_baseband(&w, &source, &rx);
        for (n, &s) in signal.samples.iter().enumerate() {
            let t = n as f64 / rx.sample_rate;
            if t < t_start || t > t_end {
                prop_assert_eq!(s, 0.0, "nonzero sample at t = {} outside [{}, {}]", t, t_start, t_end);
            } else {
                prop_assert!(s.abs() <= amplitude + 1e-12);
            }
        }
    }
}
