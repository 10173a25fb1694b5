use std::f64::consts::TAU;

use gaitsig::detect::{detect_cycles, Thresholds};
use gaitsig::preprocess::{design_bandpass, filter_zero_phase, ScalarSignal};
use gaitsig::signature::{average_signature, GaitCycle};
use proptest::prelude::*;

fn tone(freqs: &[(f64, f64)], n: usize) -> ScalarSignal<f64> {
    ScalarSignal::sampled(0.0, 100.0, n, |t| {
        freqs.iter().map(|&(f, a)| a * (TAU * f * t).sin()).sum()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn filter_is_linear(
        f1 in 0.2f64..20.0, f2 in 0.2f64..20.0,
        alpha in -3.0f64..3.0, beta in -3.0f64..3.0,
    ) {
        let design = design_bandpass(4, 0.1, 10.0, 100.0).unwrap();
        let x = tone(&[(f1, 1.0)], 800);
        let y = tone(&[(f2, 1.0), (0.5, 0.3)], 800);
        let mix: Vec<f64> = x.values().iter().zip(y.values()).map(|(a, b)| alpha * a + beta * b).collect();
        let fx = filter_zero_phase(&x, &design).unwrap();
        let fy = filter_zero_phase(&y, &design).unwrap();
        let fm = filter_zero_phase(&x.with_values(mix).unwrap(), &design).unwrap();
        for i in 0..800 {
            let expect = alpha * fx.values()[i] + beta * fy.values()[i];
            prop_assert!((fm.values()[i] - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn detection_commutes_with_time_shift(
        period in 0.6f64..1.4, phase in 0.0f64..1.0, amp in 2.5f64..6.0, shift in -50.0f64..50.0,
    ) {
        let signal = ScalarSignal::sampled(0.0, 100.0, 2000, |t| amp * (TAU * (t / period + phase)).sin()).unwrap();
        let th = Thresholds::new(2.0, -2.0).unwrap();
        let base = detect_cycles(&signal, &th).unwrap();
        let moved = detect_cycles(&signal.shifted(shift), &th).unwrap();
        prop_assert_eq!(base.num_cycles(), moved.num_cycles());
        for (a, b) in base.boundaries().iter().zip(moved.boundaries()) {
            prop_assert!((b - a - shift).abs() < 1e-9);
        }
    }

    #[test]
    fn signature_ignores_cycle_order(
        rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 16), 2..8),
        rot in 0usize..8,
    ) {
        let cycles: Vec<GaitCycle<f64>> = rows
            .iter()
            .enumerate()
            .map(|(i, v)| GaitCycle { values: v.clone(), start: i as f64, end: i as f64 + 1.0 })
            .collect();
        let mut permuted = cycles.clone();
        permuted.rotate_left(rot % cycles.len());
        permuted.swap(0, cycles.len() - 1);
        let a = average_signature(&cycles).unwrap();
        let b = average_signature(&permuted).unwrap();
        for l in 0..16 {
            prop_assert!((a.mean[l] - b.mean[l]).abs() < 1e-12);
            prop_assert!((a.std[l] - b.std[l]).abs() < 1e-12);
        }
    }
}
