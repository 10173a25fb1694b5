//! Forward-backward (zero-phase) application of a biquad cascade.

use super::{BandpassDesign, Biquad, ScalarSignal};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Reflection padding (samples) used at each end: three times the settle
/// length, where the settle length is one period of the low cut-off. Clamped
/// to `n - 1` so the mirror image stays inside the signal.
pub fn pad_length<T: Real>(design: &BandpassDesign<T>, n: usize) -> usize {
    let settle = (design.sample_rate / design.low_cut)
        .ceil()
        .to_usize()
        .unwrap_or(usize::MAX);
    settle.saturating_mul(3).min(n.saturating_sub(1))
}

/// Zero-phase band-pass filtering with mirror-reflection edge padding and
/// steady-state initial conditions. Output length equals input length.
///
/// Mirror (even) padding is used rather than odd padding: odd padding adds a
/// level step of `2·x[edge]` that excites the slow low-cut poles.
pub fn filter_zero_phase<T: Real>(
    signal: &ScalarSignal<T>,
    design: &BandpassDesign<T>,
) -> Result<ScalarSignal<T>> {
    let x = signal.values();
    let n = x.len();
    let min = 3 * design.state_dim();
    if n < min.max(2) {
        return Err(Error::SignalTooShort { len: n, min });
    }
    let pad = pad_length(design, n);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| x[n - 1 - i]));

    run_cascade(&design.sections, &mut ext);
    ext.reverse();
    run_cascade(&design.sections, &mut ext);
    ext.reverse();

    signal.with_values(ext[pad..pad + n].to_vec())
}

/// Filters `data` in place, starting from the steady state for a constant
/// input equal to `data[0]`.
fn run_cascade<T: Real>(sections: &[Biquad<T>], data: &mut [T]) {
    let mut level = data[0];
    for s in sections {
        let [z0, z1] = s.step_state();
        let mut state = [z0 * level, z1 * level];
        for v in data.iter_mut() {
            let input = *v;
            let out = s.b[0] * input + state[0];
            state[0] = s.b[1] * input - s.a[0] * out + state[1];
            state[1] = s.b[2] * input - s.a[1] * out;
            *v = out;
        }
        level *= s.dc_gain();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::design_bandpass;
    use std::f64::consts::TAU;

    fn design() -> BandpassDesign<f64> {
        design_bandpass(4, 0.1, 10.0, 100.0).unwrap()
    }

    fn sine(freq: f64, secs: f64) -> ScalarSignal<f64> {
        ScalarSignal::sampled(0.0, 100.0, (secs * 100.0) as usize, |t| {
            (TAU * freq * t).sin()
        })
        .unwrap()
    }

    #[test]
    fn constant_maps_to_zero() {
        let sig = ScalarSignal::sampled(0.0, 100.0, 6000, |_| 9.81).unwrap();
        let out = filter_zero_phase(&sig, &design()).unwrap();
        assert_eq!(out.len(), sig.len());
        assert!(out.values().iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn passband_sine_keeps_amplitude_and_phase() {
        let sig = sine(1.0, 60.0);
        let out = filter_zero_phase(&sig, &design()).unwrap();
        // Least-squares fit of a·sin + b·cos over the middle 20 s.
        let (mut ss, mut sc, mut cc, mut ys, mut yc) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (t, y) in out.times().iter().zip(out.values()).skip(2000).take(2000) {
            let (s, c) = (TAU * t).sin_cos();
            ss += s * s;
            sc += s * c;
            cc += c * c;
            ys += y * s;
            yc += y * c;
        }
        let det = ss * cc - sc * sc;
        let a = (ys * cc - yc * sc) / det;
        let b = (yc * ss - ys * sc) / det;
        let amp = a.hypot(b);
        let phase_deg = b.atan2(a).to_degrees();
        assert!((amp - 1.0).abs() < 0.02, "amplitude {amp}");
        assert!(phase_deg.abs() < 1.0, "phase {phase_deg}");
    }

    #[test]
    fn stopband_sine_is_attenuated() {
        let out = filter_zero_phase(&sine(30.0, 60.0), &design()).unwrap();
        let peak = out.values()[1000..5000]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak <= 0.02, "peak {peak}");
    }

    #[test]
    fn too_short() {
        let sig = sine(1.0, 0.2);
        assert!(matches!(
            filter_zero_phase(&sig, &design()),
            Err(Error::SignalTooShort { len: 20, min: 24 })
        ));
        assert!(filter_zero_phase(&sine(1.0, 0.24), &design()).is_ok());
    }
}
