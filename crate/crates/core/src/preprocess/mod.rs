//! Conversion of raw tri-axial acceleration into the band-pass-filtered norm.

mod butterworth;
mod filtfilt;

pub use butterworth::{design_bandpass, BandpassDesign, Biquad};
pub use filtfilt::{filter_zero_phase, pad_length};

use crate::error::{Error, Result};
use crate::io::ImuRecording;
use crate::scalar::Real;

/// A uniformly-or-jittery sampled scalar channel aligned with its source recording.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSignal<T> {
    times: Vec<T>,
    values: Vec<T>,
    nominal_rate: T,
}

impl<T: Real> ScalarSignal<T> {
    pub fn new(times: Vec<T>, values: Vec<T>, nominal_rate: T) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Config(format!(
                "signal has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::TooFewSamples { found: times.len() });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config(
                "signal times must be strictly increasing".into(),
            ));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::Config("signal contains non-finite values".into()));
        }
        if !(nominal_rate > T::zero()) {
            return Err(Error::Config("nominal rate must be positive".into()));
        }
        Ok(Self {
            times,
            values,
            nominal_rate,
        })
    }

    /// Builds a signal sampled at `rate` Hz starting at `t0` from a closure.
    pub fn sampled(t0: T, rate: T, n: usize, f: impl Fn(T) -> T) -> Result<Self> {
        let times: Vec<T> = (0..n).map(|i| t0 + T::from_count(i) / rate).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(times, values, rate)
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn nominal_rate(&self) -> T {
        self.nominal_rate
    }

    pub fn span(&self) -> (T, T) {
        (self.times[0], self.times[self.times.len() - 1])
    }

    /// Same sample times, new values.
    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        Self::new(self.times.clone(), values, self.nominal_rate)
    }

    /// Shifts every sample time by `dt`.
    pub fn shifted(&self, dt: T) -> Self {
        Self {
            times: self.times.iter().map(|&t| t + dt).collect(),
            values: self.values.clone(),
            nominal_rate: self.nominal_rate,
        }
    }
}

/// Euclidean norm of every accelerometer sample.
pub fn accel_norm<T: Real>(recording: &ImuRecording<T>) -> ScalarSignal<T> {
    let (times, values) = recording
        .samples()
        .iter()
        .map(|s| {
            let [x, y, z] = s.accel;
            (s.time, (x * x + y * y + z * z).sqrt())
        })
        .unzip();
    ScalarSignal {
        times,
        values,
        nominal_rate: recording.nominal_rate(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::ImuSample;

    fn rec(accels: &[[f64; 3]]) -> ImuRecording<f64> {
        let samples = accels
            .iter()
            .enumerate()
            .map(|(i, &accel)| ImuSample {
                time: i as f64 * 0.01,
                accel,
            })
            .collect();
        ImuRecording::new(samples).unwrap()
    }

    #[test]
    fn norm_of_known_vectors() {
        let sig = accel_norm(&rec(&[[0.0, 0.0, 9.81], [3.0, 4.0, 0.0]]));
        assert_eq!(sig.values(), &[9.81, 5.0]);
        assert_eq!(sig.times(), &[0.0, 0.01]);
    }

    #[test]
    fn signal_rejects_bad_input() {
        assert!(ScalarSignal::new(vec![0.0, 1.0], vec![1.0], 1.0).is_err());
        assert!(ScalarSignal::new(vec![0.0, 0.0], vec![1.0, 1.0], 1.0).is_err());
        assert!(ScalarSignal::new(vec![0.0, 1.0], vec![f64::NAN, 1.0], 1.0).is_err());
    }
}
