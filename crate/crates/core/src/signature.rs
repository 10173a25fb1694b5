//! Normalized-time resampling, asynchronous averaging and the variance cost.

use crate::detect::Segmentation;
use crate::error::{Error, Result};
use crate::preprocess::ScalarSignal;
use crate::scalar::Real;

/// `L` uniformly spaced phase points `τ_l = (l-1)/L`, `l = 1..=L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormalizedGrid {
    len: usize,
}

impl NormalizedGrid {
    pub fn new(len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::Config(format!(
                "grid size must be at least 2, got {len}"
            )));
        }
        Ok(Self { len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Zero-based: `tau(0) = 0`, `tau(L-1) = (L-1)/L`.
    pub fn tau<T: Real>(&self, i: usize) -> T {
        T::from_count(i) / T::from_count(self.len)
    }

    pub fn points<T: Real>(&self) -> Vec<T> {
        (0..self.len).map(|i| self.tau(i)).collect()
    }
}

/// One cycle resampled onto the normalized grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GaitCycle<T> {
    pub values: Vec<T>,
    pub start: T,
    pub end: T,
}

/// Per-grid-point mean and sample standard deviation over `M` cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct Signature<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
    pub num_cycles: usize,
}

impl<T: Real> Signature<T> {
    pub fn new(mean: Vec<T>, std: Vec<T>, num_cycles: usize) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::GridMismatch {
                expected: mean.len(),
                found: std.len(),
            });
        }
        if mean.len() < 2 {
            return Err(Error::Config(
                "signature needs at least 2 grid points".into(),
            ));
        }
        if num_cycles == 0 {
            return Err(Error::NoCycles);
        }
        if mean.iter().any(|v| !v.is_finite())
            || std.iter().any(|s| !(s.is_finite() && *s >= T::zero()))
        {
            return Err(Error::Config(
                "signature values must be finite with std ≥ 0".into(),
            ));
        }
        Ok(Self {
            mean,
            std,
            num_cycles,
        })
    }

    /// A single-cycle signature (zero spread) with the given mean.
    pub fn from_mean(mean: Vec<T>) -> Result<Self> {
        let std = vec![T::zero(); mean.len()];
        Self::new(mean, std, 1)
    }

    pub fn grid_size(&self) -> usize {
        self.mean.len()
    }
}

/// Linear interpolation of `signal` at time `t`, which must lie inside the span.
fn interpolate<T: Real>(times: &[T], values: &[T], t: T) -> T {
    let hi = times.partition_point(|&s| s <= t);
    if hi == 0 {
        return values[0];
    }
    if hi >= times.len() {
        return values[times.len() - 1];
    }
    let lo = hi - 1;
    let w = (t - times[lo]) / (times[hi] - times[lo]);
    values[lo] + w * (values[hi] - values[lo])
}

fn check_interval<T: Real>(signal: &ScalarSignal<T>, start: T, end: T) -> Result<()> {
    let (s0, s1) = signal.span();
    if !(end > start) || start < s0 || end > s1 {
        return Err(Error::OutsideSpan {
            start: start.as_f64(),
            end: end.as_f64(),
            span_start: s0.as_f64(),
            span_end: s1.as_f64(),
        });
    }
    let times = signal.times();
    // Three nominal periods, with slack for timestamp round-off.
    let max_gap = T::lit(3.0 + 1e-6) / signal.nominal_rate();
    // Sample pairs whose interval overlaps [start, end].
    let first = times.partition_point(|&s| s <= start).saturating_sub(1);
    let last = times.partition_point(|&s| s < end).min(times.len() - 1);
    for k in first..last {
        let gap = times[k + 1] - times[k];
        if gap > max_gap {
            return Err(Error::SamplingGap {
                at: times[k].as_f64(),
                gap: gap.as_f64(),
            });
        }
    }
    Ok(())
}

/// Writes the cycle on `[start, end]` resampled at `start + (end-start)·τ_l` into `out`.
pub(crate) fn resample_into<T: Real>(
    signal: &ScalarSignal<T>,
    start: T,
    end: T,
    grid: NormalizedGrid,
    out: &mut [T],
) -> Result<()> {
    check_interval(signal, start, end)?;
    let (times, values) = (signal.times(), signal.values());
    let width = end - start;
    for (i, slot) in out.iter_mut().enumerate().take(grid.len()) {
        *slot = interpolate(times, values, start + width * grid.tau::<T>(i));
    }
    Ok(())
}

/// Resamples `signal` on `[t_start, t_end]` onto the normalized grid.
pub fn extract_cycle<T: Real>(
    signal: &ScalarSignal<T>,
    t_start: T,
    t_end: T,
    grid: NormalizedGrid,
) -> Result<GaitCycle<T>> {
    let mut values = vec![T::zero(); grid.len()];
    resample_into(signal, t_start, t_end, grid, &mut values)?;
    Ok(GaitCycle {
        values,
        start: t_start,
        end: t_end,
    })
}

/// Extracts all `M` cycles of a segmentation.
pub fn extract_cycles<T: Real>(
    signal: &ScalarSignal<T>,
    seg: &Segmentation<T>,
    grid: NormalizedGrid,
) -> Result<Vec<GaitCycle<T>>> {
    seg.boundaries()
        .windows(2)
        .map(|w| extract_cycle(signal, w[0], w[1], grid))
        .collect()
}

/// Elementwise mean and sample standard deviation (divisor `M-1`, zero for `M = 1`).
pub fn average_signature<T: Real>(cycles: &[GaitCycle<T>]) -> Result<Signature<T>> {
    let first = cycles.first().ok_or(Error::NoCycles)?;
    let len = first.values.len();
    if let Some(bad) = cycles.iter().find(|c| c.values.len() != len) {
        return Err(Error::GridMismatch {
            expected: len,
            found: bad.values.len(),
        });
    }
    let rows: Vec<&[T]> = cycles.iter().map(|c| c.values.as_slice()).collect();
    let (mean, var) = mean_and_variance(&rows, len);
    let std = var.into_iter().map(T::sqrt).collect();
    Signature::new(mean, std, cycles.len())
}

/// Per-column mean and sample variance (divisor `M-1`; zero when `M = 1`).
pub(crate) fn mean_and_variance<T: Real>(rows: &[&[T]], len: usize) -> (Vec<T>, Vec<T>) {
    let m = T::from_count(rows.len());
    let mut mean = vec![T::zero(); len];
    for row in rows {
        for (acc, &v) in mean.iter_mut().zip(row.iter()) {
            *acc += v;
        }
    }
    for v in &mut mean {
        *v /= m;
    }
    let mut var = vec![T::zero(); len];
    if rows.len() > 1 {
        for row in rows {
            for ((acc, &v), &mu) in var.iter_mut().zip(row.iter()).zip(&mean) {
                let d = v - mu;
                *acc += d * d;
            }
        }
        let dof = m - T::one();
        for v in &mut var {
            *v /= dof;
        }
    }
    (mean, var)
}

/// Sum over cycles and grid points of squared deviations from `mean`.
pub(crate) fn squared_deviation<T: Real>(values: &[T], mean: &[T]) -> T {
    values
        .iter()
        .zip(mean)
        .map(|(&v, &mu)| (v - mu) * (v - mu))
        .sum()
}

/// Variance cost `V = (1/(L·M)) Σ_m Σ_l (ḡ(τ_l) - ĝ_m(τ_l))²`.
pub fn cost_v<T: Real>(
    seg: &Segmentation<T>,
    signal: &ScalarSignal<T>,
    grid: NormalizedGrid,
) -> Result<T> {
    let cycles = extract_cycles(signal, seg, grid)?;
    Ok(cost_of_cycles(&cycles))
}

pub(crate) fn cost_of_cycles<T: Real>(cycles: &[GaitCycle<T>]) -> T {
    let len = cycles[0].values.len();
    let rows: Vec<&[T]> = cycles.iter().map(|c| c.values.as_slice()).collect();
    let (mean, _) = mean_and_variance(&rows, len);
    let total: T = rows.iter().map(|r| squared_deviation(r, &mean)).sum();
    total / (T::from_count(len) * T::from_count(cycles.len()))
}

/// Lower and upper band `mean ± z·std/√M` (confidence band of the mean).
pub fn confidence_band<T: Real>(sig: &Signature<T>, level: T) -> Result<(Vec<T>, Vec<T>)> {
    if sig.num_cycles < 2 {
        return Err(Error::TooFewCycles {
            found: sig.num_cycles,
        });
    }
    let scale = normal_quantile(level)? / T::from_count(sig.num_cycles).sqrt();
    Ok(band(&sig.mean, &sig.std, scale))
}

/// Lower and upper band `mean ± z·std` covering individual cycles.
pub fn population_band<T: Real>(sig: &Signature<T>, level: T) -> Result<(Vec<T>, Vec<T>)> {
    if sig.num_cycles < 2 {
        return Err(Error::TooFewCycles {
            found: sig.num_cycles,
        });
    }
    Ok(band(&sig.mean, &sig.std, normal_quantile(level)?))
}

fn band<T: Real>(mean: &[T], std: &[T], scale: T) -> (Vec<T>, Vec<T>) {
    mean.iter()
        .zip(std)
        .map(|(&m, &s)| (m - scale * s, m + scale * s))
        .unzip()
}

/// Two-sided standard-normal quantile for the supported confidence levels.
fn normal_quantile<T: Real>(level: T) -> Result<T> {
    const TABLE: [(f64, f64); 4] = [(0.90, 1.645), (0.95, 1.96), (0.98, 2.326), (0.99, 2.576)];
    TABLE
        .iter()
        .find(|(p, _)| (level.as_f64() - p).abs() < 1e-9)
        .map(|&(_, z)| T::lit(z))
        .ok_or_else(|| {
            Error::Config(format!(
                "unsupported confidence level {level}; use 0.90, 0.95, 0.98 or 0.99"
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn ramp() -> ScalarSignal<f64> {
        ScalarSignal::sampled(0.0, 100.0, 1001, |t| t).unwrap()
    }

    fn cycle(values: Vec<f64>) -> GaitCycle<f64> {
        GaitCycle {
            values,
            start: 0.0,
            end: 1.0,
        }
    }

    #[test]
    fn grid_points() {
        let g = NormalizedGrid::new(4).unwrap();
        assert_eq!(g.points::<f64>(), vec![0.0, 0.25, 0.5, 0.75]);
        assert!(NormalizedGrid::new(1).is_err());
    }

    #[test]
    fn ramp_is_interpolated_exactly() {
        let g = NormalizedGrid::new(4).unwrap();
        let c = extract_cycle(&ramp(), 2.0, 3.0, g).unwrap();
        for (v, e) in c.values.iter().zip([2.0, 2.25, 2.5, 2.75]) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn interval_outside_span() {
        let g = NormalizedGrid::new(4).unwrap();
        assert!(matches!(
            extract_cycle(&ramp(), 9.5, 10.5, g),
            Err(Error::OutsideSpan { .. })
        ));
        assert!(extract_cycle(&ramp(), 3.0, 3.0, g).is_err());
    }

    #[test]
    fn gap_larger_than_three_periods_is_rejected() {
        let mut times: Vec<f64> = (0..100).map(|i| i as f64 * 0.01).collect();
        times.extend((0..100).map(|i| 1.5 + i as f64 * 0.01));
        let values = times.clone();
        let sig = ScalarSignal::new(times, values, 100.0).unwrap();
        let g = NormalizedGrid::new(10).unwrap();
        assert!(matches!(
            extract_cycle(&sig, 0.5, 1.7, g),
            Err(Error::SamplingGap { .. })
        ));
        assert!(extract_cycle(&sig, 0.1, 0.9, g).is_ok());
        assert!(extract_cycle(&sig, 1.6, 2.4, g).is_ok());
    }

    #[test]
    fn small_gaps_are_interpolated() {
        // Two missing samples (gap = 3 periods) are tolerated.
        let times: Vec<f64> = (0..200)
            .filter(|i| *i != 50 && *i != 51)
            .map(|i| i as f64 * 0.01)
            .collect();
        let sig = ScalarSignal::new(times.clone(), times, 100.0).unwrap();
        let c = extract_cycle(&sig, 0.2, 1.2, NormalizedGrid::new(50).unwrap()).unwrap();
        assert!((c.values[15] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sine_cycle_matches_analytic() {
        let sig = ScalarSignal::sampled(0.0, 100.0, 201, |t| (TAU * t).sin()).unwrap();
        let g = NormalizedGrid::new(100).unwrap();
        let c = extract_cycle(&sig, 0.0, 1.0, g).unwrap();
        let worst = c
            .values
            .iter()
            .zip(g.points::<f64>())
            .map(|(v, tau)| (v - (TAU * tau).sin()).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-3);
    }

    #[test]
    fn identical_cycles_have_zero_spread() {
        let sig =
            average_signature(&[cycle(vec![1.0, 2.0, 3.0]), cycle(vec![1.0, 2.0, 3.0])]).unwrap();
        assert_eq!(sig.mean, vec![1.0, 2.0, 3.0]);
        assert_eq!(sig.std, vec![0.0; 3]);
        assert_eq!(sig.num_cycles, 2);
    }

    #[test]
    fn two_point_sample_std() {
        let sig = average_signature(&[cycle(vec![0.0; 5]), cycle(vec![2.0; 5])]).unwrap();
        assert_eq!(sig.mean, vec![1.0; 5]);
        for s in sig.std {
            assert!((s - 2f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn averaging_errors() {
        assert!(matches!(
            average_signature::<f64>(&[]),
            Err(Error::NoCycles)
        ));
        assert!(matches!(
            average_signature(&[cycle(vec![0.0; 5]), cycle(vec![0.0; 4])]),
            Err(Error::GridMismatch {
                expected: 5,
                found: 4
            })
        ));
    }

    #[test]
    fn periodic_signal_aligned_cost_vanishes() {
        let sig = ScalarSignal::sampled(0.0, 100.0, 1001, |t| {
            (TAU * t).sin() + 0.5 * (2.0 * TAU * t).cos()
        })
        .unwrap();
        let g = NormalizedGrid::new(100).unwrap();
        let aligned = Segmentation::new(vec![1.0, 2.0, 3.0, 4.0, 5.0], sig.span()).unwrap();
        let v0 = cost_v(&aligned, &sig, g).unwrap();
        assert!(v0 < 1e-10, "{v0}");
        let shifted = Segmentation::new(vec![1.0, 2.0, 3.25, 4.0, 5.0], sig.span()).unwrap();
        assert!(cost_v(&shifted, &sig, g).unwrap() > v0);
        let single = Segmentation::new(vec![1.0, 2.3], sig.span()).unwrap();
        assert_eq!(cost_v(&single, &sig, g).unwrap(), 0.0);
    }

    #[test]
    fn bands() {
        let sig = Signature::new(vec![1.0f64, 1.0], vec![0.0, 2.0], 4).unwrap();
        let (lo, hi) = confidence_band(&sig, 0.95).unwrap();
        assert_eq!(lo[0], 1.0);
        assert_eq!(hi[0], 1.0);
        assert!((hi[1] - 1.0 - 1.96).abs() < 1e-12);
        assert!((1.0 - lo[1] - 1.96).abs() < 1e-12);
        let (_, hi) = population_band(&sig, 0.95).unwrap();
        assert!((hi[1] - 1.0 - 3.92).abs() < 1e-12);
        let single = Signature::new(vec![1.0, 1.0], vec![0.0, 0.0], 1).unwrap();
        assert!(matches!(
            confidence_band(&single, 0.95),
            Err(Error::TooFewCycles { found: 1 })
        ));
        assert!(confidence_band(&sig, 0.5).is_err());
    }
}
