//! Two-threshold peak/valley gait-cycle detection.

use crate::error::{Error, Result};
use crate::preprocess::ScalarSignal;
use crate::scalar::Real;

/// Peak and valley thresholds on the filtered acceleration norm (m/s²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds<T> {
    pub eps_p: T,
    pub eps_v: T,
}

impl<T: Real> Thresholds<T> {
    pub fn new(eps_p: T, eps_v: T) -> Result<Self> {
        if !(eps_v < T::zero() && T::zero() < eps_p) {
            return Err(Error::Config(format!(
                "thresholds need eps_v < 0 < eps_p, got eps_p={eps_p}, eps_v={eps_v}"
            )));
        }
        Ok(Self { eps_p, eps_v })
    }

    /// `eps_p = 2`, `eps_v = -2`.
    pub fn walking() -> Self {
        Self {
            eps_p: T::lit(2.0),
            eps_v: T::lit(-2.0),
        }
    }

    /// `eps_p = 4`, `eps_v = -5`.
    pub fn running() -> Self {
        Self {
            eps_p: T::lit(4.0),
            eps_v: T::lit(-5.0),
        }
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            eps_p: self.eps_p * c,
            eps_v: self.eps_v * c,
        }
    }
}

/// Ordered cycle boundaries `t_0 < t_1 < … < t_M` inside the source span.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation<T> {
    boundaries: Vec<T>,
    source_span: (T, T),
}

impl<T: Real> Segmentation<T> {
    pub fn new(boundaries: Vec<T>, source_span: (T, T)) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::InvalidSegmentation(format!(
                "need at least 2 boundaries (one cycle), got {}",
                boundaries.len()
            )));
        }
        if boundaries.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidSegmentation("non-finite boundary".into()));
        }
        if let Some(i) = boundaries.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidSegmentation(format!(
                "boundaries not strictly increasing at index {}",
                i + 1
            )));
        }
        let (lo, hi) = source_span;
        if boundaries[0] < lo || boundaries[boundaries.len() - 1] > hi {
            return Err(Error::InvalidSegmentation(format!(
                "boundaries [{}, {}] leave source span [{lo}, {hi}]",
                boundaries[0],
                boundaries[boundaries.len() - 1]
            )));
        }
        Ok(Self {
            boundaries,
            source_span,
        })
    }

    pub fn boundaries(&self) -> &[T] {
        &self.boundaries
    }

    pub fn source_span(&self) -> (T, T) {
        self.source_span
    }

    /// Number of cycles `M`.
    pub fn num_cycles(&self) -> usize {
        self.boundaries.len() - 1
    }

    /// `t_m - t_{m-1}` for `m = 1..=M`.
    pub fn durations(&self) -> Vec<T> {
        self.boundaries.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `(t_{m-1}, t_m)` for 1-based cycle index `m`.
    pub fn cycle(&self, m: usize) -> (T, T) {
        (self.boundaries[m - 1], self.boundaries[m])
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Zone {
    Above,
    Middle,
    Below,
}

/// Splits the filtered norm into gait cycles by threshold crossings.
///
/// A cycle is taken once the peak threshold and the valley threshold have
/// each been crossed twice, i.e. one complete excursion above `eps_p` and
/// one complete excursion below `eps_v`. Peak and valley excursions must
/// alternate: a new peak excursion is counted only after a valley has been
/// hit, and vice versa. Either kind may open a cycle. Each boundary is the
/// sample at which the closing crossing occurs, after which both counters
/// reset. A signal that starts inside an excursion counts as entering it at
/// the first sample. The lead-in before the first closing is dropped (its
/// start is not a cycle boundary), as is any trailing unclosed cycle.
pub fn detect_cycles<T: Real>(
    signal: &ScalarSignal<T>,
    thresholds: &Thresholds<T>,
) -> Result<Segmentation<T>> {
    let zone = |v: T| {
        if v >= thresholds.eps_p {
            Zone::Above
        } else if v <= thresholds.eps_v {
            Zone::Below
        } else {
            Zone::Middle
        }
    };
    let values = signal.values();
    let times = signal.times();

    let (mut c_up, mut c_lo) = (0u32, 0u32);
    let (mut hit_p, mut hit_v) = (false, false);
    let (mut in_peak, mut in_valley) = (false, false);
    let mut boundaries = Vec::new();
    let mut prev = Zone::Middle;

    for k in 0..values.len() {
        let cur = zone(values[k]);
        if cur == Zone::Above && prev != Zone::Above && !hit_p {
            c_up += 1;
            hit_p = true;
            hit_v = false;
            in_peak = true;
        }
        if cur != Zone::Above && prev == Zone::Above && in_peak {
            c_up += 1;
            in_peak = false;
        }
        if cur == Zone::Below && prev != Zone::Below && !hit_v {
            c_lo += 1;
            hit_v = true;
            hit_p = false;
            in_valley = true;
        }
        if cur != Zone::Below && prev == Zone::Below && in_valley {
            c_lo += 1;
            in_valley = false;
        }
        if c_up >= 2 && c_lo >= 2 {
            boundaries.push(times[k]);
            c_up = 0;
            c_lo = 0;
        }
        prev = cur;
    }

    if boundaries.len() < 2 {
        return Err(Error::EmptySegmentation);
    }
    Segmentation::new(boundaries, signal.span())
}

/// Enforces `eps_lo ≤ t_m - t_{m-1} ≤ eps_up` with a left-to-right sweep.
///
/// Durations below `eps_lo` are merged with the following segment. A raw or
/// merged duration above `eps_up` drops its opening boundary and restarts
/// the sweep at its closing boundary. Since a segmentation is contiguous,
/// the longest contiguous run of accepted cycles is returned (earliest on
/// ties).
pub fn filter_segments<T: Real>(
    seg: &Segmentation<T>,
    eps_lo: T,
    eps_up: T,
) -> Result<Segmentation<T>> {
    if !(T::zero() < eps_lo && eps_lo < eps_up) {
        return Err(Error::Config(format!(
            "duration bounds need 0 < eps_lo < eps_up, got [{eps_lo}, {eps_up}]"
        )));
    }
    let b = seg.boundaries();
    let mut best: Vec<T> = Vec::new();
    let mut run: Vec<T> = vec![b[0]];
    for &t in &b[1..] {
        let start = run[run.len() - 1];
        let d = t - start;
        if d < eps_lo {
            continue;
        }
        if d <= eps_up {
            run.push(t);
        } else {
            if run.len() > best.len() {
                best = std::mem::take(&mut run);
            }
            run = vec![t];
        }
    }
    if run.len() > best.len() {
        best = run;
    }
    if best.len() < 2 {
        return Err(Error::AllSegmentsRejected);
    }
    Segmentation::new(best, seg.source_span())
}
