//! Boundary refinement by sequential constrained one-dimensional searches.
//!
//! Each outer iteration sweeps `m = 1..=M`. Boundary `t_m` is moved to the
//! minimizer of the variance cost with all other boundaries and the current
//! signature frozen, subject to both adjacent cycle durations staying inside
//! `(eps_lo, eps_up)`. The signature is refreshed after every accepted move;
//! a move that raises the refreshed cost is rejected, so the recorded cost
//! sequence never increases. `t_0` is never moved.
//!
//! Moving one boundary at a time converges slowly when a whole run of
//! boundaries is offset in the same direction, because each cycle already
//! matches a signature that carries the same offset. With
//! [`OptConfig::block_shifts`] enabled, every outer iteration follows the
//! boundary sweep with a coarse pass: contiguous blocks of boundaries
//! `t_i..t_j`, at sizes `M, M/2, M/4, …, 2`, are each shifted by a common
//! offset found by the same constrained scalar search. A block shift changes
//! only the durations of cycles `i` and `j+1` and is subject to the same
//! rejection guard.

mod brent;

pub use brent::{minimize_bounded, ScalarMin};

use crate::detect::Segmentation;
use crate::error::{Error, Result};
use crate::preprocess::ScalarSignal;
use crate::scalar::Real;
use crate::signature::{
    average_signature, extract_cycles, mean_and_variance, resample_into, squared_deviation,
    GaitCycle, NormalizedGrid, Signature,
};

/// Iteration cap for a single scalar search.
const MAX_LINE_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptConfig<T> {
    /// Minimum cycle duration (s).
    pub eps_lo: T,
    /// Maximum cycle duration (s).
    pub eps_up: T,
    /// Stop once an outer iteration lowers the cost by less than this.
    pub gamma: T,
    pub max_outer_iters: usize,
    /// Absolute tolerance of each scalar search (s).
    pub line_search_tol: T,
    /// Run the coarse block-shift pass after each boundary sweep.
    pub block_shifts: bool,
}

impl<T: Real> Default for OptConfig<T> {
    fn default() -> Self {
        Self {
            eps_lo: T::lit(0.5),
            eps_up: T::lit(1.4),
            gamma: T::lit(1e-4),
            max_outer_iters: 20,
            line_search_tol: T::lit(0.01),
            block_shifts: true,
        }
    }
}

impl<T: Real> OptConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(T::zero() < self.eps_lo && self.eps_lo < self.eps_up) {
            return Err(Error::Config(format!(
                "need 0 < eps_lo < eps_up, got eps_lo={}, eps_up={}",
                self.eps_lo, self.eps_up
            )));
        }
        if !(self.gamma > T::zero()) {
            return Err(Error::Config(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.line_search_tol > T::zero()) {
            return Err(Error::Config(format!(
                "line_search_tol must be positive, got {}",
                self.line_search_tol
            )));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::Config("max_outer_iters must be at least 1".into()));
        }
        Ok(())
    }

    fn is_feasible(&self, duration: T) -> bool {
        self.eps_lo < duration && duration < self.eps_up
    }
}

/// Record of one refinement run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptTrace<T> {
    /// `V_1` (after any repair of the initialization) followed by the cost
    /// after each outer iteration.
    pub costs: Vec<T>,
    /// Per boundary `t_1..t_M`: false if its feasible interval was ever empty.
    pub feasible: Vec<bool>,
    /// Outer iterations executed.
    pub iterations: usize,
    /// True when the last iteration lowered the cost by less than `gamma`.
    pub converged: bool,
    /// Moves undone because the refreshed cost went up.
    pub rejected: usize,
    /// Accepted block shifts.
    pub block_moves: usize,
    /// Boundaries moved before the first iteration to restore feasibility (1-based).
    pub repaired: Vec<usize>,
    /// Trailing cycles dropped because they could not be made feasible.
    pub dropped_cycles: usize,
}

/// Result of one constrained scalar sub-problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryUpdate<T> {
    pub time: T,
    /// False when the feasible interval was empty and the boundary was left unchanged.
    pub feasible: bool,
}

/// Open interval of admissible `t_m` values, or `None` if empty.
fn feasible_window<T: Real>(b: &[T], m: usize, span_end: T, cfg: &OptConfig<T>) -> Option<(T, T)> {
    let mut lo = b[m - 1] + cfg.eps_lo;
    let mut hi = (b[m - 1] + cfg.eps_up).min(span_end);
    if m + 1 < b.len() {
        lo = lo.max(b[m + 1] - cfg.eps_up);
        hi = hi.min(b[m + 1] - cfg.eps_lo);
    }
    (lo < hi).then_some((lo, hi))
}

/// Squared deviation of cycles `m` and `m+1` from `mean` when `t_m = t`.
fn local_cost<T: Real>(
    signal: &ScalarSignal<T>,
    b: &[T],
    m: usize,
    t: T,
    grid: NormalizedGrid,
    mean: &[T],
    scratch: &mut [T],
) -> Result<T> {
    resample_into(signal, b[m - 1], t, grid, scratch)?;
    let mut total = squared_deviation(scratch, mean);
    if m + 1 < b.len() {
        resample_into(signal, t, b[m + 1], grid, scratch)?;
        total += squared_deviation(scratch, mean);
    }
    Ok(total)
}

fn search_boundary<T: Real>(
    signal: &ScalarSignal<T>,
    b: &[T],
    m: usize,
    grid: NormalizedGrid,
    cfg: &OptConfig<T>,
    mean: &[T],
) -> Result<BoundaryUpdate<T>> {
    let current = b[m];
    let Some((lo, hi)) = feasible_window(b, m, signal.span().1, cfg) else {
        return Ok(BoundaryUpdate {
            time: current,
            feasible: false,
        });
    };
    let mut scratch = vec![T::zero(); grid.len()];
    let best = minimize_bounded(
        lo,
        hi,
        Some(current),
        cfg.line_search_tol,
        MAX_LINE_ITERS,
        |t| local_cost(signal, b, m, t, grid, mean, &mut scratch),
    )?;
    Ok(BoundaryUpdate {
        time: best.x,
        feasible: true,
    })
}

/// Open interval of admissible offsets for shifting `t_i..=t_j` together.
fn block_window<T: Real>(
    b: &[T],
    i: usize,
    j: usize,
    span_end: T,
    cfg: &OptConfig<T>,
) -> Option<(T, T)> {
    let d_first = b[i] - b[i - 1];
    let mut lo = cfg.eps_lo - d_first;
    let mut hi = cfg.eps_up - d_first;
    if j + 1 < b.len() {
        let d_last = b[j + 1] - b[j];
        lo = lo.max(d_last - cfg.eps_up);
        hi = hi.min(d_last - cfg.eps_lo);
    } else {
        hi = hi.min(span_end - b[j]);
    }
    (lo < hi).then_some((lo, hi))
}

/// Best common offset for `t_i..=t_j`. Unlike the single-boundary search,
/// the signature is recomputed for every candidate offset, because a frozen
/// signature pins the common offset of a block in place.
fn search_block<T: Real>(
    ws: &Workspace<'_, T>,
    (i, j): (usize, usize),
    cfg: &OptConfig<T>,
) -> Result<Option<T>> {
    let b = &ws.boundaries;
    let Some((lo, hi)) = block_window(b, i, j, ws.signal.span().1, cfg) else {
        return Ok(None);
    };
    let len = ws.grid.len();
    let last = (j + 1).min(b.len() - 1);
    let count = T::from_count(ws.cycles.len());
    // Column sums of the cycles that a shift leaves untouched.
    let mut fixed_sum = vec![T::zero(); len];
    for (k, c) in ws.cycles.iter().enumerate() {
        if k + 1 < i || k + 1 > last {
            for (s, &v) in fixed_sum.iter_mut().zip(c) {
                *s += v;
            }
        }
    }
    let mut moved = vec![vec![T::zero(); len]; last - i + 1];
    let mut mean = vec![T::zero(); len];
    let best = minimize_bounded(
        lo,
        hi,
        Some(T::zero()),
        cfg.line_search_tol,
        MAX_LINE_ITERS,
        |delta| {
            for (k, out) in (i..=last).zip(moved.iter_mut()) {
                let s = if k > i { b[k - 1] + delta } else { b[k - 1] };
                let e = if k <= j { b[k] + delta } else { b[k] };
                resample_into(ws.signal, s, e, ws.grid, out)?;
            }
            for (l, m) in mean.iter_mut().enumerate() {
                *m = (fixed_sum[l] + moved.iter().map(|c| c[l]).sum::<T>()) / count;
            }
            let total: T = ws
                .cycles
                .iter()
                .enumerate()
                .filter(|(k, _)| k + 1 < i || k + 1 > last)
                .map(|(_, c)| squared_deviation(c, &mean))
                .chain(moved.iter().map(|c| squared_deviation(c, &mean)))
                .sum();
            Ok(total)
        },
    )?;
    Ok((best.x != T::zero()).then_some(best.x))
}

/// Blocks `(i, j)` of boundary indices for the coarse pass, largest first.
fn block_schedule(num: usize) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    let mut size = num;
    while size >= 2 {
        let mut i = 1;
        while i <= num {
            let j = (i + size - 1).min(num);
            if j > i {
                blocks.push((i, j));
            }
            i = j + 1;
        }
        size /= 2;
    }
    blocks
}

fn check_index<T: Real>(seg: &Segmentation<T>, m: usize) -> Result<()> {
    if m == 0 || m > seg.num_cycles() {
        return Err(Error::InvalidSegmentation(format!(
            "boundary index {m} outside 1..={}",
            seg.num_cycles()
        )));
    }
    Ok(())
}

/// Solves the sub-problem for boundary `t_m` (`1 ≤ m ≤ M`) with the
/// signature of `seg` held fixed during the search.
///
/// An empty feasible interval leaves the boundary unchanged and reports
/// `feasible: false`.
pub fn optimize_boundary<T: Real>(
    seg: &Segmentation<T>,
    m: usize,
    signal: &ScalarSignal<T>,
    grid: NormalizedGrid,
    cfg: &OptConfig<T>,
) -> Result<BoundaryUpdate<T>> {
    cfg.validate()?;
    check_index(seg, m)?;
    let cycles = extract_cycles(signal, seg, grid)?;
    let sig = average_signature(&cycles)?;
    search_boundary(signal, seg.boundaries(), m, grid, cfg, &sig.mean)
}

/// Incrementally maintained cycles and cost for the refinement loop.
struct Workspace<'a, T> {
    signal: &'a ScalarSignal<T>,
    grid: NormalizedGrid,
    boundaries: Vec<T>,
    cycles: Vec<Vec<T>>,
    mean: Vec<T>,
}

impl<'a, T: Real> Workspace<'a, T> {
    fn new(
        signal: &'a ScalarSignal<T>,
        seg: &Segmentation<T>,
        grid: NormalizedGrid,
    ) -> Result<Self> {
        let cycles = extract_cycles(signal, seg, grid)?
            .into_iter()
            .map(|c| c.values)
            .collect();
        let mut ws = Self {
            signal,
            grid,
            boundaries: seg.boundaries().to_vec(),
            cycles,
            mean: Vec::new(),
        };
        ws.refresh_mean();
        Ok(ws)
    }

    fn refresh_mean(&mut self) {
        let rows: Vec<&[T]> = self.cycles.iter().map(Vec::as_slice).collect();
        self.mean = mean_and_variance(&rows, self.grid.len()).0;
    }

    fn cost(&self) -> T {
        let total: T = self
            .cycles
            .iter()
            .map(|c| squared_deviation(c, &self.mean))
            .sum();
        total / (T::from_count(self.grid.len()) * T::from_count(self.cycles.len()))
    }

    /// Re-extracts cycles `first..=last` (1-based, clamped to `M`).
    fn reextract_range(&mut self, first: usize, last: usize) -> Result<()> {
        let last = last.min(self.cycles.len());
        for k in first..=last {
            let (s, e) = (self.boundaries[k - 1], self.boundaries[k]);
            resample_into(self.signal, s, e, self.grid, &mut self.cycles[k - 1])?;
        }
        Ok(())
    }

    /// Applies a candidate state, keeping it only if the refreshed cost does
    /// not exceed `current`. Returns the new cost on acceptance.
    fn try_accept(
        &mut self,
        old: &[T],
        first: usize,
        last: usize,
        current: T,
    ) -> Result<Option<T>> {
        self.reextract_range(first, last)?;
        let old_mean = std::mem::take(&mut self.mean);
        self.refresh_mean();
        let cost = self.cost();
        if cost > current {
            self.boundaries.copy_from_slice(old);
            self.reextract_range(first, last)?;
            self.mean = old_mean;
            Ok(None)
        } else {
            Ok(Some(cost))
        }
    }
}

/// Moves boundaries whose left-hand cycle duration is infeasible into
/// `(t_{m-1} + eps_lo, t_{m-1} + eps_up)`, choosing the position that best
/// matches the initial signature. Trailing cycles that cannot fit inside the
/// signal span are dropped.
fn repair<T: Real>(
    signal: &ScalarSignal<T>,
    seg: &Segmentation<T>,
    grid: NormalizedGrid,
    cfg: &OptConfig<T>,
    repaired: &mut Vec<usize>,
) -> Result<Segmentation<T>> {
    let mean = average_signature(&extract_cycles(signal, seg, grid)?)?.mean;
    let span_end = signal.span().1;
    let mut b = seg.boundaries().to_vec();
    let mut scratch = vec![T::zero(); grid.len()];
    let mut m = 1;
    while m < b.len() {
        if cfg.is_feasible(b[m] - b[m - 1]) {
            m += 1;
            continue;
        }
        let lo = b[m - 1] + cfg.eps_lo;
        let hi = (b[m - 1] + cfg.eps_up).min(span_end);
        if !(lo < hi) {
            b.truncate(m);
            break;
        }
        let start = b[m - 1];
        let best = minimize_bounded(lo, hi, None, cfg.line_search_tol, MAX_LINE_ITERS, |t| {
            resample_into(signal, start, t, grid, &mut scratch)?;
            Ok(squared_deviation(&scratch, &mean))
        })?;
        b[m] = best.x;
        repaired.push(m);
        m += 1;
    }
    if b.len() < 2 {
        return Err(Error::Infeasible(
            "no cycle of the initial segmentation can satisfy the duration bounds".into(),
        ));
    }
    Segmentation::new(b, seg.source_span())
}

/// Refines `initial` by sweeping constrained scalar searches until the cost
/// decrease per sweep falls below `gamma` or `max_outer_iters` is reached.
pub fn optimize_segmentation<T: Real>(
    initial: &Segmentation<T>,
    signal: &ScalarSignal<T>,
    grid: NormalizedGrid,
    cfg: &OptConfig<T>,
) -> Result<(Segmentation<T>, Signature<T>, OptTrace<T>)> {
    cfg.validate()?;
    let mut repaired = Vec::new();
    let start = repair(signal, initial, grid, cfg, &mut repaired)?;
    let dropped_cycles = initial.num_cycles() - start.num_cycles();

    let mut ws = Workspace::new(signal, &start, grid)?;
    let num = start.num_cycles();
    let mut trace = OptTrace {
        costs: vec![ws.cost()],
        feasible: vec![true; num],
        iterations: 0,
        converged: false,
        rejected: 0,
        block_moves: 0,
        repaired,
        dropped_cycles,
    };
    let mut current = trace.costs[0];
    let blocks = block_schedule(num);

    for _ in 0..cfg.max_outer_iters {
        for m in 1..=num {
            let update = search_boundary(signal, &ws.boundaries, m, grid, cfg, &ws.mean)?;
            if !update.feasible {
                trace.feasible[m - 1] = false;
                continue;
            }
            if update.time == ws.boundaries[m] {
                continue;
            }
            let old = ws.boundaries.clone();
            ws.boundaries[m] = update.time;
            match ws.try_accept(&old, m, m + 1, current)? {
                Some(cost) => current = cost,
                None => trace.rejected += 1,
            }
        }
        if cfg.block_shifts {
            for &(i, j) in &blocks {
                let Some(delta) = search_block(&ws, (i, j), cfg)? else {
                    continue;
                };
                let old = ws.boundaries.clone();
                for t in &mut ws.boundaries[i..=j] {
                    *t += delta;
                }
                match ws.try_accept(&old, i, j + 1, current)? {
                    Some(cost) => {
                        current = cost;
                        trace.block_moves += 1;
                    }
                    None => trace.rejected += 1,
                }
            }
        }
        trace.iterations += 1;
        let previous = trace.costs[trace.costs.len() - 1];
        trace.costs.push(current);
        if previous - current < cfg.gamma {
            trace.converged = true;
            break;
        }
    }

    let refined = Segmentation::new(ws.boundaries, initial.source_span())?;
    let cycles: Vec<GaitCycle<T>> = extract_cycles(signal, &refined, grid)?;
    let signature = average_signature(&cycles)?;
    Ok((refined, signature, trace))
}

/// Per-cycle `(1/L)·Σ_l (ḡ(τ_l) - ĝ_m(τ_l))²` for a segmentation, each
/// measured against that segmentation's own signature.
pub fn cycle_variances<T: Real>(
    seg: &Segmentation<T>,
    signal: &ScalarSignal<T>,
    grid: NormalizedGrid,
) -> Result<Vec<T>> {
    let cycles = extract_cycles(signal, seg, grid)?;
    let mean = average_signature(&cycles)?.mean;
    let len = T::from_count(grid.len());
    Ok(cycles
        .iter()
        .map(|c| squared_deviation(&c.values, &mean) / len)
        .collect())
}

/// Per-cycle variance lists before and after refinement (box-plot data).
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport<T> {
    pub before: Vec<T>,
    pub after: Vec<T>,
}

pub fn variance_report<T: Real>(
    before: &Segmentation<T>,
    after: &Segmentation<T>,
    signal: &ScalarSignal<T>,
    grid: NormalizedGrid,
) -> Result<VarianceReport<T>> {
    Ok(VarianceReport {
        before: cycle_variances(before, signal, grid)?,
        after: cycle_variances(after, signal, grid)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signature::cost_v;
    use std::f64::consts::TAU;

    fn periodic() -> ScalarSignal<f64> {
        ScalarSignal::sampled(0.0, 100.0, 2501, |t| {
            3.0 * (TAU * t).cos() + 1.5 * (2.0 * TAU * t).sin() + 0.8 * (3.0 * TAU * t).cos()
        })
        .unwrap()
    }

    fn grid() -> NormalizedGrid {
        NormalizedGrid::new(100).unwrap()
    }

    #[test]
    fn displaced_boundary_returns_to_period() {
        let sig = periodic();
        let mut b: Vec<f64> = (1..=21).map(f64::from).collect();
        b[2] += 0.1;
        let seg = Segmentation::new(b, sig.span()).unwrap();
        let cfg = OptConfig::default();
        let up = optimize_boundary(&seg, 2, &sig, grid(), &cfg).unwrap();
        assert!(up.feasible);
        assert!((up.time - 3.0).abs() <= cfg.line_search_tol, "{}", up.time);
    }

    #[test]
    fn empty_window_leaves_boundary() {
        let sig = periodic();
        // t_3 - t_1 = 3.0 > 2·eps_up.
        let seg = Segmentation::new(vec![1.0, 2.0, 3.0, 5.0], sig.span()).unwrap();
        let up = optimize_boundary(&seg, 2, &sig, grid(), &OptConfig::default()).unwrap();
        assert!(!up.feasible);
        assert_eq!(up.time, 3.0);
    }

    #[test]
    fn bad_index() {
        let sig = periodic();
        let seg = Segmentation::new(vec![1.0, 2.0, 3.0], sig.span()).unwrap();
        assert!(optimize_boundary(&seg, 0, &sig, grid(), &OptConfig::default()).is_err());
        assert!(optimize_boundary(&seg, 3, &sig, grid(), &OptConfig::default()).is_err());
    }

    #[test]
    fn optimal_start_stops_after_one_iteration() {
        let sig = periodic();
        let seg = Segmentation::new((1..=10).map(f64::from).collect(), sig.span()).unwrap();
        let (out, signature, trace) =
            optimize_segmentation(&seg, &sig, grid(), &OptConfig::default()).unwrap();
        assert_eq!(trace.iterations, 1);
        assert!(trace.converged);
        assert!(trace.costs[0] - trace.costs[1] < 1e-4);
        assert_eq!(signature.num_cycles, 9);
        for (a, b) in out.boundaries().iter().zip(seg.boundaries()) {
            assert!((a - b).abs() < 0.01);
        }
    }

    #[test]
    fn perturbed_boundaries_are_recovered() {
        let sig = periodic();
        let truth: Vec<f64> = (1..=11).map(f64::from).collect();
        let shifts = [
            0.0, 0.12, -0.1, 0.08, -0.13, 0.05, 0.1, -0.07, 0.14, -0.11, 0.06,
        ];
        let init: Vec<f64> = truth.iter().zip(shifts).map(|(t, s)| t + s).collect();
        let seg = Segmentation::new(init, sig.span()).unwrap();
        let (out, _, trace) =
            optimize_segmentation(&seg, &sig, grid(), &OptConfig::default()).unwrap();
        for w in trace.costs.windows(2) {
            assert!(w[1] <= w[0]);
        }
        for (a, b) in out.boundaries().iter().zip(&truth).skip(1) {
            assert!((a - b).abs() < 0.02, "{a} vs {b}");
        }
        let before = cost_v(&seg, &sig, grid()).unwrap();
        let after = cost_v(&out, &sig, grid()).unwrap();
        assert!(after < before);
    }

    #[test]
    fn infeasible_start_is_repaired() {
        let sig = periodic();
        // Second cycle is 0.3 s long.
        let seg = Segmentation::new(vec![1.0, 2.0, 2.3, 4.0, 5.0], sig.span()).unwrap();
        let (out, _, trace) =
            optimize_segmentation(&seg, &sig, grid(), &OptConfig::default()).unwrap();
        assert_eq!(trace.repaired, vec![2]);
        let cfg = OptConfig::<f64>::default();
        for d in out.durations() {
            assert!(cfg.is_feasible(d), "{d}");
        }
        for w in trace.costs.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn variance_report_edge_cases() {
        let sig = periodic();
        let seg = Segmentation::new(vec![1.0, 2.1, 3.0, 4.2], sig.span()).unwrap();
        let r = variance_report(&seg, &seg, &sig, grid()).unwrap();
        assert_eq!(r.before, r.after);
        let single = Segmentation::new(vec![1.0, 2.1], sig.span()).unwrap();
        let r = variance_report(&single, &single, &sig, grid()).unwrap();
        assert_eq!(r.before, vec![0.0]);
        assert_eq!(r.after, vec![0.0]);
    }

    #[test]
    fn config_validation() {
        let bad = OptConfig {
            eps_lo: 1.5,
            ..OptConfig::<f64>::default()
        };
        assert!(bad.validate().is_err());
        let bad = OptConfig {
            gamma: 0.0,
            ..OptConfig::<f64>::default()
        };
        assert!(bad.validate().is_err());
    }
}
