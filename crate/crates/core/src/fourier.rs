//! Truncated Fourier-series fit of a signature, order selection and residuals.
//!
//! For order `K` the model is
//! `Ĝ[l] = Σ_{k=0}^{K-1} a_k cos(2πτ_l k) + b_k sin(2πτ_l k)` with `b_0 ≡ 0`,
//! so it has `P = 2K - 1` free parameters. The design matrix columns are
//! `cos(2πτk)` for `k = 0..K` followed by `sin(2πτk)` for `k = 1..K`.
//! The sine column for `k = 0` is identically zero and is left out.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signature::{NormalizedGrid, Signature};

/// Column-major `L × P` design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> DesignMatrix<T> {
    pub fn new(order: usize, grid: NormalizedGrid) -> Self {
        let rows = grid.len();
        let cols = 2 * order - 1;
        let mut data = Vec::with_capacity(rows * cols);
        let taus: Vec<T> = grid.points();
        for k in 0..order {
            let w = T::TAU() * T::from_count(k);
            data.extend(taus.iter().map(|&tau| (w * tau).cos()));
        }
        for k in 1..order {
            let w = T::TAU() * T::from_count(k);
            data.extend(taus.iter().map(|&tau| (w * tau).sin()));
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[j * self.rows + i]
    }

    /// `H θ`.
    pub fn apply(&self, theta: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows];
        for (j, &t) in theta.iter().enumerate() {
            for (o, &h) in out.iter_mut().zip(self.column(j)) {
                *o += h * t;
            }
        }
        out
    }

    /// `Hᵀ r`.
    pub fn transpose_apply(&self, r: &[T]) -> Vec<T> {
        (0..self.cols)
            .map(|j| self.column(j).iter().zip(r).map(|(&h, &v)| h * v).sum())
            .collect()
    }
}

/// Fitted Fourier-series model of order `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierModel<T> {
    pub order: usize,
    /// Cosine coefficients `a_0..a_{K-1}`.
    pub a: Vec<T>,
    /// Sine coefficients `b_0..b_{K-1}`, `b_0 = 0`.
    pub b: Vec<T>,
    /// Residual sum of squares of the fit.
    pub rss: T,
    pub grid_size: usize,
}

impl<T: Real> FourierModel<T> {
    /// Builds a model from coefficients (RSS and grid size unset).
    pub fn from_coefficients(a: Vec<T>, mut b: Vec<T>) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::Config(format!(
                "coefficient vectors must be non-empty and equal length, got {} and {}",
                a.len(),
                b.len()
            )));
        }
        b[0] = T::zero();
        Ok(Self {
            order: a.len(),
            a,
            b,
            rss: T::zero(),
            grid_size: 0,
        })
    }

    /// Parameter vector `[a_0..a_{K-1}, b_1..b_{K-1}]` in design-matrix column order.
    pub fn theta(&self) -> Vec<T> {
        self.a.iter().chain(&self.b[1..]).copied().collect()
    }

    /// Evaluates the series at phase `tau`.
    pub fn eval(&self, tau: T) -> T {
        self.a
            .iter()
            .zip(&self.b)
            .enumerate()
            .map(|(k, (&a, &b))| {
                let w = T::TAU() * T::from_count(k) * tau;
                a * w.cos() + b * w.sin()
            })
            .sum()
    }

    /// Highest harmonic with a non-zero coefficient.
    pub fn highest_harmonic(&self) -> usize {
        (0..self.order)
            .rev()
            .find(|&k| self.a[k] != T::zero() || self.b[k] != T::zero())
            .unwrap_or(0)
    }
}

/// Householder QR of a column-major matrix, solving least squares in place.
struct Qr<T> {
    rows: usize,
    cols: usize,
    /// Householder vectors below the diagonal, `R` on and above.
    a: Vec<T>,
    diag: Vec<T>,
    betas: Vec<T>,
}

impl<T: Real> Qr<T> {
    fn factor(h: &DesignMatrix<T>) -> Self {
        let (rows, cols) = (h.rows, h.cols);
        let mut a = h.data.clone();
        let mut diag = vec![T::zero(); cols];
        let mut betas = vec![T::zero(); cols];
        for j in 0..cols {
            let col = &mut a[j * rows..(j + 1) * rows];
            let norm = col[j..].iter().map(|&v| v * v).sum::<T>().sqrt();
            if norm == T::zero() {
                continue;
            }
            let alpha = if col[j] > T::zero() { -norm } else { norm };
            // v = x - alpha e_1 stored in place.
            col[j] -= alpha;
            let vtv: T = col[j..].iter().map(|&v| v * v).sum();
            let beta = if vtv > T::zero() {
                T::lit(2.0) / vtv
            } else {
                T::zero()
            };
            diag[j] = alpha;
            betas[j] = beta;
            let (head, tail) = a.split_at_mut((j + 1) * rows);
            let v = &head[j * rows + j..(j + 1) * rows];
            for c in 0..cols - j - 1 {
                let target = &mut tail[c * rows + j..(c + 1) * rows];
                let dot: T = v.iter().zip(target.iter()).map(|(&x, &y)| x * y).sum();
                let s = beta * dot;
                for (t, &x) in target.iter_mut().zip(v) {
                    *t -= s * x;
                }
            }
        }
        Self {
            rows,
            cols,
            a,
            diag,
            betas,
        }
    }

    fn is_full_rank(&self) -> bool {
        let scale = self.diag.iter().fold(T::zero(), |m, d| m.max(d.abs()));
        let tol = scale * T::epsilon() * T::from_count(self.rows.max(self.cols)) * T::lit(10.0);
        self.diag.iter().all(|d| d.abs() > tol)
    }

    /// Least-squares solution of `H θ ≈ y`.
    fn solve(&self, y: &[T]) -> Vec<T> {
        let rows = self.rows;
        let mut qty = y.to_vec();
        for j in 0..self.cols {
            let v = &self.a[j * rows + j..(j + 1) * rows];
            let dot: T = v.iter().zip(&qty[j..]).map(|(&x, &z)| x * z).sum();
            let s = self.betas[j] * dot;
            for (z, &x) in qty[j..].iter_mut().zip(v) {
                *z -= s * x;
            }
        }
        let mut theta = vec![T::zero(); self.cols];
        for i in (0..self.cols).rev() {
            let mut acc = qty[i];
            for (k, th) in theta.iter().enumerate().skip(i + 1) {
                acc -= self.a[k * rows + i] * *th;
            }
            theta[i] = acc / self.diag[i];
        }
        theta
    }
}

/// Least-squares fit of order `K` to the signature mean via Householder QR.
pub fn fit_fourier<T: Real>(sig: &Signature<T>, order: usize) -> Result<FourierModel<T>> {
    let len = sig.grid_size();
    if order == 0 {
        return Err(Error::Config("model order must be at least 1".into()));
    }
    let params = 2 * order - 1;
    if params > len {
        return Err(Error::Underdetermined { params, grid: len });
    }
    let grid = NormalizedGrid::new(len)?;
    let h = DesignMatrix::new(order, grid);
    let qr = Qr::factor(&h);
    if !qr.is_full_rank() {
        return Err(Error::RankDeficient);
    }
    let theta = qr.solve(&sig.mean);
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::RankDeficient);
    }
    let fitted = h.apply(&theta);
    let rss = sig
        .mean
        .iter()
        .zip(&fitted)
        .map(|(&g, &f)| (g - f) * (g - f))
        .sum();
    let a = theta[..order].to_vec();
    let mut b = vec![T::zero(); order];
    b[1..].copy_from_slice(&theta[order..]);
    Ok(FourierModel {
        order,
        a,
        b,
        rss,
        grid_size: len,
    })
}

/// Evaluates the model at every grid point.
pub fn reconstruct<T: Real>(model: &FourierModel<T>, grid: NormalizedGrid) -> Vec<T> {
    (0..grid.len()).map(|i| model.eval(grid.tau(i))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Aic,
    Bic,
}

impl std::str::FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aic" => Ok(Criterion::Aic),
            "bic" => Ok(Criterion::Bic),
            _ => Err(Error::Config(format!("unknown criterion `{s}` (aic|bic)"))),
        }
    }
}

/// What the information-criterion penalty counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PenaltyCount {
    /// Free parameters `P = 2K - 1`.
    #[default]
    Params,
    /// The model order `K` itself.
    Order,
}

impl std::str::FromStr for PenaltyCount {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "params" => Ok(PenaltyCount::Params),
            "order" => Ok(PenaltyCount::Order),
            _ => Err(Error::Config(format!(
                "unknown penalty count `{s}` (order|params)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderScore<T> {
    pub order: usize,
    pub rss: T,
    pub aic: T,
    pub bic: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderSelection<T> {
    pub best: usize,
    pub criterion: Criterion,
    pub scores: Vec<OrderScore<T>>,
}

/// Scores every order in `[k_min, k_max]` with a Gaussian concentrated
/// likelihood, `L·ln(RSS/L)`, plus an AIC or BIC penalty, and returns the
/// minimizer. Ties go to the smaller order.
///
/// RSS is floored at `‖ḡ‖²·(L·ε)²` so that fits exact to round-off score
/// equally instead of ranking on floating-point noise.
pub fn select_order<T: Real>(
    sig: &Signature<T>,
    k_min: usize,
    k_max: usize,
    criterion: Criterion,
    penalty: PenaltyCount,
) -> Result<OrderSelection<T>> {
    let len = sig.grid_size();
    if k_min == 0 || k_min > k_max || 2 * k_max - 1 > len {
        return Err(Error::InvalidOrderRange {
            min: k_min,
            max: k_max,
        });
    }
    let l = T::from_count(len);
    let energy: T = sig.mean.iter().map(|&g| g * g).sum();
    let floor = (energy * (l * T::epsilon()).powi(2)).max(T::min_positive_value());

    let mut scores = Vec::with_capacity(k_max - k_min + 1);
    for order in k_min..=k_max {
        let model = fit_fourier(sig, order)?;
        let fit = l * (model.rss.max(floor) / l).ln();
        let count = T::from_count(match penalty {
            PenaltyCount::Params => 2 * order - 1,
            PenaltyCount::Order => order,
        });
        scores.push(OrderScore {
            order,
            rss: model.rss,
            aic: fit + T::lit(2.0) * count,
            bic: fit + count * l.ln(),
        });
    }
    let pick = |s: &OrderScore<T>| match criterion {
        Criterion::Aic => s.aic,
        Criterion::Bic => s.bic,
    };
    let mut best = scores[0];
    for s in &scores[1..] {
        if pick(s) < pick(&best) {
            best = *s;
        }
    }
    Ok(OrderSelection {
        best: best.order,
        criterion,
        scores,
    })
}

/// Residuals of a fit with a 95% band around their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals<T> {
    /// `reconstruct[l] - mean[l]`.
    pub values: Vec<T>,
    pub mean: T,
    pub lower: T,
    pub upper: T,
}

pub fn approximation_residuals<T: Real>(
    model: &FourierModel<T>,
    sig: &Signature<T>,
) -> Result<Residuals<T>> {
    let grid = NormalizedGrid::new(sig.grid_size())?;
    let values: Vec<T> = reconstruct(model, grid)
        .into_iter()
        .zip(&sig.mean)
        .map(|(r, &m)| r - m)
        .collect();
    let n = T::from_count(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    let var = values.iter().map(|&r| (r - mean) * (r - mean)).sum::<T>() / (n - T::one());
    let half = T::lit(1.96) * var.sqrt();
    Ok(Residuals {
        values,
        mean,
        lower: mean - half,
        upper: mean + half,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn sig_from(len: usize, f: impl Fn(f64) -> f64) -> Signature<f64> {
        let g = NormalizedGrid::new(len).unwrap();
        Signature::from_mean(g.points().into_iter().map(f).collect()).unwrap()
    }

    #[test]
    fn exact_three_term_signal() {
        let sig = sig_from(100, |t| {
            3.0 + 2.0 * (TAU * t).cos() - 0.5 * (2.0 * TAU * t).sin()
        });
        let m = fit_fourier(&sig, 3).unwrap();
        for (x, e) in m.a.iter().zip([3.0, 2.0, 0.0]) {
            assert!((x - e).abs() < 1e-9);
        }
        for (x, e) in m.b.iter().zip([0.0, 0.0, -0.5]) {
            assert!((x - e).abs() < 1e-9);
        }
        assert!(m.rss < 1e-18);
    }

    #[test]
    fn constant_signal() {
        let sig = sig_from(50, |_| 4.2);
        for k in [1, 5, 25] {
            let m = fit_fourier(&sig, k).unwrap();
            assert!((m.a[0] - 4.2).abs() < 1e-9);
            assert!(m.a[1..].iter().chain(&m.b).all(|c| c.abs() < 1e-9));
        }
    }

    #[test]
    fn underdetermined() {
        let sig = sig_from(10, |t| t);
        assert!(fit_fourier(&sig, 5).is_ok());
        assert!(matches!(
            fit_fourier(&sig, 6),
            Err(Error::Underdetermined {
                params: 11,
                grid: 10
            })
        ));
        assert!(fit_fourier(&sig, 0).is_err());
    }

    #[test]
    fn reconstruct_constant_model() {
        let m = FourierModel::from_coefficients(vec![1.0, 0.0, 0.0], vec![0.0; 3]).unwrap();
        assert!(reconstruct(&m, NormalizedGrid::new(7).unwrap())
            .iter()
            .all(|&v| (v - 1.0f64).abs() < 1e-15));
    }

    #[test]
    fn interpolatory_order_is_exact() {
        let sig = sig_from(21, |t| (t * 7.0).sin() + t * t);
        let m = fit_fourier(&sig, 11).unwrap();
        let rec = reconstruct(&m, NormalizedGrid::new(21).unwrap());
        for (r, g) in rec.iter().zip(&sig.mean) {
            assert!((r - g).abs() < 1e-8);
        }
        let res = approximation_residuals(&m, &sig).unwrap();
        assert!(res.values.iter().all(|r| r.abs() < 1e-8));
    }

    #[test]
    fn noise_free_order_selected_exactly() {
        let sig = sig_from(100, |t| 1.0 + (TAU * t).cos() + 0.7 * (2.0 * TAU * t).sin());
        for c in [Criterion::Aic, Criterion::Bic] {
            for p in [PenaltyCount::Params, PenaltyCount::Order] {
                let sel = select_order(&sig, 1, 25, c, p).unwrap();
                assert_eq!(sel.best, 3);
                assert_eq!(sel.scores.len(), 25);
            }
        }
    }

    #[test]
    fn invalid_ranges() {
        let sig = sig_from(20, |t| t);
        assert!(select_order(&sig, 0, 3, Criterion::Aic, PenaltyCount::Params).is_err());
        assert!(select_order(&sig, 4, 3, Criterion::Aic, PenaltyCount::Params).is_err());
        assert!(select_order(&sig, 1, 11, Criterion::Aic, PenaltyCount::Params).is_err());
        assert!(select_order(&sig, 1, 10, Criterion::Aic, PenaltyCount::Params).is_ok());
    }

    #[test]
    fn parse_options() {
        assert_eq!("BIC".parse::<Criterion>().unwrap(), Criterion::Bic);
        assert_eq!(
            "order".parse::<PenaltyCount>().unwrap(),
            PenaltyCount::Order
        );
        assert!("mdl".parse::<Criterion>().is_err());
    }

    #[test]
    fn single_precision_fit() {
        let g = NormalizedGrid::new(64).unwrap();
        let mean: Vec<f32> = g
            .points::<f32>()
            .iter()
            .map(|&t| 1.0 + (std::f32::consts::TAU * t).cos())
            .collect();
        let m = fit_fourier(&Signature::from_mean(mean).unwrap(), 4).unwrap();
        assert!((m.a[0] - 1.0).abs() < 1e-5 && (m.a[1] - 1.0).abs() < 1e-5);
    }
}
