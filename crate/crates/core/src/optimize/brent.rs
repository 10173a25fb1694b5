//! Derivative-free scalar minimization: parabolic interpolation safeguarded
//! by golden-section steps (Brent's method).

use crate::error::Result;
use crate::scalar::Real;

/// `(3 - √5) / 2`.
const GOLDEN: f64 = 0.381_966_011_250_105_1;

/// Outcome of a bounded scalar minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMin<T> {
    pub x: T,
    pub fx: T,
    pub evaluations: usize,
}

/// Minimizes `f` over the open interval `(lo, hi)` to absolute tolerance `tol`.
///
/// If `start` lies strictly inside the interval it seeds the search, so the
/// returned point is never worse than `start`. Otherwise the search starts at
/// the golden-section point. `f` is never evaluated at the endpoints.
pub fn minimize_bounded<T, F>(
    lo: T,
    hi: T,
    start: Option<T>,
    tol: T,
    max_iter: usize,
    mut f: F,
) -> Result<ScalarMin<T>>
where
    T: Real,
    F: FnMut(T) -> Result<T>,
{
    let golden = T::lit(GOLDEN);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let sqrt_eps = T::epsilon().sqrt();

    let (mut a, mut b) = (lo, hi);
    let x0 = match start {
        Some(s) if s > a && s < b => s,
        _ => a + golden * (b - a),
    };
    let mut x = x0;
    let mut fx = f(x)?;
    let mut evaluations = 1;
    let (mut w, mut v) = (x, x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d = T::zero();
    let mut e = T::zero();

    for _ in 0..max_iter {
        let mid = half * (a + b);
        let tol1 = sqrt_eps * x.abs() + tol / T::lit(3.0);
        let tol2 = two * tol1;
        if (x - mid).abs() <= tol2 - half * (b - a) {
            break;
        }

        let mut use_golden = true;
        if e.abs() > tol1 {
            // Parabola through (v, fv), (w, fw), (x, fx).
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = two * (q - r);
            if q > T::zero() {
                p = -p;
            } else {
                q = -q;
            }
            let e_prev = e;
            if p.abs() < (half * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < mid { tol1 } else { -tol1 };
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x < mid { b - x } else { a - x };
            d = golden * e;
        }

        let u = if d.abs() >= tol1 {
            x + d
        } else if d > T::zero() {
            x + tol1
        } else {
            x - tol1
        };
        // Stay strictly inside the open interval.
        if !(u > lo && u < hi) {
            break;
        }
        let fu = f(u)?;
        evaluations += 1;

        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }

    Ok(ScalarMin { x, fx, evaluations })
}
