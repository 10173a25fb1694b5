//! Butterworth band-pass design as a cascade of second-order sections.
//!
//! The analog low-pass prototype of order `n` is mapped to a band-pass with
//! the standard `s -> (s² + ω0²)/(s·B)` substitution and discretized with the
//! bilinear transform using pre-warped band edges. The result has `2n` poles
//! and is stored as `n` biquads, each with one zero at `z = 1` and one at
//! `z = -1`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `H(z) = (b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad<T> {
    pub b: [T; 3],
    pub a: [T; 2],
}

impl<T: Real> Biquad<T> {
    /// Response at normalized angular frequency `omega` (rad/sample).
    pub fn response(&self, omega: T) -> Complex<T> {
        let z1 = Complex::from_polar(T::one(), -omega);
        let z2 = z1 * z1;
        let num = z1 * self.b[1] + z2 * self.b[2] + self.b[0];
        let den = z1 * self.a[0] + z2 * self.a[1] + T::one();
        num / den
    }

    /// Roots of `z² + a1 z + a2`.
    pub fn poles(&self) -> [Complex<T>; 2] {
        let a1 = Complex::from(self.a[0]);
        let a2 = Complex::from(self.a[1]);
        let two = T::lit(2.0);
        let disc = (a1 * a1 - a2 * T::lit(4.0)).sqrt();
        [(-a1 + disc) / two, (-a1 - disc) / two]
    }

    /// DC-steady state of the transposed direct form II for a unit step input.
    pub(crate) fn step_state(&self) -> [T; 2] {
        let gain = (self.b[0] + self.b[1] + self.b[2]) / (T::one() + self.a[0] + self.a[1]);
        let s1 = self.b[2] - self.a[1] * gain;
        let s0 = self.b[1] - self.a[0] * gain + s1;
        [s0, s1]
    }

    pub(crate) fn dc_gain(&self) -> T {
        (self.b[0] + self.b[1] + self.b[2]) / (T::one() + self.a[0] + self.a[1])
    }
}

/// A validated, stable Butterworth band-pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BandpassDesign<T> {
    /// Order of the analog low-pass prototype; the band-pass has twice as many poles.
    pub order: usize,
    pub low_cut: T,
    pub high_cut: T,
    pub sample_rate: T,
    pub sections: Vec<Biquad<T>>,
}

impl<T: Real> BandpassDesign<T> {
    /// Complex response of one causal pass at `freq` Hz.
    pub fn response(&self, freq: T) -> Complex<T> {
        let omega = T::TAU() * freq / self.sample_rate;
        self.sections
            .iter()
            .fold(Complex::from(T::one()), |acc, s| acc * s.response(omega))
    }

    /// `|H(f)|` of one causal pass.
    pub fn magnitude(&self, freq: T) -> T {
        self.response(freq).norm()
    }

    /// `|H(f)|²`, the magnitude of the forward-backward operator.
    pub fn zero_phase_magnitude(&self, freq: T) -> T {
        self.response(freq).norm_sqr()
    }

    /// Number of delay elements across the cascade.
    pub fn state_dim(&self) -> usize {
        2 * self.sections.len()
    }

    /// Largest pole radius across all sections.
    pub fn max_pole_radius(&self) -> T {
        self.sections
            .iter()
            .flat_map(|s| s.poles())
            .map(|p| p.norm())
            .fold(T::zero(), T::max)
    }
}

/// Designs a Butterworth band-pass with an `order`-th order low-pass prototype.
pub fn design_bandpass<T: Real>(
    order: usize,
    low_cut: T,
    high_cut: T,
    sample_rate: T,
) -> Result<BandpassDesign<T>> {
    if order == 0 {
        return Err(Error::Config("filter order must be at least 1".into()));
    }
    if !(sample_rate > T::zero()) {
        return Err(Error::CutoffRange(format!(
            "sample rate must be positive, got {sample_rate}"
        )));
    }
    if low_cut >= high_cut {
        return Err(Error::CutoffOrder);
    }
    let nyquist = sample_rate / T::lit(2.0);
    if !(low_cut > T::zero()) || !(high_cut < nyquist) {
        return Err(Error::CutoffRange(format!(
            "need 0 < low_cut < high_cut < {nyquist} Hz, got [{low_cut}, {high_cut}]"
        )));
    }

    let two = T::lit(2.0);
    let fs2 = two * sample_rate;
    // Pre-warped analog band edges (rad/s).
    let warp = |f: T| fs2 * (T::PI() * f / sample_rate).tan();
    let w_lo = warp(low_cut);
    let w_hi = warp(high_cut);
    let bw = w_hi - w_lo;
    let w0_sq = w_lo * w_hi;

    let mut poles: Vec<Complex<T>> = Vec::with_capacity(2 * order);
    for k in 0..order {
        let theta = T::PI() * T::from_count(2 * k + order + 1) / T::from_count(2 * order);
        let proto = Complex::from_polar(T::one(), theta);
        let pb = proto * bw;
        let disc = (pb * pb - Complex::from(T::lit(4.0) * w0_sq)).sqrt();
        for s in [(pb + disc) / two, (pb - disc) / two] {
            poles.push((Complex::from(fs2) + s) / (Complex::from(fs2) - s));
        }
    }

    let sections = pair_poles(&poles)
        .into_iter()
        .map(|(p, q)| {
            let a1 = -(p + q).re;
            let a2 = (p * q).re;
            Biquad {
                b: [T::one(), T::zero(), -T::one()],
                a: [a1, a2],
            }
        })
        .collect::<Vec<_>>();

    let mut design = BandpassDesign {
        order,
        low_cut,
        high_cut,
        sample_rate,
        sections,
    };

    // Unit gain at the digital image of the geometric band centre.
    let centre = T::lit(2.0) * (w0_sq.sqrt() / fs2).atan() * sample_rate / T::TAU();
    let gain = design.magnitude(centre);
    if !(gain.is_finite() && gain > T::zero()) {
        return Err(Error::UnstableFilter(f64::NAN));
    }
    let per_section = gain.powf(T::one() / T::from_count(design.sections.len()));
    for s in &mut design.sections {
        for b in &mut s.b {
            *b /= per_section;
        }
    }

    let radius = design.max_pole_radius();
    if !(radius < T::one()) {
        return Err(Error::UnstableFilter(radius.as_f64()));
    }
    Ok(design)
}

/// Groups poles into conjugate pairs; leftover real poles are paired with each other.
fn pair_poles<T: Real>(poles: &[Complex<T>]) -> Vec<(Complex<T>, Complex<T>)> {
    let tiny = T::epsilon().sqrt();
    let mut pairs = Vec::new();
    let mut reals = Vec::new();
    for &p in poles {
        if p.im > tiny {
            pairs.push((p, p.conj()));
        } else if p.im.abs() <= tiny {
            reals.push(Complex::from(p.re));
        }
    }
    reals.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap_or(std::cmp::Ordering::Equal));
    for chunk in reals.chunks(2) {
        match chunk {
            [p, q] => pairs.push((*p, *q)),
            // An odd leftover cannot occur: band-pass poles come in pairs.
            [p] => pairs.push((*p, Complex::from(T::zero()))),
            _ => unreachable!(),
        }
    }
    pairs
}
