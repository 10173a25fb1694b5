//! Synthetic IMU recordings with known cycle boundaries.
//!
//! Each cycle replays a Fourier template at normalized phase over a randomly
//! drawn duration. The result is written on the z axis on top of a gravity
//! offset, with white Gaussian noise added, so the acceleration norm equals
//! `gravity_offset + template + noise` whenever that sum is positive.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::detect::Segmentation;
use crate::error::{Error, Result};
use crate::fourier::{reconstruct, FourierModel};
use crate::io::{ImuRecording, ImuSample};
use crate::scalar::Real;
use crate::signature::{NormalizedGrid, Signature};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec<T> {
    /// Shape of one cycle over normalized phase.
    pub template: FourierModel<T>,
    /// Seconds.
    pub mean_period: T,
    /// Seconds.
    pub period_jitter_std: T,
    /// m/s².
    pub noise_std: T,
    /// m/s².
    pub gravity_offset: T,
    /// Seconds.
    pub duration: T,
    /// Hz.
    pub rate: T,
    pub seed: u64,
    /// Drawn durations are truncated to `(eps_lo, eps_up)`.
    pub eps_lo: T,
    pub eps_up: T,
    /// Grid size of the ground-truth signature.
    pub grid_size: usize,
}

/// Built-in cycle shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    Walking,
    Running,
}

impl std::str::FromStr for Template {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "walking" => Ok(Template::Walking),
            "running" => Ok(Template::Running),
            _ => Err(Error::SynthSpec(format!(
                "unknown template `{s}` (walking|running)"
            ))),
        }
    }
}

impl Template {
    /// Order-8 profile with one swing above 2 and one below -2 per cycle.
    pub fn model<T: Real>(self) -> FourierModel<T> {
        let (a, b): (&[f64], &[f64]) = match self {
            Template::Walking => (
                &[0.0, 2.6, 0.9, -0.5, 0.35, -0.25, 0.2, 0.15],
                &[0.0, 1.4, -0.7, 0.4, -0.3, 0.2, -0.15, 0.12],
            ),
            Template::Running => (
                &[0.0, 5.5, 1.8, -1.0, 0.6, -0.4, 0.3, 0.2],
                &[0.0, 2.5, -1.2, 0.7, -0.5, 0.3, -0.2, 0.15],
            ),
        };
        let lit = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect();
        FourierModel::from_coefficients(lit(a), lit(b)).expect("static template is well formed")
    }

    pub fn mean_period(self) -> f64 {
        match self {
            Template::Walking => 1.0,
            Template::Running => 0.7,
        }
    }
}

impl<T: Real> SynthSpec<T> {
    /// 60 s at 100 Hz, ±0.1 s period jitter, noise at 10 dB below the template power.
    pub fn preset(template: Template, seed: u64) -> Self {
        let model = template.model::<T>();
        let noise_std = template_rms(&model) / T::lit(10f64.sqrt());
        Self {
            template: model,
            mean_period: T::lit(template.mean_period()),
            period_jitter_std: T::lit(0.1),
            noise_std,
            gravity_offset: T::lit(9.81),
            duration: T::lit(60.0),
            rate: T::lit(100.0),
            seed,
            eps_lo: T::lit(0.5),
            eps_up: T::lit(1.4),
            grid_size: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::SynthSpec(m));
        let all_finite = [
            self.mean_period,
            self.period_jitter_std,
            self.noise_std,
            self.gravity_offset,
            self.duration,
            self.rate,
            self.eps_lo,
            self.eps_up,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return bad("non-finite parameter".into());
        }
        if self.period_jitter_std < T::zero() || self.noise_std < T::zero() {
            return bad("standard deviations must be non-negative".into());
        }
        if self.mean_period - T::lit(3.0) * self.period_jitter_std <= T::zero() {
            return bad(format!(
                "mean_period - 3·jitter_std must be positive, got {} - 3·{}",
                self.mean_period, self.period_jitter_std
            ));
        }
        if !(T::zero() < self.eps_lo
            && self.eps_lo < self.mean_period
            && self.mean_period < self.eps_up)
        {
            return bad(format!(
                "need 0 < eps_lo < mean_period < eps_up, got {} < {} < {}",
                self.eps_lo, self.mean_period, self.eps_up
            ));
        }
        if self.duration <= T::zero() || self.rate <= T::zero() {
            return bad("duration and rate must be positive".into());
        }
        let nyquist =
            T::lit(2.0) * T::from_count(self.template.highest_harmonic()) / self.mean_period;
        if self.rate <= nyquist {
            return bad(format!(
                "rate {} must exceed 2·(highest harmonic)/mean_period = {nyquist}",
                self.rate
            ));
        }
        if self.grid_size < 2 {
            return bad("grid_size must be at least 2".into());
        }
        if (self.duration * self.rate).to_usize().unwrap_or(0) < 2 {
            return bad("fewer than 2 samples".into());
        }
        Ok(())
    }
}

/// Root-mean-square of the template over one cycle.
pub fn template_rms<T: Real>(model: &FourierModel<T>) -> T {
    let half = T::lit(0.5);
    let p: T = model.a[0] * model.a[0]
        + model.a[1..]
            .iter()
            .zip(&model.b[1..])
            .map(|(&a, &b)| half * (a * a + b * b))
            .sum::<T>();
    p.sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput<T> {
    pub recording: ImuRecording<T>,
    /// Exact boundaries `t_0 = 0 < t_1 < …` of every complete cycle.
    pub truth: Segmentation<T>,
    /// Template on the normalized grid.
    pub signature: Signature<T>,
}

fn draw_period(
    rng: &mut ChaCha8Rng,
    normal: Option<&Normal<f64>>,
    mean: f64,
    lo: f64,
    hi: f64,
) -> f64 {
    match normal {
        None => mean,
        Some(n) => loop {
            let d = n.sample(rng);
            if d > lo && d < hi {
                break d;
            }
        },
    }
}

/// Draws a recording from `spec`; identical specs give bit-identical output.
pub fn generate<T: Real>(spec: &SynthSpec<T>) -> Result<SynthOutput<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rate = spec.rate.as_f64();
    let n = (spec.duration.as_f64() * rate).round() as usize;
    let end = T::from_count(n - 1) / spec.rate;

    let mean = spec.mean_period.as_f64();
    let jitter = spec.period_jitter_std.as_f64();
    let period = (jitter > 0.0)
        .then(|| Normal::new(mean, jitter))
        .transpose()
        .map_err(|e| Error::SynthSpec(e.to_string()))?;
    let (lo, hi) = (spec.eps_lo.as_f64(), spec.eps_up.as_f64());

    // Cycle edges until the last one covers the final sample.
    let mut edges = vec![T::zero()];
    while edges[edges.len() - 1] <= end {
        let d = draw_period(&mut rng, period.as_ref(), mean, lo, hi);
        let next = edges[edges.len() - 1] + T::lit(d);
        edges.push(next);
    }

    let noise = (spec.noise_std > T::zero())
        .then(|| Normal::new(0.0, spec.noise_std.as_f64()))
        .transpose()
        .map_err(|e| Error::SynthSpec(e.to_string()))?;

    let mut samples = Vec::with_capacity(n);
    let mut cycle = 0;
    for i in 0..n {
        let t = T::from_count(i) / spec.rate;
        while edges[cycle + 1] <= t {
            cycle += 1;
        }
        let (s, e) = (edges[cycle], edges[cycle + 1]);
        let mut z = spec.gravity_offset + spec.template.eval((t - s) / (e - s));
        if let Some(nd) = &noise {
            z += T::lit(nd.sample(&mut rng));
        }
        samples.push(ImuSample {
            time: t,
            accel: [T::zero(), T::zero(), z],
        });
    }
    let recording = ImuRecording::with_rate(samples, spec.rate)?;

    let complete: Vec<T> = edges.into_iter().take_while(|&b| b <= end).collect();
    if complete.len() < 2 {
        return Err(Error::SynthSpec("duration shorter than one cycle".into()));
    }
    let truth = Segmentation::new(complete, recording.span())?;
    let grid = NormalizedGrid::new(spec.grid_size)?;
    let mean_shape = reconstruct(&spec.template, grid);
    let signature = Signature::new(
        mean_shape,
        vec![T::zero(); spec.grid_size],
        truth.num_cycles(),
    )?;
    Ok(SynthOutput {
        recording,
        truth,
        signature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walking(seed: u64) -> SynthSpec<f64> {
        SynthSpec::preset(Template::Walking, seed)
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = generate(&walking(7)).unwrap();
        let b = generate(&walking(7)).unwrap();
        assert_eq!(a, b);
        let c = generate(&walking(8)).unwrap();
        assert_ne!(a.recording, c.recording);
    }

    #[test]
    fn one_minute_at_one_second_has_59_or_60_cycles() {
        for seed in 0..10 {
            let mut spec = walking(seed);
            spec.period_jitter_std = 0.02;
            let out = generate(&spec).unwrap();
            let m = out.truth.num_cycles();
            assert!(m == 59 || m == 60, "seed {seed}: {m} cycles");
            let (lo, hi) = (0.5, 1.4);
            assert!(out.truth.durations().iter().all(|&d| d > lo && d < hi));
        }
    }

    #[test]
    fn cycle_count_follows_drawn_durations() {
        for seed in 0..5 {
            let out = generate(&walking(seed)).unwrap();
            let end = out.recording.span().1;
            let b = out.truth.boundaries();
            assert_eq!(b[0], 0.0);
            assert!(b[b.len() - 1] <= end);
            // The next boundary would pass the end, so it is never farther than eps_up.
            assert!(end - b[b.len() - 1] < 1.4);
        }
    }

    #[test]
    fn noise_only_std() {
        let mut spec = walking(3);
        spec.template = FourierModel::from_coefficients(vec![0.0], vec![0.0]).unwrap();
        spec.noise_std = 0.4;
        spec.duration = 120.0;
        let out = generate(&spec).unwrap();
        let z: Vec<f64> = out
            .recording
            .samples()
            .iter()
            .map(|s| s.accel[2] - 9.81)
            .collect();
        assert!(z.len() >= 10_000);
        let m = z.iter().sum::<f64>() / z.len() as f64;
        let sd = (z.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (z.len() - 1) as f64).sqrt();
        assert!((sd / 0.4 - 1.0).abs() < 0.05, "std {sd}");
    }

    #[test]
    fn noiseless_periodic_recording() {
        let mut spec = walking(1);
        spec.period_jitter_std = 0.0;
        spec.noise_std = 0.0;
        spec.duration = 5.0;
        let out = generate(&spec).unwrap();
        assert_eq!(out.truth.boundaries(), &[0.0, 1.0, 2.0, 3.0, 4.0]);
        let s = out.recording.samples();
        for i in 0..400 {
            assert!((s[i].accel[2] - s[i + 100].accel[2]).abs() < 1e-9);
        }
    }

    #[test]
    fn spec_validation() {
        let mut s = walking(0);
        s.period_jitter_std = 0.4;
        assert!(generate(&s).is_err());
        let mut s = walking(0);
        s.rate = 10.0;
        assert!(generate(&s).is_err());
        let mut s = walking(0);
        s.eps_up = 0.9;
        assert!(generate(&s).is_err());
        assert!("jogging".parse::<Template>().is_err());
    }

    #[test]
    fn rms_of_template() {
        let m = FourierModel::from_coefficients(vec![0.0, 3.0], vec![0.0, 4.0]).unwrap();
        assert!((template_rms(&m) - (12.5f64).sqrt()).abs() < 1e-12);
    }
}
