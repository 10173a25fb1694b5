//! Pipeline configuration as flat `key = value` text.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! skipped. Settings are applied in order, so a later line (or a command-line
//! override applied after loading a file) wins over an earlier one.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::classify::Similarity;
use crate::detect::Thresholds;
use crate::error::{Error, Result};
use crate::fourier::{Criterion, PenaltyCount};
use crate::optimize::OptConfig;

/// Gait mode presets for the detector thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Walking,
    Running,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "walking" => Ok(Mode::Walking),
            "running" => Ok(Mode::Running),
            _ => Err(Error::Config(format!(
                "unknown mode `{s}` (walking|running)"
            ))),
        }
    }
}

impl Mode {
    pub fn thresholds(self) -> Thresholds<f64> {
        match self {
            Mode::Walking => Thresholds::walking(),
            Mode::Running => Thresholds::running(),
        }
    }
}

/// How the Fourier order is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderChoice {
    Fixed(usize),
    Select { min: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub band_lo: f64,
    pub band_hi: f64,
    pub filter_order: usize,
    pub eps_p: f64,
    pub eps_v: f64,
    pub eps_lo: f64,
    pub eps_up: f64,
    pub gamma: f64,
    pub grid_size: usize,
    pub max_outer_iters: usize,
    pub line_search_tol: f64,
    pub block_shifts: bool,
    pub order: OrderChoice,
    pub criterion: Criterion,
    pub penalty_count: PenaltyCount,
    pub similarity: Similarity,
    /// Signature library for the optional classification stage.
    pub library: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let opt = OptConfig::<f64>::default();
        Self {
            band_lo: 0.1,
            band_hi: 10.0,
            filter_order: 4,
            eps_p: 2.0,
            eps_v: -2.0,
            eps_lo: opt.eps_lo,
            eps_up: opt.eps_up,
            gamma: opt.gamma,
            grid_size: 100,
            max_outer_iters: opt.max_outer_iters,
            line_search_tol: opt.line_search_tol,
            block_shifts: opt.block_shifts,
            order: OrderChoice::Select { min: 1, max: 25 },
            criterion: Criterion::Bic,
            penalty_count: PenaltyCount::Params,
            similarity: Similarity::Pearson,
            library: None,
        }
    }
}

fn parse_num<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

/// Parses `a:b` into a pair.
pub fn parse_range<V: std::str::FromStr>(key: &str, value: &str) -> Result<(V, V)> {
    let (a, b) = value
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("`{key}` expects `lo:hi`, got `{value}`")))?;
    Ok((parse_num(key, a.trim())?, parse_num(key, b.trim())?))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "invalid boolean `{value}` for `{key}`"
        ))),
    }
}

impl PipelineConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let value = value.trim();
        match key {
            "band" => (self.band_lo, self.band_hi) = parse_range(key, value)?,
            "band_lo" => self.band_lo = parse_num(key, value)?,
            "band_hi" => self.band_hi = parse_num(key, value)?,
            "filter_order" => self.filter_order = parse_num(key, value)?,
            "mode" => {
                let t = value.parse::<Mode>()?.thresholds();
                (self.eps_p, self.eps_v) = (t.eps_p, t.eps_v);
            }
            "eps_p" => self.eps_p = parse_num(key, value)?,
            "eps_v" => self.eps_v = parse_num(key, value)?,
            "eps_lo" => self.eps_lo = parse_num(key, value)?,
            "eps_up" => self.eps_up = parse_num(key, value)?,
            "gamma" => self.gamma = parse_num(key, value)?,
            "grid_size" => self.grid_size = parse_num(key, value)?,
            "max_outer_iters" => self.max_outer_iters = parse_num(key, value)?,
            "line_search_tol" => self.line_search_tol = parse_num(key, value)?,
            "block_shifts" => self.block_shifts = parse_bool(key, value)?,
            "order" => self.order = OrderChoice::Fixed(parse_num(key, value)?),
            "select" => {
                let (min, max) = parse_range(key, value)?;
                self.order = OrderChoice::Select { min, max };
            }
            "criterion" => self.criterion = value.parse()?,
            "penalty_count" => self.penalty_count = value.parse()?,
            "similarity" => self.similarity = value.parse()?,
            "library" => self.library = (!value.is_empty()).then(|| PathBuf::from(value)),
            _ => return Err(Error::Config(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` text on top of the current settings.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    i + 1
                ))
            })?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    /// Defaults overridden by the file at `path`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Checks every invariant that does not depend on the recording.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0 < self.band_lo && self.band_lo < self.band_hi) {
            return bad(format!(
                "need 0 < band_lo < band_hi, got {}:{}",
                self.band_lo, self.band_hi
            ));
        }
        if self.filter_order == 0 {
            return bad("filter_order must be at least 1".into());
        }
        if !(self.eps_v < 0.0 && 0.0 < self.eps_p) {
            return bad(format!(
                "need eps_v < 0 < eps_p, got eps_p={}, eps_v={}",
                self.eps_p, self.eps_v
            ));
        }
        if !(0.0 < self.eps_lo && self.eps_lo < self.eps_up) {
            return bad(format!(
                "need 0 < eps_lo < eps_up, got eps_lo={}, eps_up={}",
                self.eps_lo, self.eps_up
            ));
        }
        if !(self.gamma > 0.0) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.line_search_tol > 0.0) {
            return bad(format!(
                "line_search_tol must be positive, got {}",
                self.line_search_tol
            ));
        }
        if self.max_outer_iters == 0 {
            return bad("max_outer_iters must be at least 1".into());
        }
        if self.grid_size < 2 {
            return bad(format!(
                "grid_size must be at least 2, got {}",
                self.grid_size
            ));
        }
        let max_order = match self.order {
            OrderChoice::Fixed(k) => {
                if k == 0 {
                    return bad("order must be at least 1".into());
                }
                k
            }
            OrderChoice::Select { min, max } => {
                if min == 0 || min > max {
                    return bad(format!("invalid order range {min}:{max}"));
                }
                max
            }
        };
        if 2 * max_order - 1 > self.grid_size {
            return bad(format!(
                "order {max_order} needs {} parameters, more than grid_size {}",
                2 * max_order - 1,
                self.grid_size
            ));
        }
        Ok(())
    }

    /// Checks the band against the sampling rate of a recording.
    pub fn validate_for_rate(&self, rate: f64) -> Result<()> {
        if self.band_hi >= rate / 2.0 {
            return Err(Error::Config(format!(
                "band_hi {} must be below half the sampling rate ({rate} Hz)",
                self.band_hi
            )));
        }
        Ok(())
    }

    pub fn thresholds(&self) -> Thresholds<f64> {
        Thresholds {
            eps_p: self.eps_p,
            eps_v: self.eps_v,
        }
    }

    pub fn opt_config(&self) -> OptConfig<f64> {
        OptConfig {
            eps_lo: self.eps_lo,
            eps_up: self.eps_up,
            gamma: self.gamma,
            max_outer_iters: self.max_outer_iters,
            line_search_tol: self.line_search_tol,
            block_shifts: self.block_shifts,
        }
    }

    /// Every setting as `(key, value)` text, in a stable order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut v = vec![
            ("band_lo", self.band_lo.to_string()),
            ("band_hi", self.band_hi.to_string()),
            ("filter_order", self.filter_order.to_string()),
            ("eps_p", self.eps_p.to_string()),
            ("eps_v", self.eps_v.to_string()),
            ("eps_lo", self.eps_lo.to_string()),
            ("eps_up", self.eps_up.to_string()),
            ("gamma", self.gamma.to_string()),
            ("grid_size", self.grid_size.to_string()),
            ("max_outer_iters", self.max_outer_iters.to_string()),
            ("line_search_tol", self.line_search_tol.to_string()),
            ("block_shifts", self.block_shifts.to_string()),
        ];
        match self.order {
            OrderChoice::Fixed(k) => v.push(("order", k.to_string())),
            OrderChoice::Select { min, max } => v.push(("select", format!("{min}:{max}"))),
        }
        v.push((
            "criterion",
            match self.criterion {
                Criterion::Aic => "aic",
                Criterion::Bic => "bic",
            }
            .into(),
        ));
        v.push((
            "penalty_count",
            match self.penalty_count {
                PenaltyCount::Params => "params",
                PenaltyCount::Order => "order",
            }
            .into(),
        ));
        v.push((
            "similarity",
            match self.similarity {
                Similarity::Pearson => "pearson",
                Similarity::Cosine => "cosine",
            }
            .into(),
        ));
        if let Some(lib) = &self.library {
            v.push(("library", lib.display().to_string()));
        }
        v
    }

    /// Text that [`PipelineConfig::apply_text`] parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!(
            (c.eps_p, c.eps_v, c.eps_lo, c.eps_up),
            (2.0, -2.0, 0.5, 1.4)
        );
        assert_eq!(c.grid_size, 100);
    }

    #[test]
    fn text_round_trip_and_precedence() {
        let mut c = PipelineConfig::default();
        c.apply_text("# comment\n\nmode = running\nselect = 2:12\ngamma=1e-5\n")
            .unwrap();
        assert_eq!((c.eps_p, c.eps_v), (4.0, -5.0));
        assert_eq!(c.order, OrderChoice::Select { min: 2, max: 12 });
        c.set("eps_p", "3.5").unwrap();
        assert_eq!(c.eps_p, 3.5);
        let mut d = PipelineConfig::default();
        d.apply_text(&c.to_text()).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn invalid_settings() {
        let mut c = PipelineConfig::default();
        assert!(c.set("nonsense", "1").is_err());
        assert!(c.set("gamma", "abc").is_err());
        assert!(c.apply_text("gamma 1").is_err());
        c.set("eps_lo", "2.0").unwrap();
        assert!(c.validate().unwrap_err().to_string().contains("eps_lo"));
        let mut c = PipelineConfig::default();
        c.set("select", "1:60").unwrap();
        assert!(c.validate().is_err());
        let c = PipelineConfig::default();
        assert!(c.validate_for_rate(15.0).is_err());
        assert!(c.validate_for_rate(100.0).is_ok());
    }
}
