//! Recording ingestion (the `t,ax,ay,az[,gx,gy,gz]` CSV contract) and plain
//! numeric CSV output.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::preprocess::ScalarSignal;
use crate::scalar::Real;

/// One timestamped tri-axial accelerometer sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample<T> {
    /// Seconds.
    pub time: T,
    /// m/s².
    pub accel: [T; 3],
}

/// A validated accelerometer recording: at least two samples with strictly
/// increasing finite timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct ImuRecording<T> {
    samples: Vec<ImuSample<T>>,
    nominal_rate: T,
}

impl<T: Real> ImuRecording<T> {
    /// Validates the samples and infers the nominal rate as the median of `1/Δt`.
    pub fn new(samples: Vec<ImuSample<T>>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::TooFewSamples {
                found: samples.len(),
            });
        }
        for (i, s) in samples.iter().enumerate() {
            // Line numbers count the CSV header as line 1.
            let line = i as u64 + 2;
            if !s.time.is_finite() || s.accel.iter().any(|a| !a.is_finite()) {
                return Err(Error::MalformedRow {
                    line,
                    reason: "non-finite value".into(),
                });
            }
            if i > 0 && s.time <= samples[i - 1].time {
                return Err(Error::NonMonotoneTime { line });
            }
        }
        let nominal_rate = median_rate(&samples);
        Ok(Self {
            samples,
            nominal_rate,
        })
    }

    /// Like [`ImuRecording::new`] but with a caller-supplied nominal rate.
    pub fn with_rate(samples: Vec<ImuSample<T>>, nominal_rate: T) -> Result<Self> {
        if !(nominal_rate > T::zero()) || !nominal_rate.is_finite() {
            return Err(Error::Config(format!(
                "nominal_rate must be positive, got {nominal_rate}"
            )));
        }
        let mut rec = Self::new(samples)?;
        rec.nominal_rate = nominal_rate;
        Ok(rec)
    }

    pub fn samples(&self) -> &[ImuSample<T>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Hz.
    pub fn nominal_rate(&self) -> T {
        self.nominal_rate
    }

    /// `(s_1, s_N)`.
    pub fn span(&self) -> (T, T) {
        (
            self.samples[0].time,
            self.samples[self.samples.len() - 1].time,
        )
    }
}

fn median_rate<T: Real>(samples: &[ImuSample<T>]) -> T {
    let mut rates: Vec<f64> = samples
        .windows(2)
        .map(|w| 1.0 / (w[1].time - w[0].time).as_f64())
        .collect();
    rates.sort_by(f64::total_cmp);
    let n = rates.len();
    let median = if n % 2 == 1 {
        rates[n / 2]
    } else {
        0.5 * (rates[n / 2 - 1] + rates[n / 2])
    };
    T::lit(median)
}

/// Reads a recording from a CSV file. Gyroscope columns, when present, are ignored.
pub fn read_recording<T: Real>(path: impl AsRef<Path>) -> Result<ImuRecording<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_recording(file)
}

/// Parses CSV text in the recording format from any reader.
pub fn parse_recording<T: Real, R: Read>(reader: R) -> Result<ImuRecording<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    let header = rdr.headers().map_err(|e| Error::MalformedRow {
        line: 1,
        reason: e.to_string(),
    })?;
    let names: Vec<&str> = header.iter().collect();
    let expected = ["t", "ax", "ay", "az"];
    let gyro = ["gx", "gy", "gz"];
    let header_ok = (names.len() == 4 || names.len() == 7)
        && names[..4] == expected
        && (names.len() == 4 || names[4..] == gyro);
    if !header_ok {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!(
                "expected header t,ax,ay,az[,gx,gy,gz], found {}",
                names.join(",")
            ),
        });
    }
    let width = names.len();

    let mut samples = Vec::new();
    let mut prev_time: Option<f64> = None;
    for record in rdr.records() {
        let record = record.map_err(|e| Error::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {width} fields, found {}", record.len()),
            });
        }
        let mut vals = [0.0f64; 4];
        for (slot, field) in vals.iter_mut().zip(record.iter()) {
            *slot = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::MalformedRow {
                    line,
                    reason: format!("cannot parse `{field}` as a finite number"),
                })?;
        }
        if prev_time.is_some_and(|p| vals[0] <= p) {
            return Err(Error::NonMonotoneTime { line });
        }
        prev_time = Some(vals[0]);
        samples.push(ImuSample {
            time: T::lit(vals[0]),
            accel: [T::lit(vals[1]), T::lit(vals[2]), T::lit(vals[3])],
        });
    }
    ImuRecording::new(samples)
}

/// Writes a recording as `t,ax,ay,az` with shortest round-trip float formatting.
pub fn write_recording<T: Real>(rec: &ImuRecording<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = String::with_capacity(rec.len() * 48);
    out.push_str("t,ax,ay,az\n");
    for s in rec.samples() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.time.as_f64(),
            s.accel[0].as_f64(),
            s.accel[1].as_f64(),
            s.accel[2].as_f64()
        ));
    }
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Writes a two-or-more column numeric CSV with the given header.
pub fn write_columns(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let path = path.as_ref();
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a numeric CSV with a header row, returning the header and rows.
pub fn read_columns(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::MalformedRow {
            line: 1,
            reason: e.to_string(),
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::MalformedRow {
                    line,
                    reason: format!("cannot parse `{f}` as a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Writes a scalar signal as `t,value`.
pub fn write_signal<T: Real>(signal: &ScalarSignal<T>, path: impl AsRef<Path>) -> Result<()> {
    let rows: Vec<Vec<f64>> = signal
        .times()
        .iter()
        .zip(signal.values())
        .map(|(t, v)| vec![t.as_f64(), v.as_f64()])
        .collect();
    write_columns(path, &["t", "value"], &rows)
}

/// Reads a `t,value` signal; the nominal rate is the median of `1/Δt`.
pub fn read_signal<T: Real>(path: impl AsRef<Path>) -> Result<ScalarSignal<T>> {
    let (header, rows) = read_columns(path)?;
    if header.len() < 2 || header[0] != "t" {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!("expected header t,value, found {}", header.join(",")),
        });
    }
    let mut samples = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        if r.len() < 2 || !r[0].is_finite() || !r[1].is_finite() {
            return Err(Error::MalformedRow {
                line: i as u64 + 2,
                reason: "expected two finite numbers".into(),
            });
        }
        if i > 0 && r[0] <= rows[i - 1][0] {
            return Err(Error::NonMonotoneTime { line: i as u64 + 2 });
        }
        samples.push(ImuSample {
            time: T::lit(r[0]),
            accel: [T::lit(r[1]), T::zero(), T::zero()],
        });
    }
    let rate = ImuRecording::new(samples.clone())?.nominal_rate();
    ScalarSignal::new(
        samples.iter().map(|s| s.time).collect(),
        samples.iter().map(|s| s.accel[0]).collect(),
        rate,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ImuRecording<f64>> {
        parse_recording(text.as_bytes())
    }

    #[test]
    fn signal_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let sig = ScalarSignal::sampled(0.5, 100.0, 50, |t: f64| (3.0 * t).sin()).unwrap();
        write_signal(&sig, &path).unwrap();
        let back: ScalarSignal<f64> = read_signal(&path).unwrap();
        assert_eq!(back.times(), sig.times());
        assert_eq!(back.values(), sig.values());
        assert!((back.nominal_rate() - 100.0).abs() < 1e-6);
    }

    #[test]
    fn two_sample_recording() {
        let rec = parse("t,ax,ay,az\n0.00,0,0,9.81\n0.01,0,0,9.81\n").unwrap();
        assert_eq!(rec.len(), 2);
        assert!((rec.nominal_rate() - 100.0).abs() < 1e-9);
        assert_eq!(rec.samples()[1].accel, [0.0, 0.0, 9.81]);
    }

    #[test]
    fn duplicated_timestamp_reports_line() {
        let err = parse("t,ax,ay,az\n0.00,0,0,9.81\n0.01,0,0,9.81\n0.01,0,0,9.81\n").unwrap_err();
        assert_eq!(err.to_string(), "non-monotone time at line 4");
        let err = parse("t,ax,ay,az\n0.01,0,0,9.81\n0.01,0,0,9.81\n").unwrap_err();
        assert_eq!(err.to_string(), "non-monotone time at line 3");
    }

    #[test]
    fn gyro_columns_are_ignored() {
        let rec = parse("t,ax,ay,az,gx,gy,gz\n0,1,2,3,9,9,9\n0.02,1,2,3,9,9,9\n").unwrap();
        assert_eq!(rec.samples()[0].accel, [1.0, 2.0, 3.0]);
        assert!((rec.nominal_rate() - 50.0).abs() < 1e-9);
    }

    #[test]
    fn malformed_rows() {
        let err = parse("t,ax,ay,az\n0,0,0,1\n0.01,0,x,1\n").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 3, .. }), "{err}");
        let err = parse("t,ax,ay,az\n0,0,0,1\n0.01,0,1\n").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 3, .. }), "{err}");
        let err = parse("time,x,y,z\n0,0,0,1\n").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 1, .. }));
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            parse("t,ax,ay,az\n0,0,0,1\n").unwrap_err(),
            Error::TooFewSamples { found: 1 }
        ));
        assert!(matches!(
            parse("t,ax,ay,az\n").unwrap_err(),
            Error::TooFewSamples { found: 0 }
        ));
    }

    #[test]
    fn median_rate_tolerates_jitter() {
        let samples: Vec<ImuSample<f64>> = (0..200)
            .map(|i| ImuSample {
                time: i as f64 * 0.01 + if i % 3 == 0 { 0.0015 } else { 0.0 },
                accel: [0.0; 3],
            })
            .collect();
        let rec = ImuRecording::new(samples).unwrap();
        assert!((rec.nominal_rate() - 100.0).abs() < 1.0);
    }
}
