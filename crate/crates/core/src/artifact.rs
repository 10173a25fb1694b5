//! JSON artifacts: `{"schema":"gaitsig/v1","kind":<kind>,...}`.
//!
//! Documents hold `f64` values regardless of the scalar type used for
//! computation. Floats are written in shortest round-trip form, so reading a
//! document back reproduces every value exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::{
    Classification, CorrelationMatrix, LibraryEntry, SignatureLibrary, Similarity,
};
use crate::detect::Segmentation;
use crate::error::{Error, Result};
use crate::fourier::FourierModel;
use crate::scalar::Real;
use crate::signature::Signature;

pub const SCHEMA: &str = "gaitsig/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationDoc {
    pub boundaries: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_span: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureDoc {
    pub grid_size: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub num_cycles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierDoc {
    #[serde(rename = "K")]
    pub order: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(default)]
    pub rss: f64,
    #[serde(default)]
    pub grid_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreDoc {
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationDoc {
    pub label: String,
    pub score: f64,
    pub similarity: String,
    /// Highest score first.
    pub ranked: Vec<ScoreDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationDoc {
    pub labels: Vec<String>,
    pub similarity: String,
    pub matrix: Vec<Vec<f64>>,
}

/// Ground truth of a synthetic recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthDoc {
    pub boundaries: Vec<f64>,
    pub signature: SignatureDoc,
    pub template: FourierDoc,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryEntryDoc {
    pub label: String,
    pub signature: SignatureDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Artifact {
    Segmentation(SegmentationDoc),
    Signature(SignatureDoc),
    Fourier(FourierDoc),
    Classification(ClassificationDoc),
    Correlation(CorrelationDoc),
    Truth(TruthDoc),
    Report(crate::pipeline::ReportDoc),
}

impl Artifact {
    pub fn kind(&self) -> &'static str {
        match self {
            Artifact::Segmentation(_) => "segmentation",
            Artifact::Signature(_) => "signature",
            Artifact::Fourier(_) => "fourier",
            Artifact::Classification(_) => "classification",
            Artifact::Correlation(_) => "correlation",
            Artifact::Truth(_) => "truth",
            Artifact::Report(_) => "report",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    schema: String,
    #[serde(flatten)]
    artifact: Artifact,
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Json(e.to_string())
}

pub fn to_json(artifact: &Artifact) -> Result<String> {
    let env = Envelope {
        schema: SCHEMA.to_owned(),
        artifact: artifact.clone(),
    };
    let mut s = serde_json::to_string_pretty(&env).map_err(json_err)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(text: &str) -> Result<Artifact> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(json_err)?;
    match value.get("schema").and_then(|s| s.as_str()) {
        Some(SCHEMA) => {}
        Some(other) => {
            return Err(Error::Json(format!(
                "unsupported schema `{other}`, expected `{SCHEMA}`"
            )))
        }
        None => return Err(Error::Json("missing `schema` field".into())),
    }
    let env: Envelope = serde_json::from_value(value).map_err(json_err)?;
    Ok(env.artifact)
}

pub fn write_artifact(artifact: &Artifact, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_json(artifact)?).map_err(|e| Error::io(path, e))
}

pub fn read_artifact(path: impl AsRef<Path>) -> Result<Artifact> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}

fn wrong_kind(expected: &str, found: &Artifact) -> Error {
    Error::Json(format!(
        "expected a `{expected}` artifact, found `{}`",
        found.kind()
    ))
}

fn lit<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

fn to_f64<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

impl<T: Real> From<&Segmentation<T>> for SegmentationDoc {
    fn from(seg: &Segmentation<T>) -> Self {
        let (lo, hi) = seg.source_span();
        Self {
            boundaries: to_f64(seg.boundaries()),
            source_span: Some([lo.as_f64(), hi.as_f64()]),
        }
    }
}

impl SegmentationDoc {
    pub fn to_segmentation<T: Real>(&self) -> Result<Segmentation<T>> {
        let b: Vec<T> = lit(&self.boundaries);
        let span = match self.source_span {
            Some([lo, hi]) => (T::lit(lo), T::lit(hi)),
            None => match (b.first(), b.last()) {
                (Some(&lo), Some(&hi)) => (lo, hi),
                _ => return Err(Error::InvalidSegmentation("no boundaries".into())),
            },
        };
        Segmentation::new(b, span)
    }
}

impl<T: Real> From<&Signature<T>> for SignatureDoc {
    fn from(sig: &Signature<T>) -> Self {
        Self {
            grid_size: sig.grid_size(),
            mean: to_f64(&sig.mean),
            std: to_f64(&sig.std),
            num_cycles: sig.num_cycles,
        }
    }
}

impl SignatureDoc {
    pub fn to_signature<T: Real>(&self) -> Result<Signature<T>> {
        if self.mean.len() != self.grid_size {
            return Err(Error::GridMismatch {
                expected: self.grid_size,
                found: self.mean.len(),
            });
        }
        Signature::new(lit(&self.mean), lit(&self.std), self.num_cycles)
    }
}

impl<T: Real> From<&FourierModel<T>> for FourierDoc {
    fn from(m: &FourierModel<T>) -> Self {
        Self {
            order: m.order,
            a: to_f64(&m.a),
            b: to_f64(&m.b),
            rss: m.rss.as_f64(),
            grid_size: m.grid_size,
        }
    }
}

impl FourierDoc {
    pub fn to_model<T: Real>(&self) -> Result<FourierModel<T>> {
        if self.a.len() != self.order || self.b.len() != self.order {
            return Err(Error::Json(format!(
                "fourier artifact with K={} needs a[] and b[] of length K, got {} and {}",
                self.order,
                self.a.len(),
                self.b.len()
            )));
        }
        if self.b.first().is_some_and(|&b0| b0 != 0.0) {
            return Err(Error::Json("fourier artifact must have b[0] = 0".into()));
        }
        let mut m = FourierModel::from_coefficients(lit(&self.a), lit(&self.b))?;
        m.rss = T::lit(self.rss);
        m.grid_size = self.grid_size;
        Ok(m)
    }
}

fn similarity_name(kind: Similarity) -> String {
    match kind {
        Similarity::Pearson => "pearson",
        Similarity::Cosine => "cosine",
    }
    .to_owned()
}

impl ClassificationDoc {
    pub fn new<T: Real>(c: &Classification<T>, kind: Similarity) -> Self {
        Self {
            label: c.label.clone(),
            score: c.score.as_f64(),
            similarity: similarity_name(kind),
            ranked: c
                .ranked()
                .into_iter()
                .map(|(label, s)| ScoreDoc {
                    label,
                    score: s.as_f64(),
                })
                .collect(),
        }
    }
}

impl CorrelationDoc {
    pub fn new<T: Real>(m: &CorrelationMatrix<T>, kind: Similarity) -> Self {
        let n = m.size();
        Self {
            labels: m.labels.clone(),
            similarity: similarity_name(kind),
            matrix: (0..n)
                .map(|i| (0..n).map(|j| m.get(i, j).as_f64()).collect())
                .collect(),
        }
    }
}

pub fn segmentation<T: Real>(seg: &Segmentation<T>) -> Artifact {
    Artifact::Segmentation(seg.into())
}

pub fn signature<T: Real>(sig: &Signature<T>) -> Artifact {
    Artifact::Signature(sig.into())
}

pub fn fourier<T: Real>(m: &FourierModel<T>) -> Artifact {
    Artifact::Fourier(m.into())
}

pub fn read_segmentation<T: Real>(path: impl AsRef<Path>) -> Result<Segmentation<T>> {
    match read_artifact(path)? {
        Artifact::Segmentation(d) => d.to_segmentation(),
        Artifact::Truth(t) => SegmentationDoc {
            boundaries: t.boundaries,
            source_span: None,
        }
        .to_segmentation(),
        other => Err(wrong_kind("segmentation", &other)),
    }
}

pub fn read_signature<T: Real>(path: impl AsRef<Path>) -> Result<Signature<T>> {
    match read_artifact(path)? {
        Artifact::Signature(d) => d.to_signature(),
        Artifact::Truth(t) => t.signature.to_signature(),
        other => Err(wrong_kind("signature", &other)),
    }
}

pub fn read_fourier<T: Real>(path: impl AsRef<Path>) -> Result<FourierModel<T>> {
    match read_artifact(path)? {
        Artifact::Fourier(d) => d.to_model(),
        Artifact::Truth(t) => t.template.to_model(),
        other => Err(wrong_kind("fourier", &other)),
    }
}

/// Library file: a JSON array of `{"label": ..., "signature": {...}}`.
pub fn write_library<T: Real>(lib: &SignatureLibrary<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let docs: Vec<LibraryEntryDoc> = lib
        .entries()
        .iter()
        .map(|e| LibraryEntryDoc {
            label: e.label.clone(),
            signature: (&e.signature).into(),
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&docs).map_err(json_err)?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_library<T: Real>(path: impl AsRef<Path>) -> Result<SignatureLibrary<T>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let docs: Vec<LibraryEntryDoc> = serde_json::from_str(&text).map_err(json_err)?;
    let entries = docs
        .into_iter()
        .map(|d| {
            Ok(LibraryEntry {
                label: d.label,
                signature: d.signature.to_signature()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SignatureLibrary::new(entries)
}
