//! Signature correlation and nearest-signature classification.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signature::Signature;

/// How two signature means are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Similarity {
    /// Centered and normalized (Pearson correlation).
    #[default]
    Pearson,
    /// Normalized without centering.
    Cosine,
}

impl std::str::FromStr for Similarity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pearson" => Ok(Similarity::Pearson),
            "cosine" => Ok(Similarity::Cosine),
            _ => Err(Error::Config(format!(
                "unknown similarity `{s}` (pearson|cosine)"
            ))),
        }
    }
}

fn check_len<T: Real>(a: &Signature<T>, b: &Signature<T>) -> Result<()> {
    if a.grid_size() != b.grid_size() {
        return Err(Error::GridMismatch {
            expected: a.grid_size(),
            found: b.grid_size(),
        });
    }
    Ok(())
}

fn normalized_dot<T: Real>(x: &[T], y: &[T]) -> Result<T> {
    let sxx: T = x.iter().map(|&v| v * v).sum();
    let syy: T = y.iter().map(|&v| v * v).sum();
    if sxx <= T::zero() || syy <= T::zero() {
        return Err(Error::ZeroVariance);
    }
    let sxy: T = x.iter().zip(y).map(|(&a, &b)| a * b).sum();
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Ok(r.max(-T::one()).min(T::one()))
}

fn centered<T: Real>(x: &[T]) -> Vec<T> {
    let mean = x.iter().copied().sum::<T>() / T::from_count(x.len());
    x.iter().map(|&v| v - mean).collect()
}

/// Pearson correlation of the two mean vectors.
pub fn correlate<T: Real>(a: &Signature<T>, b: &Signature<T>) -> Result<T> {
    check_len(a, b)?;
    let (x, y) = (centered(&a.mean), centered(&b.mean));
    let spread = |v: &[T], raw: &[T]| {
        let scale = raw.iter().fold(T::zero(), |m, r| m.max(r.abs()));
        v.iter()
            .all(|d| d.abs() <= scale * T::epsilon() * T::lit(4.0))
    };
    if spread(&x, &a.mean) || spread(&y, &b.mean) {
        return Err(Error::ZeroVariance);
    }
    normalized_dot(&x, &y)
}

/// Uncentered cosine similarity of the two mean vectors.
pub fn cosine_similarity<T: Real>(a: &Signature<T>, b: &Signature<T>) -> Result<T> {
    check_len(a, b)?;
    normalized_dot(&a.mean, &b.mean)
}

pub fn similarity<T: Real>(a: &Signature<T>, b: &Signature<T>, kind: Similarity) -> Result<T> {
    match kind {
        Similarity::Pearson => correlate(a, b),
        Similarity::Cosine => cosine_similarity(a, b),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LibraryEntry<T> {
    pub label: String,
    pub signature: Signature<T>,
}

/// Labeled signatures sharing one grid size.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureLibrary<T> {
    entries: Vec<LibraryEntry<T>>,
}

impl<T: Real> SignatureLibrary<T> {
    pub fn new(entries: Vec<LibraryEntry<T>>) -> Result<Self> {
        if let Some(first) = entries.first() {
            let len = first.signature.grid_size();
            for (i, e) in entries.iter().enumerate() {
                if e.signature.grid_size() != len {
                    return Err(Error::GridMismatch {
                        expected: len,
                        found: e.signature.grid_size(),
                    });
                }
                if entries[..i].iter().any(|p| p.label == e.label) {
                    return Err(Error::Library(format!("duplicate label `{}`", e.label)));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[LibraryEntry<T>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.label.as_str()).collect()
    }

    pub fn get(&self, label: &str) -> Option<&Signature<T>> {
        self.entries
            .iter()
            .find(|e| e.label == label)
            .map(|e| &e.signature)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix<T> {
    pub labels: Vec<String>,
    /// Row-major `n × n`.
    pub values: Vec<T>,
}

impl<T: Real> CorrelationMatrix<T> {
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.size() + j]
    }
}

pub fn correlation_matrix<T: Real>(
    lib: &SignatureLibrary<T>,
    kind: Similarity,
) -> Result<CorrelationMatrix<T>> {
    let n = lib.len();
    if n < 2 {
        return Err(Error::Library(format!(
            "correlation matrix needs at least 2 entries, got {n}"
        )));
    }
    let e = lib.entries();
    let mut values = vec![T::zero(); n * n];
    for i in 0..n {
        values[i * n + i] = T::one();
        // Validates the diagonal entry's variance as well.
        similarity(&e[i].signature, &e[i].signature, kind)?;
        for j in i + 1..n {
            let r = similarity(&e[i].signature, &e[j].signature, kind)?;
            values[i * n + j] = r;
            values[j * n + i] = r;
        }
    }
    Ok(CorrelationMatrix {
        labels: e.iter().map(|x| x.label.clone()).collect(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification<T> {
    pub label: String,
    pub score: T,
    /// `(label, score)` in library order.
    pub scores: Vec<(String, T)>,
}

impl<T: Real> Classification<T> {
    /// Scores sorted by decreasing value, library order on ties.
    pub fn ranked(&self) -> Vec<(String, T)> {
        let mut r = self.scores.clone();
        r.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        r
    }
}

/// Label of the most similar library entry; the first one wins ties.
pub fn classify_nearest<T: Real>(
    query: &Signature<T>,
    lib: &SignatureLibrary<T>,
    kind: Similarity,
) -> Result<Classification<T>> {
    if lib.is_empty() {
        return Err(Error::Library("library is empty".into()));
    }
    let scores = lib
        .entries()
        .iter()
        .map(|e| Ok((e.label.clone(), similarity(query, &e.signature, kind)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if s.1 > scores[best].1 {
            best = i;
        }
    }
    Ok(Classification {
        label: scores[best].0.clone(),
        score: scores[best].1,
        scores,
    })
}

/// Reference correlation table for eight real recordings (walking W1-W4,
/// running R1-R4, device modes 1-4), kept verbatim for report formatting.
/// The table is not symmetric (W1/R1 reads 0.58 one way and 0.5 the other).
pub mod reference {
    pub const LABELS: [&str; 8] = ["W1", "W2", "W3", "W4", "R1", "R2", "R3", "R4"];

    #[rustfmt::skip]
    pub const TABLE: [[f64; 8]; 8] = [
        [1.0,  0.81, 0.46, 0.84, 0.58, 0.82, 0.26, 0.47],
        [0.81, 1.0,  0.32, 0.82, 0.59, 0.66, 0.01, 0.29],
        [0.46, 0.32, 1.0,  0.43, 0.32, 0.44, 0.39, 0.39],
        [0.84, 0.82, 0.43, 1.0,  0.60, 0.80, 0.09, 0.35],
        [0.5,  0.59, 0.32, 0.60, 1.0,  0.68, 0.19, 0.66],
        [0.82, 0.66, 0.44, 0.80, 0.68, 1.0,  0.37, 0.50],
        [0.26, 0.01, 0.39, 0.09, 0.19, 0.37, 1.0,  0.57],
        [0.47, 0.29, 0.39, 0.35, 0.66, 0.50, 0.57, 1.0 ],
    ];
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(v: Vec<f64>) -> Signature<f64> {
        Signature::from_mean(v).unwrap()
    }

    fn harmonic(k: f64, len: usize) -> Vec<f64> {
        (0..len)
            .map(|i| (std::f64::consts::TAU * k * i as f64 / len as f64).cos())
            .collect()
    }

    #[test]
    fn self_and_negation() {
        let x = sig(vec![1.0, 3.0, 2.0, 5.0]);
        let neg = sig(x.mean.iter().map(|v| -v).collect());
        assert!((correlate(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((correlate(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn distinct_harmonics_are_nearly_orthogonal() {
        let r = correlate(&sig(harmonic(2.0, 100)), &sig(harmonic(5.0, 100))).unwrap();
        assert!(r.abs() < 0.2);
    }

    #[test]
    fn constant_signature_rejected() {
        let c = sig(vec![2.0; 10]);
        let x = sig(harmonic(1.0, 10));
        assert!(matches!(correlate(&c, &x), Err(Error::ZeroVariance)));
        assert!(cosine_similarity(&c, &x).is_ok());
        assert!(matches!(
            cosine_similarity(&sig(vec![0.0; 10]), &x),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn grid_mismatch() {
        assert!(matches!(
            correlate(&sig(harmonic(1.0, 10)), &sig(harmonic(1.0, 12))),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn cosine_differs_from_pearson_with_offset() {
        let a = sig(harmonic(1.0, 50));
        let b = sig(harmonic(1.0, 50).iter().map(|v| v + 3.0).collect());
        assert!((correlate(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        assert!(cosine_similarity(&a, &b).unwrap() < 0.5);
    }

    #[test]
    fn library_validation() {
        let e = |l: &str, n| LibraryEntry {
            label: l.into(),
            signature: sig(harmonic(1.0, n)),
        };
        assert!(SignatureLibrary::new(vec![e("a", 10), e("a", 10)]).is_err());
        assert!(SignatureLibrary::new(vec![e("a", 10), e("b", 11)]).is_err());
        let lib = SignatureLibrary::new(vec![e("a", 10), e("b", 10)]).unwrap();
        assert_eq!(lib.labels(), ["a", "b"]);
        let m = correlation_matrix(&lib, Similarity::Pearson).unwrap();
        assert!(m.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(correlation_matrix(
            &SignatureLibrary::new(vec![e("a", 10)]).unwrap(),
            Similarity::Pearson
        )
        .is_err());
    }

    #[test]
    fn nearest_ties_go_to_first() {
        let x = harmonic(1.0, 20);
        let lib = SignatureLibrary::new(vec![
            LibraryEntry {
                label: "p".into(),
                signature: sig(harmonic(3.0, 20)),
            },
            LibraryEntry {
                label: "q".into(),
                signature: sig(x.clone()),
            },
            LibraryEntry {
                label: "r".into(),
                signature: sig(x.iter().map(|v| 2.0 * v + 1.0).collect()),
            },
        ])
        .unwrap();
        let c = classify_nearest(&sig(x), &lib, Similarity::Pearson).unwrap();
        assert_eq!(c.label, "q");
        assert!((c.score - 1.0).abs() < 1e-12);
        assert_eq!(c.ranked()[0].0, "q");
        assert!(classify_nearest(
            &sig(harmonic(1.0, 20)),
            &SignatureLibrary::new(vec![]).unwrap(),
            Similarity::Pearson
        )
        .is_err());
    }
}
