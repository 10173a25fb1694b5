//! End-to-end batch run: ingest, preprocess, detect, filter, refine,
//! signature, Fourier fit and optional classification, writing every
//! intermediate artifact plus plot-ready CSV files into one directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::artifact::{self, Artifact, ClassificationDoc, ScoreDoc};
use crate::classify::classify_nearest;
use crate::config::{OrderChoice, PipelineConfig};
use crate::detect::{detect_cycles, filter_segments, Segmentation};
use crate::error::{Error, Result};
use crate::fourier::{approximation_residuals, fit_fourier, reconstruct, select_order, Criterion};
use crate::io::{read_recording, write_columns};
use crate::optimize::{cycle_variances, optimize_segmentation};
use crate::preprocess::{accel_norm, design_bandpass, filter_zero_phase, ScalarSignal};
use crate::signature::{confidence_band, extract_cycles, population_band, NormalizedGrid};

/// File names written into the output directory.
pub mod files {
    pub const FILTERED: &str = "filtered.csv";
    pub const DETECTED: &str = "detected.json";
    pub const INITIAL: &str = "initial.json";
    pub const SEGMENTATION: &str = "segmentation.json";
    pub const TRACE: &str = "trace.csv";
    pub const DURATIONS_INITIAL: &str = "durations_initial.csv";
    pub const DURATIONS: &str = "durations.csv";
    pub const VARIANCES_INITIAL: &str = "variances_initial.csv";
    pub const VARIANCES: &str = "variances.csv";
    pub const CYCLES: &str = "cycles.csv";
    pub const SIGNATURE: &str = "signature.json";
    pub const SIGNATURE_CSV: &str = "signature_bands.csv";
    pub const ORDER_SCORES: &str = "order_scores.csv";
    pub const FOURIER: &str = "fourier.json";
    pub const RESIDUALS: &str = "residuals.csv";
    pub const CLASSIFICATION: &str = "classification.json";
    pub const REPORT: &str = "report.json";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDoc {
    pub samples: usize,
    pub nominal_rate: f64,
    pub detected_cycles: usize,
    pub initial_cycles: usize,
    /// Refined cycle count `M`.
    pub num_cycles: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub rejected_moves: usize,
    pub block_moves: usize,
    pub repaired_boundaries: usize,
    pub dropped_cycles: usize,
    pub selected_order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criterion: Option<String>,
    pub residual_rms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<ScoreDoc>,
}

/// Body of the `report` artifact. Artifact paths are relative to the
/// output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub recording: String,
    pub config: BTreeMap<String, String>,
    pub artifacts: BTreeMap<String, String>,
    pub summary: SummaryDoc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub out_dir: PathBuf,
    pub doc: ReportDoc,
}

impl PipelineReport {
    /// Absolute paths of every emitted artifact, including the report.
    pub fn paths(&self) -> Vec<PathBuf> {
        self.doc
            .artifacts
            .values()
            .map(|f| self.out_dir.join(f))
            .chain(std::iter::once(self.out_dir.join(files::REPORT)))
            .collect()
    }
}

struct Output<'a> {
    dir: &'a Path,
    written: BTreeMap<String, String>,
}

impl Output<'_> {
    fn path(&mut self, name: &'static str) -> PathBuf {
        let key = name.rsplit_once('.').map_or(name, |(stem, _)| stem);
        self.written.insert(key.to_owned(), name.to_owned());
        self.dir.join(name)
    }

    fn artifact(&mut self, name: &'static str, a: &Artifact) -> Result<()> {
        let p = self.path(name);
        artifact::write_artifact(a, p)
    }

    fn columns(&mut self, name: &'static str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let p = self.path(name);
        write_columns(p, header, rows)
    }
}

fn indexed(values: &[f64]) -> Vec<Vec<f64>> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| vec![(i + 1) as f64, v])
        .collect()
}

fn write_cycles(
    out: &mut Output<'_>,
    seg: &Segmentation<f64>,
    signal: &ScalarSignal<f64>,
    grid: NormalizedGrid,
) -> Result<()> {
    let cycles = extract_cycles(signal, seg, grid)?;
    let names: Vec<String> = std::iter::once("tau".to_owned())
        .chain((1..=cycles.len()).map(|m| format!("cycle_{m}")))
        .collect();
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .map(|l| {
            std::iter::once(grid.tau::<f64>(l))
                .chain(cycles.iter().map(|c| c.values[l]))
                .collect()
        })
        .collect();
    out.columns(files::CYCLES, &header, &rows)
}

/// Runs the full pipeline on one recording, writing into `out_dir`.
///
/// A failing stage aborts the run with an error naming the stage; artifacts
/// written by earlier stages are left in place.
pub fn run_pipeline(
    recording: &Path,
    cfg: &PipelineConfig,
    out_dir: &Path,
) -> Result<PipelineReport> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e).in_stage("output"))?;
    let mut out = Output {
        dir: out_dir,
        written: BTreeMap::new(),
    };
    let grid = NormalizedGrid::new(cfg.grid_size).map_err(|e| e.in_stage("config"))?;

    let rec = read_recording::<f64>(recording).map_err(|e| e.in_stage("ingest"))?;

    let filtered = (|| {
        cfg.validate_for_rate(rec.nominal_rate())?;
        let norm = accel_norm(&rec);
        let design = design_bandpass(
            cfg.filter_order,
            cfg.band_lo,
            cfg.band_hi,
            rec.nominal_rate(),
        )?;
        let filtered = filter_zero_phase(&norm, &design)?;
        let rows: Vec<Vec<f64>> = (0..norm.len())
            .map(|i| vec![norm.times()[i], norm.values()[i], filtered.values()[i]])
            .collect();
        out.columns(files::FILTERED, &["t", "norm", "filtered"], &rows)?;
        Ok(filtered)
    })()
    .map_err(|e: Error| e.in_stage("preprocess"))?;

    let detected = (|| {
        let seg = detect_cycles(&filtered, &cfg.thresholds())?;
        out.artifact(files::DETECTED, &artifact::segmentation(&seg))?;
        Ok(seg)
    })()
    .map_err(|e: Error| e.in_stage("detect"))?;

    let initial = (|| {
        let seg = filter_segments(&detected, cfg.eps_lo, cfg.eps_up)?;
        out.artifact(files::INITIAL, &artifact::segmentation(&seg))?;
        out.columns(
            files::DURATIONS_INITIAL,
            &["cycle", "duration"],
            &indexed(&seg.durations()),
        )?;
        Ok(seg)
    })()
    .map_err(|e: Error| e.in_stage("filter"))?;

    let (refined, signature, trace) = (|| {
        let (seg, sig, trace) =
            optimize_segmentation(&initial, &filtered, grid, &cfg.opt_config())?;
        out.artifact(files::SEGMENTATION, &artifact::segmentation(&seg))?;
        let costs: Vec<Vec<f64>> = trace
            .costs
            .iter()
            .enumerate()
            .map(|(i, &v)| vec![i as f64, v])
            .collect();
        out.columns(files::TRACE, &["iter", "V"], &costs)?;
        out.columns(
            files::DURATIONS,
            &["cycle", "duration"],
            &indexed(&seg.durations()),
        )?;
        let before = cycle_variances(&initial, &filtered, grid)?;
        let after = cycle_variances(&seg, &filtered, grid)?;
        out.columns(
            files::VARIANCES_INITIAL,
            &["cycle", "variance"],
            &indexed(&before),
        )?;
        out.columns(files::VARIANCES, &["cycle", "variance"], &indexed(&after))?;
        write_cycles(&mut out, &seg, &filtered, grid)?;
        Ok((seg, sig, trace))
    })()
    .map_err(|e: Error| e.in_stage("refine"))?;

    (|| {
        out.artifact(files::SIGNATURE, &artifact::signature(&signature))?;
        let (pop_lo, pop_hi) = population_band(&signature, 0.95)?;
        let (ci_lo, ci_hi) = confidence_band(&signature, 0.95)
            .unwrap_or_else(|_| (signature.mean.clone(), signature.mean.clone()));
        let rows: Vec<Vec<f64>> = (0..grid.len())
            .map(|l| {
                vec![
                    grid.tau(l),
                    signature.mean[l],
                    signature.std[l],
                    ci_lo[l],
                    ci_hi[l],
                    pop_lo[l],
                    pop_hi[l],
                ]
            })
            .collect();
        out.columns(
            files::SIGNATURE_CSV,
            &["tau", "mean", "std", "ci_lo", "ci_hi", "band_lo", "band_hi"],
            &rows,
        )
    })()
    .map_err(|e: Error| e.in_stage("signature"))?;

    let (model, residual_rms) = (|| {
        let order = match cfg.order {
            OrderChoice::Fixed(k) => k,
            OrderChoice::Select { min, max } => {
                let sel = select_order(&signature, min, max, cfg.criterion, cfg.penalty_count)?;
                let rows: Vec<Vec<f64>> = sel
                    .scores
                    .iter()
                    .map(|s| vec![s.order as f64, s.aic, s.bic, s.rss])
                    .collect();
                out.columns(files::ORDER_SCORES, &["K", "AIC", "BIC", "RSS"], &rows)?;
                sel.best
            }
        };
        let model = fit_fourier(&signature, order)?;
        out.artifact(files::FOURIER, &artifact::fourier(&model))?;
        let res = approximation_residuals(&model, &signature)?;
        let recon = reconstruct(&model, grid);
        let rows: Vec<Vec<f64>> = (0..grid.len())
            .map(|l| {
                vec![
                    grid.tau(l),
                    signature.mean[l],
                    recon[l],
                    res.values[l],
                    res.lower,
                    res.upper,
                ]
            })
            .collect();
        out.columns(
            files::RESIDUALS,
            &[
                "tau",
                "mean",
                "reconstruction",
                "residual",
                "band_lo",
                "band_hi",
            ],
            &rows,
        )?;
        let rms = (res.values.iter().map(|r| r * r).sum::<f64>() / res.values.len() as f64).sqrt();
        Ok((model, rms))
    })()
    .map_err(|e: Error| e.in_stage("fourier"))?;

    let classification = match &cfg.library {
        None => None,
        Some(lib_path) => Some(
            (|| {
                let lib = artifact::read_library::<f64>(lib_path)?;
                let c = classify_nearest(&signature, &lib, cfg.similarity)?;
                let doc = ClassificationDoc::new(&c, cfg.similarity);
                out.artifact(files::CLASSIFICATION, &Artifact::Classification(doc))?;
                Ok(ScoreDoc {
                    label: c.label,
                    score: c.score,
                })
            })()
            .map_err(|e: Error| e.in_stage("classify"))?,
        ),
    };

    let summary = SummaryDoc {
        samples: rec.len(),
        nominal_rate: rec.nominal_rate(),
        detected_cycles: detected.num_cycles(),
        initial_cycles: initial.num_cycles(),
        num_cycles: refined.num_cycles(),
        initial_cost: trace.costs[0],
        final_cost: trace.costs[trace.costs.len() - 1],
        iterations: trace.iterations,
        converged: trace.converged,
        rejected_moves: trace.rejected,
        block_moves: trace.block_moves,
        repaired_boundaries: trace.repaired.len(),
        dropped_cycles: trace.dropped_cycles,
        selected_order: model.order,
        criterion: match cfg.order {
            OrderChoice::Fixed(_) => None,
            OrderChoice::Select { .. } => Some(
                match cfg.criterion {
                    Criterion::Aic => "aic",
                    Criterion::Bic => "bic",
                }
                .to_owned(),
            ),
        },
        residual_rms,
        classification,
    };
    let doc = ReportDoc {
        recording: recording.display().to_string(),
        config: cfg
            .entries()
            .into_iter()
            .map(|(k, v)| (k.to_owned(), v))
            .collect(),
        artifacts: out.written.clone(),
        summary,
    };
    artifact::write_artifact(&Artifact::Report(doc.clone()), out_dir.join(files::REPORT))
        .map_err(|e| e.in_stage("report"))?;
    Ok(PipelineReport {
        out_dir: out_dir.to_path_buf(),
        doc,
    })
}

/// Output sub-directory names for a batch: file stems, de-duplicated by suffix.
pub fn batch_dirs(recordings: &[PathBuf]) -> Vec<String> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    recordings
        .iter()
        .map(|p| {
            let stem = p.file_stem().map_or_else(
                || "recording".to_owned(),
                |s| s.to_string_lossy().into_owned(),
            );
            let n = seen.entry(stem.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                stem
            } else {
                format!("{stem}_{n}")
            }
        })
        .collect()
}

/// Runs the pipeline on several recordings with up to `jobs` worker threads.
/// Each recording gets its own sub-directory of `out_dir` (see
/// [`batch_dirs`]); results are returned in input order.
pub fn run_batch(
    recordings: &[PathBuf],
    cfg: &PipelineConfig,
    out_dir: &Path,
    jobs: usize,
) -> Vec<Result<PipelineReport>> {
    let dirs = batch_dirs(recordings);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<PipelineReport>>>> =
        Mutex::new((0..recordings.len()).map(|_| None).collect());
    let workers = jobs.clamp(1, recordings.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= recordings.len() {
                    break;
                }
                let r = run_pipeline(&recordings[i], cfg, &out_dir.join(&dirs[i]));
                results.lock().expect("result lock")[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .expect("result lock")
        .into_iter()
        .map(|r| r.expect("every recording is processed"))
        .collect()
}
