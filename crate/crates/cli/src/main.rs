use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gaitsig::artifact::{self, Artifact, ClassificationDoc, CorrelationDoc, TruthDoc};
use gaitsig::classify::{classify_nearest, correlation_matrix, LibraryEntry, SignatureLibrary};
use gaitsig::config::{OrderChoice, PipelineConfig};
use gaitsig::detect::{detect_cycles, filter_segments};
use gaitsig::fourier::{fit_fourier, select_order};
use gaitsig::io::{read_recording, read_signal, write_columns, write_recording, write_signal};
use gaitsig::optimize::optimize_segmentation;
use gaitsig::pipeline::{batch_dirs, run_batch};
use gaitsig::preprocess::{accel_norm, design_bandpass, filter_zero_phase};
use gaitsig::signature::{average_signature, extract_cycles, NormalizedGrid};
use gaitsig::synth::{generate, template_rms, SynthSpec, Template};
use gaitsig::{Error, Result};

#[derive(Parser)]
#[command(
    name = "gaitsig",
    version = concat!(env!("CARGO_PKG_VERSION"), " (artifact schema gaitsig/v1)"),
    about = "Gait-cycle segmentation and gait signatures from accelerometer recordings"
)]
struct Cli {
    /// Print the artifact schema identifier and exit.
    #[arg(long)]
    schema: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Band-pass edges in Hz.
    #[arg(long, value_name = "LO:HI")]
    band: Option<String>,
    #[arg(long)]
    filter_order: Option<String>,
    /// Detector threshold preset.
    #[arg(long, value_name = "walking|running")]
    mode: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    eps_p: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    eps_v: Option<String>,
    /// Minimum cycle duration (s).
    #[arg(long)]
    eps_lo: Option<String>,
    /// Maximum cycle duration (s).
    #[arg(long)]
    eps_up: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    max_iters: Option<String>,
    /// Normalized grid size L.
    #[arg(long)]
    grid: Option<String>,
    /// Fixed Fourier order.
    #[arg(long, conflicts_with = "select")]
    k: Option<String>,
    /// Fourier order search range.
    #[arg(long, value_name = "MIN:MAX")]
    select: Option<String>,
    #[arg(long, value_name = "aic|bic")]
    criterion: Option<String>,
    #[arg(long, value_name = "order|params")]
    penalty_count: Option<String>,
    #[arg(long, value_name = "pearson|cosine")]
    similarity: Option<String>,
}

impl ConfigArgs {
    fn build(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{kv}` is not KEY=VALUE")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        let flags = [
            ("band", &self.band),
            ("filter_order", &self.filter_order),
            ("mode", &self.mode),
            ("eps_p", &self.eps_p),
            ("eps_v", &self.eps_v),
            ("eps_lo", &self.eps_lo),
            ("eps_up", &self.eps_up),
            ("gamma", &self.gamma),
            ("max_outer_iters", &self.max_iters),
            ("grid_size", &self.grid),
            ("order", &self.k),
            ("select", &self.select),
            ("criterion", &self.criterion),
            ("penalty_count", &self.penalty_count),
            ("similarity", &self.similarity),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a recording and print a summary; optionally write the acceleration norm.
    Ingest {
        input: PathBuf,
        /// Write `t,value` of the acceleration norm.
        #[arg(long)]
        norm: Option<PathBuf>,
    },
    /// Band-pass filter the acceleration norm of a recording.
    Preprocess {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Detect cycles on a filtered signal and drop implausible durations.
    Detect {
        /// Filtered signal (`t,value`).
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip the duration filter.
        #[arg(long)]
        raw: bool,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Refine cycle boundaries by minimizing the cross-cycle variance.
    Refine {
        input: PathBuf,
        #[arg(long)]
        segmentation: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the cost trace (`iter,V`, iteration 0 is the initial cost).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the signature of the refined segmentation.
        #[arg(long)]
        signature: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Average the cycles of a segmentation into a signature.
    Signature {
        input: PathBuf,
        #[arg(long)]
        segmentation: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Fit a truncated Fourier series to a signature.
    Fourier {
        signature: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the per-order scores (`K,AIC,BIC,RSS`) when selecting.
        #[arg(long)]
        scores: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Build a signature library from `label=signature.json` pairs.
    Library {
        #[arg(required = true, value_name = "LABEL=PATH")]
        entries: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify a signature against a library, or print the library correlation matrix.
    Classify {
        /// Signature to classify; omit with `--matrix`.
        signature: Option<PathBuf>,
        #[arg(long)]
        library: PathBuf,
        /// Print the pairwise similarity matrix of the library.
        #[arg(long)]
        matrix: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Generate a synthetic recording with known cycle boundaries.
    Synth {
        #[arg(long, default_value = "walking")]
        template: Template,
        /// Fourier model artifact to use as the cycle shape instead of a built-in template.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Mean cycle duration (s); defaults to the template's.
        #[arg(long)]
        period: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seconds.
        #[arg(long)]
        duration: Option<f64>,
        /// Hz.
        #[arg(long)]
        rate: Option<f64>,
        /// m/s²; defaults to 10 dB below the template power.
        #[arg(long)]
        noise_std: Option<f64>,
        /// Seconds.
        #[arg(long)]
        jitter: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth artifact path.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Run every stage on one or more recordings.
    Pipeline {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Signature library for the classification stage.
        #[arg(long)]
        library: Option<PathBuf>,
        /// Worker threads for multiple recordings.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn emit(a: &Artifact, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => artifact::write_artifact(a, p),
        None => {
            print!("{}", artifact::to_json(a)?);
            Ok(())
        }
    }
}

fn print_json(v: &serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(v).expect("json value serializes")
    );
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest { input, norm } => {
            let rec = read_recording::<f64>(&input).map_err(|e| e.in_stage("ingest"))?;
            if let Some(p) = norm {
                write_signal(&accel_norm(&rec), p).map_err(|e| e.in_stage("ingest"))?;
            }
            let (t0, t1) = rec.span();
            print_json(&serde_json::json!({
                "samples": rec.len(),
                "nominal_rate": rec.nominal_rate(),
                "span": [t0, t1],
            }));
        }
        Command::Preprocess { input, out, cfg } => {
            let cfg = cfg.build().map_err(|e| e.in_stage("config"))?;
            let rec = read_recording::<f64>(&input).map_err(|e| e.in_stage("ingest"))?;
            (|| {
                cfg.validate_for_rate(rec.nominal_rate())?;
                let design = design_bandpass(
                    cfg.filter_order,
                    cfg.band_lo,
                    cfg.band_hi,
                    rec.nominal_rate(),
                )?;
                let filtered = filter_zero_phase(&accel_norm(&rec), &design)?;
                write_signal(&filtered, &out)
            })()
            .map_err(|e: Error| e.in_stage("preprocess"))?;
        }
        Command::Detect {
            input,
            out,
            raw,
            cfg,
        } => {
            let cfg = cfg.build().map_err(|e| e.in_stage("config"))?;
            let signal = read_signal::<f64>(&input).map_err(|e| e.in_stage("ingest"))?;
            let seg =
                detect_cycles(&signal, &cfg.thresholds()).map_err(|e| e.in_stage("detect"))?;
            let seg = if raw {
                seg
            } else {
                filter_segments(&seg, cfg.eps_lo, cfg.eps_up).map_err(|e| e.in_stage("filter"))?
            };
            emit(&artifact::segmentation(&seg), out.as_deref())?;
        }
        Command::Refine {
            input,
            segmentation,
            out,
            trace,
            signature,
            cfg,
        } => {
            let cfg = cfg.build().map_err(|e| e.in_stage("config"))?;
            let grid = NormalizedGrid::new(cfg.grid_size).map_err(|e| e.in_stage("config"))?;
            let signal = read_signal::<f64>(&input).map_err(|e| e.in_stage("ingest"))?;
            let seg = artifact::read_segmentation::<f64>(&segmentation)
                .map_err(|e| e.in_stage("ingest"))?;
            let (refined, sig, tr) = optimize_segmentation(&seg, &signal, grid, &cfg.opt_config())
                .map_err(|e| e.in_stage("refine"))?;
            if let Some(p) = trace {
                let rows: Vec<Vec<f64>> = tr
                    .costs
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| vec![i as f64, v])
                    .collect();
                write_columns(p, &["iter", "V"], &rows)?;
            }
            if let Some(p) = signature {
                artifact::write_artifact(&artifact::signature(&sig), p)?;
            }
            emit(&artifact::segmentation(&refined), out.as_deref())?;
        }
        Command::Signature {
            input,
            segmentation,
            out,
            cfg,
        } => {
            let cfg = cfg.build().map_err(|e| e.in_stage("config"))?;
            let grid = NormalizedGrid::new(cfg.grid_size).map_err(|e| e.in_stage("config"))?;
            let signal = read_signal::<f64>(&input).map_err(|e| e.in_stage("ingest"))?;
            let seg = artifact::read_segmentation::<f64>(&segmentation)
                .map_err(|e| e.in_stage("ingest"))?;
            let sig = extract_cycles(&signal, &seg, grid)
                .and_then(|c| average_signature(&c))
                .map_err(|e| e.in_stage("signature"))?;
            emit(&artifact::signature(&sig), out.as_deref())?;
        }
        Command::Fourier {
            signature,
            out,
            scores,
            cfg,
        } => {
            let cfg = cfg.build().map_err(|e| e.in_stage("config"))?;
            let sig =
                artifact::read_signature::<f64>(&signature).map_err(|e| e.in_stage("ingest"))?;
            let model = (|| {
                let order = match cfg.order {
                    OrderChoice::Fixed(k) => k,
                    OrderChoice::Select { min, max } => {
                        let sel = select_order(&sig, min, max, cfg.criterion, cfg.penalty_count)?;
                        if let Some(p) = &scores {
                            let rows: Vec<Vec<f64>> = sel
                                .scores
                                .iter()
                                .map(|s| vec![s.order as f64, s.aic, s.bic, s.rss])
                                .collect();
                            write_columns(p, &["K", "AIC", "BIC", "RSS"], &rows)?;
                        }
                        sel.best
                    }
                };
                fit_fourier(&sig, order)
            })()
            .map_err(|e: Error| e.in_stage("fourier"))?;
            emit(&artifact::fourier(&model), out.as_deref())?;
        }
        Command::Library { entries, out } => {
            let lib = (|| {
                let mut items = Vec::with_capacity(entries.len());
                for e in &entries {
                    let (label, path) = e
                        .split_once('=')
                        .ok_or_else(|| Error::Library(format!("entry `{e}` is not LABEL=PATH")))?;
                    items.push(LibraryEntry {
                        label: label.to_owned(),
                        signature: artifact::read_signature::<f64>(path)?,
                    });
                }
                SignatureLibrary::new(items)
            })()
            .map_err(|e: Error| e.in_stage("library"))?;
            artifact::write_library(&lib, out)?;
        }
        Command::Classify {
            signature,
            library,
            matrix,
            out,
            cfg,
        } => {
            let cfg = cfg.build().map_err(|e| e.in_stage("config"))?;
            let lib = artifact::read_library::<f64>(&library).map_err(|e| e.in_stage("ingest"))?;
            let doc = if matrix {
                let m =
                    correlation_matrix(&lib, cfg.similarity).map_err(|e| e.in_stage("classify"))?;
                Artifact::Correlation(CorrelationDoc::new(&m, cfg.similarity))
            } else {
                let path = signature.ok_or_else(|| {
                    Error::Config("a signature is required unless --matrix is given".into())
                        .in_stage("config")
                })?;
                let sig =
                    artifact::read_signature::<f64>(&path).map_err(|e| e.in_stage("ingest"))?;
                let c = classify_nearest(&sig, &lib, cfg.similarity)
                    .map_err(|e| e.in_stage("classify"))?;
                Artifact::Classification(ClassificationDoc::new(&c, cfg.similarity))
            };
            emit(&doc, out.as_deref())?;
        }
        Command::Synth {
            template,
            model,
            period,
            seed,
            duration,
            rate,
            noise_std,
            jitter,
            out,
            truth,
        } => {
            let mut spec = SynthSpec::<f64>::preset(template, seed);
            if let Some(p) = model {
                let m = artifact::read_fourier::<f64>(&p).map_err(|e| e.in_stage("ingest"))?;
                spec.noise_std = template_rms(&m) / 10f64.sqrt();
                spec.template = m;
            }
            if let Some(p) = period {
                spec.mean_period = p;
            }
            if let Some(d) = duration {
                spec.duration = d;
            }
            if let Some(r) = rate {
                spec.rate = r;
            }
            if let Some(n) = noise_std {
                spec.noise_std = n;
            }
            if let Some(j) = jitter {
                spec.period_jitter_std = j;
            }
            let generated = generate(&spec).map_err(|e| e.in_stage("synth"))?;
            write_recording(&generated.recording, &out)?;
            if let Some(p) = truth {
                let doc = TruthDoc {
                    boundaries: generated.truth.boundaries().to_vec(),
                    signature: (&generated.signature).into(),
                    template: (&spec.template).into(),
                    seed,
                };
                artifact::write_artifact(&Artifact::Truth(doc), p)?;
            }
        }
        Command::Pipeline {
            inputs,
            out_dir,
            library,
            jobs,
            cfg,
        } => {
            let mut cfg = cfg.build().map_err(|e| e.in_stage("config"))?;
            if library.is_some() {
                cfg.library = library;
            }
            let jobs = jobs.max(1);
            let single = inputs.len() == 1;
            let results = if single {
                vec![gaitsig::pipeline::run_pipeline(&inputs[0], &cfg, &out_dir)]
            } else {
                run_batch(&inputs, &cfg, &out_dir, jobs)
            };
            let dirs = batch_dirs(&inputs);
            let mut first_err = None;
            for (i, r) in results.into_iter().enumerate() {
                match r {
                    Ok(rep) => {
                        let s = &rep.doc.summary;
                        println!(
                            "{}: M={} V {:.6} -> {:.6} in {} iterations, K={}{}",
                            inputs[i].display(),
                            s.num_cycles,
                            s.initial_cost,
                            s.final_cost,
                            s.iterations,
                            s.selected_order,
                            s.classification
                                .as_ref()
                                .map_or_else(String::new, |c| format!(
                                    ", class {} ({:.3})",
                                    c.label, c.score
                                )),
                        );
                    }
                    Err(e) => {
                        if !single {
                            eprintln!("{} [{}]: {e}", inputs[i].display(), dirs[i]);
                        }
                        first_err.get_or_insert(e);
                    }
                }
            }
            if let Some(e) = first_err {
                return Err(e);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.schema {
        println!("{}", artifact::SCHEMA);
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: no subcommand given (see --help)");
        return ExitCode::from(1);
    };
    match run(command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
