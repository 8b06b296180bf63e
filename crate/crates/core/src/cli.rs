//! Command-line front end. `run` returns the process exit code so the binary
//! and the tests share one entry point.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::artifact::{self, FittedModel, ModelArtifact};
use crate::classifiers::{ClassifierConfig, ClassifierKind};
use crate::detectors::{DetectorConfig, DetectorKind};
use crate::preprocess::{PreprocessConfig, Representation, WindowSpec};
use crate::protocols::{
    oneclass_run, spoof_screening_run, tsc_verification_run, Decision, EvalReport, OneclassConfig,
    Pipeline, SpoofConfig, Task, VerifyConfig,
};
use crate::rng::DEFAULT_SEED;
use crate::synthgen::{gen_corpus, write_synth_corpus, AttackCounts};
use crate::trace::{parse_trace, read_corpus, regularize_grid, write_corpus, ChannelSelector, Label};
use crate::{Error, Result};

pub const SEED_ENV: &str = "MOTIONGATE_SEED";
pub const EXIT_ACCEPT: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_REJECT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "motiongate", version, about = "Selfie-capture motion traces to spoof-screening and verification scores")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
    /// Validate a corpus and optionally write a grid-regularized copy.
    Ingest(IngestArgs),
    /// Fit a model on a corpus and save it as an artifact.
    Train(TrainArgs),
    /// Run an evaluation protocol and write report.json, report.md, curves.csv.
    Eval(EvalArgs),
    /// Score one trace with a saved model.
    Score(ScoreArgs),
    /// Serve saved models over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub participants: usize,
    #[arg(long)]
    pub seqs: usize,
    #[arg(long, default_value_t = 6)]
    pub stationary: usize,
    #[arg(long, default_value_t = 11)]
    pub handheld: usize,
    #[arg(long, default_value_t = 18)]
    pub temporal_shift: usize,
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    /// Allow writing into a non-empty directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Write grid-regularized traces here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

/// Options shared by `train` and `eval`. Every field is optional so a config
/// file can supply it; flags win over the file.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// spoof, oneclass or verify.
    #[arg(long)]
    pub task: Option<String>,
    /// Detector (spoof, oneclass) or classifier (verify) id.
    #[arg(long)]
    pub method: Option<String>,
    /// Channel preset or comma-separated channel names.
    #[arg(long)]
    pub channels: Option<String>,
    /// k_open,pre,post
    #[arg(long)]
    pub window: Option<String>,
    /// single, concat or double.
    #[arg(long)]
    pub repr: Option<String>,
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    /// Spoof resamples.
    #[arg(long)]
    pub resamples: Option<usize>,
    /// Inner folds (spoof, oneclass) or outer folds (verify).
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub enroll: Option<usize>,
    /// Calibration percentile (spoof, oneclass) or target FRR in percent (verify).
    #[arg(long)]
    pub percentile: Option<f64>,
    #[arg(long)]
    pub no_filter: bool,
    /// Full detector hyperparameters (config file only).
    #[arg(skip)]
    pub detector: Option<DetectorConfig>,
    /// Full classifier hyperparameters (config file only).
    #[arg(skip)]
    pub classifier: Option<ClassifierConfig>,
}

impl RunOptions {
    fn merge(self, file: RunOptions) -> RunOptions {
        RunOptions {
            corpus: self.corpus.or(file.corpus),
            task: self.task.or(file.task),
            method: self.method.or(file.method),
            channels: self.channels.or(file.channels),
            window: self.window.or(file.window),
            repr: self.repr.or(file.repr),
            seed: self.seed.or(file.seed),
            resamples: self.resamples.or(file.resamples),
            folds: self.folds.or(file.folds),
            repeats: self.repeats.or(file.repeats),
            enroll: self.enroll.or(file.enroll),
            percentile: self.percentile.or(file.percentile),
            no_filter: self.no_filter || file.no_filter,
            detector: self.detector.or(file.detector),
            classifier: self.classifier.or(file.classifier),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunOptions,
    /// JSON file with any of the run options.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Participant to enroll (oneclass).
    #[arg(long)]
    pub participant: Option<u32>,
    #[arg(long)]
    pub model_id: String,
    /// Artifact path (default: <model_id>.json).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub run: RunOptions,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Trace CSV.
    #[arg(long)]
    pub trace: PathBuf,
    /// Sidecar JSON (default: the CSV path with a .json extension).
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Claimed participant id for verification models.
    #[arg(long)]
    pub claim: Option<u32>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "MOTIONGATE_MODELS")]
    pub models: PathBuf,
    #[arg(long, env = "MOTIONGATE_ADDR", default_value = "127.0.0.1:8080")]
    pub addr: String,
}

/// A fully resolved and validated run.
#[derive(Debug, Clone, PartialEq)]
pub enum RunConfig {
    Spoof(SpoofConfig),
    Oneclass(OneclassConfig),
    Verify(VerifyConfig),
}

fn read_config_file(path: Option<&Path>) -> Result<RunOptions> {
    let Some(path) = path else {
        return Ok(RunOptions::default());
    };
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

impl RunConfig {
    /// Validates the task/method pairing before any work starts.
    pub fn resolve(opts: &RunOptions) -> Result<(PathBuf, RunConfig)> {
        let corpus = opts.corpus.clone().ok_or_else(|| Error::Config("--corpus is required".into()))?;
        let task: Task = opts
            .task
            .as_deref()
            .ok_or_else(|| Error::Config("--task is required".into()))?
            .parse()
            .map_err(Error::Config)?;
        let method = opts
            .method
            .as_deref()
            .ok_or_else(|| Error::Config("--method is required".into()))?;
        let repr: Representation = opts.repr.as_deref().unwrap_or("single").parse()?;
        let window = match opts.window.as_deref() {
            Some(w) => WindowSpec::parse_triplet(w, repr)?,
            None => WindowSpec {
                representation: repr,
                ..WindowSpec::default()
            },
        };
        let selector: ChannelSelector = opts.channels.as_deref().unwrap_or("acc_xyz").parse()?;
        let preprocess = PreprocessConfig {
            filter: !opts.no_filter,
            ..PreprocessConfig::default()
        };
        let pipeline = Pipeline {
            preprocess,
            window,
            selector,
        };
        let seed = opts.seed.unwrap_or(DEFAULT_SEED);
        let config = match task {
            Task::Spoof | Task::Oneclass => {
                let kind: DetectorKind = method.parse().map_err(|_| {
                    Error::Config(format!(
                        "method `{method}` is not a detector; task {} needs one of {}",
                        task.as_str(),
                        DetectorKind::ALL.map(|k| k.as_str()).join(", ")
                    ))
                })?;
                let detector = match opts.detector {
                    Some(d) if d.kind() == kind => d,
                    Some(d) => {
                        return Err(Error::Config(format!(
                            "config detector `{}` does not match --method {method}",
                            d.kind()
                        )))
                    }
                    None => DetectorConfig::default_for(kind),
                };
                if task == Task::Spoof {
                    let mut c = SpoofConfig::new(pipeline, detector, seed);
                    c.resamples = opts.resamples.unwrap_or(c.resamples);
                    c.inner_folds = opts.folds.unwrap_or(c.inner_folds);
                    c.percentile = opts.percentile.unwrap_or(c.percentile);
                    RunConfig::Spoof(c)
                } else {
                    let mut c = OneclassConfig::new(pipeline, detector, seed);
                    c.inner_folds = opts.folds.unwrap_or(c.inner_folds);
                    c.repeats = opts.repeats.unwrap_or(c.repeats);
                    c.enroll = opts.enroll.unwrap_or(c.enroll);
                    c.percentile = opts.percentile.unwrap_or(c.percentile);
                    RunConfig::Oneclass(c)
                }
            }
            Task::Verify => {
                let kind: ClassifierKind = method.parse().map_err(|_| {
                    Error::Config(format!(
                        "method `{method}` is not a classifier; task verify needs one of {}",
                        ClassifierKind::ALL.map(|k| k.as_str()).join(", ")
                    ))
                })?;
                let classifier = match opts.classifier {
                    Some(c) if c.kind() == kind => c,
                    Some(c) => {
                        return Err(Error::Config(format!(
                            "config classifier `{}` does not match --method {method}",
                            c.kind()
                        )))
                    }
                    None => ClassifierConfig::default_for(kind),
                };
                let mut c = VerifyConfig::new(pipeline, classifier, seed);
                c.outer_folds = opts.folds.unwrap_or(c.outer_folds);
                c.inner_repeats = opts.repeats.unwrap_or(c.inner_repeats);
                c.target_frr = opts.percentile.unwrap_or(c.target_frr);
                RunConfig::Verify(c)
            }
        };
        Ok((corpus, config))
    }

    pub fn pipeline(&self) -> &Pipeline {
        match self {
            RunConfig::Spoof(c) => &c.pipeline,
            RunConfig::Oneclass(c) => &c.pipeline,
            RunConfig::Verify(c) => &c.pipeline,
        }
    }

    pub fn evaluate(&self, corpus: &Path) -> Result<EvalReport> {
        let traces = read_corpus(corpus)?;
        Ok(match self {
            RunConfig::Spoof(c) => spoof_screening_run(&traces, c)?,
            RunConfig::Oneclass(c) => oneclass_run(&traces, c)?,
            RunConfig::Verify(c) => tsc_verification_run(&traces, c)?,
        })
    }
}

fn ensure_empty_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(|e| Error::io(format!("reading {}", dir.display()), e))?;
        if entries.next().is_some() && !force {
            return Err(Error::Config(format!(
                "{} exists and is not empty (use --force to write into it)",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    ensure_empty_dir(&args.out, args.force)?;
    let counts = AttackCounts {
        stationary: args.stationary,
        handheld: args.handheld,
        temporal_shift: args.temporal_shift,
    };
    let corpus = gen_corpus(
        args.participants,
        args.seqs,
        counts,
        args.seed.unwrap_or(DEFAULT_SEED),
    )
    .map_err(|e| Error::Config(e.to_string()))?;
    write_synth_corpus(&args.out, &corpus).map_err(|e| Error::Config(e.to_string()))?;
    let bonafide = corpus.traces.iter().filter(|t| t.label == Label::Bonafide).count();
    println!(
        "wrote {} traces ({bonafide} bona fide, {} attack) to {}",
        corpus.traces.len(),
        corpus.traces.len() - bonafide,
        args.out.display()
    );
    Ok(())
}

pub fn cmd_ingest(args: &IngestArgs) -> Result<()> {
    let traces = read_corpus(&args.corpus)?;
    let regular = traces
        .iter()
        .map(regularize_grid)
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let bonafide = traces.iter().filter(|t| t.label == Label::Bonafide).count();
    let participants: std::collections::BTreeSet<u32> = traces.iter().filter_map(|t| t.participant_id).collect();
    println!(
        "{} traces ({bonafide} bona fide, {} attack) from {} participants",
        traces.len(),
        traces.len() - bonafide,
        participants.len()
    );
    if let Some(out) = &args.out {
        ensure_empty_dir(out, args.force)?;
        write_corpus(out, &regular)?;
        println!("wrote regularized corpus to {}", out.display());
    }
    Ok(())
}

pub fn cmd_train(args: &TrainArgs) -> Result<ModelArtifact> {
    let opts = args.run.clone().merge(read_config_file(args.config.as_deref())?);
    let (corpus, config) = RunConfig::resolve(&opts)?;
    artifact::validate_model_id(&args.model_id)?;
    let pipeline = config.pipeline().clone();
    let traces = read_corpus(&corpus)?;
    let (samples, excluded) = pipeline.prepare(&traces)?;
    if !excluded.is_empty() {
        log::warn!("{} traces excluded from training", excluded.len());
    }
    let (threshold, model) = match &config {
        RunConfig::Spoof(c) => {
            let (m, t) = artifact::train_spoof_model(&samples, &c.detector, c.inner_folds, c.percentile, c.seed)?;
            (t, FittedModel::Detector(m))
        }
        RunConfig::Oneclass(c) => {
            let p = args
                .participant
                .ok_or_else(|| Error::Config("--participant is required for oneclass models".into()))?;
            let (m, t) = artifact::train_oneclass_model(
                &samples,
                &c.detector,
                p,
                c.enroll,
                c.inner_folds,
                c.repeats,
                c.percentile,
                c.seed,
            )?;
            (t, FittedModel::Detector(m))
        }
        RunConfig::Verify(c) => {
            let (m, t) = artifact::train_verify_model(&samples, &c.classifier, 3, c.target_frr, c.seed)?;
            (t, FittedModel::Classifier(m))
        }
    };
    let art = ModelArtifact::new(&args.model_id, &pipeline, threshold, model)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.{}", args.model_id, artifact::ARTIFACT_EXTENSION)));
    art.save(&out)?;
    println!("saved {} ({}) to {}", art.model_id, art.kind(), out.display());
    Ok(art)
}

pub const REPORT_FILES: [&str; 3] = ["report.json", "report.md", "curves.csv"];

/// Writes the three report files; on failure removes whatever was written.
fn write_reports(out: &Path, report: &EvalReport) -> Result<()> {
    let contents = [report.to_json(), report.to_markdown(), report.curves_csv()];
    let mut written = Vec::new();
    let result = (|| {
        for (name, body) in REPORT_FILES.iter().zip(&contents) {
            let path = out.join(name);
            written.push(path.clone());
            fs::write(&path, body).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        }
        Ok(())
    })();
    if result.is_err() {
        for p in written {
            let _ = fs::remove_file(p);
        }
    }
    result
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport> {
    // Stale reports from an earlier run must not survive a failed one.
    for name in REPORT_FILES {
        let _ = fs::remove_file(args.out.join(name));
    }
    let opts = args.run.clone().merge(read_config_file(args.config.as_deref())?);
    let (corpus, config) = RunConfig::resolve(&opts)?;
    let report = config.evaluate(&corpus)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(format!("creating {}", args.out.display()), e))?;
    write_reports(&args.out, &report)?;
    println!(
        "{} {}: FRR {:.2} ± {:.2} %, FAR {:.2} ± {:.2} %{}",
        report.task.as_str(),
        report.method,
        report.summary.frr_pct.mean,
        report.summary.frr_pct.std,
        report.summary.far_pct.mean,
        report.summary.far_pct.std,
        report
            .summary
            .eer_pct
            .map_or(String::new(), |e| format!(", EER {:.2} ± {:.2} %", e.mean, e.std))
    );
    if let Some(ms) = report.ms_per_probe {
        println!("scoring time: {ms:.3} ms per probe");
    }
    Ok(report)
}

/// JSON printed by `score`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreOutput {
    pub score: f64,
    pub threshold: f64,
    pub decision: Decision,
    pub direction: crate::protocols::Direction,
}

pub fn cmd_score(args: &ScoreArgs) -> Result<ScoreOutput> {
    let art = ModelArtifact::load(&args.model)?;
    let meta_path = args.meta.clone().unwrap_or_else(|| args.trace.with_extension("json"));
    let csv = fs::read(&args.trace).map_err(|e| Error::io(format!("reading {}", args.trace.display()), e))?;
    let meta = fs::read(&meta_path).map_err(|e| Error::io(format!("reading {}", meta_path.display()), e))?;
    let trace = parse_trace(&csv, &meta)?;
    let outcome = art.score_trace(&trace, args.claim)?;
    Ok(ScoreOutput {
        score: outcome.score,
        threshold: outcome.threshold,
        decision: outcome.decision,
        direction: outcome.direction,
    })
}

fn set_jobs(jobs: Option<usize>) {
    if let Some(n) = jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
}

/// Parses `args` and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_ACCEPT };
        }
    };
    set_jobs(cli.jobs);
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a).map(|_| EXIT_ACCEPT),
        Command::Ingest(a) => cmd_ingest(a).map(|_| EXIT_ACCEPT),
        Command::Train(a) => cmd_train(a).map(|_| EXIT_ACCEPT),
        Command::Eval(a) => cmd_eval(a).map(|_| EXIT_ACCEPT),
        Command::Score(a) => cmd_score(a).map(|out| {
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{}", serde_json::to_string(&out).expect("score serializes"));
            match out.decision {
                Decision::Accept => EXIT_ACCEPT,
                Decision::Reject => EXIT_REJECT,
            }
        }),
        Command::Serve(a) => crate::server::serve_blocking(&a.addr, &a.models).map(|_| EXIT_ACCEPT),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        EXIT_ERROR
    })
}
