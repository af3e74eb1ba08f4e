//! Command-line interface. Each subcommand writes its primary output to the
//! given writer and reports failures as a [`Failure`] carrying the exit code.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use ttc_core::data::{generate_synthetic, normalize_features, DataError};
use ttc_core::metrics::{evaluate, MetricsError, PredictionRecord};
use ttc_core::taxonomy::validate;
use ttc_core::train::{assess, train_with_clock, Clock, NoClock, TrainError};
use ttc_core::{Dataset, HeadMode, LossWeights, SyntheticSpec, Taxonomy};

use crate::checkpoint::{Checkpoint, CheckpointError};
use crate::compare::{run_compare, CompareError, DEFAULT_TRAIN_FRACTION};
use crate::config::{self, ConfigError, Overrides};
use crate::dataset_io::{self, DatasetIoError};
use crate::report::{compare_csv, history_csv};
use crate::taxonomy_io::{self, TaxonomyParseError};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_MISMATCH: u8 = 3;

/// A failed command: exit code plus a one-line cause (empty when the
/// command already printed its own diagnostics).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn context(mut self, what: &Path) -> Self {
        self.message = format!("{}: {}", what.display(), self.message);
        self
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(EXIT_USAGE, e.to_string())
    }
}

impl From<TaxonomyParseError> for Failure {
    fn from(e: TaxonomyParseError) -> Self {
        let code = match e {
            TaxonomyParseError::Io(_) => EXIT_USAGE,
            _ => EXIT_INVALID,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<DatasetIoError> for Failure {
    fn from(e: DatasetIoError) -> Self {
        let code = match e {
            DatasetIoError::Io(_) => EXIT_USAGE,
            DatasetIoError::Data(DataError::TaxonomyMismatch) => EXIT_MISMATCH,
            _ => EXIT_INVALID,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<CheckpointError> for Failure {
    fn from(e: CheckpointError) -> Self {
        let code = match e {
            CheckpointError::Io(_) => EXIT_USAGE,
            CheckpointError::TaxonomyMismatch => EXIT_MISMATCH,
            _ => EXIT_INVALID,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let code = match e {
            ConfigError::Io(_) => EXIT_USAGE,
            _ => EXIT_INVALID,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        let code = match e {
            DataError::TaxonomyMismatch => EXIT_MISMATCH,
            _ => EXIT_INVALID,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Data(d) => d.into(),
            other => Failure::new(EXIT_INVALID, other.to_string()),
        }
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        Failure::new(EXIT_INVALID, e.to_string())
    }
}

impl From<CompareError> for Failure {
    fn from(e: CompareError) -> Self {
        match e {
            CompareError::NoSeeds => Failure::new(EXIT_USAGE, e.to_string()),
            CompareError::Data(d) => d.into(),
            CompareError::Train(t) => t.into(),
            CompareError::Metrics(m) => m.into(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::new(EXIT_INVALID, e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ttc",
    version,
    about = "Taxonomy-based transitional classifier heads"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a taxonomy file and list every violated rule.
    Validate {
        #[arg(long)]
        taxonomy: PathBuf,
    },
    /// Sample a synthetic dataset as JSONL.
    Generate {
        #[arg(long)]
        taxonomy: PathBuf,
        /// Generator spec (JSON with feature_dim, radii, noise_sigma, instances_per_leaf).
        #[arg(long)]
        synthetic: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one head and write a checkpoint plus its history.
    Train {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        training: Training,
        #[arg(long, default_value = "ttc")]
        mode: HeadMode,
        /// Checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// History CSV path; defaults to the checkpoint path with a `.history.csv` extension.
        #[arg(long)]
        history: Option<PathBuf>,
        /// Record wall-clock seconds per epoch instead of zeros.
        #[arg(long)]
        timing: bool,
    },
    /// Evaluate a checkpoint and print the report as JSON.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        taxonomy: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Train flat and TTC heads over several seeds and report held-out metrics.
    Compare {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        training: Training,
        /// Number of seeds, counted up from the base seed.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        seeds: u64,
        /// CSV output path.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
        train_fraction: f64,
    },
}

#[derive(Debug, Args)]
pub struct Input {
    #[arg(long)]
    pub taxonomy: PathBuf,
    /// JSONL dataset.
    #[arg(
        long,
        required_unless_present = "synthetic",
        conflicts_with = "synthetic"
    )]
    pub data: Option<PathBuf>,
    /// Generator spec; data are sampled with the base seed.
    #[arg(long)]
    pub synthetic: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Training {
    /// TrainConfig JSON; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Per-level loss weights, e.g. `1,1,2`.
    #[arg(long, value_parser = parse_pi_arg)]
    pub pi: Option<LossWeights>,
    #[arg(long)]
    pub detach_chain: bool,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Standardize features with statistics of the training data.
    #[arg(long)]
    pub normalize: bool,
}

fn parse_pi_arg(s: &str) -> Result<LossWeights, String> {
    config::parse_pi(s).map_err(|e| e.to_string())
}

impl Training {
    fn resolve(&self) -> Result<ttc_core::TrainConfig, Failure> {
        let overrides = Overrides {
            seed: self.seed,
            tau: self.tau,
            pi: self.pi.clone(),
            detach_chain: self.detach_chain,
            max_epochs: self.max_epochs,
        };
        config::resolve(self.config.as_deref(), &overrides).map_err(|e| {
            let f = Failure::from(e);
            match &self.config {
                Some(p) => f.context(p),
                None => f,
            }
        })
    }
}

fn load_taxonomy(path: &Path) -> Result<Taxonomy, Failure> {
    taxonomy_io::load_taxonomy(path).map_err(|e| Failure::from(e).context(path))
}

fn load_spec(path: &Path) -> Result<SyntheticSpec, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::from(e).context(path))?;
    serde_json::from_str(&text).map_err(|e| Failure::from(e).context(path))
}

fn load_data(input: &Input, taxonomy: &Taxonomy, seed: u64) -> Result<Dataset, Failure> {
    match (&input.data, &input.synthetic) {
        (Some(path), _) => {
            dataset_io::load_jsonl(path, taxonomy).map_err(|e| Failure::from(e).context(path))
        }
        (None, Some(path)) => {
            let spec = load_spec(path)?;
            generate_synthetic(taxonomy, &spec, seed).map_err(|e| Failure::from(e).context(path))
        }
        (None, None) => Err(Failure::new(
            EXIT_USAGE,
            "one of --data or --synthetic is required",
        )),
    }
}

struct WallClock(Instant);

impl Clock for WallClock {
    fn seconds(&mut self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { taxonomy } => run_validate(&taxonomy, out),
        Command::Generate {
            taxonomy,
            synthetic,
            seed,
            out: path,
        } => run_generate(&taxonomy, &synthetic, seed, path.as_deref(), out),
        Command::Train {
            input,
            training,
            mode,
            out: path,
            history,
            timing,
        } => run_train(
            &input,
            &training,
            mode,
            &path,
            history.as_deref(),
            timing,
            out,
        ),
        Command::Eval {
            checkpoint,
            taxonomy,
            data,
        } => run_eval(&checkpoint, &taxonomy, &data, out),
        Command::Compare {
            input,
            training,
            seeds,
            out: path,
            train_fraction,
        } => run_compare_command(
            &input,
            &training,
            seeds,
            path.as_deref(),
            train_fraction,
            out,
        ),
    }
}

/// Prints `ok`, or one violation per line and fails with code 2.
pub fn run_validate(path: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::from(e).context(path))?;
    let draft = taxonomy_io::parse_draft(&text).map_err(|e| Failure::from(e).context(path))?;
    match validate(&draft) {
        Ok(()) => {
            writeln!(out, "ok")?;
            Ok(())
        }
        Err(violations) => {
            for v in &violations {
                writeln!(out, "{v}")?;
            }
            Err(Failure::new(
                EXIT_INVALID,
                format!("{}: {} violation(s)", path.display(), violations.len()),
            ))
        }
    }
}

pub fn run_generate(
    taxonomy: &Path,
    spec: &Path,
    seed: u64,
    path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let t = load_taxonomy(taxonomy)?;
    let spec_value = load_spec(spec)?;
    let ds =
        generate_synthetic(&t, &spec_value, seed).map_err(|e| Failure::from(e).context(spec))?;
    match path {
        Some(p) => dataset_io::save_jsonl(p, &ds, &t).map_err(|e| Failure::from(e).context(p))?,
        None => dataset_io::write_jsonl(&mut *out, &ds, &t)?,
    }
    log::info!(
        "generated {} instances of dimension {}",
        ds.len(),
        ds.feature_dim()
    );
    Ok(())
}

fn history_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("history.csv")
}

#[allow(clippy::too_many_arguments)]
pub fn run_train(
    input: &Input,
    training: &Training,
    mode: HeadMode,
    checkpoint: &Path,
    history: Option<&Path>,
    timing: bool,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let t = load_taxonomy(&input.taxonomy)?;
    let cfg = training.resolve()?;
    let mut ds = load_data(input, &t, cfg.seed)?;
    let mut stats = None;
    if training.normalize {
        let (scaled, s) = normalize_features(&ds)?;
        ds = scaled;
        stats = Some(s);
    }
    log::info!("training {mode} head on {} instances", ds.len());
    let outcome = if timing {
        train_with_clock(&ds, &t, &cfg, mode, &mut WallClock(Instant::now()))?
    } else {
        train_with_clock(&ds, &t, &cfg, mode, &mut NoClock)?
    };

    Checkpoint::new(&outcome.params, cfg.tau, &t, mode, stats)
        .save(checkpoint)
        .map_err(|e| Failure::from(e).context(checkpoint))?;
    let history = history
        .map(Path::to_path_buf)
        .unwrap_or_else(|| history_path(checkpoint));
    std::fs::write(&history, history_csv(&outcome.history, t.num_levels()))
        .map_err(|e| Failure::from(e).context(&history))?;

    let weights = cfg.loss_weights(t.num_levels())?;
    let (loss, records) = assess(
        &outcome.params,
        &ds,
        &t.transition_matrices(),
        cfg.tau,
        mode,
        &weights,
    )?;
    let report = evaluate(&records, &t)?;
    let line = json!({
        "mode": mode,
        "epochs": outcome.history.len(),
        "best_epoch": outcome.best_epoch,
        "loss": loss,
        "metrics": report,
    });
    writeln!(out, "{line}")?;
    Ok(())
}

pub fn run_eval(
    checkpoint: &Path,
    taxonomy: &Path,
    data: &Path,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let t = load_taxonomy(taxonomy)?;
    let ck = Checkpoint::load(checkpoint).map_err(|e| Failure::from(e).context(checkpoint))?;
    let model = ck
        .model(&t)
        .map_err(|e| Failure::from(e).context(checkpoint))?;
    let ds = dataset_io::load_jsonl(data, &t).map_err(|e| Failure::from(e).context(data))?;
    if ds.feature_dim() != ck.feature_dim {
        return Err(Failure::new(
            EXIT_MISMATCH,
            format!(
                "checkpoint expects features of dimension {}, data have {}",
                ck.feature_dim,
                ds.feature_dim()
            ),
        ));
    }
    let records = ds
        .instances()
        .iter()
        .map(|inst| {
            let mut feature = inst.feature.clone();
            if let Some(stats) = &ck.normalization {
                stats.transform(&mut feature);
            }
            model
                .predict(&feature)
                .map(|p| PredictionRecord::new(p, inst.labels.clone()))
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::new(EXIT_INVALID, e.to_string()))?;
    let report = evaluate(&records, &t)?;
    writeln!(out, "{}", serde_json::to_string(&report)?)?;
    Ok(())
}

pub fn run_compare_command(
    input: &Input,
    training: &Training,
    seeds: u64,
    csv_path: Option<&Path>,
    train_fraction: f64,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let t = load_taxonomy(&input.taxonomy)?;
    let cfg = training.resolve()?;
    let ds = load_data(input, &t, cfg.seed)?;
    let seed_list: Vec<u64> = (0..seeds).map(|k| cfg.seed.wrapping_add(k)).collect();
    let report = run_compare(
        &ds,
        &t,
        &cfg,
        &seed_list,
        train_fraction,
        training.normalize,
    )?;
    if let Some(p) = csv_path {
        std::fs::write(p, compare_csv(&report)).map_err(|e| Failure::from(e).context(p))?;
    }
    writeln!(out, "{}", serde_json::to_string(&report)?)?;
    Ok(())
}
