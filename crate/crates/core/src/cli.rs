//! Command-line orchestration. Every artifact of a run lives under
//! `<out>/run-<config hash>-s<seed>/`:
//!
//! ```text
//! config.json
//! archives/{source,target}/      response archives
//! dataset/                       training-facing datasets + quarantined labels
//! weights.json
//! checkpoints/{adapted,baseline}/ parameters, training_log.jsonl, training_summary.json
//! reports/                       report.json, comparison.json, CSVs
//! ```

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::blob;
use crate::config::PipelineConfig;
use crate::dataset::{build_domains, load_dataset, save_dataset, DatasetBundle};
use crate::error::{Error, Result};
use crate::eval::{compare_models, emit_model_report, emit_report, evaluate_model, load_target_labels, ComparisonReport};
use crate::net::{load_checkpoint, round_to_f32, save_checkpoint, ParameterStore};
use crate::sim::{run_campaign, Archive};
use crate::train::{train, train_baseline, TrainingData, TrainingLog};
use crate::weights::{compute_weights, SourceWeightSet};

#[derive(Debug, Parser)]
#[command(name = "drift-adapt", version, about = "Story-level seismic damage classification with physics-weighted domain adaptation")]
struct Cli {
    /// JSON pipeline configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root; defaults to $DRIFT_ADAPT_OUT, then ./runs.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override a configuration value, e.g. --set training.epochs=5.
    #[arg(long = "set", value_name = "DOT.PATH=VALUE", global = true)]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Adapted,
    Baseline,
}

impl Model {
    fn name(self) -> &'static str {
        match self {
            Model::Adapted => "adapted",
            Model::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the source and target response campaigns.
    Simulate,
    /// Extract features and labels into per-story domain datasets.
    BuildDataset,
    /// Print the normalized source weights as JSON.
    Weights {
        /// Source physics descriptors, comma separated; taken from the
        /// configuration when omitted.
        #[arg(long, value_delimiter = ',', requires = "target_physics")]
        source_physics: Option<Vec<f64>>,
        #[arg(long, requires = "source_physics")]
        target_physics: Option<f64>,
    },
    /// Train the adapted model.
    Train,
    /// Train the source-only model.
    TrainBaseline,
    /// Score one trained model.
    Evaluate {
        #[arg(long, value_enum, default_value = "adapted")]
        model: Model,
    },
    /// Score both models and write the comparison.
    Compare,
    /// Run every stage in order.
    Pipeline,
    /// Print the effective configuration.
    ShowConfig,
}

impl Command {
    fn stage(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::BuildDataset => "build-dataset",
            Command::Weights { .. } => "weights",
            Command::Train => "train",
            Command::TrainBaseline => "train-baseline",
            Command::Evaluate { .. } => "evaluate",
            Command::Compare => "compare",
            Command::Pipeline => "pipeline",
            Command::ShowConfig => "show-config",
        }
    }
}

/// A resolved configuration bound to its run directory.
pub struct Run {
    pub config: PipelineConfig,
    pub hash: String,
    pub dir: PathBuf,
}

impl Run {
    pub fn new(config: PipelineConfig, out_root: &Path) -> Self {
        let hash = config.hash();
        let dir = config.run_dir(out_root);
        Self { config, hash, dir }
    }

    fn archive_dir(&self, role: &str) -> PathBuf {
        self.dir.join("archives").join(role)
    }

    fn dataset_dir(&self) -> PathBuf {
        self.dir.join("dataset")
    }

    fn checkpoint_dir(&self, model: Model) -> PathBuf {
        self.dir.join("checkpoints").join(model.name())
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.dir.join("reports")
    }

    fn check_hash(&self, path: &Path, found: &str) -> Result<()> {
        if found == self.hash {
            Ok(())
        } else {
            Err(Error::HashMismatch {
                path: path.to_path_buf(),
                expected: self.hash.clone(),
                found: found.into(),
            })
        }
    }

    fn record_config(&self) -> Result<()> {
        blob::create_dir(&self.dir)?;
        blob::write_json(&self.dir.join("config.json"), &self.config)
    }

    pub fn simulate(&self) -> Result<()> {
        let sim = &self.config.simulation;
        for (role, building, salt) in [("source", &sim.source_building, 0u64), ("target", &sim.target_building, 1)] {
            let dir = self.archive_dir(role);
            let seed = self.config.seed.wrapping_mul(2).wrapping_add(salt);
            let m = run_campaign(building, &sim.campaign, seed, &self.hash, &dir)?;
            eprintln!("  {role}: {} records of {}", m.records.len(), building.id);
        }
        Ok(())
    }

    fn open_archive(&self, role: &str) -> Result<Archive> {
        let dir = self.archive_dir(role);
        let a = Archive::open(&dir)?;
        self.check_hash(&dir.join("manifest.json"), &a.manifest.config_hash)?;
        Ok(a)
    }

    pub fn build_dataset(&self) -> Result<()> {
        let (src, tgt) = (self.open_archive("source")?, self.open_archive("target")?);
        let (bundle, labels) = build_domains(&src, &tgt, &self.config.dataset, self.config.seed, &self.hash)?;
        save_dataset(&bundle, Some(&labels), &self.dataset_dir())?;
        for d in bundle.sources.iter().chain(std::iter::once(&bundle.target)) {
            eprintln!("  {}: {} samples", d.domain_id, d.len());
        }
        Ok(())
    }

    pub fn weights(&self) -> Result<SourceWeightSet> {
        let d = &self.config.dataset;
        let n_src = self.config.simulation.source_building.n_stories() as f64;
        let n_tgt = self.config.simulation.target_building.n_stories() as f64;
        let sources: Vec<f64> = d.source_stories.iter().map(|s| *s as f64 / n_src).collect();
        compute_weights(&sources, d.target_story as f64 / n_tgt, &self.config.weights)
    }

    fn dataset(&self) -> Result<DatasetBundle> {
        let dir = self.dataset_dir();
        let bundle = load_dataset(&dir)?;
        self.check_hash(&dir.join("manifest.json"), &bundle.config_hash)?;
        Ok(bundle)
    }

    pub fn train(&self, model: Model) -> Result<(ParameterStore, TrainingLog)> {
        let bundle = self.dataset()?;
        let w = self.weights()?;
        blob::write_json(&self.dir.join("weights.json"), &w)?;
        let net = &self.config.network;
        let sources: Vec<_> = bundle.sources.iter().collect();
        let (mut params, log) = match model {
            Model::Adapted => train(
                net,
                &TrainingData {
                    sources,
                    target: Some(&bundle.target),
                },
                &w.weights,
                &self.config.training,
            )?,
            Model::Baseline => train_baseline(net, &sources, &w.weights, &self.config.training)?,
        };
        round_to_f32(&mut params);
        let dir = self.checkpoint_dir(model);
        save_checkpoint(&params, net, self.config.seed, log.steps, &self.hash, &dir)?;
        log.write_json_lines(&dir.join("training_log.jsonl"))?;
        blob::write_json(&dir.join("training_summary.json"), &Summary::from(&log))?;
        eprintln!(
            "  {}: {} epochs, best epoch {} (source val accuracy {:.4})",
            model.name(),
            log.epochs.len(),
            log.best_epoch,
            log.best_val_accuracy
        );
        Ok((params, log))
    }

    fn params(&self, model: Model) -> Result<ParameterStore> {
        let dir = self.checkpoint_dir(model);
        let (params, manifest) = load_checkpoint(&dir)?;
        self.check_hash(&dir.join("manifest.json"), &manifest.config_hash)?;
        if manifest.network != self.config.network {
            return Err(Error::Schema(format!("{}: network config differs from the run config", dir.display())));
        }
        Ok(params)
    }

    pub fn evaluate(&self, model: Model) -> Result<()> {
        let params = self.params(model)?;
        let bundle = self.dataset()?;
        let labels = load_target_labels(&self.dataset_dir())?;
        let report = evaluate_model(model.name(), &self.config.network, &params, &bundle, &labels)?;
        emit_model_report(&report, &self.reports_dir().join(model.name()))?;
        println!(
            "{}: source accuracy {:.4}, target accuracy {:.4}",
            model.name(),
            report.source.accuracy,
            report.target.accuracy
        );
        Ok(())
    }

    pub fn compare(&self) -> Result<ComparisonReport> {
        let baseline = self.params(Model::Baseline)?;
        let adapted = self.params(Model::Adapted)?;
        let bundle = self.dataset()?;
        let labels = load_target_labels(&self.dataset_dir())?;
        let report = compare_models(&self.config.network, &baseline, &adapted, &bundle, &labels)?;
        emit_report(&report, &self.reports_dir())?;
        for m in [&report.baseline, &report.adapted] {
            println!(
                "{:>8}: source accuracy {:.4}, target accuracy {:.4}",
                m.model, m.source.accuracy, m.target.accuracy
            );
        }
        println!("target delta {:+.4}", report.target_delta);
        Ok(report)
    }
}

#[derive(serde::Serialize)]
struct Summary {
    initial_val_accuracy: f64,
    best_epoch: usize,
    best_val_accuracy: f64,
    stopped_early: bool,
    steps: u64,
    epochs_run: usize,
}

impl From<&TrainingLog> for Summary {
    fn from(log: &TrainingLog) -> Self {
        Self {
            initial_val_accuracy: log.initial_val_accuracy,
            best_epoch: log.best_epoch,
            best_val_accuracy: log.best_val_accuracy,
            stopped_early: log.stopped_early,
            steps: log.steps,
            epochs_run: log.epochs.len(),
        }
    }
}

fn timed<T>(name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    eprintln!("[{name}]");
    let out = f()?;
    eprintln!("[{name}] done in {:.1}s", start.elapsed().as_secs_f64());
    Ok(out)
}

/// Writes pretty JSON to stdout; a closed pipe is not an error.
fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{}", serde_json::to_string_pretty(value)?) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
        _ => Ok(()),
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let config = PipelineConfig::resolve(cli.config.as_deref(), &cli.set, cli.seed)?;
    if let Command::ShowConfig = cli.command {
        print_json(&config)?;
        return Ok(());
    }
    if let Command::Weights {
        source_physics: Some(s),
        target_physics: Some(t),
    } = &cli.command
    {
        print_json(&compute_weights(s, *t, &config.weights)?)?;
        return Ok(());
    }
    let run = Run::new(config, &config_root(cli)?);
    run.record_config()?;
    match cli.command {
        Command::Simulate => timed("simulate", || run.simulate()),
        Command::BuildDataset => timed("build-dataset", || run.build_dataset()),
        Command::Weights { .. } => {
            let w = run.weights()?;
            blob::write_json(&run.dir.join("weights.json"), &w)?;
            print_json(&w)?;
            Ok(())
        }
        Command::Train => timed("train", || run.train(Model::Adapted).map(drop)),
        Command::TrainBaseline => timed("train-baseline", || run.train(Model::Baseline).map(drop)),
        Command::Evaluate { model } => run.evaluate(model),
        Command::Compare => run.compare().map(drop),
        Command::Pipeline => {
            timed("simulate", || run.simulate())?;
            timed("build-dataset", || run.build_dataset())?;
            timed("train-baseline", || run.train(Model::Baseline).map(drop))?;
            timed("train", || run.train(Model::Adapted).map(drop))?;
            run.compare()?;
            println!("run directory: {}", run.dir.display());
            Ok(())
        }
        Command::ShowConfig => unreachable!("handled above"),
    }
}

fn config_root(cli: &Cli) -> Result<PathBuf> {
    let config = PipelineConfig::resolve(cli.config.as_deref(), &cli.set, cli.seed)?;
    Ok(config.out_root(cli.out.as_deref()))
}

/// Process exit status for an error: 2 for configuration and missing-input
/// problems, 1 for failures inside a stage.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::MissingInput(_) | Error::HashMismatch { .. } => 2,
        _ => 1,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            if code == 2 {
                eprintln!("error: {e}");
            } else {
                eprintln!("error: stage {} failed: {e}", cli.command.stage());
            }
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_global_flags_after_subcommand() {
        let cli = Cli::try_parse_from(["drift-adapt", "train", "--seed", "7", "--set", "training.epochs=2"]).unwrap();
        assert_eq!(cli.seed, Some(7));
        assert_eq!(cli.set, vec!["training.epochs=2"]);
        assert!(matches!(cli.command, Command::Train));
    }

    #[test]
    fn bad_usage_exits_2() {
        assert_eq!(run(["drift-adapt", "frobnicate"]), 2);
        assert_eq!(run(["drift-adapt", "weights", "--set", "training.nope=1"]), 2);
    }

    #[test]
    fn default_weights_from_config() {
        let dir = tempfile::tempdir().unwrap();
        let run = Run::new(PipelineConfig::default(), dir.path());
        let w = run.weights().unwrap();
        for (a, b) in w.weights.iter().zip([0.488, 0.347, 0.165]) {
            assert!((a - b).abs() < 5e-3, "{a} vs {b}");
        }
    }
}
