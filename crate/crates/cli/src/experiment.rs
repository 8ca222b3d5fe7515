//! Per-seed runs, parameter sweeps and their on-disk artifacts.
//!
//! Layout of an output directory:
//!
//! ```text
//! seed-<s>-matrix.csv   t,i,a       full lower-triangular accuracy matrix (1-based)
//! seed-<s>-end.csv      task_i,a_N_i  final row, only for completed runs
//! seed-<s>-buffer.gpsb  final replay buffer snapshot (when a buffer is used)
//! seed-<s>-model.gpsm   final parameters
//! summary.csv           n,mean,std  of the average end accuracy over completed seeds
//! manifest.json         config, tool version, timestamp, failures
//! ```
//!
//! Everything except `manifest.json` is a pure function of config and seed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use gps_core::bench::{average_end_accuracy, run_online, split_tasks, AccuracyMatrix, RunConfig};
use gps_core::rng::{streams, Rng};
use gps_core::{Learner, LayerDims, ModelParams, PixelBudget, ReplayBuffer};

use crate::config::{ExperimentConfig, ModeName};
use crate::data::Source;
use crate::error::{CliError, Result};

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub matrix: AccuracyMatrix,
    /// Average end accuracy; `None` when the run did not complete.
    pub end_accuracy: Option<f64>,
    pub failure: Option<String>,
    pub steps: u64,
    pub offers: u64,
    pub snapshot: Option<Vec<u8>>,
    pub checkpoint: Vec<u8>,
}

/// Runs the configured protocol for one seed.
pub fn run_seed(cfg: &ExperimentConfig, source: &Source, seed: u64) -> Result<SeedRun> {
    let data = source.dataset(seed)?;
    let (resolution, channels) = data.geometry()?;
    let classes = data.classes().last().map_or(0, |&c| c as usize + 1);

    let stream = split_tasks(
        &data,
        cfg.tasks.count,
        cfg.tasks.classes_per_task,
        &mut Rng::derive(seed, &[streams::TASK_SPLIT]),
    )?;

    let mut dims = LayerDims::for_images(resolution, channels, classes);
    dims.hidden = cfg.training.hidden;
    dims.embed = cfg.training.embed;
    let params = ModelParams::<f32>::init(dims, &mut Rng::derive(seed, &[streams::INIT]));
    let mut learner = Learner::new(params, resolution, channels)?.with_normalized_embeddings(cfg.inference.normalize);

    let mut buffer = match cfg.buffer_mode() {
        Some(mode) => Some(ReplayBuffer::new(
            PixelBudget::new(cfg.buffer.k, resolution)?,
            mode,
            Rng::derive(seed, &[streams::BUFFER]),
        )?),
        None => None,
    };

    let run_cfg = RunConfig {
        stream_batch: cfg.training.stream_batch,
        replay_batch: cfg.replay_batch(),
        lambda: cfg.training.lambda,
        lr: cfg.training.lr,
        head: cfg.head(),
        seed,
    };
    let outcome = run_online(&stream, &mut learner, buffer.as_mut(), &run_cfg)?;

    let mut checkpoint = Vec::new();
    learner.params.write_checkpoint(&mut checkpoint)?;
    let end_accuracy = match &outcome.failure {
        None => Some(average_end_accuracy(&outcome.matrix)?),
        Some(_) => None,
    };
    Ok(SeedRun {
        seed,
        end_accuracy,
        failure: outcome.failure.map(|e| e.to_string()),
        steps: outcome.steps,
        offers: outcome.offers,
        matrix: outcome.matrix,
        snapshot: buffer.map(|b| b.snapshot()),
        checkpoint,
    })
}

/// Runs every seed of `cfg`, in parallel when a pool with more than one
/// thread is active. Results come back in seed-list order.
pub fn run_seeds(cfg: &ExperimentConfig) -> Result<Vec<SeedRun>> {
    let source = Source::prepare(cfg)?;
    cfg.seeds.par_iter().map(|&s| run_seed(cfg, &source, s)).collect()
}

/// Mean and sample standard deviation (`n - 1` denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn matrix_csv(m: &AccuracyMatrix) -> String {
    let mut s = String::from("t,i,a\n");
    for (t, row) in m.rows().iter().enumerate() {
        for (i, a) in row.iter().enumerate() {
            writeln!(s, "{},{},{}", t + 1, i + 1, a).unwrap();
        }
    }
    s
}

pub fn end_csv(m: &AccuracyMatrix) -> Option<String> {
    let row = m.final_row()?;
    let mut s = String::from("task_i,a_N_i\n");
    for (i, a) in row.iter().enumerate() {
        writeln!(s, "{},{}", i + 1, a).unwrap();
    }
    Some(s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(runs: &[SeedRun]) -> Self {
        let values: Vec<f64> = runs.iter().filter_map(|r| r.end_accuracy).collect();
        let (mean, std) = mean_std(&values);
        Self { n: values.len(), mean, std }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    created: String,
    config: &'a ExperimentConfig,
    seeds: &'a [u64],
    complete: bool,
    failures: Vec<Failure<'a>>,
}

#[derive(Serialize)]
struct Failure<'a> {
    seed: u64,
    error: &'a str,
}

fn write(path: PathBuf, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(&path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_artifacts(dir: &Path, cfg: &ExperimentConfig, runs: &[SeedRun]) -> Result<Summary> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for run in runs {
        let s = run.seed;
        write(dir.join(format!("seed-{s}-matrix.csv")), matrix_csv(&run.matrix))?;
        if let Some(end) = end_csv(&run.matrix) {
            write(dir.join(format!("seed-{s}-end.csv")), end)?;
        }
        if let Some(snap) = &run.snapshot {
            write(dir.join(format!("seed-{s}-buffer.gpsb")), snap)?;
        }
        write(dir.join(format!("seed-{s}-model.gpsm")), &run.checkpoint)?;
    }
    let summary = Summary::of(runs);
    write(dir.join("summary.csv"), format!("n,mean,std\n{},{},{}\n", summary.n, summary.mean, summary.std))?;

    let manifest = Manifest {
        tool: "gps",
        version: env!("CARGO_PKG_VERSION"),
        created: chrono::Utc::now().to_rfc3339(),
        config: cfg,
        seeds: &cfg.seeds,
        complete: runs.iter().all(|r| r.failure.is_none()),
        failures: runs
            .iter()
            .filter_map(|r| r.failure.as_deref().map(|error| Failure { seed: r.seed, error }))
            .collect(),
    };
    write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
    Ok(summary)
}

fn failure_error(runs: &[SeedRun]) -> Option<CliError> {
    let failed: Vec<String> = runs
        .iter()
        .filter_map(|r| r.failure.as_ref().map(|e| format!("seed {}: {e}", r.seed)))
        .collect();
    (!failed.is_empty()).then(|| CliError::RunFailed(format!("run incomplete, partial artifacts written ({})", failed.join("; "))))
}

/// Runs all seeds and writes artifacts to `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(Vec<SeedRun>, Summary)> {
    cfg.validate()?;
    let runs = run_seeds(cfg)?;
    let summary = write_artifacts(&cfg.out_dir, cfg, &runs)?;
    match failure_error(&runs) {
        Some(err) => Err(err),
        None => Ok((runs, summary)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Factor,
    BudgetK,
    Mode,
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "f" => Ok(SweepAxis::Factor),
            "k" => Ok(SweepAxis::BudgetK),
            "mode" => Ok(SweepAxis::Mode),
            other => Err(format!("unknown sweep axis `{other}` (expected f, k or mode)")),
        }
    }
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Factor => "f",
            SweepAxis::BudgetK => "k",
            SweepAxis::Mode => "mode",
        }
    }

    /// `base` with this axis set to `value`.
    pub fn apply(&self, base: &ExperimentConfig, value: &str) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        let bad = |msg: String| CliError::Usage(format!("sweep value `{value}` for axis {}: {msg}", self.name()));
        match self {
            SweepAxis::Factor => cfg.buffer.f = value.parse().map_err(|e| bad(format!("{e}")))?,
            SweepAxis::BudgetK => cfg.buffer.k = value.parse().map_err(|e| bad(format!("{e}")))?,
            SweepAxis::Mode => {
                cfg.buffer.mode = value.parse::<ModeName>().map_err(bad)?;
                if cfg.buffer.mode == ModeName::None {
                    cfg.inference.head = crate::config::HeadName::Softmax;
                }
            }
        }
        cfg.out_dir = base.out_dir.join(format!("{}-{value}", self.name()));
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub summary: Summary,
}

pub fn sweep_csv(axis: SweepAxis, rows: &[SweepRow]) -> String {
    let mut s = String::from("axis,value,mean,std,n\n");
    for r in rows {
        writeln!(s, "{},{},{},{},{}", axis.name(), r.value, r.summary.mean, r.summary.std, r.summary.n).unwrap();
    }
    s
}

/// Runs every point of the sweep with the base config's seeds. Each point's
/// artifacts go to `<out_dir>/<axis>-<value>/`; the comparison table to
/// `<out_dir>/sweep-<axis>.csv`.
pub fn run_sweep(base: &ExperimentConfig, axis: SweepAxis, values: &[String]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    let points = values.iter().map(|v| axis.apply(base, v)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut failure = None;
    for (value, cfg) in values.iter().zip(&points) {
        let runs = run_seeds(cfg)?;
        let summary = write_artifacts(&cfg.out_dir, cfg, &runs)?;
        failure = failure.or_else(|| failure_error(&runs));
        rows.push(SweepRow { value: value.clone(), summary });
    }
    std::fs::create_dir_all(&base.out_dir).map_err(|e| CliError::io(&base.out_dir, e))?;
    write(base.out_dir.join(format!("sweep-{}.csv", axis.name())), sweep_csv(axis, &rows))?;
    match failure {
        Some(err) => Err(err),
        None => Ok(rows),
    }
}
