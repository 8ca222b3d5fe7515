use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gps_cli::commands::{self, ReconstructSource};
use gps_cli::experiment::{self, SweepAxis};
use gps_cli::{CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "gps", version, about = "Grid-based patch sampling replay benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Run only this seed instead of the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent seeds (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the online protocol for every configured seed.
    Run(RunArgs),
    /// Repeat a run over values of one axis (f, k or mode).
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Write the GPS surrogate of a square PPM image.
    Compress {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        f: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one same-class mosaic, from a buffer snapshot or from f^2 PPM images.
    Reconstruct {
        #[arg(long, conflicts_with = "input")]
        snapshot: Option<PathBuf>,
        #[arg(long, requires = "snapshot")]
        class: Option<u32>,
        #[arg(long)]
        input: Vec<PathBuf>,
        #[arg(long, default_value_t = 2)]
        f: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Describe a replay buffer snapshot.
    InspectBuffer { snapshot: PathBuf },
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn with_threads<T>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T, CliError>
where
    T: Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(pool.install(job))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = load_config(&args)?;
            let (runs, summary) = with_threads(args.threads, || experiment::run_experiment(&cfg))??;
            for r in &runs {
                println!("seed {}: A_N = {:.4}", r.seed, r.end_accuracy.unwrap_or(f64::NAN));
            }
            println!(
                "A_N over {} seeds: {:.4} ± {:.4}  ({})",
                summary.n,
                summary.mean,
                summary.std,
                cfg.out_dir.display()
            );
        }
        Command::Sweep { run, axis, values } => {
            let cfg = load_config(&run)?;
            let rows = with_threads(run.threads, || experiment::run_sweep(&cfg, axis, &values))??;
            print!("{}", experiment::sweep_csv(axis, &rows));
        }
        Command::Compress { input, f, seed, out } => {
            println!("{}", commands::compress(&input, f, seed, &out)?);
        }
        Command::Reconstruct { snapshot, class, input, f, seed, out } => {
            let source = match &snapshot {
                Some(path) => ReconstructSource::Snapshot { path, class },
                None => ReconstructSource::Images { paths: &input, factor: f },
            };
            println!("{}", commands::reconstruct(source, seed, &out)?);
        }
        Command::InspectBuffer { snapshot } => {
            print!("{}", commands::inspect(&commands::read_snapshot(&snapshot)?));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
