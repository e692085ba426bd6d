//! `hardneg`: solve single instances, check them against the grid oracle,
//! draw the KKT candidates, export distance tables and run the synthetic
//! training experiment.

mod commands;
mod error;
mod instance;
mod svg;

use clap::{Parser, Subcommand};
use error::CliError;
use hardneg_core::batch_engine::Variant;
use hardneg_core::losses::LossKind;
use hardneg_core::oracle::DEFAULT_RESOLUTION;
use hardneg_core::trainer::{SyntheticSpec, DEFAULT_CONCENTRATION};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "hardneg", version, about = "Optimal hard negatives between geodesic arcs and segments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form optimum for one instance; prints the solution JSON.
    Solve {
        instance: PathBuf,
        /// Overrides the instance's `variant` field.
        #[arg(long)]
        variant: Option<Variant>,
    },
    /// Grid-search minimum for one instance, or a random sweep against the solver.
    Oracle {
        /// Instance file; omit with `--sweep`.
        #[arg(required_unless_present = "sweep")]
        instance: Option<PathBuf>,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: f64,
        /// Number of random instances to compare against the solver.
        #[arg(long, conflicts_with = "instance")]
        sweep: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Paired training runs from a JSON config; writes metrics, histories and a summary.
    Experiment {
        config: PathBuf,
        #[arg(long, default_value = "experiment_out")]
        out_dir: PathBuf,
    },
    /// SVG of the KKT candidates over the parameter box.
    Cases {
        instance: PathBuf,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Optimal-distance table of a labeled batch as CSV.
    Table {
        /// `.json` batch or headerless CSV rows `label, c1, c2, ...`.
        batch: PathBuf,
        #[arg(long, default_value = "arc")]
        variant: Variant,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Evaluates one loss on a labeled batch.
    Loss {
        batch: PathBuf,
        #[arg(long, default_value = "triplet")]
        loss: LossKind,
        #[arg(long, default_value = "arc")]
        variant: Variant,
        /// Loss configuration JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        margin: Option<f64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Synthetic clustered batch as CSV.
    Generate {
        #[arg(long, default_value_t = 8)]
        classes: usize,
        #[arg(long, default_value_t = 16)]
        per_class: usize,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = DEFAULT_CONCENTRATION)]
        concentration: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn dispatch(command: Command) -> Result<String, CliError> {
    match command {
        Command::Solve { instance, variant } => commands::solve(&instance, variant),
        Command::Oracle {
            instance,
            variant,
            resolution,
            sweep,
            seed,
            out_dir,
        } => match (sweep, instance) {
            (Some(n), _) => commands::sweep(n, variant.unwrap_or_default(), resolution, seed, out_dir.as_deref()),
            (None, Some(path)) => commands::oracle(&path, variant, resolution),
            (None, None) => Err(CliError::InvalidInput("an instance or --sweep is required".into())),
        },
        Command::Experiment { config, out_dir } => commands::experiment(&config, &out_dir),
        Command::Cases {
            instance,
            variant,
            out_dir,
        } => commands::cases(&instance, variant, out_dir.as_deref()),
        Command::Table { batch, variant, out_dir } => commands::table(&batch, variant, out_dir.as_deref()),
        Command::Loss {
            batch,
            loss,
            variant,
            config,
            margin,
            out_dir,
        } => commands::loss(&batch, loss, variant, config.as_deref(), margin, out_dir.as_deref()),
        Command::Generate {
            classes,
            per_class,
            dim,
            concentration,
            seed,
            out_dir,
        } => {
            let spec = SyntheticSpec {
                num_classes: classes,
                samples_per_class: per_class,
                dimension: dim,
                concentration,
                seed,
            };
            commands::generate(&spec, out_dir.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let report = e.report();
            let json = serde_json::to_string(&report).unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", report.error));
            eprintln!("{json}");
            ExitCode::from(report.exit_code as u8)
        }
    }
}
