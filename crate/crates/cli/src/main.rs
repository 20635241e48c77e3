use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use manidens_cli::commands::{self, Context, DensityArgs};
use manidens_cli::exec::pool;
use manidens_cli::CliResult;

#[derive(Parser)]
#[command(name = "manidens", version, about = "Density estimation on unknown submanifolds")]
struct Cli {
    /// Worker threads (0: one per core). Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn ctx(&self) -> Context {
        Context { config: self.config.clone(), seed: self.seed }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample a point cloud from the configured manifold and density.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Add tubular noise to a cloud with ground truth.
    Noise {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Noise radius; defaults to the schedule's `gamma_factor * eps^2`.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Farthest point sampling.
    Fps {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Separation radius; defaults to `7 eps / 24`.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit local polynomial charts.
    FitCharts {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Center indices (CSV with an `index` column); defaults to FPS.
        #[arg(long)]
        centers: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the volume measure.
    EstimateVolume {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Previously fitted charts; refitted when absent.
        #[arg(long)]
        charts: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the sampling measure.
    EstimateDensity {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Volume estimate to integrate against.
        #[arg(long)]
        volume: Option<PathBuf>,
        /// Kernel to import instead of building one.
        #[arg(long)]
        kernel: Option<PathBuf>,
        /// Write the kernel used.
        #[arg(long)]
        export_kernel: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact transport distance between two measure files.
    Wasserstein {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        p: Option<u32>,
    },
    /// Rate experiment over the configured sample sizes.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(cmd: &Command) -> CliResult<()> {
    match cmd {
        Command::Gen { common, n, out } => commands::gen(&common.ctx(), *n, out),
        Command::Noise { common, input, gamma, out } => commands::noise(&common.ctx(), input, *gamma, out),
        Command::Fps { common, input, radius, out } => commands::fps(&common.ctx(), input, *radius, out),
        Command::FitCharts { common, input, centers, out } => {
            commands::fit_charts_cmd(&common.ctx(), input, centers.as_deref(), out)
        }
        Command::EstimateVolume { common, input, charts, out } => {
            commands::estimate_volume_cmd(&common.ctx(), input, charts.as_deref(), out)
        }
        Command::EstimateDensity { common, input, volume, kernel, export_kernel, out } => commands::estimate_density_cmd(
            &common.ctx(),
            &DensityArgs {
                input,
                volume: volume.as_deref(),
                kernel: kernel.as_deref(),
                export_kernel: export_kernel.as_deref(),
                out,
            },
        ),
        Command::Wasserstein { common, source, target, p } => {
            commands::wasserstein_cmd(&common.ctx(), source, target, *p).map(|_| ())
        }
        Command::Experiment { common, out } => commands::experiment_cmd(&common.ctx(), out).map(|_| ()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match pool(cli.threads).install(|| dispatch(&cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": e.report() });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
