#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

/// Invalid input: bad flags, config or parameter values. Exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "smolu", version, about = "Equilibria, rates and simulations of alignment dynamics on the sphere")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Coefficient model: dipolar, vicsek-vectorial or sigma-family
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Constant relaxation time of the dipolar model
    #[arg(long, global = true)]
    pub tau0: Option<f64>,
    /// Exponent of the sigma-family model, in (0, 1]
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Sphere dimension n (the circle is n = 2)
    #[arg(long, global = true)]
    pub dim: Option<u32>,
    /// Output file; standard output when absent
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// TOML configuration file; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roots of the compatibility equation at one density, with stability
    #[command(allow_negative_numbers = true)]
    Equilibria {
        #[arg(long)]
        rho: Option<f64>,
        /// Upper end of the κ search interval
        #[arg(long)]
        kappa_max: Option<f64>,
    },
    /// Branch of equilibria parameterized by the order parameter c
    #[command(allow_negative_numbers = true)]
    PhaseDiagram(GridArgs),
    /// Free energy of the von Mises branch relative to the uniform state
    #[command(allow_negative_numbers = true)]
    Energy(GridArgs),
    /// Convergence rates towards the uniform and von Mises equilibria
    #[command(allow_negative_numbers = true)]
    Rates {
        #[arg(long)]
        rho_min: Option<f64>,
        #[arg(long)]
        rho_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Weighted Poincaré constants Λ_κ
    #[command(allow_negative_numbers = true)]
    Poincare {
        /// Explicit κ values (comma separated); overrides the uniform grid
        #[arg(long, value_delimiter = ',')]
        kappa: Option<Vec<f64>>,
        #[arg(long)]
        kappa_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        mesh: Option<usize>,
        /// Report raw values without the mesh-doubling check
        #[arg(long)]
        no_mesh_check: bool,
    },
    /// Time integration on the circle
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        tend: Option<f64>,
        /// uniform-perturbed:AMP[:MODE], vonmises:KAPPA[:ANGLE] or custom:FILE
        #[arg(long)]
        init: Option<String>,
        /// Steps between recorded diagnostics
        #[arg(long)]
        cadence: Option<usize>,
    },
    /// Slow density sweep through the bistable window
    #[command(allow_negative_numbers = true)]
    Hysteresis {
        /// Half period T of the density schedule
        #[arg(long = "T")]
        period: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        rho_mean: Option<f64>,
        #[arg(long)]
        rho_amp: Option<f64>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        cycles: Option<u32>,
        #[arg(long)]
        sample_every: Option<usize>,
        /// Order-parameter level used to locate the jumps
        #[arg(long)]
        threshold: Option<f64>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub c_min: Option<f64>,
    #[arg(long)]
    pub c_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<smoluchowski::Error>() {
            return match e {
                smoluchowski::Error::Domain { .. } | smoluchowski::Error::ModelInvalid(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli.common, &cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
