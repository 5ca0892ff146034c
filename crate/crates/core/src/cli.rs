//! The `rslp` command line.
//!
//! ```text
//! rslp estimate --config est.toml --out-dir out/ [--k 50 --n-draws 1000 --bands bootstrap]
//! rslp simulate --config sim.toml --out-dir out/
//! rslp experiment --config mc.toml --out-dir out/
//! rslp sweep --config mc.toml --grid 0,10,20,30 --out-dir out/
//! rslp factor-structure --panel panel.csv --max-components 10 --out-dir out/
//! ```
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::data::LoadOptions;
use crate::lp::Weighting;
use config::{ConfigError, Overrides};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rslp", version, about = "Random subspace local projections")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RslpFlags {
    /// Subspace dimension.
    #[arg(long)]
    pub k: Option<usize>,
    /// Number of random subsets.
    #[arg(long)]
    pub n_draws: Option<usize>,
    /// none, bootstrap or buckland.
    #[arg(long, value_parser = ["none", "bootstrap", "buckland"])]
    pub bands: Option<String>,
    /// equal or bic.
    #[arg(long)]
    pub weighting: Option<Weighting>,
    /// Comma-separated grid; k is chosen by first-stage BIC.
    #[arg(long, value_delimiter = ',')]
    pub select_k: Option<Vec<usize>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate an impulse response from a panel CSV.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        rslp: RslpFlags,
    },
    /// Simulate a panel and its true responses.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo comparison of estimators.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        rslp: RslpFlags,
    },
    /// Relative RMSE of RSLP across subspace dimensions.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        rslp: RslpFlags,
        /// Comma-separated subspace dimensions.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<usize>>,
    },
    /// Cumulative variance share of the leading principal components.
    FactorStructure {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        panel: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        max_components: usize,
        /// The first column holds data, not dates.
        #[arg(long)]
        no_date_column: bool,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Estimate { common, .. }
            | Command::Simulate { common }
            | Command::Experiment { common, .. }
            | Command::Sweep { common, .. }
            | Command::FactorStructure { common, .. } => common,
        }
    }
}

fn overrides(common: &Common, rslp: Option<&RslpFlags>, grid: Option<&Vec<usize>>) -> Overrides {
    Overrides {
        seed: common.seed,
        k: rslp.and_then(|r| r.k),
        n_draws: rslp.and_then(|r| r.n_draws),
        bands: rslp.and_then(|r| r.bands.clone()),
        weighting: rslp.and_then(|r| r.weighting),
        select_k: rslp.and_then(|r| r.select_k.clone()),
        grid: grid.cloned(),
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn need_config(c: &Common) -> Result<&PathBuf, Failure> {
    c.config
        .as_ref()
        .ok_or_else(|| Failure::Config("configuration error in `--config`: this command needs a config file".into()))
}

fn dispatch(cmd: &Command) -> Result<(), Failure> {
    match cmd {
        Command::Estimate { common, rslp } => {
            let loaded = config::load_estimate(need_config(common)?, &overrides(common, Some(rslp), None))?;
            commands::estimate(&loaded, &common.out_dir)?;
        }
        Command::Simulate { common } => {
            let loaded = config::load_simulate(common.config.as_deref(), &overrides(common, None, None))?;
            commands::simulate(&loaded, &common.out_dir)?;
        }
        Command::Experiment { common, rslp } => {
            let loaded = config::load_experiment(need_config(common)?, &overrides(common, Some(rslp), None))?;
            commands::experiment(&loaded, &common.out_dir)?;
        }
        Command::Sweep { common, rslp, grid } => {
            let loaded = config::load_experiment(need_config(common)?, &overrides(common, Some(rslp), grid.as_ref()))?;
            commands::sweep(&loaded, &common.out_dir)?;
        }
        Command::FactorStructure {
            common,
            panel,
            max_components,
            no_date_column,
        } => {
            let panel = panel
                .as_ref()
                .ok_or_else(|| Failure::Config("configuration error in `--panel`: a panel CSV is required".into()))?;
            if *max_components == 0 {
                return Err(Failure::Config(
                    "configuration error in `--max-components`: must be positive".into(),
                ));
            }
            let options = LoadOptions {
                date_column: !no_date_column,
                tcode_row: None,
            };
            commands::factor_structure(panel, &options, *max_components, &common.out_dir)?;
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.command.common().threads {
        if n == 0 {
            eprintln!("configuration error in `--threads`: must be positive");
            return EXIT_CONFIG;
        }
        // A second call in the same process fails harmlessly.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            EXIT_CONFIG
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            EXIT_RUNTIME
        }
    }
}
