//! `pra`: reproducible principal-regression runs over return panels.
//!
//! Every subcommand writes its artifacts plus a `manifest.json` into the
//! output directory; the manifest and the input files fully determine
//! every output byte. Exit codes: 0 on success, 1 on input errors
//! (unusable flags, malformed files, undersized samples), 2 on numerical
//! failures.

mod commands;
mod factor;
mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pra_core::panel::{DEFAULT_CLIP, DEFAULT_VOL_WINDOW};
use pra_core::{CoreError, Real, Result};

use commands::DEFAULT_SEED;
use io::RunWriter;

#[derive(Debug, Parser)]
#[command(name = "pra", version, about = "Principal regression analysis of return panels")]
struct Cli {
    /// Output directory for artifacts and the run manifest.
    #[arg(long, global = true, default_value = "pra-out")]
    out: PathBuf,
    /// Master seed; all randomness derives from it through named
    /// substreams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap. Results are independent of the value.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn a long-format price CSV into a standardized returns panel.
    Ingest {
        /// Long-format CSV with date,asset_id,price rows.
        #[arg(long)]
        prices: PathBuf,
        /// Asset table CSV with asset_id,sector,market rows.
        #[arg(long)]
        assets: PathBuf,
        /// Trailing window for the volatility normalizer, in days.
        #[arg(long, default_value_t = DEFAULT_VOL_WINDOW)]
        vol_window: usize,
        /// Clip for normalized returns, in units of trailing std.
        #[arg(long, default_value_t = DEFAULT_CLIP)]
        clip: Real,
    },
    /// Unconditional correlation matrix, spectrum, and sector averages.
    Describe {
        /// Panel CSV produced by ingest or synth.
        #[arg(long)]
        panel: PathBuf,
        /// Panel sidecar JSON; defaults to panel_meta.json next to the
        /// panel.
        #[arg(long)]
        meta: Option<PathBuf>,
    },
    /// Fit the conditional model against one factor and report spectra.
    Pra {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        meta: Option<PathBuf>,
        /// market | sector:<F> | ema:<beta> | eigenfactor:<beta>.
        #[arg(long)]
        factor: String,
        /// Indicator lag in days.
        #[arg(long, default_value_t = 1)]
        tau: usize,
        /// Trailing eigenvector window for eigenfactor, in days.
        #[arg(long)]
        k_window: Option<usize>,
        /// Null trials per ensemble; 0 skips significance testing.
        #[arg(long, default_value_t = 0)]
        n_trials: usize,
        /// Indicator bins for the conditional curves; 0 skips them.
        #[arg(long, default_value_t = 0)]
        n_bins: usize,
    },
    /// Joint fit against the per-sector indices.
    PraSectors {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        meta: Option<PathBuf>,
        /// Smoothing decay for the sector indices; inf fits raw indices.
        #[arg(long, default_value_t = Real::INFINITY)]
        beta: Real,
        #[arg(long, default_value_t = 1)]
        tau: usize,
    },
    /// Fit across a grid of smoothing timescales.
    Sweep {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        meta: Option<PathBuf>,
        /// JSON settings file; explicit flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// market_ema | eigenfactor.
        #[arg(long)]
        base: Option<String>,
        /// Comma-separated timescales in days, e.g. 1,2,5,10.
        #[arg(long)]
        grid_days: Option<String>,
        #[arg(long)]
        tau: Option<usize>,
        #[arg(long)]
        n_trials: Option<usize>,
        #[arg(long)]
        k_window: Option<usize>,
    },
    /// Null ensembles and p-values for one factor fit.
    Null {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        meta: Option<PathBuf>,
        /// market | sector:<F> | ema:<beta> | eigenfactor:<beta>.
        #[arg(long)]
        factor: String,
        #[arg(long, default_value_t = 1)]
        tau: usize,
        #[arg(long)]
        k_window: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        n_trials: usize,
    },
    /// Generate a synthetic panel with known ground truth.
    Synth {
        /// JSON description of sectors, correlations, and the planted
        /// effect.
        #[arg(long)]
        spec: PathBuf,
        /// Number of panel dates.
        #[arg(long)]
        t_len: usize,
    },
    /// End-to-end recovery check: generate, fit, compare to ground truth.
    Verify {
        /// JSON panel description; defaults to a built-in benchmark.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 50_000)]
        t_len: usize,
        /// Null trials for the recovery p-value; 0 skips it.
        #[arg(long, default_value_t = 0)]
        n_trials: usize,
        #[arg(long, default_value_t = 1)]
        tau: usize,
    },
}

fn meta_or_default(panel: &Path, meta: &Option<PathBuf>) -> PathBuf {
    meta.clone().unwrap_or_else(|| io::default_meta_path(panel))
}

fn dispatch(cli: &Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    match &cli.command {
        Command::Ingest {
            prices,
            assets,
            vol_window,
            clip,
        } => {
            let mut w = RunWriter::new(&cli.out, "ingest")?;
            commands::ingest(&mut w, prices, assets, *vol_window, *clip)?;
            w.finish()
        }
        Command::Describe { panel, meta } => {
            let mut w = RunWriter::new(&cli.out, "describe")?;
            commands::describe(&mut w, panel, &meta_or_default(panel, meta))?;
            w.finish()
        }
        Command::Pra {
            panel,
            meta,
            factor,
            tau,
            k_window,
            n_trials,
            n_bins,
        } => {
            let mut w = RunWriter::new(&cli.out, "pra")?;
            let args = commands::PraArgs {
                factor: factor.clone(),
                tau: *tau,
                k_window: *k_window,
                n_trials: *n_trials,
                n_bins: *n_bins,
                seed,
            };
            commands::pra_fit(&mut w, panel, &meta_or_default(panel, meta), &args)?;
            w.finish()
        }
        Command::PraSectors {
            panel,
            meta,
            beta,
            tau,
        } => {
            let mut w = RunWriter::new(&cli.out, "pra-sectors")?;
            commands::pra_sectors(&mut w, panel, &meta_or_default(panel, meta), *beta, *tau)?;
            w.finish()
        }
        Command::Sweep {
            panel,
            meta,
            config,
            base,
            grid_days,
            tau,
            n_trials,
            k_window,
        } => {
            let mut w = RunWriter::new(&cli.out, "sweep")?;
            let args = commands::SweepArgs {
                base: base.clone(),
                grid_days: grid_days.clone(),
                tau: *tau,
                n_trials: *n_trials,
                k_window: *k_window,
                seed,
            };
            commands::sweep(&mut w, panel, &meta_or_default(panel, meta), config.as_deref(), &args)?;
            w.finish()
        }
        Command::Null {
            panel,
            meta,
            factor,
            tau,
            k_window,
            n_trials,
        } => {
            let mut w = RunWriter::new(&cli.out, "null")?;
            commands::null_cmd(
                &mut w,
                panel,
                &meta_or_default(panel, meta),
                factor,
                *tau,
                *k_window,
                *n_trials,
                seed,
            )?;
            w.finish()
        }
        Command::Synth { spec, t_len } => {
            let mut w = RunWriter::new(&cli.out, "synth")?;
            commands::synth(&mut w, spec, *t_len, cli.seed)?;
            w.finish()
        }
        Command::Verify {
            spec,
            t_len,
            n_trials,
            tau,
        } => {
            let mut w = RunWriter::new(&cli.out, "verify")?;
            commands::verify(&mut w, spec.as_deref(), *t_len, *n_trials, *tau, cli.seed)?;
            w.finish()
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    match cli.threads {
        None => dispatch(cli),
        Some(0) => Err(CoreError::BadArgument(
            "--threads must be at least 1".to_string(),
        )),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CoreError::BadArgument(format!("thread pool: {e}")))?;
            pool.install(|| dispatch(cli))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let failure = e.use_stderr();
            let _ = e.print();
            return if failure { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
