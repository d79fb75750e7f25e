//! Experiment runner for the hybrid message passing channel estimator.

mod config;
mod csv;
mod error;
mod experiment;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{parse_algos, ExperimentConfig};
use error::CliError;

/// Simulates HMP channel estimation and writes NMSE and SE curves as CSV.
#[derive(Debug, Parser)]
#[command(name = "hmp-sim", version = experiment::VERSION)]
struct Args {
    /// Flat `key = value` configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base-station antennas.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Subcarriers.
    #[arg(long = "K")]
    k: Option<usize>,
    /// Pilot subcarriers.
    #[arg(long = "P")]
    p: Option<usize>,
    /// Pilots per subcarrier.
    #[arg(long = "M")]
    m: Option<usize>,
    /// Further pilot counts for nmse_vs_m.csv, comma separated.
    #[arg(long = "m-list", value_delimiter = ',')]
    m_list: Option<Vec<usize>>,
    /// SNR values in dB, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr: Option<Vec<f64>>,
    /// Algorithms: hmp-tsgm-lvd, hmp-tsgm, hmp-bg.
    #[arg(long)]
    algos: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Channel file to use instead of synthetic channels.
    #[arg(long = "channel-file")]
    channel_file: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restart the precision and transition beliefs every iteration.
    #[arg(long = "reset-beliefs")]
    reset_beliefs: bool,
    /// Use exp⟨ln v⟩ of a (shape, rate) Gamma as the mixture weight.
    #[arg(long = "std-gamma-weight")]
    std_gamma_weight: bool,
    /// Use the exact digamma function instead of ln x − 1/(2x).
    #[arg(long = "exact-digamma")]
    exact_digamma: bool,
    /// Always run the full iteration budget.
    #[arg(long = "no-early-stop")]
    no_early_stop: bool,
    /// Only run the state evolution.
    #[arg(long = "se-only")]
    se_only: bool,
}

fn build_config(args: Args) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::default();
    // an M given on the command line replaces the sweep unless one is also given
    let single_m = args.m.is_some() && args.m_list.is_none();
    if let Some(path) = &args.config {
        cfg.apply_file(path)?;
    }
    macro_rules! take {
        ($($field:ident),*) => {$(
            if let Some(v) = args.$field {
                cfg.$field = v;
            }
        )*};
    }
    take!(n, k, p, m, m_list, trials, iters, seed, out);
    if let Some(v) = args.snr {
        cfg.snr_db = v;
    }
    if let Some(a) = &args.algos {
        cfg.algos = parse_algos(a)?;
    }
    if args.channel_file.is_some() {
        cfg.channel_file = args.channel_file;
    }
    cfg.reset_beliefs |= args.reset_beliefs;
    cfg.std_gamma_weight |= args.std_gamma_weight;
    cfg.exact_digamma |= args.exact_digamma;
    cfg.no_early_stop |= args.no_early_stop;
    cfg.se_only |= args.se_only;
    if single_m {
        cfg.m_list = vec![cfg.m];
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = build_config(args).and_then(|cfg| experiment::run_experiment(&cfg).map(|a| (cfg, a)));
    match result {
        Ok((cfg, art)) => {
            for (name, _) in &art.files {
                println!("wrote {}", cfg.out.join(name).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("hmp-sim: {e}");
            e.exit_code()
        }
    }
}
