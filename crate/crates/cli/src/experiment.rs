//! Runs the configured sweep and writes the CSV artifacts.

use std::path::Path;

use hmp_core::channel::{load_channel_file, ChannelRealization, ChannelSpec, Scenario};
use hmp_core::denoiser::{PriorConfig, PriorVariant};
use hmp_core::dist::DigammaMode;
use hmp_core::rng::derive_seed;
use hmp_core::turbo::{run_se, run_turbo, to_db, ScalarPrior, SeConfig, SeTrace, TurboConfig};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::csv::{num, Table};
use crate::error::CliError;

pub const VERSION: &str = env!("HMP_SIM_VERSION");

const SE_MAX_STEPS: usize = 100;
const SE_TOL: f64 = 1e-8;

/// NMSE trace of one (algorithm, SNR, pilot count, trial) run, padded to
/// the iteration budget with the last value after an early stop.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub algo: PriorVariant,
    pub snr_db: f64,
    pub m: usize,
    pub trial: usize,
    pub nmse: Vec<f64>,
}

/// CSV bodies keyed by file name.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub files: Vec<(&'static str, String)>,
}

fn scenario(cfg: &ExperimentConfig, m: usize) -> Scenario {
    Scenario {
        n: cfg.n,
        m,
        p: cfg.p,
        p10: cfg.p10,
        p01: cfg.p01,
        spec: ChannelSpec {
            vl_spread: (cfg.vl_min, cfg.vl_max),
            vs: cfg.vs,
        },
    }
}

fn prior_config(cfg: &ExperimentConfig, algo: PriorVariant) -> PriorConfig {
    let mut p = PriorConfig::with_variant(algo);
    p.max_iters = cfg.iters;
    p.reset_beliefs = cfg.reset_beliefs;
    p.std_gamma_weight = cfg.std_gamma_weight;
    if cfg.exact_digamma {
        p.digamma = DigammaMode::Exact;
    }
    p
}

fn load_channel(cfg: &ExperimentConfig) -> Result<Option<ChannelRealization>, CliError> {
    let Some(path) = &cfg.channel_file else {
        return Ok(None);
    };
    if !path.exists() {
        return Err(CliError::Input(format!(
            "cannot open channel file {}: no such file",
            path.display()
        )));
    }
    let ch = load_channel_file(path)?;
    if ch.n != cfg.n || ch.p != cfg.p {
        return Err(CliError::Input(format!(
            "channel file {} holds N={} P={}, but the run is configured for N={} P={}",
            path.display(),
            ch.n,
            ch.p,
            cfg.n,
            cfg.p
        )));
    }
    Ok(Some(ch))
}

pub fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<TrialResult>, CliError> {
    let external = load_channel(cfg)?;
    let mut items = Vec::new();
    for &m in &cfg.m_list {
        for &algo in &cfg.algos {
            for &snr in &cfg.snr_db {
                for trial in 0..cfg.trials {
                    items.push((m, algo, snr, trial));
                }
            }
        }
    }
    items
        .into_par_iter()
        .map(|(m, algo, snr, trial)| {
            let sc = scenario(cfg, m);
            let seed = derive_seed(cfg.seed, &[trial as u64]);
            let tr = match &external {
                Some(ch) => sc.observe(ch.clone(), seed, snr)?,
                None => sc.trial(seed, snr)?,
            };
            let mut tc = TurboConfig::new(prior_config(cfg, algo), sc.mean_power());
            if cfg.no_early_stop {
                tc.early_stop = None;
            }
            let out = run_turbo(&tr.measurements, &tr.pilots, Some(&tr.channel), &tc).map_err(|e| {
                CliError::Runtime(format!("{} at {snr} dB, M={m}, trial {trial}: {e}", algo.name()))
            })?;
            let mut nmse: Vec<f64> = out.trace.iterations.iter().map(|r| r.nmse.unwrap_or(f64::NAN)).collect();
            let last = *nmse.last().expect("at least one iteration");
            nmse.resize(cfg.iters, last);
            Ok(TrialResult {
                algo,
                snr_db: snr,
                m,
                trial,
                nmse,
            })
        })
        .collect()
}

pub fn run_state_evolution(cfg: &ExperimentConfig) -> Result<Vec<(f64, SeTrace)>, CliError> {
    let sc = scenario(cfg, cfg.m);
    let prior = ScalarPrior::from_channel(&sc.spec, sc.activation())?;
    let power = sc.mean_power();
    cfg.snr_db
        .par_iter()
        .map(|&snr| {
            let se = SeConfig {
                n: cfg.n,
                m: cfg.m,
                sigma2: power / 10f64.powf(snr / 10.0),
                v0: power,
                max_steps: SE_MAX_STEPS,
                tol: SE_TOL,
                num_samples: cfg.se_samples,
                seed: derive_seed(cfg.seed, &[u64::MAX]),
                cap: hmp_core::dist::DEFAULT_EXTRINSIC_CAP,
            };
            let trace = run_se(&prior, &se).map_err(|e| CliError::Runtime(format!("SE at {snr} dB: {e}")))?;
            Ok((snr, trace))
        })
        .collect()
}

fn mean_db(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, k) = xs.fold((0.0, 0usize), |(s, k), x| (s + x, k + 1));
    to_db(s / k as f64)
}

pub fn tabulate(cfg: &ExperimentConfig, results: &[TrialResult], se: &[(f64, SeTrace)]) -> Artifacts {
    let mut files = Vec::new();
    if !cfg.se_only {
        let mut iter_t = Table::new(&["algo", "snr_db", "trial", "iter", "nmse_db"]);
        let mut snr_t = Table::new(&["algo", "snr_db", "mean_nmse_db"]);
        let mut m_t = Table::new(&["algo", "snr_db", "m", "mean_nmse_db"]);
        for &algo in &cfg.algos {
            for &snr in &cfg.snr_db {
                for &m in &cfg.m_list {
                    let block: Vec<&TrialResult> = results
                        .iter()
                        .filter(|r| r.algo == algo && r.snr_db == snr && r.m == m)
                        .collect();
                    let final_db = mean_db(block.iter().map(|r| *r.nmse.last().expect("iterations")));
                    m_t.row(&[algo.name().into(), num(snr), m.to_string(), num(final_db)]);
                    if m != cfg.m {
                        continue;
                    }
                    snr_t.row(&[algo.name().into(), num(snr), num(final_db)]);
                    for r in &block {
                        for (it, x) in r.nmse.iter().enumerate() {
                            iter_t.row(&[
                                algo.name().into(),
                                num(snr),
                                r.trial.to_string(),
                                (it + 1).to_string(),
                                num(to_db(*x)),
                            ]);
                        }
                    }
                }
            }
        }
        files.push(("nmse_vs_iter.csv", iter_t.into_string()));
        files.push(("nmse_vs_snr.csv", snr_t.into_string()));
        files.push(("nmse_vs_m.csv", m_t.into_string()));
    }
    let mut se_t = Table::new(&["snr_db", "iter", "v", "eta", "predicted_nmse_db"]);
    for (snr, trace) in se {
        for (it, row) in trace.rows.iter().enumerate() {
            se_t.row(&[
                num(*snr),
                (it + 1).to_string(),
                num(row.v),
                num(row.eta),
                num(to_db(row.predicted_nmse)),
            ]);
        }
    }
    files.push(("se_trace.csv", se_t.into_string()));
    Artifacts { files }
}

pub fn manifest(cfg: &ExperimentConfig, se: &[(f64, SeTrace)]) -> String {
    let mut text = format!("version = {VERSION}\n");
    for (k, v) in cfg.to_key_values() {
        text += &format!("{k} = {v}\n");
    }
    for (snr, trace) in se {
        text += &format!(
            "# se {snr} dB: {} steps, {}\n",
            trace.rows.len(),
            if trace.converged { "converged" } else { "step limit" }
        );
    }
    text
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// Runs everything and writes the artifacts into `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Input(format!("cannot create output directory {}: {e}", cfg.out.display())))?;
    let results = if cfg.se_only { Vec::new() } else { run_trials(cfg)? };
    let se = run_state_evolution(cfg)?;
    let art = tabulate(cfg, &results, &se);
    for (name, body) in &art.files {
        write(&cfg.out, name, body)?;
    }
    write(&cfg.out, "manifest.txt", &manifest(cfg, &se))?;
    Ok(art)
}
