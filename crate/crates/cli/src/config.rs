//! Experiment configuration: defaults, a flat `key = value` file, then flags.

use std::path::{Path, PathBuf};

use hmp_core::denoiser::PriorVariant;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub p: usize,
    pub m: usize,
    /// Extra pilot counts for the NMSE-versus-M sweep; always contains `m`.
    pub m_list: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub algos: Vec<PriorVariant>,
    pub trials: usize,
    pub iters: usize,
    pub seed: u64,
    pub channel_file: Option<PathBuf>,
    pub out: PathBuf,
    pub reset_beliefs: bool,
    pub std_gamma_weight: bool,
    pub exact_digamma: bool,
    pub no_early_stop: bool,
    pub se_only: bool,
    pub p10: f64,
    pub p01: f64,
    pub vl_min: f64,
    pub vl_max: f64,
    pub vs: f64,
    pub se_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 256,
            k: 512,
            p: 32,
            m: 103,
            m_list: Vec::new(),
            snr_db: vec![30.0],
            algos: vec![PriorVariant::TsgmLvd, PriorVariant::Tsgm, PriorVariant::Bg],
            trials: 10,
            iters: 20,
            seed: 1,
            channel_file: None,
            out: PathBuf::from("out"),
            reset_beliefs: false,
            std_gamma_weight: false,
            exact_digamma: false,
            no_early_stop: false,
            se_only: false,
            p10: 0.05,
            p01: 0.2,
            vl_min: 0.1,
            vl_max: 10.0,
            vs: 100.0,
            se_samples: hmp_core::turbo::DEFAULT_MMSE_SAMPLES,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Input(format!("cannot parse `{value}` for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        v => Err(CliError::Input(format!("cannot parse `{v}` for {key}: expected true or false"))),
    }
}

pub fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

pub fn parse_algos(value: &str) -> Result<Vec<PriorVariant>, CliError> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            PriorVariant::from_name(s.trim()).ok_or_else(|| {
                CliError::Input(format!(
                    "unknown algorithm `{}`; expected hmp-tsgm-lvd, hmp-tsgm or hmp-bg",
                    s.trim()
                ))
            })
        })
        .collect()
}

fn fmt_list<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "N" => self.n = parse(key, value)?,
            "K" => self.k = parse(key, value)?,
            "P" => self.p = parse(key, value)?,
            "M" => self.m = parse(key, value)?,
            "m_list" => self.m_list = parse_list(key, value)?,
            "snr" => self.snr_db = parse_list(key, value)?,
            "algos" => self.algos = parse_algos(value)?,
            "trials" => self.trials = parse(key, value)?,
            "iters" => self.iters = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "channel_file" => {
                let v = value.trim();
                self.channel_file = (!v.is_empty()).then(|| PathBuf::from(v));
            }
            "out" => self.out = PathBuf::from(value.trim()),
            "reset_beliefs" => self.reset_beliefs = parse_bool(key, value)?,
            "std_gamma_weight" => self.std_gamma_weight = parse_bool(key, value)?,
            "exact_digamma" => self.exact_digamma = parse_bool(key, value)?,
            "no_early_stop" => self.no_early_stop = parse_bool(key, value)?,
            "se_only" => self.se_only = parse_bool(key, value)?,
            "p10" => self.p10 = parse(key, value)?,
            "p01" => self.p01 = parse(key, value)?,
            "vl_min" => self.vl_min = parse(key, value)?,
            "vl_max" => self.vl_max = parse(key, value)?,
            "vs" => self.vs = parse(key, value)?,
            "se_samples" => self.se_samples = parse(key, value)?,
            // written by the manifest, informational only
            "version" => {}
            _ => return Err(CliError::Input(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Reads a flat `key = value` file; `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Input(format!("{}:{}: expected key = value", path.display(), i + 1))
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn validate(&mut self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Input(msg));
        if self.n < 2 {
            return bad(format!("N must be at least 2, got {}", self.n));
        }
        if self.m == 0 || self.m >= self.n {
            return bad(format!("need 0 < M < N, got M={} N={}", self.m, self.n));
        }
        if self.p == 0 || self.p > self.k {
            return bad(format!("need 1 <= P <= K, got P={} K={}", self.p, self.k));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.iters == 0 {
            return bad("iters must be at least 1".into());
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("snr must be a non-empty list of finite values".into());
        }
        if self.algos.is_empty() {
            return bad("algos must not be empty".into());
        }
        if self.se_samples == 0 {
            return bad("se_samples must be at least 1".into());
        }
        if !self.m_list.contains(&self.m) {
            self.m_list.push(self.m);
        }
        if let Some(&m) = self.m_list.iter().find(|&&m| m == 0 || m >= self.n) {
            return bad(format!("pilot count {m} in m_list must satisfy 0 < M < N"));
        }
        self.m_list.sort_unstable();
        self.m_list.dedup();
        self.algos.sort_by_key(|a| a.name());
        self.algos.dedup();
        self.snr_db.sort_by(f64::total_cmp);
        self.snr_db.dedup();
        Ok(())
    }

    /// The whole configuration in file syntax; feeding it back through
    /// `--config` reproduces the run.
    pub fn to_key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("N", self.n.to_string()),
            ("K", self.k.to_string()),
            ("P", self.p.to_string()),
            ("M", self.m.to_string()),
            ("m_list", fmt_list(&self.m_list)),
            ("snr", fmt_list(&self.snr_db)),
            ("algos", self.algos.iter().map(|a| a.name()).collect::<Vec<_>>().join(",")),
            ("trials", self.trials.to_string()),
            ("iters", self.iters.to_string()),
            ("seed", self.seed.to_string()),
            (
                "channel_file",
                self.channel_file.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            ),
            ("out", self.out.display().to_string()),
            ("reset_beliefs", self.reset_beliefs.to_string()),
            ("std_gamma_weight", self.std_gamma_weight.to_string()),
            ("exact_digamma", self.exact_digamma.to_string()),
            ("no_early_stop", self.no_early_stop.to_string()),
            ("se_only", self.se_only.to_string()),
            ("p10", self.p10.to_string()),
            ("p01", self.p01.to_string()),
            ("vl_min", self.vl_min.to_string()),
            ("vl_max", self.vl_max.to_string()),
            ("vs", self.vs.to_string()),
            ("se_samples", self.se_samples.to_string()),
        ]
    }
}
