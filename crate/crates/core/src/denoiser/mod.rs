//! Module B: the hybrid message passing denoiser for the Markov-chain
//! two-state Gaussian mixture prior with per-element large variances
//! (TSGM-LVD), plus the shared-variance TSGM and Bernoulli-Gaussian variants.
//!
//! One pass consumes the extrinsic Gaussians `CN(h_pri, v_pri)` from module A
//! and runs five message groups in order:
//!
//! 1. right: per-element activation likelihoods `π→`,
//! 2. downward and 3. upward sweeps over the support chain,
//! 4. pair beliefs and the Beta updates of the transition probabilities
//!    (2–4 are then repeated once with the refreshed Beta beliefs),
//! 5. left: `π←`, the joint `(h, s)` beliefs, the Gamma precision updates and
//!    the posterior mean / variance.

mod config;
mod state;

pub use config::{PriorConfig, PriorVariant, UpwardInit};
pub use state::{bg_variant_pi, EstimatorBState, ModuleBOutput, PairBelief};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Module B with persistent beliefs across turbo iterations.
#[derive(Debug, Clone)]
pub struct EstimatorB {
    pub config: PriorConfig,
    pub state: EstimatorBState,
}

impl EstimatorB {
    pub fn new(n: usize, p: usize, config: PriorConfig) -> Result<Self> {
        config.validate()?;
        if n == 0 || p == 0 {
            return Err(Error::Config(format!("module B needs N, P > 0, got N={n}, P={p}")));
        }
        Ok(Self {
            state: EstimatorBState::new(n, p, &config),
            config,
        })
    }

    /// One full pass of the algorithm (parts 1 through 5).
    pub fn run(&mut self, h_pri: &[Complex64], v_pri: &[f64]) -> Result<ModuleBOutput> {
        let st = &mut self.state;
        let cfg = &self.config;
        st.check_inputs(h_pri, v_pri)?;
        if cfg.reset_beliefs {
            st.reset_beliefs(cfg);
        }
        st.part1_pi_right(h_pri, v_pri, cfg);
        for _ in 0..2 {
            st.part2_downward(cfg);
            st.part3_upward(cfg);
            st.part4_update_transitions(cfg);
        }
        st.part5_pi_left();
        st.part5_update_precisions(h_pri, v_pri, cfg);
        Ok(st.posterior_output(h_pri, v_pri, cfg))
    }
}

/// Runs one pass from freshly initialised beliefs.
pub fn run_module_b(
    h_pri: &[Complex64],
    v_pri: &[f64],
    n: usize,
    config: &PriorConfig,
) -> Result<(ModuleBOutput, EstimatorBState)> {
    if n == 0 || h_pri.len() % n != 0 {
        return Err(Error::Dimension(format!(
            "h_pri length {} is not a multiple of N={n}",
            h_pri.len()
        )));
    }
    let mut est = EstimatorB::new(n, h_pri.len() / n, config.clone())?;
    let out = est.run(h_pri, v_pri)?;
    Ok((out, est.state))
}
