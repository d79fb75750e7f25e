//! Hybrid message passing (HMP) channel estimation for downlink FDD massive
//! MIMO-OFDM.
//!
//! The crate is organised bottom-up:
//!
//! - [`dist`]: scalar Gaussian / Gamma / Beta message algebra.
//! - [`engine`]: a small edge-typed factor-graph engine (BP and MF edges on the
//!   same factor) used to validate the hybrid rule.
//! - [`channel`]: synthetic clustered-sparse angle-frequency channels, PDFT-RP
//!   pilots, AWGN measurements and the channel file format.
//! - [`lmmse`]: module A of the turbo loop (matrix-free LMMSE).
//! - [`denoiser`]: module B, the Markov-chain TSGM-LVD denoiser and its TSGM
//!   and Bernoulli-Gaussian variants.
//! - [`turbo`]: the turbo loop, NMSE and the state-evolution predictor.

pub mod channel;
pub mod denoiser;
pub mod dist;
pub mod engine;
pub mod error;
pub mod lmmse;
pub mod rng;
pub mod turbo;

pub use error::{Error, Result};
pub use num_complex::Complex64;
