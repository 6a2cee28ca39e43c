//! Multi-agent actor-critic training kit with spectrally normalized critics.
//!
//! The crate bundles everything needed to reproduce sparse-reward cooperative
//! control experiments on a single workstation core:
//!
//! * [`tensor`] and [`nn`]: a small hand-rolled `f64` neural-network stack
//!   (dense layers, a GRU cell, masked categorical heads, Adam, gradient
//!   clipping, finite-difference checking).
//! * [`spectral`]: power-iteration spectral normalization with persistent
//!   singular-vector state and Lipschitz bound helpers.
//! * [`envs`]: two desk-scale cooperative grid environments, a shelf-delivery
//!   warehouse and a fixed-script skirmish, with action masks and a privileged
//!   global state for centralized critics.
//! * [`mappo`]: clipped multi-agent PPO with a shared recurrent actor and a
//!   centralized critic that can spectrally normalize any subset of its layers.
//! * [`analysis`]: executable checks of how spectral normalization rescales
//!   gradients in bias-free ReLU networks.

pub mod analysis;
pub mod envs;
pub mod mappo;
pub mod nn;
pub mod spectral;
pub mod tensor;

use thiserror::Error;

/// Crate-wide error type. Variants map onto the process exit codes used by
/// the experiment harness: configuration problems, runtime/numeric failures,
/// and analysis-law violations are kept distinct.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("environment invariant violated: {0}")]
    EnvInvariant(String),

    #[error("analysis law violated: {0}")]
    AnalysisViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
