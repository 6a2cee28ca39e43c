//! Clipped multi-agent PPO with centralized value estimation.
//!
//! A single policy network is shared by every agent and trained on its own
//! observations (recurrent, or with two stacked frames when feed-forward),
//! while one critic reads the privileged global state and scores the whole
//! team. Advantages are one-step temporal differences standardized per
//! rollout; value targets are truncated n-step returns that never bootstrap
//! across an episode boundary. The critic can spectrally normalize any
//! subset of its layers, and variants that normalize the output layer train
//! against running-moment-normalized returns by default.

pub mod config;
pub mod loss;
pub mod model;
pub mod normalizer;
pub mod rollout;
pub mod trainer;

pub use config::{RunConfig, SnVariant};
pub use loss::{clipped_surrogate, policy_sample_terms, value_sample_loss, PolicyTerms};
pub use model::{actor_input_dim, attach_spectral, build_actor, build_critic};
pub use normalizer::ReturnNormalizer;
pub use rollout::{
    n_step_returns, standardize, FinishedEpisode, RolloutBatch,
};
pub use trainer::{EvalStats, MetricsRow, Trainer, CHECKPOINT_VERSION};
