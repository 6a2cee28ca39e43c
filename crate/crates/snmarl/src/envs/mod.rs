//! Cooperative grid environments with shared team reward, per-agent action
//! masks, partial observations, and a privileged global state for centralized
//! critics.
//!
//! Both environments are strictly deterministic given the reset seed and the
//! joint-action sequence: identical runs produce bit-identical state dumps.
//! Rewards are sparse by design; there is no shaping.

mod skirmish;
mod warehouse;

pub use skirmish::SkirmishEnv;
pub use warehouse::WarehouseEnv;

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Result of one environment step. The reward is a single team scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub terminated: bool,
}

/// Cumulative per-episode counters; monotone within an episode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeInfo {
    pub deliveries: u32,
    pub enemies_killed: u32,
    pub allies_dead: u32,
    pub battle_won: bool,
}

pub trait Env {
    fn n_agents(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn state_dim(&self) -> usize;
    fn episode_limit(&self) -> usize;

    /// Starts a fresh episode. Everything downstream of the seed is
    /// deterministic.
    fn reset(&mut self, seed: u64);

    /// Advances one step with a joint action (one action per agent, already
    /// legal under the current masks).
    fn step(&mut self, actions: &[usize]) -> Result<StepOutcome>;

    fn observe(&self, agent: usize) -> Vec<f64>;
    fn global_state(&self) -> Vec<f64>;
    fn action_mask(&self, agent: usize) -> Vec<bool>;
    fn episode_info(&self) -> EpisodeInfo;

    /// Line-oriented text dump of the full state, stable across runs.
    fn state_dump(&self) -> String;
}

/// Concrete environment wrapper so training state can be serialized.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum AnyEnv {
    Warehouse(WarehouseEnv),
    Skirmish(SkirmishEnv),
}

macro_rules! delegate {
    ($self:ident, $e:ident => $body:expr) => {
        match $self {
            AnyEnv::Warehouse($e) => $body,
            AnyEnv::Skirmish($e) => $body,
        }
    };
}

impl AnyEnv {
    pub fn scenario(&self) -> &str {
        delegate!(self, e => e.scenario())
    }
}

impl Env for AnyEnv {
    fn n_agents(&self) -> usize {
        delegate!(self, e => e.n_agents())
    }
    fn n_actions(&self) -> usize {
        delegate!(self, e => e.n_actions())
    }
    fn obs_dim(&self) -> usize {
        delegate!(self, e => e.obs_dim())
    }
    fn state_dim(&self) -> usize {
        delegate!(self, e => e.state_dim())
    }
    fn episode_limit(&self) -> usize {
        delegate!(self, e => e.episode_limit())
    }
    fn reset(&mut self, seed: u64) {
        delegate!(self, e => e.reset(seed))
    }
    fn step(&mut self, actions: &[usize]) -> Result<StepOutcome> {
        delegate!(self, e => e.step(actions))
    }
    fn observe(&self, agent: usize) -> Vec<f64> {
        delegate!(self, e => e.observe(agent))
    }
    fn global_state(&self) -> Vec<f64> {
        delegate!(self, e => e.global_state())
    }
    fn action_mask(&self, agent: usize) -> Vec<bool> {
        delegate!(self, e => e.action_mask(agent))
    }
    fn episode_info(&self) -> EpisodeInfo {
        delegate!(self, e => e.episode_info())
    }
    fn state_dump(&self) -> String {
        delegate!(self, e => e.state_dump())
    }
}

/// Known scenario names accepted by [`make_env`].
pub const SCENARIOS: [&str; 6] = [
    "warehouse-tiny-2ag",
    "warehouse-tiny-4ag",
    "warehouse-small-2ag",
    "skirmish-5v5",
    "skirmish-5v6",
    "skirmish-8v9",
];

/// Builds an environment from a scenario name. The environment still needs a
/// `reset` before use.
pub fn make_env(name: &str) -> Result<AnyEnv> {
    match name {
        "warehouse-tiny-2ag" | "warehouse-tiny-4ag" | "warehouse-small-2ag" => {
            Ok(AnyEnv::Warehouse(WarehouseEnv::named(name)?))
        }
        "skirmish-5v5" | "skirmish-5v6" | "skirmish-8v9" => {
            Ok(AnyEnv::Skirmish(SkirmishEnv::named(name)?))
        }
        other => Err(Error::Config(format!(
            "unknown environment '{other}'; expected one of {}",
            SCENARIOS.join(", ")
        ))),
    }
}
