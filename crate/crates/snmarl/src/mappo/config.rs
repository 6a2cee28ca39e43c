use crate::envs::make_env;
use crate::spectral::SnMode;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Which critic layers get spectral normalization (1-based positions in the
/// three-layer critic: full = all three, mid = the second, last = the third).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SnVariant {
    Plain,
    Full,
    Mid,
    Last,
}

impl SnVariant {
    pub const ALL: [SnVariant; 4] = [SnVariant::Plain, SnVariant::Full, SnVariant::Mid, SnVariant::Last];

    /// Zero-based indices of the critic dense layers to normalize.
    pub fn critic_layers(self) -> &'static [usize] {
        match self {
            SnVariant::Plain => &[],
            SnVariant::Full => &[0, 1, 2],
            SnVariant::Mid => &[1],
            SnVariant::Last => &[2],
        }
    }

    /// Return normalization is on by default when the output layer is
    /// normalized, since a unit-Lipschitz head cannot express large values.
    pub fn default_normalize_returns(self) -> bool {
        matches!(self, SnVariant::Full | SnVariant::Last)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SnVariant::Plain => "none",
            SnVariant::Full => "full_sn",
            SnVariant::Mid => "mid_sn",
            SnVariant::Last => "last_sn",
        }
    }
}

impl fmt::Display for SnVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SnVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String =
            s.chars().filter(|c| *c != '_' && *c != '-').flat_map(char::to_lowercase).collect();
        match key.as_str() {
            "none" | "plain" => Ok(SnVariant::Plain),
            "fullsn" | "full" => Ok(SnVariant::Full),
            "midsn" | "mid" => Ok(SnVariant::Mid),
            "lastsn" | "last" => Ok(SnVariant::Last),
            _ => Err(Error::Config(format!(
                "unknown variant '{s}'; expected none, full_sn, mid_sn, or last_sn"
            ))),
        }
    }
}

impl TryFrom<String> for SnVariant {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SnVariant> for String {
    fn from(v: SnVariant) -> String {
        v.as_str().to_string()
    }
}

/// Full hyperparameter set for one training run. Unknown keys in a config
/// file are rejected rather than silently ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(alias = "env")]
    pub scenario: String,
    pub variant: SnVariant,
    pub total_env_steps: usize,
    pub rollout_length: usize,
    pub epochs: usize,
    pub minibatches: usize,
    pub gamma: f64,
    #[serde(alias = "clip_epsilon")]
    pub clip_eps: f64,
    #[serde(alias = "kl_beta")]
    pub kl_coef: f64,
    pub entropy_coef: f64,
    pub td_steps: usize,
    #[serde(alias = "learning_rate")]
    pub lr: f64,
    pub max_grad_norm: f64,
    pub hidden_dim: usize,
    pub actor_recurrent: bool,
    /// `None` defers to the variant default.
    pub normalize_returns: Option<bool>,
    /// `Some(k)` switches the divisor to `max(sigma_hat, k)`.
    pub k_floor: Option<f64>,
    /// Updates between greedy evaluation rounds.
    pub eval_interval: usize,
    pub eval_episodes: usize,
    /// Soft wallclock budget; a run past it stops cleanly with a checkpoint
    /// and whatever metrics it already wrote.
    pub time_limit_seconds: Option<f64>,
    /// Only "f64" is supported; the key exists so configs state it.
    pub precision: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: "skirmish-5v6".to_string(),
            variant: SnVariant::Plain,
            total_env_steps: 500_000,
            rollout_length: 1024,
            epochs: 4,
            minibatches: 2,
            gamma: 0.99,
            clip_eps: 0.2,
            kl_coef: 0.0,
            entropy_coef: 0.01,
            td_steps: 10,
            lr: 5e-4,
            max_grad_norm: 10.0,
            hidden_dim: 64,
            actor_recurrent: true,
            normalize_returns: None,
            k_floor: None,
            eval_interval: 10,
            eval_episodes: 32,
            time_limit_seconds: None,
            precision: "f64".to_string(),
        }
    }
}

impl RunConfig {
    pub fn normalize_returns_effective(&self) -> bool {
        self.normalize_returns.unwrap_or_else(|| self.variant.default_normalize_returns())
    }

    pub fn sn_mode(&self) -> SnMode {
        match self.k_floor {
            Some(k) => SnMode::KFloor { k },
            None => SnMode::Plain,
        }
    }

    pub fn validate(&self) -> Result<()> {
        make_env(&self.scenario)?;
        let positive = [
            ("total_env_steps", self.total_env_steps),
            ("rollout_length", self.rollout_length),
            ("epochs", self.epochs),
            ("minibatches", self.minibatches),
            ("td_steps", self.td_steps),
            ("hidden_dim", self.hidden_dim),
            ("eval_interval", self.eval_interval),
            ("eval_episodes", self.eval_episodes),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{key} must be positive")));
            }
        }
        if self.rollout_length % self.minibatches != 0 {
            return Err(Error::Config(format!(
                "rollout_length {} is not divisible by minibatches {}",
                self.rollout_length, self.minibatches
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config("gamma must lie in (0, 1]".into()));
        }
        if !(self.clip_eps > 0.0) {
            return Err(Error::Config("clip_eps must be positive".into()));
        }
        if self.kl_coef < 0.0 || self.entropy_coef < 0.0 {
            return Err(Error::Config("loss coefficients must be non-negative".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config("lr must be positive".into()));
        }
        if !(self.max_grad_norm > 0.0) {
            return Err(Error::Config("max_grad_norm must be positive".into()));
        }
        if let Some(k) = self.k_floor {
            if !(k > 0.0) {
                return Err(Error::Config("k_floor must be positive".into()));
            }
        }
        if let Some(t) = self.time_limit_seconds {
            if !(t > 0.0) {
                return Err(Error::Config("time_limit_seconds must be positive".into()));
            }
        }
        if self.precision != "f64" {
            return Err(Error::Config(format!(
                "precision '{}' is not supported; this build computes in f64",
                self.precision
            )));
        }
        Ok(())
    }
}
