use super::config::RunConfig;
use super::loss::{policy_sample_terms, value_sample_loss};
use super::model::{attach_spectral, build_actor, build_critic};
use super::normalizer::ReturnNormalizer;
use super::rollout::{
    n_step_returns, standardize, FinishedEpisode, RolloutBatch,
};
use crate::envs::{make_env, AnyEnv, Env};
use crate::nn::{clip_global_norm, AdamState, MaskedCategorical, Network};
use crate::spectral::{power_iteration_step, SnMode, SpectralState};
use crate::tensor::dot;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Instant;

pub const CHECKPOINT_VERSION: u32 = 1;

/// One line of training metrics, produced once per update. The wallclock
/// column is the only field that varies between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub env_steps: usize,
    pub mean_episodic_return: f64,
    pub win_rate_or_deliveries: f64,
    pub dead_enemies: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub mean_kl: f64,
    pub critic_grad_norm_preclip: f64,
    pub log10_critic_grad_norm: f64,
    pub sigma_hat_l1: f64,
    pub sigma_hat_l2: f64,
    pub sigma_hat_l3: f64,
    pub wallclock_seconds: f64,
}

impl MetricsRow {
    pub const CSV_HEADER: &'static str = "env_steps,mean_episodic_return,\
win_rate_or_deliveries,dead_enemies,policy_loss,value_loss,entropy,mean_kl,\
critic_grad_norm_preclip,log10_critic_grad_norm,sigma_hat_l1,sigma_hat_l2,\
sigma_hat_l3,wallclock_seconds";

    /// Shortest-round-trip float formatting keeps identical runs
    /// byte-identical in every column except the trailing wallclock.
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.env_steps,
            self.mean_episodic_return,
            self.win_rate_or_deliveries,
            self.dead_enemies,
            self.policy_loss,
            self.value_loss,
            self.entropy,
            self.mean_kl,
            self.critic_grad_norm_preclip,
            self.log10_critic_grad_norm,
            self.sigma_hat_l1,
            self.sigma_hat_l2,
            self.sigma_hat_l3,
            self.wallclock_seconds
        )
    }
}

/// Greedy-policy evaluation summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub mean_return: f64,
    pub win_rate_or_deliveries: f64,
    pub dead_enemies: f64,
    pub episodes: usize,
}

#[derive(Debug, Clone, Default)]
struct OptAccum {
    policy_loss: f64,
    value_loss: f64,
    entropy: f64,
    kl: f64,
    preclip: f64,
    steps: usize,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Shared-policy actor-critic trainer with a centralized critic.
///
/// The whole state serializes: resuming from a checkpoint continues the run
/// bit-exactly (only wallclock readings differ). All randomness flows from
/// one seeded generator; evaluation derives its own seeds and never touches
/// the training stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trainer {
    pub config: RunConfig,
    pub seed: u64,
    env: AnyEnv,
    actor: Network,
    critic: Network,
    actor_opt: AdamState,
    critic_opt: AdamState,
    normalizer: ReturnNormalizer,
    rng: ChaCha8Rng,
    /// Per-agent GRU state (empty vectors when the actor is feed-forward).
    hiddens: Vec<Vec<f64>>,
    /// Previous observation per agent for frame stacking.
    prev_obs: Vec<Vec<f64>>,
    fresh_episode: bool,
    episode_return: f64,
    episode_steps: usize,
    pub env_steps: usize,
    pub updates: usize,
    /// Metric-only sigma estimates for critic layers without an attached
    /// spectral state, refreshed once per update.
    sigma_trackers: Vec<Option<SpectralState>>,
    carry_return: f64,
    carry_rate: f64,
    carry_dead: f64,
    /// Running maxima over all optimizer steps, for stability reporting.
    pub max_log10_preclip: f64,
    pub max_critic_postclip: f64,
    wallclock_base: f64,
    #[serde(skip)]
    session_start: Option<Instant>,
}

impl Trainer {
    pub fn new(config: RunConfig, seed: u64) -> Result<Trainer> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut env = make_env(&config.scenario)?;
        let first_seed = rng.gen();
        env.reset(first_seed);
        let n_agents = env.n_agents();

        let actor = build_actor(
            &mut rng,
            env.obs_dim(),
            env.n_actions(),
            config.hidden_dim,
            config.actor_recurrent,
        );
        let mut critic = build_critic(&mut rng, env.state_dim(), config.hidden_dim);
        attach_spectral(&mut critic, &config)?;
        let actor_opt = AdamState::new(config.lr, &actor.params());
        let critic_opt = AdamState::new(config.lr, &critic.params());

        let mut sigma_trackers = vec![None; critic.layers.len()];
        for i in 0..critic.layers.len() {
            if critic.spectral[i].is_none() {
                let mut st = SpectralState::new(critic.layers[i].in_dim(), SnMode::Plain, i);
                power_iteration_step(&critic.layers[i].weight, &mut st)?;
                sigma_trackers[i] = Some(st);
            }
        }

        let hidden = actor.hidden_dim();
        let prev_obs = (0..n_agents).map(|a| env.observe(a)).collect();
        Ok(Trainer {
            config,
            seed,
            env,
            actor,
            critic,
            actor_opt,
            critic_opt,
            normalizer: ReturnNormalizer::new(),
            rng,
            hiddens: vec![vec![0.0; hidden]; n_agents],
            prev_obs,
            fresh_episode: true,
            episode_return: 0.0,
            episode_steps: 0,
            env_steps: 0,
            updates: 0,
            sigma_trackers,
            carry_return: 0.0,
            carry_rate: 0.0,
            carry_dead: 0.0,
            max_log10_preclip: -300.0,
            max_critic_postclip: 0.0,
            wallclock_base: 0.0,
            session_start: Some(Instant::now()),
        })
    }

    pub fn actor(&self) -> &Network {
        &self.actor
    }

    pub fn critic(&self) -> &Network {
        &self.critic
    }

    pub fn finished_training(&self) -> bool {
        self.env_steps >= self.config.total_env_steps
    }

    /// Seconds of training time, carried across checkpoint resumes.
    pub fn wallclock(&self) -> f64 {
        self.wallclock_base
            + self.session_start.map(|s| s.elapsed().as_secs_f64()).unwrap_or(0.0)
    }

    fn actor_input(&self, agent: usize, obs: &[f64]) -> Vec<f64> {
        if self.config.actor_recurrent {
            obs.to_vec()
        } else {
            let mut v = Vec::with_capacity(2 * obs.len());
            v.extend_from_slice(&self.prev_obs[agent]);
            v.extend_from_slice(obs);
            v
        }
    }

    fn collect_rollout(&mut self) -> Result<RolloutBatch> {
        let t_len = self.config.rollout_length;
        let n = self.env.n_agents();
        let hidden = self.actor.hidden_dim();
        let mut batch = RolloutBatch::with_capacity(t_len, n);

        for _ in 0..t_len {
            let state = self.env.global_state();
            let value = self.critic.forward(&state)[0];
            batch.episode_start.push(self.fresh_episode);
            batch.hidden_pre.push(self.hiddens.clone());
            self.fresh_episode = false;

            let mut actions = Vec::with_capacity(n);
            let mut inputs = Vec::with_capacity(n);
            let mut masks = Vec::with_capacity(n);
            let mut logps = Vec::with_capacity(n);
            for a in 0..n {
                let obs = self.env.observe(a);
                let input = self.actor_input(a, &obs);
                let mask = self.env.action_mask(a);
                let logits = if self.config.actor_recurrent {
                    let mut h_new = vec![0.0; hidden];
                    let out = self.actor.step(&input, &self.hiddens[a], &mut h_new);
                    self.hiddens[a] = h_new;
                    out
                } else {
                    self.actor.forward(&input)
                };
                let dist = MaskedCategorical::from_logits(&logits, &mask)?;
                actions.push(dist.sample(&mut self.rng));
                inputs.push(input);
                masks.push(mask);
                logps.push(dist.log_probs);
                self.prev_obs[a] = obs;
            }

            let outcome = self.env.step(&actions)?;
            self.env_steps += 1;
            self.episode_return += outcome.reward;
            self.episode_steps += 1;

            batch.state.push(state);
            batch.value.push(value);
            batch.reward.push(outcome.reward);
            batch.done.push(outcome.terminated);
            batch.net_in.push(inputs);
            batch.action.push(actions);
            batch.mask.push(masks);
            batch.old_log_probs.push(logps);

            if outcome.terminated {
                batch.finished.push(FinishedEpisode {
                    ret: self.episode_return,
                    length: self.episode_steps,
                    info: self.env.episode_info(),
                });
                let next_seed = self.rng.gen();
                self.env.reset(next_seed);
                for h in &mut self.hiddens {
                    h.iter_mut().for_each(|v| *v = 0.0);
                }
                self.prev_obs = (0..n).map(|a| self.env.observe(a)).collect();
                self.fresh_episode = true;
                self.episode_return = 0.0;
                self.episode_steps = 0;
            }
        }
        batch.len = t_len;
        batch.bootstrap_value = self.critic.forward(&self.env.global_state())[0];
        Ok(batch)
    }

    fn optimize(&mut self, batch: &RolloutBatch) -> Result<OptAccum> {
        let cfg = self.config.clone();
        let normalize = cfg.normalize_returns_effective();
        let values_real: Vec<f64> = if normalize {
            batch.value.iter().map(|v| self.normalizer.denormalize(*v)).collect()
        } else {
            batch.value.clone()
        };
        let boot_real = if normalize {
            self.normalizer.denormalize(batch.bootstrap_value)
        } else {
            batch.bootstrap_value
        };

        let returns = n_step_returns(
            &batch.reward,
            &batch.done,
            &values_real,
            boot_real,
            cfg.gamma,
            cfg.td_steps,
        );
        // Advantages share the critic's n-step return target; the one-step
        // TD form falls out of td_steps = 1.
        let mut adv: Vec<f64> = returns.iter().zip(&values_real).map(|(g, v)| g - v).collect();
        standardize(&mut adv);
        let targets: Vec<f64> = if normalize {
            // Fold this batch into the running moments first, then regress
            // onto targets expressed under the updated statistics.
            self.normalizer.update(&returns);
            returns.iter().map(|g| self.normalizer.normalize(*g)).collect()
        } else {
            returns
        };

        let chunk = batch.len / cfg.minibatches;
        let n = batch.n_agents;
        let hidden = self.actor.hidden_dim();
        let mut acc = OptAccum::default();

        for _epoch in 0..cfg.epochs {
            let mut order: Vec<usize> = (0..cfg.minibatches).collect();
            for i in (1..order.len()).rev() {
                let j = self.rng.gen_range(0..=i);
                order.swap(i, j);
            }
            for &c in &order {
                let (lo, hi) = (c * chunk, (c + 1) * chunk);
                let n_samples = ((hi - lo) * n) as f64;
                self.actor.zero_grads();
                self.critic.zero_grads();

                let mut sum_policy = 0.0;
                let mut sum_kl = 0.0;
                let mut sum_entropy = 0.0;
                for agent in 0..n {
                    if cfg.actor_recurrent {
                        let mut h = batch.hidden_pre[lo][agent].clone();
                        let mut caches = Vec::with_capacity(hi - lo);
                        let mut douts = Vec::with_capacity(hi - lo);
                        let mut resets = Vec::with_capacity(hi - lo);
                        for t in lo..hi {
                            if batch.episode_start[t] {
                                h.iter_mut().for_each(|v| *v = 0.0);
                            }
                            let mut h_new = vec![0.0; hidden];
                            let (logits, cache) =
                                self.actor.step_cached(&batch.net_in[t][agent], &h, &mut h_new);
                            h = h_new;
                            let dist =
                                MaskedCategorical::from_logits(&logits, &batch.mask[t][agent])?;
                            let terms = policy_sample_terms(
                                &dist,
                                &batch.old_log_probs[t][agent],
                                batch.action[t][agent],
                                adv[t],
                                cfg.clip_eps,
                                cfg.kl_coef,
                                cfg.entropy_coef,
                            )?;
                            sum_policy += terms.loss;
                            sum_kl += terms.kl;
                            sum_entropy += terms.entropy;
                            douts.push(terms.dlogits.iter().map(|d| d / n_samples).collect());
                            resets.push(batch.episode_start[t] || t == lo);
                            caches.push(cache);
                        }
                        self.actor.backward_sequence(&caches, &douts, &resets);
                    } else {
                        for t in lo..hi {
                            let (logits, cache) =
                                self.actor.forward_cached(&batch.net_in[t][agent]);
                            let dist =
                                MaskedCategorical::from_logits(&logits, &batch.mask[t][agent])?;
                            let terms = policy_sample_terms(
                                &dist,
                                &batch.old_log_probs[t][agent],
                                batch.action[t][agent],
                                adv[t],
                                cfg.clip_eps,
                                cfg.kl_coef,
                                cfg.entropy_coef,
                            )?;
                            sum_policy += terms.loss;
                            sum_kl += terms.kl;
                            sum_entropy += terms.entropy;
                            let dl: Vec<f64> =
                                terms.dlogits.iter().map(|d| d / n_samples).collect();
                            self.actor.backward(&cache, &dl);
                        }
                    }
                }

                let mut sum_value = 0.0;
                let steps_f = (hi - lo) as f64;
                for t in lo..hi {
                    let (v, cache) = self.critic.forward_cached(&batch.state[t]);
                    let (l, g) = value_sample_loss(v[0], targets[t]);
                    sum_value += l;
                    self.critic.backward(&cache, &[g / steps_f]);
                }

                {
                    let mut ps = self.actor.params_mut();
                    clip_global_norm(&mut ps, cfg.max_grad_norm);
                    self.actor_opt.step(&mut ps);
                }
                let pre_c;
                {
                    let mut ps = self.critic.params_mut();
                    pre_c = clip_global_norm(&mut ps, cfg.max_grad_norm);
                    let post_sq: f64 =
                        ps.iter().filter_map(|p| p.grad.as_ref()).map(|g| dot(g, g)).sum();
                    self.max_critic_postclip = self.max_critic_postclip.max(post_sq.sqrt());
                    self.critic_opt.step(&mut ps);
                }
                self.max_log10_preclip =
                    self.max_log10_preclip.max(pre_c.max(1e-300).log10());
                if !(self.actor.all_finite() && self.critic.all_finite()) {
                    return Err(Error::Numeric(
                        "non-finite network parameter after an optimizer step".into(),
                    ));
                }

                // Track the live spectral estimates alongside the weights.
                let Network { layers, spectral, .. } = &mut self.critic;
                for (i, slot) in spectral.iter_mut().enumerate() {
                    if let Some(st) = slot {
                        power_iteration_step(&layers[i].weight, st)?;
                    }
                }

                acc.policy_loss += sum_policy / n_samples;
                acc.kl += sum_kl / n_samples;
                acc.entropy += sum_entropy / n_samples;
                acc.value_loss += sum_value / steps_f;
                acc.preclip += pre_c;
                acc.steps += 1;
            }
        }
        Ok(acc)
    }

    fn sigma_hat(&self, layer: usize) -> f64 {
        if let Some(st) = &self.critic.spectral[layer] {
            st.sigma_hat
        } else if let Some(st) = &self.sigma_trackers[layer] {
            st.sigma_hat
        } else {
            0.0
        }
    }

    /// Collects one rollout, runs the optimization epochs, and reports the
    /// update's metrics. Episode statistics carry the last known values when
    /// no episode finished inside this rollout.
    pub fn run_update(&mut self) -> Result<MetricsRow> {
        if self.session_start.is_none() {
            self.session_start = Some(Instant::now());
        }
        let batch = self.collect_rollout()?;
        let acc = self.optimize(&batch)?;
        self.updates += 1;

        for (i, slot) in self.sigma_trackers.iter_mut().enumerate() {
            if let Some(st) = slot {
                power_iteration_step(&self.critic.layers[i].weight, st)?;
            }
        }

        if !batch.finished.is_empty() {
            let k = batch.finished.len() as f64;
            self.carry_return = batch.finished.iter().map(|e| e.ret).sum::<f64>() / k;
            let skirmish = matches!(self.env, AnyEnv::Skirmish(_));
            self.carry_rate = batch
                .finished
                .iter()
                .map(|e| {
                    if skirmish {
                        e.info.battle_won as i32 as f64
                    } else {
                        e.info.deliveries as f64
                    }
                })
                .sum::<f64>()
                / k;
            self.carry_dead =
                batch.finished.iter().map(|e| e.info.enemies_killed as f64).sum::<f64>() / k;
        }

        let steps = acc.steps.max(1) as f64;
        let preclip = acc.preclip / steps;
        Ok(MetricsRow {
            env_steps: self.env_steps,
            mean_episodic_return: self.carry_return,
            win_rate_or_deliveries: self.carry_rate,
            dead_enemies: self.carry_dead,
            policy_loss: acc.policy_loss / steps,
            value_loss: acc.value_loss / steps,
            entropy: acc.entropy / steps,
            mean_kl: acc.kl / steps,
            critic_grad_norm_preclip: preclip,
            log10_critic_grad_norm: preclip.max(1e-300).log10(),
            sigma_hat_l1: self.sigma_hat(0),
            sigma_hat_l2: self.sigma_hat(1),
            sigma_hat_l3: self.sigma_hat(2),
            wallclock_seconds: self.wallclock(),
        })
    }

    fn eval_seed(&self, episode: usize) -> u64 {
        splitmix64(
            self.seed
                .wrapping_mul(0x0000_0000_5DEE_CE66)
                .wrapping_add((self.updates as u64).wrapping_mul(1_000_003))
                .wrapping_add(episode as u64),
        )
    }

    /// Runs greedy (argmax) episodes on a fresh environment instance.
    /// Touches neither the training environment nor the training generator,
    /// so interleaving evaluations does not change the training trajectory.
    pub fn evaluate(&self) -> Result<EvalStats> {
        let mut env = make_env(&self.config.scenario)?;
        let n = env.n_agents();
        let hidden = self.actor.hidden_dim();
        let skirmish = matches!(env, AnyEnv::Skirmish(_));
        let mut sum_return = 0.0;
        let mut sum_rate = 0.0;
        let mut sum_dead = 0.0;

        for ep in 0..self.config.eval_episodes {
            env.reset(self.eval_seed(ep));
            let mut hiddens = vec![vec![0.0; hidden]; n];
            let mut prev: Vec<Vec<f64>> = (0..n).map(|a| env.observe(a)).collect();
            let mut ret = 0.0;
            for _ in 0..env.episode_limit() {
                let mut actions = Vec::with_capacity(n);
                for a in 0..n {
                    let obs = env.observe(a);
                    let input = if self.config.actor_recurrent {
                        obs.clone()
                    } else {
                        let mut v = Vec::with_capacity(2 * obs.len());
                        v.extend_from_slice(&prev[a]);
                        v.extend_from_slice(&obs);
                        v
                    };
                    let mask = env.action_mask(a);
                    let logits = if self.config.actor_recurrent {
                        let mut h_new = vec![0.0; hidden];
                        let out = self.actor.step(&input, &hiddens[a], &mut h_new);
                        hiddens[a] = h_new;
                        out
                    } else {
                        self.actor.forward(&input)
                    };
                    let dist = MaskedCategorical::from_logits(&logits, &mask)?;
                    actions.push(dist.argmax());
                    prev[a] = obs;
                }
                let out = env.step(&actions)?;
                ret += out.reward;
                if out.terminated {
                    break;
                }
            }
            let info = env.episode_info();
            sum_return += ret;
            sum_rate += if skirmish {
                info.battle_won as i32 as f64
            } else {
                info.deliveries as f64
            };
            sum_dead += info.enemies_killed as f64;
        }

        let k = self.config.eval_episodes as f64;
        Ok(EvalStats {
            mean_return: sum_return / k,
            win_rate_or_deliveries: sum_rate / k,
            dead_enemies: sum_dead / k,
            episodes: self.config.eval_episodes,
        })
    }

    /// Serializes the full training state. Accumulated wallclock is folded
    /// into the snapshot so a resumed run keeps counting from here.
    pub fn save_checkpoint(&mut self, path: &Path) -> Result<()> {
        self.wallclock_base = self.wallclock();
        self.session_start = Some(Instant::now());
        #[derive(Serialize)]
        struct CheckpointRef<'a> {
            format_version: u32,
            trainer: &'a Trainer,
        }
        let text =
            serde_json::to_string(&CheckpointRef { format_version: CHECKPOINT_VERSION, trainer: self })?;
        // Write-then-rename so a crash mid-write can never leave a truncated
        // checkpoint behind; the previous one survives until the swap.
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load_checkpoint(path: &Path) -> Result<Trainer> {
        #[derive(Deserialize)]
        struct CheckpointOwned {
            format_version: u32,
            trainer: Trainer,
        }
        let text = std::fs::read_to_string(path)?;
        let ck: CheckpointOwned = serde_json::from_str(&text)?;
        if ck.format_version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint format {} is not supported (expected {})",
                ck.format_version, CHECKPOINT_VERSION
            )));
        }
        let mut trainer = ck.trainer;
        trainer.config.validate()?;
        trainer.session_start = Some(Instant::now());
        Ok(trainer)
    }
}
