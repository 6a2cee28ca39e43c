use super::config::RunConfig;
use crate::nn::{uniform_fanin, Activation, DenseLayer, GruCell, GruSlot, Network};
use crate::spectral::{power_iteration_step, SpectralState};
use crate::tensor::Tensor2;
use crate::Result;
use rand::Rng;

const HIDDEN_GAIN: f64 = std::f64::consts::SQRT_2;
const POLICY_HEAD_GAIN: f64 = 0.01;
const CRITIC_HEAD_GAIN: f64 = 1.0;

fn dense<R: Rng>(rng: &mut R, inp: usize, out: usize, act: Activation, gain: f64) -> DenseLayer {
    DenseLayer::new(uniform_fanin(rng, out, inp, gain), Tensor2::zeros(out, 1), act)
}

fn init_gru<R: Rng>(rng: &mut R, input_dim: usize, hidden_dim: usize) -> GruCell {
    let mut cell = GruCell::zeros(input_dim, hidden_dim);
    cell.w_reset = uniform_fanin(rng, hidden_dim, input_dim, 1.0);
    cell.u_reset = uniform_fanin(rng, hidden_dim, hidden_dim, 1.0);
    cell.w_update = uniform_fanin(rng, hidden_dim, input_dim, 1.0);
    cell.u_update = uniform_fanin(rng, hidden_dim, hidden_dim, 1.0);
    cell.w_cand = uniform_fanin(rng, hidden_dim, input_dim, 1.0);
    cell.u_cand = uniform_fanin(rng, hidden_dim, hidden_dim, 1.0);
    cell
}

/// Input width the actor expects. Without recurrence the policy stacks the
/// previous and current observation to recover short-term memory.
pub fn actor_input_dim(obs_dim: usize, recurrent: bool) -> usize {
    if recurrent {
        obs_dim
    } else {
        2 * obs_dim
    }
}

/// Shared policy network: encoder, GRU core (or a second dense layer when
/// recurrence is off), and a small-gain logit head.
pub fn build_actor<R: Rng>(
    rng: &mut R,
    obs_dim: usize,
    n_actions: usize,
    hidden: usize,
    recurrent: bool,
) -> Network {
    let in_dim = actor_input_dim(obs_dim, recurrent);
    let enc = dense(rng, in_dim, hidden, Activation::Relu, HIDDEN_GAIN);
    if recurrent {
        let cell = init_gru(rng, hidden, hidden);
        let head = dense(rng, hidden, n_actions, Activation::Identity, POLICY_HEAD_GAIN);
        Network::new(vec![enc, head], Some(GruSlot { position: 1, cell }))
    } else {
        let mid = dense(rng, hidden, hidden, Activation::Relu, HIDDEN_GAIN);
        let head = dense(rng, hidden, n_actions, Activation::Identity, POLICY_HEAD_GAIN);
        Network::new(vec![enc, mid, head], None)
    }
}

/// Centralized critic: three dense layers on the global state, scalar output.
pub fn build_critic<R: Rng>(rng: &mut R, state_dim: usize, hidden: usize) -> Network {
    let l1 = dense(rng, state_dim, hidden, Activation::Relu, HIDDEN_GAIN);
    let l2 = dense(rng, hidden, hidden, Activation::Relu, HIDDEN_GAIN);
    let l3 = dense(rng, hidden, 1, Activation::Identity, CRITIC_HEAD_GAIN);
    Network::new(vec![l1, l2, l3], None)
}

/// Attaches spectral states to the critic layers the variant selects and
/// primes each estimate with one power-iteration step.
pub fn attach_spectral(critic: &mut Network, config: &RunConfig) -> Result<()> {
    for &i in config.variant.critic_layers() {
        let mut st = SpectralState::new(critic.layers[i].in_dim(), config.sn_mode(), i);
        power_iteration_step(&critic.layers[i].weight, &mut st)?;
        critic.spectral[i] = Some(st);
    }
    Ok(())
}
