use crate::envs::EpisodeInfo;

/// One rollout of `len` environment steps, time-major. Per-agent data is
/// indexed `[t][agent]`. `value[t]` is the critic output on `state[t]` in
/// whatever space the critic is trained in (normalized when return
/// normalization is on).
#[derive(Debug, Clone, Default)]
pub struct RolloutBatch {
    pub len: usize,
    pub n_agents: usize,
    pub state: Vec<Vec<f64>>,
    pub value: Vec<f64>,
    pub reward: Vec<f64>,
    pub done: Vec<bool>,
    /// True when the step began a fresh episode (hidden state was zeros).
    pub episode_start: Vec<bool>,
    /// Network input per agent (stacked observations when not recurrent).
    pub net_in: Vec<Vec<Vec<f64>>>,
    pub action: Vec<Vec<usize>>,
    pub mask: Vec<Vec<Vec<bool>>>,
    /// Behavior-policy log-probabilities over all actions, per agent.
    pub old_log_probs: Vec<Vec<Vec<f64>>>,
    /// GRU hidden state per agent before consuming step `t`.
    pub hidden_pre: Vec<Vec<Vec<f64>>>,
    /// Critic output on the state after the final action.
    pub bootstrap_value: f64,
    /// Episodes that finished during this rollout.
    pub finished: Vec<FinishedEpisode>,
}

#[derive(Debug, Clone, Copy)]
pub struct FinishedEpisode {
    pub ret: f64,
    pub length: usize,
    pub info: EpisodeInfo,
}

impl RolloutBatch {
    pub fn with_capacity(len: usize, n_agents: usize) -> Self {
        RolloutBatch {
            len: 0,
            n_agents,
            state: Vec::with_capacity(len),
            value: Vec::with_capacity(len),
            reward: Vec::with_capacity(len),
            done: Vec::with_capacity(len),
            episode_start: Vec::with_capacity(len),
            net_in: Vec::with_capacity(len),
            action: Vec::with_capacity(len),
            mask: Vec::with_capacity(len),
            old_log_probs: Vec::with_capacity(len),
            hidden_pre: Vec::with_capacity(len),
            bootstrap_value: 0.0,
            finished: Vec::new(),
        }
    }
}

/// Truncated n-step returns.
///
/// `values[t]` is the (real-scale) value of the state before action `t` and
/// `bootstrap_value` the value of the state after the final action. Each
/// window sums up to `n` discounted rewards, stops dead at episode
/// termination (timeouts included; nothing is bootstrapped past a done), and
/// otherwise bootstraps from the value at the window's end.
pub fn n_step_returns(
    rewards: &[f64],
    dones: &[bool],
    values: &[f64],
    bootstrap_value: f64,
    gamma: f64,
    n: usize,
) -> Vec<f64> {
    let len = rewards.len();
    assert_eq!(dones.len(), len);
    assert_eq!(values.len(), len);
    assert!(n >= 1, "n-step horizon must be at least one");
    let mut out = vec![0.0; len];
    for t in 0..len {
        let mut g = 0.0;
        let mut discount = 1.0;
        let mut closed = false;
        let mut end = t;
        for j in 0..n {
            let idx = t + j;
            if idx >= len {
                break;
            }
            g += discount * rewards[idx];
            discount *= gamma;
            end = idx + 1;
            if dones[idx] {
                closed = true;
                break;
            }
        }
        if !closed {
            g += discount * if end < len { values[end] } else { bootstrap_value };
        }
        out[t] = g;
    }
    out
}

/// In-place shift to zero mean and unit standard deviation, with a floor on
/// the deviation so constant inputs map to zeros instead of blowing up.
pub fn standardize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for x in xs.iter_mut() {
        *x = (*x - mean) / std;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn returns_stop_dead_at_termination() {
        // Reward only on the terminal step; the poisoned values after the
        // done must not leak in.
        let rewards = [0.0, 0.0, 1.0];
        let dones = [false, false, true];
        let values = [9.0, 9.0, 9.0];
        let g = n_step_returns(&rewards, &dones, &values, 99.0, 0.9, 10);
        assert_abs_diff_eq!(g[0], 0.81, epsilon = 1e-15);
        assert_abs_diff_eq!(g[1], 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(g[2], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn returns_bootstrap_from_the_window_end_value() {
        let rewards = [1.0, 2.0, 3.0, 4.0];
        let dones = [false; 4];
        let values = [10.0, 20.0, 30.0, 40.0];
        let g = n_step_returns(&rewards, &dones, &values, 50.0, 0.5, 2);
        // Two rewards then the value two steps ahead.
        assert_abs_diff_eq!(g[0], 1.0 + 0.5 * 2.0 + 0.25 * 30.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[1], 2.0 + 0.5 * 3.0 + 0.25 * 40.0, epsilon = 1e-15);
        // Windows that hit the batch end use the bootstrap value.
        assert_abs_diff_eq!(g[2], 3.0 + 0.5 * 4.0 + 0.25 * 50.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[3], 4.0 + 0.5 * 50.0, epsilon = 1e-15);
    }

    #[test]
    fn mid_batch_termination_restarts_accumulation() {
        let rewards = [1.0, 5.0, 1.0];
        let dones = [false, true, false];
        let values = [0.0, 0.0, 0.0];
        let g = n_step_returns(&rewards, &dones, &values, 7.0, 1.0, 10);
        assert_abs_diff_eq!(g[0], 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[1], 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[2], 1.0 + 7.0, epsilon = 1e-15);
    }

    #[test]
    fn one_step_horizon_is_plain_td() {
        let rewards = [1.0, 1.0];
        let dones = [false, false];
        let values = [2.0, 3.0];
        let g = n_step_returns(&rewards, &dones, &values, 4.0, 0.9, 1);
        assert_abs_diff_eq!(g[0], 1.0 + 0.9 * 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[1], 1.0 + 0.9 * 4.0, epsilon = 1e-15);
    }

    #[test]
    fn one_step_advantage_matches_the_hand_example() {
        // A = r + gamma V(s') - V(s) = 1 + 0.9 * 2 - 1 = 1.8.
        let g = n_step_returns(&[1.0], &[false], &[1.0], 2.0, 0.9, 1);
        assert_abs_diff_eq!(g[0] - 1.0, 1.8, epsilon = 1e-15);
    }

    #[test]
    fn one_step_advantage_drops_next_value_on_done() {
        let g = n_step_returns(&[1.0, 1.0], &[true, false], &[0.5, 0.25], 8.0, 0.9, 1);
        assert_abs_diff_eq!(g[0] - 0.5, 1.0 - 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(g[1] - 0.25, 1.0 + 0.9 * 8.0 - 0.25, epsilon = 1e-15);
    }

    #[test]
    fn standardize_centers_and_scales() {
        let mut xs: Vec<f64> = (0..64).map(|i| (i as f64 * 0.91).sin() * 3.0 + 2.0).collect();
        standardize(&mut xs);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(var, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn standardize_maps_constants_to_zero() {
        let mut xs = vec![5.0; 10];
        standardize(&mut xs);
        assert!(xs.iter().all(|&x| x == 0.0));
    }
}
