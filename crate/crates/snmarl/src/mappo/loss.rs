use crate::nn::MaskedCategorical;
use crate::{Error, Result};

/// The clipped importance-sampling objective for one sample,
/// `min(ratio * A, clamp(ratio, 1 - eps, 1 + eps) * A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    (ratio * advantage).min(clipped * advantage)
}

/// Per-sample actor loss pieces and the gradient at the logits.
#[derive(Debug, Clone)]
pub struct PolicyTerms {
    /// `-surrogate + kl_coef * kl - entropy_coef * entropy`.
    pub loss: f64,
    pub dlogits: Vec<f64>,
    pub kl: f64,
    pub entropy: f64,
    pub ratio: f64,
}

/// Evaluates the PPO actor objective for one (state, action) sample under
/// the current policy `new_dist`, with the behavior policy summarized by its
/// full log-probability vector.
///
/// The gradient follows the `min`: when the unclipped branch is active (ties
/// included) it flows through the ratio, otherwise the surrogate contributes
/// nothing. Masked actions carry no probability, so their logits get zero
/// gradient throughout.
pub fn policy_sample_terms(
    new_dist: &MaskedCategorical,
    old_log_probs: &[f64],
    action: usize,
    advantage: f64,
    clip_eps: f64,
    kl_coef: f64,
    entropy_coef: f64,
) -> Result<PolicyTerms> {
    let n = new_dist.probs.len();
    assert_eq!(old_log_probs.len(), n, "policy terms: action-space mismatch");
    let lp_new = new_dist.log_prob(action);
    let lp_old = old_log_probs[action];
    let ratio = (lp_new - lp_old).exp();
    if !ratio.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite importance ratio (new {lp_new}, old {lp_old})"
        )));
    }
    let surrogate = clipped_surrogate(ratio, advantage, clip_eps);
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    let pass_through = ratio * advantage <= clipped * advantage;

    let entropy = new_dist.entropy();
    // KL(old || new) over the shared legal set.
    let mut kl = 0.0;
    for j in 0..n {
        if new_dist.mask[j] && old_log_probs[j] > f64::NEG_INFINITY {
            let p_old = old_log_probs[j].exp();
            kl += p_old * (old_log_probs[j] - new_dist.log_probs[j]);
        }
    }

    let mut dlogits = vec![0.0; n];
    for j in 0..n {
        if !new_dist.mask[j] {
            continue;
        }
        let p = new_dist.probs[j];
        let indicator = (j == action) as i32 as f64;
        let mut d = 0.0;
        if pass_through {
            d -= advantage * ratio * (indicator - p);
        }
        let p_old = if old_log_probs[j] > f64::NEG_INFINITY { old_log_probs[j].exp() } else { 0.0 };
        d += kl_coef * (p - p_old);
        if p > 0.0 {
            d += entropy_coef * p * (new_dist.log_probs[j] + entropy);
        }
        dlogits[j] = d;
    }

    Ok(PolicyTerms {
        loss: -surrogate + kl_coef * kl - entropy_coef * entropy,
        dlogits,
        kl,
        entropy,
        ratio,
    })
}

/// Squared-error value loss for one sample and its gradient at the
/// prediction.
pub fn value_sample_loss(value: f64, target: f64) -> (f64, f64) {
    let d = value - target;
    (d * d, 2.0 * d)
}
