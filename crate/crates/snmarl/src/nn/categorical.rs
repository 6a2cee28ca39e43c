use crate::{Error, Result};
use rand::Rng;

/// Categorical distribution over logits with an action-legality mask.
///
/// Probabilities of masked actions are exactly `0.0`; their log-probabilities
/// are `-inf` and never enter sums. The softmax subtracts the max legal logit
/// before exponentiating.
#[derive(Debug, Clone)]
pub struct MaskedCategorical {
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub mask: Vec<bool>,
}

impl MaskedCategorical {
    pub fn from_logits(logits: &[f64], mask: &[bool]) -> Result<Self> {
        assert_eq!(logits.len(), mask.len(), "categorical: mask length mismatch");
        let mut max = f64::NEG_INFINITY;
        for (l, &m) in logits.iter().zip(mask) {
            if m && *l > max {
                max = *l;
            }
        }
        if max == f64::NEG_INFINITY {
            return Err(Error::EnvInvariant("action mask with no legal action".into()));
        }
        if !max.is_finite() {
            return Err(Error::Numeric("non-finite logit in categorical head".into()));
        }
        let mut z = 0.0;
        let mut shifted = vec![f64::NEG_INFINITY; logits.len()];
        for i in 0..logits.len() {
            if mask[i] {
                if !logits[i].is_finite() {
                    return Err(Error::Numeric("non-finite logit in categorical head".into()));
                }
                shifted[i] = logits[i] - max;
                z += shifted[i].exp();
            }
        }
        let ln_z = z.ln();
        let mut probs = vec![0.0; logits.len()];
        let mut log_probs = vec![f64::NEG_INFINITY; logits.len()];
        for i in 0..logits.len() {
            if mask[i] {
                log_probs[i] = shifted[i] - ln_z;
                probs[i] = log_probs[i].exp();
            }
        }
        Ok(MaskedCategorical { probs, log_probs, mask: mask.to_vec() })
    }

    /// Inverse-CDF sample; the last legal action absorbs rounding slack.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last_legal = 0;
        for i in 0..self.probs.len() {
            if self.mask[i] {
                acc += self.probs[i];
                last_legal = i;
                if u < acc {
                    return i;
                }
            }
        }
        last_legal
    }

    pub fn log_prob(&self, action: usize) -> f64 {
        self.log_probs[action]
    }

    /// Greedy action: highest probability, ties to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = usize::MAX;
        let mut best_p = f64::NEG_INFINITY;
        for i in 0..self.probs.len() {
            if self.mask[i] && self.probs[i] > best_p {
                best_p = self.probs[i];
                best = i;
            }
        }
        best
    }

    pub fn entropy(&self) -> f64 {
        let mut h = 0.0;
        for i in 0..self.probs.len() {
            if self.mask[i] && self.probs[i] > 0.0 {
                h -= self.probs[i] * self.log_probs[i];
            }
        }
        h
    }

    /// `KL(old ‖ self)`; both distributions must share the mask.
    pub fn kl_from(&self, old: &MaskedCategorical) -> f64 {
        debug_assert_eq!(self.mask, old.mask, "categorical: KL across different masks");
        let mut kl = 0.0;
        for i in 0..self.probs.len() {
            if self.mask[i] && old.probs[i] > 0.0 {
                kl += old.probs[i] * (old.log_probs[i] - self.log_probs[i]);
            }
        }
        kl
    }
}
