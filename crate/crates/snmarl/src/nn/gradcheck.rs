use super::Network;
use crate::{Error, Result};

/// Central-difference check of analytic gradients.
///
/// `analytic` holds one flat gradient per parameter tensor in `params()`
/// order (an empty vector stands for an all-zero gradient). `loss` must
/// re-evaluate the same scalar objective from scratch; the network is
/// restored to its original parameters before returning.
///
/// Returns the largest relative error, with the denominator floored at 1e-4
/// so that near-zero gradients compare absolutely. Callers are responsible
/// for avoiding non-differentiable points (ReLU kinks, PPO clip boundaries);
/// see [`Network::relu_kink_margin`].
pub fn finite_diff_check<F>(
    net: &mut Network,
    epsilon: f64,
    analytic: &[Vec<f64>],
    mut loss: F,
) -> Result<f64>
where
    F: FnMut(&Network) -> f64,
{
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::Usage(format!(
            "finite-difference epsilon {epsilon} outside [1e-7, 1e-3]"
        )));
    }
    let n_params = net.params().len();
    if analytic.len() != n_params {
        return Err(Error::Usage(format!(
            "expected {n_params} analytic gradients, got {}",
            analytic.len()
        )));
    }
    let mut max_rel = 0.0f64;
    for pi in 0..n_params {
        let len = net.params()[pi].data.len();
        if !(analytic[pi].is_empty() || analytic[pi].len() == len) {
            return Err(Error::Usage(format!("analytic gradient {pi} has the wrong length")));
        }
        for i in 0..len {
            let orig = net.params()[pi].data[i];
            net.params_mut()[pi].data[i] = orig + epsilon;
            let up = loss(net);
            net.params_mut()[pi].data[i] = orig - epsilon;
            let down = loss(net);
            net.params_mut()[pi].data[i] = orig;
            let fd = (up - down) / (2.0 * epsilon);
            if !fd.is_finite() {
                return Err(Error::Numeric("non-finite finite-difference quotient".into()));
            }
            let a = if analytic[pi].is_empty() { 0.0 } else { analytic[pi][i] };
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-4);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    Ok(max_rel)
}

/// Convenience: snapshot the current `.grad` buffers in parameter order.
pub fn grad_snapshot(net: &Network) -> Vec<Vec<f64>> {
    net.params().iter().map(|p| p.grad.clone().unwrap_or_default()).collect()
}
