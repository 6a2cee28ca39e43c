//! Executable checks of how spectral normalization reshapes bias-free ReLU
//! networks.
//!
//! Dividing each weight in a subset of layers by its largest singular value
//! multiplies every pre-activation, the output, and (with the divisors held
//! constant during differentiation) every layer's weight gradient by the same
//! positive constant: the inverse product of the divisors. Positive
//! homogeneity of ReLU makes this exact, so activation sign patterns are
//! preserved and gradient directions are untouched. Both facts fail once bias
//! terms enter, and the module can search out a concrete biased
//! counterexample. A deliberately wrong gradient path that differentiates
//! through the singular-value estimate is included as a negative control.

use crate::nn::uniform_fanin;
use crate::spectral::{
    converged_power_iteration, power_iteration_step, sigma_gradient, SnMode, SpectralState,
};
use crate::tensor::Tensor2;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Inputs leaving any pre-activation this close to zero are rejected: a ReLU
/// gate that could flip under rounding invalidates the exact-law comparison.
pub const KINK_TOLERANCE: f64 = 1e-8;

/// Extra power-iteration steps past stagnation. The stagnation stop leaves
/// the singular vector with a direction error whose square bounds the sigma
/// error; everything downstream that is first-order in the direction (the
/// sigma gradient, finite differences of sigma) needs the polish.
const POLISH_STEPS: usize = 3000;

fn polished_state(weight: &Tensor2, layer_index: usize) -> Result<SpectralState> {
    let mut st = SpectralState::new(weight.cols, SnMode::Plain, layer_index);
    converged_power_iteration(weight, &mut st)?;
    for _ in 0..POLISH_STEPS {
        power_iteration_step(weight, &mut st)?;
    }
    Ok(st)
}

/// Multilayer perceptron with no bias terms: ReLU after every layer except
/// the last, which stays linear. `normalized[l]` marks layer `l` as
/// spectrally normalized; its divisor is the converged largest singular
/// value, and unnormalized layers keep divisor 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasFreeMlp {
    pub weights: Vec<Tensor2>,
    pub normalized: Vec<bool>,
    pub divisors: Vec<f64>,
}

impl BiasFreeMlp {
    pub fn new(weights: Vec<Tensor2>, normalized: Vec<bool>) -> Result<BiasFreeMlp> {
        if weights.is_empty() {
            return Err(Error::Config("a network needs at least one layer".into()));
        }
        if normalized.len() != weights.len() {
            return Err(Error::Config(format!(
                "normalization flags ({}) must match layer count ({})",
                normalized.len(),
                weights.len()
            )));
        }
        for pair in weights.windows(2) {
            if pair[1].cols != pair[0].rows {
                return Err(Error::Config(format!(
                    "layer shapes do not chain: {}x{} feeds {}x{}",
                    pair[0].rows, pair[0].cols, pair[1].rows, pair[1].cols
                )));
            }
        }
        let mut divisors = vec![1.0; weights.len()];
        for (l, w) in weights.iter().enumerate() {
            if normalized[l] {
                let sigma = polished_state(w, l)?.sigma_hat;
                if !(sigma > 0.0) {
                    return Err(Error::Config(format!(
                        "layer {l} has zero spectral norm and cannot be normalized"
                    )));
                }
                divisors[l] = sigma;
            }
        }
        Ok(BiasFreeMlp { weights, normalized, divisors })
    }

    pub fn random<R: Rng>(rng: &mut R, dims: &[usize], normalized: Vec<bool>) -> Result<BiasFreeMlp> {
        if dims.len() < 2 {
            return Err(Error::Config("need an input and an output dimension".into()));
        }
        let weights = dims
            .windows(2)
            .map(|d| uniform_fanin(rng, d[1], d[0], std::f64::consts::SQRT_2))
            .collect();
        BiasFreeMlp::new(weights, normalized)
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn in_dim(&self) -> usize {
        self.weights[0].cols
    }

    pub fn out_dim(&self) -> usize {
        self.weights.last().unwrap().rows
    }

    /// Predicted uniform factor: the inverse product of the divisors of the
    /// normalized layers.
    pub fn predicted_ratio(&self) -> f64 {
        self.divisors
            .iter()
            .zip(&self.normalized)
            .filter(|(_, n)| **n)
            .map(|(d, _)| 1.0 / d)
            .product()
    }

    fn scale(&self, layer: usize, use_sn: bool) -> f64 {
        if use_sn && self.normalized[layer] {
            1.0 / self.divisors[layer]
        } else {
            1.0
        }
    }

    /// Pre-activations of every layer and the activations feeding each layer
    /// (`acts[l]` feeds layer `l`; `acts[0]` is the input).
    fn layerwise(&self, x: &[f64], use_sn: bool) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut pres = Vec::with_capacity(self.depth());
        let mut acts = Vec::with_capacity(self.depth() + 1);
        acts.push(x.to_vec());
        for (l, w) in self.weights.iter().enumerate() {
            let mut z = vec![0.0; w.rows];
            w.matvec_scaled(acts.last().unwrap(), &mut z, self.scale(l, use_sn));
            let a = if l + 1 < self.depth() {
                z.iter().map(|v| v.max(0.0)).collect()
            } else {
                z.clone()
            };
            pres.push(z);
            acts.push(a);
        }
        (pres, acts)
    }

    pub fn plain_output(&self, x: &[f64]) -> Vec<f64> {
        self.layerwise(x, false).0.pop().unwrap()
    }

    pub fn sn_output(&self, x: &[f64]) -> Vec<f64> {
        self.layerwise(x, true).0.pop().unwrap()
    }

    /// Gradients of the linear loss `c . output` with respect to each
    /// layer's EFFECTIVE weight (the divided matrix when normalized).
    fn effective_grads(&self, x: &[f64], c: &[f64], use_sn: bool) -> Vec<Tensor2> {
        assert_eq!(c.len(), self.out_dim(), "loss direction length != output dim");
        let (pres, acts) = self.layerwise(x, use_sn);
        let mut grads = vec![Tensor2::zeros(1, 1); self.depth()];
        let mut d = c.to_vec();
        for l in (0..self.depth()).rev() {
            let w = &self.weights[l];
            let mut g = Tensor2::zeros(w.rows, w.cols);
            for i in 0..w.rows {
                for j in 0..w.cols {
                    g.data[i * w.cols + j] = d[i] * acts[l][j];
                }
            }
            grads[l] = g;
            if l > 0 {
                let mut d_in = vec![0.0; w.cols];
                w.matvec_transpose_scaled(&d, &mut d_in, self.scale(l, use_sn));
                for (j, v) in d_in.iter_mut().enumerate() {
                    if !(pres[l - 1][j] > 0.0) {
                        *v = 0.0;
                    }
                }
                d = d_in;
            }
        }
        grads
    }

    pub fn plain_gradients(&self, x: &[f64], c: &[f64]) -> Vec<Tensor2> {
        self.effective_grads(x, c, false)
    }

    /// Gradients of the normalized network's loss with respect to the
    /// underlying weights, divisors held constant during differentiation.
    pub fn sn_gradients(&self, x: &[f64], c: &[f64]) -> Vec<Tensor2> {
        let mut grads = self.effective_grads(x, c, true);
        for (l, g) in grads.iter_mut().enumerate() {
            let s = self.scale(l, true);
            if s != 1.0 {
                for v in g.data.iter_mut() {
                    *v *= s;
                }
            }
        }
        grads
    }

    /// Negative control: the same gradients WITHOUT freezing the divisor, so
    /// the dependence of the singular value on the weights contributes a
    /// rank-one correction per normalized layer. This is the faulty update a
    /// missing stop-gradient would apply; it breaks the uniform scaling law.
    pub fn through_sigma_gradients(&self, x: &[f64], c: &[f64]) -> Result<Vec<Tensor2>> {
        let effective = self.effective_grads(x, c, true);
        let mut grads = Vec::with_capacity(self.depth());
        for (l, g_eff) in effective.into_iter().enumerate() {
            if !self.normalized[l] {
                grads.push(g_eff);
                continue;
            }
            let w = &self.weights[l];
            let s = 1.0 / self.divisors[l];
            let sig_grad = sigma_gradient(w, &polished_state(w, l)?)?;
            let inner: f64 = g_eff.data.iter().zip(&w.data).map(|(a, b)| a * b).sum();
            let mut g = Tensor2::zeros(w.rows, w.cols);
            for (idx, v) in g.data.iter_mut().enumerate() {
                *v = s * g_eff.data[idx] - s * s * inner * sig_grad.data[idx];
            }
            grads.push(g);
        }
        Ok(grads)
    }

    fn kink_distance(&self, x: &[f64]) -> f64 {
        let mut min = f64::INFINITY;
        for use_sn in [false, true] {
            for z in self.layerwise(x, use_sn).0 {
                for v in z {
                    min = min.min(v.abs());
                }
            }
        }
        min
    }
}

/// Outcome of one scaling-law measurement on one input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    /// Least-squares fit of (normalized gradient) / (plain gradient), per layer.
    pub layer_ratios: Vec<f64>,
    /// Inverse product of the divisors over the normalized layer set.
    pub predicted_ratio: f64,
    /// Worst entrywise relative deviation from the predicted uniform scaling,
    /// across every layer (normalized or not).
    pub max_rel_deviation: f64,
    /// Relative error of output-scaling: normalized output vs predicted
    /// multiple of the plain output.
    pub output_rel_error: f64,
    /// Whether plain and normalized pre-activation sign patterns agree on
    /// this input.
    pub sign_match: bool,
}

fn scaling_report(net: &BiasFreeMlp, x: &[f64], c: &[f64], stop_gradient: bool) -> Result<AnalysisReport> {
    if net.kink_distance(x) < KINK_TOLERANCE {
        return Err(Error::Usage(format!(
            "input sits within {KINK_TOLERANCE:e} of a ReLU kink; resample it"
        )));
    }
    let plain = net.plain_gradients(x, c);
    let scaled = if stop_gradient {
        net.sn_gradients(x, c)
    } else {
        net.through_sigma_gradients(x, c)?
    };
    let predicted = net.predicted_ratio();

    let mut layer_ratios = Vec::with_capacity(net.depth());
    let mut max_dev: f64 = 0.0;
    for (g, h) in plain.iter().zip(&scaled) {
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, b) in g.data.iter().zip(&h.data) {
            num += a * b;
            den += a * a;
            let expected = predicted * a;
            let dev = (b - expected).abs() / expected.abs().max(b.abs()).max(1e-12);
            max_dev = max_dev.max(dev);
        }
        layer_ratios.push(if den > 0.0 { num / den } else { 0.0 });
    }

    let z = net.plain_output(x);
    let zhat = net.sn_output(x);
    let mut out_err: f64 = 0.0;
    for (a, b) in z.iter().zip(&zhat) {
        let expected = predicted * a;
        out_err = out_err.max((b - expected).abs() / expected.abs().max(b.abs()).max(1e-12));
    }

    Ok(AnalysisReport {
        layer_ratios,
        predicted_ratio: predicted,
        max_rel_deviation: max_dev,
        output_rel_error: out_err,
        sign_match: sign_patterns_match(net, x),
    })
}

/// Verifies the uniform gradient-scaling law for a linear loss `c . output`
/// under stop-gradient semantics. Inputs near a ReLU kink are rejected with
/// a usage error so the caller can resample.
pub fn gradient_scaling_check(net: &BiasFreeMlp, x: &[f64], c: &[f64]) -> Result<AnalysisReport> {
    scaling_report(net, x, c, true)
}

/// The same measurement with the faulty through-sigma gradients, for use as
/// a negative control: the report's deviation should be far above tolerance.
pub fn gradient_scaling_check_through_sigma(
    net: &BiasFreeMlp,
    x: &[f64],
    c: &[f64],
) -> Result<AnalysisReport> {
    scaling_report(net, x, c, false)
}

fn sign_patterns_match(net: &BiasFreeMlp, x: &[f64]) -> bool {
    let (plain, _) = net.layerwise(x, false);
    let (scaled, _) = net.layerwise(x, true);
    plain
        .iter()
        .zip(&scaled)
        .all(|(zp, zs)| zp.iter().zip(zs).all(|(a, b)| (*a > 0.0) == (*b > 0.0)))
}

/// Checks, input by input, that plain and normalized pre-activation sign
/// patterns agree at every layer. Exact zeros count as "not positive" on
/// both sides.
pub fn sign_preservation_check(net: &BiasFreeMlp, inputs: &[Vec<f64>]) -> Vec<bool> {
    inputs.iter().map(|x| sign_patterns_match(net, x)).collect()
}

/// Draws inputs uniformly from [-1, 1]^d until one clears the kink margin.
pub fn kink_safe_input<R: Rng>(
    net: &BiasFreeMlp,
    rng: &mut R,
    margin: f64,
    tries: usize,
) -> Result<Vec<f64>> {
    for _ in 0..tries {
        let x: Vec<f64> = (0..net.in_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if net.kink_distance(&x) >= margin {
            return Ok(x);
        }
    }
    Err(Error::Numeric(format!(
        "no input cleared the kink margin {margin:e} in {tries} draws"
    )))
}

/// A biased ReLU network, input, and unit where normalization flips the
/// pre-activation sign pattern.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasedCounterexample {
    pub weights: Vec<Tensor2>,
    pub biases: Vec<Vec<f64>>,
    pub input: Vec<f64>,
    pub layer: usize,
    pub unit: usize,
    pub plain_pre: f64,
    pub sn_pre: f64,
    pub samples_used: usize,
}

/// Pre-activations of a biased ReLU net; biases are NOT divided when the
/// weights are normalized.
fn biased_pres(weights: &[Tensor2], biases: &[Vec<f64>], divisors: &[f64], x: &[f64]) -> Vec<Vec<f64>> {
    let mut pres = Vec::with_capacity(weights.len());
    let mut a = x.to_vec();
    for (l, w) in weights.iter().enumerate() {
        let mut z = vec![0.0; w.rows];
        w.matvec_scaled(&a, &mut z, 1.0 / divisors[l]);
        for (v, b) in z.iter_mut().zip(&biases[l]) {
            *v += b;
        }
        a = if l + 1 < weights.len() {
            z.iter().map(|v| v.max(0.0)).collect()
        } else {
            z.clone()
        };
        pres.push(z);
    }
    pres
}

/// First sign-pattern difference between the plain and fully normalized
/// evaluation of a biased net, if any.
pub fn biased_sign_flip(
    weights: &[Tensor2],
    biases: &[Vec<f64>],
    x: &[f64],
) -> Result<Option<(usize, usize, f64, f64)>> {
    let ones = vec![1.0; weights.len()];
    let mut divisors = Vec::with_capacity(weights.len());
    for (l, w) in weights.iter().enumerate() {
        let sigma = polished_state(w, l)?.sigma_hat;
        if !(sigma > 0.0) {
            return Err(Error::Config(format!("layer {l} has zero spectral norm")));
        }
        divisors.push(sigma);
    }
    let plain = biased_pres(weights, biases, &ones, x);
    let scaled = biased_pres(weights, biases, &divisors, x);
    for (l, (zp, zs)) in plain.iter().zip(&scaled).enumerate() {
        for (u, (a, b)) in zp.iter().zip(zs).enumerate() {
            if (*a > 0.0) != (*b > 0.0) {
                return Ok(Some((l, u, *a, *b)));
            }
        }
    }
    Ok(None)
}

/// Random search for a biased network and input whose sign pattern changes
/// under normalization. `bias_scale` 0 restricts the search to bias-free
/// nets, where the preservation law says nothing can ever be found; budget
/// exhaustion returns `None` rather than an error.
pub fn bias_counterexample_search<R: Rng>(
    widths: &[usize],
    rng: &mut R,
    budget: usize,
    bias_scale: f64,
) -> Result<Option<BiasedCounterexample>> {
    if widths.len() < 2 {
        return Err(Error::Config("need an input and an output dimension".into()));
    }
    for sample in 1..=budget {
        let weights: Vec<Tensor2> = widths
            .windows(2)
            .map(|d| {
                let data: Vec<f64> = (0..d[1] * d[0]).map(|_| rng.gen_range(-2.0..2.0)).collect();
                Tensor2::from_flat(d[1], d[0], data)
            })
            .collect();
        let biases: Vec<Vec<f64>> = widths[1..]
            .iter()
            .map(|w| (0..*w).map(|_| rng.gen_range(-1.0..1.0) * bias_scale).collect())
            .collect();
        let x: Vec<f64> = (0..widths[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if weights.iter().any(|w| w.frobenius_norm() == 0.0) {
            continue;
        }
        if let Some((layer, unit, plain_pre, sn_pre)) = biased_sign_flip(&weights, &biases, &x)? {
            return Ok(Some(BiasedCounterexample {
                weights,
                biases,
                input: x,
                layer,
                unit,
                plain_pre,
                sn_pre,
                samples_used: sample,
            }));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_chain() -> BiasFreeMlp {
        let w1 = Tensor2::from_flat(1, 1, vec![2.0]);
        let w2 = Tensor2::from_flat(1, 1, vec![3.0]);
        BiasFreeMlp::new(vec![w1, w2], vec![true, true]).unwrap()
    }

    #[test]
    fn worked_scalar_chain_matches_hand_derivation() {
        let net = scalar_chain();
        assert_eq!(net.divisors, vec![2.0, 3.0]);
        assert_eq!(net.predicted_ratio(), 1.0 / 6.0);

        let x = [1.0];
        let c = [1.0];
        assert_eq!(net.plain_output(&x), vec![6.0]);

        let plain = net.plain_gradients(&x, &c);
        assert_eq!(plain[0].data, vec![3.0]);
        assert_eq!(plain[1].data, vec![2.0]);

        let sn = net.sn_gradients(&x, &c);
        assert_eq!(sn[1].data, vec![1.0 / 3.0]);
        assert!((sn[0].data[0] - 0.5).abs() < 1e-15);

        let report = gradient_scaling_check(&net, &x, &c).unwrap();
        assert_eq!(report.predicted_ratio, 1.0 / 6.0);
        assert!(report.max_rel_deviation <= 1e-15);
        assert!(report.output_rel_error <= 1e-15);
        assert!(report.sign_match);
        for r in &report.layer_ratios {
            assert!((r - 1.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_normalized_set_gives_ratio_one_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let net = BiasFreeMlp::random(&mut rng, &[4, 6, 3], vec![false, false]).unwrap();
        let x = kink_safe_input(&net, &mut rng, 1e-4, 100).unwrap();
        let c = vec![1.0, -0.5, 0.25];
        let report = gradient_scaling_check(&net, &x, &c).unwrap();
        assert_eq!(report.predicted_ratio, 1.0);
        assert_eq!(report.max_rel_deviation, 0.0, "identical computations, bitwise");
        assert_eq!(report.output_rel_error, 0.0);
    }

    #[test]
    fn scaling_law_holds_for_random_nets_and_subsets() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let subsets: [&[bool]; 4] = [
            &[true, true, true],
            &[false, true, false],
            &[false, false, true],
            &[true, false, true],
        ];
        for (i, subset) in subsets.iter().enumerate() {
            let dims = [3 + i, 5, 4, 2];
            let net = BiasFreeMlp::random(&mut rng, &dims, subset.to_vec()).unwrap();
            for _ in 0..5 {
                let x = kink_safe_input(&net, &mut rng, 1e-4, 200).unwrap();
                let c: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let report = gradient_scaling_check(&net, &x, &c).unwrap();
                assert!(
                    report.max_rel_deviation < 1e-9,
                    "subset {i}: deviation {}",
                    report.max_rel_deviation
                );
                assert!(report.output_rel_error < 1e-10);
                assert!(report.sign_match);
            }
        }
    }

    #[test]
    fn through_sigma_control_breaks_the_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let net = BiasFreeMlp::random(&mut rng, &[3, 4, 1], vec![true, true]).unwrap();
        let x = kink_safe_input(&net, &mut rng, 1e-4, 200).unwrap();
        let c = [1.0];
        let good = gradient_scaling_check(&net, &x, &c).unwrap();
        let bad = gradient_scaling_check_through_sigma(&net, &x, &c).unwrap();
        assert!(good.max_rel_deviation < 1e-9);
        assert!(
            bad.max_rel_deviation > 1e-3,
            "missing stop-gradient must be detectable: {}",
            bad.max_rel_deviation
        );
    }

    #[test]
    fn through_sigma_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let net = BiasFreeMlp::random(&mut rng, &[2, 3, 1], vec![true, true]).unwrap();
        let x = kink_safe_input(&net, &mut rng, 1e-3, 500).unwrap();
        let c = [1.0];
        let analytic = net.through_sigma_gradients(&x, &c).unwrap();

        let eps = 1e-6;
        let loss = |weights: &[Tensor2]| -> f64 {
            let mut a = x.to_vec();
            for (l, w) in weights.iter().enumerate() {
                let sigma = polished_state(w, l).unwrap().sigma_hat;
                let mut z = vec![0.0; w.rows];
                w.matvec_scaled(&a, &mut z, 1.0 / sigma);
                a = if l + 1 < weights.len() {
                    z.iter().map(|v| v.max(0.0)).collect()
                } else {
                    z
                };
            }
            a[0]
        };
        for l in 0..net.depth() {
            for idx in 0..net.weights[l].data.len() {
                let mut plus = net.weights.clone();
                plus[l].data[idx] += eps;
                let mut minus = net.weights.clone();
                minus[l].data[idx] -= eps;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * eps);
                let a = analytic[l].data[idx];
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
                assert!(rel < 1e-5, "layer {l} entry {idx}: analytic {a} vs fd {fd}");
            }
        }
    }

    #[test]
    fn sign_preservation_holds_for_bias_free_nets() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for dims in [&[3, 8, 8, 1][..], &[5, 4, 2][..]] {
            let normalized = vec![true; dims.len() - 1];
            let net = BiasFreeMlp::random(&mut rng, dims, normalized).unwrap();
            let inputs: Vec<Vec<f64>> = (0..1000)
                .map(|_| (0..dims[0]).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            assert!(sign_preservation_check(&net, &inputs).iter().all(|ok| *ok));
        }
    }

    #[test]
    fn zero_input_patterns_trivially_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let net = BiasFreeMlp::random(&mut rng, &[4, 6, 2], vec![true, true]).unwrap();
        let checks = sign_preservation_check(&net, &[vec![0.0; 4]]);
        assert_eq!(checks, vec![true]);
    }

    #[test]
    fn hand_built_biased_cases_flip_sign() {
        let w = [Tensor2::from_flat(1, 1, vec![2.0])];
        let b = [vec![-1.0]];
        let flip = biased_sign_flip(&w, &b, &[1.0]).unwrap().unwrap();
        assert_eq!(flip.0, 0);
        assert_eq!(flip.2, 1.0, "plain pre-activation 2*1 - 1");
        assert_eq!(flip.3, 0.0, "normalized pre-activation 1*1 - 1, not positive");

        let w = [Tensor2::from_flat(1, 1, vec![4.0])];
        let b = [vec![-3.0]];
        let flip = biased_sign_flip(&w, &b, &[1.0]).unwrap().unwrap();
        assert_eq!(flip.2, 1.0);
        assert_eq!(flip.3, -2.0);
    }

    #[test]
    fn counterexample_search_needs_biases() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let found = bias_counterexample_search(&[2, 3, 2], &mut rng, 10_000, 1.0).unwrap();
        let ce = found.expect("a biased counterexample exists within the budget");
        assert!(ce.samples_used <= 10_000);
        assert!((ce.plain_pre > 0.0) != (ce.sn_pre > 0.0));
        let again = biased_sign_flip(&ce.weights, &ce.biases, &ce.input).unwrap();
        assert!(again.is_some(), "the returned counterexample reproduces");

        let none = bias_counterexample_search(&[2, 3, 2], &mut rng, 300, 0.0).unwrap();
        assert!(none.is_none(), "bias-free restriction must report not-found");
    }

    #[test]
    fn kink_proximity_is_rejected() {
        let net = BiasFreeMlp::new(
            vec![Tensor2::from_flat(1, 1, vec![1.0])],
            vec![false],
        )
        .unwrap();
        let err = gradient_scaling_check(&net, &[0.0], &[1.0]).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
        assert!(err.to_string().contains("kink"));
    }
}
