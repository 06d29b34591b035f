//! Fully connected networks and the adaptive-moment optimizer used by
//! the learning stack. Parameters live in one flat vector per network so
//! optimizers, checkpoints and finite-difference checks share a layout.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::num;

/// Multilayer perceptron with rectifier hidden layers and a linear
/// output layer. Layer l maps `dims[l] → dims[l+1]`; weights are packed
/// row-major (output × input) followed by the bias, layer after layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    dims: Vec<usize>,
    params: Vec<f64>,
}

/// Forward activations retained for backpropagation: the input followed
/// by every layer's output (hidden layers post-rectifier).
#[derive(Debug, Clone)]
pub struct ForwardCache {
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("cache holds at least the input")
    }
}

impl Mlp {
    /// Xavier-uniform initialization, deterministic given the RNG.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "an MLP needs input and output dims");
        let mut params = Vec::with_capacity(Self::param_count(dims));
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let limit = num::sqrt(6.0 / (fan_in + fan_out) as f64);
            for _ in 0..fan_in * fan_out {
                params.push(rng.gen_range(-limit..limit));
            }
            for _ in 0..fan_out {
                params.push(0.0);
            }
        }
        Self {
            dims: dims.to_vec(),
            params,
        }
    }

    pub fn param_count(dims: &[usize]) -> usize {
        dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    /// Copies all parameters from `other` (used for target-net syncs).
    pub fn copy_from(&mut self, other: &Mlp) {
        debug_assert_eq!(self.dims, other.dims);
        self.params.copy_from_slice(&other.params);
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut cache = self.forward_cached(input);
        cache.acts.pop().unwrap()
    }

    pub fn forward_cached(&self, input: &[f64]) -> ForwardCache {
        debug_assert_eq!(input.len(), self.dims[0]);
        let layers = self.dims.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(input.to_vec());
        let mut offset = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let weights = &self.params[offset..offset + fan_in * fan_out];
            let biases =
                &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let prev = &acts[l];
            let mut out = vec![0.0; fan_out];
            for (j, o) in out.iter_mut().enumerate() {
                let row = &weights[j * fan_in..(j + 1) * fan_in];
                let mut acc = biases[j];
                for (w, x) in row.iter().zip(prev.iter()) {
                    acc += w * x;
                }
                *o = if l + 1 < layers { acc.max(0.0) } else { acc };
            }
            acts.push(out);
        }
        ForwardCache { acts }
    }

    /// Backpropagates `d loss / d output` through the cached forward
    /// pass, accumulating parameter gradients into `grad` (which must
    /// have `params().len()` entries).
    pub fn backward(&self, cache: &ForwardCache, dout: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        let layers = self.dims.len() - 1;
        debug_assert_eq!(dout.len(), self.dims[layers]);
        let mut offsets = Vec::with_capacity(layers);
        let mut offset = 0;
        for l in 0..layers {
            offsets.push(offset);
            offset += self.dims[l] * self.dims[l + 1] + self.dims[l + 1];
        }
        let mut delta = dout.to_vec();
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let base = offsets[l];
            let prev = &cache.acts[l];
            {
                let (wgrad, bgrad) = grad[base..base + fan_in * fan_out + fan_out]
                    .split_at_mut(fan_in * fan_out);
                for j in 0..fan_out {
                    let dj = delta[j];
                    if dj != 0.0 {
                        let row = &mut wgrad[j * fan_in..(j + 1) * fan_in];
                        for (g, x) in row.iter_mut().zip(prev.iter()) {
                            *g += dj * x;
                        }
                        bgrad[j] += dj;
                    }
                }
            }
            if l > 0 {
                let weights = &self.params[base..base + fan_in * fan_out];
                let mut next = vec![0.0; fan_in];
                for (j, &dj) in delta.iter().enumerate() {
                    if dj != 0.0 {
                        let row = &weights[j * fan_in..(j + 1) * fan_in];
                        for (n, w) in next.iter_mut().zip(row.iter()) {
                            *n += dj * w;
                        }
                    }
                }
                // Rectifier mask of the producing hidden layer.
                for (n, &a) in next.iter_mut().zip(prev.iter()) {
                    if a <= 0.0 {
                        *n = 0.0;
                    }
                }
                delta = next;
            }
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| num::exp(z - max)).collect();
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    out
}

/// Log-probabilities of a softmax over `logits`.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = num::ln(logits.iter().map(|&z| num::exp(z - max)).sum::<f64>()) + max;
    logits.iter().map(|&z| z - log_sum).collect()
}

/// Adaptive-moment estimation over a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(param_count: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), self.m.len());
        debug_assert_eq!(params.len(), grad.len());
        self.t += 1;
        let bc1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (num::sqrt(v_hat) + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn tiny_net_forward_matches_hand_computation() {
        // 2 → 2 → 1 with hand-set weights.
        let mut net = Mlp::new(&[2, 2, 1], &mut ChaCha12Rng::seed_from_u64(0));
        // Layer 0: W = [[1, -1], [0.5, 2]], b = [0, -1].
        // Layer 1: W = [[3, -2]], b = [0.25].
        net.params_mut()
            .copy_from_slice(&[1.0, -1.0, 0.5, 2.0, 0.0, -1.0, 3.0, -2.0, 0.25]);
        let out = net.forward(&[2.0, 1.0]);
        // Hidden: relu([2-1, 1+2-1]) = [1, 2]; out = 3·1 - 2·2 + 0.25.
        assert!((out[0] - (-0.75)).abs() < 1e-15);
    }

    #[test]
    fn backward_matches_central_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..5 {
            let net = Mlp::new(&[4, 8, 3], &mut rng);
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let target: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            // loss = 0.5·Σ (out − target)².
            let loss_of = |net: &Mlp| {
                let out = net.forward(&x);
                0.5 * out
                    .iter()
                    .zip(target.iter())
                    .map(|(o, t)| (o - t) * (o - t))
                    .sum::<f64>()
            };
            let cache = net.forward_cached(&x);
            let dout: Vec<f64> = cache
                .output()
                .iter()
                .zip(target.iter())
                .map(|(o, t)| o - t)
                .collect();
            let mut grad = vec![0.0; net.params().len()];
            net.backward(&cache, &dout, &mut grad);

            let mut perturbed = net.clone();
            for i in 0..net.params().len() {
                let h = 1e-6 * net.params()[i].abs().max(1.0);
                let orig = net.params()[i];
                perturbed.params_mut()[i] = orig + h;
                let up = loss_of(&perturbed);
                perturbed.params_mut()[i] = orig - h;
                let down = loss_of(&perturbed);
                perturbed.params_mut()[i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let denom = numeric.abs().max(grad[i].abs()).max(1e-8);
                assert!(
                    (numeric - grad[i]).abs() / denom < 1e-4,
                    "param {i}: analytic {} vs numeric {numeric}",
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn softmax_is_normalized_and_shift_invariant() {
        let logits = [1.0, -2.0, 0.5, 3.0];
        let p = softmax(&logits);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = logits.iter().map(|z| z + 100.0).collect();
        let q = softmax(&shifted);
        for (a, b) in p.iter().zip(q.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let lp = log_softmax(&logits);
        for (a, b) in p.iter().zip(lp.iter()) {
            assert!((a.ln() - b).abs() < 1e-12);
        }
    }

    #[test]
    fn adam_descends_a_quadratic() {
        let mut params = vec![5.0, -3.0, 2.0];
        let mut opt = Adam::new(3, 0.05);
        let loss = |p: &[f64]| p.iter().map(|x| x * x).sum::<f64>();
        let start = loss(&params);
        for _ in 0..500 {
            let grad: Vec<f64> = params.iter().map(|x| 2.0 * x).collect();
            opt.step(&mut params, &grad);
        }
        assert!(loss(&params) < 1e-3 * start);
    }

    #[test]
    fn adam_with_zero_gradient_keeps_parameters() {
        let mut params = vec![1.0, 2.0];
        let mut opt = Adam::new(2, 0.1);
        opt.step(&mut params, &[0.0, 0.0]);
        assert_eq!(params, vec![1.0, 2.0]);
    }

    #[test]
    fn param_count_matches_layout() {
        assert_eq!(Mlp::param_count(&[3, 5, 2]), 3 * 5 + 5 + 5 * 2 + 2);
        let net = Mlp::new(&[3, 5, 2], &mut ChaCha12Rng::seed_from_u64(2));
        assert_eq!(net.params().len(), Mlp::param_count(&[3, 5, 2]));
    }
}
