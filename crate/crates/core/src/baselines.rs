//! Reference estimators: the norm-product upper bound, gradient sampling (a
//! lower bound) and exhaustive activation-pattern enumeration (exact FGL).

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::estimate::{BoundKind, Estimate};
use crate::exec::{derive_seed, map_indexed};
use crate::matrix::Matrix;
use crate::netio::Network;
use crate::{Error, Result};

pub const DEFAULT_BF_CAP: usize = 22;

/// Samples drawn from one independently seeded stream.
const SAMPLE_CHUNK: usize = 2048;

/// `‖u‖₁ · Π_{ℓ<d} ‖W^ℓ‖_{∞→∞}` with `u` the class row of the last layer.
pub fn mp_bound(net: &Network, class_index: usize) -> Result<Estimate> {
    let start = Instant::now();
    let u = net.class_row(class_index)?;
    let mut value: f64 = u.iter().map(|v| v.abs()).sum();
    for l in 0..net.depth() - 1 {
        value *= net.weights(l).norm_inf_inf();
    }
    Ok(Estimate::new("mp", value, BoundKind::Upper)
        .with_digest(&("mp", class_index))
        .with_time(start))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub num_samples: usize,
    pub domain_low: f64,
    pub domain_high: f64,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub parallel: bool,
}

fn default_true() -> bool {
    true
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            num_samples: 200_000,
            domain_low: 0.0,
            domain_high: 1.0,
            seed: 0,
            parallel: true,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.domain_low < self.domain_high) {
            return Err(Error::invalid(format!(
                "sampling box needs low < high, got [{}, {}]",
                self.domain_low, self.domain_high
            )));
        }
        if self.num_samples == 0 {
            return Err(Error::invalid("num_samples must be at least 1"));
        }
        Ok(())
    }
}

/// `‖∇f(x)‖₁` for the class output at input `x`, with `D = 1{z > 0}` (a
/// pre-activation of exactly zero counts as inactive). Biases are ignored.
pub fn gradient_l1(net: &Network, class_row: &[f64], x: &[f64]) -> f64 {
    let depth = net.depth();
    let mut masks: Vec<Vec<bool>> = Vec::with_capacity(depth - 1);
    let mut a = x.to_vec();
    for l in 0..depth - 1 {
        let z = net.weights(l).mul_vec(&a);
        masks.push(z.iter().map(|&v| v > 0.0).collect());
        a = z.into_iter().map(|v| v.max(0.0)).collect();
    }
    let mut g = class_row.to_vec();
    for l in (0..depth - 1).rev() {
        for (gk, &on) in g.iter_mut().zip(&masks[l]) {
            if !on {
                *gk = 0.0;
            }
        }
        g = net.weights(l).left_mul(&g);
    }
    g.iter().map(|v| v.abs()).sum()
}

/// Largest gradient ℓ1 norm over uniform samples from the input box. Sample
/// `i` comes from chunk `i / 2048`, whose stream is seeded from `(seed, chunk)`,
/// so the result is a running max over a fixed sequence whatever the thread
/// count or total budget.
pub fn sampling_lower_bound(
    net: &Network,
    class_index: usize,
    cfg: &SamplingConfig,
) -> Result<Estimate> {
    cfg.validate()?;
    let start = Instant::now();
    let u = net.class_row(class_index)?;
    let n = net.input_dim();
    let chunks = cfg.num_samples.div_ceil(SAMPLE_CHUNK);
    let maxima = map_indexed(chunks, cfg.parallel, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, c as u64));
        let count = SAMPLE_CHUNK.min(cfg.num_samples - c * SAMPLE_CHUNK);
        let mut x = vec![0.0; n];
        let mut best = 0.0f64;
        for _ in 0..count {
            for xi in x.iter_mut() {
                *xi = rng.gen_range(cfg.domain_low..cfg.domain_high);
            }
            best = best.max(gradient_l1(net, &u, &x));
        }
        best
    });
    let value = maxima.into_iter().fold(0.0, f64::max);
    let mut est = Estimate::new("sample", value, BoundKind::Lower)
        .with_digest(cfg)
        .with_time(start);
    est.solver_stats.reads = cfg.num_samples as u64;
    Ok(est)
}

/// Exact FGL: max over all `2^H` joint activation patterns of
/// `‖u D_{d-1} W^{d-1} ⋯ D_1 W^1‖₁`. Refuses when `H > cap`.
pub fn brute_force_fgl(net: &Network, class_index: usize, cap: usize) -> Result<Estimate> {
    let start = Instant::now();
    let u = net.class_row(class_index)?;
    let hidden: usize = net.hidden_widths().iter().sum();
    if hidden > cap {
        return Err(Error::OverCap { hidden, cap });
    }
    let value = brute_force_value(net, &u, true);
    let mut est = Estimate::new("bf", value, BoundKind::Exact)
        .with_digest(&("bf", class_index, cap))
        .with_time(start);
    est.solver_stats.iterations = 1u64 << hidden;
    Ok(est)
}

/// Pattern enumeration without the cap check. The top hidden layer is split
/// into independently enumerated chunks.
pub(crate) fn brute_force_value(net: &Network, class_row: &[f64], parallel: bool) -> f64 {
    let depth = net.depth();
    if depth == 1 {
        return class_row.iter().map(|v| v.abs()).sum();
    }
    let top = depth - 2;
    let width = net.weights(top).rows();
    let high_bits = width.min(6);
    let low_bits = width - high_bits;
    let maxima = map_indexed(1 << high_bits, parallel, |chunk| {
        let mut best = 0.0f64;
        gray_walk(net.weights(top), class_row, low_bits, chunk as u64, |s| {
            let v = if top == 0 {
                s.iter().map(|v| v.abs()).sum()
            } else {
                layer_max(net, top - 1, s)
            };
            best = best.max(v);
        });
        best
    });
    maxima.into_iter().fold(0.0, f64::max)
}

/// Best value when the hidden layer produced by weight matrix `layer` and
/// everything below it are enumerated; `g` is the row arriving from above.
fn layer_max(net: &Network, layer: usize, g: &[f64]) -> f64 {
    let mut best = 0.0f64;
    gray_walk(net.weights(layer), g, g.len(), 0, |s| {
        let v = if layer == 0 {
            s.iter().map(|v| v.abs()).sum()
        } else {
            layer_max(net, layer - 1, s)
        };
        best = best.max(v);
    });
    best
}

/// Visits `s = Σ_k D_k g_k W[k,:]` for every mask `D` whose bits at or above
/// `low_bits` equal `high`, in Gray-code order over the low bits.
fn gray_walk(w: &Matrix, g: &[f64], low_bits: usize, high: u64, mut visit: impl FnMut(&[f64])) {
    let h = g.len();
    let mut on = vec![false; h];
    let mut s = vec![0.0; w.cols()];
    for (k, flag) in on.iter_mut().enumerate().skip(low_bits) {
        if (high >> (k - low_bits)) & 1 == 1 {
            *flag = true;
            axpy(&mut s, g[k], w.row(k));
        }
    }
    visit(&s);
    for step in 1u64..(1u64 << low_bits) {
        let k = step.trailing_zeros() as usize;
        on[k] = !on[k];
        let coef = if on[k] { g[k] } else { -g[k] };
        axpy(&mut s, coef, w.row(k));
        visit(&s);
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    if a == 0.0 {
        return;
    }
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netio::generate_synthetic;

    fn tiny() -> Network {
        Network::from_matrices(vec![
            Matrix::from_rows(&[[1.0], [-1.0]]),
            Matrix::from_rows(&[[1.0, 1.0]]),
        ])
        .unwrap()
    }

    #[test]
    fn tiny_net_values() {
        let net = tiny();
        assert_eq!(mp_bound(&net, 0).unwrap().value, 2.0);
        assert_eq!(brute_force_fgl(&net, 0, 22).unwrap().value, 1.0);
        assert!(mp_bound(&net, 1).is_err());
    }

    #[test]
    fn identity_layers_unit_class() {
        let net = Network::from_matrices(vec![
            Matrix::identity(3),
            Matrix::identity(3),
            Matrix::identity(3),
        ])
        .unwrap();
        assert_eq!(mp_bound(&net, 0).unwrap().value, 1.0);
        assert_eq!(brute_force_fgl(&net, 0, 22).unwrap().value, 1.0);
    }

    #[test]
    fn linear_net_sampling_is_class_l1() {
        let net = Network::from_matrices(vec![Matrix::from_rows(&[[0.5, -1.5, 2.0]])]).unwrap();
        for samples in [1, 10, 5000] {
            let cfg = SamplingConfig {
                num_samples: samples,
                ..Default::default()
            };
            assert_eq!(sampling_lower_bound(&net, 0, &cfg).unwrap().value, 4.0);
        }
    }

    #[test]
    fn sampling_prefix_monotone() {
        let net = generate_synthetic(4, &[6, 8, 3], 1.0).unwrap();
        let run = |n| {
            sampling_lower_bound(
                &net,
                1,
                &SamplingConfig {
                    num_samples: n,
                    seed: 9,
                    ..Default::default()
                },
            )
            .unwrap()
            .value
        };
        let (a, b, c) = (run(1), run(3000), run(10_000));
        assert!(a <= b && b <= c);
    }

    #[test]
    fn sampling_parallel_matches_sequential() {
        let net = generate_synthetic(5, &[5, 7, 7, 2], 1.0).unwrap();
        let par = SamplingConfig {
            num_samples: 9000,
            seed: 3,
            ..Default::default()
        };
        let seq = SamplingConfig {
            parallel: false,
            ..par.clone()
        };
        assert_eq!(
            sampling_lower_bound(&net, 0, &par).unwrap().value,
            sampling_lower_bound(&net, 0, &seq).unwrap().value
        );
    }

    #[test]
    fn sampling_config_checked() {
        let net = tiny();
        let cfg = SamplingConfig {
            domain_low: 1.0,
            domain_high: 1.0,
            ..Default::default()
        };
        assert!(sampling_lower_bound(&net, 0, &cfg).is_err());
    }

    #[test]
    fn all_positive_weights_use_all_ones_pattern() {
        let w1 = Matrix::from_rows(&[[1.0, 2.0], [0.5, 0.25], [3.0, 1.0]]);
        let w2 = Matrix::from_rows(&[[1.0, 1.0, 2.0]]);
        let net = Network::from_matrices(vec![w1.clone(), w2.clone()]).unwrap();
        let full: f64 = w2.matmul(&w1).as_slice().iter().sum();
        assert_eq!(brute_force_fgl(&net, 0, 22).unwrap().value, full);
    }

    #[test]
    fn over_cap_refuses_with_required_cap() {
        let net = generate_synthetic(1, &[3, 30, 1], 1.0).unwrap();
        match brute_force_fgl(&net, 0, 22) {
            Err(Error::OverCap { hidden, cap }) => assert_eq!((hidden, cap), (30, 22)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn chunked_enumeration_agrees() {
        let net = generate_synthetic(11, &[4, 9, 5, 2], 1.0).unwrap();
        let u = net.class_row(1).unwrap();
        assert_eq!(brute_force_value(&net, &u, true), brute_force_value(&net, &u, false));
    }
}
