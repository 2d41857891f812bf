//! Spherical embedding used to pick merge partners: strongly coupled vertices
//! are pulled together by minimizing `Σ |a_ij| · ‖x_i - x_j‖₂` over unit
//! vectors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::graph::LevelGraph;

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    dim: usize,
    coords: Vec<f64>,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.position(i)
            .iter()
            .zip(self.position(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `Σ_{i<j} |a_ij| ‖x_i - x_j‖`.
    pub fn objective(&self, graph: &LevelGraph) -> f64 {
        let mut total = 0.0;
        for i in 0..graph.n() {
            for &(j, w) in graph.neighbors(i) {
                if i < j {
                    total += w.abs() * self.distance(i, j);
                }
            }
        }
        total
    }
}

/// Seeded uniform start on the unit sphere followed by `iters` rounds of
/// projected descent with renormalization. The gradient is divided by the
/// largest weighted degree, so `step` is independent of the weight scale and
/// the most strongly tied vertex moves at most `step` per round. The best iterate is
/// returned, so the objective never exceeds its starting value.
pub fn embed(graph: &LevelGraph, dim: usize, seed: u64, iters: usize, step: f64) -> Embedding {
    assert!(dim >= 2, "embedding dimension must be at least 2");
    let n = graph.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = vec![0.0; n * dim];
    for x in coords.chunks_mut(dim) {
        loop {
            for v in x.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            if normalize(x) {
                break;
            }
        }
    }
    let mut emb = Embedding { dim, coords };
    let mut best = emb.clone();
    let mut best_obj = emb.objective(graph);
    let degree: Vec<f64> = (0..n)
        .map(|i| graph.neighbors(i).iter().map(|&(_, w)| w.abs()).sum())
        .collect();
    let max_degree = degree.iter().copied().fold(0.0, f64::max);
    let mut grad = vec![0.0; n * dim];
    for _ in 0..iters {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..n {
            for &(j, w) in graph.neighbors(i) {
                let d = emb.distance(i, j);
                if d < 1e-12 || w == 0.0 {
                    continue;
                }
                let scale = w.abs() / d;
                for k in 0..dim {
                    grad[i * dim + k] += scale * (emb.coords[i * dim + k] - emb.coords[j * dim + k]);
                }
            }
        }
        for i in 0..n {
            if degree[i] == 0.0 {
                continue;
            }
            let x = &mut emb.coords[i * dim..(i + 1) * dim];
            let before: Vec<f64> = x.to_vec();
            for (v, g) in x.iter_mut().zip(&grad[i * dim..(i + 1) * dim]) {
                *v -= step * g / max_degree;
            }
            if !normalize(x) {
                x.copy_from_slice(&before);
            }
        }
        let obj = emb.objective(graph);
        if obj < best_obj {
            best_obj = obj;
            best = emb.clone();
        }
    }
    best
}

fn normalize(x: &mut [f64]) -> bool {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= norm);
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn unit_norms(e: &Embedding) -> bool {
        (0..e.len()).all(|i| {
            let n: f64 = e.position(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            (n - 1.0).abs() < 1e-9
        })
    }

    #[test]
    fn single_edge_pulls_together() {
        let g = LevelGraph::from_dense(&Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]])).unwrap();
        let start = embed(&g, 8, 3, 0, 0.05);
        let end = embed(&g, 8, 3, 50, 0.05);
        assert!(end.distance(0, 1) < start.distance(0, 1));
        assert!(unit_norms(&end));
    }

    #[test]
    fn zero_weights_do_not_move() {
        let g = LevelGraph::from_dense(&Matrix::zeros(4, 4)).unwrap();
        assert_eq!(embed(&g, 8, 9, 0, 0.05), embed(&g, 8, 9, 50, 0.05));
    }

    #[test]
    fn dominant_edge_becomes_closest_pair() {
        let a = Matrix::from_rows(&[[0.0, 5.0, 0.5], [5.0, 0.0, 0.4], [0.5, 0.4, 0.0]]);
        let g = LevelGraph::from_dense(&a).unwrap();
        let hits = (0..20)
            .filter(|&seed| {
                let e = embed(&g, 8, seed, 50, 0.05);
                let d01 = e.distance(0, 1);
                d01 < e.distance(0, 2) && d01 < e.distance(1, 2)
            })
            .count();
        assert!(hits >= 18, "dominant pair closest in only {hits}/20 seeds");
    }

    #[test]
    fn objective_never_increases() {
        let n = 12;
        let a = Matrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                (((i * 7 + j * 7 + i * j) % 11) as f64 - 5.0) / 5.0
            }
        });
        let g = LevelGraph::from_dense(&a).unwrap();
        for seed in 0..5 {
            let s = embed(&g, 8, seed, 0, 0.05).objective(&g);
            let e = embed(&g, 8, seed, 50, 0.05);
            assert!(e.objective(&g) <= s);
            assert!(unit_norms(&e));
        }
    }
}
