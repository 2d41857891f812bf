//! Metropolis simulated annealing with a geometric inverse-temperature
//! schedule and independent restarts.
//!
//! Temperatures are applied to energies measured in units of the largest
//! absolute coefficient, so the default schedule works regardless of the
//! weight scale of the network being analysed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::solver::{FoldedProblem, SolverConfig};
use crate::exec::{derive_seed, map_indexed};

pub(crate) fn minimize(problem: &FoldedProblem, cfg: &SolverConfig) -> Vec<i8> {
    let adj = problem.adjacency();
    let scale = problem.max_coefficient();
    let reads = map_indexed(cfg.num_reads, cfg.parallel, |r| {
        let spins = anneal_once(problem, &adj, scale, cfg, derive_seed(cfg.seed, r as u64));
        (problem.energy(&spins), spins)
    });
    best_of(reads)
}

/// Lowest energy wins; ties go to the earliest read so results only depend on
/// the read prefix.
fn best_of(reads: Vec<(f64, Vec<i8>)>) -> Vec<i8> {
    let mut best = None::<(f64, Vec<i8>)>;
    for (e, s) in reads {
        if best.as_ref().map_or(true, |(be, _)| e < *be) {
            best = Some((e, s));
        }
    }
    best.expect("num_reads >= 1").1
}

fn beta_at(cfg: &SolverConfig, sweep: usize) -> f64 {
    if cfg.sweeps <= 1 {
        return cfg.beta_max;
    }
    let t = sweep as f64 / (cfg.sweeps - 1) as f64;
    cfg.beta_min * (cfg.beta_max / cfg.beta_min).powf(t)
}

fn anneal_once(
    problem: &FoldedProblem,
    adj: &[Vec<(usize, f64)>],
    scale: f64,
    cfg: &SolverConfig,
    seed: u64,
) -> Vec<i8> {
    let n = problem.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spins: Vec<i8> = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
    if scale == 0.0 {
        return spins;
    }
    let mut local = local_fields(problem, adj, &spins);
    for sweep in 0..cfg.sweeps {
        let beta = beta_at(cfg, sweep) / scale;
        for i in 0..n {
            let delta = 2.0 * f64::from(spins[i]) * local[i];
            // Ties are accepted so plateaus can be crossed.
            if delta <= 0.0 || rng.gen::<f64>() < (-beta * delta).exp() {
                flip(&mut spins, &mut local, adj, i);
            }
        }
    }
    quench(&mut spins, &mut local, adj);
    spins
}

pub(crate) fn local_fields(
    problem: &FoldedProblem,
    adj: &[Vec<(usize, f64)>],
    spins: &[i8],
) -> Vec<f64> {
    adj.iter()
        .zip(&problem.linear)
        .map(|(nbrs, h)| h + nbrs.iter().map(|&(j, w)| w * f64::from(spins[j])).sum::<f64>())
        .collect()
}

fn flip(spins: &mut [i8], local: &mut [f64], adj: &[Vec<(usize, f64)>], i: usize) {
    spins[i] = -spins[i];
    let delta = 2.0 * f64::from(spins[i]);
    for &(j, w) in &adj[i] {
        local[j] += w * delta;
    }
}

/// Zero-temperature sweeps until no single flip strictly lowers the energy.
fn quench(spins: &mut [i8], local: &mut [f64], adj: &[Vec<(usize, f64)>]) {
    loop {
        let mut improved = false;
        for i in 0..spins.len() {
            if 2.0 * f64::from(spins[i]) * local[i] < -1e-12 {
                flip(spins, local, adj, i);
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
}
