//! Gray-code enumeration of every free spin configuration.

use super::solver::{FoldedProblem, SolverConfig};
use crate::exec::map_indexed;
use crate::{Error, Result};

/// Low bits enumerated inside one chunk; the remaining high bits index chunks.
const CHUNK_BITS: usize = 14;

pub(crate) fn minimize(problem: &FoldedProblem, cfg: &SolverConfig) -> Result<Vec<i8>> {
    let n = problem.n();
    if n > cfg.max_vars_exhaustive {
        return Err(Error::TooManyVariables {
            vars: n,
            cap: cfg.max_vars_exhaustive,
        });
    }
    let mut coupling = vec![0.0; n * n];
    for &(a, b, w) in &problem.quadratic {
        coupling[a * n + b] += w;
        coupling[b * n + a] += w;
    }
    let low = n.min(CHUNK_BITS);
    let high = n - low;
    let chunks = map_indexed(1usize << high, cfg.parallel, |c| {
        let spins = best_in_chunk(problem, &coupling, low, c);
        let e = problem.energy(&spins);
        (e, spins)
    });
    // Strict comparison keeps the lowest chunk index on ties.
    let mut best = None::<(f64, Vec<i8>)>;
    for (e, s) in chunks {
        if best.as_ref().map_or(true, |(be, _)| e < *be) {
            best = Some((e, s));
        }
    }
    Ok(best.expect("at least one chunk").1)
}

fn spin_of(bit: u64) -> i8 {
    if bit == 1 {
        1
    } else {
        -1
    }
}

/// Fixes the high bits to `chunk` and walks the low bits in Gray-code order,
/// tracking local fields `L_i = h_i + Σ_j J_ij s_j` so each step costs O(n).
fn best_in_chunk(problem: &FoldedProblem, coupling: &[f64], low: usize, chunk: usize) -> Vec<i8> {
    let n = problem.n();
    let mut spins: Vec<i8> = (0..n)
        .map(|i| {
            if i < low {
                -1
            } else {
                spin_of((chunk as u64 >> (i - low)) & 1)
            }
        })
        .collect();
    let mut local: Vec<f64> = (0..n)
        .map(|i| {
            problem.linear[i]
                + (0..n)
                    .map(|j| coupling[i * n + j] * f64::from(spins[j]))
                    .sum::<f64>()
        })
        .collect();
    let mut energy = problem.energy(&spins);
    let mut best_energy = energy;
    let mut best_step = 0u64;
    for step in 1..(1u64 << low) {
        let i = step.trailing_zeros() as usize;
        let s = spins[i];
        energy += 2.0 * f64::from(s) * local[i];
        spins[i] = -s;
        let delta = -2.0 * f64::from(s);
        let row = &coupling[i * n..(i + 1) * n];
        for (l, &w) in local.iter_mut().zip(row) {
            *l += w * delta;
        }
        if energy < best_energy {
            best_energy = energy;
            best_step = step;
        }
    }
    let gray = best_step ^ (best_step >> 1);
    for (i, s) in spins.iter_mut().enumerate().take(low) {
        *s = spin_of((gray >> i) & 1);
    }
    spins
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutnorm::{solve, CouplingProblem};

    #[test]
    fn aligned_pair() {
        let mut p = CouplingProblem::new(2);
        p.add_coupling(0, 1, 1.0).unwrap();
        let a = solve(&p, &SolverConfig::exhaustive()).unwrap();
        assert_eq!(a.energy, -1.0);
        assert_eq!(a.spins[0], a.spins[1]);
    }

    #[test]
    fn pinned_pair_follows_pin() {
        let mut p = CouplingProblem::new(2);
        p.add_coupling(0, 1, 1.0).unwrap();
        p.pin(0, 1).unwrap();
        let a = solve(&p, &SolverConfig::exhaustive()).unwrap();
        assert_eq!(a.spins, vec![1, 1]);
    }

    #[test]
    fn refuses_over_cap() {
        let p = CouplingProblem::new(5);
        let cfg = SolverConfig {
            max_vars_exhaustive: 4,
            ..SolverConfig::exhaustive()
        };
        assert!(matches!(
            solve(&p, &cfg),
            Err(Error::TooManyVariables { vars: 5, cap: 4 })
        ));
    }

    #[test]
    fn chunked_matches_single_chunk() {
        // 17 variables forces 8 chunks.
        let mut p = CouplingProblem::new(17);
        let mut x = 0.37f64;
        for i in 0..17 {
            for j in (i + 1)..17 {
                x = (x * 3.7 + 0.13).fract();
                if x < 0.4 {
                    p.add_coupling(i, j, x - 0.2).unwrap();
                }
            }
            p.set_field(i, (x - 0.5) * 0.1).unwrap();
        }
        let par = solve(&p, &SolverConfig::exhaustive()).unwrap();
        let seq = solve(
            &p,
            &SolverConfig {
                parallel: false,
                ..SolverConfig::exhaustive()
            },
        )
        .unwrap();
        assert_eq!(par, seq);
    }
}
