//! Projection of coarse solutions and gain-guided local re-optimization.

use serde::{Deserialize, Serialize};

use super::coarsen::Matching;
use super::graph::LevelGraph;
use crate::cutnorm::{solve, Backend, CouplingProblem, SolverConfig, SpinAssignment};
use crate::exec::derive_seed;
use crate::{Error, Result};

/// Strict-improvement threshold for accepting a refined sub-assignment.
pub const ACCEPT_EPS: f64 = 1e-12;

/// How refinement ranks vertices for re-optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    /// Largest `|gain|` first.
    #[default]
    Abs,
    /// Largest signed gain first.
    Signed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    /// Maximum number of free vertices in one subproblem.
    pub budget: usize,
    pub selection: Selection,
    /// Consecutive non-improving iterations before stopping.
    pub patience: usize,
    pub max_iters: usize,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub assignment: SpinAssignment,
    pub iterations: usize,
    /// Start energy followed by the energy after every accepted step.
    pub accepted: Vec<f64>,
}

/// Fine spins `s_i = s_{F(i)}`; energy recomputed on `fine`.
pub fn project(
    coarse: &SpinAssignment,
    matching: &Matching,
    fine: &LevelGraph,
) -> Result<SpinAssignment> {
    if coarse.spins.len() != matching.n_coarse {
        return Err(Error::invalid(format!(
            "coarse assignment has {} spins, matching has {} coarse vertices",
            coarse.spins.len(),
            matching.n_coarse
        )));
    }
    if fine.n() != matching.n_fine() {
        return Err(Error::invalid(format!(
            "fine graph has {} vertices, matching maps {}",
            fine.n(),
            matching.n_fine()
        )));
    }
    let spins: Vec<i8> = matching.map.iter().map(|&c| coarse.spins[c]).collect();
    let energy = fine.energy(&spins);
    Ok(SpinAssignment { spins, energy })
}

/// `gain(i) = s_i (Σ_j a_ij s_j + h_i)`, so flipping `i` changes the energy by
/// exactly `2 · gain(i)`.
pub fn gains(graph: &LevelGraph, spins: &[i8]) -> Result<Vec<f64>> {
    graph.check_spins(spins)?;
    Ok(gains_unchecked(graph, spins))
}

fn gains_unchecked(graph: &LevelGraph, spins: &[i8]) -> Vec<f64> {
    (0..graph.n())
        .map(|i| {
            let local: f64 = graph
                .neighbors(i)
                .iter()
                .map(|&(j, w)| w * f64::from(spins[j]))
                .sum::<f64>()
                + graph.fields()[i];
            f64::from(spins[i]) * local
        })
        .collect()
}

/// Up to `budget` free vertices ranked by the selection rule, ties by lowest
/// index; returned in ascending order.
fn select(graph: &LevelGraph, gains: &[f64], cfg: &RefineConfig) -> Vec<usize> {
    let mut free: Vec<usize> = (0..graph.n()).filter(|&i| !graph.is_pinned(i)).collect();
    let key = |i: usize| match cfg.selection {
        Selection::Abs => gains[i].abs(),
        Selection::Signed => gains[i],
    };
    free.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
    free.truncate(cfg.budget);
    free.sort_unstable();
    free
}

/// Subproblem over `selected` with every other vertex frozen at `spins` and
/// folded into the linear terms.
fn subproblem(graph: &LevelGraph, spins: &[i8], selected: &[usize]) -> CouplingProblem {
    let mut index = vec![usize::MAX; graph.n()];
    for (k, &i) in selected.iter().enumerate() {
        index[i] = k;
    }
    let mut p = CouplingProblem::new(selected.len());
    for (k, &i) in selected.iter().enumerate() {
        let mut h = graph.fields()[i];
        for &(j, w) in graph.neighbors(i) {
            if index[j] == usize::MAX {
                h += w * f64::from(spins[j]);
            } else if i < j {
                p.add_coupling(k, index[j], w).expect("valid subproblem");
            }
        }
        p.set_field(k, h).expect("finite field");
    }
    p
}

/// Repeatedly re-solves the highest-ranked vertices with the rest frozen and
/// keeps a new sub-assignment only if the total energy strictly drops. Stops
/// after `patience` consecutive non-improving iterations or `max_iters`.
/// Exhaustive sub-solves are deterministic, so one non-improving iteration
/// already means no further progress is possible.
pub fn refine_level(
    graph: &LevelGraph,
    start: &SpinAssignment,
    cfg: &RefineConfig,
) -> Result<RefineOutcome> {
    graph.check_spins(&start.spins)?;
    let mut spins = start.spins.clone();
    for (&i, &s) in graph.pins() {
        if spins[i] != s {
            return Err(Error::invalid(format!("start assignment flips pinned vertex {i}")));
        }
    }
    let mut energy = graph.energy(&spins);
    let mut accepted = vec![energy];
    let mut idle = 0;
    let mut iterations = 0;
    let deterministic = cfg.solver.backend == Backend::Exhaustive;
    while iterations < cfg.max_iters && idle < cfg.patience {
        let g = gains_unchecked(graph, &spins);
        let selected = select(graph, &g, cfg);
        if selected.is_empty() {
            break;
        }
        iterations += 1;
        let sub = subproblem(graph, &spins, &selected);
        let solver = cfg.solver.with_seed(derive_seed(cfg.solver.seed, iterations as u64));
        let best = solve(&sub, &solver)?;
        let mut candidate = spins.clone();
        for (k, &i) in selected.iter().enumerate() {
            candidate[i] = best.spins[k];
        }
        let cand_energy = graph.energy(&candidate);
        if cand_energy < energy - ACCEPT_EPS {
            spins = candidate;
            energy = cand_energy;
            accepted.push(energy);
            idle = 0;
            if deterministic && selected.len() == graph.free_count() {
                break;
            }
        } else {
            idle += 1;
            if deterministic {
                break;
            }
        }
    }
    Ok(RefineOutcome {
        assignment: SpinAssignment { spins, energy },
        iterations,
        accepted,
    })
}
