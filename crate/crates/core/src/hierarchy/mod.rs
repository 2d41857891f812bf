//! Multilevel coarsen / solve / refine driver.
//!
//! The coupling graph is repeatedly embedded on a sphere and contracted along
//! a closest-pair matching until its free vertex count fits the solver budget.
//! The coarsest level is solved directly; the solution is then projected back
//! level by level and improved by gain-guided subproblem solves.

mod coarsen;
mod embed;
mod graph;
mod refine;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use coarsen::{coarsen_once, contract, intra_pair_weight, Matching};
pub use embed::{embed, Embedding};
pub use graph::{Label, LevelGraph};
pub use refine::{gains, project, refine_level, RefineConfig, RefineOutcome, Selection, ACCEPT_EPS};

use crate::cutnorm::{
    build_cut_problem, build_fgl_problem, fgl_from_energy, solve, stats_for, Backend,
    CouplingProblem, Encoding, SolverConfig, SpinAssignment,
};
use crate::estimate::{BoundKind, Estimate};
use crate::exec::derive_seed;
use crate::netio::{class_reduction, Network};
use crate::{Error, Result};

/// Smallest admissible qubit budget.
pub const MIN_BUDGET: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiqConfig {
    pub solver: SolverConfig,
    /// Largest subproblem handed to the solver (device qubit count).
    pub qubit_budget: usize,
    pub embed_dim: usize,
    pub embed_iters: usize,
    pub embed_step: f64,
    pub selection: Selection,
    pub patience: usize,
    pub max_refine_iters: usize,
    pub encoding: Encoding,
}

impl Default for HiqConfig {
    fn default() -> Self {
        HiqConfig {
            solver: SolverConfig::default(),
            qubit_budget: 100,
            embed_dim: 8,
            embed_iters: 50,
            embed_step: 0.05,
            selection: Selection::Abs,
            patience: 3,
            max_refine_iters: 50,
            encoding: Encoding::Fgl,
        }
    }
}

impl HiqConfig {
    pub fn with_solver(solver: SolverConfig) -> Self {
        HiqConfig {
            solver,
            ..Default::default()
        }
    }

    /// Qubit budget clipped to what the backend can take.
    pub fn effective_budget(&self) -> usize {
        self.qubit_budget.min(self.solver.capacity())
    }
}

/// Levels finest first; `matchings[k]` links level `k` to level `k + 1`.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub levels: Vec<LevelGraph>,
    pub matchings: Vec<Matching>,
}

impl Hierarchy {
    pub fn coarsest(&self) -> &LevelGraph {
        self.levels.last().expect("hierarchy has a level")
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.levels.iter().map(LevelGraph::n).collect()
    }
}

/// Coarsens until the free vertex count is at most `budget`.
pub fn build_hierarchy(problem: &CouplingProblem, budget: usize, cfg: &HiqConfig) -> Result<Hierarchy> {
    if budget < MIN_BUDGET {
        return Err(Error::invalid(format!(
            "qubit budget {budget} is below the minimum of {MIN_BUDGET}"
        )));
    }
    let mut levels = vec![LevelGraph::from_problem(problem)];
    let mut matchings = Vec::new();
    loop {
        let g = levels.last().expect("nonempty");
        if g.free_count() <= budget {
            break;
        }
        let seed = derive_seed(cfg.solver.seed ^ 0xE3BD, levels.len() as u64);
        let emb = embed(g, cfg.embed_dim, seed, cfg.embed_iters, cfg.embed_step);
        let (coarse, matching) = coarsen_once(g, &emb);
        if coarse.n() >= g.n() {
            return Err(Error::invalid("coarsening made no progress"));
        }
        levels.push(coarse);
        matchings.push(matching);
    }
    Ok(Hierarchy { levels, matchings })
}

/// One line of the per-level trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub level: usize,
    pub vertices: usize,
    pub energy_before: f64,
    pub energy_after: f64,
    pub iterations: usize,
    /// Energies after each accepted refinement step, starting with
    /// `energy_before`.
    #[serde(default)]
    pub accepted: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MultilevelResult {
    pub assignment: SpinAssignment,
    pub levels: usize,
    pub iterations: usize,
    /// Coarsest level first.
    pub trace: Vec<LevelTrace>,
}

/// Minimizes `problem` with the multilevel scheme. When the problem already
/// fits the budget this is a single direct solve.
pub fn minimize(problem: &CouplingProblem, cfg: &HiqConfig) -> Result<MultilevelResult> {
    cfg.solver.validate()?;
    let budget = cfg.effective_budget();
    let hierarchy = build_hierarchy(problem, budget, cfg)?;
    let depth = hierarchy.levels.len();

    let coarsest = hierarchy.coarsest();
    let coarse_solver = cfg.solver.with_seed(derive_seed(cfg.solver.seed, 0xC0A5));
    let mut current = solve(&coarsest.to_problem(), &coarse_solver)?;
    let mut trace = vec![LevelTrace {
        level: depth - 1,
        vertices: coarsest.n(),
        energy_before: current.energy,
        energy_after: current.energy,
        iterations: 1,
        accepted: vec![current.energy],
    }];
    let mut iterations = 1;
    for k in (0..depth - 1).rev() {
        let fine = &hierarchy.levels[k];
        let projected = project(&current, &hierarchy.matchings[k], fine)?;
        let refine_cfg = RefineConfig {
            budget,
            selection: cfg.selection,
            patience: cfg.patience,
            max_iters: cfg.max_refine_iters,
            solver: cfg.solver.with_seed(derive_seed(cfg.solver.seed, k as u64 + 1)),
        };
        let out = refine_level(fine, &projected, &refine_cfg)?;
        iterations += out.iterations;
        trace.push(LevelTrace {
            level: k,
            vertices: fine.n(),
            energy_before: projected.energy,
            energy_after: out.assignment.energy,
            iterations: out.iterations,
            accepted: out.accepted,
        });
        current = out.assignment;
    }
    // Report the energy on the caller's problem representation.
    current.energy = problem.energy(&current.spins)?;
    Ok(MultilevelResult {
        assignment: current,
        levels: depth,
        iterations: iterations as usize,
        trace,
    })
}

/// Two-layer FGL estimate for one output class.
///
/// With [`Encoding::Fgl`] the value is `-½ · energy` of the exact encoding, a
/// lower bound on the FGL witnessed by the final assignment, and exact when
/// the whole problem was solved exhaustively in one level. [`Encoding::Cut`]
/// estimates ‖A‖_{∞→1} instead.
pub fn hiq_lip_two_layer(net: &Network, class_index: usize, cfg: &HiqConfig) -> Result<Estimate> {
    let start = Instant::now();
    let red = class_reduction(net, class_index)?;
    let problem = match cfg.encoding {
        Encoding::Fgl => build_fgl_problem(&red)?,
        Encoding::Cut => build_cut_problem(&red.a)?,
    };
    let result = minimize(&problem, cfg)?;
    let value = match cfg.encoding {
        Encoding::Fgl => fgl_from_energy(result.assignment.energy),
        Encoding::Cut => (-result.assignment.energy).max(0.0),
    };
    let kind = if cfg.solver.backend == Backend::Exhaustive && result.levels == 1 {
        BoundKind::Exact
    } else {
        BoundKind::Heuristic
    };
    let mut est = Estimate::new("hiq", value, kind).with_digest(cfg);
    est.solver_stats = stats_for(&cfg.solver);
    est.solver_stats.levels = result.levels as u64;
    est.solver_stats.iterations = result.iterations as u64;
    est.trace = result.trace;
    Ok(est.with_time(start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::netio::generate_synthetic;

    fn random_bipartite(seed: u64, n: usize, m: usize) -> CouplingProblem {
        let a = generate_synthetic(seed, &[m, n], 1.0).unwrap();
        build_cut_problem(a.weights(0)).unwrap()
    }

    #[test]
    fn small_problem_is_single_level() {
        let p = random_bipartite(1, 5, 5);
        let h = build_hierarchy(&p, 16, &HiqConfig::default()).unwrap();
        assert_eq!(h.levels.len(), 1);
        assert!(h.matchings.is_empty());
    }

    #[test]
    fn budget_below_minimum_rejected() {
        let p = random_bipartite(1, 5, 5);
        assert!(build_hierarchy(&p, 3, &HiqConfig::default()).is_err());
    }

    #[test]
    fn hundred_vertices_budget_25() {
        let p = random_bipartite(2, 50, 50);
        let h = build_hierarchy(&p, 25, &HiqConfig::default()).unwrap();
        let last = h.coarsest().n();
        assert!(last <= 25 && last >= 13, "coarsest size {last}");
        for w in h.sizes().windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn identity_net_estimate() {
        let net = Network::from_matrices(vec![Matrix::identity(4), Matrix::from_rows(&[[1.0; 4]])])
            .unwrap();
        let est = hiq_lip_two_layer(&net, 0, &HiqConfig::with_solver(SolverConfig::exhaustive()))
            .unwrap();
        assert_eq!(est.value, 4.0);
        assert_eq!(est.bound_kind, BoundKind::Exact);
    }

    #[test]
    fn zero_class_row_gives_zero() {
        let net = Network::from_matrices(vec![
            Matrix::from_rows(&[[1.0, 2.0], [3.0, -4.0]]),
            Matrix::zeros(1, 2),
        ])
        .unwrap();
        let est = hiq_lip_two_layer(&net, 0, &HiqConfig::default()).unwrap();
        assert_eq!(est.value, 0.0);
    }
}
