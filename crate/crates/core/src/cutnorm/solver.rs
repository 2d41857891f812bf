use serde::{Deserialize, Serialize};

use super::problem::{CouplingProblem, SpinAssignment};
use super::{anneal, exhaustive, remote};
use crate::{Error, Result};

/// Hard ceiling on the exhaustive backend (2^30 states).
pub const EXHAUSTIVE_HARD_CAP: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Exhaustive,
    Annealing,
    Remote,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(Backend::Exhaustive),
            "annealing" => Ok(Backend::Annealing),
            "remote" => Ok(Backend::Remote),
            other => Err(Error::invalid(format!("unknown backend {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub backend: Backend,
    pub seed: u64,
    pub num_reads: usize,
    pub sweeps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub max_vars_exhaustive: usize,
    pub remote_endpoint: Option<String>,
    pub timeout_ms: u64,
    /// Run restarts / enumeration chunks on the rayon pool when the
    /// `parallel` feature is compiled in. Results do not depend on it.
    #[serde(default = "default_true")]
    pub parallel: bool,
}

fn default_true() -> bool {
    true
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            backend: Backend::Annealing,
            seed: 0,
            num_reads: 16,
            sweeps: 1000,
            beta_min: 0.1,
            beta_max: 10.0,
            max_vars_exhaustive: 24,
            remote_endpoint: None,
            timeout_ms: 30_000,
            parallel: true,
        }
    }
}

impl SolverConfig {
    pub fn exhaustive() -> Self {
        SolverConfig {
            backend: Backend::Exhaustive,
            ..Default::default()
        }
    }

    pub fn annealing(seed: u64) -> Self {
        SolverConfig {
            seed,
            ..Default::default()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SolverConfig {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta_min > 0.0 && self.beta_min < self.beta_max && self.beta_max.is_finite()) {
            return Err(Error::invalid(format!(
                "beta schedule must satisfy 0 < beta_min < beta_max, got ({}, {})",
                self.beta_min, self.beta_max
            )));
        }
        if self.max_vars_exhaustive > EXHAUSTIVE_HARD_CAP {
            return Err(Error::invalid(format!(
                "max_vars_exhaustive {} exceeds {EXHAUSTIVE_HARD_CAP}",
                self.max_vars_exhaustive
            )));
        }
        if self.num_reads == 0 || self.sweeps == 0 {
            return Err(Error::invalid("num_reads and sweeps must be positive"));
        }
        Ok(())
    }

    /// Largest subproblem this backend can take: the exhaustive cap for the
    /// exhaustive backend, unbounded otherwise.
    pub fn capacity(&self) -> usize {
        match self.backend {
            Backend::Exhaustive => self.max_vars_exhaustive,
            _ => usize::MAX,
        }
    }
}

/// Free-variable view of a problem: pinned spins folded into linear fields,
/// variables renumbered `0..free.len()`. This is what every backend sees.
#[derive(Debug, Clone)]
pub struct FoldedProblem {
    /// Original index of each free variable.
    pub free: Vec<usize>,
    /// `(a, b, J)` with `a < b` in free numbering.
    pub quadratic: Vec<(usize, usize, f64)>,
    pub linear: Vec<f64>,
    /// Energy contribution of pinned–pinned couplings and pinned fields.
    pub offset: f64,
}

impl FoldedProblem {
    pub fn new(problem: &CouplingProblem) -> Self {
        let n = problem.n_vars();
        let pinned = problem.pinned();
        let mut index = vec![usize::MAX; n];
        let mut free = Vec::with_capacity(problem.free_count());
        for i in 0..n {
            if !pinned.contains_key(&i) {
                index[i] = free.len();
                free.push(i);
            }
        }
        let mut linear: Vec<f64> = free.iter().map(|&i| problem.fields()[i]).collect();
        let mut offset = 0.0;
        for (&p, &s) in pinned {
            offset -= problem.fields()[p] * f64::from(s);
        }
        let mut quadratic = Vec::with_capacity(problem.num_couplings());
        for ((i, j), w) in problem.couplings() {
            match (pinned.get(&i), pinned.get(&j)) {
                (None, None) => quadratic.push((index[i], index[j], w)),
                (Some(&si), None) => linear[index[j]] += w * f64::from(si),
                (None, Some(&sj)) => linear[index[i]] += w * f64::from(sj),
                (Some(&si), Some(&sj)) => offset -= w * f64::from(si * sj),
            }
        }
        FoldedProblem {
            free,
            quadratic,
            linear,
            offset,
        }
    }

    pub fn n(&self) -> usize {
        self.free.len()
    }

    /// Energy over free spins, excluding `offset`.
    pub fn energy(&self, spins: &[i8]) -> f64 {
        let mut e = 0.0;
        for &(a, b, w) in &self.quadratic {
            e -= w * f64::from(spins[a] * spins[b]);
        }
        for (h, &s) in self.linear.iter().zip(spins) {
            e -= h * f64::from(s);
        }
        e
    }

    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n()];
        for &(a, b, w) in &self.quadratic {
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        adj
    }

    /// Largest absolute coupling or field; 0 for an empty problem.
    pub fn max_coefficient(&self) -> f64 {
        self.quadratic
            .iter()
            .map(|q| q.2.abs())
            .chain(self.linear.iter().map(|h| h.abs()))
            .fold(0.0, f64::max)
    }

    fn expand(&self, problem: &CouplingProblem, free_spins: &[i8]) -> Vec<i8> {
        let mut spins = vec![1i8; problem.n_vars()];
        for (&s, &i) in free_spins.iter().zip(&self.free) {
            spins[i] = s;
        }
        for (&p, &s) in problem.pinned() {
            spins[p] = s;
        }
        spins
    }
}

/// Minimizes `problem` with the configured backend. Pinned variables keep
/// their spin; the returned energy is recomputed on the full problem.
pub fn solve(problem: &CouplingProblem, cfg: &SolverConfig) -> Result<SpinAssignment> {
    cfg.validate()?;
    let folded = FoldedProblem::new(problem);
    let free_spins = if folded.n() == 0 {
        Vec::new()
    } else {
        match cfg.backend {
            Backend::Exhaustive => exhaustive::minimize(&folded, cfg)?,
            Backend::Annealing => anneal::minimize(&folded, cfg),
            Backend::Remote => remote::minimize(&folded, cfg)?,
        }
    };
    let spins = folded.expand(problem, &free_spins);
    problem.assignment(spins)
}
