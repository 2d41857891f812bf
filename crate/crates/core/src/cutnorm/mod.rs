//! Ising encodings of the ∞→1 cut norm and of the exact two-layer FGL, and
//! the solver backends that minimize them.

mod anneal;
mod exhaustive;
mod problem;
pub mod remote;
mod solver;

use std::time::Instant;

pub use problem::{energy, CouplingProblem, Side, SpinAssignment};
pub use solver::{solve, Backend, FoldedProblem, SolverConfig, EXHAUSTIVE_HARD_CAP};

use crate::estimate::{BoundKind, Estimate, SolverStats};
use crate::matrix::Matrix;
use crate::netio::ClassReduction;
use crate::{Error, Result};

/// Which Ising encoding a two-layer estimate was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    /// `max_{x,y ∈ ±1} xᵀAy`, i.e. ‖A‖_{∞→1}.
    Cut,
    /// `max_{v ∈ {0,1}^m} ‖Av‖₁` via `v = (z+1)/2` and one pinned spin.
    Fgl,
}

/// Bipartite problem over `n + m` spins: spin `i` is row `i`, spin `n + j` is
/// column `j`, and the coupling between them is `a[i][j]`. Minimizing the
/// energy maximizes `Σ a_ij x_i y_j`.
pub fn build_cut_problem(a: &Matrix) -> Result<CouplingProblem> {
    if a.is_empty() {
        return Err(Error::invalid("empty matrix"));
    }
    if !a.all_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let (n, m) = (a.rows(), a.cols());
    let mut p = CouplingProblem::new(n + m);
    for i in 0..n {
        p.set_side(i, Side::Row);
        for j in 0..m {
            let w = a[(i, j)];
            if w != 0.0 {
                p.add_coupling(i, n + j, w)?;
            }
        }
    }
    for j in 0..m {
        p.set_side(n + j, Side::Column);
    }
    Ok(p)
}

/// Exact encoding of `FGL₂ = max_{v ∈ {0,1}^m} ‖Av‖₁`.
///
/// With `v = (z + 1)/2`, `xᵀAv = ½(xᵀAz + xᵀA𝟙)`. Spins `0..n` are `x`,
/// `n..n+m` are `z`, and spin `n + m` is pinned to `+1` and coupled to `x_i`
/// with weight `c_i = (A𝟙)_i`. Then `FGL₂ = -½ · min energy`
/// (see [`fgl_from_energy`]).
pub fn build_fgl_problem(red: &ClassReduction) -> Result<CouplingProblem> {
    let a = &red.a;
    let (n, m) = (a.rows(), a.cols());
    let mut p = build_cut_problem(a)?;
    let mut q = CouplingProblem::new(n + m + 1);
    for ((i, j), w) in p.couplings() {
        q.add_coupling(i, j, w)?;
    }
    for (i, &side) in p.sides().iter().enumerate() {
        q.set_side(i, side);
    }
    let pin = n + m;
    for i in 0..n {
        let c: f64 = a.row(i).iter().sum();
        if c != 0.0 {
            q.add_coupling(i, pin, c)?;
        }
    }
    q.pin(pin, 1)?;
    p = q;
    Ok(p)
}

/// FGL value carried by an energy of [`build_fgl_problem`].
pub fn fgl_from_energy(energy: f64) -> f64 {
    (-0.5 * energy).max(0.0)
}

/// ‖A‖_{∞→1} estimate: `-(best energy)` of [`build_cut_problem`]. Exact with
/// the exhaustive backend, otherwise a lower bound witnessed by the returned
/// assignment.
pub fn cut_norm_inf1(a: &Matrix, cfg: &SolverConfig) -> Result<Estimate> {
    let start = Instant::now();
    let problem = build_cut_problem(a)?;
    let best = solve(&problem, cfg)?;
    let kind = match cfg.backend {
        Backend::Exhaustive => BoundKind::Exact,
        _ => BoundKind::Lower,
    };
    let mut est = Estimate::new("cut-norm", (-best.energy).max(0.0), kind)
        .with_digest(cfg)
        .with_time(start);
    est.solver_stats = stats_for(cfg);
    Ok(est)
}

pub(crate) fn stats_for(cfg: &SolverConfig) -> SolverStats {
    match cfg.backend {
        Backend::Annealing => SolverStats {
            reads: cfg.num_reads as u64,
            sweeps: cfg.sweeps as u64,
            ..Default::default()
        },
        Backend::Remote => SolverStats {
            reads: cfg.num_reads as u64,
            ..Default::default()
        },
        Backend::Exhaustive => SolverStats::default(),
    }
}

/// Exact ‖M‖_{∞→1} by enumerating sign vectors over the shorter dimension
/// (first sign fixed by symmetry) and taking absolute sums over the other.
pub fn cut_norm_exact(m: &Matrix) -> f64 {
    cut_norm_exact_witness(m).0
}

/// [`cut_norm_exact`] plus a maximizing pair `(y, x)`: `y` over rows, `x`
/// over columns, with `yᵀ M x` equal to the returned value.
pub fn cut_norm_exact_witness(m: &Matrix) -> (f64, Vec<i8>, Vec<i8>) {
    let (r, c) = (m.rows(), m.cols());
    if m.is_empty() {
        return (0.0, vec![1; r], vec![1; c]);
    }
    let enumerate_cols = c <= r;
    let k = if enumerate_cols { c } else { r };
    let other = if enumerate_cols { r } else { c };
    let at = |e: usize, o: usize| if enumerate_cols { m[(o, e)] } else { m[(e, o)] };
    let mut signs = vec![1i8; k];
    let mut acc: Vec<f64> = (0..other).map(|o| (0..k).map(|e| at(e, o)).sum()).collect();
    let mut best = acc.iter().map(|v| v.abs()).sum::<f64>();
    let mut best_step = 0u64;
    for step in 1..(1u64 << (k - 1)) {
        let e = step.trailing_zeros() as usize + 1;
        signs[e] = -signs[e];
        let d = 2.0 * f64::from(signs[e]);
        for (o, v) in acc.iter_mut().enumerate() {
            *v += d * at(e, o);
        }
        let v = acc.iter().map(|v| v.abs()).sum::<f64>();
        if v > best {
            best = v;
            best_step = step;
        }
    }
    let gray = best_step ^ (best_step >> 1);
    let chosen: Vec<i8> = (0..k)
        .map(|e| if e > 0 && (gray >> (e - 1)) & 1 == 1 { -1 } else { 1 })
        .collect();
    let sums: Vec<f64> = (0..other)
        .map(|o| (0..k).map(|e| f64::from(chosen[e]) * at(e, o)).sum())
        .collect();
    let matched: Vec<i8> = sums.iter().map(|&v| if v < 0.0 { -1 } else { 1 }).collect();
    let value = sums.iter().map(|v| v.abs()).sum::<f64>();
    if enumerate_cols {
        (value, matched, chosen)
    } else {
        (value, chosen, matched)
    }
}
