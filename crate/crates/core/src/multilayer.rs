//! Estimators for networks deeper than two layers.
//!
//! * [`layerwise_recursion`]: alternating maximization over activation
//!   patterns and input/output signs.
//! * [`block_product`]: product of per-block `∞→1` constants, damped by
//!   `c_b = 2^{b-1}` per merged layer.
//! * [`hiq_lip_multilayer`]: product of overlapping adjacent-pair constants
//!   scaled by [`mp_coefficient`].
//!
//! Layer indices are 0-based here: weight `k` maps hidden layer `k - 1` to
//! hidden layer `k`, and pattern `D_k` masks the output of weight `k`.

use std::ops::Range;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cutnorm::{build_cut_problem, cut_norm_exact, cut_norm_exact_witness, stats_for, Backend};
use crate::estimate::{BoundKind, Estimate};
use crate::exec::{derive_seed, map_indexed};
use crate::hierarchy::{self, hiq_lip_two_layer, HiqConfig};
use crate::matrix::Matrix;
use crate::netio::Network;
use crate::{Error, Result};

const RESTART_SALT: u64 = 0x5EC0_11D5;
const IMPROVE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MpVariant {
    A,
    B,
}

impl std::str::FromStr for MpVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(MpVariant::A),
            "b" => Ok(MpVariant::B),
            other => Err(Error::invalid(format!("unknown variant {other:?}"))),
        }
    }
}

/// How the factors of the pairwise product are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairReading {
    /// `d - 1` overlapping pairs `(W_k, W_{k+1})`; interior weights appear in
    /// two factors.
    #[default]
    Overlapping,
    /// One factor per matrix `W_{k+1} D_k` for `k = 1..d-1`; `W_1` is
    /// skipped.
    SingleMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultilayerConfig {
    pub hiq: HiqConfig,
    /// Random pattern restarts on top of the all-ones start.
    pub restarts: usize,
    pub max_passes: usize,
    pub pair_reading: PairReading,
    /// Single-flip pattern search after the alternating passes (single
    /// output only).
    pub polish: bool,
}

impl Default for MultilayerConfig {
    fn default() -> Self {
        MultilayerConfig {
            hiq: HiqConfig::default(),
            restarts: 4,
            max_passes: 100,
            pair_reading: PairReading::Overlapping,
            polish: true,
        }
    }
}

impl MultilayerConfig {
    pub fn with_hiq(hiq: HiqConfig) -> Self {
        MultilayerConfig {
            hiq,
            ..Default::default()
        }
    }

    fn parallel(&self) -> bool {
        self.hiq.solver.parallel
    }
}

/// Accumulated product `P_k = W_k D_{k-1} ⋯ D_0 W_0` while unfolding a
/// network one layer at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub p: Matrix,
    /// Pattern applied to the rows of `p` before the next weight.
    pub d: Vec<bool>,
    pub level: usize,
}

impl LayerState {
    pub fn start(net: &Network, d0: Vec<bool>) -> Result<Self> {
        let p = net.weights(0).clone();
        Self::checked(p, d0, 0)
    }

    /// `P_{k+1} = W_{k+1} diag(D_k) P_k`, with `d_next` the pattern for the
    /// new level (ignored at the output layer, pass an empty vector there).
    pub fn advance(&self, net: &Network, d_next: Vec<bool>) -> Result<Self> {
        let w = net.weights(self.level + 1);
        let masked = mask_rows(&self.p, &self.d);
        Self::checked(w.matmul(&masked), d_next, self.level + 1)
    }

    fn checked(p: Matrix, d: Vec<bool>, level: usize) -> Result<Self> {
        if !d.is_empty() && d.len() != p.rows() {
            return Err(Error::invalid(format!(
                "pattern length {} does not match width {} at level {level}",
                d.len(),
                p.rows()
            )));
        }
        Ok(LayerState { p, d, level })
    }
}

fn mask_rows(m: &Matrix, d: &[bool]) -> Matrix {
    if d.is_empty() {
        return m.clone();
    }
    Matrix::from_fn(m.rows(), m.cols(), |i, j| if d[i] { m[(i, j)] } else { 0.0 })
}

/// Full product `W_{L-1} D_{L-2} ⋯ D_0 W_0` for the given hidden patterns.
pub fn pattern_product(net: &Network, patterns: &[Vec<bool>]) -> Result<Matrix> {
    check_patterns(net, patterns)?;
    let first = patterns.first().cloned().unwrap_or_default();
    let mut state = LayerState::start(net, first)?;
    for k in 1..net.depth() {
        let next = patterns.get(k).cloned().unwrap_or_default();
        state = state.advance(net, next)?;
    }
    Ok(state.p)
}

fn check_patterns(net: &Network, patterns: &[Vec<bool>]) -> Result<()> {
    let widths = net.hidden_widths();
    if patterns.len() != widths.len() || patterns.iter().zip(&widths).any(|(p, &w)| p.len() != w) {
        return Err(Error::invalid("activation patterns do not match hidden widths"));
    }
    Ok(())
}

/// `yᵀ P x` for the product under `patterns`, evaluated by matvecs.
pub fn bilinear_objective(net: &Network, patterns: &[Vec<bool>], x: &[i8], y: &[i8]) -> f64 {
    let r = forward(net, patterns, x, net.depth());
    y.iter().zip(&r).map(|(&s, v)| f64::from(s) * v).sum()
}

/// Output of weight `upto - 1`, masked by the pattern at that level when it
/// is hidden and `upto < depth`. With `upto = depth`, the network output.
fn forward(net: &Network, patterns: &[Vec<bool>], x: &[i8], upto: usize) -> Vec<f64> {
    let mut r: Vec<f64> = x.iter().map(|&s| f64::from(s)).collect();
    for k in 0..upto {
        r = net.weights(k).mul_vec(&r);
        if k + 1 < upto {
            for (v, &on) in r.iter_mut().zip(&patterns[k]) {
                if !on {
                    *v = 0.0;
                }
            }
        }
    }
    r
}

/// Objective coefficient of each entry of `D_h`: `ℓ_i · r_i`, where `r` is
/// the pre-mask signal at hidden layer `h` and `ℓ` the back-propagated
/// output signs.
pub fn pattern_coefficients(net: &Network, patterns: &[Vec<bool>], h: usize, x: &[i8], y: &[i8]) -> Vec<f64> {
    let r = forward(net, patterns, x, h + 1);
    let mut l: Vec<f64> = y.iter().map(|&s| f64::from(s)).collect();
    for k in (h + 1..net.depth()).rev() {
        l = net.weights(k).left_mul(&l);
        if k - 1 > h {
            for (v, &on) in l.iter_mut().zip(&patterns[k - 1]) {
                if !on {
                    *v = 0.0;
                }
            }
        }
    }
    l.iter().zip(&r).map(|(a, b)| a * b).collect()
}

/// Sets `D_h` to its optimum with everything else fixed: on iff the entry's
/// coefficient is positive.
pub fn update_layer(net: &Network, patterns: &mut [Vec<bool>], h: usize, x: &[i8], y: &[i8]) {
    let coef = pattern_coefficients(net, patterns, h, x, y);
    for (d, c) in patterns[h].iter_mut().zip(coef) {
        *d = c > 0.0;
    }
}

/// One sweep of [`update_layer`] from the input side up.
pub fn update_patterns(net: &Network, patterns: &mut [Vec<bool>], x: &[i8], y: &[i8]) {
    for h in 0..patterns.len() {
        update_layer(net, patterns, h, x, y);
    }
}

/// Approximately solves `max_{x,y} yᵀ P x`; returns `(value, y, x)`.
/// Exact enumeration when one side is a single vector or the exhaustive
/// backend can take the shorter side; the multilevel driver otherwise.
fn sign_maximize(p: &Matrix, hiq: &HiqConfig, seed: u64) -> Result<(f64, Vec<i8>, Vec<i8>)> {
    let short = p.rows().min(p.cols());
    let exhaustive = hiq.solver.backend == Backend::Exhaustive;
    if short <= 1 || (exhaustive && short - 1 <= hiq.solver.max_vars_exhaustive) {
        return Ok(cut_norm_exact_witness(p));
    }
    let problem = build_cut_problem(p)?;
    let mut cfg = hiq.clone();
    cfg.solver.seed = seed;
    let res = hierarchy::minimize(&problem, &cfg)?;
    let spins = res.assignment.spins;
    let y = spins[..p.rows()].to_vec();
    let x = spins[p.rows()..].to_vec();
    let mut value = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let dot: f64 = p.row(i).iter().zip(&x).map(|(a, &s)| a * f64::from(s)).sum();
        value += f64::from(yi) * dot;
    }
    Ok((value, y, x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecursionOutcome {
    pub value: f64,
    pub patterns: Vec<Vec<bool>>,
    pub x: Vec<i8>,
    pub y: Vec<i8>,
    /// Best objective after each improving pass of the winning restart.
    pub trace: Vec<f64>,
    /// Passes summed over all restarts.
    pub passes: usize,
}

/// Alternating maximization of `yᵀ W_{L-1} D_{L-2} ⋯ D_0 W_0 x` over signs and
/// patterns, from the all-ones start plus `cfg.restarts` random starts.
/// Works for any output width; a 1-layer net is a single sign solve.
pub fn recursion_search(net: &Network, cfg: &MultilayerConfig) -> Result<RecursionOutcome> {
    let widths = net.hidden_widths();
    let base = derive_seed(cfg.hiq.solver.seed, RESTART_SALT);
    let runs = map_indexed(cfg.restarts + 1, cfg.parallel(), |r| {
        let patterns: Vec<Vec<bool>> = if r == 0 {
            widths.iter().map(|&w| vec![true; w]).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(base, r as u64));
            widths.iter().map(|&w| (0..w).map(|_| rng.gen::<bool>()).collect()).collect()
        };
        single_run(net, cfg, patterns, derive_seed(base ^ 0xA5, r as u64))
    });
    let mut best: Option<RecursionOutcome> = None;
    let mut passes = 0;
    for run in runs {
        let run = run?;
        passes += run.passes;
        if best.as_ref().map_or(true, |b| run.value > b.value) {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one run");
    best.passes = passes;
    Ok(best)
}

fn single_run(
    net: &Network,
    cfg: &MultilayerConfig,
    mut patterns: Vec<Vec<bool>>,
    seed: u64,
) -> Result<RecursionOutcome> {
    let mut best = RecursionOutcome {
        value: f64::NEG_INFINITY,
        patterns: patterns.clone(),
        x: vec![1; net.input_dim()],
        y: vec![1; net.output_dim()],
        trace: Vec::new(),
        passes: 0,
    };
    for pass in 0..cfg.max_passes.max(1) {
        best.passes += 1;
        let p = pattern_product(net, &patterns)?;
        let (_, y, x) = sign_maximize(&p, &cfg.hiq, derive_seed(seed, pass as u64))?;
        let before = bilinear_objective(net, &patterns, &x, &y);
        let mut candidate = patterns.clone();
        update_patterns(net, &mut candidate, &x, &y);
        let after = bilinear_objective(net, &candidate, &x, &y);
        let (value, chosen) = if after >= before { (after, candidate) } else { (before, patterns.clone()) };
        let improved = best.trace.is_empty() || value > best.value + IMPROVE_EPS * best.value.abs().max(1.0);
        if improved {
            best.value = value;
            best.patterns = chosen.clone();
            best.x = x;
            best.y = y;
            best.trace.push(value);
        }
        if !improved || net.depth() == 1 {
            break;
        }
        patterns = chosen;
    }
    if cfg.polish && net.output_dim() == 1 && net.depth() > 1 {
        polish(net, &mut best);
    }
    best.value = best.value.max(0.0);
    Ok(best)
}

/// Single-output blocks: flips one pattern entry at a time with the signs
/// re-solved in closed form, keeping strict improvements until none remain.
fn polish(net: &Network, best: &mut RecursionOutcome) {
    let score = |patterns: &[Vec<bool>]| -> (f64, Vec<i8>) {
        let p = pattern_product(net, patterns).expect("patterns checked");
        let (v, _, x) = cut_norm_exact_witness(&p);
        (v, x)
    };
    let mut improved = true;
    while improved {
        improved = false;
        for h in 0..best.patterns.len() {
            for i in 0..best.patterns[h].len() {
                best.patterns[h][i] = !best.patterns[h][i];
                let (v, x) = score(&best.patterns);
                if v > best.value + IMPROVE_EPS * best.value.abs().max(1.0) {
                    let y = vec![1i8];
                    best.value = bilinear_objective(net, &best.patterns, &x, &y);
                    best.x = x;
                    best.y = y;
                    best.trace.push(best.value);
                    improved = true;
                } else {
                    best.patterns[h][i] = !best.patterns[h][i];
                }
            }
        }
    }
}

/// Heuristic FGL estimate by alternating maximization (method `recursion`).
/// A two-layer net is handed to [`hiq_lip_two_layer`].
pub fn layerwise_recursion(net: &Network, class_index: usize, cfg: &MultilayerConfig) -> Result<Estimate> {
    let start = Instant::now();
    if net.depth() < 2 {
        return Err(Error::invalid("layerwise recursion needs depth >= 2"));
    }
    net.check_class(class_index)?;
    if net.depth() == 2 {
        let mut est = hiq_lip_two_layer(net, class_index, &cfg.hiq)?;
        est.method = "recursion".into();
        est.config_digest = crate::estimate::config_digest(cfg);
        return Ok(est.with_time(start));
    }
    let single = net.single_output(class_index)?;
    let out = recursion_search(&single, cfg)?;
    let mut est = Estimate::new("recursion", out.value, BoundKind::Heuristic).with_digest(cfg);
    est.solver_stats = stats_for(&cfg.hiq.solver);
    est.solver_stats.iterations = out.passes as u64;
    Ok(est.with_time(start))
}

/// Exact `max_D ‖W_{L-1} D_{L-2} ⋯ D_0 W_0‖_{∞→1}` by enumerating every
/// hidden pattern and solving each product's sign problem exactly.
pub fn exact_block_constant(net: &Network, parallel: bool) -> f64 {
    let depth = net.depth();
    if depth == 1 {
        return cut_norm_exact(net.weights(0));
    }
    let top = net.weights(depth - 1);
    let below = net.weights(depth - 2);
    let width = top.cols();
    let high = width.min(6);
    let low = width - high;
    let maxima = map_indexed(1 << high, parallel, |chunk| {
        let mut best = 0.0f64;
        walk_patterns(top, below, low, chunk as u64, |s| {
            best = best.max(descend(net, depth - 2, s));
        });
        best
    });
    maxima.into_iter().fold(0.0, f64::max)
}

/// `s` is the product through weight `k` (columns index weight `k`'s input).
fn descend(net: &Network, k: usize, s: &Matrix) -> f64 {
    if k == 0 {
        return cut_norm_exact(s);
    }
    let mut best = 0.0f64;
    walk_patterns(s, net.weights(k - 1), s.cols(), 0, |next| {
        best = best.max(descend(net, k - 1, next));
    });
    best
}

/// Visits `Σ_{i: D_i} s[:, i] ⊗ w[i, :]` for every pattern whose bits at
/// positions `>= low` equal `fixed`; the low bits are walked in Gray order.
fn walk_patterns(s: &Matrix, w: &Matrix, low: usize, fixed: u64, mut f: impl FnMut(&Matrix)) {
    let (rows, width, cols) = (s.rows(), s.cols(), w.cols());
    let mut on: Vec<bool> = (0..width).map(|i| i >= low && (fixed >> (i - low)) & 1 == 1).collect();
    let mut acc = vec![0.0; rows * cols];
    for i in 0..width {
        if on[i] {
            axpy_outer(&mut acc, s, w, i, 1.0);
        }
    }
    let mut m = Matrix::from_vec(rows, cols, acc);
    f(&m);
    for step in 1u64..(1u64 << low) {
        let i = step.trailing_zeros() as usize;
        on[i] = !on[i];
        let sign = if on[i] { 1.0 } else { -1.0 };
        let mut data = std::mem::replace(&mut m, Matrix::zeros(0, 0)).into_data();
        axpy_outer(&mut data, s, w, i, sign);
        m = Matrix::from_vec(rows, cols, data);
        f(&m);
    }
}

fn axpy_outer(acc: &mut [f64], s: &Matrix, w: &Matrix, i: usize, sign: f64) {
    let cols = w.cols();
    let wrow = w.row(i);
    for r in 0..s.rows() {
        let c = sign * s[(r, i)];
        if c != 0.0 {
            for (a, &b) in acc[r * cols..(r + 1) * cols].iter_mut().zip(wrow) {
                *a += c * b;
            }
        }
    }
}

fn exact_feasible(net: &Network, cap: usize) -> bool {
    let hidden: usize = net.hidden_widths().iter().sum();
    let short = net.input_dim().min(net.output_dim());
    hidden + short.saturating_sub(1) <= cap
}

/// `∞→1` constant of a block: exact when the exhaustive backend is selected
/// and the enumeration fits its cap, otherwise a recursion estimate.
/// Returns the value and whether it is exact.
pub fn block_constant(net: &Network, cfg: &MultilayerConfig) -> Result<(f64, bool)> {
    let solver = &cfg.hiq.solver;
    if solver.backend == Backend::Exhaustive && exact_feasible(net, solver.max_vars_exhaustive) {
        return Ok((exact_block_constant(net, cfg.parallel()), true));
    }
    Ok((recursion_search(net, cfg)?.value, false))
}

/// Greedy partition of layers `0..depth` into runs of at most `b`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPlan {
    pub blocks: Vec<Range<usize>>,
    pub b: usize,
}

impl BlockPlan {
    pub fn greedy(depth: usize, b: usize) -> Result<Self> {
        if b == 0 || b > depth {
            return Err(Error::invalid(format!("block length {b} outside 1..={depth}")));
        }
        let blocks = (0..depth).step_by(b).map(|s| s..(s + b).min(depth)).collect();
        Ok(BlockPlan { blocks, b })
    }

    pub fn count(&self) -> usize {
        self.blocks.len()
    }

    /// `c_b^{L-B}` with `c_b = 2^{b-1}`.
    pub fn damping(&self) -> f64 {
        let depth = self.blocks.last().map_or(0, |r| r.end);
        let exp = (self.b - 1) * (depth - self.count());
        2f64.powi(exp as i32)
    }
}

/// Damped product of block constants. Reported as an upper bound only for
/// `b = 1` with exact per-layer constants; otherwise heuristic.
pub fn block_product(net: &Network, class_index: usize, b: usize, cfg: &MultilayerConfig) -> Result<Estimate> {
    let start = Instant::now();
    let single = net.single_output(class_index)?;
    let plan = BlockPlan::greedy(single.depth(), b)?;
    let blocks = plan
        .blocks
        .iter()
        .map(|r| single.slice(r.clone()))
        .collect::<Result<Vec<_>>>()?;
    let consts = map_indexed(blocks.len(), cfg.parallel(), |i| block_constant(&blocks[i], cfg));
    let mut prod = 1.0;
    let mut all_exact = true;
    for c in consts {
        let (v, exact) = c?;
        prod *= v;
        all_exact &= exact;
    }
    let kind = if b == 1 && all_exact { BoundKind::Upper } else { BoundKind::Heuristic };
    let mut est = Estimate::new("block", prod / plan.damping(), kind).with_digest(&(cfg, b));
    est.solver_stats = stats_for(&cfg.hiq.solver);
    est.solver_stats.levels = plan.count() as u64;
    Ok(est.with_time(start))
}

/// `1/2^{d-2}` for A, `1/(2^{d-2} d^{d-3})` for B.
pub fn mp_coefficient(d: usize, variant: MpVariant) -> Result<f64> {
    if d < 2 {
        return Err(Error::invalid(format!("depth {d} < 2")));
    }
    let a = 1.0 / 2f64.powi(d as i32 - 2);
    Ok(match variant {
        MpVariant::A => a,
        MpVariant::B => a / (d as f64).powi(d as i32 - 3),
    })
}

/// Per-factor constants of the pairwise product; compute once and combine
/// under both variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairConstants {
    pub depth: usize,
    pub gammas: Vec<f64>,
    pub exact: Vec<bool>,
    pub reading: PairReading,
}

impl PairConstants {
    pub fn product(&self) -> f64 {
        self.gammas.iter().product()
    }

    /// Variant B is variant A divided by `d^{d-3}`, so the two share every
    /// rounding step up to that final division.
    pub fn combine(&self, variant: MpVariant) -> f64 {
        let d = self.depth;
        let a = self.product() / 2f64.powi(d as i32 - 2);
        match variant {
            MpVariant::A => a,
            MpVariant::B => a / (d as f64).powi(d as i32 - 3),
        }
    }
}

/// Computes the factors of the pairwise product for `net` at `class_index`.
pub fn pair_constants(net: &Network, class_index: usize, cfg: &MultilayerConfig) -> Result<PairConstants> {
    let d = net.depth();
    if d < 3 {
        return Err(Error::invalid(format!("pairwise estimator needs depth >= 3, got {d}")));
    }
    let single = net.single_output(class_index)?;
    let factors: Vec<Range<usize>> = match cfg.pair_reading {
        PairReading::Overlapping => (0..d - 1).map(|k| k..k + 2).collect(),
        PairReading::SingleMatrix => (1..d).map(|k| k..k + 1).collect(),
    };
    let results = map_indexed(factors.len(), cfg.parallel(), |i| -> Result<(f64, bool)> {
        let sub = single.slice(factors[i].clone())?;
        let last = factors[i].end == d;
        let exhaustive = cfg.hiq.solver.backend == Backend::Exhaustive;
        if last && sub.depth() == 2 && !exhaustive {
            let est = hiq_lip_two_layer(&sub, 0, &cfg.hiq)?;
            return Ok((est.value, false));
        }
        let mut local = cfg.clone();
        local.hiq.solver.seed = derive_seed(cfg.hiq.solver.seed, i as u64);
        block_constant(&sub, &local)
    });
    let mut gammas = Vec::with_capacity(results.len());
    let mut exact = Vec::with_capacity(results.len());
    for r in results {
        let (g, e) = r?;
        gammas.push(g);
        exact.push(e);
    }
    Ok(PairConstants {
        depth: d,
        gammas,
        exact,
        reading: cfg.pair_reading,
    })
}

/// Estimate record for one variant from precomputed pair constants.
pub fn multilayer_estimate(pairs: &PairConstants, variant: MpVariant, cfg: &MultilayerConfig) -> Estimate {
    let method = match variant {
        MpVariant::A => "hiq-mp-a",
        MpVariant::B => "hiq-mp-b",
    };
    let mut est = Estimate::new(method, pairs.combine(variant), BoundKind::Heuristic).with_digest(&(cfg, variant));
    est.solver_stats = stats_for(&cfg.hiq.solver);
    est.solver_stats.levels = pairs.gammas.len() as u64;
    est
}

/// Pairwise estimator (methods `hiq-mp-a` / `hiq-mp-b`); depth must be ≥ 3.
pub fn hiq_lip_multilayer(
    net: &Network,
    class_index: usize,
    variant: MpVariant,
    cfg: &MultilayerConfig,
) -> Result<Estimate> {
    let start = Instant::now();
    let pairs = pair_constants(net, class_index, cfg)?;
    Ok(multilayer_estimate(&pairs, variant, cfg).with_time(start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::brute_force_fgl;
    use crate::cutnorm::SolverConfig;
    use crate::netio::generate_synthetic;

    fn exhaustive_cfg() -> MultilayerConfig {
        MultilayerConfig::with_hiq(HiqConfig::with_solver(SolverConfig::exhaustive()))
    }

    /// Independent oracle: every pattern, then every sign pair, with dense
    /// products recomputed from scratch.
    fn naive_block(net: &Network) -> f64 {
        let widths = net.hidden_widths();
        let total: usize = widths.iter().sum();
        let mut best = 0.0f64;
        for bits in 0u64..(1 << total) {
            let mut off = 0;
            let patterns: Vec<Vec<bool>> = widths
                .iter()
                .map(|&w| {
                    let p = (0..w).map(|i| (bits >> (off + i)) & 1 == 1).collect();
                    off += w;
                    p
                })
                .collect();
            let p = pattern_product(net, &patterns).unwrap();
            for xb in 0u64..(1 << p.cols()) {
                let x: Vec<f64> = (0..p.cols()).map(|j| if (xb >> j) & 1 == 1 { -1.0 } else { 1.0 }).collect();
                let v: f64 = p.mul_vec(&x).iter().map(|v| v.abs()).sum();
                best = best.max(v);
            }
        }
        best
    }

    #[test]
    fn coefficient_values() {
        assert_eq!(mp_coefficient(3, MpVariant::A).unwrap(), 0.5);
        assert_eq!(mp_coefficient(4, MpVariant::B).unwrap(), 1.0 / 16.0);
        assert_eq!(mp_coefficient(2, MpVariant::A).unwrap(), 1.0);
        assert_eq!(mp_coefficient(2, MpVariant::B).unwrap(), 2.0);
        assert!(mp_coefficient(1, MpVariant::A).is_err());
    }

    #[test]
    fn block_plan_partitions() {
        let p = BlockPlan::greedy(5, 2).unwrap();
        assert_eq!(p.blocks, vec![0..2, 2..4, 4..5]);
        assert_eq!(p.damping(), 4.0);
        assert_eq!(BlockPlan::greedy(3, 3).unwrap().damping(), 16.0);
        assert_eq!(BlockPlan::greedy(4, 1).unwrap().damping(), 1.0);
        assert!(BlockPlan::greedy(3, 0).is_err());
        assert!(BlockPlan::greedy(3, 4).is_err());
    }

    #[test]
    fn layer_state_matches_matmul() {
        let net = generate_synthetic(3, &[3, 4, 2], 1.0).unwrap();
        let d = vec![true, false, true, true];
        let s = LayerState::start(&net, d.clone()).unwrap().advance(&net, vec![]).unwrap();
        let direct = net.weights(1).matmul(&mask_rows(net.weights(0), &d));
        assert_eq!(s.p, direct);
        assert!(LayerState::start(&net, vec![true]).is_err());
    }

    #[test]
    fn exact_block_matches_naive() {
        for seed in 0..20 {
            let net = generate_synthetic(seed, &[4, 3, 3, 3], 1.0).unwrap();
            let fast = exact_block_constant(&net, true);
            let slow = naive_block(&net);
            assert!((fast - slow).abs() <= 1e-12 * slow.max(1.0), "{fast} vs {slow}");
        }
    }

    #[test]
    fn exact_single_output_equals_brute_force() {
        for seed in 0..20 {
            let net = generate_synthetic(seed, &[5, 4, 3, 2], 1.0).unwrap();
            let bf = brute_force_fgl(&net, 1, 22).unwrap().value;
            let ex = exact_block_constant(&net.single_output(1).unwrap(), false);
            assert!((bf - ex).abs() <= 1e-12 * bf.max(1.0));
        }
    }

    #[test]
    fn update_rule_is_coordinatewise_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..30 {
            let net = generate_synthetic(seed, &[5, 4, 6, 3], 1.0).unwrap();
            let x: Vec<i8> = (0..5).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
            let y: Vec<i8> = (0..3).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
            for h in 0..2 {
                let mut pat: Vec<Vec<bool>> =
                    net.hidden_widths().iter().map(|&w| (0..w).map(|_| rng.gen()).collect()).collect();
                update_layer(&net, &mut pat, h, &x, &y);
                let base = bilinear_objective(&net, &pat, &x, &y);
                for i in 0..pat[h].len() {
                    pat[h][i] = !pat[h][i];
                    let flipped = bilinear_objective(&net, &pat, &x, &y);
                    pat[h][i] = !pat[h][i];
                    assert!(flipped <= base + 1e-12, "flip raised {base} to {flipped}");
                }
            }
        }
    }

    #[test]
    fn objective_matches_dense_product() {
        let net = generate_synthetic(9, &[4, 5, 3, 2], 1.0).unwrap();
        let pat = vec![vec![true, false, true, true, false], vec![false, true, true]];
        let x = [1i8, -1, -1, 1];
        let y = [-1i8, 1];
        let p = pattern_product(&net, &pat).unwrap();
        let xf: Vec<f64> = x.iter().map(|&s| f64::from(s)).collect();
        let dense: f64 = p.mul_vec(&xf).iter().zip(&y).map(|(v, &s)| v * f64::from(s)).sum();
        assert!((dense - bilinear_objective(&net, &pat, &x, &y)).abs() < 1e-12);
    }

    #[test]
    fn recursion_trace_increases() {
        let cfg = MultilayerConfig::default();
        for seed in 0..10 {
            let net = generate_synthetic(seed, &[6, 6, 6, 4], 1.0).unwrap();
            let out = recursion_search(&net, &cfg).unwrap();
            assert!(!out.trace.is_empty());
            for w in out.trace.windows(2) {
                assert!(w[1] > w[0]);
            }
            assert_eq!(*out.trace.last().unwrap(), out.value);
            let direct = bilinear_objective(&net, &out.patterns, &out.x, &out.y);
            assert!((direct - out.value).abs() < 1e-9);
        }
    }

    #[test]
    fn recursion_matches_exhaustive_on_three_layers() {
        let cfg = exhaustive_cfg();
        let mut hits = 0;
        for seed in 0..100 {
            let net = generate_synthetic(seed, &[6, 7, 5, 3], 1.0).unwrap();
            let bf = brute_force_fgl(&net, 0, 22).unwrap().value;
            let est = layerwise_recursion(&net, 0, &cfg).unwrap().value;
            assert!(est <= bf * (1.0 + 1e-9) + 1e-12);
            if (est - bf).abs() <= 1e-9 * bf.max(1.0) {
                hits += 1;
            }
        }
        assert!(hits >= 90, "{hits}/100");
    }

    #[test]
    fn depth_two_recursion_equals_two_layer() {
        let net = generate_synthetic(4, &[5, 6, 3], 1.0).unwrap();
        let cfg = exhaustive_cfg();
        let a = layerwise_recursion(&net, 2, &cfg).unwrap().value;
        let b = hiq_lip_two_layer(&net, 2, &cfg.hiq).unwrap().value;
        assert_eq!(a, b);
    }

    #[test]
    fn zero_middle_layer_gives_zero() {
        let net = generate_synthetic(1, &[4, 3, 3, 2], 1.0).unwrap();
        let mut mats: Vec<Matrix> = (0..3).map(|k| net.weights(k).clone()).collect();
        mats[1] = Matrix::zeros(3, 3);
        let z = Network::from_matrices(mats).unwrap();
        assert_eq!(layerwise_recursion(&z, 0, &MultilayerConfig::default()).unwrap().value, 0.0);
        assert_eq!(block_product(&z, 0, 2, &exhaustive_cfg()).unwrap().value, 0.0);
    }

    #[test]
    fn single_block_of_one_layer() {
        let net = Network::from_matrices(vec![Matrix::from_rows(&[[1.0, -2.0], [0.5, 3.0]])]).unwrap();
        let est = block_product(&net, 1, 1, &exhaustive_cfg()).unwrap();
        assert_eq!(est.value, 3.5);
        assert_eq!(est.bound_kind, BoundKind::Upper);
    }

    #[test]
    fn variants_share_pair_cache() {
        let cfg = exhaustive_cfg();
        for (seed, dims) in [(1u64, vec![4, 5, 5, 3]), (2, vec![4, 4, 4, 4, 3]), (3, vec![3, 3, 3, 3, 3, 2])] {
            let net = generate_synthetic(seed, &dims, 1.0).unwrap();
            let pairs = pair_constants(&net, 1, &cfg).unwrap();
            let d = net.depth();
            let a = pairs.combine(MpVariant::A);
            let b = pairs.combine(MpVariant::B);
            assert_eq!(b, a / (d as f64).powi(d as i32 - 3));
            assert_eq!(a, pairs.product() * mp_coefficient(d, MpVariant::A).unwrap());
            if d == 3 {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn variant_a_above_brute_force_on_three_layers() {
        let cfg = exhaustive_cfg();
        for seed in 0..100 {
            let net = generate_synthetic(seed, &[5, 6, 6, 3], 1.0).unwrap();
            let bf = brute_force_fgl(&net, 0, 22).unwrap().value;
            let a = hiq_lip_multilayer(&net, 0, MpVariant::A, &cfg).unwrap().value;
            assert!(a >= bf * (1.0 - 1e-9), "seed {seed}: {a} < {bf}");
        }
    }

    #[test]
    fn block_product_above_brute_force_on_four_layers() {
        let cfg = exhaustive_cfg();
        for seed in 0..100 {
            let net = generate_synthetic(seed, &[8, 6, 6, 6, 10], 1.0).unwrap();
            let bf = brute_force_fgl(&net, 8, 22).unwrap().value;
            let blk = block_product(&net, 8, 2, &cfg).unwrap().value;
            assert!(blk >= bf * (1.0 - 1e-9), "seed {seed}: {blk} < {bf}");
        }
    }

    #[test]
    fn damped_block_product_can_undershoot() {
        let cfg = exhaustive_cfg();
        let under = (0..50).any(|seed| {
            let net = generate_synthetic(seed, &[8, 4, 4, 4, 10], 1.0).unwrap();
            let bf = brute_force_fgl(&net, 8, 22).unwrap().value;
            block_product(&net, 8, 2, &cfg).unwrap().value < bf
        });
        assert!(under);
    }

    #[test]
    fn shallow_nets_rejected() {
        let net = generate_synthetic(1, &[3, 3, 2], 1.0).unwrap();
        assert!(hiq_lip_multilayer(&net, 0, MpVariant::A, &MultilayerConfig::default()).is_err());
        let one = generate_synthetic(1, &[3, 2], 1.0).unwrap();
        assert!(layerwise_recursion(&one, 0, &MultilayerConfig::default()).is_err());
    }

    #[test]
    fn single_matrix_reading_uses_cut_norms() {
        let mut cfg = exhaustive_cfg();
        cfg.pair_reading = PairReading::SingleMatrix;
        let net = generate_synthetic(8, &[4, 5, 4, 3], 1.0).unwrap();
        let pairs = pair_constants(&net, 2, &cfg).unwrap();
        assert_eq!(pairs.gammas.len(), 2);
        assert_eq!(pairs.gammas[0], cut_norm_exact(net.weights(1)));
        let u: f64 = net.class_row(2).unwrap().iter().map(|v| v.abs()).sum();
        assert!((pairs.gammas[1] - u).abs() < 1e-12);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let net = generate_synthetic(12, &[6, 6, 6, 6, 3], 1.0).unwrap();
        let mut cfg = MultilayerConfig::default();
        let a = layerwise_recursion(&net, 1, &cfg).unwrap().value;
        let pa = pair_constants(&net, 1, &cfg).unwrap();
        cfg.hiq.solver.parallel = false;
        assert_eq!(a, layerwise_recursion(&net, 1, &cfg).unwrap().value);
        assert_eq!(pa, pair_constants(&net, 1, &cfg).unwrap());
    }
}
