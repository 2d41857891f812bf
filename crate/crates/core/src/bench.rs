//! Benchmark harness: runs a grid of (size, seed, method) cells on synthetic
//! networks and collects one row per successful estimate.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{brute_force_fgl, mp_bound, sampling_lower_bound, SamplingConfig, DEFAULT_BF_CAP};
use crate::estimate::{config_digest, Estimate};
use crate::exec::{derive_seed, map_indexed};
use crate::hierarchy::hiq_lip_two_layer;
use crate::multilayer::{
    block_product, hiq_lip_multilayer, layerwise_recursion, multilayer_estimate, pair_constants, MpVariant,
    MultilayerConfig,
};
use crate::netio::{generate_synthetic, Network};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Suite {
    #[serde(rename = "two-layer")]
    TwoLayer,
    #[serde(rename = "multi-layer")]
    MultiLayer,
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-layer" => Ok(Suite::TwoLayer),
            "multi-layer" => Ok(Suite::MultiLayer),
            other => Err(Error::invalid(format!("unknown suite {other:?}"))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::TwoLayer => "two-layer",
            Suite::MultiLayer => "multi-layer",
        })
    }
}

/// Estimator names as accepted on the command line. The declaration order is
/// the row order within a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "hiq")]
    Hiq,
    #[serde(rename = "hiq-mp-a")]
    HiqMpA,
    #[serde(rename = "hiq-mp-b")]
    HiqMpB,
    #[serde(rename = "block")]
    Block,
    #[serde(rename = "mp")]
    Mp,
    #[serde(rename = "sample")]
    Sample,
    #[serde(rename = "bf")]
    Bf,
    #[serde(rename = "recursion")]
    Recursion,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Hiq,
        Method::HiqMpA,
        Method::HiqMpB,
        Method::Block,
        Method::Mp,
        Method::Sample,
        Method::Bf,
        Method::Recursion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Hiq => "hiq",
            Method::HiqMpA => "hiq-mp-a",
            Method::HiqMpB => "hiq-mp-b",
            Method::Block => "block",
            Method::Mp => "mp",
            Method::Sample => "sample",
            Method::Bf => "bf",
            Method::Recursion => "recursion",
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?}")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything a single estimate needs besides the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub multilayer: MultilayerConfig,
    pub sampling: SamplingConfig,
    pub bf_cap: usize,
    /// Maximum block length for `block`.
    pub block_len: usize,
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            multilayer: MultilayerConfig::default(),
            sampling: SamplingConfig::default(),
            bf_cap: DEFAULT_BF_CAP,
            block_len: 2,
        }
    }
}

impl MethodConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.multilayer.hiq.solver.seed = seed;
        c.sampling.seed = seed;
        c
    }
}

/// Runs one estimator. The pairwise methods fall back to the two-layer
/// estimator on depth-2 nets, where the pair product has a single factor.
pub fn run_method(net: &Network, class_index: usize, method: Method, cfg: &MethodConfig) -> Result<Estimate> {
    let ml = &cfg.multilayer;
    match method {
        Method::Hiq => {
            if net.depth() != 2 {
                return Err(Error::invalid(format!(
                    "method hiq needs a two-layer net (depth {}); use hiq-mp-a or recursion",
                    net.depth()
                )));
            }
            hiq_lip_two_layer(net, class_index, &ml.hiq)
        }
        Method::HiqMpA | Method::HiqMpB if net.depth() == 2 => {
            let mut est = hiq_lip_two_layer(net, class_index, &ml.hiq)?;
            est.method = method.name().into();
            Ok(est)
        }
        Method::HiqMpA => hiq_lip_multilayer(net, class_index, MpVariant::A, ml),
        Method::HiqMpB => hiq_lip_multilayer(net, class_index, MpVariant::B, ml),
        Method::Block => block_product(net, class_index, cfg.block_len.min(net.depth()), ml),
        Method::Mp => mp_bound(net, class_index),
        Method::Sample => sampling_lower_bound(net, class_index, &cfg.sampling),
        Method::Bf => brute_force_fgl(net, class_index, cfg.bf_cap),
        Method::Recursion => layerwise_recursion(net, class_index, ml),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub suite: Suite,
    /// Hidden widths (two-layer) or depths in weight matrices (multi-layer).
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub input_dim: usize,
    pub output_dim: usize,
    /// Hidden width of every layer in the multi-layer suite.
    pub hidden_width: usize,
    pub class_index: usize,
    pub weight_scale: f64,
    pub method: MethodConfig,
    pub parallel: bool,
}

impl BenchConfig {
    pub fn two_layer() -> Self {
        BenchConfig {
            suite: Suite::TwoLayer,
            sizes: vec![8, 16],
            seeds: vec![1, 2, 3],
            methods: vec![Method::Hiq, Method::Mp, Method::Sample, Method::Bf],
            input_dim: 8,
            output_dim: 10,
            hidden_width: 6,
            class_index: 8,
            weight_scale: 1.0,
            method: MethodConfig::default(),
            parallel: true,
        }
    }

    pub fn multi_layer() -> Self {
        BenchConfig {
            suite: Suite::MultiLayer,
            sizes: vec![3, 4],
            methods: vec![
                Method::HiqMpA,
                Method::HiqMpB,
                Method::Block,
                Method::Mp,
                Method::Sample,
                Method::Bf,
                Method::Recursion,
            ],
            ..Self::two_layer()
        }
    }

    pub fn for_suite(suite: Suite) -> Self {
        match suite {
            Suite::TwoLayer => Self::two_layer(),
            Suite::MultiLayer => Self::multi_layer(),
        }
    }

    pub fn dims(&self, size: usize) -> Vec<usize> {
        match self.suite {
            Suite::TwoLayer => vec![self.input_dim, size, self.output_dim],
            Suite::MultiLayer => {
                let mut d = vec![self.input_dim];
                d.extend(std::iter::repeat(self.hidden_width).take(size.saturating_sub(1)));
                d.push(self.output_dim);
                d
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods selected"));
        }
        if self.sizes.is_empty() || self.seeds.is_empty() {
            return Err(Error::invalid("sizes and seeds must be non-empty"));
        }
        if self.class_index >= self.output_dim {
            return Err(Error::invalid(format!(
                "class {} outside 0..{}",
                self.class_index, self.output_dim
            )));
        }
        if self.suite == Suite::MultiLayer && self.sizes.iter().any(|&d| d < 2) {
            return Err(Error::invalid("multi-layer depths must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub suite: Suite,
    pub width_or_depth: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub estimate: Estimate,
}

impl BenchRow {
    pub const CSV_HEADER: [&'static str; 7] =
        ["suite", "width_or_depth", "seed", "method", "value", "bound_kind", "wall_time_s"];

    pub fn csv_record(&self) -> [String; 7] {
        [
            self.suite.to_string(),
            self.width_or_depth.to_string(),
            self.seed.to_string(),
            self.estimate.method.clone(),
            self.estimate.value.to_string(),
            self.estimate.bound_kind.to_string(),
            self.estimate.wall_time_s.to_string(),
        ]
    }

    fn method(&self) -> Option<Method> {
        self.estimate.method.parse().ok()
    }
}

/// A method that declined to run on a cell (e.g. brute force over its cap).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub width_or_depth: usize,
    pub seed: u64,
    pub method: Method,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config_digest: String,
    pub rows: Vec<BenchRow>,
    pub skipped: Vec<Skipped>,
}

/// Runs every cell; rows come back sorted by (size, seed, method).
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    let cells: Vec<(usize, u64)> = cfg
        .sizes
        .iter()
        .flat_map(|&s| cfg.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let results = map_indexed(cells.len(), cfg.parallel, |i| {
        let (size, seed) = cells[i];
        run_cell(cfg, &methods, size, seed)
    });
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        let (mut rr, mut ss) = r?;
        rows.append(&mut rr);
        skipped.append(&mut ss);
    }
    rows.sort_by(|a, b| {
        (a.width_or_depth, a.seed, a.method()).cmp(&(b.width_or_depth, b.seed, b.method()))
    });
    Ok(BenchReport {
        config_digest: config_digest(cfg),
        rows,
        skipped,
    })
}

/// Network used for cell (`size`, `seed`).
pub fn cell_network(cfg: &BenchConfig, size: usize, seed: u64) -> Result<Network> {
    generate_synthetic(derive_seed(seed, size as u64), &cfg.dims(size), cfg.weight_scale)
}

fn run_cell(cfg: &BenchConfig, methods: &[Method], size: usize, seed: u64) -> Result<(Vec<BenchRow>, Vec<Skipped>)> {
    let net = cell_network(cfg, size, seed)?;
    let mcfg = cfg.method.with_seed(seed);
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let both_mp = methods.contains(&Method::HiqMpA) && methods.contains(&Method::HiqMpB) && net.depth() >= 3;
    let shared = if both_mp {
        let start = std::time::Instant::now();
        let pairs = pair_constants(&net, cfg.class_index, &mcfg.multilayer)?;
        Some((pairs, start.elapsed().as_secs_f64()))
    } else {
        None
    };
    for &m in methods {
        let res = match (&shared, m) {
            (Some((pairs, t)), Method::HiqMpA | Method::HiqMpB) => {
                let v = if m == Method::HiqMpA { MpVariant::A } else { MpVariant::B };
                let mut est = multilayer_estimate(pairs, v, &mcfg.multilayer);
                est.wall_time_s = *t;
                Ok(est)
            }
            _ => run_method(&net, cfg.class_index, m, &mcfg),
        };
        match res {
            Ok(estimate) => rows.push(BenchRow {
                suite: cfg.suite,
                width_or_depth: size,
                seed,
                estimate,
            }),
            Err(e @ Error::OverCap { .. }) => skipped.push(Skipped {
                width_or_depth: size,
                seed,
                method: m,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok((rows, skipped))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub suite: Suite,
    pub width_or_depth: usize,
    pub method: String,
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub mean_time_s: f64,
}

/// Mean/min/max of values across seeds per (size, method).
pub fn summarize(rows: &[BenchRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Suite, usize, Option<Method>, String), Vec<&BenchRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.suite, r.width_or_depth, r.method(), r.estimate.method.clone()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((suite, size, _, method), g)| {
            let n = g.len() as f64;
            let values = g.iter().map(|r| r.estimate.value);
            SummaryRow {
                suite,
                width_or_depth: size,
                method,
                count: g.len(),
                mean: values.clone().sum::<f64>() / n,
                min: values.clone().fold(f64::INFINITY, f64::min),
                max: values.fold(f64::NEG_INFINITY, f64::max),
                mean_time_s: g.iter().map(|r| r.estimate.wall_time_s).sum::<f64>() / n,
            }
        })
        .collect()
}

fn leq(a: f64, b: f64, tol: f64) -> bool {
    a <= b + tol * b.abs().max(1.0)
}

/// Checks `sample ≤ bf ≤ {mp, hiq-mp-a, block}` in every cell where sample,
/// bf and at least one of the upper methods are present. Returns one message
/// per violated inequality, plus the number of cells checked.
pub fn sandwich_violations(rows: &[BenchRow], tol: f64) -> (usize, Vec<String>) {
    let mut cells: BTreeMap<(Suite, usize, u64), BTreeMap<Method, f64>> = BTreeMap::new();
    for r in rows {
        if let Some(m) = r.method() {
            cells.entry((r.suite, r.width_or_depth, r.seed)).or_default().insert(m, r.estimate.value);
        }
    }
    let mut checked = 0;
    let mut out = Vec::new();
    for ((suite, size, seed), vals) in cells {
        let (Some(&s), Some(&bf)) = (vals.get(&Method::Sample), vals.get(&Method::Bf)) else {
            continue;
        };
        let uppers: Vec<(Method, f64)> = [Method::Mp, Method::HiqMpA, Method::Block]
            .into_iter()
            .filter_map(|m| vals.get(&m).map(|&v| (m, v)))
            .collect();
        if uppers.is_empty() {
            continue;
        }
        checked += 1;
        if !leq(s, bf, tol) {
            out.push(format!("{suite} {size} seed {seed}: sample {s} > bf {bf}"));
        }
        for (m, v) in uppers {
            if !leq(bf, v, tol) {
                out.push(format!("{suite} {size} seed {seed}: bf {bf} > {m} {v}"));
            }
        }
    }
    (checked, out)
}

/// Checks that every emitted refinement trace is non-increasing at accepted
/// steps. Returns the number of traces checked and any violations.
pub fn trace_violations(rows: &[BenchRow]) -> (usize, Vec<String>) {
    let mut checked = 0;
    let mut out = Vec::new();
    for r in rows {
        for t in &r.estimate.trace {
            checked += 1;
            let mut prev = t.energy_before;
            for &e in &t.accepted {
                if e > prev {
                    out.push(format!(
                        "{} {} seed {} level {}: accepted {e} after {prev}",
                        r.estimate.method, r.width_or_depth, r.seed, t.level
                    ));
                }
                prev = e;
            }
            if t.energy_after > t.energy_before {
                out.push(format!(
                    "{} {} seed {} level {}: ended at {} above start {}",
                    r.estimate.method, r.width_or_depth, r.seed, t.level, t.energy_after, t.energy_before
                ));
            }
        }
    }
    (checked, out)
}
