//! Pairwise coarsening: greedy closest-pair matching in the embedding, then
//! `A_c = Pᵀ A_f P` with self-loops dropped.

use std::collections::BTreeMap;

use super::embed::Embedding;
use super::graph::{Label, LevelGraph};

/// Links a fine level to the next coarser one.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// Merged fine pairs `(i, j)` with `i < j`.
    pub pairs: Vec<(usize, usize)>,
    /// Fine vertices carried through unmerged (including pinned ones).
    pub singles: Vec<usize>,
    /// `F`: fine vertex → coarse vertex.
    pub map: Vec<usize>,
    pub n_coarse: usize,
}

impl Matching {
    pub fn identity(n: usize) -> Self {
        Matching {
            pairs: Vec::new(),
            singles: (0..n).collect(),
            map: (0..n).collect(),
            n_coarse: n,
        }
    }

    pub fn n_fine(&self) -> usize {
        self.map.len()
    }

    /// Fine members of every coarse vertex, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.n_coarse];
        for (i, &c) in self.map.iter().enumerate() {
            m[c].push(i);
        }
        m
    }

    /// Builds `F` from pairs; unmatched vertices become singles. Coarse ids
    /// follow the smallest fine member.
    fn from_pairs(n: usize, pairs: Vec<(usize, usize)>) -> Self {
        let mut partner = vec![usize::MAX; n];
        for &(i, j) in &pairs {
            partner[i] = j;
            partner[j] = i;
        }
        let mut map = vec![usize::MAX; n];
        let mut singles = Vec::new();
        let mut next = 0;
        for i in 0..n {
            if map[i] != usize::MAX {
                continue;
            }
            map[i] = next;
            if partner[i] == usize::MAX {
                singles.push(i);
            } else {
                map[partner[i]] = next;
            }
            next += 1;
        }
        let mut pairs = pairs;
        pairs.sort_unstable();
        Matching {
            pairs,
            singles,
            map,
            n_coarse: next,
        }
    }
}

/// Merges closest same-label free vertices greedily (ascending distance, ties
/// by lowest indices) and builds the coarse graph. Pinned vertices stay
/// singles. Coarse weights are summed in the same order as the dense product
/// `(PᵀA)P`, so they match it bit for bit.
pub fn coarsen_once(graph: &LevelGraph, emb: &Embedding) -> (LevelGraph, Matching) {
    let n = graph.n();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    let labels = graph.labels();
    for i in 0..n {
        if labels[i] == Label::Pinned {
            continue;
        }
        for j in (i + 1)..n {
            if labels[j] == labels[i] {
                candidates.push((emb.distance(i, j), i, j));
            }
        }
    }
    candidates.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut matched = vec![false; n];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !matched[i] && !matched[j] {
            matched[i] = true;
            matched[j] = true;
            pairs.push((i, j));
        }
    }
    let matching = Matching::from_pairs(n, pairs);
    let coarse = contract(graph, &matching);
    (coarse, matching)
}

/// Coarse graph implied by a matching.
pub fn contract(graph: &LevelGraph, matching: &Matching) -> LevelGraph {
    let n = graph.n();
    let nc = matching.n_coarse;
    let members = matching.members();
    let mut row = vec![0.0; n];
    let mut row_touched = vec![false; n];
    let mut touched = Vec::new();
    let mut acc = vec![0.0; nc];
    let mut acc_touched = vec![false; nc];
    let mut acc_list = Vec::new();
    let mut adj = vec![Vec::new(); nc];
    for (c, group) in members.iter().enumerate() {
        // row = (Pᵀ A)[c][·], accumulated over members ascending.
        for &i in group {
            for &(j, w) in graph.neighbors(i) {
                if !row_touched[j] {
                    row_touched[j] = true;
                    touched.push(j);
                }
                row[j] += w;
            }
        }
        touched.sort_unstable();
        // (Pᵀ A P)[c][d] = Σ_{j ∈ d} row[j], j ascending.
        for &j in &touched {
            let d = matching.map[j];
            if !acc_touched[d] {
                acc_touched[d] = true;
                acc_list.push(d);
            }
            acc[d] += row[j];
            row[j] = 0.0;
            row_touched[j] = false;
        }
        touched.clear();
        acc_list.sort_unstable();
        for &d in &acc_list {
            if d != c && acc[d] != 0.0 {
                adj[c].push((d, acc[d]));
            }
            acc[d] = 0.0;
            acc_touched[d] = false;
        }
        acc_list.clear();
    }
    let labels = members.iter().map(|g| graph.labels()[g[0]]).collect();
    let fields = members
        .iter()
        .map(|g| g.iter().fold(0.0, |s, &i| s + graph.fields()[i]))
        .collect();
    let pins: BTreeMap<usize, i8> = graph
        .pins()
        .iter()
        .map(|(&i, &s)| (matching.map[i], s))
        .collect();
    LevelGraph::from_parts(adj, labels, fields, pins)
}

/// Sum of `a_ij` over merged pairs: the energy offset between a coarse
/// assignment and its projection (`E_c(s_c) = E_f(s_f) + offset`).
pub fn intra_pair_weight(graph: &LevelGraph, matching: &Matching) -> f64 {
    matching.pairs.iter().map(|&(i, j)| graph.weight(i, j)).sum()
}
