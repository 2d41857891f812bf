use std::collections::BTreeMap;

use crate::cutnorm::{CouplingProblem, Side};
use crate::matrix::Matrix;
use crate::{Error, Result};

/// Vertex tag. Only vertices with equal free labels may be merged; the pinned
/// vertex never merges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Row,
    Column,
    Any,
    Pinned,
}

/// One level of the multilevel hierarchy: a symmetric weighted graph with
/// zero diagonal, per-vertex linear terms and optional pinned vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelGraph {
    /// Neighbor lists sorted by vertex index.
    adj: Vec<Vec<(usize, f64)>>,
    labels: Vec<Label>,
    fields: Vec<f64>,
    pins: BTreeMap<usize, i8>,
}

impl LevelGraph {
    /// `adj` must be symmetric without self-loops; lists are sorted here.
    pub(crate) fn from_parts(
        mut adj: Vec<Vec<(usize, f64)>>,
        labels: Vec<Label>,
        fields: Vec<f64>,
        pins: BTreeMap<usize, i8>,
    ) -> Self {
        for list in &mut adj {
            list.sort_by_key(|&(j, _)| j);
        }
        LevelGraph {
            adj,
            labels,
            fields,
            pins,
        }
    }

    pub fn from_problem(problem: &CouplingProblem) -> Self {
        let labels = problem
            .sides()
            .iter()
            .enumerate()
            .map(|(i, side)| {
                if problem.pinned().contains_key(&i) {
                    Label::Pinned
                } else {
                    match side {
                        Side::Row => Label::Row,
                        Side::Column => Label::Column,
                        Side::Any => Label::Any,
                    }
                }
            })
            .collect();
        LevelGraph::from_parts(
            problem.adjacency(),
            labels,
            problem.fields().to_vec(),
            problem.pinned().clone(),
        )
    }

    /// Unlabeled graph from a dense symmetric matrix (diagonal ignored).
    pub fn from_dense(a: &Matrix) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::invalid("adjacency must be square"));
        }
        let n = a.rows();
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                if i != j && a[(i, j)] != a[(j, i)] {
                    return Err(Error::invalid(format!("adjacency not symmetric at ({i}, {j})")));
                }
                if i != j && a[(i, j)] != 0.0 {
                    adj[i].push((j, a[(i, j)]));
                }
            }
        }
        Ok(LevelGraph::from_parts(adj, vec![Label::Any; n], vec![0.0; n], BTreeMap::new()))
    }

    pub fn to_problem(&self) -> CouplingProblem {
        let mut p = CouplingProblem::new(self.n());
        for (i, list) in self.adj.iter().enumerate() {
            for &(j, w) in list {
                if i < j {
                    p.add_coupling(i, j, w).expect("valid level graph");
                }
            }
            p.set_field(i, self.fields[i]).expect("finite field");
            p.set_side(
                i,
                match self.labels[i] {
                    Label::Row => Side::Row,
                    Label::Column => Side::Column,
                    _ => Side::Any,
                },
            );
        }
        for (&i, &s) in &self.pins {
            p.pin(i, s).expect("valid pin");
        }
        p
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adj[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn pins(&self) -> &BTreeMap<usize, i8> {
        &self.pins
    }

    pub fn is_pinned(&self, i: usize) -> bool {
        self.pins.contains_key(&i)
    }

    pub fn free_count(&self) -> usize {
        self.n() - self.pins.len()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adj[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .map_or(0.0, |pos| self.adj[i][pos].1)
    }

    /// `Σ_{i≠j} |a_ij|`, each undirected edge counted twice.
    pub fn total_abs_weight(&self) -> f64 {
        self.adj.iter().flatten().map(|&(_, w)| w.abs()).sum()
    }

    pub fn dense_adjacency(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n(), self.n());
        for (i, list) in self.adj.iter().enumerate() {
            for &(j, w) in list {
                m[(i, j)] = w;
            }
        }
        m
    }

    /// `-Σ_{i<j} a_ij s_i s_j - Σ h_i s_i`.
    pub fn energy(&self, spins: &[i8]) -> f64 {
        let mut e = 0.0;
        for (i, list) in self.adj.iter().enumerate() {
            for &(j, w) in list {
                if i < j {
                    e -= w * f64::from(spins[i] * spins[j]);
                }
            }
        }
        for (h, &s) in self.fields.iter().zip(spins) {
            e -= h * f64::from(s);
        }
        e
    }

    /// All-`+1` start with pins applied.
    pub fn default_spins(&self) -> Vec<i8> {
        let mut s = vec![1i8; self.n()];
        for (&i, &v) in &self.pins {
            s[i] = v;
        }
        s
    }

    pub(crate) fn check_spins(&self, spins: &[i8]) -> Result<()> {
        if spins.len() != self.n() {
            return Err(Error::invalid(format!(
                "spin vector has length {}, graph has {} vertices",
                spins.len(),
                self.n()
            )));
        }
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::invalid("spins must be ±1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutnorm::build_cut_problem;

    #[test]
    fn problem_round_trip() {
        let a = Matrix::from_rows(&[[1.0, -2.0], [0.5, 0.0]]);
        let p = build_cut_problem(&a).unwrap();
        let g = LevelGraph::from_problem(&p);
        assert_eq!(g.labels(), &[Label::Row, Label::Row, Label::Column, Label::Column]);
        assert_eq!(g.weight(0, 3), -2.0);
        assert_eq!(g.weight(3, 0), -2.0);
        assert_eq!(g.weight(0, 1), 0.0);
        assert_eq!(g.to_problem(), p);
        let s = [1, -1, -1, 1];
        assert_eq!(g.energy(&s), p.energy(&s).unwrap());
    }

    #[test]
    fn dense_rejects_asymmetric() {
        let a = Matrix::from_rows(&[[0.0, 1.0], [2.0, 0.0]]);
        assert!(LevelGraph::from_dense(&a).is_err());
    }
}
