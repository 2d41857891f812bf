use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Which side of the bipartite cut formulation a variable belongs to. The
/// multilevel driver only merges variables that share a side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Row,
    Column,
    Any,
}

/// An Ising instance to be minimized:
/// `energy(s) = -Σ_{i<j} J_ij s_i s_j - Σ_i h_i s_i` over `s ∈ {±1}^n`.
///
/// Couplings are kept with `i < j`; adding `(j, i)` accumulates into `(i, j)`.
/// Pinned variables hold a fixed spin in every returned assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingProblem {
    n_vars: usize,
    couplings: BTreeMap<(usize, usize), f64>,
    fields: Vec<f64>,
    pinned: BTreeMap<usize, i8>,
    sides: Vec<Side>,
}

impl CouplingProblem {
    pub fn new(n_vars: usize) -> Self {
        CouplingProblem {
            n_vars,
            couplings: BTreeMap::new(),
            fields: vec![0.0; n_vars],
            pinned: BTreeMap::new(),
            sides: vec![Side::Any; n_vars],
        }
    }

    pub fn add_coupling(&mut self, i: usize, j: usize, weight: f64) -> Result<()> {
        if i == j {
            return Err(Error::invalid(format!("self-coupling on variable {i}")));
        }
        if i >= self.n_vars || j >= self.n_vars {
            return Err(Error::invalid(format!(
                "coupling ({i}, {j}) out of range for {} variables",
                self.n_vars
            )));
        }
        if !weight.is_finite() {
            return Err(Error::invalid(format!("non-finite coupling ({i}, {j})")));
        }
        let key = (i.min(j), i.max(j));
        *self.couplings.entry(key).or_insert(0.0) += weight;
        Ok(())
    }

    pub fn set_field(&mut self, i: usize, h: f64) -> Result<()> {
        if i >= self.n_vars {
            return Err(Error::invalid(format!("field index {i} out of range")));
        }
        if !h.is_finite() {
            return Err(Error::invalid(format!("non-finite field on {i}")));
        }
        self.fields[i] = h;
        Ok(())
    }

    pub fn pin(&mut self, i: usize, spin: i8) -> Result<()> {
        if i >= self.n_vars {
            return Err(Error::invalid(format!("pinned index {i} out of range")));
        }
        if spin != 1 && spin != -1 {
            return Err(Error::invalid(format!("pinned spin must be ±1, got {spin}")));
        }
        self.pinned.insert(i, spin);
        Ok(())
    }

    pub fn set_side(&mut self, i: usize, side: Side) {
        self.sides[i] = side;
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Couplings as `((i, j), J_ij)` with `i < j`, in lexicographic order.
    pub fn couplings(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.couplings.iter().map(|(&k, &w)| (k, w))
    }

    pub fn num_couplings(&self) -> usize {
        self.couplings.len()
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings
            .get(&(i.min(j), i.max(j)))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn has_fields(&self) -> bool {
        self.fields.iter().any(|&h| h != 0.0)
    }

    pub fn pinned(&self) -> &BTreeMap<usize, i8> {
        &self.pinned
    }

    pub fn sides(&self) -> &[Side] {
        &self.sides
    }

    pub fn free_count(&self) -> usize {
        self.n_vars - self.pinned.len()
    }

    /// Symmetric neighbor lists.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n_vars];
        for (&(i, j), &w) in &self.couplings {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        adj
    }

    /// Energy with validation of the spin vector.
    pub fn energy(&self, spins: &[i8]) -> Result<f64> {
        if spins.len() != self.n_vars {
            return Err(Error::invalid(format!(
                "spin vector has length {}, problem has {} variables",
                spins.len(),
                self.n_vars
            )));
        }
        if let Some(pos) = spins.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::invalid(format!(
                "spin {pos} is {}, expected ±1",
                spins[pos]
            )));
        }
        Ok(self.energy_unchecked(spins))
    }

    pub(crate) fn energy_unchecked(&self, spins: &[i8]) -> f64 {
        let mut e = 0.0;
        for (&(i, j), &w) in &self.couplings {
            e -= w * f64::from(spins[i] * spins[j]);
        }
        for (h, &s) in self.fields.iter().zip(spins) {
            e -= h * f64::from(s);
        }
        e
    }

    /// Wraps `spins` with its recomputed energy.
    pub fn assignment(&self, spins: Vec<i8>) -> Result<SpinAssignment> {
        let energy = self.energy(&spins)?;
        Ok(SpinAssignment { spins, energy })
    }

    /// Relabels variables: new index of old variable `i` is `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<CouplingProblem> {
        if perm.len() != self.n_vars {
            return Err(Error::invalid("permutation length mismatch"));
        }
        let mut out = CouplingProblem::new(self.n_vars);
        for (&(i, j), &w) in &self.couplings {
            out.add_coupling(perm[i], perm[j], w)?;
        }
        for (i, &h) in self.fields.iter().enumerate() {
            out.fields[perm[i]] = h;
            out.sides[perm[i]] = self.sides[i];
        }
        for (&i, &s) in &self.pinned {
            out.pin(perm[i], s)?;
        }
        Ok(out)
    }
}

/// A candidate solution together with its energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinAssignment {
    pub spins: Vec<i8>,
    pub energy: f64,
}

impl SpinAssignment {
    /// `{0,1}` label view (`s = 2x - 1`).
    pub fn labels(&self) -> Vec<u8> {
        self.spins.iter().map(|&s| u8::from(s > 0)).collect()
    }
}

/// Energy of `spins` under `problem`; validates length and ±1 entries.
pub fn energy(problem: &CouplingProblem, spins: &[i8]) -> Result<f64> {
    problem.energy(spins)
}
