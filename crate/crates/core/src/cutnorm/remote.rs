//! Client for a remote Ising sampler (annealer or coherent Ising machine).
//!
//! Wire protocol: `POST {endpoint}/v1/solve` with
//! `{"num_vars":N,"linear":[[i,h_i],..],"quadratic":[[i,j,J_ij],..],"num_reads":R,"timeout_ms":T}`
//! and response `{"assignments":[[±1,..],..],"energies":[..]}`. Only free
//! variables are sent (pinned spins are folded into `linear`), numbered
//! `0..N`. Energies are `-Σ J s s - Σ h s` of the posted problem.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::solver::{FoldedProblem, SolverConfig};
use crate::{Error, Result};

/// Reported energies must agree with the local recomputation to this
/// relative tolerance.
pub const ENERGY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRequest {
    pub num_vars: usize,
    pub linear: Vec<(usize, f64)>,
    pub quadratic: Vec<(usize, usize, f64)>,
    pub num_reads: usize,
    pub timeout_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResponse {
    pub assignments: Vec<Vec<i8>>,
    pub energies: Vec<f64>,
}

impl SolveRequest {
    pub fn from_folded(problem: &FoldedProblem, cfg: &SolverConfig) -> Self {
        SolveRequest {
            num_vars: problem.n(),
            linear: problem
                .linear
                .iter()
                .enumerate()
                .filter(|(_, h)| **h != 0.0)
                .map(|(i, &h)| (i, h))
                .collect(),
            quadratic: problem.quadratic.clone(),
            num_reads: cfg.num_reads,
            timeout_ms: cfg.timeout_ms,
        }
    }
}

pub(crate) fn minimize(problem: &FoldedProblem, cfg: &SolverConfig) -> Result<Vec<i8>> {
    let endpoint = cfg
        .remote_endpoint
        .as_deref()
        .ok_or_else(|| Error::Remote("no remote endpoint configured".into()))?;
    let url = format!("{}/v1/solve", endpoint.trim_end_matches('/'));
    let request = SolveRequest::from_folded(problem, cfg);
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
        .build()
        .into();
    let mut resp = agent
        .post(&url)
        .send_json(&request)
        .map_err(|e| Error::Remote(format!("POST {url}: {e}")))?;
    let body: SolveResponse = resp
        .body_mut()
        .read_json()
        .map_err(|e| Error::Remote(format!("malformed response from {url}: {e}")))?;
    pick_verified(problem, body)
}

/// Chooses the lowest reported energy and checks it against the local energy.
pub(crate) fn pick_verified(problem: &FoldedProblem, mut resp: SolveResponse) -> Result<Vec<i8>> {
    if resp.assignments.is_empty() {
        return Err(Error::Remote("response contains no assignments".into()));
    }
    if resp.assignments.len() != resp.energies.len() {
        return Err(Error::Remote(format!(
            "{} assignments but {} energies",
            resp.assignments.len(),
            resp.energies.len()
        )));
    }
    for (k, a) in resp.assignments.iter().enumerate() {
        if a.len() != problem.n() {
            return Err(Error::Remote(format!(
                "assignment {k} has {} spins, expected {}",
                a.len(),
                problem.n()
            )));
        }
        if a.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Remote(format!("assignment {k} has a non-±1 entry")));
        }
    }
    let mut best = 0;
    for (k, &e) in resp.energies.iter().enumerate() {
        if !e.is_finite() {
            return Err(Error::Remote(format!("energy {k} is not finite")));
        }
        if e < resp.energies[best] {
            best = k;
        }
    }
    let reported = resp.energies[best];
    let local = problem.energy(&resp.assignments[best]);
    let scale = local.abs().max(reported.abs()).max(f64::MIN_POSITIVE);
    if (reported - local).abs() > ENERGY_TOLERANCE * scale {
        return Err(Error::Remote(format!(
            "reported energy {reported} disagrees with local recomputation {local}"
        )));
    }
    Ok(resp.assignments.swap_remove(best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutnorm::CouplingProblem;

    fn folded() -> FoldedProblem {
        let mut p = CouplingProblem::new(3);
        p.add_coupling(0, 1, 1.0).unwrap();
        p.add_coupling(1, 2, -2.0).unwrap();
        p.pin(2, 1).unwrap();
        FoldedProblem::new(&p)
    }

    #[test]
    fn request_carries_folded_fields() {
        let f = folded();
        let req = SolveRequest::from_folded(&f, &SolverConfig::default());
        assert_eq!(req.num_vars, 2);
        assert_eq!(req.quadratic, vec![(0, 1, 1.0)]);
        assert_eq!(req.linear, vec![(1, -2.0)]);
        let json = serde_json::to_string(&req).unwrap();
        assert!(json.contains("\"quadratic\":[[0,1,1.0]]"), "{json}");
    }

    #[test]
    fn picks_lowest_verified() {
        let f = folded();
        // E(s) = -s0 s1 + 2 s1 ; (-1,-1): -1 - 2 = -3 ; (1,1): -1 + 2 = 1
        let resp = SolveResponse {
            assignments: vec![vec![1, 1], vec![-1, -1]],
            energies: vec![1.0, -3.0],
        };
        assert_eq!(pick_verified(&f, resp).unwrap(), vec![-1, -1]);
    }

    #[test]
    fn rejects_lying_energy() {
        let f = folded();
        let resp = SolveResponse {
            assignments: vec![vec![1, 1]],
            energies: vec![-5.0],
        };
        assert!(matches!(pick_verified(&f, resp), Err(Error::Remote(_))));
    }

    #[test]
    fn rejects_malformed() {
        let f = folded();
        let bad_len = SolveResponse {
            assignments: vec![vec![1]],
            energies: vec![0.0],
        };
        assert!(pick_verified(&f, bad_len).is_err());
        let bad_spin = SolveResponse {
            assignments: vec![vec![1, 0]],
            energies: vec![0.0],
        };
        assert!(pick_verified(&f, bad_spin).is_err());
        let empty = SolveResponse {
            assignments: vec![],
            energies: vec![],
        };
        assert!(pick_verified(&f, empty).is_err());
    }

    #[test]
    fn missing_endpoint_is_error() {
        let f = folded();
        let cfg = SolverConfig {
            backend: crate::cutnorm::Backend::Remote,
            ..Default::default()
        };
        assert!(matches!(minimize(&f, &cfg), Err(Error::Remote(_))));
    }
}
