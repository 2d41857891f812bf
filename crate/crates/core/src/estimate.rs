//! The result record shared by every estimator.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::hierarchy::LevelTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Upper,
    Lower,
    Heuristic,
    Exact,
}

impl std::fmt::Display for BoundKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoundKind::Upper => "upper",
            BoundKind::Lower => "lower",
            BoundKind::Heuristic => "heuristic",
            BoundKind::Exact => "exact",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub reads: u64,
    pub sweeps: u64,
    pub levels: u64,
    pub iterations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub method: String,
    pub value: f64,
    pub bound_kind: BoundKind,
    pub wall_time_s: f64,
    pub solver_stats: SolverStats,
    pub config_digest: String,
    /// Per-level refinement trace, only filled by the multilevel driver.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<LevelTrace>,
}

impl Estimate {
    pub fn new(method: impl Into<String>, value: f64, bound_kind: BoundKind) -> Self {
        Estimate {
            method: method.into(),
            value,
            bound_kind,
            wall_time_s: 0.0,
            solver_stats: SolverStats::default(),
            config_digest: String::new(),
            trace: Vec::new(),
        }
    }

    pub fn with_time(mut self, start: std::time::Instant) -> Self {
        self.wall_time_s = start.elapsed().as_secs_f64();
        self
    }

    pub fn with_digest<C: Serialize>(mut self, config: &C) -> Self {
        self.config_digest = config_digest(config);
        self
    }
}

/// First 16 hex digits of the SHA-256 of the config's JSON serialization.
/// Struct fields serialize in declaration order, so the digest is stable.
pub fn config_digest<C: Serialize>(config: &C) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    let hash = Sha256::digest(&bytes);
    hash[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_stable_under_reserialization() {
        let cfg = crate::cutnorm::SolverConfig::default();
        let again: crate::cutnorm::SolverConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(config_digest(&cfg), config_digest(&again));
        assert_eq!(config_digest(&cfg).len(), 16);
    }

    #[test]
    fn estimate_json_round_trip() {
        let e = Estimate::new("mp", 2.0, BoundKind::Upper);
        let s = serde_json::to_string(&e).unwrap();
        assert!(s.contains("\"bound_kind\":\"upper\""));
        assert!(!s.contains("trace"));
        let back: Estimate = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
    }
}
