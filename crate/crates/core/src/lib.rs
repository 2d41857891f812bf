//! Estimation of the l∞→l1 formal global Lipschitz constant (FGL) of dense
//! ReLU networks.
//!
//! The two-layer FGL is encoded exactly as an Ising minimization
//! ([`cutnorm::build_fgl_problem`]) and solved through a multilevel
//! coarsen/solve/refine driver ([`hierarchy`]) over pluggable backends
//! (exhaustive, simulated annealing, remote device). Deeper networks are
//! handled by a layer-wise alternating maximization, a block-product bound and
//! the pairwise MP-A/MP-B estimators ([`multilayer`]). Reference estimators
//! (norm product, gradient sampling, brute force) live in [`baselines`].
//!
//! With the default `parallel` feature, annealing restarts, exhaustive
//! enumeration, gradient sampling and bench cells run on rayon; every parallel
//! path produces results identical to its sequential counterpart.

pub mod baselines;
pub mod bench;
pub mod cutnorm;
mod error;
pub mod estimate;
mod exec;
pub mod hierarchy;
pub mod matrix;
pub mod multilayer;
pub mod netio;

pub use error::{Error, Result};
pub use estimate::{BoundKind, Estimate, SolverStats};
pub use matrix::Matrix;
pub use netio::{ClassReduction, Network, WeightMatrix};
