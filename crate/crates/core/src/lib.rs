//! Bound propagation for discrete graphical models.
//!
//! Computes guaranteed lower and upper bounds on marginal probabilities by
//! solving small linear programs over separator distributions and feeding
//! every bound found back in as a constraint on its neighbours.

pub mod clusters;
pub mod conditionals;
pub mod engine;
pub mod error;
pub mod io;
pub mod lp;
pub mod model;
pub mod netgen;
pub mod oracle;
pub mod store;

pub use clusters::{derive_marginal_sets, enumerate_clusters, ClusterSet, ClusterSpec, MarginalTask};
pub use conditionals::{conditional_table, ConditionalTable};
pub use engine::{
    estimate_alpha, propagate, update_cluster, AlphaEstimate, ConvergenceReport, PropagationConfig, Propagator,
};
pub use error::{Error, Result};
pub use model::{apply_evidence, build_network, linear_index, markov_blanket, Evidence, Factor, Network, VarSet};
pub use store::{init_bounds, BoundEntry, BoundsStore};
