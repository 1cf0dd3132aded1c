//! Privacy-preserving frequent itemset mining over randomly distorted
//! transaction databases.
//!
//! Each 1 in the customer-by-item matrix is kept with probability `p` and
//! each 0 with probability `q`. A miner that knows `(p, q)` reconstructs
//! itemset supports from the distorted matrix alone.

#![allow(clippy::needless_range_loop)]

mod bits;

pub mod apriori;
pub mod corpus;
pub mod distortion;
pub mod emask;
pub mod error;
pub mod evaluation;
pub mod lattice;
pub mod linalg;
pub mod planner;
pub mod privacy;

pub use apriori::{mine, Apriori, CountingStrategy, PassStats};
pub use corpus::{compute_stats, generate_synthetic, DatasetStats, GenParams, TransactionDatabase};
pub use distortion::{distort_database, DistortionParams};
pub use emask::{build_transition_matrix, mine_distorted, EmaskMiner, TransitionMatrix};
pub use error::{Error, Result};
pub use evaluation::{run_experiment, run_experiment_with, ExperimentConfig, ExperimentReport};
pub use lattice::{FrequentLattice, Itemset};
pub use planner::{candidate_grid, ErrorNormalization, PlanThresholds};
pub use privacy::{basic_privacy, reinterrogated_privacy, PrivacyMode};
