//! HiPPI: cycle-consistent multi-matching by projected power iteration.
//!
//! Point sets are matched jointly by assigning every point to one of `d`
//! universe columns. The solver alternates a power step on a geometry-aware
//! reweighted similarity with a blockwise projection onto partial
//! permutations, so every iterate is cycle-consistent by construction.

pub mod assignment;
pub mod baselines;
pub mod bench;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod formats;
pub mod kernels;
pub mod pipeline;
pub mod solver;
pub mod synthgen;
pub mod types;

pub use assignment::{
    lap_auction, lap_exact, project_to_universe, AuctionConfig, ProjectionMethod, ScoreBlock,
};
pub use config::{InitMethod, Method, RunConfig};
pub use error::{Error, Result};
pub use evaluation::{cycle_error, fscore, verify_cycle_consistency, CycleReport, MatchReport};
pub use kernels::{build_adjacency, build_similarity, psd_report, KernelConfig, WeightMode};
pub use solver::{hippi_solve, objective, SolverConfig, SolverTrace, UniverseSizeRule};
pub use synthgen::{generate, planted_assignment, GenConfig, TransformFamily};
pub use types::{
    BlockIndex, Label, MultiAdjacency, Object, PairwiseMatchingSet, ProblemInstance,
    SimilarityMatrix, UniverseAssignment,
};
