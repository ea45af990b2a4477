//! Solver library for the angular-metric and angular-distance-metric
//! travelling salesman problems: transition-cost models, construction
//! heuristics (nearest neighbour, cheapest insertion, lens insertion),
//! convex-hull peeling with greedy/ILP merging, LP-relaxation rounding
//! heuristics, improvement procedures (2-opt, 3-opt, window reoptimization,
//! lens-based simulated annealing), exact baselines and a benchmark harness.

pub mod core;
pub mod error;
pub mod geometry;
pub mod milp;
pub mod rng;

mod auxgraph;

pub mod bench;
pub mod construct;
pub mod hull_heur;
pub mod improve;
pub mod lp_heur;

pub use crate::core::{
    parse_instance, path_objective, tour_objective, write_instance, CostModel, Instance,
    ModelKind, Path, Point, Tour,
};
pub use crate::error::{Error, Result};
