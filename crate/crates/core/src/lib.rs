//! Score-based Markov chain sampling of district plans, election re-tallies
//! and ensemble-relative gerrymandering indices.

// negated comparisons below are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod ensemble;
pub mod error;
pub mod graph;
pub mod plan;
pub mod sampler;
pub mod score;
pub mod synth;
pub mod tally;
pub mod tune;

pub use error::{Error, Result};
pub use graph::{ideal_population, load_graph, DistrictGraph, Vtd};
pub use plan::{max_district_deviation, Plan, PlanState};
pub use score::{Compactness, ScoreBreakdown, ScoreWeights};
