//! Gaussian random fields on compact metric graphs.
//!
//! The crate builds metric graphs and point sets on them, computes geodesic
//! and resistance distances, assembles exponential-kernel covariances and
//! Whittle–Matérn (α = 1) precisions, and checks the resulting Gaussian
//! vectors for MTP₂, Markov consistency with the graph, and faithfulness.

// `!(x > tol)` style tests reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod csvio;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod markov;
pub mod metrics;
pub mod models;
pub mod report;

pub use error::{Error, Result};
pub use graph::{GraphPoint, MetricGraph, PointSet, RefinedGraph};
pub use linalg::{LabeledMatrix, MatrixKind};
pub use metrics::Metric;
pub use report::{CheckReport, Violation};
