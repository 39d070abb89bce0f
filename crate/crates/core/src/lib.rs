//! Variational processing of signals on point-cloud graphs.
//!
//! The crate builds symmetric k-NN graphs over point clouds, evaluates the
//! non-local regularization objective and its smoothed variant, and solves it
//! with Gauss-Jacobi, primal-dual, and gradient-based iterations. All solvers
//! share one execution pattern: per-arc messages gathered from endpoint
//! features, reduced per vertex in CSR order.

pub mod error;
pub mod graph;
pub mod io;
pub mod operators;
pub mod signal;
pub mod solvers;
pub mod synthetic;

pub use error::{Error, Result};
pub use graph::{feature_weights, knn_graph, max_weighted_degree, symmetrize, DirectedGraph, Graph};
pub use operators::{Norm, ProblemParams};
pub use signal::{EdgeField, PointCloud, Signal};
pub use solvers::{SolveTrace, SolverConfig, SolverKind};
