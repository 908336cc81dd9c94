//! Learning and tracking the weighted topology of an undirected graph from
//! signals that vary smoothly over it.
//!
//! The batch problem is
//!
//! ```text
//! minimize  2zᵀw + β‖w‖² + ι(w ≥ 0) − α 1ᵀ log(S w)
//! ```
//!
//! over upper-triangular edge weights `w`, where `z` holds pairwise squared
//! distances between nodal time series and `S` maps edge weights to degrees.
//! [`padmm`] solves it with proximal ADMM; [`online`] runs one PADMM
//! iteration per incoming signal against a forgetting-factor average of the
//! dissimilarities, which tracks slowly changing graphs at `O(n²)` cost per
//! sample.
//!
//! ```
//! use topolearn::{dissim, padmm::{batch_solve, Hyperparams}};
//!
//! let signals = vec![vec![1.0, 1.1, -2.0], vec![0.5, 0.4, 1.0]];
//! let z = dissim::mean_dissimilarity(&signals).unwrap();
//! let hp = Hyperparams::with_defaults(3, 1.0, 0.5);
//! let sol = batch_solve(&z, &hp, 1e-9, 10_000).unwrap();
//! assert!(sol.converged);
//! // nodes 0 and 1 carry the most similar signals
//! let w = sol.weights();
//! assert!(w.weight(0, 1).unwrap() > w.weight(0, 2).unwrap());
//! ```

pub mod dissim;
pub mod experiment;
pub mod error;
pub mod fit;
pub mod graph;
pub mod io;
pub mod online;
pub mod padmm;
pub mod report;
pub mod synth;

#[cfg(doctest)]
mod book;

pub use error::{Error, Result};
pub use graph::{DegreeMap, EdgeIndexing, EdgeVector};
