//! Multi-target data association as a graph transduction game.
//!
//! Detections from a pre-recorded frame sequence are described by the
//! covariance of per-pixel features, compared with the Förstner metric on
//! SPD matrices, and connected in a complete similarity graph. A few
//! detections carry known identities; the remaining ones are players of a
//! polymatrix game whose equilibrium, reached with discrete replicator
//! dynamics, assigns every detection to a target.
//!
//! The crate is organized bottom-up:
//!
//! * [`linalg`]: Cholesky, Jacobi symmetric eigensolver, generalized eigenvalues.
//! * [`descriptor`]: HSV + Sobel features, covariance descriptors, Förstner distance.
//! * [`graph`]: pairwise distances, Gaussian affinity, symmetric normalization.
//! * [`game`]: strategy profiles, payoffs, replicator dynamics, Nash checks.
//! * [`tracking`]: scenario I/O, the end-to-end pipeline, metrics and experiments.
//! * [`synth`]: deterministic synthetic scenarios with ground truth.

pub mod descriptor;
pub mod error;
pub mod game;
pub mod graph;
pub mod linalg;
pub mod rng;
pub mod synth;
pub mod tracking;

pub use error::{Error, Result};
