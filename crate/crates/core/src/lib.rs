//! Numerical toolkit for the cylindrical α-stable process on ℝ^d.
//!
//! The process has d independent one-dimensional symmetric α-stable
//! coordinates, so it jumps along coordinate axes one at a time. This crate
//! provides:
//!
//! - exact evaluation of the free transition kernel (Fourier inversion) and
//!   its min-product envelope,
//! - a Chambers–Mallows–Stuck sampler on counter-based random streams,
//! - an implicit-geometry engine (signed distance fields) for the domains
//!   used in the experiments,
//! - rook-move connectivity and swap-chain checkers for irreducibility,
//! - singular-integral quadrature for the 1-D fractional Laplacian on power
//!   test functions and hyperplane distance functions,
//! - time-discretized simulation of the killed process with exit-time,
//!   survival, occupation and exit-law estimators,
//! - Dirichlet heat-kernel point estimators (survivor KDE, bridge,
//!   subtraction) plus principal-eigenvalue and two-sided-bound diagnostics.
//!
//! Everything is deterministic given an explicit seed: random streams are
//! counter-based, and parallel reductions merge fixed-size chunks in path
//! order, so results do not depend on the number of worker threads.

pub mod connectivity;
pub mod fraclap;
pub mod geometry;
pub mod heatkernel;
pub mod quad;
pub mod rng;
pub mod simulate;
pub mod stable;
pub mod stats;

pub use geometry::Domain;
pub use rng::StreamKey;
pub use stable::AlphaParam;
