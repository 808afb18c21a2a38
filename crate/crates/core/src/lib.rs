//! Bach flow on locally homogeneous product 4-manifolds.
//!
//! The crate computes curvature and Bach tensors of diagonal left-invariant
//! metrics from structure constants, assembles the flow equations for the
//! 1×3 products over the six unimodular Lie groups and for the 2×2 surface
//! products, integrates them, and classifies the long-time behaviour.

pub mod analytics;
pub mod error;
pub mod geometry;
pub mod integrator;
pub mod lie_geometry;
pub mod polynomials;
pub mod systems;

pub use error::{BachError, Result};
pub use geometry::{DiagonalMetric3, DiagonalMetric4, ModelGeometry, Sym2Diag, Sym3, Sym4};
