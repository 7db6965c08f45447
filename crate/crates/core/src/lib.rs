//! Geometry-adaptive regression on kNN nerve complexes.
//!
//! The pipeline builds an exact kNN covering of a point cloud, forms its
//! nerve, equips the nerve with vertex and edge masses derived from
//! neighborhood overlaps, and then alternates response smoothing, damped
//! heat diffusion of vertex densities and response-coherence modulation of
//! edge masses until the regression surface and the geometry settle.

pub mod covering;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod metric;
pub mod nerve;
pub mod refine;
pub mod registry;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
