//! Discrete Riemannian map calculus on chart grids.
//!
//! The crate evaluates tension fields, bitension fields, energies and
//! stress-energy tensors of maps `φ: (M, g) → (N, h)` sampled on uniform
//! grids, and checks their first-variation and divergence identities against
//! independent finite-difference oracles. Gradient Ricci solitons (the cigar
//! among them) supply the curved sources for the Liouville-type integral
//! identities.
//!
//! Every numeric type is generic over [`Real`]; the aliases at the crate root
//! fix the scalar to `f64`, which is what the verification tolerances assume.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod energy;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod mapfield;
pub mod scalar;
pub mod soliton;
pub mod stress;

pub use error::{Error, Result};
pub use grid::{Grid, Stencil};
pub use scalar::Real;

pub type Chart = geometry::ChartManifold<f64>;
pub type Geometry = geometry::SourceGeometry<f64>;
pub type TensorField = geometry::SymTensorField<f64>;
