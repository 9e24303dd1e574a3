//! Chart-based Riemannian manifolds, their sampled grids and quadrature.

pub mod chart;
pub mod linalg;
pub mod metric;
pub mod presets;
pub mod sampled;
pub mod tensor;

pub use chart::{ChartManifold, CurvatureJet, DerivativeStrategy, MetricJet};
pub use metric::{Cigar, Euclidean, FnMetric, HyperbolicHalfSpace, Metric, RoundSphere};
pub use presets::ManifoldPreset;
pub use sampled::{QuadratureRule, SourceGeometry, SymTensorField};
pub use tensor::Tensor;
