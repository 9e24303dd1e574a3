use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::chart::ChartManifold;
use super::metric::{Cigar, Euclidean, HyperbolicHalfSpace, Metric, RoundSphere};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Builtin metrics addressable by name from configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ManifoldPreset {
    Euclidean { dim: usize },
    Cigar,
    Sphere { radius: f64 },
    Hyperbolic { dim: usize },
}

impl ManifoldPreset {
    /// Parses `euclidean`, `euclidean3`, `cigar`, `sphere`, `sphere(2.0)`, `hyperbolic`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidParameter(format!("unknown manifold preset `{s}`"));
        if s == "cigar" {
            return Ok(Self::Cigar);
        }
        if let Some(rest) = s.strip_prefix("sphere") {
            let radius = match rest.trim() {
                "" => 1.0,
                r => r.trim_start_matches('(').trim_end_matches(')').parse().map_err(|_| bad())?,
            };
            return Ok(Self::Sphere { radius });
        }
        for (prefix, hyper) in [("euclidean", false), ("hyperbolic", true)] {
            if let Some(rest) = s.strip_prefix(prefix) {
                let dim = if rest.is_empty() { 2 } else { rest.parse().map_err(|_| bad())? };
                return Ok(if hyper { Self::Hyperbolic { dim } } else { Self::Euclidean { dim } });
            }
        }
        Err(bad())
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Euclidean { dim } | Self::Hyperbolic { dim } => *dim,
            Self::Cigar | Self::Sphere { .. } => 2,
        }
    }

    pub fn metric<T: Real>(&self) -> Arc<dyn Metric<T>> {
        match *self {
            Self::Euclidean { dim } => Arc::new(Euclidean { dim }),
            Self::Cigar => Arc::new(Cigar),
            Self::Sphere { radius } => Arc::new(RoundSphere { radius: T::lit(radius) }),
            Self::Hyperbolic { dim } => Arc::new(HyperbolicHalfSpace { dim }),
        }
    }

    /// Chart over the given box.
    pub fn chart<T: Real>(&self, lo: &[f64], hi: &[f64]) -> Result<ChartManifold<T>> {
        ChartManifold::new(self.metric(), lo.iter().map(|&v| T::lit(v)).collect(), hi.iter().map(|&v| T::lit(v)).collect())
    }

    /// Chart over a preset-appropriate default box of half-width `extent`
    /// (the sphere uses `θ ∈ [0.05, π−0.05]`, `ϕ ∈ [−π, π]`; hyperbolic keeps
    /// the last coordinate in `[0.05, extent]`).
    pub fn default_chart<T: Real>(&self, extent: f64) -> Result<ChartManifold<T>> {
        let m = self.dim();
        match self {
            Self::Sphere { .. } => {
                let pi = std::f64::consts::PI;
                self.chart(&[0.05, -pi], &[pi - 0.05, pi])
            }
            Self::Hyperbolic { .. } => {
                let mut lo = vec![-extent; m];
                lo[m - 1] = 0.05;
                self.chart(&lo, &vec![extent; m])
            }
            _ => self.chart(&vec![-extent; m], &vec![extent; m]),
        }
    }
}
