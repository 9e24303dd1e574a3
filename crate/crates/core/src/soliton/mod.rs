//! Gradient Ricci solitons `Ric + Hess f = λ g`, their defining identities,
//! cutoff functions and the curvature-decay probe.
//!
//! `L_{∇f} g = 2 Hess f`, so the soliton equation is checked in the form
//! `Ric + Hess f − λ g = 0`. Steady means `λ = 0`.

mod cutoff;

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use cutoff::{fast_marching_distance, quintic_smoothstep, BallMetric, CutoffFunction, CutoffSample};

use crate::error::{Error, Result};
use crate::geometry::linalg::{bilinear, contract2};
use crate::geometry::{Cigar, ChartManifold, Euclidean, SourceGeometry, SymTensorField};
use crate::grid::Grid;
use crate::scalar::Real;

/// Soliton potential with analytic chart derivatives.
pub trait Potential<T: Real>: Send + Sync + Debug {
    fn value(&self, x: &[T]) -> T;
    /// `∂_i f`.
    fn gradient(&self, x: &[T], out: &mut [T]);
    /// `∂_i ∂_j f`, row-major.
    fn hessian(&self, x: &[T], out: &mut [T]);
}

/// `f = −log(1 + |x|²)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CigarPotential;

impl<T: Real> Potential<T> for CigarPotential {
    fn value(&self, x: &[T]) -> T {
        -(T::one() + x.iter().map(|&v| v * v).sum::<T>()).ln()
    }

    fn gradient(&self, x: &[T], out: &mut [T]) {
        let q = T::one() + x.iter().map(|&v| v * v).sum::<T>();
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = -T::lit(2.0) * xi / q;
        }
    }

    fn hessian(&self, x: &[T], out: &mut [T]) {
        let m = x.len();
        let q = T::one() + x.iter().map(|&v| v * v).sum::<T>();
        for i in 0..m {
            for j in 0..m {
                let d = if i == j { T::lit(2.0) / q } else { T::zero() };
                out[i * m + j] = -d + T::lit(4.0) * x[i] * x[j] / (q * q);
            }
        }
    }
}

/// `f = (λ/2)|x|²` (the Gaussian soliton on flat space).
#[derive(Debug, Clone, Copy)]
pub struct QuadraticPotential<T> {
    pub lambda: T,
}

impl<T: Real> Potential<T> for QuadraticPotential<T> {
    fn value(&self, x: &[T]) -> T {
        T::lit(0.5) * self.lambda * x.iter().map(|&v| v * v).sum::<T>()
    }

    fn gradient(&self, x: &[T], out: &mut [T]) {
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = self.lambda * xi;
        }
    }

    fn hessian(&self, x: &[T], out: &mut [T]) {
        let m = x.len();
        for i in 0..m {
            for j in 0..m {
                out[i * m + j] = if i == j { self.lambda } else { T::zero() };
            }
        }
    }
}

/// Soliton presets addressable from configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SolitonPreset {
    Cigar,
    Gaussian { lambda: f64 },
    EuclideanTrivial,
}

impl SolitonPreset {
    /// Parses `cigar`, `gaussian(0.5)`, `euclidean-trivial`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "cigar" => return Ok(Self::Cigar),
            "euclidean-trivial" => return Ok(Self::EuclideanTrivial),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("gaussian") {
            let lambda = match rest.trim() {
                "" => 1.0,
                r => r
                    .trim_start_matches('(')
                    .trim_end_matches(')')
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad gaussian parameter in `{s}`")))?,
            };
            return Ok(Self::Gaussian { lambda });
        }
        Err(Error::InvalidParameter(format!("unknown soliton preset `{s}`")))
    }

    /// Builds the soliton on the box `[−extent, extent]²`.
    pub fn build<T: Real>(&self, extent: f64) -> Result<SolitonStructure<T>> {
        match *self {
            Self::Cigar => SolitonStructure::cigar(extent),
            Self::Gaussian { lambda } => SolitonStructure::gaussian(2, T::lit(lambda), extent),
            Self::EuclideanTrivial => SolitonStructure::gaussian(2, T::zero(), extent),
        }
    }
}

/// A chart manifold with potential `f` and constant `λ`.
#[derive(Debug, Clone)]
pub struct SolitonStructure<T: Real> {
    pub chart: ChartManifold<T>,
    pub potential: Arc<dyn Potential<T>>,
    pub lambda: T,
}

/// Pointwise soliton data at every node.
#[derive(Debug, Clone)]
pub struct PotentialSample<T: Real> {
    pub f: Vec<T>,
    /// `∂_i f`, `[node][i]`.
    pub df: Vec<T>,
    /// `∇f`, `[node][i]`.
    pub grad: Vec<T>,
    /// Covariant Hessian.
    pub hess: SymTensorField<T>,
    pub laplacian: Vec<T>,
}

impl<T: Real> SolitonStructure<T> {
    /// Hamilton's cigar on `[−extent, extent]²` with `f = −log(1 + r²)`, `λ = 0`.
    pub fn cigar(extent: f64) -> Result<Self> {
        let e = T::lit(extent);
        Ok(Self {
            chart: ChartManifold::new(Arc::new(Cigar), vec![-e, -e], vec![e, e])?,
            potential: Arc::new(CigarPotential),
            lambda: T::zero(),
        })
    }

    /// Flat space with `f = (λ/2)|x|²`.
    pub fn gaussian(dim: usize, lambda: T, extent: f64) -> Result<Self> {
        let e = T::lit(extent);
        Ok(Self {
            chart: ChartManifold::new(Arc::new(Euclidean { dim }), vec![-e; dim], vec![e; dim])?,
            potential: Arc::new(QuadraticPotential { lambda }),
            lambda,
        })
    }

    pub fn with_lambda(mut self, lambda: T) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// Source geometry on an `n`-per-axis grid spanning the chart box.
    pub fn sample_geometry(&self, nodes_per_axis: usize) -> Result<SourceGeometry<T>> {
        let grid = Grid::new(self.chart.lo(), self.chart.hi(), &vec![nodes_per_axis; self.dim()])?;
        SourceGeometry::sample(&self.chart, grid, Default::default())
    }

    /// Potential, its gradient and covariant Hessian from the analytic callbacks.
    pub fn sample_potential(&self, geom: &SourceGeometry<T>) -> PotentialSample<T> {
        let m = geom.dim();
        let mm = m * m;
        let n = geom.len();
        let mut f = Vec::with_capacity(n);
        let mut df = vec![T::zero(); n * m];
        let mut grad = vec![T::zero(); n * m];
        let mut hess = vec![T::zero(); n * mm];
        let mut laplacian = Vec::with_capacity(n);
        let mut x = vec![T::zero(); m];
        let mut ddf = vec![T::zero(); mm];
        for node in 0..n {
            geom.grid().coords_into(node, &mut x);
            f.push(self.potential.value(&x));
            self.potential.gradient(&x, &mut df[node * m..(node + 1) * m]);
            self.potential.hessian(&x, &mut ddf);
            let gam = geom.gamma(node);
            let gi = geom.ginv(node);
            for i in 0..m {
                grad[node * m + i] = (0..m).map(|j| gi[i * m + j] * df[node * m + j]).sum();
                for j in 0..m {
                    let mut v = ddf[i * m + j];
                    for k in 0..m {
                        v -= gam[k * mm + i * m + j] * df[node * m + k];
                    }
                    hess[node * mm + i * m + j] = v;
                }
            }
            laplacian.push(geom.trace(node, &hess[node * mm..(node + 1) * mm]));
        }
        PotentialSample { f, df, grad, hess: SymTensorField::from_matrices(m, hess), laplacian }
    }

    /// `|Ric + Hess f − λg|_g` at every node, using the analytic potential.
    pub fn residual(&self, geom: &SourceGeometry<T>) -> Result<Vec<T>> {
        let pot = self.sample_potential(geom);
        self.residual_with(geom, &pot.hess)
    }

    /// Same with `Hess f` from grid differences of sampled `f`. Nodes within
    /// one stencil reach of the boundary have no Hessian and are set to NaN-free
    /// zero; callers should restrict statistics to the interior.
    pub fn residual_sampled(&self, geom: &SourceGeometry<T>) -> Result<Vec<T>> {
        let m = geom.dim();
        let mm = m * m;
        let pot = self.sample_potential(geom);
        let grid = geom.grid();
        let st = geom.stencil();
        let df = grid.gradient_interior(&pot.f, 1, st);
        // second partials as differences of the first
        let ddf = grid.gradient_interior(&df, m, st);
        let mut hess = vec![T::zero(); geom.len() * mm];
        for node in 0..geom.len() {
            if grid.boundary_distance(node) < 2 * st.reach() {
                continue;
            }
            let gam = geom.gamma(node);
            for i in 0..m {
                for j in 0..m {
                    let mut v = ddf[(node * m + i) * m + j];
                    for k in 0..m {
                        v -= gam[k * mm + i * m + j] * df[node * m + k];
                    }
                    hess[node * mm + i * m + j] = v;
                }
            }
        }
        let hess = SymTensorField::from_matrices(m, hess);
        let mut res = self.residual_with(geom, &hess)?;
        for (node, r) in res.iter_mut().enumerate() {
            if grid.boundary_distance(node) < 2 * st.reach() {
                *r = T::zero();
            }
        }
        Ok(res)
    }

    fn residual_with(&self, geom: &SourceGeometry<T>, hess: &SymTensorField<T>) -> Result<Vec<T>> {
        let m = geom.dim();
        let mm = m * m;
        let mut out = Vec::with_capacity(geom.len());
        let mut e = vec![T::zero(); mm];
        for node in 0..geom.len() {
            let ric = geom
                .ricci(node)
                .ok_or_else(|| Error::InvalidParameter("geometry carries no curvature".into()))?;
            let g = geom.g(node);
            let hs = hess.at(node);
            for a in 0..mm {
                e[a] = ric[a] + hs[a] - self.lambda * g[a];
            }
            out.push(contract2(geom.ginv(node), &e, &e, m).max(T::zero()).sqrt());
        }
        Ok(out)
    }

    /// `Scal + |∇f|² − 2λf` and its oscillation (max − min) over nodes at
    /// least two stencil reaches from the boundary.
    pub fn hamilton_identity(&self, geom: &SourceGeometry<T>) -> Result<(Vec<T>, T)> {
        let m = geom.dim();
        let scal = geom
            .scalar_curvature()
            .ok_or_else(|| Error::InvalidParameter("geometry carries no curvature".into()))?;
        let pot = self.sample_potential(geom);
        let two = T::lit(2.0);
        let field: Vec<T> = (0..geom.len())
            .map(|node| {
                let gf = &pot.grad[node * m..(node + 1) * m];
                let df = &pot.df[node * m..(node + 1) * m];
                let norm2: T = gf.iter().zip(df).map(|(&a, &b)| a * b).sum();
                scal[node] + norm2 - two * self.lambda * pot.f[node]
            })
            .collect();
        let width = 2 * geom.stencil().reach();
        let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
        for (node, &v) in field.iter().enumerate() {
            if geom.grid().boundary_distance(node) >= width {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let defect = if hi >= lo { hi - lo } else { T::zero() };
        Ok((field, defect))
    }
}

/// One rung of the curvature-decay probe.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiRow {
    pub radius: f64,
    /// `sup_{B_R} |∇Scal|_g`.
    pub sup_ball: f64,
    pub product_ball: f64,
    /// `sup_{B_2R \ B_R} |∇Scal|_g`.
    pub sup_annulus: f64,
    pub product_annulus: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiReport {
    pub rows: Vec<ShiRow>,
    /// `R · sup_{B_R}` grows along the ladder.
    pub ball_product_grows: bool,
    /// `R · sup` over the annulus grows along the ladder.
    pub annulus_product_grows: bool,
}

/// A product "grows" when its last rung exceeds the first by more than 50%.
const GROWTH_FACTOR: f64 = 1.5;

/// `|∇Scal|_g` at every node by central differences of the pointwise scalar
/// curvature with the chart's `fd_step`.
pub fn grad_scal_norm<T: Real>(chart: &ChartManifold<T>, geom: &SourceGeometry<T>) -> Result<Vec<T>> {
    let m = geom.dim();
    let eps = chart.fd_step();
    let mut out = Vec::with_capacity(geom.len());
    let mut x = vec![T::zero(); m];
    let mut d = vec![T::zero(); m];
    for node in 0..geom.len() {
        geom.grid().coords_into(node, &mut x);
        for k in 0..m {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += eps;
            xm[k] -= eps;
            let sp = if chart.contains(&xp) { chart.scalar_curvature(&xp)? } else { chart.scalar_curvature(&x)? };
            let sm = if chart.contains(&xm) { chart.scalar_curvature(&xm)? } else { chart.scalar_curvature(&x)? };
            let span = if chart.contains(&xp) && chart.contains(&xm) { eps + eps } else { eps };
            d[k] = (sp - sm) / span;
        }
        out.push(bilinear(geom.ginv(node), &d, &d).max(T::zero()).sqrt());
    }
    Ok(out)
}

/// Tabulates `sup |∇Scal|` over balls and annuli of the given radii about
/// `center` and the products with `R`.
pub fn shi_decay_probe<T: Real>(
    soliton: &SolitonStructure<T>,
    geom: &SourceGeometry<T>,
    center: &[T],
    radii: &[T],
    balls: BallMetric,
) -> Result<ShiReport> {
    let norms = grad_scal_norm(&soliton.chart, geom)?;
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let cut = CutoffFunction::new(center.to_vec(), r, balls);
        cut.check_inside(geom)?;
        let dist = cut.distances(geom)?;
        let (mut sb, mut sa) = (T::zero(), T::zero());
        for (&v, &rho) in norms.iter().zip(&dist) {
            if rho <= r {
                sb = sb.max(v);
            }
            if rho >= r && rho <= r + r {
                sa = sa.max(v);
            }
        }
        rows.push(ShiRow {
            radius: r.as_f64(),
            sup_ball: sb.as_f64(),
            product_ball: (sb * r).as_f64(),
            sup_annulus: sa.as_f64(),
            product_annulus: (sa * r).as_f64(),
        });
    }
    let grows = |f: fn(&ShiRow) -> f64| match (rows.first(), rows.last()) {
        (Some(a), Some(b)) => f(b) > GROWTH_FACTOR * f(a),
        _ => false,
    };
    Ok(ShiReport {
        ball_product_grows: grows(|r| r.product_ball),
        annulus_product_grows: grows(|r| r.product_annulus),
        rows,
    })
}

/// `|∇Scal|_g = 8r / (1 + r²)^{3/2}` on the cigar.
pub fn cigar_grad_scal_norm(r: f64) -> f64 {
    8.0 * r / (1.0 + r * r).powf(1.5)
}
