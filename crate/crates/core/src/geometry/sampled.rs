//! Source geometry cached per grid node, and the scalar/tensor-field
//! operators built on it.

use super::chart::{christoffel_from, curvature_from_jet, ChartManifold};
use super::linalg::spd_inverse;
use crate::error::{Error, Result};
use crate::grid::{Grid, Stencil};
use crate::scalar::Real;

/// Grid of symmetric covariant 2-tensors, full `m×m` storage per node.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField<T> {
    pub dim: usize,
    pub values: Vec<T>,
}

impl<T: Real> SymTensorField<T> {
    pub fn zeros(dim: usize, nodes: usize) -> Self {
        Self { dim, values: vec![T::zero(); nodes * dim * dim] }
    }

    /// Symmetrizes an arbitrary per-node matrix field.
    pub fn from_matrices(dim: usize, mut values: Vec<T>) -> Self {
        let mm = dim * dim;
        let half = T::lit(0.5);
        for chunk in values.chunks_mut(mm) {
            for i in 0..dim {
                for j in (i + 1)..dim {
                    let v = (chunk[i * dim + j] + chunk[j * dim + i]) * half;
                    chunk[i * dim + j] = v;
                    chunk[j * dim + i] = v;
                }
            }
        }
        Self { dim, values }
    }

    pub fn at(&self, node: usize) -> &[T] {
        let mm = self.dim * self.dim;
        &self.values[node * mm..(node + 1) * mm]
    }

    pub fn nodes(&self) -> usize {
        self.values.len() / (self.dim * self.dim)
    }

    /// Largest `|S_ij − S_ji|` over all nodes.
    pub fn symmetry_defect(&self) -> T {
        let m = self.dim;
        let mut worst = T::zero();
        for chunk in self.values.chunks(m * m) {
            for i in 0..m {
                for j in 0..i {
                    worst = worst.max((chunk[i * m + j] - chunk[j * m + i]).abs());
                }
            }
        }
        worst
    }

    pub fn scaled(&self, a: T) -> Self {
        Self { dim: self.dim, values: self.values.iter().map(|&v| v * a).collect() }
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadratureRule {
    /// Plain node sum (Riemann sum with node-centred cells).
    #[default]
    Midpoint,
    Trapezoid,
}

/// Metric, connection and (optionally) curvature at every node of a grid.
#[derive(Debug, Clone)]
pub struct SourceGeometry<T: Real> {
    grid: Grid<T>,
    stencil: Stencil,
    m: usize,
    g: Vec<T>,
    ginv: Vec<T>,
    sqrt_det: Vec<T>,
    dg: Vec<T>,
    gamma: Vec<T>,
    ricci: Option<Vec<T>>,
    scal: Option<Vec<T>>,
    rule: QuadratureRule,
    weights: Vec<T>,
}

impl<T: Real> SourceGeometry<T> {
    /// Evaluates the chart at every node, including curvature.
    pub fn sample(chart: &ChartManifold<T>, grid: Grid<T>, stencil: Stencil) -> Result<Self> {
        let m = chart.dim();
        if grid.dim() != m {
            return Err(Error::Dimension { expected: m, got: grid.dim() });
        }
        let n = grid.len();
        let (mm, mmm) = (m * m, m * m * m);
        let mut g = Vec::with_capacity(n * mm);
        let mut ginv = Vec::with_capacity(n * mm);
        let mut sqrt_det = Vec::with_capacity(n);
        let mut dg = Vec::with_capacity(n * mmm);
        let mut gamma = Vec::with_capacity(n * mmm);
        let mut ricci = Vec::with_capacity(n * mm);
        let mut scal = Vec::with_capacity(n);
        let mut x = vec![T::zero(); m];
        for node in 0..n {
            grid.coords_into(node, &mut x);
            let jet = chart.jet(&x, true)?;
            let curv = curvature_from_jet(&jet);
            g.extend_from_slice(&jet.g);
            ginv.extend_from_slice(&jet.ginv);
            sqrt_det.push(jet.sqrt_det);
            dg.extend_from_slice(&jet.dg);
            gamma.extend_from_slice(&curv.gamma);
            ricci.extend_from_slice(&curv.ricci);
            scal.push(curv.scalar);
        }
        let mut geom = Self {
            grid,
            stencil,
            m,
            g,
            ginv,
            sqrt_det,
            dg,
            gamma,
            ricci: Some(ricci),
            scal: Some(scal),
            rule: QuadratureRule::Midpoint,
            weights: Vec::new(),
        };
        geom.rebuild_weights();
        Ok(geom)
    }

    pub fn with_quadrature(mut self, rule: QuadratureRule) -> Self {
        self.rule = rule;
        self.rebuild_weights();
        self
    }

    fn rebuild_weights(&mut self) {
        let cell = self.grid.cell_volume();
        let half = T::lit(0.5);
        let shape = self.grid.shape().to_vec();
        let periodic = self.grid.is_periodic();
        self.weights = (0..self.grid.len())
            .map(|node| {
                let mut w = cell * self.sqrt_det[node];
                if self.rule == QuadratureRule::Trapezoid && !periodic {
                    for (i, n) in self.grid.multi_index(node).into_iter().zip(&shape) {
                        if i == 0 || i == n - 1 {
                            w *= half;
                        }
                    }
                }
                w
            })
            .collect();
    }

    /// Geometry of `g + t δg` with connection rebuilt from grid differences
    /// of `δg`. Curvature is not carried over.
    pub fn perturbed(&self, delta: &SymTensorField<T>, t: T) -> Result<Self> {
        let m = self.m;
        let (mm, mmm) = (m * m, m * m * m);
        if delta.dim != m || delta.nodes() != self.grid.len() {
            return Err(Error::Dimension { expected: self.grid.len(), got: delta.nodes() });
        }
        let ddelta = self.grid.gradient(&delta.values, mm, self.stencil)?;
        let n = self.grid.len();
        let mut out = self.clone();
        out.ricci = None;
        out.scal = None;
        for node in 0..n {
            let gt: Vec<T> = (0..mm).map(|a| self.g[node * mm + a] + t * delta.values[node * mm + a]).collect();
            let (inv, det) = spd_inverse(&gt, m).ok_or_else(|| Error::DegenerateMetric {
                location: format!("node {node}"),
                detail: format!("g + tδg not positive definite at t = {:e}", t.as_f64()),
            })?;
            let dgt: Vec<T> = (0..mmm).map(|a| self.dg[node * mmm + a] + t * ddelta[node * mmm + a]).collect();
            let gam = christoffel_from(m, &inv, &dgt);
            out.g[node * mm..(node + 1) * mm].copy_from_slice(&gt);
            out.ginv[node * mm..(node + 1) * mm].copy_from_slice(&inv);
            out.sqrt_det[node] = det.sqrt();
            out.dg[node * mmm..(node + 1) * mmm].copy_from_slice(&dgt);
            out.gamma[node * mmm..(node + 1) * mmm].copy_from_slice(&gam);
        }
        out.rebuild_weights();
        Ok(out)
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn stencil(&self) -> Stencil {
        self.stencil
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    #[inline]
    pub fn g(&self, node: usize) -> &[T] {
        let mm = self.m * self.m;
        &self.g[node * mm..(node + 1) * mm]
    }

    #[inline]
    pub fn ginv(&self, node: usize) -> &[T] {
        let mm = self.m * self.m;
        &self.ginv[node * mm..(node + 1) * mm]
    }

    #[inline]
    pub fn gamma(&self, node: usize) -> &[T] {
        let mmm = self.m * self.m * self.m;
        &self.gamma[node * mmm..(node + 1) * mmm]
    }

    pub fn sqrt_det(&self, node: usize) -> T {
        self.sqrt_det[node]
    }

    pub fn ricci(&self, node: usize) -> Option<&[T]> {
        let mm = self.m * self.m;
        self.ricci.as_ref().map(|r| &r[node * mm..(node + 1) * mm])
    }

    pub fn scalar_curvature(&self) -> Option<&[T]> {
        self.scal.as_deref()
    }

    pub fn metric_field(&self) -> SymTensorField<T> {
        SymTensorField { dim: self.m, values: self.g.clone() }
    }

    pub fn ricci_field(&self) -> Option<SymTensorField<T>> {
        self.ricci.as_ref().map(|r| SymTensorField { dim: self.m, values: r.clone() })
    }

    pub fn quadrature_rule(&self) -> QuadratureRule {
        self.rule
    }

    /// Quadrature weight `√det g · cell volume` (times trapezoid factors).
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `∫ field dv_g`. NaN or infinite samples are rejected.
    pub fn integrate(&self, field: &[T]) -> Result<T> {
        debug_assert_eq!(field.len(), self.weights.len());
        let mut s = T::zero();
        for (v, w) in field.iter().zip(&self.weights) {
            if !v.is_finite() {
                return Err(Error::NonFinite("integrand".into()));
            }
            s += *v * *w;
        }
        Ok(s)
    }

    /// `(∇f)^i = g^{ij} ∂_j f`, stored `[node][i]`.
    pub fn grad_scalar(&self, f: &[T]) -> Result<Vec<T>> {
        let m = self.m;
        let df = self.grid.gradient(f, 1, self.stencil)?;
        let mut out = vec![T::zero(); self.len() * m];
        for node in 0..self.len() {
            let gi = self.ginv(node);
            for i in 0..m {
                out[node * m + i] = (0..m).map(|j| gi[i * m + j] * df[node * m + j]).sum();
            }
        }
        Ok(out)
    }

    /// Coordinate differential `∂_j f`, stored `[node][j]`.
    pub fn d_scalar(&self, f: &[T]) -> Result<Vec<T>> {
        self.grid.gradient(f, 1, self.stencil)
    }

    /// `Hess f_ij = ∂_i∂_j f − Γ^k_ij ∂_k f`.
    pub fn hessian_scalar(&self, f: &[T]) -> Result<SymTensorField<T>> {
        let m = self.m;
        let mm = m * m;
        let df = self.grid.gradient(f, 1, self.stencil)?;
        let ddf = self.grid.hessian(f, 1, self.stencil)?;
        let mut out = vec![T::zero(); self.len() * mm];
        for node in 0..self.len() {
            let gam = self.gamma(node);
            for i in 0..m {
                for j in 0..m {
                    let mut v = ddf[node * mm + i * m + j];
                    for k in 0..m {
                        v -= gam[k * mm + i * m + j] * df[node * m + k];
                    }
                    out[node * mm + i * m + j] = v;
                }
            }
        }
        Ok(SymTensorField::from_matrices(m, out))
    }

    /// `Δf = g^{ij} Hess f_ij`.
    pub fn laplacian_scalar(&self, f: &[T]) -> Result<Vec<T>> {
        let h = self.hessian_scalar(f)?;
        Ok((0..self.len()).map(|node| self.trace(node, h.at(node))).collect())
    }

    /// `g^{ij} A_ij` at a node.
    #[inline]
    pub fn trace(&self, node: usize, a: &[T]) -> T {
        self.ginv(node).iter().zip(a).map(|(&x, &y)| x * y).sum()
    }

    /// `(div S)_j = g^{ik}(∂_i S_kj − Γ^l_ik S_lj − Γ^l_ij S_kl)`, stored `[node][j]`.
    pub fn div_symtensor(&self, s: &SymTensorField<T>) -> Result<Vec<T>> {
        let ds = self.grid.gradient(&s.values, s.dim * s.dim, self.stencil)?;
        Ok(self.div_from_partials(s, &ds))
    }

    /// [`SourceGeometry::div_symtensor`] without the margin requirement; the
    /// outermost stencil layer is left at zero.
    pub fn div_symtensor_interior(&self, s: &SymTensorField<T>) -> Vec<T> {
        let ds = self.grid.gradient_interior(&s.values, s.dim * s.dim, self.stencil);
        self.div_from_partials(s, &ds)
    }

    fn div_from_partials(&self, s: &SymTensorField<T>, ds: &[T]) -> Vec<T> {
        let m = self.m;
        let mm = m * m;
        let mut out = vec![T::zero(); self.len() * m];
        for node in 0..self.len() {
            let gi = self.ginv(node);
            let gam = self.gamma(node);
            let sv = s.at(node);
            for j in 0..m {
                let mut acc = T::zero();
                for i in 0..m {
                    for k in 0..m {
                        let gik = gi[i * m + k];
                        if gik == T::zero() {
                            continue;
                        }
                        let mut cov = ds[(node * m + i) * mm + k * m + j];
                        for l in 0..m {
                            cov -= gam[l * mm + i * m + k] * sv[l * m + j] + gam[l * mm + i * m + j] * sv[k * m + l];
                        }
                        acc += gik * cov;
                    }
                }
                out[node * m + j] = acc;
            }
        }
        out
    }

    /// `g_ij X^i Y^j` at a node.
    #[inline]
    pub fn inner(&self, node: usize, x: &[T], y: &[T]) -> T {
        super::linalg::bilinear(self.g(node), x, y)
    }
}
