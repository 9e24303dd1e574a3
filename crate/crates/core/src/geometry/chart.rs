//! Chart-based Riemannian manifolds: Levi-Civita connection and curvature
//! from metric components.
//!
//! Index conventions (all arrays row-major):
//! - `Γ^k_ij` is stored `[k][i][j]`.
//! - `R^a_bcd` is stored `[a][b][c][d]` with `R(∂_c, ∂_d)∂_b = R^a_bcd ∂_a`
//!   and `R(X, Y) = ∇_X∇_Y − ∇_Y∇_X − ∇_[X,Y]`.
//! - `Ric_bd = R^a_bad`, `Scal = g^bd Ric_bd`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::linalg::spd_inverse;
use super::metric::Metric;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeStrategy {
    /// Analytic callbacks where the metric supplies them, else finite differences.
    #[default]
    Analytic,
    FiniteDifference,
}

/// A manifold covered by one chart: a coordinate box and metric components.
#[derive(Debug, Clone)]
pub struct ChartManifold<T: Real> {
    metric: Arc<dyn Metric<T>>,
    lo: Vec<T>,
    hi: Vec<T>,
    fd_step: T,
    strategy: DerivativeStrategy,
}

/// Metric, inverse, volume density and first/second partials at one point.
#[derive(Debug, Clone)]
pub struct MetricJet<T> {
    pub dim: usize,
    pub g: Vec<T>,
    pub ginv: Vec<T>,
    pub sqrt_det: T,
    pub dg: Vec<T>,
    pub ddg: Option<Vec<T>>,
}

/// Connection and curvature at one point.
#[derive(Debug, Clone)]
pub struct CurvatureJet<T> {
    pub gamma: Vec<T>,
    pub riemann: Vec<T>,
    pub ricci: Vec<T>,
    pub scalar: T,
}

impl<T: Real> ChartManifold<T> {
    pub fn new(metric: Arc<dyn Metric<T>>, lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        let m = metric.dim();
        if lo.len() != m || hi.len() != m {
            return Err(Error::Dimension { expected: m, got: lo.len() });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(b > a)) {
            return Err(Error::InvalidParameter("chart box must have hi > lo on every axis".into()));
        }
        Ok(Self { metric, lo, hi, fd_step: T::lit(1e-3), strategy: DerivativeStrategy::Analytic })
    }

    pub fn with_fd_step(mut self, step: T) -> Self {
        self.fd_step = step;
        self
    }

    pub fn with_strategy(mut self, strategy: DerivativeStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn name(&self) -> String {
        self.metric.name()
    }

    pub fn metric_model(&self) -> &Arc<dyn Metric<T>> {
        &self.metric
    }

    pub fn lo(&self) -> &[T] {
        &self.lo
    }

    pub fn hi(&self) -> &[T] {
        &self.hi
    }

    pub fn fd_step(&self) -> T {
        self.fd_step
    }

    pub fn strategy(&self) -> DerivativeStrategy {
        self.strategy
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&v, (&a, &b))| v >= a && v <= b)
    }

    fn check_domain(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        if !self.contains(x) {
            return Err(Error::OutsideDomain { name: self.name(), point: x.iter().map(|v| v.as_f64()).collect() });
        }
        Ok(())
    }

    /// Metric components, rejecting non-SPD values.
    pub fn metric_at(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_domain(x)?;
        let m = self.dim();
        let mut g = vec![T::zero(); m * m];
        self.metric.metric(x, &mut g);
        self.validate(x, &g)?;
        Ok(g)
    }

    fn validate(&self, x: &[T], g: &[T]) -> Result<Vec<T>> {
        let m = self.dim();
        for i in 0..m {
            for j in 0..i {
                let (a, b) = (g[i * m + j], g[j * m + i]);
                if (a - b).abs() > T::lit(1e-12) * (T::one() + a.abs()) {
                    return Err(degenerate(x, "metric not symmetric"));
                }
            }
        }
        spd_inverse(g, m).map(|(inv, _)| inv).ok_or_else(|| degenerate(x, "metric not positive definite"))
    }

    fn raw_metric(&self, x: &[T]) -> Vec<T> {
        let m = self.dim();
        let mut g = vec![T::zero(); m * m];
        self.metric.metric(x, &mut g);
        g
    }

    fn use_analytic(&self) -> bool {
        self.strategy == DerivativeStrategy::Analytic
    }

    /// `∂_k g_ij` stored `[k][i][j]`.
    pub fn metric_first_derivatives(&self, x: &[T]) -> Vec<T> {
        let m = self.dim();
        let mut out = vec![T::zero(); m * m * m];
        if self.use_analytic() && self.metric.first_derivatives(x, &mut out) {
            return out;
        }
        let eps = self.fd_step;
        let mut xp = x.to_vec();
        for k in 0..m {
            xp[k] = x[k] + eps;
            let gp = self.raw_metric(&xp);
            xp[k] = x[k] - eps;
            let gm = self.raw_metric(&xp);
            xp[k] = x[k];
            for a in 0..m * m {
                out[k * m * m + a] = (gp[a] - gm[a]) / (eps + eps);
            }
        }
        out
    }

    /// `∂_k ∂_l g_ij` stored `[k][l][i][j]`.
    pub fn metric_second_derivatives(&self, x: &[T]) -> Vec<T> {
        let m = self.dim();
        let mm = m * m;
        let mut out = vec![T::zero(); mm * mm];
        if self.use_analytic() && self.metric.second_derivatives(x, &mut out) {
            return out;
        }
        let eps = self.fd_step;
        let g0 = self.raw_metric(x);
        let mut xp = x.to_vec();
        for k in 0..m {
            xp[k] = x[k] + eps;
            let gp = self.raw_metric(&xp);
            xp[k] = x[k] - eps;
            let gm = self.raw_metric(&xp);
            xp[k] = x[k];
            for a in 0..mm {
                out[(k * m + k) * mm + a] = (gp[a] - (g0[a] + g0[a]) + gm[a]) / (eps * eps);
            }
            for l in (k + 1)..m {
                let mut corner = |sk: T, sl: T| {
                    xp[k] = x[k] + sk * eps;
                    xp[l] = x[l] + sl * eps;
                    let g = self.raw_metric(&xp);
                    xp[k] = x[k];
                    xp[l] = x[l];
                    g
                };
                let one = T::one();
                let pp = corner(one, one);
                let pm = corner(one, -one);
                let mp = corner(-one, one);
                let mmn = corner(-one, -one);
                for a in 0..mm {
                    let v = (pp[a] - pm[a] - mp[a] + mmn[a]) / (T::lit(4.0) * eps * eps);
                    out[(k * m + l) * mm + a] = v;
                    out[(l * m + k) * mm + a] = v;
                }
            }
        }
        out
    }

    /// Metric jet at `x`; `with_second` also fills `∂∂g`.
    pub fn jet(&self, x: &[T], with_second: bool) -> Result<MetricJet<T>> {
        self.check_domain(x)?;
        let m = self.dim();
        let g = self.raw_metric(x);
        self.validate(x, &g)?;
        let (ginv, det) = spd_inverse(&g, m).ok_or_else(|| degenerate(x, "metric not positive definite"))?;
        Ok(MetricJet {
            dim: m,
            g,
            ginv,
            sqrt_det: det.sqrt(),
            dg: self.metric_first_derivatives(x),
            ddg: with_second.then(|| self.metric_second_derivatives(x)),
        })
    }

    /// Christoffel symbols `Γ^k_ij`.
    pub fn christoffel(&self, x: &[T]) -> Result<Tensor<T>> {
        let jet = self.jet(x, false)?;
        let gamma = christoffel_from(jet.dim, &jet.ginv, &jet.dg);
        Ok(Tensor::from_components(1, 2, jet.dim, gamma))
    }

    pub fn curvature(&self, x: &[T]) -> Result<CurvatureJet<T>> {
        let jet = self.jet(x, true)?;
        Ok(curvature_from_jet(&jet))
    }

    /// Riemann tensor `R^a_bcd`.
    pub fn riemann(&self, x: &[T]) -> Result<Tensor<T>> {
        let c = self.curvature(x)?;
        Ok(Tensor::from_components(1, 3, self.dim(), c.riemann))
    }

    pub fn ricci(&self, x: &[T]) -> Result<Tensor<T>> {
        let c = self.curvature(x)?;
        Ok(Tensor::from_components(0, 2, self.dim(), c.ricci))
    }

    pub fn scalar_curvature(&self, x: &[T]) -> Result<T> {
        Ok(self.curvature(x)?.scalar)
    }

    /// `R(X, Y)Z` in chart components.
    pub fn curvature_operator(&self, y: &[T], xv: &[T], yv: &[T], zv: &[T]) -> Result<Vec<T>> {
        let c = self.curvature(y)?;
        Ok(apply_riemann(self.dim(), &c.riemann, xv, yv, zv))
    }
}

fn degenerate<T: Real>(x: &[T], detail: &str) -> Error {
    Error::DegenerateMetric { location: format!("{:?}", x.iter().map(|v| v.as_f64()).collect::<Vec<_>>()), detail: detail.into() }
}

/// `Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)`.
pub fn christoffel_from<T: Real>(m: usize, ginv: &[T], dg: &[T]) -> Vec<T> {
    let mm = m * m;
    let half = T::lit(0.5);
    let mut gamma = vec![T::zero(); m * mm];
    for i in 0..m {
        for j in i..m {
            for k in 0..m {
                let mut s = T::zero();
                for l in 0..m {
                    let lower = dg[i * mm + j * m + l] + dg[j * mm + i * m + l] - dg[l * mm + i * m + j];
                    s += ginv[k * m + l] * lower;
                }
                gamma[k * mm + i * m + j] = half * s;
                gamma[k * mm + j * m + i] = half * s;
            }
        }
    }
    gamma
}

/// Connection and curvature from a jet carrying second derivatives.
pub fn curvature_from_jet<T: Real>(jet: &MetricJet<T>) -> CurvatureJet<T> {
    let m = jet.dim;
    let mm = m * m;
    let ddg = jet.ddg.as_ref().expect("jet without second derivatives");
    let gamma = christoffel_from(m, &jet.ginv, &jet.dg);
    let half = T::lit(0.5);

    // ∂_s g^{kl} = −g^{ka} ∂_s g_ab g^{bl}
    let mut dginv = vec![T::zero(); m * mm];
    for s in 0..m {
        for k in 0..m {
            for l in 0..m {
                let mut acc = T::zero();
                for a in 0..m {
                    for b in 0..m {
                        acc += jet.ginv[k * m + a] * jet.dg[s * mm + a * m + b] * jet.ginv[b * m + l];
                    }
                }
                dginv[s * mm + k * m + l] = -acc;
            }
        }
    }

    // ∂_s Γ^k_ij stored [s][k][i][j]
    let mut dgamma = vec![T::zero(); m * m * mm];
    for s in 0..m {
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    let mut acc = T::zero();
                    for l in 0..m {
                        let lower = jet.dg[i * mm + j * m + l] + jet.dg[j * mm + i * m + l] - jet.dg[l * mm + i * m + j];
                        let dlower = ddg[(s * m + i) * mm + j * m + l] + ddg[(s * m + j) * mm + i * m + l]
                            - ddg[(s * m + l) * mm + i * m + j];
                        acc += dginv[s * mm + k * m + l] * lower + jet.ginv[k * m + l] * dlower;
                    }
                    dgamma[((s * m + k) * m + i) * m + j] = half * acc;
                }
            }
        }
    }

    let mut riemann = vec![T::zero(); mm * mm];
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for d in 0..m {
                    let mut v = dgamma[((c * m + a) * m + d) * m + b] - dgamma[((d * m + a) * m + c) * m + b];
                    for e in 0..m {
                        v += gamma[a * mm + c * m + e] * gamma[e * mm + d * m + b]
                            - gamma[a * mm + d * m + e] * gamma[e * mm + c * m + b];
                    }
                    riemann[((a * m + b) * m + c) * m + d] = v;
                }
            }
        }
    }
    let mut ricci = vec![T::zero(); mm];
    for b in 0..m {
        for d in 0..m {
            let mut v = T::zero();
            for a in 0..m {
                v += riemann[((a * m + b) * m + a) * m + d];
            }
            ricci[b * m + d] = v;
        }
    }
    // exact symmetrization; the antisymmetric part is pure round-off
    for b in 0..m {
        for d in (b + 1)..m {
            let v = (ricci[b * m + d] + ricci[d * m + b]) * half;
            ricci[b * m + d] = v;
            ricci[d * m + b] = v;
        }
    }
    let scalar = (0..mm).map(|i| jet.ginv[i] * ricci[i]).sum();
    CurvatureJet { gamma, riemann, ricci, scalar }
}

/// `R(X, Y)Z^a = R^a_bcd Z^b X^c Y^d`.
pub fn apply_riemann<T: Real>(m: usize, riemann: &[T], xv: &[T], yv: &[T], zv: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); m];
    for a in 0..m {
        let mut s = T::zero();
        for b in 0..m {
            if zv[b] == T::zero() {
                continue;
            }
            for c in 0..m {
                if xv[c] == T::zero() {
                    continue;
                }
                for d in 0..m {
                    s += riemann[((a * m + b) * m + c) * m + d] * zv[b] * xv[c] * yv[d];
                }
            }
        }
        out[a] = s;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::metric::{Cigar, Euclidean, HyperbolicHalfSpace, RoundSphere};

    fn cigar() -> ChartManifold<f64> {
        ChartManifold::new(Arc::new(Cigar), vec![-4.0, -4.0], vec![4.0, 4.0]).unwrap()
    }

    fn sphere() -> ChartManifold<f64> {
        ChartManifold::new(Arc::new(RoundSphere { radius: 1.0 }), vec![0.1, -3.0], vec![3.0, 3.0]).unwrap()
    }

    #[test]
    fn euclidean_christoffels_vanish() {
        let e = ChartManifold::new(Arc::new(Euclidean { dim: 3 }), vec![-1.0; 3], vec![1.0; 3]).unwrap();
        let g = e.christoffel(&[0.3, -0.2, 0.1]).unwrap();
        assert!(g.components().iter().all(|&v| v == 0.0));
        assert_eq!(e.scalar_curvature(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn cigar_connection_values() {
        let c = cigar();
        let g0 = c.christoffel(&[0.0, 0.0]).unwrap();
        assert!(g0.components().iter().all(|v| v.abs() < 1e-15));
        // conformal oracle: Γ^k_ij = δ^k_i u_j + δ^k_j u_i − δ_ij u^k, u = −½ log(1+r²)
        let x = [1.0, 0.0];
        let g = c.christoffel(&x).unwrap();
        let u = [-x[0] / 2.0, -x[1] / 2.0];
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                    let expect = d(k, i) * u[j] + d(k, j) * u[i] - d(i, j) * u[k];
                    assert!((g.get(&[k, i, j]) - expect).abs() < 1e-14);
                }
            }
        }
        assert!((g.get(&[0, 0, 0]) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn cigar_scalar_curvature() {
        let c = cigar();
        assert!((c.scalar_curvature(&[0.0, 0.0]).unwrap() - 4.0).abs() < 1e-12);
        for x in [[0.5, -1.0], [2.0, 3.0], [-3.5, 0.1]] {
            let r2 = x[0] * x[0] + x[1] * x[1];
            assert!((c.scalar_curvature(&x).unwrap() - 4.0 / (1.0 + r2)).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_scalar_curvature_and_operator() {
        let s = sphere();
        let y = [1.1, 0.4];
        assert!((s.scalar_curvature(&y).unwrap() - 2.0).abs() < 1e-12);
        let g = s.metric_at(&y).unwrap();
        let ip = |a: &[f64], b: &[f64]| crate::geometry::linalg::bilinear(&g, a, b);
        let (xv, yv, zv) = ([0.3, -0.7], [1.2, 0.5], [-0.4, 0.9]);
        let r = s.curvature_operator(&y, &xv, &yv, &zv).unwrap();
        for a in 0..2 {
            let expect = ip(&yv, &zv) * xv[a] - ip(&xv, &zv) * yv[a];
            assert!((r[a] - expect).abs() < 1e-12);
        }
        let rr = s.curvature_operator(&y, &xv, &xv, &zv).unwrap();
        assert!(rr.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn radius_scales_curvature() {
        let s = ChartManifold::new(Arc::new(RoundSphere { radius: 2.0 }), vec![0.1, -3.0], vec![3.0, 3.0]).unwrap();
        assert!((s.scalar_curvature(&[0.8, 0.0]).unwrap() - 0.5_f64).abs() < 1e-12);
        let h = ChartManifold::new(Arc::new(HyperbolicHalfSpace { dim: 2 }), vec![-1.0, 0.1], vec![1.0, 3.0]).unwrap();
        assert!((h.scalar_curvature(&[0.2, 1.3]).unwrap() + 2.0_f64).abs() < 1e-12);
    }

    #[test]
    fn finite_difference_path_agrees_with_analytic() {
        let a = cigar();
        for step in [1e-2, 5e-3] {
            let f = cigar().with_strategy(DerivativeStrategy::FiniteDifference).with_fd_step(step);
            let x = [0.7, -0.4];
            let ga = a.christoffel(&x).unwrap();
            let gf = f.christoffel(&x).unwrap();
            let err = ga.components().iter().zip(gf.components()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(err < 5.0 * step * step, "Γ err {err} at step {step}");
            let sa = a.scalar_curvature(&x).unwrap();
            let sf = f.scalar_curvature(&x).unwrap();
            assert!((sa - sf).abs() < 20.0 * step * step, "Scal err {} at step {step}", (sa - sf).abs());
        }
    }

    #[test]
    fn degenerate_metric_rejected() {
        use crate::geometry::metric::FnMetric;
        let bad = FnMetric::<f64> {
            dim: 2,
            label: "bad".into(),
            f: Box::new(|_x, out| {
                out.copy_from_slice(&[1.0, 1.0, 1.0, 1.0]);
            }),
        };
        let c = ChartManifold::new(Arc::new(bad), vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(c.christoffel(&[0.0, 0.0]), Err(Error::DegenerateMetric { .. })));
        assert!(matches!(c.metric_at(&[2.0, 0.0]), Err(Error::OutsideDomain { .. })));
    }
}
