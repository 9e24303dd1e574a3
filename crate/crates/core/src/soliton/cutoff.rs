//! Cutoff functions `η` with `η = 1` on `B_R`, `η = 0` outside `B_2R` and a
//! quintic-smoothstep transition in the radial variable.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::linalg::{bilinear, contract2};
use crate::geometry::{SourceGeometry, SymTensorField};
use crate::grid::Grid;
use crate::scalar::Real;

/// How balls are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BallMetric {
    /// Euclidean radius in chart coordinates.
    #[default]
    Chart,
    /// Exact cigar distance `asinh(|x|)` from the origin (center ignored).
    CigarGeodesic,
    /// First-order fast marching on the grid; conformally flat metrics only.
    FastMarching,
}

/// `s(t) = 6t⁵ − 15t⁴ + 10t³` with its first two derivatives, clamped to `[0, 1]`.
pub fn quintic_smoothstep<T: Real>(t: T) -> (T, T, T) {
    if t <= T::zero() {
        return (T::zero(), T::zero(), T::zero());
    }
    if t >= T::one() {
        return (T::one(), T::zero(), T::zero());
    }
    let one = T::one();
    let s = t * t * t * (T::lit(10.0) + t * (T::lit(-15.0) + T::lit(6.0) * t));
    let u = one - t;
    let ds = T::lit(30.0) * t * t * u * u;
    let dds = T::lit(60.0) * t * u * (one - t - t);
    (s, ds, dds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutoffFunction<T> {
    pub center: Vec<T>,
    pub radius: T,
    pub balls: BallMetric,
}

/// A cutoff evaluated on a grid, with `η²` derivatives ready for the
/// integral identities.
#[derive(Debug, Clone)]
pub struct CutoffSample<T: Real> {
    pub radius: T,
    pub distance: Vec<T>,
    pub eta: Vec<T>,
    pub eta2: Vec<T>,
    /// `∂_i η²`, `[node][i]`.
    pub d_eta2: Vec<T>,
    /// `∇η²`, `[node][i]`.
    pub grad_eta2: Vec<T>,
    pub hess_eta2: SymTensorField<T>,
    pub lap_eta2: Vec<T>,
    /// `|∇η|_g` and `|Hess η|_g` per node.
    pub grad_eta_norm: Vec<T>,
    pub hess_eta_norm: Vec<T>,
}

impl<T: Real> CutoffSample<T> {
    /// Measured `(sup R|∇η|, sup R²|∇²η|)`.
    pub fn constants(&self) -> (T, T) {
        let r = self.radius;
        let c1 = self.grad_eta_norm.iter().fold(T::zero(), |a, &v| a.max(v)) * r;
        let c2 = self.hess_eta_norm.iter().fold(T::zero(), |a, &v| a.max(v)) * r * r;
        (c1, c2)
    }
}

impl<T: Real> CutoffFunction<T> {
    pub fn new(center: Vec<T>, radius: T, balls: BallMetric) -> Self {
        Self { center, radius, balls }
    }

    /// Radial variable at a chart point (fast-marching balls fall back to
    /// the chart radius here; use [`CutoffFunction::distances`] for grids).
    pub fn distance(&self, x: &[T]) -> T {
        self.distance_jet(x).0
    }

    /// `ρ`, `∂ρ` and `∂∂ρ` for the analytic ball metrics.
    fn distance_jet(&self, x: &[T]) -> (T, Vec<T>, Vec<T>) {
        let m = x.len();
        let (origin, cigar) = match self.balls {
            BallMetric::CigarGeodesic => (vec![T::zero(); m], true),
            _ => (self.center.clone(), false),
        };
        let dx: Vec<T> = x.iter().zip(&origin).map(|(&a, &b)| a - b).collect();
        let r = dx.iter().map(|&v| v * v).sum::<T>().sqrt();
        let mut d = vec![T::zero(); m];
        let mut dd = vec![T::zero(); m * m];
        if r == T::zero() {
            return (T::zero(), d, dd);
        }
        let (rho, rr, rrr) = if cigar {
            let q = T::one() + r * r;
            (r.asinh(), T::one() / q.sqrt(), -r / (q * q.sqrt()))
        } else {
            (r, T::one(), T::zero())
        };
        for i in 0..m {
            let ui = dx[i] / r;
            d[i] = rr * ui;
            for j in 0..m {
                let uj = dx[j] / r;
                let delta = if i == j { T::one() } else { T::zero() };
                dd[i * m + j] = rrr * ui * uj + rr * (delta - ui * uj) / r;
            }
        }
        (rho, d, dd)
    }

    fn profile(&self, rho: T) -> (T, T, T) {
        let r = self.radius;
        let (s, ds, dds) = quintic_smoothstep((rho - r) / r);
        (T::one() - s, -ds / r, -dds / (r * r))
    }

    /// `η` at a chart point.
    pub fn eta(&self, x: &[T]) -> T {
        self.profile(self.distance(x)).0
    }

    /// Radial variable at every node.
    pub fn distances(&self, geom: &SourceGeometry<T>) -> Result<Vec<T>> {
        let grid = geom.grid();
        if self.balls == BallMetric::FastMarching {
            let n = geom.len();
            let m = geom.dim();
            let mut scale = Vec::with_capacity(n);
            for node in 0..n {
                let g = geom.g(node);
                let c = g[0];
                let conformal = (0..m).all(|i| (0..m).all(|j| if i == j { g[i * m + j] == c } else { g[i * m + j] == T::zero() }));
                if !conformal {
                    return Err(Error::InvalidParameter("fast-marching balls need a conformally flat metric".into()));
                }
                scale.push(c.sqrt());
            }
            return Ok(fast_marching_distance(grid, &scale, &self.center));
        }
        let mut x = vec![T::zero(); geom.dim()];
        Ok((0..geom.len())
            .map(|node| {
                grid.coords_into(node, &mut x);
                self.distance(&x)
            })
            .collect())
    }

    /// Rejects balls whose double reaches the stencil band at the boundary.
    pub fn check_inside(&self, geom: &SourceGeometry<T>) -> Result<()> {
        let dist = self.distances(geom)?;
        let band = 2 * geom.stencil().reach();
        let outer = self.radius + self.radius;
        for (node, &d) in dist.iter().enumerate() {
            if geom.grid().boundary_distance(node) < band && d < outer {
                return Err(Error::BallOutsideBox {
                    center: self.center.iter().map(|v| v.as_f64()).collect(),
                    radius: outer.as_f64(),
                });
            }
        }
        Ok(())
    }

    /// Evaluates `η`, `η²` and their derivatives at every node.
    pub fn sample(&self, geom: &SourceGeometry<T>) -> Result<CutoffSample<T>> {
        self.check_inside(geom)?;
        let m = geom.dim();
        let mm = m * m;
        let n = geom.len();
        let distance = self.distances(geom)?;
        let two = T::lit(2.0);
        let mut eta = vec![T::zero(); n];
        let mut d_eta = vec![T::zero(); n * m];
        let mut dd_eta = vec![T::zero(); n * mm];
        if self.balls == BallMetric::FastMarching {
            for node in 0..n {
                eta[node] = self.profile(distance[node]).0;
            }
            d_eta = geom.d_scalar(&eta)?;
            let dd = geom.grid().gradient(&d_eta, m, geom.stencil())?;
            dd_eta.copy_from_slice(&dd);
        } else {
            let mut x = vec![T::zero(); m];
            for node in 0..n {
                geom.grid().coords_into(node, &mut x);
                let (rho, dr, ddr) = self.distance_jet(&x);
                let (e, de, dde) = self.profile(rho);
                eta[node] = e;
                for i in 0..m {
                    d_eta[node * m + i] = de * dr[i];
                    for j in 0..m {
                        dd_eta[node * mm + i * m + j] = dde * dr[i] * dr[j] + de * ddr[i * m + j];
                    }
                }
            }
        }
        let mut eta2 = vec![T::zero(); n];
        let mut d_eta2 = vec![T::zero(); n * m];
        let mut grad_eta2 = vec![T::zero(); n * m];
        let mut hess_eta = vec![T::zero(); n * mm];
        let mut hess_eta2 = vec![T::zero(); n * mm];
        let mut lap_eta2 = vec![T::zero(); n];
        let mut grad_eta_norm = vec![T::zero(); n];
        let mut hess_eta_norm = vec![T::zero(); n];
        for node in 0..n {
            let e = eta[node];
            eta2[node] = e * e;
            let gam = geom.gamma(node);
            let gi = geom.ginv(node);
            let de = &d_eta[node * m..(node + 1) * m];
            for i in 0..m {
                d_eta2[node * m + i] = two * e * de[i];
            }
            for i in 0..m {
                grad_eta2[node * m + i] = (0..m).map(|j| gi[i * m + j] * d_eta2[node * m + j]).sum();
                for j in 0..m {
                    let mut h1 = dd_eta[node * mm + i * m + j];
                    for k in 0..m {
                        h1 -= gam[k * mm + i * m + j] * de[k];
                    }
                    hess_eta[node * mm + i * m + j] = h1;
                    hess_eta2[node * mm + i * m + j] = two * (de[i] * de[j] + e * h1);
                }
            }
            let h = &hess_eta[node * mm..(node + 1) * mm];
            let h2 = &hess_eta2[node * mm..(node + 1) * mm];
            lap_eta2[node] = geom.trace(node, h2);
            grad_eta_norm[node] = bilinear(gi, de, de).max(T::zero()).sqrt();
            hess_eta_norm[node] = contract2(gi, h, h, m).max(T::zero()).sqrt();
        }
        Ok(CutoffSample {
            radius: self.radius,
            distance,
            eta,
            eta2,
            d_eta2,
            grad_eta2,
            hess_eta2: SymTensorField::from_matrices(m, hess_eta2),
            lap_eta2,
            grad_eta_norm,
            hess_eta_norm,
        })
    }
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // min-heap on distance
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Distance from `center` for the metric `scale² δ` by first-order fast
/// marching (`|∇ρ| = scale` in chart coordinates). Nodes of the cell
/// containing the center are seeded with `scale · |x − center|`.
pub fn fast_marching_distance<T: Real>(grid: &Grid<T>, scale: &[T], center: &[T]) -> Vec<T> {
    let n = grid.len();
    let m = grid.dim();
    let h = grid.spacing().to_vec();
    let mut dist = vec![T::infinity(); n];
    let mut known = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut x = vec![T::zero(); m];
    for node in 0..n {
        grid.coords_into(node, &mut x);
        let near = (0..m).all(|k| (x[k] - center[k]).abs() <= h[k]);
        if near {
            let r = x.iter().zip(center).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt();
            dist[node] = scale[node] * r;
            heap.push(Entry(dist[node].as_f64(), node));
        }
    }
    let shape = grid.shape().to_vec();
    while let Some(Entry(_, node)) = heap.pop() {
        if known[node] {
            continue;
        }
        known[node] = true;
        let idx = grid.multi_index(node);
        for axis in 0..m {
            for step in [-1isize, 1] {
                let j = idx[axis] as isize + step;
                if !grid.is_periodic() && (j < 0 || j >= shape[axis] as isize) {
                    continue;
                }
                let nb = grid.shift(node, axis, step);
                if known[nb] {
                    continue;
                }
                let cand = eikonal_update(grid, &dist, &known, nb, scale[nb], &h);
                if cand < dist[nb] {
                    dist[nb] = cand;
                    heap.push(Entry(cand.as_f64(), nb));
                }
            }
        }
    }
    dist
}

fn eikonal_update<T: Real>(grid: &Grid<T>, dist: &[T], known: &[bool], node: usize, f: T, h: &[T]) -> T {
    let m = grid.dim();
    let idx = grid.multi_index(node);
    let mut a: Vec<(T, T)> = Vec::with_capacity(m);
    for axis in 0..m {
        let mut best = T::infinity();
        for step in [-1isize, 1] {
            let j = idx[axis] as isize + step;
            if !grid.is_periodic() && (j < 0 || j >= grid.shape()[axis] as isize) {
                continue;
            }
            let nb = grid.shift(node, axis, step);
            if known[nb] {
                best = best.min(dist[nb]);
            }
        }
        if best.is_finite() {
            a.push((best, h[axis]));
        }
    }
    a.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap_or(Ordering::Equal));
    let mut u = T::infinity();
    for k in 1..=a.len() {
        // solve sum_{l<k} ((u − a_l)/h_l)² = f²
        let (mut qa, mut qb, mut qc) = (T::zero(), T::zero(), -f * f);
        for &(al, hl) in &a[..k] {
            let w = T::one() / (hl * hl);
            qa += w;
            qb -= T::lit(2.0) * al * w;
            qc += al * al * w;
        }
        let disc = qb * qb - T::lit(4.0) * qa * qc;
        if disc < T::zero() {
            break;
        }
        let cand = (-qb + disc.sqrt()) / (qa + qa);
        if k < a.len() && cand > a[k].0 {
            u = cand;
            continue;
        }
        u = cand;
        break;
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::soliton::SolitonStructure;

    fn flat(n: usize, extent: f64) -> SourceGeometry<f64> {
        SolitonStructure::<f64>::gaussian(2, 0.0, extent).unwrap().sample_geometry(n).unwrap()
    }

    #[test]
    fn smoothstep_endpoints_and_peak_slope() {
        assert_eq!(quintic_smoothstep(0.0_f64).0, 0.0);
        assert_eq!(quintic_smoothstep(1.0_f64).0, 1.0);
        assert!((quintic_smoothstep(0.5_f64).1 - 1.875).abs() < 1e-14);
    }

    #[test]
    fn support_structure_and_flat_constants() {
        for &r in &[1.0, 2.0, 4.0] {
            let g = flat(161, 10.0);
            let cut = CutoffFunction::new(vec![0.0, 0.0], r, BallMetric::Chart);
            let s = cut.sample(&g).unwrap();
            let mut x = [0.0; 2];
            for node in 0..g.len() {
                g.grid().coords_into(node, &mut x);
                let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
                let e = s.eta[node];
                assert!((0.0..=1.0).contains(&e));
                if rho <= r {
                    assert_eq!(e, 1.0);
                }
                if rho >= 2.0 * r {
                    assert_eq!(e, 0.0);
                }
            }
            let (c1, c2) = s.constants();
            assert!(c1 <= 1.875 + 1e-12 && c2 <= 15.0, "{c1} {c2}");
        }
    }

    #[test]
    fn ball_leaving_box_is_rejected() {
        let g = flat(21, 2.0);
        let cut = CutoffFunction::new(vec![0.0, 0.0], 1.5, BallMetric::Chart);
        assert!(matches!(cut.sample(&g), Err(Error::BallOutsideBox { .. })));
    }

    #[test]
    fn fast_marching_recovers_flat_distance() {
        let g = flat(81, 2.0);
        let cut = CutoffFunction::new(vec![0.0, 0.0], 0.5, BallMetric::FastMarching);
        let d = cut.distances(&g).unwrap();
        let mut x = [0.0; 2];
        for node in 0..g.len() {
            g.grid().coords_into(node, &mut x);
            let exact = (x[0] * x[0] + x[1] * x[1]).sqrt();
            // first-order scheme, worst along diagonals
            assert!((d[node] - exact).abs() < 0.1, "{} {}", d[node], exact);
        }
    }

    #[test]
    fn fast_marching_on_cigar_tracks_asinh() {
        let s = SolitonStructure::<f64>::cigar(3.0).unwrap();
        let g = s.sample_geometry(121).unwrap();
        let fm = CutoffFunction::new(vec![0.0, 0.0], 0.5, BallMetric::FastMarching).distances(&g).unwrap();
        let ex = CutoffFunction::new(vec![0.0, 0.0], 0.5, BallMetric::CigarGeodesic).distances(&g).unwrap();
        let worst = fm.iter().zip(&ex).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 0.06, "{worst}");
    }

    #[test]
    fn laplacian_of_eta_squared_integrates_to_zero() {
        let s = SolitonStructure::<f64>::cigar(6.0).unwrap();
        let g = s.sample_geometry(121).unwrap();
        let cut = CutoffFunction::new(vec![0.0, 0.0], 1.0, BallMetric::Chart).sample(&g).unwrap();
        let total = g.integrate(&cut.lap_eta2).unwrap();
        let abs: Vec<f64> = cut.lap_eta2.iter().map(|v| v.abs()).collect();
        assert!(total.abs() < 1e-2 * g.integrate(&abs).unwrap());
    }
}
