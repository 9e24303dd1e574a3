//! Metric component functions for single-chart manifolds.

use std::fmt::Debug;

use crate::scalar::Real;

/// Metric components `g_ij(x)` of a chart, with optional analytic partials.
///
/// Layouts: `metric` is `[i][j]`, `first_derivatives` is `[k][i][j]` for
/// `∂_k g_ij`, `second_derivatives` is `[k][l][i][j]` for `∂_k ∂_l g_ij`.
/// The derivative methods return `false` when no analytic form exists, in
/// which case the chart falls back to finite differences.
pub trait Metric<T: Real>: Send + Sync + Debug {
    fn dim(&self) -> usize;

    fn name(&self) -> String;

    fn metric(&self, x: &[T], out: &mut [T]);

    fn first_derivatives(&self, _x: &[T], _out: &mut [T]) -> bool {
        false
    }

    fn second_derivatives(&self, _x: &[T], _out: &mut [T]) -> bool {
        false
    }

    /// `Some(c)` when `g = c(x) δ`; enables the isotropic fast-marching distance.
    fn conformal_factor(&self, _x: &[T]) -> Option<T> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Euclidean {
    pub dim: usize,
}

impl<T: Real> Metric<T> for Euclidean {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> String {
        format!("euclidean{}", self.dim)
    }

    fn metric(&self, _x: &[T], out: &mut [T]) {
        let m = self.dim;
        for i in 0..m {
            for j in 0..m {
                out[i * m + j] = if i == j { T::one() } else { T::zero() };
            }
        }
    }

    fn first_derivatives(&self, _x: &[T], out: &mut [T]) -> bool {
        out.iter_mut().for_each(|v| *v = T::zero());
        true
    }

    fn second_derivatives(&self, _x: &[T], out: &mut [T]) -> bool {
        out.iter_mut().for_each(|v| *v = T::zero());
        true
    }

    fn conformal_factor(&self, _x: &[T]) -> Option<T> {
        Some(T::one())
    }
}

/// Conformal factor `c`, its gradient and Hessian at a point.
struct ConformalJet<T> {
    c: T,
    grad: Vec<T>,
    hess: Vec<T>,
}

fn fill_conformal<T: Real>(m: usize, jet: &ConformalJet<T>, order: usize, out: &mut [T]) {
    out.iter_mut().for_each(|v| *v = T::zero());
    match order {
        0 => {
            for i in 0..m {
                out[i * m + i] = jet.c;
            }
        }
        1 => {
            for k in 0..m {
                for i in 0..m {
                    out[(k * m + i) * m + i] = jet.grad[k];
                }
            }
        }
        _ => {
            for k in 0..m {
                for l in 0..m {
                    for i in 0..m {
                        out[((k * m + l) * m + i) * m + i] = jet.hess[k * m + l];
                    }
                }
            }
        }
    }
}

/// Hamilton's cigar `(dx² + dy²) / (1 + x² + y²)` on the plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Cigar;

impl Cigar {
    fn jet<T: Real>(x: &[T]) -> ConformalJet<T> {
        let one = T::one();
        let two = T::lit(2.0);
        let q = one + x[0] * x[0] + x[1] * x[1];
        let q2 = q * q;
        let q3 = q2 * q;
        let grad = vec![-two * x[0] / q2, -two * x[1] / q2];
        let mut hess = vec![T::zero(); 4];
        for k in 0..2 {
            for l in 0..2 {
                let delta = if k == l { one } else { T::zero() };
                hess[k * 2 + l] = -two * delta / q2 + T::lit(8.0) * x[k] * x[l] / q3;
            }
        }
        ConformalJet { c: one / q, grad, hess }
    }
}

impl<T: Real> Metric<T> for Cigar {
    fn dim(&self) -> usize {
        2
    }

    fn name(&self) -> String {
        "cigar".into()
    }

    fn metric(&self, x: &[T], out: &mut [T]) {
        fill_conformal(2, &Self::jet(x), 0, out);
    }

    fn first_derivatives(&self, x: &[T], out: &mut [T]) -> bool {
        fill_conformal(2, &Self::jet(x), 1, out);
        true
    }

    fn second_derivatives(&self, x: &[T], out: &mut [T]) -> bool {
        fill_conformal(2, &Self::jet(x), 2, out);
        true
    }

    fn conformal_factor(&self, x: &[T]) -> Option<T> {
        Some(T::one() / (T::one() + x[0] * x[0] + x[1] * x[1]))
    }
}

/// Upper half-space model `δ / x_m²` of hyperbolic space (last coordinate positive).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HyperbolicHalfSpace {
    pub dim: usize,
}

impl HyperbolicHalfSpace {
    fn jet<T: Real>(&self, x: &[T]) -> ConformalJet<T> {
        let m = self.dim;
        let y = x[m - 1];
        let mut grad = vec![T::zero(); m];
        let mut hess = vec![T::zero(); m * m];
        grad[m - 1] = -T::lit(2.0) / (y * y * y);
        hess[m * m - 1] = T::lit(6.0) / (y * y * y * y);
        ConformalJet { c: T::one() / (y * y), grad, hess }
    }
}

impl<T: Real> Metric<T> for HyperbolicHalfSpace {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> String {
        format!("hyperbolic{}", self.dim)
    }

    fn metric(&self, x: &[T], out: &mut [T]) {
        fill_conformal(self.dim, &self.jet(x), 0, out);
    }

    fn first_derivatives(&self, x: &[T], out: &mut [T]) -> bool {
        fill_conformal(self.dim, &self.jet(x), 1, out);
        true
    }

    fn second_derivatives(&self, x: &[T], out: &mut [T]) -> bool {
        fill_conformal(self.dim, &self.jet(x), 2, out);
        true
    }

    fn conformal_factor(&self, x: &[T]) -> Option<T> {
        let y = x[self.dim - 1];
        Some(T::one() / (y * y))
    }
}

/// Round 2-sphere of the given radius in the polar chart `(θ, ϕ)`:
/// `g = diag(R², R² sin²θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundSphere<T> {
    pub radius: T,
}

impl<T: Real> Metric<T> for RoundSphere<T> {
    fn dim(&self) -> usize {
        2
    }

    fn name(&self) -> String {
        format!("sphere({})", self.radius)
    }

    fn metric(&self, x: &[T], out: &mut [T]) {
        let r2 = self.radius * self.radius;
        let s = x[0].sin();
        out[0] = r2;
        out[1] = T::zero();
        out[2] = T::zero();
        out[3] = r2 * s * s;
    }

    fn first_derivatives(&self, x: &[T], out: &mut [T]) -> bool {
        out.iter_mut().for_each(|v| *v = T::zero());
        // only ∂_θ g_ϕϕ survives
        out[3] = self.radius * self.radius * (x[0] + x[0]).sin();
        true
    }

    fn second_derivatives(&self, x: &[T], out: &mut [T]) -> bool {
        out.iter_mut().for_each(|v| *v = T::zero());
        out[3] = T::lit(2.0) * self.radius * self.radius * (x[0] + x[0]).cos();
        true
    }
}

/// Metric given by closures; derivatives always by finite differences.
pub struct FnMetric<T> {
    pub dim: usize,
    pub label: String,
    #[allow(clippy::type_complexity)]
    pub f: Box<dyn Fn(&[T], &mut [T]) + Send + Sync>,
}

impl<T> Debug for FnMetric<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnMetric").field("dim", &self.dim).field("label", &self.label).finish()
    }
}

impl<T: Real> Metric<T> for FnMetric<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> String {
        self.label.clone()
    }

    fn metric(&self, x: &[T], out: &mut [T]) {
        (self.f)(x, out)
    }
}
