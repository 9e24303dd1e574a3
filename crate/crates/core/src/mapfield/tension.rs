//! Tension and bitension fields: `τ_L`, `τ_B`, `τ_{2,p,q}`, `τ_{2,L,B}`.

use serde::{Deserialize, Serialize};

use super::kinematics::Kinematics;
use super::lagrangian::{LagrangianB, LagrangianL};
use super::PullbackSection;
use crate::error::{Error, Result};
use crate::scalar::{guarded_pow, Real, DEGENERATE_EPS};

/// Which assembly of `τ_{2,L,B}` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BitensionForm {
    /// The five displayed terms.
    #[default]
    Printed,
    /// Adds `−tr ∇(⟨grad^N L', ψ⟩ dφ)`, which the first variation needs when
    /// `L'` depends on the target point.
    Complete,
}

/// `L` and its partials sampled along `(x, φ(x), e(φ)(x))`.
#[derive(Debug, Clone)]
pub struct LagrangianFields<T> {
    pub r: Vec<T>,
    pub l: Vec<T>,
    pub dl: Vec<T>,
    pub ddl: Vec<T>,
    /// `∂L/∂y`, `[node][α]`.
    pub dy_l: Vec<T>,
    /// `∂L'/∂y`, `[node][α]`.
    pub dy_dl: Vec<T>,
}

fn scale<T: Real>(v: &mut [T], by: T) {
    v.iter_mut().for_each(|x| *x *= by);
}

impl<'a, T: Real> Kinematics<'a, T> {
    pub fn lagrangian_fields(&self, lag: &dyn LagrangianL<T>) -> LagrangianFields<T> {
        let n = self.target_dim();
        let len = self.len();
        let grid = self.geometry().grid();
        let r = self.energy_density();
        let mut f = LagrangianFields {
            l: vec![T::zero(); len],
            dl: vec![T::zero(); len],
            ddl: vec![T::zero(); len],
            dy_l: vec![T::zero(); len * n],
            dy_dl: vec![T::zero(); len * n],
            r,
        };
        let mut x = vec![T::zero(); self.source_dim()];
        for node in 0..len {
            grid.coords_into(node, &mut x);
            let y = self.map().at(node);
            let e = f.r[node];
            f.l[node] = lag.value(&x, y, e);
            f.dl[node] = lag.d_r(&x, y, e);
            f.ddl[node] = lag.d_rr(&x, y, e);
            lag.d_y(&x, y, e, &mut f.dy_l[node * n..(node + 1) * n]);
            lag.d_ry(&x, y, e, &mut f.dy_dl[node * n..(node + 1) * n]);
        }
        f
    }

    /// `w τ + dφ(∇w) − h⁻¹ω` with `∇w` differenced along the grid.
    fn three_term(&self, weight: &[T], covector: &[T]) -> Vec<T> {
        let n = self.target_dim();
        let push = self.push_gradient(weight);
        let sharp = self.raise(covector);
        let tau = self.tension_values();
        (0..self.len() * n).map(|k| weight[k / n] * tau[k] + push[k] - sharp[k]).collect()
    }

    /// `τ_L = L' τ + dφ(grad^M L') − grad^N L`, with `grad^M L'` the total
    /// derivative of `x ↦ L'(x, φ(x), e(φ)(x))`.
    pub fn l_tension(&self, lag: &dyn LagrangianL<T>) -> PullbackSection<T> {
        let f = self.lagrangian_fields(lag);
        PullbackSection { dim: self.target_dim(), values: self.three_term(&f.dl, &f.dy_l) }
    }

    /// `s = ½|τ_L|²` per node.
    pub fn s_field(&self, tau_l: &[T]) -> Vec<T> {
        self.norms(tau_l).into_iter().map(|v| T::lit(0.5) * v * v).collect()
    }

    /// `τ_B = B' τ + dφ(grad^M B') − grad^N B` at `s = ½|τ_L|²`.
    pub fn b_tension(&self, b: &dyn LagrangianB<T>, lag: &dyn LagrangianL<T>) -> PullbackSection<T> {
        let n = self.target_dim();
        let tau_l = self.l_tension(lag);
        let s = self.s_field(&tau_l.values);
        let r = self.energy_density();
        let grid = self.geometry().grid();
        let mut br = vec![T::zero(); self.len()];
        let mut dy = vec![T::zero(); self.len() * n];
        let mut x = vec![T::zero(); self.source_dim()];
        for node in 0..self.len() {
            grid.coords_into(node, &mut x);
            let y = self.map().at(node);
            br[node] = b.d_r(&x, y, r[node], s[node]);
            b.d_y(&x, y, r[node], s[node], &mut dy[node * n..(node + 1) * n]);
        }
        PullbackSection { dim: n, values: self.three_term(&br, &dy) }
    }

    /// `τ_{2,p,q} = −w tr R^N(σ, dφ)dφ − tr ∇(w ∇σ) − (p−2) tr ∇(|dφ|^{p−4}⟨∇σ, dφ⟩ dφ)`
    /// with `w = |dφ|^{p−2}` and `σ = |τ_p|^{q−2} τ_p`.
    pub fn bitension_pq(&self, p: T, q: T) -> Result<PullbackSection<T>> {
        let n = self.target_dim();
        let tau_p = self.p_tension(p);
        let mut sigma = tau_p.values;
        if q != T::lit(2.0) {
            let norms = self.norms(&sigma);
            for node in 0..self.len() {
                let f = guarded_pow(norms[node], q - T::lit(2.0), T::lit(DEGENERATE_EPS));
                scale(&mut sigma[node * n..(node + 1) * n], f);
            }
        }
        self.bitension_from_sigma(p, &sigma)
    }

    /// The `q = 2` operator written out: `−w tr R^N(τ_p, dφ)dφ − tr ∇ w∇τ_p
    /// − (p−2) tr ∇⟨∇τ_p, dφ⟩|dφ|^{p−4} dφ`.
    pub fn bitension_p2(&self, p: T) -> Result<PullbackSection<T>> {
        let tau_p = self.p_tension(p);
        self.bitension_from_sigma(p, &tau_p.values)
    }

    fn bitension_from_sigma(&self, p: T, sigma: &[T]) -> Result<PullbackSection<T>> {
        let (m, n) = (self.source_dim(), self.target_dim());
        let len = self.len();
        let w = self.p_weight(p);
        let riemann = self.target_riemann()?;
        let curv = self.curvature_trace(&riemann, sigma);
        let nabla = self.covariant(sigma);
        let mut family = nabla.clone();
        for node in 0..len {
            scale(&mut family[node * m * n..(node + 1) * m * n], w[node]);
        }
        let div1 = self.divergence(&family);
        let mut out: Vec<T> = (0..len * n).map(|k| -w[k / n] * curv[k] - div1[k]).collect();
        if p != T::lit(2.0) {
            let pair = self.pair_with_dphi(&nabla);
            let c: Vec<T> = (0..len)
                .map(|node| {
                    (p - T::lit(2.0)) * guarded_pow(self.dphi_norm(node), p - T::lit(4.0), T::lit(DEGENERATE_EPS)) * pair[node]
                })
                .collect();
            let div2 = self.divergence(&self.scaled_differential(&c));
            out.iter_mut().zip(div2).for_each(|(o, v)| *o -= v);
        }
        Ok(PullbackSection { dim: n, values: out })
    }

    /// `τ_{2,L,B}` with `ψ = B'_τ τ_L`:
    /// `−L' tr R^N(ψ, dφ)dφ − tr ∇(L'∇ψ) + h⁻¹(Hess^N L)(ψ) + ⟨∇ψ, dφ⟩ grad^N L'
    /// − tr ∇(⟨∇ψ, dφ⟩ L'' dφ)`, plus `−tr ∇(⟨grad^N L', ψ⟩ dφ)` in the complete form.
    pub fn bitension_lb(&self, b: &dyn LagrangianB<T>, lag: &dyn LagrangianL<T>, form: BitensionForm) -> Result<PullbackSection<T>> {
        let (m, n, nn) = (self.source_dim(), self.target_dim(), self.target_dim() * self.target_dim());
        let len = self.len();
        let f = self.lagrangian_fields(lag);
        let tau_l = self.three_term(&f.dl, &f.dy_l);
        let s = self.s_field(&tau_l);
        let grid = self.geometry().grid();
        let mut x = vec![T::zero(); m];
        let mut psi = tau_l;
        let mut hess = vec![T::zero(); nn];
        let mut hess_term = vec![T::zero(); len * n];
        for node in 0..len {
            grid.coords_into(node, &mut x);
            let y = self.map().at(node);
            let bs = b.d_s(&x, y, f.r[node], s[node]);
            scale(&mut psi[node * n..(node + 1) * n], bs);
            let pv = &psi[node * n..(node + 1) * n];
            if pv.iter().all(|&v| v == T::zero()) {
                continue;
            }
            if !lag.d_yy(&x, y, f.r[node], &mut hess) {
                return Err(Error::UnsupportedLagrangian(format!("{} has no second target derivatives", lag.name())));
            }
            let gn = self.gamma_n(node);
            let dy = &f.dy_l[node * n..(node + 1) * n];
            // (Hess L)_{αβ} ψ^β, then raise
            let lowered: Vec<T> = (0..n)
                .map(|a| {
                    (0..n)
                        .map(|bb| {
                            let mut hab = hess[a * n + bb];
                            for c in 0..n {
                                hab -= gn[c * nn + a * n + bb] * dy[c];
                            }
                            hab * pv[bb]
                        })
                        .sum()
                })
                .collect();
            let hi = self.hinv(node);
            for a in 0..n {
                hess_term[node * n + a] = (0..n).map(|c| hi[a * n + c] * lowered[c]).sum();
            }
        }
        let riemann = self.target_riemann()?;
        let curv = self.curvature_trace(&riemann, &psi);
        let nabla = self.covariant(&psi);
        let mut family = nabla.clone();
        for node in 0..len {
            scale(&mut family[node * m * n..(node + 1) * m * n], f.dl[node]);
        }
        let div1 = self.divergence(&family);
        let pair = self.pair_with_dphi(&nabla);
        let grad_dl = self.raise(&f.dy_dl);
        let c: Vec<T> = (0..len).map(|k| pair[k] * f.ddl[k]).collect();
        let div2 = self.divergence(&self.scaled_differential(&c));
        let mut out: Vec<T> = (0..len * n)
            .map(|k| {
                let node = k / n;
                -f.dl[node] * curv[k] - div1[k] + hess_term[k] + pair[node] * grad_dl[k] - div2[k]
            })
            .collect();
        if form == BitensionForm::Complete {
            let c: Vec<T> = (0..len)
                .map(|node| (0..n).map(|a| f.dy_dl[node * n + a] * psi[node * n + a]).sum())
                .collect();
            if c.iter().any(|&v| v != T::zero()) {
                let div3 = self.divergence(&self.scaled_differential(&c));
                out.iter_mut().zip(div3).for_each(|(o, v)| *o -= v);
            }
        }
        Ok(PullbackSection { dim: n, values: out })
    }
}
