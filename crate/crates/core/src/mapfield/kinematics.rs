//! First and second order data of a map: `dφ`, `h∘φ`, `Γ^N∘φ`, `∇dφ`, `τ(φ)`.

use super::{DiscreteMap, PullbackSection};
use crate::error::{Error, Result};
use crate::geometry::chart::{christoffel_from, curvature_from_jet};
use crate::geometry::{SourceGeometry, SymTensorField};
use crate::scalar::{guarded_pow, Real, DEGENERATE_EPS};

/// Width, in stencil reaches, of the boundary band on which a map must be
/// constant. Four nested difference layers sit on top of `φ`.
pub const MAP_MARGIN_REACHES: usize = 6;

/// Differential data of `φ` over a sampled source geometry.
///
/// Layouts: `dφ` is `[node][i][α]`, `∇dφ` is `[node][i][j][α]`, target
/// Christoffels `[node][γ][α][β]`.
#[derive(Debug, Clone)]
pub struct Kinematics<'a, T: Real> {
    geom: &'a SourceGeometry<T>,
    map: &'a DiscreteMap<T>,
    m: usize,
    n: usize,
    d: Vec<T>,
    h: Vec<T>,
    hinv: Vec<T>,
    gamma_n: Vec<T>,
    second: Vec<T>,
    norm2: Vec<T>,
    tau: Vec<T>,
}

impl<'a, T: Real> Kinematics<'a, T> {
    /// Requires `φ` to be constant on the outer band of
    /// `MAP_MARGIN_REACHES` stencil reaches.
    pub fn new(geom: &'a SourceGeometry<T>, map: &'a DiscreteMap<T>) -> Result<Self> {
        let reach = geom.stencil().reach();
        geom.grid().check_margin(map.values(), map.target_dim(), MAP_MARGIN_REACHES * reach)?;
        Self::build(geom, map)
    }

    /// No margin requirement; values within one stencil reach of the
    /// boundary (and the nested derivatives near it) are not meaningful.
    pub fn unchecked(geom: &'a SourceGeometry<T>, map: &'a DiscreteMap<T>) -> Result<Self> {
        Self::build(geom, map)
    }

    fn build(geom: &'a SourceGeometry<T>, map: &'a DiscreteMap<T>) -> Result<Self> {
        let m = geom.dim();
        let n = map.target_dim();
        let grid = geom.grid();
        if map.grid().shape() != grid.shape() || map.source_dim() != m {
            return Err(Error::Dimension { expected: grid.len(), got: map.grid().len() });
        }
        let d = grid.gradient_interior(map.values(), n, geom.stencil());
        let dd = grid.hessian_interior(map.values(), n, geom.stencil());

        let (nn, nnn, mm) = (n * n, n * n * n, m * m);
        let len = grid.len();
        let mut h = vec![T::zero(); len * nn];
        let mut hinv = vec![T::zero(); len * nn];
        let mut gamma_n = vec![T::zero(); len * nnn];
        let base = map.base_point().to_vec();
        let base_jet = map.target().jet(&base, false)?;
        let base_gamma = christoffel_from(n, &base_jet.ginv, &base_jet.dg);
        for node in 0..len {
            let y = map.at(node);
            let (hg, hi, ga) = if y == &base[..] {
                (base_jet.g.clone(), base_jet.ginv.clone(), base_gamma.clone())
            } else {
                let jet = map.target().jet(y, false)?;
                let ga = christoffel_from(n, &jet.ginv, &jet.dg);
                (jet.g, jet.ginv, ga)
            };
            h[node * nn..(node + 1) * nn].copy_from_slice(&hg);
            hinv[node * nn..(node + 1) * nn].copy_from_slice(&hi);
            gamma_n[node * nnn..(node + 1) * nnn].copy_from_slice(&ga);
        }

        let mut second = vec![T::zero(); len * mm * n];
        let mut norm2 = vec![T::zero(); len];
        let mut tau = vec![T::zero(); len * n];
        for node in 0..len {
            let gam = geom.gamma(node);
            let gi = geom.ginv(node);
            let gn = &gamma_n[node * nnn..(node + 1) * nnn];
            let hn = &h[node * nn..(node + 1) * nn];
            let dn = &d[node * m * n..(node + 1) * m * n];
            for i in 0..m {
                for j in 0..m {
                    for a in 0..n {
                        let mut v = dd[((node * m + i) * m + j) * n + a];
                        for k in 0..m {
                            v -= gam[k * mm + i * m + j] * dn[k * n + a];
                        }
                        for b in 0..n {
                            let di = dn[i * n + b];
                            if di == T::zero() {
                                continue;
                            }
                            for c in 0..n {
                                v += gn[a * nn + b * n + c] * di * dn[j * n + c];
                            }
                        }
                        second[((node * m + i) * m + j) * n + a] = v;
                    }
                }
            }
            let mut s = T::zero();
            for i in 0..m {
                for j in 0..m {
                    let gij = gi[i * m + j];
                    if gij == T::zero() {
                        continue;
                    }
                    s += gij * inner(hn, &dn[i * n..(i + 1) * n], &dn[j * n..(j + 1) * n]);
                    for a in 0..n {
                        tau[node * n + a] += gij * second[((node * m + i) * m + j) * n + a];
                    }
                }
            }
            norm2[node] = s.max(T::zero());
        }
        Ok(Self { geom, map, m, n, d, h, hinv, gamma_n, second, norm2, tau })
    }

    pub fn geometry(&self) -> &'a SourceGeometry<T> {
        self.geom
    }

    pub fn map(&self) -> &'a DiscreteMap<T> {
        self.map
    }

    pub fn source_dim(&self) -> usize {
        self.m
    }

    pub fn target_dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.norm2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norm2.is_empty()
    }

    /// `dφ`, `[node][i][α]`.
    pub fn differential(&self) -> &[T] {
        &self.d
    }

    /// `D_i` at a node.
    #[inline]
    pub fn d_at(&self, node: usize, i: usize) -> &[T] {
        let (m, n) = (self.m, self.n);
        &self.d[(node * m + i) * n..(node * m + i + 1) * n]
    }

    #[inline]
    pub fn h(&self, node: usize) -> &[T] {
        &self.h[node * self.n * self.n..(node + 1) * self.n * self.n]
    }

    #[inline]
    pub fn hinv(&self, node: usize) -> &[T] {
        &self.hinv[node * self.n * self.n..(node + 1) * self.n * self.n]
    }

    /// `Γ^N∘φ`, `[γ][α][β]`.
    #[inline]
    pub fn gamma_n(&self, node: usize) -> &[T] {
        let nnn = self.n * self.n * self.n;
        &self.gamma_n[node * nnn..(node + 1) * nnn]
    }

    /// `∇dφ`, `[node][i][j][α]`.
    pub fn second_fundamental_form(&self) -> &[T] {
        &self.second
    }

    /// `|dφ|²` per node.
    pub fn dphi_norm2(&self) -> &[T] {
        &self.norm2
    }

    pub fn dphi_norm(&self, node: usize) -> T {
        self.norm2[node].sqrt()
    }

    /// `τ(φ) = tr_g ∇dφ`.
    pub fn tension(&self) -> PullbackSection<T> {
        PullbackSection { dim: self.n, values: self.tau.clone() }
    }

    pub fn tension_values(&self) -> &[T] {
        &self.tau
    }

    /// `e(φ) = ½|dφ|²`.
    pub fn energy_density(&self) -> Vec<T> {
        self.norm2.iter().map(|&v| T::lit(0.5) * v).collect()
    }

    /// `(φ*h)_ij = h(D_i, D_j)`.
    pub fn pullback_metric(&self) -> SymTensorField<T> {
        let m = self.m;
        let mut out = vec![T::zero(); self.len() * m * m];
        for node in 0..self.len() {
            let hn = self.h(node);
            for i in 0..m {
                for j in i..m {
                    let v = inner(hn, self.d_at(node, i), self.d_at(node, j));
                    out[node * m * m + i * m + j] = v;
                    out[node * m * m + j * m + i] = v;
                }
            }
        }
        SymTensorField { dim: m, values: out }
    }

    /// `h(u, v)` at a node.
    #[inline]
    pub fn inner_n(&self, node: usize, u: &[T], v: &[T]) -> T {
        inner(self.h(node), u, v)
    }

    /// `|V|_h` per node.
    pub fn norms(&self, v: &[T]) -> Vec<T> {
        let n = self.n;
        (0..self.len()).map(|k| self.inner_n(k, &v[k * n..(k + 1) * n], &v[k * n..(k + 1) * n]).max(T::zero()).sqrt()).collect()
    }

    /// `sup |V|_h`.
    pub fn sup_norm(&self, v: &[T]) -> T {
        self.norms(v).into_iter().fold(T::zero(), T::max)
    }

    /// `∫ h(U, V) dv_g`.
    pub fn l2_inner(&self, u: &[T], v: &[T]) -> Result<T> {
        let n = self.n;
        let f: Vec<T> = (0..self.len()).map(|k| self.inner_n(k, &u[k * n..(k + 1) * n], &v[k * n..(k + 1) * n])).collect();
        self.geom.integrate(&f)
    }

    /// `dφ(X)` for a source vector `X` at a node.
    pub fn push(&self, node: usize, x: &[T]) -> Vec<T> {
        let (m, n) = (self.m, self.n);
        let mut out = vec![T::zero(); n];
        for i in 0..m {
            if x[i] == T::zero() {
                continue;
            }
            for a in 0..n {
                out[a] += self.d[(node * m + i) * n + a] * x[i];
            }
        }
        out
    }

    /// `dφ(grad f)` for a scalar field differenced along the grid.
    pub fn push_gradient(&self, f: &[T]) -> Vec<T> {
        let m = self.m;
        let df = self.geom.grid().gradient_interior(f, 1, self.geom.stencil());
        let mut out = Vec::with_capacity(self.len() * self.n);
        for node in 0..self.len() {
            let gi = self.geom.ginv(node);
            let grad: Vec<T> = (0..m).map(|i| (0..m).map(|j| gi[i * m + j] * df[node * m + j]).sum()).collect();
            out.extend(self.push(node, &grad));
        }
        out
    }

    /// `∂_k |dφ|² = 2 g^{ij} h(∇dφ_{ki}, D_j)`, `[node][k]`.
    pub fn d_norm2(&self) -> Vec<T> {
        let (m, n) = (self.m, self.n);
        let two = T::lit(2.0);
        let mut out = vec![T::zero(); self.len() * m];
        for node in 0..self.len() {
            let gi = self.geom.ginv(node);
            let hn = self.h(node);
            for k in 0..m {
                let mut s = T::zero();
                for i in 0..m {
                    let row = &self.second[((node * m + k) * m + i) * n..((node * m + k) * m + i + 1) * n];
                    for j in 0..m {
                        let gij = gi[i * m + j];
                        if gij != T::zero() {
                            s += gij * inner(hn, row, self.d_at(node, j));
                        }
                    }
                }
                out[node * m + k] = two * s;
            }
        }
        out
    }

    /// `|∇dφ|` per node (full tensor norm).
    pub fn second_norm(&self) -> Vec<T> {
        let (m, n) = (self.m, self.n);
        (0..self.len())
            .map(|node| {
                let gi = self.geom.ginv(node);
                let hn = self.h(node);
                let blk = |i: usize, j: usize| &self.second[((node * m + i) * m + j) * n..((node * m + i) * m + j + 1) * n];
                let mut s = T::zero();
                for k in 0..m {
                    for i in 0..m {
                        for a in 0..m {
                            for b in 0..m {
                                let c = gi[k * m + a] * gi[i * m + b];
                                if c != T::zero() {
                                    s += c * inner(hn, blk(k, i), blk(a, b));
                                }
                            }
                        }
                    }
                }
                s.max(T::zero()).sqrt()
            })
            .collect()
    }

    /// `w = |dφ|^{p−2}` with the degenerate-point guard.
    pub fn p_weight(&self, p: T) -> Vec<T> {
        let e = p - T::lit(2.0);
        self.norm2.iter().map(|&s| guarded_pow(s.sqrt(), e, T::lit(DEGENERATE_EPS))).collect()
    }

    /// `∂_k w = (p−2)|dφ|^{p−4} ⟨∇_k dφ, dφ⟩`, `[node][k]`; exactly zero at `p = 2`.
    pub fn d_p_weight(&self, p: T) -> Vec<T> {
        let m = self.m;
        if p == T::lit(2.0) {
            return vec![T::zero(); self.len() * m];
        }
        let dn2 = self.d_norm2();
        let c = (p - T::lit(2.0)) * T::lit(0.5);
        let e = p - T::lit(4.0);
        let mut out = dn2;
        for node in 0..self.len() {
            let f = c * guarded_pow(self.norm2[node].sqrt(), e, T::lit(DEGENERATE_EPS));
            for k in 0..m {
                out[node * m + k] *= f;
            }
        }
        out
    }

    /// `τ_p = w τ + dφ(∇w)`.
    pub fn p_tension(&self, p: T) -> PullbackSection<T> {
        let (m, n) = (self.m, self.n);
        let w = self.p_weight(p);
        let dw = self.d_p_weight(p);
        let mut out = vec![T::zero(); self.len() * n];
        for node in 0..self.len() {
            let gi = self.geom.ginv(node);
            let grad: Vec<T> = (0..m).map(|i| (0..m).map(|j| gi[i * m + j] * dw[node * m + j]).sum()).collect();
            let push = self.push(node, &grad);
            for a in 0..n {
                out[node * n + a] = w[node] * self.tau[node * n + a] + push[a];
            }
        }
        PullbackSection { dim: n, values: out }
    }

    /// `(∇^φ_i V)^α = ∂_i V^α + Γ^N^α_{βγ} D_i^β V^γ`, `[node][i][α]`.
    pub fn covariant(&self, v: &[T]) -> Vec<T> {
        let (m, n, nn) = (self.m, self.n, self.n * self.n);
        let mut out = self.geom.grid().gradient_interior(v, n, self.geom.stencil());
        for node in 0..self.len() {
            let vn = &v[node * n..(node + 1) * n];
            if vn.iter().all(|&x| x == T::zero()) {
                continue;
            }
            let gn = self.gamma_n(node);
            for i in 0..m {
                let di = self.d_at(node, i);
                for a in 0..n {
                    let mut s = T::zero();
                    for b in 0..n {
                        if di[b] == T::zero() {
                            continue;
                        }
                        for c in 0..n {
                            s += gn[a * nn + b * n + c] * di[b] * vn[c];
                        }
                    }
                    out[(node * m + i) * n + a] += s;
                }
            }
        }
        out
    }

    /// `∇^φ_i V` along one source direction.
    pub fn covariant_along(&self, v: &[T], i: usize) -> Vec<T> {
        let (m, n) = (self.m, self.n);
        let full = self.covariant(v);
        (0..self.len()).flat_map(|node| full[(node * m + i) * n..(node * m + i + 1) * n].to_vec()).collect()
    }

    /// `div W = g^{ij}(∇^φ_i W_j − Γ^k_ij W_k)` for a family `W_j` stored
    /// `[node][j][α]`.
    pub fn divergence(&self, w: &[T]) -> Vec<T> {
        let (m, n, nn, mm) = (self.m, self.n, self.n * self.n, self.m * self.m);
        let mn = m * n;
        let dw = self.geom.grid().gradient_interior(w, mn, self.geom.stencil());
        let mut out = vec![T::zero(); self.len() * n];
        let mut cov = vec![T::zero(); n];
        for node in 0..self.len() {
            let gi = self.geom.ginv(node);
            let gam = self.geom.gamma(node);
            let gn = self.gamma_n(node);
            let wn = &w[node * mn..(node + 1) * mn];
            for i in 0..m {
                let di = self.d_at(node, i);
                for j in 0..m {
                    let gij = gi[i * m + j];
                    if gij == T::zero() {
                        continue;
                    }
                    for a in 0..n {
                        let mut s = dw[(node * m + i) * mn + j * n + a];
                        for b in 0..n {
                            if di[b] == T::zero() {
                                continue;
                            }
                            for c in 0..n {
                                s += gn[a * nn + b * n + c] * di[b] * wn[j * n + c];
                            }
                        }
                        for k in 0..m {
                            s -= gam[k * mm + i * m + j] * wn[k * n + a];
                        }
                        cov[a] = s;
                    }
                    for a in 0..n {
                        out[node * n + a] += gij * cov[a];
                    }
                }
            }
        }
        out
    }

    /// `⟨∇V, dφ⟩ = g^{ij} h(∇_i V, D_j)` per node, from `∇V` as `[node][i][α]`.
    pub fn pair_with_dphi(&self, nv: &[T]) -> Vec<T> {
        let (m, n) = (self.m, self.n);
        (0..self.len())
            .map(|node| {
                let gi = self.geom.ginv(node);
                let hn = self.h(node);
                let mut s = T::zero();
                for i in 0..m {
                    for j in 0..m {
                        let gij = gi[i * m + j];
                        if gij != T::zero() {
                            s += gij * inner(hn, &nv[(node * m + i) * n..(node * m + i + 1) * n], self.d_at(node, j));
                        }
                    }
                }
                s
            })
            .collect()
    }

    /// Family `c · D_j`.
    pub fn scaled_differential(&self, c: &[T]) -> Vec<T> {
        let mn = self.m * self.n;
        let mut out = self.d.clone();
        for node in 0..self.len() {
            for v in &mut out[node * mn..(node + 1) * mn] {
                *v *= c[node];
            }
        }
        out
    }

    /// `h^{-1} ω` for target covectors stored `[node][α]`.
    pub fn raise(&self, omega: &[T]) -> Vec<T> {
        let n = self.n;
        let mut out = vec![T::zero(); omega.len()];
        for node in 0..self.len() {
            let hi = self.hinv(node);
            for a in 0..n {
                out[node * n + a] = (0..n).map(|b| hi[a * n + b] * omega[node * n + b]).sum();
            }
        }
        out
    }

    /// Target Riemann tensor along `φ`, `[node][a][b][c][d]`.
    pub fn target_riemann(&self) -> Result<Vec<T>> {
        let n = self.n;
        let n4 = n * n * n * n;
        let base = self.map.base_point().to_vec();
        let base_r = curvature_from_jet(&self.map.target().jet(&base, true)?).riemann;
        let mut out = vec![T::zero(); self.len() * n4];
        for node in 0..self.len() {
            let y = self.map.at(node);
            if y == &base[..] {
                out[node * n4..(node + 1) * n4].copy_from_slice(&base_r);
            } else {
                let r = curvature_from_jet(&self.map.target().jet(y, true)?).riemann;
                out[node * n4..(node + 1) * n4].copy_from_slice(&r);
            }
        }
        Ok(out)
    }

    /// `g^{ij} R^N(S, D_i) D_j` per node.
    pub fn curvature_trace(&self, riemann: &[T], s: &[T]) -> Vec<T> {
        let (m, n) = (self.m, self.n);
        let n4 = n * n * n * n;
        let mut out = vec![T::zero(); self.len() * n];
        for node in 0..self.len() {
            let sv = &s[node * n..(node + 1) * n];
            if sv.iter().all(|&x| x == T::zero()) {
                continue;
            }
            let r = &riemann[node * n4..(node + 1) * n4];
            let gi = self.geom.ginv(node);
            for i in 0..m {
                for j in 0..m {
                    let gij = gi[i * m + j];
                    if gij == T::zero() {
                        continue;
                    }
                    let (di, dj) = (self.d_at(node, i), self.d_at(node, j));
                    for a in 0..n {
                        let mut acc = T::zero();
                        for b in 0..n {
                            for c in 0..n {
                                let x = sv[c];
                                if x == T::zero() {
                                    continue;
                                }
                                for d in 0..n {
                                    acc += r[((a * n + b) * n + c) * n + d] * dj[b] * x * di[d];
                                }
                            }
                        }
                        out[node * n + a] += gij * acc;
                    }
                }
            }
        }
        out
    }
}

#[inline]
pub(crate) fn inner<T: Real>(h: &[T], u: &[T], v: &[T]) -> T {
    let n = u.len();
    let mut s = T::zero();
    for a in 0..n {
        if u[a] == T::zero() {
            continue;
        }
        for b in 0..n {
            s += h[a * n + b] * u[a] * v[b];
        }
    }
    s
}
