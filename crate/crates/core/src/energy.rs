//! Energy functionals, their first-variation formulas, and the
//! finite-difference oracles (map variations and metric variations).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{SourceGeometry, SymTensorField};
use crate::mapfield::{BitensionForm, DiscreteMap, Kinematics, LagrangianB, LagrangianL, PullbackSection};
use crate::scalar::{guarded_pow, Real, DEGENERATE_EPS};

/// `E_L = ∫ L(x, φ, e(φ))`, `E_B = ∫ B(x, φ, e(φ), ½|τ_L|²)`,
/// `E_p = ½∫|τ_p|²`, `E_{p,q} = (1/q)∫|τ_p|^q`.
#[derive(Clone)]
pub enum Functional<T: Real> {
    L(Arc<dyn LagrangianL<T>>),
    B { b: Arc<dyn LagrangianB<T>>, l: Arc<dyn LagrangianL<T>> },
    P { p: T },
    PQ { p: T, q: T },
}

impl<T: Real> fmt::Debug for Functional<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

impl<T: Real> Functional<T> {
    pub fn describe(&self) -> String {
        match self {
            Self::L(l) => format!("E_L[{}]", l.name()),
            Self::B { b, l } => format!("E_B[B={}, L={}]", b.name(), l.name()),
            Self::P { p } => format!("E_p[p={p}]"),
            Self::PQ { p, q } => format!("E_pq[p={p}, q={q}]"),
        }
    }

    /// Integrand at every node.
    pub fn density(&self, kin: &Kinematics<'_, T>) -> Vec<T> {
        match self {
            Self::L(l) => kin.lagrangian_fields(l.as_ref()).l,
            Self::B { b, l } => {
                let tau_l = kin.l_tension(l.as_ref());
                let s = kin.s_field(&tau_l.values);
                let r = kin.energy_density();
                let grid = kin.geometry().grid();
                let mut x = vec![T::zero(); kin.source_dim()];
                (0..kin.len())
                    .map(|node| {
                        grid.coords_into(node, &mut x);
                        b.value(&x, kin.map().at(node), r[node], s[node])
                    })
                    .collect()
            }
            Self::P { p } => {
                let tp = kin.p_tension(*p);
                kin.norms(&tp.values).into_iter().map(|v| T::lit(0.5) * v * v).collect()
            }
            Self::PQ { p, q } => {
                let tp = kin.p_tension(*p);
                kin.norms(&tp.values).into_iter().map(|v| v.powf(*q) / *q).collect()
            }
        }
    }

    pub fn evaluate(&self, geom: &SourceGeometry<T>, map: &DiscreteMap<T>) -> Result<T> {
        let kin = Kinematics::new(geom, map)?;
        geom.integrate(&self.density(&kin))
    }

    /// The field `G` with `d/dt E(φ + t v) = −∫⟨G, v⟩`.
    pub fn euler_lagrange(&self, kin: &Kinematics<'_, T>, form: BitensionForm) -> Result<PullbackSection<T>> {
        match self {
            Self::L(l) => Ok(kin.l_tension(l.as_ref())),
            Self::B { b, l } => {
                let tb = kin.b_tension(b.as_ref(), l.as_ref());
                let t2 = kin.bitension_lb(b.as_ref(), l.as_ref(), form)?;
                Ok(tb.add(&t2))
            }
            Self::P { p } => kin.bitension_p2(*p),
            Self::PQ { p, q } => kin.bitension_pq(*p, *q),
        }
    }
}

/// Richardson-extrapolated central difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdEstimate {
    pub value: f64,
    pub error_bar: f64,
    pub step: f64,
    /// Plain central differences at `t` and `t/2`.
    pub coarse: f64,
    pub fine: f64,
}

impl FdEstimate {
    pub fn zero() -> Self {
        Self { value: 0.0, error_bar: 0.0, step: 0.0, coarse: 0.0, fine: 0.0 }
    }
}

/// `D(t) = (E(t) − E(−t))/2t`, extrapolated as `(4D(t/2) − D(t))/3`.
pub fn richardson<T: Real, F>(mut energy: F, t0: T) -> Result<FdEstimate>
where
    F: FnMut(T) -> Result<T>,
{
    if !(t0 > T::lit(1e-14)) || !t0.is_finite() {
        return Err(Error::StepUnderflow(t0.as_f64()));
    }
    let mut central = |t: T| -> Result<(T, T)> {
        let (a, b) = (energy(t)?, energy(-t)?);
        Ok(((a - b) / (t + t), a.abs().max(b.abs())))
    };
    let (d1, s1) = central(t0)?;
    let half = t0 * T::lit(0.5);
    let (d2, s2) = central(half)?;
    let rich = (T::lit(4.0) * d2 - d1) / T::lit(3.0);
    let rounding = T::lit(8.0) * T::epsilon() * s1.max(s2) / half;
    let value = rich.as_f64();
    if !value.is_finite() {
        return Err(Error::NonFinite("finite-difference derivative".into()));
    }
    Ok(FdEstimate {
        value,
        error_bar: ((rich - d2).abs() + rounding).as_f64(),
        step: t0.as_f64(),
        coarse: d1.as_f64(),
        fine: d2.as_f64(),
    })
}

/// `d/dt E(φ + t v)` at `t = 0`; step `t₀ = 10⁻⁴ max(1, |φ|_∞)/|v|_∞`.
pub fn map_variation_derivative<T: Real>(f: &Functional<T>, geom: &SourceGeometry<T>, map: &DiscreteMap<T>, v: &[T]) -> Result<FdEstimate> {
    let vmax = v.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    if vmax == T::zero() {
        return Ok(FdEstimate::zero());
    }
    let t0 = T::lit(1e-4) * map.max_abs().max(T::one()) / vmax;
    richardson(|t| f.evaluate(geom, &map.perturbed(v, t)?), t0)
}

/// `d/dt E` under `g + t δg` with the geometry rebuilt at every probe;
/// step `t₀ = 10⁻⁴/|δg|_∞`.
pub fn metric_variation_derivative<T: Real>(
    f: &Functional<T>,
    geom: &SourceGeometry<T>,
    map: &DiscreteMap<T>,
    delta: &SymTensorField<T>,
) -> Result<FdEstimate> {
    let dmax = delta.max_abs();
    if dmax == T::zero() {
        return Ok(FdEstimate::zero());
    }
    let t0 = T::lit(1e-4) / dmax;
    richardson(|t| f.evaluate(&geom.perturbed(delta, t)?, map), t0)
}

/// Predicted map derivative `−∫⟨G, v⟩`.
pub fn first_variation_formula<T: Real>(f: &Functional<T>, kin: &Kinematics<'_, T>, v: &[T], form: BitensionForm) -> Result<T> {
    let g = f.euler_lagrange(kin, form)?;
    Ok(-kin.l2_inner(&g.values, v)?)
}

/// `½∫⟨S, δg⟩ dv_g`.
pub fn stress_pairing<T: Real>(geom: &SourceGeometry<T>, s: &SymTensorField<T>, delta: &SymTensorField<T>) -> Result<T> {
    let m = geom.dim();
    let f: Vec<T> = (0..geom.len()).map(|k| T::lit(0.5) * crate::geometry::linalg::contract2(geom.ginv(k), s.at(k), delta.at(k), m)).collect();
    geom.integrate(&f)
}

/// Oracle against formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub oracle: FdEstimate,
    pub formula: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

impl Agreement {
    pub fn new(oracle: FdEstimate, formula: f64) -> Self {
        let abs_err = (oracle.value - formula).abs();
        let scale = oracle.value.abs().max(formula.abs());
        let rel_err = if scale == 0.0 { 0.0 } else { abs_err / scale };
        Self { oracle, formula, abs_err, rel_err }
    }

    /// Passes at `max(rel_tol, 10 h²)`.
    pub fn passes(&self, rel_tol: f64, h: f64) -> bool {
        self.rel_err <= rel_tol.max(10.0 * h * h)
    }
}

/// Map-variation oracle against `−∫⟨G, v⟩`.
pub fn check_map_variation<T: Real>(
    f: &Functional<T>,
    geom: &SourceGeometry<T>,
    map: &DiscreteMap<T>,
    v: &[T],
    form: BitensionForm,
) -> Result<Agreement> {
    let oracle = map_variation_derivative(f, geom, map, v)?;
    let kin = Kinematics::new(geom, map)?;
    Ok(Agreement::new(oracle, first_variation_formula(f, &kin, v, form)?.as_f64()))
}

/// `δ|τ_p|²` under `δg`, the six-term expansion with
/// `ξ^k = g^{kl}((div δg)_l − ½∂_l tr δg)`.
pub fn delta_tau_p_squared<T: Real>(kin: &Kinematics<'_, T>, p: T, delta: &SymTensorField<T>) -> Result<Vec<T>> {
    let geom = kin.geometry();
    let (m, n, mm) = (kin.source_dim(), kin.target_dim(), kin.source_dim() * kin.source_dim());
    let len = kin.len();
    if delta.dim != m || delta.nodes() != len {
        return Err(Error::Dimension { expected: len, got: delta.nodes() });
    }
    let eps = T::lit(DEGENERATE_EPS);
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let pm2 = p - two;
    let tau_p = kin.p_tension(p).values;
    let tau = kin.tension_values();
    let w = kin.p_weight(p);
    let dn2 = kin.d_norm2();
    let pull = kin.pullback_metric();
    let second = kin.second_fundamental_form();
    let ddelta = geom.grid().gradient_interior(&delta.values, mm, geom.stencil());
    let pair_field: Vec<T> = (0..len).map(|k| crate::geometry::linalg::contract2(geom.ginv(k), pull.at(k), delta.at(k), m)).collect();
    let dpair = geom.grid().gradient_interior(&pair_field, 1, geom.stencil());

    let mut out = vec![T::zero(); len];
    for node in 0..len {
        let gi = geom.ginv(node);
        let gam = geom.gamma(node);
        let dg = delta.at(node);
        let tp = &tau_p[node * n..(node + 1) * n];
        let norm = kin.dphi_norm(node);
        let raise = |cov: &[T]| -> Vec<T> { (0..m).map(|i| (0..m).map(|j| gi[i * m + j] * cov[j]).sum()).collect() };

        // ∇_a δg_bk
        let nab = |a: usize, b: usize, k: usize| -> T {
            let mut v = ddelta[(node * m + a) * mm + b * m + k];
            for l in 0..m {
                v -= gam[l * mm + a * m + b] * dg[l * m + k] + gam[l * mm + a * m + k] * dg[b * m + l];
            }
            v
        };
        let trace_d: Vec<T> = (0..m)
            .map(|k| (0..m).map(|a| (0..m).map(|b| gi[a * m + b] * nab(k, a, b)).sum::<T>()).sum())
            .collect();
        let xi_low: Vec<T> = (0..m)
            .map(|k| {
                let mut s = T::zero();
                for a in 0..m {
                    for b in 0..m {
                        s += gi[a * m + b] * nab(a, b, k);
                    }
                }
                s - half * trace_d[k]
            })
            .collect();
        let xi = raise(&xi_low);
        let push_xi = kin.push(node, &xi);

        let pair = pair_field[node];
        let t2_inner = {
            let mut s = T::zero();
            for i in 0..m {
                for j in 0..m {
                    for a in 0..m {
                        for b in 0..m {
                            let c = gi[i * m + a] * gi[j * m + b] * dg[a * m + b];
                            if c != T::zero() {
                                s += c * kin.inner_n(node, &second[((node * m + i) * m + j) * n..((node * m + i) * m + j + 1) * n], tp);
                            }
                        }
                    }
                }
            }
            s
        };
        let mut v = -two * w[node] * t2_inner - two * w[node] * kin.inner_n(node, &push_xi, tp);
        if pm2 != T::zero() {
            let f4 = guarded_pow(norm, p - T::lit(4.0), eps);
            let tau_n = &tau[node * n..(node + 1) * n];
            v -= pm2 * f4 * pair * kin.inner_n(node, tau_n, tp);
            if p != T::lit(4.0) {
                let f6 = guarded_pow(norm, p - T::lit(6.0), eps);
                let grad_n2 = raise(&dn2[node * m..(node + 1) * m]);
                let push = kin.push(node, &grad_n2);
                v -= pm2 * (p - T::lit(4.0)) * f6 * half * pair * kin.inner_n(node, &push, tp);
            }
            let hdt: Vec<T> = (0..m).map(|j| kin.inner_n(node, kin.d_at(node, j), tp)).collect();
            let mut t5 = T::zero();
            for i in 0..m {
                for j in 0..m {
                    for a in 0..m {
                        for b in 0..m {
                            t5 += gi[i * m + a] * gi[j * m + b] * dn2[node * m + i] * hdt[j] * dg[a * m + b];
                        }
                    }
                }
            }
            v -= pm2 * f4 * t5;
            let gp = raise(&dpair[node * m..(node + 1) * m]);
            let push = kin.push(node, &gp);
            v -= pm2 * f4 * kin.inner_n(node, &push, tp);
        }
        out[node] = v;
    }
    Ok(out)
}

/// Oracle for `∫ δ|τ_p|²`: `d/dt Σ_k w⁰_k |τ_p(g + tδg)|²_k` with the
/// quadrature weights frozen at the base metric.
pub fn fixed_measure_tau_p_derivative<T: Real>(
    geom: &SourceGeometry<T>,
    map: &DiscreteMap<T>,
    p: T,
    delta: &SymTensorField<T>,
) -> Result<FdEstimate> {
    let dmax = delta.max_abs();
    if dmax == T::zero() {
        return Ok(FdEstimate::zero());
    }
    let weights = geom.weights().to_vec();
    richardson(
        |t| {
            let gt = geom.perturbed(delta, t)?;
            let kin = Kinematics::new(&gt, map)?;
            let tp = kin.p_tension(p);
            Ok(kin.norms(&tp.values).iter().zip(&weights).map(|(&v, &w)| w * v * v).sum())
        },
        T::lit(1e-4) / dmax,
    )
}
