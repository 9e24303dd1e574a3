//! Stress-energy tensors of the map functionals, their trace and divergence
//! identities, and the integral ledger on gradient Ricci solitons.
//!
//! Every tensor is assembled from one template,
//!
//! `T(W) = L'(⟨dφX, ∇_Y W⟩ + ⟨dφY, ∇_X W⟩) + (K⟨∇W, dφ⟩ + ⟨grad^N L', W⟩) φ*h
//!        − (⟨τ_L + grad^N L, W⟩ + L'⟨dφ, ∇W⟩) g`,
//!
//! plus scalar multiples of `g` and `φ*h`. For the p-energy `L' = |dφ|^{p−2}`
//! and `K = (p−2)|dφ|^{p−4}`.

mod liouville;

use serde::{Deserialize, Serialize};

pub use liouville::{
    decay_probe, ibp_defect, liouville_ledger, sign_condition_field, DecayReport, DecayRow, IbpDefect, LedgerReport, LedgerTerm,
    DECAY_TERMS,
};

use crate::energy::Functional;
use crate::error::{Error, Result};
use crate::geometry::linalg::contract2;
use crate::geometry::{SourceGeometry, SymTensorField};
use crate::mapfield::{BPreset, DiscreteMap, Kinematics, LagrangianB, LagrangianL};
use crate::scalar::{guarded_pow, Real, DEGENERATE_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StressKind {
    /// `S_{2,p}`.
    S2p,
    /// `S_{2,p,q}`.
    S2pq,
    /// `S_{2,L}`.
    S2L,
    /// `S_{B,L}`.
    SBL,
    /// `L g − L' φ*h`.
    EL,
}

/// Base of the power in the `φ*h` coefficient of `S_{2,p}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentVariant {
    /// `(p−2)|dφ|^{p−4}`.
    #[default]
    DifferentialNorm,
    /// `(p−2)|τ_p|^{p−4}`.
    TensionNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StressForm {
    /// The tensor whose pairing with `δg` is the metric derivative.
    #[default]
    Derived,
    /// `S_{2,p,q} = |τ_p|^{q−2} S_{2,p}`, `S_{B,L} = B_r(L g − L'φ*h) + B_s S_{2,L}`,
    /// and `S_{2,L}` with `−(∂_y L'·τ_L) φ*h`.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StressOptions {
    pub variant: ExponentVariant,
    pub form: StressForm,
}

#[derive(Debug, Clone)]
pub struct StressTensor<T: Real> {
    pub kind: StressKind,
    pub label: String,
    pub options: StressOptions,
    pub field: SymTensorField<T>,
}

impl<T: Real> StressTensor<T> {
    pub fn at(&self, node: usize) -> &[T] {
        self.field.at(node)
    }

    /// `g^{ij} S_ij` per node.
    pub fn trace(&self, geom: &SourceGeometry<T>) -> Vec<T> {
        (0..geom.len()).map(|k| geom.trace(k, self.field.at(k))).collect()
    }
}

/// Per-node data of the template: `L'`, `K`, `grad^N L'` and `τ_L + grad^N L`.
struct Coupling<T> {
    w: Vec<T>,
    k: Vec<T>,
    grad_w: Option<Vec<T>>,
    grad_w_sign: T,
    tau_plus: Vec<T>,
}

/// The template applied to `W`, scaled per node by `t_scale`, plus `γ g + δ φ*h`.
struct Recipe<T> {
    coupling: Option<Coupling<T>>,
    w_field: Vec<T>,
    t_scale: Option<Vec<T>>,
    gamma: Vec<T>,
    delta: Vec<T>,
}

fn p_coupling<T: Real>(kin: &Kinematics<'_, T>, p: T, variant: ExponentVariant, tau_p: &[T]) -> Coupling<T> {
    let two = T::lit(2.0);
    let eps = T::lit(DEGENERATE_EPS);
    let k = if p == two {
        vec![T::zero(); kin.len()]
    } else {
        let base: Vec<T> = match variant {
            ExponentVariant::DifferentialNorm => (0..kin.len()).map(|node| kin.dphi_norm(node)).collect(),
            ExponentVariant::TensionNorm => kin.norms(tau_p),
        };
        base.into_iter().map(|b| (p - two) * guarded_pow(b, p - T::lit(4.0), eps)).collect()
    };
    Coupling { w: kin.p_weight(p), k, grad_w: None, grad_w_sign: T::one(), tau_plus: tau_p.to_vec() }
}

fn l_coupling<T: Real>(kin: &Kinematics<'_, T>, lag: &dyn LagrangianL<T>, form: StressForm) -> (Coupling<T>, Vec<T>, Vec<T>) {
    let f = kin.lagrangian_fields(lag);
    let tau_l = kin.l_tension(lag).values;
    let grad_l = kin.raise(&f.dy_l);
    let grad_w = kin.raise(&f.dy_dl);
    let has_grad_w = grad_w.iter().any(|&v| v != T::zero());
    let tau_plus = tau_l.iter().zip(&grad_l).map(|(&a, &b)| a + b).collect();
    let sign = if form == StressForm::Printed { -T::one() } else { T::one() };
    let c = Coupling { w: f.dl.clone(), k: f.ddl.clone(), grad_w: has_grad_w.then_some(grad_w), grad_w_sign: sign, tau_plus };
    (c, tau_l, f.l)
}

fn recipe<T: Real>(kin: &Kinematics<'_, T>, f: &Functional<T>, opts: StressOptions) -> Result<(StressKind, Recipe<T>)> {
    let n = kin.target_dim();
    let len = kin.len();
    let half = T::lit(0.5);
    let zeros = vec![T::zero(); len];
    Ok(match f {
        Functional::P { p } => {
            let tau_p = kin.p_tension(*p).values;
            let norms = kin.norms(&tau_p);
            let gamma = norms.iter().map(|&v| half * v * v).collect();
            let coupling = p_coupling(kin, *p, opts.variant, &tau_p);
            (StressKind::S2p, Recipe { coupling: Some(coupling), w_field: tau_p, t_scale: None, gamma, delta: zeros })
        }
        Functional::PQ { p, q } => {
            let two = T::lit(2.0);
            let tau_p = kin.p_tension(*p).values;
            let norms = kin.norms(&tau_p);
            let coupling = p_coupling(kin, *p, opts.variant, &tau_p);
            let factor: Vec<T> = if *q == two {
                vec![T::one(); len]
            } else {
                norms.iter().map(|&v| guarded_pow(v, *q - two, T::lit(DEGENERATE_EPS))).collect()
            };
            let r = match opts.form {
                StressForm::Derived => {
                    let gamma = if *q == two {
                        norms.iter().map(|&v| half * v * v).collect()
                    } else {
                        norms.iter().map(|&v| v.powf(*q) / *q).collect()
                    };
                    let mut sigma = tau_p;
                    if *q != two {
                        for node in 0..len {
                            sigma[node * n..(node + 1) * n].iter_mut().for_each(|x| *x *= factor[node]);
                        }
                    }
                    Recipe { coupling: Some(coupling), w_field: sigma, t_scale: None, gamma, delta: zeros }
                }
                StressForm::Printed => {
                    let gamma = norms.iter().zip(&factor).map(|(&v, &c)| c * half * v * v).collect();
                    Recipe { coupling: Some(coupling), w_field: tau_p, t_scale: (*q != two).then_some(factor), gamma, delta: zeros }
                }
            };
            (StressKind::S2pq, r)
        }
        Functional::L(lag) => {
            let fields = kin.lagrangian_fields(lag.as_ref());
            let delta = fields.dl.iter().map(|&v| -v).collect();
            (StressKind::EL, Recipe { coupling: None, w_field: vec![T::zero(); len * n], t_scale: None, gamma: fields.l, delta })
        }
        Functional::B { b, l } => {
            let (coupling, tau_l, lval) = l_coupling(kin, l.as_ref(), opts.form);
            let s = kin.s_field(&tau_l);
            let r = kin.energy_density();
            let grid = kin.geometry().grid();
            let mut x = vec![T::zero(); kin.source_dim()];
            let (mut bv, mut br, mut bs) = (vec![T::zero(); len], vec![T::zero(); len], vec![T::zero(); len]);
            for node in 0..len {
                grid.coords_into(node, &mut x);
                let y = kin.map().at(node);
                bv[node] = b.value(&x, y, r[node], s[node]);
                br[node] = b.d_r(&x, y, r[node], s[node]);
                bs[node] = b.d_s(&x, y, r[node], s[node]);
            }
            let kind = if b.name() == LagrangianB::<T>::name(&BPreset::Tension) { StressKind::S2L } else { StressKind::SBL };
            let r = match opts.form {
                StressForm::Derived => {
                    let mut psi = tau_l;
                    for node in 0..len {
                        psi[node * n..(node + 1) * n].iter_mut().for_each(|v| *v *= bs[node]);
                    }
                    let delta = br.iter().map(|&a| -a).collect();
                    Recipe { coupling: Some(coupling), w_field: psi, t_scale: None, gamma: bv, delta }
                }
                StressForm::Printed => {
                    let gamma = (0..len).map(|k| br[k] * lval[k] + bs[k] * s[k]).collect();
                    let delta = br.iter().zip(&coupling.w).map(|(&a, &c)| -a * c).collect();
                    Recipe { coupling: Some(coupling), w_field: tau_l, t_scale: Some(bs), gamma, delta }
                }
            };
            (kind, r)
        }
    })
}

fn build<T: Real>(kin: &Kinematics<'_, T>, r: &Recipe<T>) -> SymTensorField<T> {
    let geom = kin.geometry();
    let (m, n, mm) = (kin.source_dim(), kin.target_dim(), kin.source_dim() * kin.source_dim());
    let pull = kin.pullback_metric();
    let mut values = vec![T::zero(); kin.len() * mm];
    let nabla = r.coupling.as_ref().map(|_| kin.covariant(&r.w_field));
    for node in 0..kin.len() {
        let g = geom.g(node);
        let ph = pull.at(node);
        let out = &mut values[node * mm..(node + 1) * mm];
        for a in 0..mm {
            out[a] = r.gamma[node] * g[a] + r.delta[node] * ph[a];
        }
        let (Some(c), Some(nabla)) = (&r.coupling, &nabla) else { continue };
        let wv = &r.w_field[node * n..(node + 1) * n];
        let nab = |i: usize| &nabla[(node * m + i) * n..(node * m + i + 1) * n];
        if wv.iter().all(|&v| v == T::zero()) && (0..m).all(|i| nab(i).iter().all(|&v| v == T::zero())) {
            continue;
        }
        let gi = geom.ginv(node);
        // ⟨D_i, ∇_j W⟩
        let mut b = vec![T::zero(); mm];
        for i in 0..m {
            for j in 0..m {
                b[i * m + j] = kin.inner_n(node, kin.d_at(node, i), nab(j));
            }
        }
        let a_w: T = (0..mm).map(|ij| gi[ij] * b[ij]).sum();
        let mut ph_coef = c.k[node] * a_w;
        if let Some(gw) = &c.grad_w {
            ph_coef += c.grad_w_sign * kin.inner_n(node, &gw[node * n..(node + 1) * n], wv);
        }
        let g_coef = -(kin.inner_n(node, &c.tau_plus[node * n..(node + 1) * n], wv) + c.w[node] * a_w);
        let scale = r.t_scale.as_ref().map_or(T::one(), |s| s[node]);
        for i in 0..m {
            for j in 0..m {
                let t = c.w[node] * (b[i * m + j] + b[j * m + i]) + ph_coef * ph[i * m + j] + g_coef * g[i * m + j];
                out[i * m + j] += scale * t;
            }
        }
    }
    SymTensorField { dim: m, values }
}

/// The stress tensor of a functional: `S_{2,p}`, `S_{2,p,q}`, `S_{B,L}`
/// (`S_{2,L}` when `B = s`) or `L g − L' φ*h`.
pub fn assemble<T: Real>(kin: &Kinematics<'_, T>, f: &Functional<T>, opts: StressOptions) -> Result<StressTensor<T>> {
    let (kind, r) = recipe(kin, f, opts)?;
    let field = build(kin, &r);
    if !field.values.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite(format!("stress of {}", f.describe())));
    }
    Ok(StressTensor { kind, label: f.describe(), options: opts, field })
}

/// The trace from scalars only,
/// `m γ + δ|dφ|² + c(2L'A − m(⟨τ_L + grad^N L, W⟩ + L'A) + (K A ± ⟨grad^N L', W⟩)|dφ|²)`
/// with `A = ⟨dφ, ∇W⟩`. For `S_{2,p}` this is
/// `−m(½|τ_p|² + wA) + 2wA + (p−2)N^{p−4}A|dφ|²`.
pub fn trace_closed_form<T: Real>(kin: &Kinematics<'_, T>, f: &Functional<T>, opts: StressOptions) -> Result<Vec<T>> {
    let (_, r) = recipe(kin, f, opts)?;
    let m = T::from_usize_lossy(kin.source_dim());
    let n = kin.target_dim();
    let two = T::lit(2.0);
    let nd2 = kin.dphi_norm2();
    let a = r.coupling.as_ref().map(|_| kin.pair_with_dphi(&kin.covariant(&r.w_field)));
    Ok((0..kin.len())
        .map(|node| {
            let mut t = m * r.gamma[node] + r.delta[node] * nd2[node];
            if let (Some(c), Some(a)) = (&r.coupling, &a) {
                let wv = &r.w_field[node * n..(node + 1) * n];
                let aw = a[node];
                let mut ph = c.k[node] * aw;
                if let Some(gw) = &c.grad_w {
                    ph += c.grad_w_sign * kin.inner_n(node, &gw[node * n..(node + 1) * n], wv);
                }
                let tp = kin.inner_n(node, &c.tau_plus[node * n..(node + 1) * n], wv);
                let inner = two * c.w[node] * aw - m * (tp + c.w[node] * aw) + ph * nd2[node];
                t += r.t_scale.as_ref().map_or(T::one(), |s| s[node]) * inner;
            }
            t
        })
        .collect())
}

/// `R_j = (div S_{2,p})_j + ⟨τ_{2,p}, D_j⟩`, `[node][j]`.
#[derive(Debug, Clone)]
pub struct DivergenceResidual<T> {
    pub field: Vec<T>,
    pub sup: f64,
    pub l2: f64,
    /// `sup |⟨τ_{2,p}, dφ⟩|_g`, for scale.
    pub scale: f64,
}

pub fn divergence_identity_residual<T: Real>(kin: &Kinematics<'_, T>, p: T, variant: ExponentVariant) -> Result<DivergenceResidual<T>> {
    let geom = kin.geometry();
    let m = kin.source_dim();
    let s = assemble(kin, &Functional::P { p }, StressOptions { variant, form: StressForm::Derived })?;
    let div = geom.div_symtensor_interior(&s.field);
    let t2 = kin.bitension_p2(p)?;
    let mut field = div;
    let mut sq = vec![T::zero(); kin.len()];
    let (mut sup, mut scale) = (T::zero(), T::zero());
    for node in 0..kin.len() {
        let gi = geom.ginv(node);
        let pair: Vec<T> = (0..m).map(|j| kin.inner_n(node, t2.at(node), kin.d_at(node, j))).collect();
        for j in 0..m {
            field[node * m + j] += pair[j];
        }
        let rv = &field[node * m..(node + 1) * m];
        let norm2 = crate::geometry::linalg::bilinear(gi, rv, rv);
        sq[node] = norm2;
        sup = sup.max(norm2.max(T::zero()).sqrt());
        scale = scale.max(crate::geometry::linalg::bilinear(gi, &pair, &pair).max(T::zero()).sqrt());
    }
    let l2 = geom.integrate(&sq)?.max(T::zero()).sqrt();
    Ok(DivergenceResidual { field, sup: sup.as_f64(), l2: l2.as_f64(), scale: scale.as_f64() })
}

/// One refinement level of the variant discriminator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscriminatorRow {
    pub h: f64,
    pub differential_norm: f64,
    pub tension_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscriminatorReport {
    pub p: f64,
    pub rows: Vec<DiscriminatorRow>,
    /// Residual ratios between successive levels.
    pub ratios_differential_norm: Vec<f64>,
    pub ratios_tension_norm: Vec<f64>,
    /// Variants whose ratio between the two finest levels reaches `ladder`.
    pub converging: Vec<ExponentVariant>,
    pub ladder: f64,
}

/// Sup-norm divergence residual of both `S_{2,p}` variants over a
/// refinement sequence. `build(h)` supplies the geometry and map at spacing `h`.
pub fn discriminate_variants<T, F>(p: T, hs: &[T], ladder: f64, mut build: F) -> Result<DiscriminatorReport>
where
    T: Real,
    F: FnMut(T) -> Result<(SourceGeometry<T>, DiscreteMap<T>)>,
{
    let mut rows = Vec::with_capacity(hs.len());
    for &h in hs {
        let (geom, map) = build(h)?;
        let kin = Kinematics::new(&geom, &map)?;
        let a = divergence_identity_residual(&kin, p, ExponentVariant::DifferentialNorm)?;
        let b = divergence_identity_residual(&kin, p, ExponentVariant::TensionNorm)?;
        rows.push(DiscriminatorRow { h: h.as_f64(), differential_norm: a.sup, tension_norm: b.sup });
    }
    let ratios = |f: fn(&DiscriminatorRow) -> f64| -> Vec<f64> { rows.windows(2).map(|w| f(&w[0]) / f(&w[1])).collect() };
    let rd = ratios(|r| r.differential_norm);
    let rt = ratios(|r| r.tension_norm);
    let ok = |r: &[f64]| r.last().is_some_and(|&x| x >= ladder);
    let mut converging = Vec::new();
    if ok(&rd) {
        converging.push(ExponentVariant::DifferentialNorm);
    }
    if ok(&rt) {
        converging.push(ExponentVariant::TensionNorm);
    }
    Ok(DiscriminatorReport { p: p.as_f64(), rows, ratios_differential_norm: rd, ratios_tension_norm: rt, converging, ladder })
}

/// `½∫⟨S, δg⟩` against the energy module's metric derivative.
pub fn check_metric_variation<T: Real>(
    f: &Functional<T>,
    geom: &SourceGeometry<T>,
    map: &DiscreteMap<T>,
    delta: &SymTensorField<T>,
    opts: StressOptions,
) -> Result<crate::energy::Agreement> {
    let oracle = crate::energy::metric_variation_derivative(f, geom, map, delta)?;
    let kin = Kinematics::new(geom, map)?;
    let s = assemble(&kin, f, opts)?;
    Ok(crate::energy::Agreement::new(oracle, crate::energy::stress_pairing(geom, &s.field, delta)?.as_f64()))
}

/// `|S|_g` per node.
pub fn pointwise_norm<T: Real>(geom: &SourceGeometry<T>, s: &SymTensorField<T>) -> Vec<T> {
    (0..geom.len()).map(|k| contract2(geom.ginv(k), s.at(k), s.at(k), geom.dim()).max(T::zero()).sqrt()).collect()
}
