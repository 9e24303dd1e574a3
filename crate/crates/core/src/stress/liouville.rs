//! Integration-by-parts identity, the itemized Liouville ledger and the
//! cutoff decay probe on a gradient Ricci soliton.

use serde::{Deserialize, Serialize};

use super::{assemble, StressOptions};
use crate::energy::Functional;
use crate::error::{Error, Result};
use crate::geometry::linalg::{bilinear, contract2};
use crate::geometry::{SourceGeometry, SymTensorField};
use crate::mapfield::Kinematics;
use crate::scalar::{guarded_pow, Real, DEGENERATE_EPS};
use crate::soliton::{BallMetric, CutoffFunction, CutoffSample, PotentialSample, SolitonStructure};

/// The three integrals of `0 = ∫η²(div S)(∇f) + ∫η²⟨Hess f, S⟩ + ∫S(∇f, ∇η²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IbpDefect {
    pub div_term: f64,
    pub hess_term: f64,
    pub boundary_term: f64,
    pub defect: f64,
    pub scale: f64,
}

pub fn ibp_defect<T: Real>(geom: &SourceGeometry<T>, s: &SymTensorField<T>, pot: &PotentialSample<T>, cut: &CutoffSample<T>) -> Result<IbpDefect> {
    let m = geom.dim();
    if s.dim != m || s.nodes() != geom.len() {
        return Err(Error::Dimension { expected: geom.len(), got: s.nodes() });
    }
    let div = geom.div_symtensor_interior(s);
    let len = geom.len();
    let (mut f1, mut f2, mut f3) = (vec![T::zero(); len], vec![T::zero(); len], vec![T::zero(); len]);
    for node in 0..len {
        let b = &pot.grad[node * m..(node + 1) * m];
        let a = &cut.grad_eta2[node * m..(node + 1) * m];
        let e2 = cut.eta2[node];
        f1[node] = e2 * (0..m).map(|j| div[node * m + j] * b[j]).sum::<T>();
        f2[node] = e2 * contract2(geom.ginv(node), pot.hess.at(node), s.at(node), m);
        f3[node] = bilinear(s.at(node), b, a);
    }
    let (i1, i2, i3) = (geom.integrate(&f1)?.as_f64(), geom.integrate(&f2)?.as_f64(), geom.integrate(&f3)?.as_f64());
    Ok(IbpDefect { div_term: i1, hess_term: i2, boundary_term: i3, defect: i1 + i2 + i3, scale: i1.abs().max(i2.abs()).max(i3.abs()) })
}

/// `λ(m−4) − Scal` per node.
pub fn sign_condition_field<T: Real>(geom: &SourceGeometry<T>, soliton: &SolitonStructure<T>) -> Result<Vec<T>> {
    let scal = geom.scalar_curvature().ok_or_else(|| Error::InvalidParameter("geometry carries no curvature".into()))?;
    let c = soliton.lambda * (T::from_usize_lossy(geom.dim()) - T::lit(4.0));
    Ok(scal.iter().map(|&s| c - s).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerTerm {
    pub term_id: String,
    #[serde(rename = "paper_label")]
    pub label: String,
    pub value: f64,
    /// Bound the value is compared against, if any.
    pub bound: Option<f64>,
    #[serde(rename = "R")]
    pub radius: f64,
    pub h: f64,
}

/// Itemized integrals of the Liouville identity with the direct stress
/// integrals, their expansions, and the re-derived and printed balances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerReport {
    pub p: f64,
    pub lambda: f64,
    pub radius: f64,
    pub terms: Vec<LedgerTerm>,
    /// `I_div + λ∫η² tr S − ∫η²⟨Ric, S⟩ + ∫S(∇f, ∇η²)`.
    pub identity_residual: f64,
    /// The same with each stress integral replaced by its expansion.
    pub expanded_residual: f64,
    /// `∫η² w ⟨dφ(div Ric − ½∇Scal), τ_p⟩`.
    pub bianchi_defect: f64,
    pub derived_lhs: f64,
    pub derived_rhs: f64,
    pub derived_defect: f64,
    pub printed_lhs: f64,
    pub printed_rhs: f64,
    pub printed_discrepancy: f64,
    /// Printed balance with `2 I_div` added to its left side; equal to
    /// `printed_discrepancy` for biharmonic maps.
    pub printed_discrepancy_with_div: f64,
    /// Largest absolute itemized integral.
    pub scale: f64,
}

impl LedgerReport {
    pub fn value(&self, id: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.term_id == id).map(|t| t.value)
    }
}

// integrand slots
const G_TR: usize = 0;
const RC: usize = 1;
const SF: usize = 2;
const IDIV: usize = 3;
const TAU: usize = 4;
const JA: usize = 5;
const SCAL_TAU: usize = 6;
const SCAL_JA: usize = 7;
const RIC_NTH: usize = 8;
const J_RICA: usize = 9;
const K_RIC: usize = 10;
const U_TAU: usize = 11;
const LAPF_JA: usize = 12;
const LAPETA_JB: usize = 13;
const NTH_AB: usize = 14;
const K_AB: usize = 15;
const BIANCHI: usize = 16;
const PLAIN_A: usize = 17;
const PLAIN_LAPETA_B: usize = 18;
const PLAIN_SOL_A: usize = 19;
const PLAIN_AB_SECOND: usize = 20;
const W_AB_SECOND: usize = 21;
const PK_TRACE: usize = 22;
const PK_RIC: usize = 23;
const PK_TRACE_ETA: usize = 24;
const SLOTS: usize = 25;

/// Evaluates the Liouville identity for `S_{2,p}` on a soliton with the
/// cutoff `η`.
pub fn liouville_ledger<T: Real>(kin: &Kinematics<'_, T>, p: T, soliton: &SolitonStructure<T>, cutoff: &CutoffFunction<T>) -> Result<LedgerReport> {
    let geom = kin.geometry();
    let (m, n, mm) = (kin.source_dim(), kin.target_dim(), kin.source_dim() * kin.source_dim());
    let len = kin.len();
    let two = T::lit(2.0);
    let eps = T::lit(DEGENERATE_EPS);
    let scal = geom.scalar_curvature().ok_or_else(|| Error::InvalidParameter("geometry carries no curvature".into()))?;
    let ric_field = geom.ricci_field().ok_or_else(|| Error::InvalidParameter("geometry carries no curvature".into()))?;
    let cut = cutoff.sample(geom)?;
    let pot = soliton.sample_potential(geom);
    let lambda = soliton.lambda;

    let tau = kin.p_tension(p).values;
    let w = kin.p_weight(p);
    let dw = kin.d_p_weight(p);
    let second = kin.second_fundamental_form();
    let a_scalar = kin.pair_with_dphi(&kin.covariant(&tau));
    let tau_norm = kin.norms(&tau);
    let t2 = kin.bitension_p2(p)?;
    let s = assemble(kin, &Functional::P { p }, StressOptions::default())?;
    let pull = kin.pullback_metric();
    let nd2 = kin.dphi_norm2();
    let div_ric = geom.div_symtensor_interior(&ric_field);
    let d_scal = geom.grid().gradient_interior(scal, 1, geom.stencil());

    let mut f = vec![vec![T::zero(); len]; SLOTS];
    let mf = T::from_usize_lossy(m);
    for node in 0..len {
        let gi = geom.ginv(node);
        let raise = |cov: &[T]| -> Vec<T> { (0..m).map(|i| (0..m).map(|j| gi[i * m + j] * cov[j]).sum()).collect() };
        let tv = &tau[node * n..(node + 1) * n];
        let e2 = cut.eta2[node];
        let a = &cut.grad_eta2[node * m..(node + 1) * m];
        let b = &pot.grad[node * m..(node + 1) * m];
        let ric = ric_field.at(node);
        let sv = s.at(node);
        let dphi_tau = |y: &[T]| kin.inner_n(node, &kin.push(node, y), tv);
        let j = |y: &[T]| w[node] * dphi_tau(y);
        let sec = |i: usize, jj: usize| &second[((node * m + i) * m + jj) * n..((node * m + i) * m + jj + 1) * n];
        // ⟨∇_i θ_j, τ⟩ with θ = w dφ
        let nth = |i: usize, jj: usize| dw[node * m + i] * kin.inner_n(node, kin.d_at(node, jj), tv) + w[node] * kin.inner_n(node, sec(i, jj), tv);
        let sec_tau = |i: usize, jj: usize| kin.inner_n(node, sec(i, jj), tv);
        let t2n = tau_norm[node] * tau_norm[node];
        let u = bilinear(geom.g(node), a, b);
        let k = if p == two { T::zero() } else { (p - two) * guarded_pow(nd2[node].sqrt(), p - T::lit(4.0), eps) * a_scalar[node] };
        let kp = if p == two { T::zero() } else { (p - two) * guarded_pow(tau_norm[node], p - T::lit(4.0), eps) * a_scalar[node] };
        // Ric^i_j a^j
        let ric_a: Vec<T> = raise(&(0..m).map(|i| (0..m).map(|jj| ric[i * m + jj] * a[jj]).sum()).collect::<Vec<T>>());
        let ric_up: Vec<T> = {
            let mut r = vec![T::zero(); mm];
            for i in 0..m {
                for jj in 0..m {
                    r[i * m + jj] = (0..m).flat_map(|x| (0..m).map(move |y| (x, y))).map(|(x, y)| gi[i * m + x] * ric[x * m + y] * gi[y * m + jj]).sum();
                }
            }
            r
        };
        let pb: Vec<T> = kin.push(node, b);
        let pa: Vec<T> = kin.push(node, a);
        let ric_dd = contract2(gi, ric, pull.at(node), m);

        f[G_TR][node] = e2 * geom.trace(node, sv);
        f[RC][node] = e2 * contract2(gi, ric, sv, m);
        f[SF][node] = bilinear(sv, b, a);
        f[IDIV][node] = -e2 * kin.inner_n(node, t2.at(node), &pb);
        f[TAU][node] = e2 * t2n;
        f[JA][node] = j(a);
        f[SCAL_TAU][node] = e2 * scal[node] * t2n;
        f[SCAL_JA][node] = scal[node] * j(a);
        let mut rn = T::zero();
        let mut nab = T::zero();
        let mut ab2 = T::zero();
        for i in 0..m {
            for jj in 0..m {
                rn += ric_up[i * m + jj] * nth(i, jj);
                nab += a[i] * b[jj] * (nth(i, jj) + nth(jj, i));
                ab2 += a[i] * b[jj] * sec_tau(i, jj);
            }
        }
        f[RIC_NTH][node] = e2 * rn;
        f[J_RICA][node] = j(&ric_a);
        f[K_RIC][node] = e2 * k * ric_dd;
        f[U_TAU][node] = u * t2n;
        f[LAPF_JA][node] = pot.laplacian[node] * j(a);
        f[LAPETA_JB][node] = cut.lap_eta2[node] * j(b);
        f[NTH_AB][node] = nab;
        f[K_AB][node] = k * kin.inner_n(node, &pb, &pa);
        let bianchi: Vec<T> = (0..m).map(|jj| div_ric[node * m + jj] - T::lit(0.5) * d_scal[node * m + jj]).collect();
        f[BIANCHI][node] = e2 * j(&raise(&bianchi));
        f[PLAIN_A][node] = dphi_tau(a);
        f[PLAIN_LAPETA_B][node] = cut.lap_eta2[node] * dphi_tau(b);
        f[PLAIN_SOL_A][node] = (mf * lambda - scal[node]) * dphi_tau(a);
        f[PLAIN_AB_SECOND][node] = ab2;
        f[W_AB_SECOND][node] = w[node] * ab2;
        f[PK_TRACE][node] = kp * nd2[node];
        f[PK_RIC][node] = kp * ric_dd;
        f[PK_TRACE_ETA][node] = e2 * kp * nd2[node];
    }
    let mut v = [0.0f64; SLOTS];
    for (slot, field) in f.iter().enumerate() {
        v[slot] = geom.integrate(field)?.as_f64();
    }
    let (mm_, pf, lam) = (m as f64, p.as_f64(), lambda.as_f64());

    let a_g = (mm_ / 2.0 - pf) * v[TAU] + (mm_ - pf) * v[JA];
    let a_ric = 0.5 * v[SCAL_TAU] + v[SCAL_JA] - 2.0 * v[RIC_NTH] - 2.0 * v[J_RICA] + v[K_RIC];
    let a_s = 0.5 * v[U_TAU] - v[LAPF_JA] - v[LAPETA_JB] - v[NTH_AB] + v[K_AB];
    let identity = v[IDIV] + lam * v[G_TR] - v[RC] + v[SF];
    let expanded = lam * a_g - a_ric + a_s + v[IDIV];

    let derived_lhs = lam * (mm_ - 2.0 * pf) * v[TAU] - v[SCAL_TAU] + 4.0 * v[RIC_NTH] - 2.0 * v[K_RIC] + 2.0 * v[IDIV];
    let derived_rhs =
        -4.0 * v[J_RICA] + 2.0 * pf * lam * v[JA] - v[U_TAU] + 2.0 * v[LAPETA_JB] + 2.0 * v[NTH_AB] - 2.0 * v[K_AB];

    let printed_lhs = lam * (mm_ - 4.0) * v[TAU] - v[SCAL_TAU] + 4.0 * v[RIC_NTH] + 2.0 * v[PK_RIC] - lam * v[PK_TRACE_ETA];
    let printed_rhs = -4.0 * v[J_RICA] + 4.0 * lam * v[PLAIN_A] - v[U_TAU] + 2.0 * v[LAPETA_JB] + 4.0 * v[W_AB_SECOND];

    let trace_printed = (2.0 - mm_ / 2.0) * v[TAU] + (2.0 - mm_) * v[PLAIN_A] + v[PK_TRACE_ETA];
    let ricci_printed = -0.5 * v[SCAL_TAU] + 2.0 * v[RIC_NTH] + 2.0 * v[BIANCHI] - v[SCAL_JA] + 2.0 * v[J_RICA] + v[PK_RIC];
    let drift_printed = -0.5 * v[U_TAU] + v[PLAIN_LAPETA_B] + v[PLAIN_SOL_A] + 2.0 * v[PLAIN_AB_SECOND];

    let (radius, h) = (cutoff.radius.as_f64(), geom.grid().spacing()[0].as_f64());
    let t = |id: &str, label: &str, value: f64| LedgerTerm { term_id: id.into(), label: label.into(), value, bound: None, radius, h };
    let terms = vec![
        t("trace.direct", "∫η² tr S_{2,p}", v[G_TR]),
        t("trace.expanded", "(m/2−p)∫η²|τ_p|² + (m−p)∫w⟨dφ(∇η²),τ_p⟩", a_g),
        t("trace.printed", "(2−m/2)∫η²|τ_p|² + (2−m)∫⟨dφ(∇η²),τ_p⟩ + (p−2)∫η²|τ_p|^{p−4}⟨dφ,∇τ_p⟩|dφ|²", trace_printed),
        t("ricci.direct", "∫η²⟨Ric, S_{2,p}⟩", v[RC]),
        t("ricci.expanded", "½∫η²Scal|τ_p|² + ∫Scal J(∇η²) − 2∫η²Ric⟨∇θ,τ_p⟩ − 2∫J(Ric ∇η²) + ∫η²K⟨Ric,φ*h⟩", a_ric),
        t("ricci.printed", "−½∫η²Scal|τ_p|² + 2∫η²Ric⟨∇θ,τ_p⟩ + ... + (p−2)∫|τ_p|^{p−4}⟨dφ,∇τ_p⟩⟨dφe_i,dφe_j⟩Ric_ij", ricci_printed),
        t("drift.direct", "∫S_{2,p}(∇f,∇η²)", v[SF]),
        t("drift.expanded", "½∫u|τ_p|² − ∫Δf J(∇η²) − ∫Δη² J(∇f) − ∫⟨∇θ(∇η²,∇f)+∇θ(∇f,∇η²),τ_p⟩ + ∫K⟨dφ∇f,dφ∇η²⟩", a_s),
        t("drift.printed", "−½∫u|τ_p|² + ∫Δη²⟨dφ(∇f),τ_p⟩ + ∫(mλ−Scal)⟨dφ(∇η²),τ_p⟩ + 2∫∇_iη²∇_jf⟨∇dφ_ij,τ_p⟩", drift_printed),
        t("div", "−∫η²⟨τ_{2,p}, dφ(∇f)⟩", v[IDIV]),
        t("tau", "∫η²|τ_p|²", v[TAU]),
        t("j-grad-eta2", "∫w⟨dφ(∇η²),τ_p⟩", v[JA]),
        t("scal-tau", "∫η²Scal|τ_p|²", v[SCAL_TAU]),
        t("scal-j", "∫Scal w⟨dφ(∇η²),τ_p⟩", v[SCAL_JA]),
        t("ric-nabla-theta", "∫η²Ric^{ij}⟨∇_i(w dφ)_j,τ_p⟩", v[RIC_NTH]),
        t("j-ric-grad-eta2", "∫w⟨dφ(Ric ∇η²),τ_p⟩", v[J_RICA]),
        t("k-ric", "∫η²(p−2)|dφ|^{p−4}⟨dφ,∇τ_p⟩⟨Ric,φ*h⟩", v[K_RIC]),
        t("u-tau", "∫⟨∇η²,∇f⟩|τ_p|²", v[U_TAU]),
        t("lapf-j", "∫Δf w⟨dφ(∇η²),τ_p⟩", v[LAPF_JA]),
        t("lapeta-j", "∫Δη² w⟨dφ(∇f),τ_p⟩", v[LAPETA_JB]),
        t("nabla-theta-ab", "∫⟨∇θ(∇η²,∇f)+∇θ(∇f,∇η²),τ_p⟩", v[NTH_AB]),
        t("k-ab", "∫(p−2)|dφ|^{p−4}⟨dφ,∇τ_p⟩⟨dφ(∇f),dφ(∇η²)⟩", v[K_AB]),
        t("bianchi", "∫η²w⟨dφ(div Ric − ½∇Scal),τ_p⟩", v[BIANCHI]),
        t("printed.plain-j", "∫⟨dφ(∇η²),τ_p⟩", v[PLAIN_A]),
        t("printed.w-second-ab", "∫∇_iη²∇_jf w⟨∇dφ_ij,τ_p⟩", v[W_AB_SECOND]),
        t("printed.k-ric", "∫(p−2)|τ_p|^{p−4}⟨dφ,∇τ_p⟩⟨dφe_i,dφe_j⟩Ric_ij", v[PK_RIC]),
        t("printed.k-trace", "∫η²(p−2)|τ_p|^{p−4}⟨dφ,∇τ_p⟩|dφ|²", v[PK_TRACE_ETA]),
    ];
    let scale = v.iter().fold(0.0f64, |s, x| s.max(x.abs()));
    Ok(LedgerReport {
        p: pf,
        lambda: lam,
        radius: cutoff.radius.as_f64(),
        terms,
        identity_residual: identity,
        expanded_residual: expanded,
        bianchi_defect: v[BIANCHI],
        derived_lhs,
        derived_rhs,
        derived_defect: derived_lhs - derived_rhs,
        printed_lhs,
        printed_rhs,
        printed_discrepancy: printed_lhs - printed_rhs,
        printed_discrepancy_with_div: printed_lhs + 2.0 * v[IDIV] - printed_rhs,
        scale,
    })
}

/// Names of the five cutoff integrals, in report order.
pub const DECAY_TERMS: [&str; 5] = ["ricci-gradient", "gradient", "drift", "laplacian", "second-fundamental-form"];

const DECAY_LABELS: [&str; 5] = [
    "∫w|⟨dφ(Ric ∇η²),τ_p⟩|",
    "∫w|⟨dφ(∇η²),τ_p⟩|",
    "∫|⟨∇η²,∇f⟩||τ_p|²",
    "∫w|Δη²||⟨dφ(∇f),τ_p⟩|",
    "∫w|∇_iη²∇_jf⟨∇dφ_ij,τ_p⟩|",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub radius: f64,
    pub values: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub p: f64,
    pub rows: Vec<DecayRow>,
    /// Least-squares slope of `−log J` against `log R`; `None` when a rung vanishes.
    pub exponents: [Option<f64>; 5],
    /// Exponent each term is bounded by: `R⁻¹`, or `R⁻²` for the `Δη²` term.
    pub expected: [f64; 5],
    /// Exactly zero on every rung, or decaying with a positive exponent.
    pub decaying: [bool; 5],
    pub h: f64,
}

/// `∫w|⟨dφ(Ric ∇η²),τ_p⟩|`, `∫w|⟨dφ(∇η²),τ_p⟩|`, `∫|⟨∇η²,∇f⟩||τ_p|²`,
/// `∫w|Δη²||⟨dφ(∇f),τ_p⟩|`, `∫w|∇_iη²∇_jf⟨∇dφ_ij,τ_p⟩|` for cutoffs of
/// each radius.
pub fn decay_probe<T: Real>(
    kin: &Kinematics<'_, T>,
    p: T,
    soliton: &SolitonStructure<T>,
    center: &[T],
    radii: &[T],
    balls: BallMetric,
) -> Result<DecayReport> {
    let geom = kin.geometry();
    let (m, n) = (kin.source_dim(), kin.target_dim());
    let len = kin.len();
    let ric_field = geom.ricci_field().ok_or_else(|| Error::InvalidParameter("geometry carries no curvature".into()))?;
    let pot = soliton.sample_potential(geom);
    let tau = kin.p_tension(p).values;
    let w = kin.p_weight(p);
    let second = kin.second_fundamental_form();
    let tn = kin.norms(&tau);
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let cut = CutoffFunction::new(center.to_vec(), r, balls).sample(geom)?;
        let mut f = vec![vec![T::zero(); len]; 5];
        for node in 0..len {
            let a = &cut.grad_eta2[node * m..(node + 1) * m];
            if a.iter().all(|&x| x == T::zero()) && cut.lap_eta2[node] == T::zero() {
                continue;
            }
            let tv = &tau[node * n..(node + 1) * n];
            let gi = geom.ginv(node);
            let b = &pot.grad[node * m..(node + 1) * m];
            let ric = ric_field.at(node);
            let low: Vec<T> = (0..m).map(|i| (0..m).map(|j| ric[i * m + j] * a[j]).sum()).collect();
            let ric_a: Vec<T> = (0..m).map(|i| (0..m).map(|j| gi[i * m + j] * low[j]).sum()).collect();
            let dt = |y: &[T]| kin.inner_n(node, &kin.push(node, y), tv);
            let mut ab = T::zero();
            for i in 0..m {
                for j in 0..m {
                    ab += a[i] * b[j] * kin.inner_n(node, &second[((node * m + i) * m + j) * n..((node * m + i) * m + j + 1) * n], tv);
                }
            }
            f[0][node] = w[node] * dt(&ric_a).abs();
            f[1][node] = w[node] * dt(a).abs();
            f[2][node] = bilinear(geom.g(node), a, b).abs() * tn[node] * tn[node];
            f[3][node] = w[node] * cut.lap_eta2[node].abs() * dt(b).abs();
            f[4][node] = w[node] * ab.abs();
        }
        let mut values = [0.0; 5];
        for (k, field) in f.iter().enumerate() {
            values[k] = geom.integrate(field)?.as_f64();
        }
        rows.push(DecayRow { radius: r.as_f64(), values });
    }
    let mut exponents = [None; 5];
    let mut decaying = [false; 5];
    for k in 0..5 {
        let all_zero = rows.iter().all(|r| r.values[k] == 0.0);
        if rows.len() >= 2 && rows.iter().all(|r| r.values[k] > 0.0) {
            let xs: Vec<f64> = rows.iter().map(|r| r.radius.ln()).collect();
            let ys: Vec<f64> = rows.iter().map(|r| -r.values[k].ln()).collect();
            exponents[k] = Some(slope(&xs, &ys));
        }
        decaying[k] = all_zero || exponents[k].is_some_and(|e| e > 0.0);
    }
    Ok(DecayReport { p: p.as_f64(), rows, exponents, expected: [1.0, 1.0, 1.0, 2.0, 1.0], decaying, h: geom.grid().spacing()[0].as_f64() })
}

impl DecayReport {
    /// One record per term and radius; `bound` is the first rung scaled by
    /// `(R₀/R)^expected`.
    pub fn terms(&self) -> Vec<LedgerTerm> {
        let Some(first) = self.rows.first() else { return Vec::new() };
        let mut out = Vec::with_capacity(5 * self.rows.len());
        for row in &self.rows {
            for k in 0..5 {
                out.push(LedgerTerm {
                    term_id: DECAY_TERMS[k].into(),
                    label: DECAY_LABELS[k].into(),
                    value: row.values[k],
                    bound: Some(first.values[k] * (first.radius / row.radius).powf(self.expected[k])),
                    radius: row.radius,
                    h: self.h,
                });
            }
        }
        out
    }
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
