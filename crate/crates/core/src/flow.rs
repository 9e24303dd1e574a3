//! Gradient descent of `E_{p,q}` over discrete maps.
//!
//! The step direction is the bitension `τ_{2,p,q}` restricted to the nodes
//! at least `mask_margin` nodes from the boundary (every node on a torus),
//! so the map stays constant on the band [`Kinematics::new`] requires.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::energy::{richardson, Agreement, FdEstimate, Functional};
use crate::error::{Error, Result};
use crate::geometry::SourceGeometry;
use crate::mapfield::{DiscreteMap, Kinematics, MAP_MARGIN_REACHES};
use crate::scalar::Real;

/// Steps below this are a stagnation, not a failure.
pub const MIN_STEP: f64 = 1e-12;

pub const CHECKPOINT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StepPolicy {
    Fixed,
    /// Armijo backtracking: shrink by `beta` until
    /// `E(φ + αv) ≤ E(φ) − c α ∫|τ_{2,p,q}|²`.
    Backtracking { beta: f64, c: f64 },
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self::Backtracking { beta: 0.5, c: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionMode {
    /// `v = τ_{2,p,q}`.
    #[default]
    Tension,
    /// `v = −h⁻¹ ∂E/∂φ / w` from central differences of the discrete
    /// energy, one node and component at a time. Small grids only.
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub p: f64,
    pub q: f64,
    pub step: f64,
    pub policy: StepPolicy,
    pub direction: DirectionMode,
    pub max_iter: usize,
    /// Stop once `‖τ_p‖_∞` falls below this.
    pub tau_tol: f64,
    /// Stop once an accepted step lowers `E` by less than this (relative).
    pub energy_tol: f64,
    /// Nodes closer than this to the boundary never move; raised to the
    /// kinematic band if smaller.
    pub mask_margin: usize,
    pub seed: u64,
    /// Run even if the gradient check fails.
    pub force: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            p: 2.0,
            q: 2.0,
            step: 1e-2,
            policy: StepPolicy::default(),
            direction: DirectionMode::Tension,
            max_iter: 1000,
            tau_tol: 1e-3,
            energy_tol: 1e-14,
            mask_margin: 0,
            seed: 0,
            force: false,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(Error::InvalidParameter(s.into()));
        if !(self.p >= 2.0) || !(self.q >= 2.0) {
            return bad("flow needs p, q >= 2");
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return bad("step size must be positive");
        }
        if !(self.tau_tol > 0.0) || !(self.energy_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if let StepPolicy::Backtracking { beta, c } = self.policy {
            if !(beta > 0.0 && beta < 1.0) || !(c > 0.0 && c < 1.0) {
                return bad("backtracking needs 0 < beta < 1 and 0 < c < 1");
            }
        }
        Ok(())
    }

    /// sha256 of the canonical JSON encoding, with the run-control fields
    /// `max_iter` and `force` cleared so a resumed run may go further.
    pub fn hash(&self) -> String {
        let key = Self { max_iter: 0, force: false, ..self.clone() };
        let json = serde_json::to_string(&key).expect("config serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn functional<T: Real>(&self) -> Functional<T> {
        Functional::PQ { p: T::lit(self.p), q: T::lit(self.q) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub iter: usize,
    pub energy: f64,
    pub tau_p_inf: f64,
    pub tau2_inf: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// `φ₀` constant; nothing to do.
    Trivial,
    /// `‖τ_p‖_∞ ≤ tau_tol`.
    Converged,
    EnergyStalled,
    /// Backtracking shrank the step below [`MIN_STEP`].
    Stagnated,
    MaxIterations,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace {
    pub records: Vec<FlowRecord>,
}

impl FlowTrace {
    pub fn last(&self) -> Option<&FlowRecord> {
        self.records.last()
    }

    /// Accepted steps never raise the energy.
    pub fn is_monotone(&self) -> bool {
        self.records.windows(2).all(|w| w[1].energy <= w[0].energy)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iter,E,tau_inf,step")?;
        for r in &self.records {
            writeln!(w, "{},{:e},{:e},{:e}", r.iter, r.energy, r.tau_p_inf, r.step)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub config: FlowConfig,
    pub config_hash: String,
    pub h: f64,
    pub iterations: usize,
    pub stop: StopReason,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub final_tau_p_inf: f64,
    pub final_tau2_inf: f64,
    pub monotone: bool,
}

#[derive(Debug, Clone)]
pub struct FlowOutcome<T: Real> {
    pub map: DiscreteMap<T>,
    pub trace: FlowTrace,
    pub stop: StopReason,
}

impl<T: Real> FlowOutcome<T> {
    pub fn summary(&self, cfg: &FlowConfig, geom: &SourceGeometry<T>) -> FlowSummary {
        let first = self.trace.records.first().copied();
        let last = self.trace.last().copied();
        FlowSummary {
            config: cfg.clone(),
            config_hash: cfg.hash(),
            h: max_spacing(geom),
            iterations: last.map_or(0, |r| r.iter),
            stop: self.stop,
            initial_energy: first.map_or(0.0, |r| r.energy),
            final_energy: last.map_or(0.0, |r| r.energy),
            final_tau_p_inf: last.map_or(0.0, |r| r.tau_p_inf),
            final_tau2_inf: last.map_or(0.0, |r| r.tau2_inf),
            monotone: self.trace.is_monotone(),
        }
    }
}

/// Full state for resuming a flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema: u32,
    pub config_hash: String,
    pub shape: Vec<usize>,
    pub lo: Vec<f64>,
    pub spacing: Vec<f64>,
    pub values: Vec<f64>,
    pub step: f64,
    pub trace: FlowTrace,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&s).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    /// The map and state stored here, checked against `cfg` and the grid of `template`.
    pub fn restore<T: Real>(&self, cfg: &FlowConfig, template: &DiscreteMap<T>) -> Result<(DiscreteMap<T>, FlowTrace, f64)> {
        if self.schema != CHECKPOINT_SCHEMA {
            return Err(Error::Checkpoint(format!("schema {} (expected {CHECKPOINT_SCHEMA})", self.schema)));
        }
        if self.config_hash != cfg.hash() {
            return Err(Error::Checkpoint("config hash differs".into()));
        }
        let grid = template.grid();
        let same = grid.shape() == &self.shape[..]
            && grid.lo().iter().zip(&self.lo).all(|(a, b)| a.as_f64() == *b)
            && grid.spacing().iter().zip(&self.spacing).all(|(a, b)| a.as_f64() == *b);
        if !same {
            return Err(Error::Checkpoint("grid differs".into()));
        }
        let map = template.with_values(self.values.iter().map(|&v| T::lit(v)).collect())?;
        Ok((map, self.trace.clone(), self.step))
    }
}

/// Descent derivative `−∫|τ_{2,p,q}|²` against the finite-difference
/// oracle along `v = τ_{2,p,q}` (masked).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub agreement: Agreement,
    pub h: f64,
    pub rel_tol: f64,
    pub passed: bool,
}

pub fn gradient_check<T: Real>(geom: &SourceGeometry<T>, map: &DiscreteMap<T>, cfg: &FlowConfig) -> Result<GradientCheck> {
    cfg.validate()?;
    let f = cfg.functional::<T>();
    let mask = flow_mask(geom, cfg);
    let kin = Kinematics::new(geom, map)?;
    let v = masked(&f.euler_lagrange(&kin, Default::default())?.values, &mask, map.target_dim());
    let formula = -kin.l2_inner(&v, &v)?;
    let oracle = refined_derivative(&f, geom, map, &v)?;
    let agreement = Agreement::new(oracle, formula.as_f64());
    let h = max_spacing(geom);
    let rel_tol = 0.01;
    Ok(GradientCheck { agreement, h, rel_tol, passed: agreement.passes(rel_tol, h) })
}

/// Richardson derivative along `v`, starting from `t₀ = 10⁻⁴ max(1, |φ|_∞)/|v|_∞`
/// and shrinking the step by 4 while that lowers the error bar. Rough
/// directions such as `τ_{2,p,q}` leave the linear regime well before `t₀`
/// for `p, q > 2`.
pub fn refined_derivative<T: Real>(f: &Functional<T>, geom: &SourceGeometry<T>, map: &DiscreteMap<T>, v: &[T]) -> Result<FdEstimate> {
    let vmax = v.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    if vmax == T::zero() {
        return Ok(FdEstimate::zero());
    }
    let mut t = T::lit(1e-4) * map.max_abs().max(T::one()) / vmax;
    let mut best = richardson(|s| f.evaluate(geom, &map.perturbed(v, s)?), t)?;
    for _ in 0..6 {
        t *= T::lit(0.25);
        let next = richardson(|s| f.evaluate(geom, &map.perturbed(v, s)?), t)?;
        if next.error_bar >= best.error_bar {
            break;
        }
        best = next;
    }
    Ok(best)
}

/// `∂E/∂φ^α` at every masked node by central differences of the discrete energy.
pub fn fd_energy_gradient<T: Real>(f: &Functional<T>, geom: &SourceGeometry<T>, map: &DiscreteMap<T>, mask: &[bool]) -> Result<Vec<T>> {
    let n = map.target_dim();
    let eps = T::lit(1e-5) * map.max_abs().max(T::one());
    let mut values = map.values().to_vec();
    let mut out = vec![T::zero(); values.len()];
    for node in (0..geom.len()).filter(|&k| mask[k]) {
        for a in 0..n {
            let i = node * n + a;
            let x0 = values[i];
            values[i] = x0 + eps;
            let up = f.evaluate(geom, &map.with_values(values.clone())?)?;
            values[i] = x0 - eps;
            let down = f.evaluate(geom, &map.with_values(values.clone())?)?;
            values[i] = x0;
            out[i] = (up - down) / (eps + eps);
        }
    }
    Ok(out)
}

/// `−h⁻¹ (∂E/∂φ) / w`: the field `G` whose pairing `∫⟨G, v⟩` reproduces the
/// discrete directional derivative.
pub fn fd_direction<T: Real>(f: &Functional<T>, geom: &SourceGeometry<T>, map: &DiscreteMap<T>, mask: &[bool]) -> Result<Vec<T>> {
    let grad = fd_energy_gradient(f, geom, map, mask)?;
    let kin = Kinematics::unchecked(geom, map)?;
    let n = map.target_dim();
    let w = geom.weights();
    let mut out = vec![T::zero(); grad.len()];
    for node in (0..geom.len()).filter(|&k| mask[k] && w[k] > T::zero()) {
        let hi = kin.hinv(node);
        for a in 0..n {
            out[node * n + a] = -(0..n).map(|b| hi[a * n + b] * grad[node * n + b]).sum::<T>() / w[node];
        }
    }
    Ok(out)
}

/// Nodes allowed to move.
pub fn flow_mask<T: Real>(geom: &SourceGeometry<T>, cfg: &FlowConfig) -> Vec<bool> {
    let margin = cfg.mask_margin.max(MAP_MARGIN_REACHES * geom.stencil().reach());
    (0..geom.len()).map(|k| geom.grid().boundary_distance(k) >= margin).collect()
}

fn masked<T: Real>(v: &[T], mask: &[bool], n: usize) -> Vec<T> {
    v.iter().enumerate().map(|(i, &x)| if mask[i / n] { x } else { T::zero() }).collect()
}

fn max_spacing<T: Real>(geom: &SourceGeometry<T>) -> f64 {
    geom.grid().spacing().iter().fold(0.0, |a, h| a.max(h.as_f64()))
}

struct State<T: Real> {
    map: DiscreteMap<T>,
    energy: T,
    direction: Vec<T>,
    /// `∫⟨G, v⟩`, the negated directional derivative.
    slope: T,
    tau_p_inf: T,
    tau2_inf: T,
}

fn evaluate<T: Real>(geom: &SourceGeometry<T>, map: DiscreteMap<T>, cfg: &FlowConfig, mask: &[bool]) -> Result<State<T>> {
    let f = cfg.functional::<T>();
    let n = map.target_dim();
    let kin = Kinematics::new(geom, &map)?;
    let energy = geom.integrate(&f.density(&kin))?;
    let g = f.euler_lagrange(&kin, Default::default())?;
    let tau_p_inf = kin.sup_norm(&kin.p_tension(T::lit(cfg.p)).values);
    let tau2_inf = kin.sup_norm(&g.values);
    let direction = match cfg.direction {
        DirectionMode::Tension => masked(&g.values, mask, n),
        DirectionMode::FiniteDifference => fd_direction(&f, geom, &map, mask)?,
    };
    let slope = kin.l2_inner(&direction, &direction)?;
    drop(kin);
    Ok(State { map, energy, direction, slope, tau_p_inf, tau2_inf })
}

/// Runs the flow from `φ₀`. Refuses to start when the gradient check fails
/// unless `cfg.force` is set.
pub fn descend<T: Real>(geom: &SourceGeometry<T>, phi0: &DiscreteMap<T>, cfg: &FlowConfig) -> Result<FlowOutcome<T>> {
    run(geom, phi0.clone(), FlowTrace::default(), cfg.step, cfg, None)
}

/// Like [`descend`], writing a checkpoint to `path` every `every` iterations
/// and at the end.
pub fn descend_with_checkpoints<T: Real>(
    geom: &SourceGeometry<T>,
    phi0: &DiscreteMap<T>,
    cfg: &FlowConfig,
    path: &Path,
    every: usize,
) -> Result<FlowOutcome<T>> {
    run(geom, phi0.clone(), FlowTrace::default(), cfg.step, cfg, Some((path, every.max(1))))
}

/// Continues a flow from a checkpoint; `template` supplies grid and target.
pub fn resume<T: Real>(
    geom: &SourceGeometry<T>,
    template: &DiscreteMap<T>,
    cfg: &FlowConfig,
    checkpoint: &Checkpoint,
    save: Option<(&Path, usize)>,
) -> Result<FlowOutcome<T>> {
    let (map, trace, step) = checkpoint.restore(cfg, template)?;
    run(geom, map, trace, step, cfg, save)
}

fn run<T: Real>(
    geom: &SourceGeometry<T>,
    phi0: DiscreteMap<T>,
    mut trace: FlowTrace,
    mut alpha: f64,
    cfg: &FlowConfig,
    save: Option<(&Path, usize)>,
) -> Result<FlowOutcome<T>> {
    cfg.validate()?;
    if phi0.is_constant() {
        let f = cfg.functional::<T>();
        let energy = f.evaluate(geom, &phi0)?.as_f64();
        trace.records.push(FlowRecord { iter: 0, energy, tau_p_inf: 0.0, tau2_inf: 0.0, step: 0.0 });
        return Ok(FlowOutcome { map: phi0, trace, stop: StopReason::Trivial });
    }
    let resumed = !trace.records.is_empty();
    if !resumed && !cfg.force {
        let check = gradient_check(geom, &phi0, cfg)?;
        if !check.passed {
            return Err(Error::InvalidParameter(format!(
                "gradient check failed (rel err {:.3e}); set force to run anyway",
                check.agreement.rel_err
            )));
        }
    }
    let mask = flow_mask(geom, cfg);
    let mut state = evaluate(geom, phi0, cfg, &mask)?;
    let mut iter = trace.last().map_or(0, |r| r.iter);
    if !resumed {
        trace.records.push(record(0, &state, 0.0));
    }
    let save_state = |state: &State<T>, trace: &FlowTrace, alpha: f64| -> Result<()> {
        if let Some((path, _)) = save {
            checkpoint(cfg, state, trace, alpha).save(path)?;
        }
        Ok(())
    };

    let stop = loop {
        if state.tau_p_inf.as_f64() <= cfg.tau_tol {
            break StopReason::Converged;
        }
        if iter >= cfg.max_iter {
            break StopReason::MaxIterations;
        }
        let accepted = match cfg.policy {
            StepPolicy::Fixed => Some((evaluate(geom, state.map.perturbed(&state.direction, T::lit(alpha))?, cfg, &mask)?, alpha)),
            StepPolicy::Backtracking { beta, c } => {
                if !(state.slope > T::zero()) {
                    break StopReason::Stagnated;
                }
                let mut trial = (alpha * 2.0).min(cfg.step);
                let mut found = None;
                while trial >= MIN_STEP {
                    // Leaving the target chart counts as a rejected step.
                    if let Ok(map) = state.map.perturbed(&state.direction, T::lit(trial)) {
                        let next = evaluate(geom, map, cfg, &mask)?;
                        if next.energy <= state.energy - T::lit(c * trial) * state.slope {
                            found = Some((next, trial));
                            break;
                        }
                    }
                    trial *= beta;
                }
                found
            }
        };
        let Some((next, step)) = accepted else {
            break StopReason::Stagnated;
        };
        let decrement = (state.energy - next.energy).as_f64();
        let scale = state.energy.as_f64().abs().max(f64::MIN_POSITIVE);
        alpha = step;
        iter += 1;
        state = next;
        trace.records.push(record(iter, &state, step));
        if let Some((_, every)) = save {
            if iter.is_multiple_of(every) {
                save_state(&state, &trace, alpha)?;
            }
        }
        if decrement >= 0.0 && decrement <= cfg.energy_tol * scale {
            break StopReason::EnergyStalled;
        }
    };
    save_state(&state, &trace, alpha)?;
    Ok(FlowOutcome { map: state.map, trace, stop })
}

fn record<T: Real>(iter: usize, s: &State<T>, step: f64) -> FlowRecord {
    FlowRecord { iter, energy: s.energy.as_f64(), tau_p_inf: s.tau_p_inf.as_f64(), tau2_inf: s.tau2_inf.as_f64(), step }
}

fn checkpoint<T: Real>(cfg: &FlowConfig, s: &State<T>, trace: &FlowTrace, step: f64) -> Checkpoint {
    let grid = s.map.grid();
    Checkpoint {
        schema: CHECKPOINT_SCHEMA,
        config_hash: cfg.hash(),
        shape: grid.shape().to_vec(),
        lo: grid.lo().iter().map(|v| v.as_f64()).collect(),
        spacing: grid.spacing().iter().map(|v| v.as_f64()).collect(),
        values: s.map.values().iter().map(|v| v.as_f64()).collect(),
        step,
        trace: trace.clone(),
    }
}
