//! One function per subcommand; each fills a report builder.

use std::path::{Path, PathBuf};

use mapcalc::energy::check_map_variation;
use mapcalc::flow::{self, Checkpoint, FlowConfig, StepPolicy, StopReason};
use mapcalc::geometry::{linalg::contract2, ManifoldPreset, SourceGeometry};
use mapcalc::mapfield::Kinematics;
use mapcalc::soliton::{cigar_grad_scal_norm, grad_scal_norm, shi_decay_probe, CutoffFunction, SolitonPreset};
use mapcalc::stress::{
    assemble, check_metric_variation, decay_probe, divergence_identity_residual, ibp_defect, liouville_ledger, pointwise_norm,
    trace_closed_form, ExponentVariant, StressForm, StressOptions, DECAY_TERMS,
};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::report::{num, Builder};
use crate::scenario::{self, spacing};

/// Flow-only options from the command line.
#[derive(Debug, Clone, Default)]
pub struct FlowRun {
    pub resume: Option<PathBuf>,
    pub force: bool,
    pub checkpoint_every: usize,
}

pub fn run(command: &str, cfg: &ExperimentConfig, flow_run: &FlowRun, out_dir: &Path) -> Result<Builder, CliError> {
    let mut b = Builder::new(command, 0.0, cfg.map.seed);
    match command {
        "curvature" => curvature(cfg, &mut b)?,
        "verify-soliton" => verify_soliton(cfg, &mut b)?,
        "hamilton" => hamilton(cfg, &mut b)?,
        "variation-check" => variation_check(cfg, &mut b)?,
        "stress-check" => stress_check(cfg, &mut b)?,
        "div-check" => div_check(cfg, &mut b)?,
        "trace-check" => trace_check(cfg, &mut b)?,
        "ibp-check" => ibp_check(cfg, &mut b)?,
        "liouville-ledger" => ledger(cfg, &mut b)?,
        "decay-probe" => decay(cfg, &mut b)?,
        "shi-probe" => shi(cfg, &mut b)?,
        "flow" => run_flow(cfg, flow_run, out_dir, &mut b)?,
        other => return Err(CliError::Config(format!("unknown command `{other}`"))),
    }
    Ok(b)
}

fn levels(cfg: &ExperimentConfig) -> Vec<u32> {
    if cfg.probe.refine {
        vec![0, 1]
    } else {
        vec![0]
    }
}

fn coords(geom: &SourceGeometry<f64>, node: usize) -> Vec<String> {
    let mut x = vec![0.0; geom.dim()];
    geom.grid().coords_into(node, &mut x);
    x.into_iter().map(num).collect()
}

fn sup(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, x| if x.is_nan() { f64::NAN } else { a.max(x.abs()) })
}

fn center_node(geom: &SourceGeometry<f64>) -> usize {
    let r2 = |k: usize| geom.grid().coords(k).iter().map(|v| v * v).sum::<f64>();
    (0..geom.len()).min_by(|&a, &b| r2(a).total_cmp(&r2(b))).unwrap_or(0)
}

fn curvature(cfg: &ExperimentConfig, b: &mut Builder) -> Result<(), CliError> {
    let geom = scenario::source(cfg, 0)?;
    let h = spacing(&geom);
    b.set_h(h);
    let (preset, _) = scenario::manifold(cfg)?;
    let scal = geom.scalar_curvature().ok_or_else(|| CliError::Config("geometry carries no curvature".into()))?;
    let expected = |x: &[f64]| -> Option<f64> {
        match preset {
            ManifoldPreset::Euclidean { .. } => Some(0.0),
            ManifoldPreset::Cigar => Some(4.0 / (1.0 + x.iter().map(|v| v * v).sum::<f64>())),
            ManifoldPreset::Sphere { radius } => Some(2.0 / (radius * radius)),
            ManifoldPreset::Hyperbolic { dim } => Some(-((dim * (dim - 1)) as f64)),
        }
    };
    b.columns(&["x", "y", "scal"]);
    let mut worst: f64 = 0.0;
    let mut size: f64 = 1.0;
    let mut x = vec![0.0; geom.dim()];
    for node in 0..geom.len() {
        geom.grid().coords_into(node, &mut x);
        if let Some(e) = expected(&x) {
            worst = if (scal[node] - e).is_nan() { f64::NAN } else { worst.max((scal[node] - e).abs()) };
            size = size.max(e.abs());
        }
        let mut row = coords(&geom, node);
        row.push(num(scal[node]));
        b.row(row);
    }
    b.data("preset", &cfg.geometry.preset);
    b.data("scal_min", scal.iter().cloned().fold(f64::INFINITY, f64::min));
    b.data("scal_max", scal.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    b.at_most("scalar-curvature-vs-closed-form", worst / size, cfg.tolerances.curvature, h);
    Ok(())
}

fn verify_soliton(cfg: &ExperimentConfig, b: &mut Builder) -> Result<(), CliError> {
    let sol = scenario::soliton(cfg)?;
    let geom = scenario::soliton_source(cfg, &sol, 0)?;
    let h = spacing(&geom);
    b.set_h(h);
    let t = &cfg.tolerances;
    let residual = sol.residual(&geom)?;
    b.at_most("soliton-residual-sup", sup(residual.iter().copied()), t.soliton_residual, h);
    let scal = geom.scalar_curvature().ok_or_else(|| CliError::Config("geometry carries no curvature".into()))?;
    let c = center_node(&geom);
    let want = match SolitonPreset::parse(&cfg.geometry.preset)? {
        SolitonPreset::Cigar => 4.0,
        _ => 0.0,
    };
    b.data("scal_center", scal[c]);
    b.at_most("scal-center-error", (scal[c] - want).abs(), t.scal_center, h);
    if geom.dim() == 2 {
        let ric = geom.ricci_field().ok_or_else(|| CliError::Config("geometry carries no curvature".into()))?;
        let worst = sup((0..geom.len()).map(|k| {
            let (r, g) = (ric.at(k), geom.g(k));
            let e: Vec<f64> = (0..4).map(|a| 2.0 * r[a] - scal[k] * g[a]).collect();
            contract2(geom.ginv(k), &e, &e, 2).max(0.0).sqrt()
        }));
        b.at_most("two-ric-minus-scal-g", worst, t.einstein, h);
    }
    b.data("lambda", sol.lambda);
    b.columns(&["x", "y", "residual"]);
    for (node, r) in residual.iter().enumerate() {
        let mut row = coords(&geom, node);
        row.push(num(*r));
        b.row(row);
    }
    Ok(())
}

fn hamilton(cfg: &ExperimentConfig, b: &mut Builder) -> Result<(), CliError> {
    let sol = scenario::soliton(cfg)?;
    let geom = scenario::soliton_source(cfg, &sol, 0)?;
    let h = spacing(&geom);
    b.set_h(h);
    let (field, defect) = sol.hamilton_identity(&geom)?;
    let c = center_node(&geom);
    b.data("constant", field[c]);
    b.at_most("hamilton-defect", defect, cfg.tolerances.hamilton, h);
    if SolitonPreset::parse(&cfg.geometry.preset)? == SolitonPreset::Cigar {
        b.at_most("hamilton-constant-minus-4", (field[c] - 4.0).abs(), cfg.tolerances.hamilton, h);
        let pot = sol.sample_potential(&geom);
        let scal = geom.scalar_curvature().unwrap_or(&[]);
        let grad2 = (0..geom.len()).map(|k| pot.grad[2 * k] * pot.df[2 * k] + pot.grad[2 * k + 1] * pot.df[2 * k + 1]);
        let max_grad2 = grad2.fold(0.0, f64::max);
        b.data("max_grad_f_squared", max_grad2);
        b.holds("steady-bounds", max_grad2 <= 4.0 && scal.iter().all(|&s| s > 0.0), h);
    }
    b.columns(&["x", "y", "field"]);
    for (node, v) in field.iter().enumerate() {
        let mut row = coords(&geom, node);
        row.push(num(*v));
        b.row(row);
    }
    Ok(())
}

fn variation_check(cfg: &ExperimentConfig, b: &mut Builder) -> Result<(), CliError> {
    let fs = scenario::functionals(cfg)?;
    b.columns(&["functional", "h", "oracle", "formula", "rel_err", "error_bar"]);
    let mut rows = Vec::new();
    for f in &fs {
        let mut errs = Vec::new();
        for level in levels(cfg) {
            let geom = scenario::source(cfg, level)?;
            let h = spacing(&geom);
            let map = scenario::map(cfg, &geom)?;
            let v = scenario::variation(cfg, &geom);
            let a = check_map_variation(f, &geom, &map, &v, cfg.params.bitension)?;
            b.row(vec![f.describe(), num(h), num(a.oracle.value), num(a.formula), num(a.rel_err), num(a.oracle.error_bar)]);
            errs.push((h, a));
        }
        let (h, a) = errs[0];
        b.set_h(h);
        b.at_most(format!("{}: rel_err", f.describe()), a.rel_err, cfg.tolerances.rel.max(10.0 * h * h), h);
        if let [(_, coarse), (hf, fine)] = errs[..] {
            b.at_least(format!("{}: ladder", f.describe()), coarse.abs_err / fine.abs_err, cfg.tolerances.ladder, hf);
        }
        rows.push(serde_json::json!({ "functional": f.describe(), "levels": errs.iter().map(|(h, a)| serde_json::json!({"h": h, "agreement": a})).collect::<Vec<_>>() }));
    }
    b.data("results", rows);
    Ok(())
}

fn stress_opts(cfg: &ExperimentConfig) -> StressOptions {
    StressOptions { variant: cfg.params.variant, form: cfg.params.stress_form }
}

fn stress_check(cfg: &ExperimentConfig, b: &mut Builder) -> Result<(), CliError> {
    let geom = scenario::source(cfg, 0)?;
    let h = spacing(&geom);
    b.set_h(h);
    let map = scenario::map(cfg, &geom)?;
    let delta = scenario::symtensor(cfg, &geom, 0);
    b.columns(&["functional", "h", "oracle", "formula", "rel_err"]);
    let mut rows = Vec::new();
    for f in scenario::functionals(cfg)? {
        let a = check_metric_variation(&f, &geom, &map, &delta, stress_opts(cfg))?;
        b.row(vec![f.describe(), num(h), num(a.oracle.value), num(a.formula), num(a.rel_err)]);
        b.at_most(format!("{}: rel_err", f.describe()), a.rel_err, cfg.tolerances.rel.max(10.0 * h * h), h);
        rows.push(serde_json::json!({ "functional": f.describe(), "agreement": a }));
    }
    b.data("results", rows);
    b.data("options", stress_opts(cfg));
    Ok(())
}

fn div_check(cfg: &ExperimentConfig, b: &mut Builder) -> Result<(), CliError> {
    let p = cfg.params.p;
    b.columns(&["h", "variant", "sup", "l2", "scale"]);
    let variants = [ExponentVariant::DifferentialNorm, ExponentVariant::TensionNorm];
    let mut sups: Vec<[f64; 2]> = Vec::new();
    let mut hs = Vec::new();
    for level in levels(cfg) {
        let geom = scenario::source(cfg, level)?;
        let h = spacing(&geom);
        let map = scenario::map(cfg, &geom)?;
        let kin = Kinematics::new(&geom, &map)?;
        let mut row = [0.0; 2];
        for (i, v) in variants.iter().enumerate() {
            let r = divergence_identity_residual(&kin, p, *v)?;
            b.row(vec![num(h), format!("{v:?}"), num(r.sup), num(r.l2), num(r.scale)]);
            row[i] = r.sup;
        }
        sups.push(row);
        hs.push(h);
    }
    b.set_h(hs[0]);
    let chosen = variants.iter().position(|v| *v == cfg.params.variant).unwrap_or(0);
    b.data("sup_residuals", &sups);
    b.data("h_levels", &hs);
    if sups.len() == 2 {
        let ratio = |i: usize| sups[0][i] / sups[1][i];
        let converging: Vec<ExponentVariant> = (0..2).filter(|&i| ratio(i) >= cfg.tolerances.ladder).map(|i| variants[i]).collect();
        b.data("converging_variants", &converging);
        b.at_least(format!("{:?}: ladder", variants[chosen]), ratio(chosen), cfg.tolerances.ladder, hs[1]);
    }
    Ok(())
}

fn trace_check(cfg: &ExperimentConfig, b: &mut Builder) -> Result<(), CliError> {
    let geom = scenario::source(cfg, 0)?;
    let h = spacing(&geom);
    b.set_h(h);
    let map = scenario::map(cfg, &geom)?;
    let kin = Kinematics::new(&geom, &map)?;
    b.columns(&["functional", "form", "gap", "scale"]);
    for f in scenario::functionals(cfg)? {
        for form in [StressForm::Derived, StressForm::Printed] {
            let opts = StressOptions { form, variant: cfg.params.variant };
            let s = assemble(&kin, &f, opts)?;
            let direct = s.trace(&geom);
            let closed = trace_closed_form(&kin, &f, opts)?;
            let scale = sup(direct.iter().copied()).max(sup(pointwise_norm(&geom, &s.field)));
            let gap = sup(direct.iter().zip(&closed).map(|(x, y)| x - y));
            b.row(vec![f.describe(), format!("{form:?}"), num(gap), num(scale)]);
            let rel = if scale == 0.0 { gap } else { gap / scale };
            b.at_most(format!("{} {form:?}: trace gap", f.describe()), rel, cfg.tolerances.trace, h);
        }
    }
    Ok(())
}

fn cutoff(cfg: &ExperimentConfig) -> CutoffFunction<f64> {
    CutoffFunction::new(cfg.probe.center.clone(), cfg.probe.radius, cfg.probe.balls)
}

fn ibp_check(cfg: &ExperimentConfig, b: &mut Builder) -> Result<(), CliError> {
    let sol = scenario::soliton(cfg)?;
    let cut = cutoff(cfg);
    b.columns(&["index", "h", "defect", "scale"]);
    let mut table: Vec<Vec<(f64, f64)>> = vec![Vec::new(); cfg.probe.count];
    let mut hs = Vec::new();
    for level in levels(cfg) {
        let geom = scenario::soliton_source(cfg, &sol, level)?;
        let h = spacing(&geom);
        hs.push(h);
        let pot = sol.sample_potential(&geom);
        let cs = cut.sample(&geom)?;
        for (i, slot) in table.iter_mut().enumerate() {
            let d = ibp_defect(&geom, &scenario::symtensor(cfg, &geom, i as u64), &pot, &cs)?;
            b.row(vec![i.to_string(), num(h), num(d.defect), num(d.scale)]);
            slot.push((d.defect, d.scale));
        }
    }
    let fine = hs.len() - 1;
    b.set_h(hs[0]);
    let worst = table.iter().map(|r| r[fine].0.abs() / r[fine].1.max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
    b.at_most("ibp-defect-over-scale", worst, cfg.tolerances.ibp, hs[fine]);
    if hs.len() == 2 {
        let ladder = table.iter().map(|r| r[0].0.abs() / r[1].0.abs()).fold(f64::INFINITY, f64::min);
        b.at_least("ibp-ladder-min", ladder, cfg.tolerances.ladder, hs[1]);
    }
    b.data("h_levels", &hs);
    b.data("defects", &table);
    Ok(())
}

fn ledger(cfg: &ExperimentConfig, b: &mut Builder) -> Result<(), CliError> {
    let sol = scenario::soliton(cfg)?;
    let cut = cutoff(cfg);
    b.columns(&["h", "term_id", "label", "value"]);
    let mut reports = Vec::new();
    let mut hs = Vec::new();
    for level in levels(cfg) {
        let geom = scenario::soliton_source(cfg, &sol, level)?;
        let h = spacing(&geom);
        let map = scenario::map(cfg, &geom)?;
        let kin = Kinematics::new(&geom, &map)?;
        let r = liouville_ledger(&kin, cfg.params.p, &sol, &cut)?;
        for t in &r.terms {
            b.row(vec![num(h), t.term_id.clone(), format!("\"{}\"", t.label.replace('"', "'")), num(t.value)]);
        }
        hs.push(h);
        reports.push(r);
    }
    b.set_h(hs[0]);
    let fine = reports.len() - 1;
    let parts: [(&str, fn(&mapcalc::stress::LedgerReport) -> f64); 3] =
        [("identity", |r| r.identity_residual), ("expanded", |r| r.expanded_residual), ("derived", |r| r.derived_defect)];
    for (name, f) in parts {
        let r = &reports[fine];
        b.at_most(format!("{name}: residual over scale"), f(r).abs() / r.scale.max(f64::MIN_POSITIVE), cfg.tolerances.ledger, hs[fine]);
        if reports.len() == 2 {
            b.at_least(format!("{name}: ladder"), f(&reports[0]).abs() / f(&reports[1]).abs(), cfg.tolerances.ladder, hs[1]);
        }
    }
    b.data("h_levels", &hs);
    b.data("terms", reports.iter().flat_map(|r| r.terms.clone()).collect::<Vec<_>>());
    b.data("ledgers", &reports);
    Ok(())
}

fn decay(cfg: &ExperimentConfig, b: &mut Builder) -> Result<(), CliError> {
    let sol = scenario::soliton(cfg)?;
    let geom = scenario::soliton_source(cfg, &sol, 0)?;
    let h = spacing(&geom);
    b.set_h(h);
    let map = scenario::map(cfg, &geom)?;
    let kin = Kinematics::new(&geom, &map)?;
    let r = decay_probe(&kin, cfg.params.p, &sol, &cfg.probe.center, &cfg.probe.radii, cfg.probe.balls)?;
    let mut cols = vec!["radius"];
    cols.extend(DECAY_TERMS);
    b.columns(&cols);
    for row in &r.rows {
        let mut cells = vec![num(row.radius)];
        cells.extend(row.values.iter().map(|&v| num(v)));
        b.row(cells);
    }
    for k in 0..DECAY_TERMS.len() {
        match r.exponents[k] {
            Some(e) => b.at_least(format!("{}: exponent", DECAY_TERMS[k]), e, r.expected[k], h),
            None => b.holds(format!("{}: vanishes", DECAY_TERMS[k]), r.decaying[k], h),
        }
    }
    b.data("terms", r.terms());
    b.data("probe", &r);
    Ok(())
}

fn shi(cfg: &ExperimentConfig, b: &mut Builder) -> Result<(), CliError> {
    let sol = scenario::soliton(cfg)?;
    let geom = scenario::soliton_source(cfg, &sol, 0)?;
    let h = spacing(&geom);
    b.set_h(h);
    let r = shi_decay_probe(&sol, &geom, &cfg.probe.center, &cfg.probe.radii, cfg.probe.balls)?;
    b.columns(&["radius", "sup_ball", "product_ball", "sup_annulus", "product_annulus"]);
    for row in &r.rows {
        b.row(vec![num(row.radius), num(row.sup_ball), num(row.product_ball), num(row.sup_annulus), num(row.product_annulus)]);
    }
    b.holds("annulus-product-bounded", !r.annulus_product_grows, h);
    if SolitonPreset::parse(&cfg.geometry.preset)? == SolitonPreset::Cigar {
        let norms = grad_scal_norm(&sol.chart, &geom)?;
        let mut x = vec![0.0; 2];
        let worst = sup((0..geom.len()).map(|k| {
            geom.grid().coords_into(k, &mut x);
            norms[k] - cigar_grad_scal_norm(x[0].hypot(x[1]))
        }));
        b.at_most("grad-scal-vs-radial-formula", worst, cfg.tolerances.shi_radial, h);
    }
    b.data("probe", &r);
    Ok(())
}

fn run_flow(cfg: &ExperimentConfig, opts: &FlowRun, out_dir: &Path, b: &mut Builder) -> Result<(), CliError> {
    let geom = scenario::source(cfg, 0)?;
    let h = spacing(&geom);
    b.set_h(h);
    let phi0 = scenario::map(cfg, &geom)?;
    let fcfg = FlowConfig { force: cfg.flow.force || opts.force, ..cfg.flow.clone() };
    let resumed = opts.resume.as_ref().map(|p| Checkpoint::load(p)).transpose()?;
    if resumed.is_none() && !phi0.is_constant() {
        let check = flow::gradient_check(&geom, &phi0, &fcfg)?;
        b.data("gradient_check", check);
        if !fcfg.force {
            b.at_most("gradient-check rel_err", check.agreement.rel_err, check.rel_tol.max(10.0 * h * h), h);
            if !check.passed {
                return Ok(());
            }
        }
    }
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("flow-checkpoint.json");
    let every = opts.checkpoint_every.max(1);
    let run_cfg = FlowConfig { force: true, ..fcfg.clone() };
    let out = match &resumed {
        Some(cp) => flow::resume(&geom, &phi0, &run_cfg, cp, Some((&path, every)))?,
        None => flow::descend_with_checkpoints(&geom, &phi0, &run_cfg, &path, every)?,
    };
    if matches!(fcfg.policy, StepPolicy::Backtracking { .. }) {
        b.holds("energy-monotone", out.trace.is_monotone(), h);
    }
    if out.stop == StopReason::Converged {
        let tau = out.trace.last().map_or(0.0, |r| r.tau_p_inf);
        b.at_most("tau-at-convergence", tau, fcfg.tau_tol, h);
    }
    b.data("summary", out.summary(&fcfg, &geom));
    b.data("checkpoint", "flow-checkpoint.json");
    b.columns(&["iter", "E", "tau_inf", "step"]);
    for r in &out.trace.records {
        b.row(vec![r.iter.to_string(), num(r.energy), num(r.tau_p_inf), num(r.step)]);
    }
    Ok(())
}
