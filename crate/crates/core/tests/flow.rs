mod common;

use std::f64::consts::TAU;

use common::{cigar, flat, gaussian_random_map, random_map, Target, BOX, SUPPORT};
use mapcalc::flow::{
    descend, descend_with_checkpoints, fd_direction, fd_energy_gradient, flow_mask, gradient_check, resume, Checkpoint, DirectionMode,
    FlowConfig, StepPolicy, StopReason,
};
use mapcalc::geometry::{ManifoldPreset, SourceGeometry};
use mapcalc::mapfield::{DiscreteMap, Kinematics, MapPreset};
use mapcalc::{Grid, Stencil};

fn torus(nodes: usize) -> SourceGeometry<f64> {
    let chart = ManifoldPreset::Euclidean { dim: 2 }.chart(&[-1.0, -1.0], &[7.0, 7.0]).unwrap();
    let grid = Grid::periodic(&[0.0, 0.0], &[TAU, TAU], &[nodes, nodes]).unwrap();
    SourceGeometry::sample(&chart, grid, Stencil::Second).unwrap()
}

fn torus_bump(geom: &SourceGeometry<f64>) -> DiscreteMap<f64> {
    let preset = MapPreset::TorusBump { amplitude: 0.3, concentration: 1.0 };
    preset.build(geom.grid(), &Target::Flat.chart(), &Target::Flat.base(), 0).unwrap()
}

fn torus_config() -> FlowConfig {
    FlowConfig { p: 2.0, q: 2.0, step: 4e-3, max_iter: 5000, tau_tol: 1e-3, ..FlowConfig::default() }
}

#[test]
fn constant_map_takes_no_steps() {
    let g = flat(BOX, 1.0 / 16.0);
    let phi = DiscreteMap::constant(g.grid().clone(), Target::Sphere.chart(), &Target::Sphere.base()).unwrap();
    let out = descend(&g, &phi, &FlowConfig::default()).unwrap();
    assert_eq!(out.stop, StopReason::Trivial);
    assert_eq!(out.trace.records.len(), 1);
    assert_eq!(out.trace.records[0].energy, 0.0);
    let check = gradient_check(&g, &phi, &FlowConfig::default()).unwrap();
    assert_eq!(check.agreement.formula, 0.0);
    assert_eq!(check.agreement.oracle.value, 0.0);
}

#[test]
fn torus_biharmonic_flow_reaches_harmonic_map() {
    let g = torus(16);
    let phi = torus_bump(&g);
    let cfg = torus_config();
    let out = descend(&g, &phi, &cfg).unwrap();
    let last = *out.trace.last().unwrap();
    println!("torus: stop {:?} after {} iterations, E {:e} -> {:e}, tau {:e}", out.stop, last.iter, out.trace.records[0].energy, last.energy, last.tau_p_inf);
    assert!(out.trace.is_monotone());
    assert_eq!(out.stop, StopReason::Converged);
    assert!(last.tau_p_inf < 1e-3);
    assert!(last.iter <= 5000);
}

#[test]
fn gradient_check_on_seeded_maps() {
    // Fourth-order differences: with v = τ_{2,p,q} the second-order stencil
    // sits at a few percent for p, q > 2 until h ≈ 1/128.
    let a = 2.5;
    let chart = ManifoldPreset::Euclidean { dim: 2 }.default_chart(a).unwrap();
    let g = SourceGeometry::sample(&chart, Grid::with_spacing(&[-a, -a], &[a, a], 1.0 / 64.0).unwrap(), Stencil::Fourth).unwrap();
    for (p, q) in [(2.0, 2.0), (4.0, 3.0)] {
        for target in [Target::Flat, Target::Sphere] {
            let phi = gaussian_random_map(&g, target, 7, 1.0, 0.8);
            let cfg = FlowConfig { p, q, ..FlowConfig::default() };
            let check = gradient_check(&g, &phi, &cfg).unwrap();
            println!("p={p} q={q} {target:?}: rel err {:.3e}", check.agreement.rel_err);
            assert!(check.agreement.formula < 0.0);
            assert!(check.agreement.oracle.error_bar < 1e-6 * check.agreement.oracle.value.abs());
            assert!(check.passed && check.agreement.rel_err <= 0.01);
        }
    }
}

#[test]
fn descend_refuses_a_failed_gradient_check() {
    // Steep window edge, second-order stencil: about 25% off at h = 1/32.
    let g = flat(BOX, 1.0 / 32.0);
    let phi = random_map(&g, Target::Flat, 7, 0.4, SUPPORT);
    let cfg = FlowConfig { p: 4.0, q: 3.0, max_iter: 1, ..FlowConfig::default() };
    assert!(!gradient_check(&g, &phi, &cfg).unwrap().passed);
    assert!(descend(&g, &phi, &cfg).is_err());
    assert!(descend(&g, &phi, &FlowConfig { force: true, ..cfg }).is_ok());
}

fn cigar_bump(g: &SourceGeometry<f64>) -> DiscreteMap<f64> {
    MapPreset::GaussianBump { amplitude: 0.4, width: 1.0, support: 2.5 }
        .build(g.grid(), &Target::Flat.chart(), &Target::Flat.base(), 0)
        .unwrap()
}

#[test]
fn cigar_p4_flow_lowers_tension() {
    let g = cigar(4.0, 0.25);
    assert_eq!(g.grid().shape(), &[33, 33]);
    let phi = cigar_bump(&g);
    let cfg = FlowConfig { p: 4.0, q: 2.0, step: 1.0, max_iter: 300, mask_margin: 6, force: true, ..FlowConfig::default() };
    let check = gradient_check(&g, &phi, &cfg).unwrap();
    let out = descend(&g, &phi, &cfg).unwrap();
    let (first, last) = (out.trace.records[0], *out.trace.last().unwrap());
    println!(
        "cigar p=4: check rel err {:.3e}; stop {:?} after {} iterations; E {:e} -> {:e}; tau_4 {:e} -> {:e}",
        check.agreement.rel_err, out.stop, last.iter, first.energy, last.energy, first.tau_p_inf, last.tau_p_inf
    );
    assert!(out.trace.is_monotone());
    assert!(last.iter > 0);
    assert!(last.energy < first.energy);
    assert!(last.tau_p_inf < first.tau_p_inf);
}

#[test]
fn fd_gradient_reproduces_directional_derivative() {
    let g = torus(16);
    let phi = torus_bump(&g);
    let cfg = torus_config();
    let f = cfg.functional::<f64>();
    let mask = flow_mask(&g, &cfg);
    let grad = fd_energy_gradient(&f, &g, &phi, &mask).unwrap();
    let v = common::random_smooth_on(&g, 5);
    let along: f64 = grad.iter().zip(&v).map(|(a, b)| a * b).sum();
    let oracle = mapcalc::energy::map_variation_derivative(&f, &g, &phi, &v).unwrap();
    assert!((along - oracle.value).abs() <= 1e-6 * oracle.value.abs());
}

#[test]
fn fd_direction_matches_tension_direction() {
    let mut errs = Vec::new();
    for nodes in [16, 32] {
        let g = torus(nodes);
        let phi = torus_bump(&g);
        let cfg = torus_config();
        let f = cfg.functional::<f64>();
        let fd = fd_direction(&f, &g, &phi, &flow_mask(&g, &cfg)).unwrap();
        let kin = Kinematics::new(&g, &phi).unwrap();
        let tau2 = f.euler_lagrange(&kin, Default::default()).unwrap();
        let diff: f64 = fd.iter().zip(&tau2.values).fold(0.0, |a, (x, y)| a.max((x - y).abs()));
        errs.push(diff / tau2.max_abs());
    }
    println!("sup |fd - tau2| / sup |tau2|: {errs:?}");
    // Compact Laplacian squared against the composed one: second order.
    assert!(errs[1] < 0.1);
    assert!(errs[0] / errs[1] >= 3.5);
}

#[test]
fn fd_mode_descends() {
    let g = torus(16);
    let phi = torus_bump(&g);
    let cfg = FlowConfig { direction: DirectionMode::FiniteDifference, max_iter: 5, ..torus_config() };
    let out = descend(&g, &phi, &cfg).unwrap();
    assert_eq!(out.trace.last().unwrap().iter, 5);
    assert!(out.trace.is_monotone());
    assert!(out.trace.last().unwrap().energy < out.trace.records[0].energy);
}

#[test]
fn runs_are_deterministic_and_resumable() {
    let g = torus(16);
    let phi = torus_bump(&g);
    let full_cfg = FlowConfig { max_iter: 40, ..torus_config() };
    let full = descend(&g, &phi, &full_cfg).unwrap();
    let again = descend(&g, &phi, &full_cfg).unwrap();
    assert_eq!(full.trace, again.trace);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flow.json");
    let half_cfg = FlowConfig { max_iter: 20, ..full_cfg.clone() };
    let half = descend_with_checkpoints(&g, &phi, &half_cfg, &path, 7).unwrap();
    assert_eq!(half.stop, StopReason::MaxIterations);
    let cp = Checkpoint::load(&path).unwrap();
    assert_eq!(cp.config_hash, full_cfg.hash());
    assert_eq!(cp.trace.last().unwrap().iter, 20);
    let resumed = resume(&g, &phi, &full_cfg, &cp, None).unwrap();
    assert_eq!(resumed.trace, full.trace);
    assert_eq!(resumed.map.values(), full.map.values());

    let other = FlowConfig { step: 1e-3, ..full_cfg };
    assert!(resume(&g, &phi, &other, &cp, None).is_err());
}

#[test]
fn steps_leaving_the_target_chart_are_rejected() {
    let g = torus(16);
    let tight = ManifoldPreset::Euclidean { dim: 2 }.chart(&[-0.01, -0.01], &[0.31, 0.16]).unwrap();
    let phi = MapPreset::TorusBump { amplitude: 0.3, concentration: 1.0 }.build(g.grid(), &tight, &[0.0, 0.0], 0).unwrap();
    let cfg = FlowConfig { step: 1.0, max_iter: 10, force: true, ..torus_config() };
    let out = descend(&g, &phi, &cfg).unwrap();
    assert!(out.trace.is_monotone());
    assert!(out.trace.records.iter().skip(1).all(|r| r.step < 1.0));
    let fixed = FlowConfig { policy: StepPolicy::Fixed, ..cfg };
    assert!(descend(&g, &phi, &fixed).is_err());
}

#[test]
fn trace_csv_has_one_row_per_record() {
    let g = torus(16);
    let out = descend(&g, &torus_bump(&g), &FlowConfig { max_iter: 3, ..torus_config() }).unwrap();
    let mut buf = Vec::new();
    out.trace.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("iter,E,tau_inf,step"));
    assert_eq!(text.lines().count(), 1 + out.trace.records.len());
    let summary = out.summary(&FlowConfig { max_iter: 3, ..torus_config() }, &g);
    assert_eq!(summary.iterations, 3);
    assert!(summary.monotone);
}
