mod common;

use std::sync::Arc;

use common::*;
use mapcalc::energy::{check_map_variation, Agreement, Functional};
use mapcalc::mapfield::{BPreset, BitensionForm, LPreset};

const TOL: f64 = 0.01;
const LADDER: f64 = 3.5;

fn ladder(f: &Functional<f64>, target: Target) -> (Agreement, Agreement) {
    let run = |h: f64| {
        let g = flat(BOX, h);
        let map = random_map(&g, target, 7, 0.4, SUPPORT);
        let v = random_variation(&g, 11, 0.95 * SUPPORT);
        check_map_variation(f, &g, &map, &v, BitensionForm::Printed).unwrap()
    };
    (run(1.0 / 64.0), run(1.0 / 128.0))
}

fn assert_ladder(f: Functional<f64>, target: Target) {
    let (coarse, fine) = ladder(&f, target);
    let label = format!("{} on {target:?}", f.describe());
    assert!(coarse.passes(TOL, 1.0 / 64.0), "{label}: rel {:.3e} at h=1/64", coarse.rel_err);
    let ratio = coarse.abs_err / fine.abs_err;
    assert!(ratio >= LADDER, "{label}: ladder ratio {ratio:.2}");
}

fn pq(p: f64, q: f64) -> Functional<f64> {
    Functional::PQ { p, q }
}

fn lb(b: BPreset, l: LPreset) -> Functional<f64> {
    Functional::B { b: Arc::new(b), l: Arc::new(l) }
}

#[test]
fn bitension_22_flat_and_sphere() {
    assert_ladder(pq(2.0, 2.0), Target::Flat);
    assert_ladder(pq(2.0, 2.0), Target::Sphere);
}

#[test]
fn bitension_42_flat_and_sphere() {
    assert_ladder(pq(4.0, 2.0), Target::Flat);
    assert_ladder(pq(4.0, 2.0), Target::Sphere);
}

#[test]
fn bitension_43_flat_and_sphere() {
    assert_ladder(pq(4.0, 3.0), Target::Flat);
    assert_ladder(pq(4.0, 3.0), Target::Sphere);
}

#[test]
fn bitension_32_flat_and_sphere() {
    assert_ladder(pq(3.0, 2.0), Target::Flat);
    assert_ladder(pq(3.0, 2.0), Target::Sphere);
}

#[test]
fn lb_dirichlet_tension() {
    for t in [Target::Flat, Target::Sphere] {
        assert_ladder(lb(BPreset::Tension, LPreset::Dirichlet), t);
    }
}

#[test]
fn lb_p_energy_tension() {
    for t in [Target::Flat, Target::Sphere] {
        assert_ladder(lb(BPreset::Tension, LPreset::PEnergy { p: 4.0 }), t);
    }
}

#[test]
fn lb_dirichlet_f_plus_s() {
    for t in [Target::Flat, Target::Sphere] {
        assert_ladder(lb(BPreset::FPlusS, LPreset::Dirichlet), t);
    }
}

#[test]
fn p_functional_matches_pq_at_q2() {
    let g = flat(BOX, 1.0 / 32.0);
    let map = random_map(&g, Target::Sphere, 3, 0.4, SUPPORT);
    let a = Functional::P { p: 4.0 }.evaluate(&g, &map).unwrap();
    let b = pq(4.0, 2.0).evaluate(&g, &map).unwrap();
    assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
}

#[test]
fn e42_self_convergence() {
    let value = |h: f64| {
        let g = flat(BOX, h);
        let map = random_map(&g, Target::Sphere, 7, 0.4, SUPPORT);
        pq(4.0, 2.0).evaluate(&g, &map).unwrap()
    };
    let (c, f) = (value(1.0 / 64.0), value(1.0 / 128.0));
    assert!((c - f).abs() <= 0.02 * f.abs(), "E_42 {c} vs {f}");
}

mod metric {
    use super::*;
    use mapcalc::energy::{delta_tau_p_squared, fixed_measure_tau_p_derivative, metric_variation_derivative, stress_pairing};
    use mapcalc::geometry::SymTensorField;
    use mapcalc::mapfield::{random_symtensor, Kinematics, RandomFieldSpec};

    fn variation(g: &mapcalc::geometry::SourceGeometry<f64>, seed: u64) -> SymTensorField<f64> {
        let spec = RandomFieldSpec::new(vec![0.05, 0.1], 0.95 * SUPPORT).with_frequency(1.0).with_amplitude(0.5);
        random_symtensor(g.grid(), &spec, seed)
    }

    #[test]
    fn dirichlet_stress_energy() {
        for (geom, target) in [(flat(BOX, 1.0 / 64.0), Target::Sphere), (cigar(BOX, 1.0 / 64.0), Target::Flat)] {
            let map = random_map(&geom, target, 5, 0.4, SUPPORT);
            let delta = variation(&geom, 21);
            let f = Functional::L(Arc::new(LPreset::Dirichlet));
            let oracle = metric_variation_derivative(&f, &geom, &map, &delta).unwrap();
            let kin = Kinematics::new(&geom, &map).unwrap();
            let e = kin.energy_density();
            let pull = kin.pullback_metric();
            let g = geom.metric_field();
            let s = SymTensorField {
                dim: 2,
                values: (0..pull.values.len()).map(|k| e[k / 4] * g.values[k] - pull.values[k]).collect(),
            };
            let a = Agreement::new(oracle, stress_pairing(&geom, &s, &delta).unwrap());
            assert!(a.passes(TOL, 1.0 / 64.0), "{target:?}: rel {:.3e}", a.rel_err);
        }
    }

    #[test]
    fn tau_p_squared_variation() {
        let geom = cigar(BOX, 1.0 / 64.0);
        let map = random_map(&geom, Target::Sphere, 9, 0.4, SUPPORT);
        let delta = variation(&geom, 17);
        let kin = Kinematics::new(&geom, &map).unwrap();
        for p in [2.0, 4.0] {
            let oracle = fixed_measure_tau_p_derivative(&geom, &map, p, &delta).unwrap();
            let d = delta_tau_p_squared(&kin, p, &delta).unwrap();
            let formula: f64 = d.iter().zip(geom.weights()).map(|(a, w)| a * w).sum();
            let a = Agreement::new(oracle, formula);
            assert!(a.rel_err <= 0.02, "p={p}: rel {:.3e}", a.rel_err);
        }
    }
}
