mod common;

use std::sync::Arc;

use common::*;
use mapcalc::energy::Functional;
use mapcalc::geometry::{SourceGeometry, SymTensorField};
use mapcalc::mapfield::{random_symtensor, BPreset, DiscreteMap, Kinematics, LPreset, MapPreset, RandomFieldSpec};
use mapcalc::soliton::{BallMetric, CutoffFunction, SolitonStructure};
use mapcalc::stress::*;

const TOL: f64 = 0.01;

fn functionals() -> Vec<Functional<f64>> {
    vec![
        Functional::P { p: 2.0 },
        Functional::P { p: 4.0 },
        Functional::PQ { p: 4.0, q: 3.0 },
        Functional::B { b: Arc::new(BPreset::Tension), l: Arc::new(LPreset::Dirichlet) },
        Functional::B { b: Arc::new(BPreset::Tension), l: Arc::new(LPreset::PEnergy { p: 4.0 }) },
        Functional::B { b: Arc::new(BPreset::FPlusS), l: Arc::new(LPreset::Dirichlet) },
        Functional::L(Arc::new(LPreset::Weighted { k: 0.5 })),
    ]
}

fn metric_variation(g: &SourceGeometry<f64>) -> SymTensorField<f64> {
    let spec = RandomFieldSpec::new(vec![0.05, 0.1], 0.95 * SUPPORT).with_frequency(1.0).with_amplitude(0.5);
    random_symtensor(g.grid(), &spec, 21)
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

#[test]
fn constant_map_gives_zero_stress() {
    let g = cigar(1.0, 1.0 / 16.0);
    let t = Target::Sphere;
    let map = DiscreteMap::constant(g.grid().clone(), t.chart(), &t.base()).unwrap();
    let kin = Kinematics::new(&g, &map).unwrap();
    for f in functionals().into_iter().filter(|f| !matches!(f, Functional::L(_) | Functional::B { .. })) {
        let s = assemble(&kin, &f, StressOptions::default()).unwrap();
        assert_eq!(s.field.max_abs(), 0.0, "{}", f.describe());
    }
}

#[test]
fn assembled_tensors_are_symmetric() {
    let g = cigar(BOX, 1.0 / 32.0);
    let map = random_map(&g, Target::Sphere, 2, 0.4, SUPPORT);
    let kin = Kinematics::new(&g, &map).unwrap();
    for f in functionals() {
        for form in [StressForm::Derived, StressForm::Printed] {
            let s = assemble(&kin, &f, StressOptions { form, ..Default::default() }).unwrap();
            assert_eq!(s.field.symmetry_defect(), 0.0, "{}", f.describe());
        }
    }
}

#[test]
fn specialisation_chain() {
    let g = cigar(BOX, 1.0 / 32.0);
    let map = random_map(&g, Target::Sphere, 3, 0.4, SUPPORT);
    let kin = Kinematics::new(&g, &map).unwrap();
    let close = |a: &SymTensorField<f64>, b: &SymTensorField<f64>| {
        let d: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
        sup(&d) <= 1e-13 * a.max_abs().max(1.0)
    };
    for variant in [ExponentVariant::DifferentialNorm, ExponentVariant::TensionNorm] {
        for form in [StressForm::Derived, StressForm::Printed] {
            let opts = StressOptions { variant, form };
            for p in [2.0, 3.0, 4.0] {
                let a = assemble(&kin, &Functional::PQ { p, q: 2.0 }, opts).unwrap();
                let b = assemble(&kin, &Functional::P { p }, opts).unwrap();
                assert!(close(&a.field, &b.field), "q=2 at p={p}");
            }
        }
    }
    let s2l = assemble(&kin, &Functional::B { b: Arc::new(BPreset::Tension), l: Arc::new(LPreset::Dirichlet) }, StressOptions::default()).unwrap();
    assert_eq!(s2l.kind, StressKind::S2L);
    let s22 = assemble(&kin, &Functional::P { p: 2.0 }, StressOptions::default()).unwrap();
    assert!(close(&s2l.field, &s22.field));
}

#[test]
fn biharmonic_stress_by_hand() {
    let g = cigar(BOX, 1.0 / 32.0);
    let map = random_map(&g, Target::Sphere, 4, 0.4, SUPPORT);
    let kin = Kinematics::new(&g, &map).unwrap();
    let s = assemble(&kin, &Functional::P { p: 2.0 }, StressOptions::default()).unwrap();
    let tau = kin.tension_values().to_vec();
    let nabla = kin.covariant(&tau);
    for node in 0..kin.len() {
        let gm = g.g(node);
        let gi = g.ginv(node);
        let t = &tau[node * 2..node * 2 + 2];
        let nt = |i: usize| &nabla[(node * 2 + i) * 2..(node * 2 + i + 1) * 2];
        let mut dn = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                dn += gi[i * 2 + j] * kin.inner_n(node, kin.d_at(node, i), nt(j));
            }
        }
        let c = 0.5 * kin.inner_n(node, t, t) + dn;
        for i in 0..2 {
            for j in 0..2 {
                let want = -c * gm[i * 2 + j] + kin.inner_n(node, kin.d_at(node, i), nt(j)) + kin.inner_n(node, kin.d_at(node, j), nt(i));
                let got = s.at(node)[i * 2 + j];
                assert!((want - got).abs() <= 1e-12 * (1.0 + want.abs()), "node {node}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn trace_matches_closed_form() {
    let g = cigar(BOX, 1.0 / 32.0);
    let map = random_map(&g, Target::Sphere, 5, 0.4, SUPPORT);
    let kin = Kinematics::new(&g, &map).unwrap();
    for f in functionals() {
        for form in [StressForm::Derived, StressForm::Printed] {
            let opts = StressOptions { form, ..Default::default() };
            let s = assemble(&kin, &f, opts).unwrap();
            let direct = s.trace(&g);
            let closed = trace_closed_form(&kin, &f, opts).unwrap();
            let scale = sup(&direct).max(sup(&pointwise_norm(&g, &s.field)));
            let gap = direct.iter().zip(&closed).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            assert!(gap <= 1e-12 * scale, "{}: {gap:e} vs {scale:e}", f.describe());
        }
    }
}

#[test]
fn trace_of_biharmonic_stress_in_two_dimensions() {
    let g = flat(BOX, 1.0 / 32.0);
    let map = random_map(&g, Target::Sphere, 6, 0.4, SUPPORT);
    let kin = Kinematics::new(&g, &map).unwrap();
    let s = assemble(&kin, &Functional::P { p: 2.0 }, StressOptions::default()).unwrap();
    let tr = s.trace(&g);
    let tau = kin.norms(kin.tension_values());
    for node in 0..kin.len() {
        assert!((tr[node] + tau[node] * tau[node]).abs() <= 1e-12 * (1.0 + tau[node] * tau[node]));
    }
}

#[test]
fn metric_variation_matches_stress() {
    for geom in [flat(BOX, 1.0 / 64.0), cigar(BOX, 1.0 / 64.0)] {
        let map = random_map(&geom, Target::Sphere, 7, 0.4, SUPPORT);
        let delta = metric_variation(&geom);
        for f in functionals() {
            let a = check_metric_variation(&f, &geom, &map, &delta, StressOptions::default()).unwrap();
            assert!(a.passes(TOL, 1.0 / 64.0), "{}: rel {:.3e}", f.describe(), a.rel_err);
        }
    }
}

#[test]
fn divergence_identity_converges() {
    for (p, t) in [(2.0, Target::Flat), (4.0, Target::Sphere)] {
        let res: Vec<f64> = [1.0 / 64.0, 1.0 / 128.0]
            .iter()
            .map(|&h| {
                let g = flat(BOX, h);
                let map = random_map(&g, t, 7, 0.4, SUPPORT);
                let kin = Kinematics::new(&g, &map).unwrap();
                divergence_identity_residual(&kin, p, ExponentVariant::DifferentialNorm).unwrap().sup
            })
            .collect();
        assert!(res[0] / res[1] >= 3.5, "p={p}: {res:?}");
    }
}

#[test]
fn discriminator_prefers_differential_norm() {
    let rep = discriminate_variants(3.0, &[1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0], 3.5, |h| {
        let g = flat(BOX, h);
        let map = random_map(&g, Target::Sphere, 7, 0.4, SUPPORT);
        Ok((g, map))
    })
    .unwrap();
    assert_eq!(rep.converging, vec![ExponentVariant::DifferentialNorm], "{rep:?}");
}

#[test]
fn ibp_defect_converges_for_random_tensors() {
    let sol = SolitonStructure::<f64>::cigar(4.0).unwrap();
    let cut = CutoffFunction::new(vec![0.0, 0.0], 1.5, BallMetric::Chart);
    let levels: Vec<_> = [161usize, 321]
        .iter()
        .map(|&n| {
            let g = sol.sample_geometry(n).unwrap();
            let pot = sol.sample_potential(&g);
            let cs = cut.sample(&g).unwrap();
            (g, pot, cs)
        })
        .collect();
    let spec = RandomFieldSpec::new(vec![0.3, -0.2], 3.2).with_frequency(1.5);
    for seed in 0..20 {
        let d: Vec<IbpDefect> = levels
            .iter()
            .map(|(g, pot, cs)| ibp_defect(g, &random_symtensor(g.grid(), &spec, 100 + seed), pot, cs).unwrap())
            .collect();
        assert!(d[1].defect.abs() <= 1e-3 * d[1].scale, "seed {seed}: {:?}", d[1]);
        assert!(d[0].defect.abs() / d[1].defect.abs() >= 3.5, "seed {seed}: {d:?}");
    }
}

#[test]
fn ibp_defect_trivial_tensors() {
    let sol = SolitonStructure::<f64>::cigar(4.0).unwrap();
    let g = sol.sample_geometry(161).unwrap();
    let pot = sol.sample_potential(&g);
    let cs = CutoffFunction::new(vec![0.0, 0.0], 1.5, BallMetric::Chart).sample(&g).unwrap();
    let zero = ibp_defect(&g, &SymTensorField::zeros(2, g.len()), &pot, &cs).unwrap();
    assert_eq!(zero.defect, 0.0);
    let metric = ibp_defect(&g, &g.metric_field(), &pot, &cs).unwrap();
    assert!(metric.defect.abs() <= 1e-3 * metric.scale, "{metric:?}");
}

#[test]
fn ledger_of_constant_map_vanishes() {
    let sol = SolitonStructure::<f64>::cigar(4.0).unwrap();
    let g = sol.sample_geometry(81).unwrap();
    let t = Target::Sphere;
    let map = DiscreteMap::constant(g.grid().clone(), t.chart(), &t.base()).unwrap();
    let kin = Kinematics::new(&g, &map).unwrap();
    let r = liouville_ledger(&kin, 2.0, &sol, &CutoffFunction::new(vec![0.0, 0.0], 1.5, BallMetric::Chart)).unwrap();
    assert!(r.terms.iter().all(|t| t.value == 0.0));
}

#[test]
fn rederived_ledger_balances() {
    let sol = SolitonStructure::<f64>::cigar(4.0).unwrap();
    let cut = CutoffFunction::new(vec![0.0, 0.0], 1.5, BallMetric::Chart);
    for p in [2.0, 4.0] {
        let r: Vec<LedgerReport> = [161usize, 321]
            .iter()
            .map(|&n| {
                let g = sol.sample_geometry(n).unwrap();
                let map = random_map(&g, Target::Sphere, 7, 0.4, 3.0);
                let kin = Kinematics::new(&g, &map).unwrap();
                liouville_ledger(&kin, p, &sol, &cut).unwrap()
            })
            .collect();
        for (name, f) in [
            ("identity", (|r: &LedgerReport| r.identity_residual) as fn(&LedgerReport) -> f64),
            ("expanded", |r| r.expanded_residual),
            ("derived", |r| r.derived_defect),
        ] {
            let (c, fine) = (f(&r[0]).abs(), f(&r[1]).abs());
            assert!(fine <= 1e-2 * r[1].scale, "p={p} {name}: {fine:e}");
            assert!(c / fine >= 3.5, "p={p} {name}: ladder {}", c / fine);
        }
    }
}

#[test]
fn cigar_violates_sign_condition() {
    let sol = SolitonStructure::<f64>::cigar(4.0).unwrap();
    let g = sol.sample_geometry(41).unwrap();
    let field = sign_condition_field(&g, &sol).unwrap();
    for (node, v) in field.iter().enumerate() {
        let x = g.grid().coords(node);
        let want = -4.0 / (1.0 + x[0] * x[0] + x[1] * x[1]);
        assert!((v - want).abs() <= 1e-6, "{v} vs {want}");
        assert!(*v < 0.0);
    }
}

#[test]
fn decay_probe_on_cigar() {
    let sol = SolitonStructure::<f64>::cigar(10.0).unwrap();
    let g = sol.sample_geometry(201).unwrap();
    let t = Target::Sphere;
    let radii = [1.0, 2.0, 4.0];
    let compact = MapPreset::GaussianBump { amplitude: 0.4, width: 1.0, support: 0.5 }.build(g.grid(), &t.chart(), &t.base(), 0).unwrap();
    let kin = Kinematics::new(&g, &compact).unwrap();
    let r = decay_probe(&kin, 2.0, &sol, &[0.0, 0.0], &radii, BallMetric::Chart).unwrap();
    assert!(r.rows.iter().all(|row| row.values.iter().all(|&v| v == 0.0)));
    assert!(r.decaying.iter().all(|&d| d));

    let tails = MapPreset::GaussianBump { amplitude: 0.4, width: 2.0, support: 9.0 }.build(g.grid(), &t.chart(), &t.base(), 0).unwrap();
    let kin = Kinematics::new(&g, &tails).unwrap();
    let r = decay_probe(&kin, 2.0, &sol, &[0.0, 0.0], &radii, BallMetric::Chart).unwrap();
    for k in 0..5 {
        let e = r.exponents[k].unwrap();
        assert!(e >= r.expected[k], "{}: exponent {e}", DECAY_TERMS[k]);
    }
}
