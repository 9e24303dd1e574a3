mod common;

use common::*;
use mapcalc::mapfield::{random_smooth_field, BPreset, DiscreteMap, Kinematics, LPreset, LagrangianL, RandomFieldSpec};

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn constant_map_is_trivial() {
    let g = cigar(1.0, 1.0 / 16.0);
    let t = Target::Sphere;
    let map = DiscreteMap::constant(g.grid().clone(), t.chart(), &t.base()).unwrap();
    assert!(map.is_constant());
    let kin = Kinematics::new(&g, &map).unwrap();
    assert_eq!(sup(kin.tension_values()), 0.0);
    assert_eq!(sup(&kin.energy_density()), 0.0);
    assert_eq!(sup(&kin.p_tension(4.0).values), 0.0);
    assert_eq!(sup(&kin.bitension_pq(4.0, 3.0).unwrap().values), 0.0);
}

#[test]
fn linear_map_energy_and_pullback() {
    let g = flat(1.0, 1.0 / 16.0);
    let map = mapcalc::mapfield::MapPreset::parse("linear").unwrap().build(g.grid(), &Target::Flat.chart(), &[0.0, 0.0], 0).unwrap();
    let kin = Kinematics::unchecked(&g, &map).unwrap();
    let centre = g.grid().node(&[16, 16]);
    assert!((kin.energy_density()[centre] - 2.5).abs() < 1e-12);
    let pull = kin.pullback_metric();
    let expect = [4.0, 0.0, 0.0, 1.0];
    assert!(sup_diff(pull.at(centre), &expect) < 1e-12);
    assert!(sup(&kin.tension_values()[centre * 2..centre * 2 + 2]) < 1e-10);
}

#[test]
fn pullback_is_symmetric() {
    let g = cigar(BOX, 1.0 / 32.0);
    let map = random_map(&g, Target::Sphere, 3, 0.4, SUPPORT);
    let kin = Kinematics::new(&g, &map).unwrap();
    assert!(kin.pullback_metric().symmetry_defect() < 1e-14);
}

#[test]
fn p_tension_at_two_is_tension() {
    let g = flat(BOX, 1.0 / 32.0);
    let map = random_map(&g, Target::Sphere, 4, 0.4, SUPPORT);
    let kin = Kinematics::new(&g, &map).unwrap();
    assert_eq!(kin.p_tension(2.0).values, kin.tension_values());
}

#[test]
fn p_tension_pointwise_bound() {
    let g = cigar(BOX, 1.0 / 32.0);
    let map = random_map(&g, Target::Sphere, 5, 0.5, SUPPORT);
    let kin = Kinematics::new(&g, &map).unwrap();
    let second = kin.second_norm();
    for p in [3.0, 4.0, 5.5] {
        let tp = kin.p_tension(p);
        let norms = kin.norms(&tp.values);
        for node in 0..kin.len() {
            let bound = (2f64.sqrt() + p - 2.0) * kin.dphi_norm(node).powf(p - 2.0) * second[node];
            assert!(norms[node] <= bound * (1.0 + 1e-10) + 1e-14, "p={p} node {node}: {} > {bound}", norms[node]);
        }
    }
}

#[test]
fn l_tension_of_p_energy_is_p_tension() {
    let run = |h: f64| {
        let g = flat(BOX, h);
        let map = random_map(&g, Target::Sphere, 6, 0.4, SUPPORT);
        let kin = Kinematics::new(&g, &map).unwrap();
        let tl = kin.l_tension(&LPreset::PEnergy { p: 4.0 });
        let tp = kin.p_tension(4.0);
        sup_diff(&tl.values, &tp.values) / sup(&tp.values)
    };
    let (c, f) = (run(1.0 / 32.0), run(1.0 / 64.0));
    assert!(c < 2e-2, "relative gap {c}");
    assert!(c / f >= 3.5, "ladder {}", c / f);
}

#[test]
fn potential_on_constant_map() {
    let g = flat(1.0, 1.0 / 16.0);
    let y0 = [0.3, -0.2];
    let map = DiscreteMap::constant(g.grid().clone(), Target::Flat.chart(), &y0).unwrap();
    let kin = Kinematics::new(&g, &map).unwrap();
    let k = 1.5;
    let tl = kin.l_tension(&LPreset::Potential { k });
    for node in 0..kin.len() {
        assert!(sup_diff(&tl.values[node * 2..node * 2 + 2], &[-k * y0[0], -k * y0[1]]) < 1e-14);
    }
}

#[test]
fn connection_is_metric_compatible() {
    let run = |h: f64| {
        let g = cigar(BOX, h);
        let map = random_map(&g, Target::Sphere, 8, 0.5, SUPPORT);
        let kin = Kinematics::new(&g, &map).unwrap();
        let spec = RandomFieldSpec::new(vec![0.0, 0.0], 1.5).with_frequency(1.0);
        let u = random_smooth_field(g.grid(), 2, &spec, 31);
        let v = random_smooth_field(g.grid(), 2, &spec, 32);
        let pair: Vec<f64> = (0..kin.len()).map(|k| kin.inner_n(k, &u[k * 2..k * 2 + 2], &v[k * 2..k * 2 + 2])).collect();
        let dpair = g.grid().gradient_interior(&pair, 1, g.stencil());
        let (nu, nv) = (kin.covariant(&u), kin.covariant(&v));
        let mut worst: f64 = 0.0;
        for node in 0..kin.len() {
            if g.grid().boundary_distance(node) < 2 {
                continue;
            }
            for i in 0..2 {
                let lhs = dpair[node * 2 + i];
                let a = kin.inner_n(node, &nu[(node * 2 + i) * 2..(node * 2 + i + 1) * 2], &v[node * 2..node * 2 + 2]);
                let b = kin.inner_n(node, &u[node * 2..node * 2 + 2], &nv[(node * 2 + i) * 2..(node * 2 + i + 1) * 2]);
                worst = worst.max((lhs - a - b).abs());
            }
        }
        worst
    };
    let (c, f) = (run(1.0 / 32.0), run(1.0 / 64.0));
    assert!(c < 2e-3, "defect {c}");
    assert!(c / f >= 3.5, "ladder {}", c / f);
}

#[test]
fn q2_specialisation() {
    let g = cigar(BOX, 1.0 / 32.0);
    let map = random_map(&g, Target::Sphere, 12, 0.4, SUPPORT);
    let kin = Kinematics::new(&g, &map).unwrap();
    for p in [2.0, 3.0, 4.0] {
        assert_eq!(kin.bitension_pq(p, 2.0).unwrap().values, kin.bitension_p2(p).unwrap().values);
    }
}

#[test]
fn lb_bitension_reduces_to_pq() {
    let run = |h: f64| {
        let g = flat(BOX, h);
        let map = random_map(&g, Target::Sphere, 13, 0.4, SUPPORT);
        let kin = Kinematics::new(&g, &map).unwrap();
        let l = LPreset::PEnergy { p: 4.0 };
        let lb = kin.bitension_lb(&BPreset::Tension, &l, Default::default()).unwrap();
        let tb = kin.b_tension(&BPreset::Tension, &l);
        assert_eq!(sup(&tb.values), 0.0);
        let pq = kin.bitension_pq(4.0, 2.0).unwrap();
        sup_diff(&lb.values, &pq.values) / sup(&pq.values)
    };
    let (c, f) = (run(1.0 / 64.0), run(1.0 / 128.0));
    assert!(c < 1.5e-2, "relative gap {c}");
    assert!(c / f >= 3.5, "ladder {}", c / f);
}

#[test]
fn lagrangian_presets_are_consistent() {
    let x = [0.1, 0.2];
    let y = [0.4, -0.3];
    for l in [LPreset::Dirichlet, LPreset::PEnergy { p: 3.0 }, LPreset::Potential { k: 0.7 }, LPreset::Weighted { k: 0.5 }] {
        mapcalc::mapfield::check_l_partials::<f64>(&l, &[(x.to_vec(), y.to_vec(), 0.8)], 1e-6).unwrap();
        assert!(LagrangianL::<f64>::d_yy(&l, &x, &y, 0.8, &mut [0.0; 4]));
    }
}

proptest::proptest! {
    #[test]
    fn affine_maps_have_constant_density_and_no_tension(
        a in proptest::array::uniform4(-1.0f64..1.0),
        y0 in proptest::array::uniform2(-1.0f64..1.0),
    ) {
        let g = flat(1.0, 1.0 / 8.0);
        let values = g.grid().sample(2, |x, o| {
            o[0] = y0[0] + a[0] * x[0] + a[1] * x[1];
            o[1] = y0[1] + a[2] * x[0] + a[3] * x[1];
        });
        let map = DiscreteMap::new(g.grid().clone(), Target::Flat.chart(), values).unwrap();
        let kin = Kinematics::unchecked(&g, &map).unwrap();
        let want = 0.5 * a.iter().map(|v| v * v).sum::<f64>();
        let interior: Vec<usize> = (0..g.len()).filter(|&k| g.grid().boundary_distance(k) >= 2).collect();
        for &k in &interior {
            proptest::prop_assert!((kin.energy_density()[k] - want).abs() < 1e-12);
            proptest::prop_assert!(kin.tension_values()[2 * k..2 * k + 2].iter().all(|t| t.abs() < 1e-10));
        }
    }
}
