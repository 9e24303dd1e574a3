use mapcalc::soliton::{BallMetric, CutoffFunction, SolitonPreset, SolitonStructure};

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

#[test]
fn gaussian_soliton_is_exact() {
    let sol = SolitonPreset::parse("gaussian(0.5)").unwrap().build::<f64>(3.0).unwrap();
    let g = sol.sample_geometry(31).unwrap();
    assert_eq!(sup(&sol.residual(&g).unwrap()), 0.0);
    let (field, defect) = sol.hamilton_identity(&g).unwrap();
    assert!(sup(&field) < 1e-12 && defect < 1e-12);
    let pot = sol.sample_potential(&g);
    for k in 0..g.len() {
        let x = g.grid().coords(k);
        assert!((pot.f[k] - 0.25 * (x[0] * x[0] + x[1] * x[1])).abs() < 1e-14);
        assert!((pot.laplacian[k] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn sampled_cigar_residual_converges() {
    let sol = SolitonStructure::<f64>::cigar(2.0).unwrap();
    let r: Vec<f64> = [41usize, 81]
        .iter()
        .map(|&n| {
            let g = sol.sample_geometry(n).unwrap();
            sup(&sol.residual_sampled(&g).unwrap())
        })
        .collect();
    assert!(r[0] / r[1] > 3.5, "{r:?}");
}

#[test]
fn cutoff_is_one_inside_and_zero_outside() {
    let cut = CutoffFunction::new(vec![0.0, 0.0], 1.0, BallMetric::Chart);
    assert_eq!(cut.eta(&[0.5, 0.5]), 1.0);
    assert_eq!(cut.eta(&[2.0, 0.5]), 0.0);
    let mid = cut.eta(&[1.5, 0.0]);
    assert!(mid > 0.0 && mid < 1.0);
}
