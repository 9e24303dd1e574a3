mod common;

use std::f64::consts::{PI, TAU};

use mapcalc::geometry::{ManifoldPreset, QuadratureRule, SourceGeometry, SymTensorField};
use mapcalc::{Grid, Stencil};

fn torus(nodes: usize, stencil: Stencil) -> SourceGeometry<f64> {
    let chart = ManifoldPreset::Euclidean { dim: 2 }.chart(&[-1.0, -1.0], &[7.0, 7.0]).unwrap();
    SourceGeometry::sample(&chart, Grid::periodic(&[0.0, 0.0], &[TAU, TAU], &[nodes, nodes]).unwrap(), stencil).unwrap()
}

#[test]
fn hyperbolic_space_is_einstein() {
    let chart = ManifoldPreset::Hyperbolic { dim: 3 }.default_chart::<f64>(2.0).unwrap();
    for x in [[0.0, 0.0, 1.0], [0.3, -0.7, 0.4], [1.2, 0.5, 1.9]] {
        assert!((chart.scalar_curvature(&x).unwrap() + 6.0).abs() < 1e-9);
        let ric = chart.ricci(&x).unwrap();
        let g = chart.metric_at(&x).unwrap();
        for (r, gv) in ric.components().iter().zip(&g) {
            assert!((r + 2.0 * gv).abs() < 1e-8 * (1.0 + gv.abs()), "{r} vs {}", -2.0 * gv);
        }
    }
}

#[test]
fn sphere_band_area() {
    let chart = ManifoldPreset::Sphere { radius: 2.0 }.default_chart::<f64>(0.0).unwrap();
    let (lo, hi) = ([0.05, -PI], [PI - 0.05, PI]);
    let exact = 2.0 * PI * 4.0 * 2.0 * 0.05f64.cos();
    let err = |h: f64| {
        let g = SourceGeometry::sample(&chart, Grid::with_spacing(&lo, &hi, h).unwrap(), Stencil::Second)
            .unwrap()
            .with_quadrature(QuadratureRule::Trapezoid);
        (g.integrate(&vec![1.0; g.len()]).unwrap() - exact).abs() / exact
    };
    let (coarse, fine) = (err(PI / 40.0), err(PI / 80.0));
    assert!(fine < 1e-3, "{fine:e}");
    assert!(coarse / fine > 3.5, "{coarse:e} {fine:e}");
}

#[test]
fn laplacian_orders_on_the_torus() {
    let err = |nodes: usize, stencil: Stencil| {
        let g = torus(nodes, stencil);
        let f = g.grid().sample(1, |x, o| o[0] = x[0].sin() * (2.0 * x[1]).cos());
        let lap = g.laplacian_scalar(&f).unwrap();
        lap.iter().zip(&f).fold(0.0f64, |a, (l, v)| a.max((l + 5.0 * v).abs()))
    };
    let second = err(16, Stencil::Second) / err(32, Stencil::Second);
    let fourth = err(16, Stencil::Fourth) / err(32, Stencil::Fourth);
    assert!((3.5..4.5).contains(&second), "{second}");
    assert!((14.0..18.0).contains(&fourth), "{fourth}");
}

#[test]
fn perturbed_metric_is_linear_in_t() {
    let g = common::flat(1.0, 1.0 / 8.0);
    let mut delta = SymTensorField::zeros(2, g.len());
    for k in 0..g.len() {
        let x = g.grid().coords(k);
        let b = (0.25 - x[0] * x[0] - x[1] * x[1]).max(0.0).powi(3);
        delta.values[4 * k..4 * k + 4].copy_from_slice(&[b, 0.5 * b, 0.5 * b, -b]);
    }
    let t = 0.01;
    let p = g.perturbed(&delta, t).unwrap();
    for k in 0..g.len() {
        for i in 0..4 {
            assert!((p.g(k)[i] - g.g(k)[i] - t * delta.at(k)[i]).abs() < 1e-15);
        }
    }
}
