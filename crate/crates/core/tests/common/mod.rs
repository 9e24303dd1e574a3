#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

use mapcalc::geometry::{ChartManifold, ManifoldPreset, SourceGeometry};
use mapcalc::mapfield::{random_smooth_field, DiscreteMap, RandomFieldSpec};
use mapcalc::{Grid, Stencil};

/// Flat square `[−a, a]²` at spacing `h`.
pub fn flat(a: f64, h: f64) -> SourceGeometry<f64> {
    let chart = ManifoldPreset::Euclidean { dim: 2 }.default_chart(a).unwrap();
    SourceGeometry::sample(&chart, Grid::with_spacing(&[-a, -a], &[a, a], h).unwrap(), Stencil::Second).unwrap()
}

pub fn cigar(a: f64, h: f64) -> SourceGeometry<f64> {
    let chart = ManifoldPreset::Cigar.default_chart(a).unwrap();
    SourceGeometry::sample(&chart, Grid::with_spacing(&[-a, -a], &[a, a], h).unwrap(), Stencil::Second).unwrap()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Target {
    Flat,
    Sphere,
}

impl Target {
    pub fn chart(self) -> ChartManifold<f64> {
        match self {
            Target::Flat => ManifoldPreset::Euclidean { dim: 2 }.default_chart(10.0).unwrap(),
            Target::Sphere => ManifoldPreset::Sphere { radius: 1.0 }.default_chart(0.0).unwrap(),
        }
    }

    pub fn base(self) -> Vec<f64> {
        match self {
            Target::Flat => vec![0.0, 0.0],
            Target::Sphere => vec![FRAC_PI_2, 0.0],
        }
    }
}

/// Half-width of the standard test square.
pub const BOX: f64 = 2.0;
/// Support radius of the standard test map.
pub const SUPPORT: f64 = 1.7;

/// Seeded map `y₀ + windowed random field` supported in the disk of radius `support`.
pub fn random_map(geom: &SourceGeometry<f64>, target: Target, seed: u64, amplitude: f64, support: f64) -> DiscreteMap<f64> {
    let spec = RandomFieldSpec::new(vec![0.0, 0.0], support).with_amplitude(amplitude).with_frequency(1.0);
    let f = random_smooth_field(geom.grid(), 2, &spec, seed);
    let base = target.base();
    let values = f.iter().enumerate().map(|(k, v)| base[k % 2] + v).collect();
    DiscreteMap::new(geom.grid().clone(), target.chart(), values).unwrap()
}

/// Seeded variation field supported in a disk of radius `support` near the origin.
pub fn random_variation(geom: &SourceGeometry<f64>, seed: u64, support: f64) -> Vec<f64> {
    let spec = RandomFieldSpec::new(vec![0.1, -0.05], support).with_frequency(1.0);
    random_smooth_field(geom.grid(), 2, &spec, seed)
}

/// Seeded map `y₀ + a exp(−|x|²/w²) f(x)`, `f` a windowed random field of
/// radius `SUPPORT`; the Gaussian keeps high derivatives small near the window edge.
pub fn gaussian_random_map(geom: &SourceGeometry<f64>, target: Target, seed: u64, amplitude: f64, width: f64) -> DiscreteMap<f64> {
    let spec = RandomFieldSpec::new(vec![0.0, 0.0], SUPPORT).with_frequency(1.0);
    let f = random_smooth_field(geom.grid(), 2, &spec, seed);
    let env = geom.grid().sample(1, |x, out| out[0] = amplitude * (-(x[0] * x[0] + x[1] * x[1]) / (width * width)).exp());
    let base = target.base();
    let values = f.iter().enumerate().map(|(k, v)| base[k % 2] + env[k / 2] * v).collect();
    DiscreteMap::new(geom.grid().clone(), target.chart(), values).unwrap()
}

/// Smooth seeded field on any grid, unwindowed in effect (radius 100).
pub fn random_smooth_on(geom: &SourceGeometry<f64>, seed: u64) -> Vec<f64> {
    let spec = RandomFieldSpec::new(vec![0.0; geom.dim()], 100.0).with_frequency(1.0);
    random_smooth_field(geom.grid(), 2, &spec, seed)
}
