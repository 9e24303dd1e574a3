//! Geometry, maps and functionals built from a resolved configuration.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use mapcalc::energy::Functional;
use mapcalc::geometry::{ChartManifold, ManifoldPreset, SourceGeometry, SymTensorField};
use mapcalc::mapfield::{random_smooth_field, random_symtensor, BPreset, DiscreteMap, LPreset, MapPreset, RandomFieldSpec};
use mapcalc::soliton::{SolitonPreset, SolitonStructure};
use mapcalc::Grid;

use crate::config::{ExperimentConfig, FieldConfig};
use crate::error::CliError;

/// Grid over the box `[lo, hi]` at the configured resolution; `level`
/// halves the spacing that many times.
fn grid(cfg: &ExperimentConfig, lo: &[f64], hi: &[f64], level: u32) -> Result<Grid<f64>, CliError> {
    let g = &cfg.geometry;
    let factor = 1usize << level;
    if g.periodic {
        let n = if g.nodes > 0 { g.nodes } else { ((hi[0] - lo[0]) / g.h.0).round() as usize };
        let period: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| b - a).collect();
        return Ok(Grid::periodic(lo, &period, &vec![n * factor; lo.len()])?);
    }
    Ok(if g.nodes > 0 {
        Grid::new(lo, hi, &vec![(g.nodes - 1) * factor + 1; lo.len()])?
    } else {
        Grid::with_spacing(lo, hi, g.h.0 / factor as f64)?
    })
}

pub fn spacing(geom: &SourceGeometry<f64>) -> f64 {
    geom.grid().spacing().iter().cloned().fold(0.0, f64::max)
}

pub fn manifold(cfg: &ExperimentConfig) -> Result<(ManifoldPreset, ChartManifold<f64>), CliError> {
    let preset = ManifoldPreset::parse(&cfg.geometry.preset)?;
    let chart = preset.default_chart(cfg.geometry.extent)?;
    if cfg.geometry.periodic && !matches!(preset, ManifoldPreset::Euclidean { .. }) {
        return Err(CliError::Config("periodic grids need a euclidean preset".into()));
    }
    Ok((preset, chart))
}

pub fn source(cfg: &ExperimentConfig, level: u32) -> Result<SourceGeometry<f64>, CliError> {
    let (_, chart) = manifold(cfg)?;
    let (lo, hi) = (chart.lo().to_vec(), chart.hi().to_vec());
    // A torus chart must contain the whole period box; widen it by one cell.
    let chart = if cfg.geometry.periodic {
        let pad = 1.0;
        ManifoldPreset::parse(&cfg.geometry.preset)?.chart(&lo.iter().map(|v| v - pad).collect::<Vec<_>>(), &hi.iter().map(|v| v + pad).collect::<Vec<_>>())?
    } else {
        chart
    };
    Ok(SourceGeometry::sample(&chart, grid(cfg, &lo, &hi, level)?, cfg.geometry.stencil)?)
}

pub fn soliton(cfg: &ExperimentConfig) -> Result<SolitonStructure<f64>, CliError> {
    Ok(SolitonPreset::parse(&cfg.geometry.preset)?.build(cfg.geometry.extent)?)
}

pub fn soliton_source(cfg: &ExperimentConfig, sol: &SolitonStructure<f64>, level: u32) -> Result<SourceGeometry<f64>, CliError> {
    let g = grid(cfg, sol.chart.lo(), sol.chart.hi(), level)?;
    Ok(SourceGeometry::sample(&sol.chart, g, cfg.geometry.stencil)?)
}

pub fn target(cfg: &ExperimentConfig) -> Result<(ChartManifold<f64>, Vec<f64>), CliError> {
    Ok(match cfg.map.target.as_str() {
        "flat" => (ManifoldPreset::Euclidean { dim: 2 }.default_chart(10.0)?, vec![0.0, 0.0]),
        "sphere" => (ManifoldPreset::Sphere { radius: 1.0 }.default_chart(0.0)?, vec![FRAC_PI_2, 0.0]),
        other => return Err(CliError::Config(format!("unknown target `{other}`"))),
    })
}

pub fn map(cfg: &ExperimentConfig, geom: &SourceGeometry<f64>) -> Result<DiscreteMap<f64>, CliError> {
    let (chart, base) = target(cfg)?;
    let m = &cfg.map;
    let preset = match m.preset.as_str() {
        "random" => {
            let spec = RandomFieldSpec {
                modes: m.modes,
                max_frequency: m.frequency,
                center: m.center.clone(),
                radius: m.support,
                amplitude: m.amplitude,
            };
            let f = random_smooth_field(geom.grid(), base.len(), &spec, m.seed);
            let values = f.iter().enumerate().map(|(k, v)| base[k % base.len()] + v).collect();
            return Ok(DiscreteMap::new(geom.grid().clone(), chart, values)?);
        }
        "gaussian-bump" => MapPreset::GaussianBump { amplitude: m.amplitude, width: m.width, support: m.support },
        "torus-bump" => MapPreset::TorusBump { amplitude: m.amplitude, concentration: m.width },
        other => MapPreset::parse(other)?,
    };
    Ok(preset.build(geom.grid(), &chart, &base, m.seed)?)
}

fn spec(f: &FieldConfig) -> RandomFieldSpec {
    RandomFieldSpec::new(f.center.clone(), f.radius).with_frequency(f.frequency).with_amplitude(f.amplitude)
}

/// Map variation `v`.
pub fn variation(cfg: &ExperimentConfig, geom: &SourceGeometry<f64>) -> Vec<f64> {
    let f = &cfg.variation;
    random_smooth_field(geom.grid(), 2, &spec(f), cfg.map.seed + f.seed_offset)
}

/// Metric variation `δg` (or a probe tensor), seeded `map.seed + seed_offset + index`.
pub fn symtensor(cfg: &ExperimentConfig, geom: &SourceGeometry<f64>, index: u64) -> SymTensorField<f64> {
    let f = &cfg.metric_variation;
    random_symtensor(geom.grid(), &spec(f), cfg.map.seed + f.seed_offset + index)
}

pub fn l_preset(cfg: &ExperimentConfig) -> Result<LPreset, CliError> {
    Ok(LPreset::parse(&cfg.params.l)?)
}

pub fn b_preset(cfg: &ExperimentConfig) -> Result<BPreset, CliError> {
    Ok(BPreset::parse(&cfg.params.b)?)
}

/// The configured functional, or every kind for `functional = "all"`.
pub fn functionals(cfg: &ExperimentConfig) -> Result<Vec<Functional<f64>>, CliError> {
    let p = &cfg.params;
    let pq = Functional::PQ { p: p.p, q: p.q };
    let pf = Functional::P { p: p.p };
    let l = || -> Result<Functional<f64>, CliError> { Ok(Functional::L(Arc::new(l_preset(cfg)?))) };
    let lb = || -> Result<Functional<f64>, CliError> { Ok(Functional::B { b: Arc::new(b_preset(cfg)?), l: Arc::new(l_preset(cfg)?) }) };
    Ok(match p.functional.as_str() {
        "pq" => vec![pq],
        "p" => vec![pf],
        "l" => vec![l()?],
        "lb" => vec![lb()?],
        "all" => vec![
            pf,
            pq,
            l()?,
            Functional::B { b: Arc::new(BPreset::Tension), l: Arc::new(l_preset(cfg)?) },
            lb()?,
        ],
        other => return Err(CliError::Config(format!("unknown functional `{other}` (pq, p, l, lb, all)"))),
    })
}
