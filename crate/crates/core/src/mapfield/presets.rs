//! Map presets and seeded band-limited random fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DiscreteMap;
use crate::error::{Error, Result};
use crate::geometry::{ChartManifold, SymTensorField};
use crate::grid::Grid;
use crate::scalar::Real;
use crate::soliton::quintic_smoothstep;

/// `exp(1 − 1/(1 − s²))` for `|s| < 1`, zero outside; equals 1 at `s = 0`.
pub fn smooth_window(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Sum of random plane waves times a compact window about `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomFieldSpec {
    pub modes: usize,
    pub max_frequency: f64,
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: f64,
}

impl RandomFieldSpec {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Self { modes: 6, max_frequency: 3.0, center, radius, amplitude: 1.0 }
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_frequency(mut self, max_frequency: f64) -> Self {
        self.max_frequency = max_frequency;
        self
    }
}

struct Wave {
    amp: f64,
    omega: Vec<f64>,
    phase: f64,
}

/// `comps` independent windowed random fields, node-major.
pub fn random_smooth_field<T: Real>(grid: &Grid<T>, comps: usize, spec: &RandomFieldSpec, seed: u64) -> Vec<T> {
    let m = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let norm = 1.0 / (spec.modes.max(1) as f64).sqrt();
    let waves: Vec<Vec<Wave>> = (0..comps)
        .map(|_| {
            (0..spec.modes)
                .map(|_| Wave {
                    amp: rng.gen_range(-1.0..1.0) * norm,
                    omega: (0..m).map(|_| rng.gen_range(-spec.max_frequency..=spec.max_frequency)).collect(),
                    phase: rng.gen_range(0.0..std::f64::consts::TAU),
                })
                .collect()
        })
        .collect();
    grid.sample(comps, |x, out| {
        let xf: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
        let r2: f64 = xf.iter().zip(&spec.center).map(|(a, b)| (a - b) * (a - b)).sum();
        let win = smooth_window(r2.sqrt() / spec.radius);
        for (c, o) in out.iter_mut().enumerate() {
            *o = if win == 0.0 {
                T::zero()
            } else {
                let s: f64 = waves[c]
                    .iter()
                    .map(|w| w.amp * (w.omega.iter().zip(&xf).map(|(a, b)| a * b).sum::<f64>() + w.phase).cos())
                    .sum();
                T::lit(spec.amplitude * win * s)
            };
        }
    })
}

/// Symmetric random 2-tensor field (off-diagonals shared).
pub fn random_symtensor<T: Real>(grid: &Grid<T>, spec: &RandomFieldSpec, seed: u64) -> SymTensorField<T> {
    let m = grid.dim();
    let raw = random_smooth_field(grid, m * m, spec, seed);
    let mut values = vec![T::zero(); raw.len()];
    for node in 0..grid.len() {
        for i in 0..m {
            for j in 0..m {
                let (a, b) = (i.min(j), i.max(j));
                values[node * m * m + i * m + j] = raw[node * m * m + a * m + b];
            }
        }
    }
    SymTensorField { dim: m, values }
}

/// Map presets addressable from configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MapPreset {
    Constant,
    /// `φ(x) = y₀ + x` (needs equal dimensions; not compactly supported).
    Identity,
    /// `φ(x) = y₀ + A x` with `A` row-major `n × m`.
    Linear { matrix: Vec<f64> },
    /// `y₀ + a exp(−|x|²/w²) (1, −½, …)` times a taper that switches off
    /// between `0.8·support` and `support`.
    GaussianBump { amplitude: f64, width: f64, support: f64 },
    RandomSmooth { amplitude: f64, modes: usize, max_frequency: f64, support: f64 },
    /// Periodic bump `a exp(κ(cos x¹ + … − m))` on a torus, in every component.
    TorusBump { amplitude: f64, concentration: f64 },
}

impl MapPreset {
    /// Names with default parameters: `constant`, `identity`, `linear`,
    /// `gaussian-bump`, `random-smooth`, `torus-bump`.
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "constant" => Self::Constant,
            "identity" => Self::Identity,
            "linear" => Self::Linear { matrix: vec![2.0, 0.0, 0.0, 1.0] },
            "gaussian-bump" => Self::GaussianBump { amplitude: 0.4, width: 1.0, support: 3.0 },
            "random-smooth" => Self::RandomSmooth { amplitude: 0.3, modes: 6, max_frequency: 3.0, support: 0.8 },
            "torus-bump" => Self::TorusBump { amplitude: 0.3, concentration: 1.0 },
            other => return Err(Error::InvalidParameter(format!("unknown map preset `{other}`"))),
        })
    }

    pub fn build<T: Real>(&self, grid: &Grid<T>, target: &ChartManifold<T>, base: &[T], seed: u64) -> Result<DiscreteMap<T>> {
        let m = grid.dim();
        let n = target.dim();
        if base.len() != n {
            return Err(Error::Dimension { expected: n, got: base.len() });
        }
        let values: Vec<T> = match self {
            Self::Constant => (0..grid.len()).flat_map(|_| base.iter().copied()).collect(),
            Self::Identity => {
                if m != n {
                    return Err(Error::Dimension { expected: m, got: n });
                }
                grid.sample(n, |x, out| {
                    for a in 0..n {
                        out[a] = base[a] + x[a];
                    }
                })
            }
            Self::Linear { matrix } => {
                if matrix.len() != n * m {
                    return Err(Error::Dimension { expected: n * m, got: matrix.len() });
                }
                grid.sample(n, |x, out| {
                    for a in 0..n {
                        out[a] = base[a] + (0..m).map(|i| T::lit(matrix[a * m + i]) * x[i]).sum::<T>();
                    }
                })
            }
            Self::GaussianBump { amplitude, width, support } => {
                let (a, w, s) = (T::lit(*amplitude), T::lit(*width), T::lit(*support));
                grid.sample(n, |x, out| {
                    let r2: T = x.iter().map(|&v| v * v).sum();
                    let r = r2.sqrt();
                    let inner = T::lit(0.8) * s;
                    let taper = T::one() - quintic_smoothstep((r - inner) / (s - inner)).0;
                    let g = a * (-r2 / (w * w)).exp() * taper;
                    for (k, o) in out.iter_mut().enumerate() {
                        let dir = T::one() - T::lit(0.5) * T::from_usize_lossy(k);
                        *o = base[k] + g * dir;
                    }
                })
            }
            Self::RandomSmooth { amplitude, modes, max_frequency, support } => {
                let spec = RandomFieldSpec {
                    modes: *modes,
                    max_frequency: *max_frequency,
                    center: vec![0.0; m],
                    radius: *support,
                    amplitude: *amplitude,
                };
                let f = random_smooth_field(grid, n, &spec, seed);
                f.iter().enumerate().map(|(k, &v)| base[k % n] + v).collect()
            }
            Self::TorusBump { amplitude, concentration } => {
                let (a, kappa) = (T::lit(*amplitude), T::lit(*concentration));
                grid.sample(n, |x, out| {
                    let s: T = x.iter().map(|&v| v.cos() - T::one()).sum();
                    let g = a * (kappa * s).exp();
                    for (k, o) in out.iter_mut().enumerate() {
                        *o = base[k] + g * (T::one() - T::lit(0.5) * T::from_usize_lossy(k));
                    }
                })
            }
        };
        DiscreteMap::new(grid.clone(), target.clone(), values)
    }
}
