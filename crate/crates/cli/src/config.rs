//! Experiment configuration: embedded defaults, per-command tables, an
//! optional TOML file and command-line overrides, merged in that order.

use std::path::Path;

use mapcalc::flow::FlowConfig;
use mapcalc::mapfield::BitensionForm;
use mapcalc::soliton::BallMetric;
use mapcalc::stress::{ExponentVariant, StressForm};
use mapcalc::Stencil;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use toml::Value;

use crate::error::CliError;

pub const DEFAULTS: &str = include_str!("defaults.toml");

/// Grid spacing; accepts `0.015625` or `"1/64"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spacing(pub f64);

impl Spacing {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let s = s.trim();
        let bad = || CliError::Config(format!("bad spacing `{s}`"));
        let v = match s.split_once('/') {
            Some((a, b)) => {
                let a: f64 = a.trim().parse().map_err(|_| bad())?;
                let b: f64 = b.trim().parse().map_err(|_| bad())?;
                a / b
            }
            None => s.parse().map_err(|_| bad())?,
        };
        if !(v > 0.0) || !v.is_finite() {
            return Err(bad());
        }
        Ok(Self(v))
    }
}

impl Serialize for Spacing {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Spacing {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Spacing::parse(&v.to_string()),
            Raw::Str(s) => Spacing::parse(&s),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Manifold preset (`euclidean`, `cigar`, `sphere`, `hyperbolic`) or,
    /// for soliton commands, a soliton preset (`cigar`, `gaussian(λ)`, `euclidean-trivial`).
    pub preset: String,
    pub extent: f64,
    pub h: Spacing,
    /// Nodes per axis; `0` means derive from `h`.
    pub nodes: usize,
    /// Periodic grid on `[−extent, extent)`; Euclidean only.
    pub periodic: bool,
    pub stencil: Stencil,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    /// `random`, `constant`, `identity`, `linear`, `gaussian-bump`, `torus-bump`.
    pub preset: String,
    /// `flat` or `sphere`.
    pub target: String,
    pub seed: u64,
    pub amplitude: f64,
    pub support: f64,
    pub frequency: f64,
    pub modes: usize,
    /// Gaussian width, or the concentration of `torus-bump`.
    pub width: f64,
    pub center: Vec<f64>,
}

/// A seeded windowed random field: the map variation `v` or the metric variation `δg`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub center: Vec<f64>,
    pub radius: f64,
    pub frequency: f64,
    pub amplitude: f64,
    /// Added to the map seed.
    pub seed_offset: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// `pq`, `p`, `l`, `lb`, or `all` for the commands that loop over kinds.
    pub functional: String,
    pub p: f64,
    pub q: f64,
    pub l: String,
    pub b: String,
    pub bitension: BitensionForm,
    pub stress_form: StressForm,
    pub variant: ExponentVariant,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub center: Vec<f64>,
    /// Cutoff radius for the integral identities.
    pub radius: f64,
    /// Radius ladder for the decay probes.
    pub radii: Vec<f64>,
    pub balls: BallMetric,
    /// Number of seeded tensors in `ibp-check`.
    pub count: usize,
    /// Repeat at half the spacing and check the convergence ratio.
    pub refine: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub rel: f64,
    pub ladder: f64,
    pub trace: f64,
    pub soliton_residual: f64,
    pub scal_center: f64,
    pub hamilton: f64,
    pub einstein: f64,
    pub curvature: f64,
    pub ibp: f64,
    pub ledger: f64,
    pub shi_radial: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub command: String,
    pub seeds: Vec<u64>,
    /// Empty means the configured value.
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub threads: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub csv: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Used by `mapcalc run`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    pub geometry: GeometryConfig,
    pub map: MapConfig,
    pub variation: FieldConfig,
    pub metric_variation: FieldConfig,
    pub params: Params,
    pub probe: ProbeConfig,
    pub tolerances: Tolerances,
    pub flow: FlowConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub seed: Option<u64>,
    pub h: Option<Spacing>,
    pub out: Option<String>,
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Table(b), Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_table() && v.is_table() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn parse_toml(text: &str, origin: &str) -> Result<Value, CliError> {
    text.parse::<Value>().map_err(|e| CliError::Config(format!("{origin}: {e}")))
}

/// Reads the `command` key of a config file without validating the rest.
pub fn file_command(path: &Path) -> Result<Option<String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let v = parse_toml(&text, &path.display().to_string())?;
    Ok(v.get("command").and_then(|c| c.as_str()).map(str::to_owned))
}

impl ExperimentConfig {
    /// Defaults, then the command's table, then `file`, then `flags`.
    pub fn resolve(command: &str, file: Option<&Path>, flags: &Overrides) -> Result<Self, CliError> {
        let mut value = parse_toml(DEFAULTS, "defaults")?;
        let per_command = value
            .as_table_mut()
            .and_then(|t| t.remove("command"))
            .and_then(|c| c.get(command).cloned());
        if let Some(over) = per_command {
            merge(&mut value, over);
        }
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            merge(&mut value, parse_toml(&text, &path.display().to_string())?);
        }
        let mut cfg: Self = value.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.apply(flags);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, flags: &Overrides) {
        if let Some(p) = &flags.preset {
            self.geometry.preset = p.clone();
        }
        if let Some(p) = flags.p {
            self.params.p = p;
            self.flow.p = p;
        }
        if let Some(q) = flags.q {
            self.params.q = q;
            self.flow.q = q;
        }
        if let Some(s) = flags.seed {
            self.map.seed = s;
        }
        if let Some(h) = flags.h {
            self.geometry.h = h;
            self.geometry.nodes = 0;
        }
        if let Some(dir) = &flags.out {
            self.output.dir = dir.clone();
        }
        self.flow.seed = self.map.seed;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |s: String| Err(CliError::Config(s));
        if !(self.geometry.extent > 0.0) {
            return bad("geometry.extent must be positive".into());
        }
        if self.geometry.nodes == 1 {
            return bad("geometry.nodes must be 0 or at least 2".into());
        }
        if !["flat", "sphere"].contains(&self.map.target.as_str()) {
            return bad(format!("map.target must be `flat` or `sphere`, not `{}`", self.map.target));
        }
        if !(self.params.p >= 2.0) || !(self.params.q >= 2.0) {
            return bad("params.p and params.q must be >= 2".into());
        }
        if self.probe.radii.iter().any(|&r| !(r > 0.0)) || !(self.probe.radius > 0.0) {
            return bad("probe radii must be positive".into());
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("rel", t.rel),
            ("ladder", t.ladder),
            ("trace", t.trace),
            ("soliton_residual", t.soliton_residual),
            ("scal_center", t.scal_center),
            ("hamilton", t.hamilton),
            ("einstein", t.einstein),
            ("curvature", t.curvature),
            ("ibp", t.ibp),
            ("ledger", t.ledger),
            ("shi_radial", t.shi_radial),
        ] {
            if !(v > 0.0) {
                return bad(format!("tolerances.{name} must be positive"));
            }
        }
        self.flow.validate().map_err(|e| CliError::Config(format!("flow: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions_parse() {
        assert_eq!(Spacing::parse("1/64").unwrap().0, 1.0 / 64.0);
        assert_eq!(Spacing::parse("0.25").unwrap().0, 0.25);
        assert!(Spacing::parse("1/0").is_err());
        assert!(Spacing::parse("-1").is_err());
    }

    #[test]
    fn defaults_resolve_for_every_command() {
        for c in crate::COMMANDS {
            ExperimentConfig::resolve(c, None, &Overrides::default()).unwrap();
        }
    }

    #[test]
    fn command_tables_apply() {
        let c = ExperimentConfig::resolve("verify-soliton", None, &Overrides::default()).unwrap();
        assert_eq!(c.geometry.preset, "cigar");
        assert_eq!(c.geometry.nodes, 129);
        let v = ExperimentConfig::resolve("variation-check", None, &Overrides::default()).unwrap();
        assert_eq!(v.geometry.h.0, 1.0 / 64.0);
    }
}
