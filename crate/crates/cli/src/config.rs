//! Experiment configuration: one JSON document, every field optional, with
//! `key.path=value` overrides applied on top.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use finsler_twist::finsler::CrRegion;
use finsler_twist::suspension::default_asymptotic_constant;
use finsler_twist::{FinslerModel, GraphIntegrator, GridSpec, IntegratorConfig, SuspensionSpec, TwistMapSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormConstants {
    pub a: f64,
    pub b: f64,
}

/// Grid of cell centres; see [`GridSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            x_min: 0.0,
            x_max: 1.0,
            y_min: -0.5,
            y_max: 0.5,
            nx: 256,
            ny: 256,
        }
    }
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        Ok(GridSpec::new((self.x_min, self.x_max), (self.y_min, self.y_max), self.nx, self.ny)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KamConfig {
    pub y_min: f64,
    pub y_max: f64,
    pub samples: usize,
    pub min_fraction: f64,
}

impl Default for KamConfig {
    fn default() -> Self {
        Self {
            y_min: -1.0,
            y_max: 1.0,
            samples: 50,
            min_fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PortraitConfig {
    /// Seed points, evenly spaced in `y` over the grid's range at `x = x0`.
    pub seeds: usize,
    pub x0: f64,
    pub iterations: usize,
}

impl Default for PortraitConfig {
    fn default() -> Self {
        Self {
            seeds: 24,
            x0: 0.5,
            iterations: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrConfig {
    pub order: usize,
    pub torus_points: usize,
    pub directions: usize,
    pub min_v1: f64,
    /// Upper bound on `d(ε/2)/d(ε)`.
    pub max_ratio: f64,
}

impl Default for CrConfig {
    fn default() -> Self {
        let region = CrRegion::default();
        Self {
            order: 1,
            torus_points: region.torus_points,
            directions: region.directions,
            min_v1: region.min_v1,
            max_ratio: 0.6,
        }
    }
}

impl CrConfig {
    pub fn region(&self) -> CrRegion {
        CrRegion {
            torus_points: self.torus_points,
            directions: self.directions,
            min_v1: self.min_v1,
        }
    }
}

/// Tolerances checked by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub flat: f64,
    pub conjugacy: f64,
    pub determinant: f64,
    /// Minimum island area as a fraction of the grid's area.
    pub island_fraction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            flat: 1e-8,
            conjugacy: 1e-6,
            determinant: 1e-6,
            island_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub epsilon: f64,
    pub band_k: f64,
    /// Half-width `D` of the band where the Lagrangian is the Legendre dual.
    pub lagrangian_band: f64,
    /// `D₊ = D₋`; derived from `D` when absent.
    pub asymptotic_constant: Option<f64>,
    /// `A, B` of the flat norm; derived when absent.
    pub norm_constants: Option<NormConstants>,
    pub grid: GridConfig,
    pub n_iter: usize,
    pub threshold: f64,
    /// Time-1 map used for single evaluations and circle scans.
    pub integrator: IntegratorConfig,
    /// Splitting steps per period for long FTLE sweeps.
    pub sweep_steps: usize,
    pub graph: GraphIntegrator,
    pub tolerances: Tolerances,
    pub kam: KamConfig,
    pub portrait: PortraitConfig,
    pub cr: CrConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.3,
            band_k: 2.0,
            lagrangian_band: 2.0,
            asymptotic_constant: None,
            norm_constants: None,
            grid: GridConfig::default(),
            n_iter: 1000,
            threshold: 0.05,
            integrator: IntegratorConfig::default(),
            sweep_steps: 25,
            graph: GraphIntegrator::default(),
            tolerances: Tolerances::default(),
            kam: KamConfig::default(),
            portrait: PortraitConfig::default(),
            cr: CrConfig::default(),
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    /// Reads `path` (or starts from defaults) and applies `key=value`
    /// overrides. Values are parsed as JSON, falling back to a string.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let base: Self = match path {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => Self::default(),
        };
        let mut doc = serde_json::to_value(&base)?;
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| anyhow!("override `{item}` is not of the form key=value"))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut doc, key, value)?;
        }
        let config: Self = serde_json::from_value(doc).context("applying overrides")?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.suspension()?;
        self.grid.spec()?;
        self.graph.validate()?;
        self.integrator.validate()?;
        if self.sweep_steps == 0 || self.n_iter == 0 {
            bail!("sweep_steps and n_iter must be positive");
        }
        let t = &self.tolerances;
        if [t.flat, t.conjugacy, t.determinant, t.island_fraction].iter().any(|v| !(*v > 0.0)) {
            bail!("all tolerances must be positive, got {t:?}");
        }
        if let Some(n) = self.norm_constants {
            FinslerModel::with_norm_constants(self.suspension()?, n.a, n.b)
                .context("norm_constants are not admissible")?;
        }
        Ok(())
    }

    pub fn suspension(&self) -> Result<SuspensionSpec> {
        let c = self
            .asymptotic_constant
            .unwrap_or_else(|| default_asymptotic_constant(self.lagrangian_band));
        let spec = SuspensionSpec {
            epsilon: self.epsilon,
            band_k: self.band_k,
            lagrangian_band: self.lagrangian_band,
            d_plus: c,
            d_minus: c,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            epsilon,
            ..self.clone()
        }
    }

    pub fn twist_spec(&self) -> Result<TwistMapSpec> {
        Ok(TwistMapSpec {
            suspension: self.suspension()?,
            integrator: self.integrator,
        })
    }

    /// The fixed-step twist map used for long FTLE sweeps.
    pub fn sweep_spec(&self) -> Result<TwistMapSpec> {
        Ok(TwistMapSpec {
            suspension: self.suspension()?,
            integrator: IntegratorConfig::sweep(self.sweep_steps),
        })
    }

    pub fn model(&self) -> Result<FinslerModel> {
        let spec = self.suspension()?;
        Ok(match self.norm_constants {
            Some(n) => FinslerModel::with_norm_constants(spec, n.a, n.b)?,
            None => FinslerModel::new(spec)?,
        })
    }
}

fn set_path(doc: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (depth, part) in parts.iter().enumerate() {
        let last = depth + 1 == parts.len();
        let map = node
            .as_object_mut()
            .ok_or_else(|| anyhow!("`{}` is not an object", parts[..depth].join(".")))?;
        if !map.contains_key(*part) {
            bail!("unknown config field `{key}`");
        }
        if last {
            map.insert((*part).to_string(), value);
            return Ok(());
        }
        node = map.get_mut(*part).expect("checked above");
        if node.is_null() {
            bail!("`{}` is unset; set it as a whole JSON object", parts[..=depth].join("."));
        }
    }
    unreachable!("split always yields a part")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_follow_field_paths() {
        let c = ExperimentConfig::load(
            None,
            &[
                "epsilon=0.1".into(),
                "grid.nx=8".into(),
                "norm_constants={\"a\":18.5,\"b\":13.6}".into(),
            ],
        );
        // explicit constants are certified before use
        let c = match c {
            Ok(c) => c,
            Err(e) => panic!("{e:#}"),
        };
        assert_eq!(c.epsilon, 0.1);
        assert_eq!(c.grid.nx, 8);
        assert_eq!(c.norm_constants, Some(NormConstants { a: 18.5, b: 13.6 }));
        assert!(ExperimentConfig::load(None, &["grid.nz=3".into()]).is_err());
        assert!(ExperimentConfig::load(None, &["norm_constants.a=3".into()]).is_err());
        assert!(ExperimentConfig::load(None, &["epsilon".into()]).is_err());
        assert!(ExperimentConfig::load(None, &["epsilon=-1".into()]).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = ExperimentConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        let partial: ExperimentConfig = serde_json::from_str(r#"{"epsilon": 1.2, "grid": {"nx": 16}}"#).unwrap();
        assert_eq!(partial.grid.ny, 256);
        assert_eq!(partial.epsilon, 1.2);
    }
}
