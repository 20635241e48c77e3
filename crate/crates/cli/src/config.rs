//! Experiment configuration: JSON with defaults, unknown keys rejected,
//! errors naming the offending key path.

use std::path::Path;

use manidens_core::density::BandwidthSchedule;
use manidens_core::geometry::{DensityKind, ManifoldKind, ManifoldSpec, MIN_RESOLUTION};
use manidens_core::pipeline::{EstimatorKind, PipelineConfig};
use manidens_core::wasserstein::DEFAULT_MAX_ENTRIES;
use manidens_core::Error;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Location of the documented schema, relative to the repository root.
pub const SCHEMA_PATH: &str = "schema/experiment-config.schema.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Circle,
    Sphere2,
    Torus2,
    PlanarCurve,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Embedding {
    /// Zero-padded canonical coordinates.
    Canonical,
    /// Random orthogonal motion drawn from `seed`.
    Rotated { seed: u64 },
    /// Row-major rotation and offset.
    Explicit { rotation: Vec<f64>, offset: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    pub kind: Shape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub major: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cos: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sin: Option<Vec<f64>>,
    /// Defaults to the intrinsic dimension plus one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient_dim: Option<usize>,
    #[serde(default = "canonical")]
    pub embedding: Embedding,
}

fn canonical() -> Embedding {
    Embedding::Canonical
}

impl ManifoldConfig {
    pub fn new(kind: Shape) -> Self {
        ManifoldConfig {
            kind,
            radius: None,
            major: None,
            minor: None,
            base: None,
            cos: None,
            sin: None,
            ambient_dim: None,
            embedding: Embedding::Canonical,
        }
    }

    fn shape(&self) -> CliResult<ManifoldKind> {
        let unused = |name: &str, present: bool| {
            if present {
                Err(CliError::config(format!("manifold.{name}"), format!("not a parameter of {:?}", self.kind)))
            } else {
                Ok(())
            }
        };
        Ok(match self.kind {
            Shape::Circle | Shape::Sphere2 => {
                unused("major", self.major.is_some())?;
                unused("minor", self.minor.is_some())?;
                unused("base", self.base.is_some())?;
                unused("cos", self.cos.is_some())?;
                unused("sin", self.sin.is_some())?;
                let radius = self.radius.unwrap_or(1.0);
                if self.kind == Shape::Circle {
                    ManifoldKind::Circle { radius }
                } else {
                    ManifoldKind::Sphere2 { radius }
                }
            }
            Shape::Torus2 => {
                unused("radius", self.radius.is_some())?;
                unused("base", self.base.is_some())?;
                unused("cos", self.cos.is_some())?;
                unused("sin", self.sin.is_some())?;
                ManifoldKind::Torus2 { major: self.major.unwrap_or(2.0), minor: self.minor.unwrap_or(1.0) }
            }
            Shape::PlanarCurve => {
                unused("radius", self.radius.is_some())?;
                unused("major", self.major.is_some())?;
                unused("minor", self.minor.is_some())?;
                ManifoldKind::PlanarCurve {
                    base: self.base.unwrap_or(1.0),
                    cos: self.cos.clone().unwrap_or_default(),
                    sin: self.sin.clone().unwrap_or_default(),
                }
            }
        })
    }

    pub fn to_spec(&self) -> CliResult<ManifoldSpec> {
        let kind = self.shape()?;
        let dd = self.ambient_dim.unwrap_or(kind.canonical_dim());
        let spec = match &self.embedding {
            Embedding::Canonical => ManifoldSpec::new(kind, dd),
            Embedding::Rotated { seed } => ManifoldSpec::rotated(kind, dd, *seed),
            Embedding::Explicit { rotation, offset } => {
                ManifoldSpec::with_motion(kind, dd, rotation.clone(), offset.clone())
            }
        };
        spec.map_err(|e| keyed("manifold", &e))
    }
}

/// Which risk an experiment measures.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `W_p(estimate, reference)`.
    #[default]
    Wasserstein,
    /// `| |vol| - |vol_M| |`.
    VolumeMassError,
}

/// Discretization used to keep transport problems tractable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransportConfig {
    /// Both measures are binned on a common grid until each has at most
    /// this many atoms.
    pub max_atoms: usize,
    /// First grid cell tried.
    pub start_cell: f64,
    pub max_entries: usize,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig { max_atoms: 2000, start_cell: 1e-3, max_entries: DEFAULT_MAX_ENTRIES }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub manifold: ManifoldConfig,
    #[serde(default = "uniform")]
    pub density: DensityKind,
    #[serde(default = "unknown_manifold")]
    pub estimator: EstimatorKind,
    /// Sample sizes, strictly increasing.
    #[serde(default = "default_n")]
    pub n: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Replicate `r` uses seed `seed + r`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub schedule: BandwidthSchedule,
    /// Kernel order.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Chart order; defaults to `k`.
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default = "default_s")]
    pub s: f64,
    /// Negative-mass budget; defaults from the density bounds.
    #[serde(default)]
    pub beta: Option<f64>,
    /// Defaults to four times the largest `n`.
    #[serde(default)]
    pub reference_resolution: Option<usize>,
    #[serde(default = "default_p")]
    pub p: u32,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default)]
    pub transport: TransportConfig,
}

fn uniform() -> DensityKind {
    DensityKind::Uniform
}
fn unknown_manifold() -> EstimatorKind {
    EstimatorKind::UnknownManifold
}
fn default_n() -> Vec<usize> {
    vec![250, 500, 1000, 2000, 4000]
}
fn default_replicates() -> usize {
    20
}
fn default_k() -> usize {
    2
}
fn default_s() -> f64 {
    1.0
}
fn default_p() -> u32 {
    1
}

/// Maps a core parameter error to a config key under `prefix`.
fn keyed(prefix: &str, e: &Error) -> CliError {
    match e.root() {
        Error::InvalidParameter { name, reason } => CliError::config(format!("{prefix}.{name}"), reason.clone()),
        other => CliError::config(prefix, other.to_string()),
    }
}

impl ExperimentConfig {
    pub fn new(manifold: ManifoldConfig) -> Self {
        ExperimentConfig {
            manifold,
            density: uniform(),
            estimator: unknown_manifold(),
            n: default_n(),
            replicates: default_replicates(),
            seed: 0,
            schedule: BandwidthSchedule::default(),
            k: default_k(),
            m: None,
            s: default_s(),
            beta: None,
            reference_resolution: None,
            p: default_p(),
            metric: Metric::Wasserstein,
            transport: TransportConfig::default(),
        }
    }

    pub fn spec(&self) -> CliResult<ManifoldSpec> {
        self.manifold.to_spec()
    }

    /// The per-run pipeline configuration.
    pub fn pipeline(&self) -> CliResult<PipelineConfig> {
        let mut p = PipelineConfig::new(self.spec()?);
        p.density = self.density;
        p.k = self.k;
        p.m = self.m;
        p.s = self.s;
        p.beta = self.beta;
        p.schedule = self.schedule.clone();
        p.estimator = self.estimator.clone();
        Ok(p)
    }

    pub fn reference_resolution(&self) -> usize {
        self.reference_resolution.unwrap_or(4 * self.n.iter().copied().max().unwrap_or(1))
    }

    pub fn validate(&self) -> CliResult<()> {
        self.spec()?;
        if self.n.is_empty() {
            return Err(CliError::config("n", "must not be empty"));
        }
        if self.n[0] == 0 {
            return Err(CliError::config("n", "sample sizes must be positive"));
        }
        if self.n.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::config("n", "must be strictly increasing"));
        }
        if self.replicates == 0 {
            return Err(CliError::config("replicates", "must be at least 1"));
        }
        self.schedule.validate().map_err(|e| keyed("schedule", &e))?;
        if let DensityKind::TrigPerturbed { amplitude, frequency } = self.density {
            if frequency == 0 {
                return Err(CliError::config("density.frequency", "must be positive"));
            }
            if !(amplitude.abs() < 1.0) {
                return Err(CliError::config("density.amplitude", "must lie in (-1, 1)"));
            }
        }
        if self.k > 8 {
            return Err(CliError::config("k", "kernel orders above 8 are not supported"));
        }
        let p = self.pipeline()?;
        p.validate().map_err(|e| match e.root() {
            Error::InvalidParameter { name, reason } => {
                let key = match *name {
                    "resolution" => "estimator.resolution".to_string(),
                    n => n.to_string(),
                };
                CliError::config(key, reason.clone())
            }
            other => CliError::config("", other.to_string()),
        })?;
        p.density_spec().map_err(|e| keyed("density", &e))?;
        if let Some(r) = self.reference_resolution {
            if r < MIN_RESOLUTION {
                return Err(CliError::config("reference_resolution", format!("must be at least {MIN_RESOLUTION}")));
            }
        }
        if self.p != 1 && self.p != 2 {
            return Err(CliError::config("p", "must be 1 or 2"));
        }
        if self.transport.max_atoms == 0 {
            return Err(CliError::config("transport.max_atoms", "must be at least 1"));
        }
        if !(self.transport.start_cell > 0.0) || !self.transport.start_cell.is_finite() {
            return Err(CliError::config("transport.start_cell", "must be positive"));
        }
        Ok(())
    }
}

/// Parses and validates a config. A bare string for `manifold` is
/// shorthand for `{"kind": ...}`.
pub fn parse_config(text: &str) -> CliResult<ExperimentConfig> {
    let mut value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::config("", format!("invalid JSON: {e}")))?;
    if let Some(obj) = value.as_object_mut() {
        if let Some(serde_json::Value::String(s)) = obj.get("manifold") {
            let kind = s.clone();
            obj.insert("manifold".into(), serde_json::json!({ "kind": kind }));
        }
    }
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        CliError::config(path, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text)
}

/// Canonical serialization: every field written, pretty-printed.
pub fn config_bytes(cfg: &ExperimentConfig) -> Vec<u8> {
    crate::formats::to_json_bytes(cfg)
}

pub fn save_config(path: &Path, cfg: &ExperimentConfig) -> CliResult<()> {
    crate::formats::write_bytes(path, &config_bytes(cfg))
}
