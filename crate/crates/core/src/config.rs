//! Run configuration (JSON).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::cumulant::{IntegrationSpec, Order};
use crate::error::{Error, Result};
use crate::lattice::{Dimension, Vec3};
use crate::ode::Tolerances;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_ENSEMBLE_SAMPLES: usize = 100;
pub const DEFAULT_TRAJECTORIES: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub geometry: GeometrySpec,
    #[serde(default = "default_dipole")]
    pub dipole: Vec3,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub disorder: DisorderConfig,
    #[serde(default)]
    pub method: MethodSpec,
    #[serde(default)]
    pub integration: IntegrationConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_dipole() -> Vec3 {
    crate::couplings::DEFAULT_DIPOLE
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    #[serde(rename = "type")]
    pub kind: Dimension,
    pub n: usize,
    pub a: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialMode {
    #[default]
    Full,
    Partial,
    Filling,
}

impl InitialMode {
    pub fn as_str(self) -> &'static str {
        match self {
            InitialMode::Full => "full",
            InitialMode::Partial => "partial",
            InitialMode::Filling => "filling",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default)]
    pub mode: InitialMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_exc: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderConfig {
    /// Standard deviation in units of the spacing.
    #[serde(default)]
    pub sigma: f64,
    /// Ensemble size; defaults depend on whether anything is random.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    #[default]
    Cumulant,
    Mcwf,
    Lindblad,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    #[serde(default)]
    pub kind: MethodKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Order>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_traj: Option<usize>,
}

impl MethodSpec {
    pub fn order(&self) -> Order {
        self.order.unwrap_or(Order::Second)
    }

    pub fn n_traj(&self) -> usize {
        self.n_traj.unwrap_or(DEFAULT_TRAJECTORIES)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationConfig {
    #[serde(default = "d_t_max")]
    pub t_max: f64,
    #[serde(default = "d_sample_dt")]
    pub sample_dt: f64,
    #[serde(default = "d_rtol")]
    pub rtol: f64,
    #[serde(default = "d_atol")]
    pub atol: f64,
}

fn d_t_max() -> f64 {
    10.0
}
fn d_sample_dt() -> f64 {
    1e-2
}
fn d_rtol() -> f64 {
    1e-6
}
fn d_atol() -> f64 {
    1e-9
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self { t_max: d_t_max(), sample_dt: d_sample_dt(), rtol: d_rtol(), atol: d_atol() }
    }
}

impl IntegrationConfig {
    pub fn spec(&self) -> IntegrationSpec {
        IntegrationSpec { t_max: self.t_max, sample_dt: self.sample_dt, tol: Tolerances { rtol: self.rtol, atol: self.atol } }
    }
}

fn config_error(pointer: &str, message: impl Into<String>) -> Error {
    Error::Config { pointer: pointer.to_string(), message: message.into() }
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => {}
        }
    }
    out
}

impl RunConfig {
    /// Parse and validate a JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let pointer = json_pointer(e.path());
            config_error(&pointer, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        Self::from_json(&value.to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Canonical compact serialization, used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_error(
                "/schema_version",
                format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        let g = &self.geometry;
        if g.n == 0 {
            return Err(config_error("/geometry/n", "emitter count must be at least 1"));
        }
        if !(g.a > 0.0) || !g.a.is_finite() {
            return Err(config_error("/geometry/a", "spacing must be positive"));
        }
        if g.kind == Dimension::Square {
            let side = (g.n as f64).sqrt().round() as usize;
            if side * side != g.n {
                return Err(config_error("/geometry/n", format!("square lattice needs a perfect-square n, got {}", g.n)));
            }
        }
        if self.dipole.iter().all(|&x| x == 0.0) || self.dipole.iter().any(|x| !x.is_finite()) {
            return Err(config_error("/dipole", "dipole orientation must be a finite nonzero vector"));
        }
        let i = &self.initial;
        match i.mode {
            InitialMode::Full => {
                if i.n_exc.is_some() || i.eta.is_some() {
                    return Err(config_error("/initial", "mode \"full\" takes neither n_exc nor eta"));
                }
            }
            InitialMode::Partial => {
                let Some(k) = i.n_exc else {
                    return Err(config_error("/initial/n_exc", "mode \"partial\" requires n_exc"));
                };
                if k > g.n {
                    return Err(config_error("/initial/n_exc", format!("n_exc = {k} exceeds n = {}", g.n)));
                }
                if i.eta.is_some() {
                    return Err(config_error("/initial/eta", "mode \"partial\" does not take eta"));
                }
            }
            InitialMode::Filling => {
                let Some(eta) = i.eta else {
                    return Err(config_error("/initial/eta", "mode \"filling\" requires eta"));
                };
                if !(eta > 0.0 && eta <= 1.0) {
                    return Err(config_error("/initial/eta", "filling fraction must lie in (0, 1]"));
                }
                if self.n_filled() == 0 {
                    return Err(config_error("/initial/eta", "filling fraction leaves no emitters"));
                }
                if i.n_exc.is_some() {
                    return Err(config_error("/initial/n_exc", "mode \"filling\" does not take n_exc"));
                }
            }
        }
        if !(self.disorder.sigma >= 0.0) || !self.disorder.sigma.is_finite() {
            return Err(config_error("/disorder/sigma", "disorder width must be non-negative"));
        }
        if self.disorder.n_samples == Some(0) {
            return Err(config_error("/disorder/n_samples", "n_samples must be at least 1"));
        }
        let m = &self.method;
        if m.kind != MethodKind::Cumulant && m.order.is_some() {
            return Err(config_error("/method/order", "order applies only to kind \"cumulant\""));
        }
        if m.kind != MethodKind::Mcwf && m.n_traj.is_some() {
            return Err(config_error("/method/n_traj", "n_traj applies only to kind \"mcwf\""));
        }
        if m.n_traj == Some(0) {
            return Err(config_error("/method/n_traj", "n_traj must be at least 1"));
        }
        let it = &self.integration;
        for (name, v) in [("t_max", it.t_max), ("sample_dt", it.sample_dt), ("rtol", it.rtol), ("atol", it.atol)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(config_error(&format!("/integration/{name}"), format!("{name} must be positive")));
            }
        }
        if it.sample_dt > it.t_max {
            return Err(config_error("/integration/sample_dt", "sample_dt exceeds t_max"));
        }
        Ok(())
    }

    /// Whether any per-sample randomness is involved.
    pub fn is_random(&self) -> bool {
        self.initial.mode != InitialMode::Full || self.disorder.sigma > 0.0
    }

    pub fn n_samples(&self) -> usize {
        self.disorder.n_samples.unwrap_or(if self.is_random() { DEFAULT_ENSEMBLE_SAMPLES } else { 1 })
    }

    /// Emitters present on the lattice (all sites unless a filling fraction is set).
    pub fn n_filled(&self) -> usize {
        match (self.initial.mode, self.initial.eta) {
            (InitialMode::Filling, Some(eta)) => (eta * self.geometry.n as f64).round() as usize,
            _ => self.geometry.n,
        }
    }

    /// Initially excited emitters.
    pub fn n_exc(&self) -> usize {
        match self.initial.mode {
            InitialMode::Full => self.geometry.n,
            InitialMode::Partial => self.initial.n_exc.unwrap_or(self.geometry.n),
            InitialMode::Filling => self.n_filled(),
        }
    }

    /// Value reported in the `param` column of summaries.
    pub fn mode_param(&self) -> Option<f64> {
        match self.initial.mode {
            InitialMode::Full => None,
            InitialMode::Partial => Some(self.n_exc() as f64 / self.geometry.n as f64),
            InitialMode::Filling => self.initial.eta,
        }
    }

    pub fn minimal(kind: Dimension, n: usize, a: f64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            geometry: GeometrySpec { kind, n, a },
            dipole: default_dipole(),
            initial: InitialSpec::default(),
            disorder: DisorderConfig::default(),
            method: MethodSpec::default(),
            integration: IntegrationConfig::default(),
            seed: 0,
            output_dir: default_output_dir(),
        }
    }
}
