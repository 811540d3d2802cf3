//! JSON run configuration.
//!
//! A document has the sections `demand`, `transport`, `penalty`, `bounds`,
//! `control`, `montecarlo` and `output`. Only `demand.{kappa, sigma, y0,
//! mean}` and `transport.{lambda, horizon}` are required; every other field
//! has a default, and [`ParsedConfig::provenance`] records which ones were
//! filled in.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::control::{Bounds, Horizon, SolverChoice, UpdateSchedule};
use crate::demand::{MeanFunction, OUParams, Sinusoid};
use crate::error::Error;
use crate::montecarlo::{check_levels, Execution, MCConfig, Policy};
use crate::objective::PenaltyParams;
use crate::transport::GridSpec;

pub const REQUIRED_KEYS: [&str; 6] = [
    "demand.kappa",
    "demand.sigma",
    "demand.y0",
    "demand.mean",
    "transport.lambda",
    "transport.horizon",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed JSON at line {line}, column {column}: {reason}")]
    Syntax { line: usize, column: usize, reason: String },
    #[error("missing required keys: {}", .0.join(", "))]
    MissingKeys(Vec<String>),
    #[error("`{key}`: {reason}")]
    Field { key: String, reason: String },
    #[error("bad override `{0}`: expected key=value with a dotted key")]
    Override(String),
}

impl ConfigError {
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Field { key, .. } => Some(key),
            _ => None,
        }
    }

    fn field(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Field {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// Attaches the section prefix to a domain validation error.
    fn domain(section: &str, e: Error) -> Self {
        match e {
            Error::InvalidParameter { name, reason } => Self::field(format!("{section}.{name}"), reason),
            other => Self::field(section, other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    pub demand: DemandSection,
    pub transport: TransportSection,
    #[serde(default)]
    pub penalty: PenaltySection,
    #[serde(default)]
    pub bounds: BoundsSection,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub montecarlo: MonteCarloSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSection {
    pub kappa: f64,
    pub sigma: f64,
    pub y0: f64,
    pub mean: MeanSpec,
}

/// Either `offset + Σ sinusoids` or a `table` of `[t, μ]` knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sinusoids: Option<Vec<Sinusoid>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportSection {
    pub lambda: f64,
    pub horizon: f64,
    #[serde(default = "default_dx")]
    pub dx: f64,
    /// Defaults to `dx / lambda` (CFL number one).
    #[serde(default)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltySection {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    #[serde(default)]
    pub u_min: f64,
    #[serde(default)]
    pub u_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    /// Number of equal CM2 update intervals; ignored if `update_times` is set.
    #[serde(default = "default_intervals")]
    pub update_intervals: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub update_times: Option<Vec<f64>>,
    #[serde(default)]
    pub solver: SolverChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_levels")]
    pub band_levels: Vec<f64>,
    /// Path index whose CM2 run is written to the trace and band tables.
    #[serde(default = "default_display_path")]
    pub display_path: u64,
}

fn default_dx() -> f64 {
    0.1
}
fn default_alpha() -> f64 {
    1.0
}
fn default_intervals() -> usize {
    5
}
fn default_paths() -> usize {
    1000
}
fn default_seed() -> u64 {
    1
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_levels() -> Vec<f64> {
    vec![0.5, 0.9, 0.99]
}
fn default_display_path() -> u64 {
    1
}

macro_rules! section_default {
    ($t:ty) => {
        impl Default for $t {
            fn default() -> Self {
                serde_json::from_value(Value::Object(Default::default())).expect("all fields defaulted")
            }
        }
    };
}
section_default!(PenaltySection);
section_default!(BoundsSection);
section_default!(ControlSection);
section_default!(MonteCarloSection);
section_default!(OutputSection);

/// Fully validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// The resolved document; serializing it reproduces this config.
    pub doc: ConfigDoc,
    pub demand: OUParams,
    pub grid: GridSpec,
    pub horizon: Horizon,
    pub penalty: PenaltyParams,
    pub bounds: Bounds,
    pub updates: UpdateSchedule,
    pub solver: SolverChoice,
}

impl RunConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.doc).expect("config serializes")
    }

    pub fn seed(&self) -> u64 {
        self.doc.montecarlo.seed
    }

    pub fn band_levels(&self) -> &[f64] {
        &self.doc.output.band_levels
    }

    pub fn out_dir(&self) -> &PathBuf {
        &self.doc.output.dir
    }

    pub fn display_path(&self) -> u64 {
        self.doc.output.display_path
    }

    pub fn mc_config(&self, policy: Policy) -> MCConfig {
        MCConfig {
            n_paths: self.doc.montecarlo.n_paths,
            seed: self.doc.montecarlo.seed,
            policy,
            band_levels: self.doc.output.band_levels.clone(),
            execution: self.doc.montecarlo.execution,
        }
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self, ConfigError> {
        let mut doc = self.doc.clone();
        doc.penalty.alpha = alpha;
        validate(doc)
    }
}

/// One resolved leaf of the configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub key: String,
    pub value: Value,
    pub defaulted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub config: RunConfig,
    pub provenance: Vec<Provenance>,
}

pub fn parse_config(text: &str) -> Result<ParsedConfig, ConfigError> {
    parse_with_overrides(text, &[])
}

/// Parses `text`, applies `key=value` overrides and validates the result.
pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<ParsedConfig, ConfigError> {
    let mut raw = read_value(text)?;
    for o in overrides {
        apply_override(&mut raw, o)?;
    }
    from_value(raw)
}

fn read_value(text: &str) -> Result<Value, ConfigError> {
    if text.trim().is_empty() {
        return Ok(Value::Object(Default::default()));
    }
    serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.line(),
        column: e.column(),
        reason: e.to_string(),
    })
}

fn lookup<'a>(v: &'a Value, key: &str) -> Option<&'a Value> {
    key.split('.').try_fold(v, |v, part| v.get(part))
}

fn apply_override(raw: &mut Value, spec: &str) -> Result<(), ConfigError> {
    let (key, value) = spec.split_once('=').ok_or_else(|| ConfigError::Override(spec.into()))?;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(spec.into()));
    }
    let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.into()));
    let mut node = raw;
    for part in &parts[..parts.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| ConfigError::field(key, "override path runs through a non-object"))?;
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    node.as_object_mut()
        .ok_or_else(|| ConfigError::field(key, "override path runs through a non-object"))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn from_value(raw: Value) -> Result<ParsedConfig, ConfigError> {
    if !raw.is_object() {
        return Err(ConfigError::field("<root>", "the document must be a JSON object"));
    }
    let missing: Vec<String> = REQUIRED_KEYS
        .iter()
        .filter(|k| lookup(&raw, k).is_none())
        .map(|k| k.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ConfigError::MissingKeys(missing));
    }
    let doc: ConfigDoc = serde_path_to_error::deserialize(raw.clone()).map_err(|e| {
        let key = e.path().to_string();
        ConfigError::field(key, e.into_inner().to_string())
    })?;
    let config = validate(doc)?;
    let resolved = serde_json::to_value(&config.doc).expect("config serializes");
    let mut provenance = Vec::new();
    collect_leaves(&resolved, String::new(), &mut |key, value| {
        provenance.push(Provenance {
            defaulted: lookup(&raw, &key).is_none(),
            key,
            value: value.clone(),
        })
    });
    Ok(ParsedConfig { config, provenance })
}

fn collect_leaves(v: &Value, prefix: String, f: &mut dyn FnMut(String, &Value)) {
    match v {
        Value::Object(m) => {
            for (k, child) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                collect_leaves(child, key, f);
            }
        }
        _ => f(prefix, v),
    }
}

fn mean_function(spec: &MeanSpec) -> Result<MeanFunction, ConfigError> {
    let key = "demand.mean";
    match (&spec.table, spec.offset, &spec.sinusoids) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => Err(ConfigError::field(
            key,
            "give either `table` or `offset`/`sinusoids`, not both",
        )),
        (Some(table), None, None) => {
            MeanFunction::tabulated(table.clone()).map_err(|e| ConfigError::field(format!("{key}.table"), e.to_string()))
        }
        (None, offset, sinusoids) => {
            let f = MeanFunction::Harmonic {
                offset: offset.unwrap_or(0.0),
                sinusoids: sinusoids.clone().unwrap_or_default(),
            };
            f.validate().map_err(|e| ConfigError::field(key, e.to_string()))?;
            Ok(f)
        }
    }
}

fn validate(mut doc: ConfigDoc) -> Result<RunConfig, ConfigError> {
    let d = &doc.demand;
    let demand = OUParams::new(d.kappa, d.sigma, d.y0, mean_function(&d.mean)?)
        .map_err(|e| ConfigError::domain("demand", e))?;

    let t = &doc.transport;
    if !(t.lambda > 0.0 && t.lambda.is_finite()) {
        return Err(ConfigError::field("transport.lambda", "lambda > 0 required"));
    }
    let horizon = Horizon::new(t.horizon, t.lambda).map_err(|e| ConfigError::field("transport.horizon", e.to_string()))?;
    let dt = t.dt.unwrap_or(t.dx / t.lambda);
    let grid = GridSpec::new(t.dx, t.lambda, dt, t.horizon).map_err(|e| ConfigError::domain("transport", e))?;
    doc.transport.dt = Some(dt);

    let penalty = PenaltyParams::new(doc.penalty.alpha).map_err(|e| ConfigError::domain("penalty", e))?;
    let bounds = Bounds::new(doc.bounds.u_min, doc.bounds.u_max).map_err(|e| ConfigError::domain("bounds", e))?;

    let c = &doc.control;
    let updates = match &c.update_times {
        Some(times) => UpdateSchedule::new(times.clone(), &grid),
        None => UpdateSchedule::uniform(c.update_intervals, &grid),
    }
    .map_err(|e| ConfigError::domain("control", e))?;
    if c.solver == SolverChoice::Pointwise && !grid.is_exact_shift() {
        return Err(ConfigError::field(
            "control.solver",
            "the pointwise solver needs dt = dx / lambda",
        ));
    }

    if doc.montecarlo.n_paths == 0 {
        return Err(ConfigError::field("montecarlo.n_paths", "n_paths >= 1 required"));
    }
    check_levels(&doc.output.band_levels).map_err(|e| ConfigError::domain("output", e))?;

    let solver = c.solver;
    Ok(RunConfig {
        doc,
        demand,
        grid,
        horizon,
        penalty,
        bounds,
        updates,
        solver,
    })
}
