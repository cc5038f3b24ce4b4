//! Experiment configuration and data-directory lookup.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use takeover_core::arbitrator::{Disengagement, TakeoverTarget};
use takeover_core::driver::{default_population, DriverParams};
use takeover_core::expert::{load_trace, ExpertTrace};
use takeover_core::metrics::MetricsConfig;
use takeover_core::scenario::{builtin_route, ScenarioSpec};

/// Environment variable naming the data directory.
pub const DATA_ENV: &str = "TAKEOVER_SIM_DATA";

pub fn data_dir() -> PathBuf {
    std::env::var_os(DATA_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

/// Drivers of an experiment: the built-in reaction-time grid, or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DriverSet {
    Preset(String),
    List(Vec<DriverParams<f64>>),
}

impl Default for DriverSet {
    fn default() -> Self {
        Self::Preset("default".into())
    }
}

impl DriverSet {
    pub fn resolve(&self) -> Result<Vec<DriverParams<f64>>> {
        match self {
            Self::Preset(p) if p == "default" => Ok(default_population()),
            Self::Preset(p) => bail!("unknown driver preset {p:?} (expected \"default\" or a list)"),
            Self::List(v) => {
                for d in v {
                    d.validate().map_err(anyhow::Error::msg)?;
                }
                let mut ids: Vec<&str> = v.iter().map(|d| d.id.as_str()).collect();
                ids.sort_unstable();
                if ids.windows(2).any(|w| w[0] == w[1]) {
                    bail!("driver ids must be unique");
                }
                Ok(v.clone())
            }
        }
    }
}

fn default_routes() -> Vec<String> {
    vec!["route-a".into(), "route-b".into()]
}

fn default_strategies() -> Vec<TakeoverTarget> {
    vec![TakeoverTarget::Shared, TakeoverTarget::Manual]
}

fn default_disengagements() -> Vec<Disengagement> {
    vec![Disengagement::Ordinary, Disengagement::Urgent]
}

fn one() -> usize {
    1
}

fn half() -> f64 {
    0.5
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Route names (looked up under `<data>/scenarios/`, then built in) or TOML paths.
    #[serde(default = "default_routes")]
    pub routes: Vec<String>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<TakeoverTarget>,
    #[serde(default = "default_disengagements")]
    pub disengagements: Vec<Disengagement>,
    #[serde(default)]
    pub drivers: DriverSet,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Automation weight in shared mode.
    #[serde(default = "half")]
    pub alpha: f64,
    /// Give every driver seeded pedal noise, varying across repetitions.
    #[serde(default)]
    pub driver_noise: bool,
    /// Directory of expert traces; `<data>/traces` when unset.
    #[serde(default)]
    pub trace_dir: Option<PathBuf>,
    /// Record missing traces with the synthetic expert instead of failing.
    #[serde(default)]
    pub synthesize_traces: bool,
    #[serde(default)]
    pub metrics: MetricsConfig<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).context("parsing experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.routes.is_empty() || self.strategies.is_empty() || self.disengagements.is_empty() {
            bail!("routes, strategies and disengagements must all be non-empty");
        }
        if self.repetitions == 0 {
            bail!("repetitions must be >= 1");
        }
        if self.drivers.resolve()?.is_empty() {
            bail!("at least one driver is required");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            bail!("alpha must lie in [0, 1]");
        }
        self.metrics.validate()?;
        Ok(())
    }

    pub fn trace_dir(&self) -> PathBuf {
        self.trace_dir.clone().unwrap_or_else(|| data_dir().join("traces"))
    }
}

/// Resolves a route reference: an explicit `.toml` path, a file under
/// `<data>/scenarios/`, or a built-in route name.
pub fn load_route(name: &str) -> Result<ScenarioSpec<f64>> {
    let explicit = Path::new(name);
    if name.ends_with(".toml") || explicit.components().count() > 1 {
        let text = std::fs::read_to_string(explicit).with_context(|| format!("reading route {name}"))?;
        return ScenarioSpec::from_toml_str(&text).with_context(|| format!("in route {name}"));
    }
    let in_data = data_dir().join("scenarios").join(format!("{name}.toml"));
    if in_data.is_file() {
        let text = std::fs::read_to_string(&in_data)?;
        return ScenarioSpec::from_toml_str(&text).with_context(|| format!("in {}", in_data.display()));
    }
    builtin_route(name).with_context(|| format!("unknown route {name:?}"))
}

/// File name of the expert trace recorded for a route and disengagement type.
pub fn trace_file_name(route: &str, d: Disengagement) -> String {
    format!("{route}-{}.csv", d.as_str().to_ascii_lowercase())
}

pub fn load_trace_file(path: &Path) -> Result<ExpertTrace<f64>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading expert trace {}", path.display()))?;
    load_trace(&bytes).with_context(|| format!("in expert trace {}", path.display()))
}
