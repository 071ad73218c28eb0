//! Scenario configuration (JSON).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blowup::{NeckDetectorConfig, DEFAULT_EVENT_FACTOR};
use crate::error::{LabError, Result};
use crate::homogeneous::{self, HomogeneousMetric};
use crate::warped::{make_dumbbell, make_round, AdaptiveGauge, Gauge};

/// Environment variable that re-roots relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "RICCI_LAB_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Warped,
    Homogeneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Scenario {
    Round { r: f64 },
    Dumbbell { a: f64, w: f64 },
    Berger { a: f64, b: f64, c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum GaugeConfig {
    Fixed,
    Frozen,
    Adaptive {
        relax: Option<f64>,
        uniform_weight: Option<f64>,
        smoothing: Option<usize>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    backend: Option<Backend>,
    scenario: Scenario,
    n: Option<usize>,
    sigma: Option<f64>,
    curvature_cap: Option<f64>,
    max_steps: Option<usize>,
    max_dt: Option<f64>,
    gauge: Option<GaugeConfig>,
    epsilon: Option<f64>,
    min_neck_multiples: Option<f64>,
    energy_ceiling_factor: Option<f64>,
    event_factor: Option<f64>,
    output_dir: Option<PathBuf>,
    emit_snapshots_every: Option<usize>,
    series_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub backend: Backend,
    pub scenario: Scenario,
    pub n: usize,
    pub sigma: f64,
    /// `None` means `1e6 (sup|Rm|_0 + 1)`.
    pub curvature_cap: Option<f64>,
    pub max_steps: usize,
    /// Extra step bound for the homogeneous backend.
    pub max_dt: Option<f64>,
    pub gauge: Gauge,
    pub detector: NeckDetectorConfig,
    pub energy_ceiling_factor: f64,
    pub event_factor: f64,
    pub output_dir: PathBuf,
    /// Write a profile snapshot every this many steps; 0 writes only the final one.
    pub emit_snapshots_every: usize,
    /// Write every k-th row of the time series (the last row is always written).
    pub series_every: usize,
}

pub const DEFAULT_N: usize = 400;
pub const DEFAULT_SIGMA: f64 = 0.25;
pub const DEFAULT_MAX_STEPS: usize = 10_000_000;
pub const DEFAULT_CEILING_FACTOR: f64 = 5.0;
pub const DEFAULT_SERIES_EVERY: usize = 10;

fn cfg_err(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

/// Parses and validates a config. Syntax errors carry line and column.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| cfg_err(e.to_string()))?;
    validate(raw)
}

/// As [`parse_config`] for an already parsed JSON value.
pub fn config_from_value(v: serde_json::Value) -> Result<ScenarioConfig> {
    let raw: RawConfig = serde_json::from_value(v).map_err(|e| cfg_err(e.to_string()))?;
    validate(raw)
}

fn validate(raw: RawConfig) -> Result<ScenarioConfig> {
    let backend = match (raw.backend, raw.scenario) {
        (Some(b), _) => b,
        (None, Scenario::Berger { .. }) => Backend::Homogeneous,
        (None, _) => Backend::Warped,
    };
    let n = raw.n.unwrap_or(DEFAULT_N);
    match (backend, raw.scenario) {
        (Backend::Warped, Scenario::Round { r }) => drop(make_round(r, n)?),
        (Backend::Warped, Scenario::Dumbbell { a, w }) => drop(make_dumbbell(a, w, n)?),
        (Backend::Homogeneous, Scenario::Round { r }) => drop(HomogeneousMetric::new(r * r, r * r, r * r)?),
        (Backend::Homogeneous, Scenario::Berger { a, b, c }) => drop(HomogeneousMetric::new(a, b, c)?),
        (Backend::Warped, Scenario::Berger { .. }) => {
            return Err(cfg_err("scenario berger needs backend homogeneous"));
        }
        (Backend::Homogeneous, Scenario::Dumbbell { .. }) => {
            return Err(cfg_err("scenario dumbbell needs backend warped"));
        }
    }
    let sigma = raw.sigma.unwrap_or(match backend {
        Backend::Warped => DEFAULT_SIGMA,
        Backend::Homogeneous => homogeneous::DEFAULT_SIGMA,
    });
    if !(sigma > 0.0 && sigma <= 0.5) {
        return Err(cfg_err(format!("sigma must lie in (0, 0.5] (got {sigma})")));
    }
    if let Some(cap) = raw.curvature_cap {
        if !(cap > 0.0) {
            return Err(cfg_err(format!("curvature_cap must be > 0 (got {cap})")));
        }
    }
    if let Some(dt) = raw.max_dt {
        if !(dt > 0.0) {
            return Err(cfg_err(format!("max_dt must be > 0 (got {dt})")));
        }
    }
    let detector = NeckDetectorConfig::new(raw.epsilon.unwrap_or(0.1), raw.min_neck_multiples.unwrap_or(2.0))?;
    let energy_ceiling_factor = raw.energy_ceiling_factor.unwrap_or(DEFAULT_CEILING_FACTOR);
    if !(energy_ceiling_factor > 0.0) {
        return Err(cfg_err(format!(
            "energy_ceiling_factor must be > 0 (got {energy_ceiling_factor})"
        )));
    }
    let event_factor = raw.event_factor.unwrap_or(DEFAULT_EVENT_FACTOR);
    if !(event_factor > 1.0) {
        return Err(cfg_err(format!("event_factor must be > 1 (got {event_factor})")));
    }
    let series_every = raw.series_every.unwrap_or(DEFAULT_SERIES_EVERY);
    if series_every == 0 {
        return Err(cfg_err("series_every must be >= 1"));
    }
    let gauge = match raw.gauge {
        None => Gauge::default(),
        Some(GaugeConfig::Fixed) => Gauge::Fixed,
        Some(GaugeConfig::Frozen) => Gauge::Frozen,
        Some(GaugeConfig::Adaptive {
            relax,
            uniform_weight,
            smoothing,
        }) => {
            let d = AdaptiveGauge::default();
            let g = AdaptiveGauge {
                relax: relax.unwrap_or(d.relax),
                uniform_weight: uniform_weight.unwrap_or(d.uniform_weight),
                smoothing: smoothing.unwrap_or(d.smoothing),
            };
            if !(g.relax > 0.0 && g.uniform_weight > 0.0) {
                return Err(cfg_err("gauge relax and uniform_weight must be > 0"));
            }
            Gauge::Adaptive(g)
        }
    };
    Ok(ScenarioConfig {
        backend,
        scenario: raw.scenario,
        n,
        sigma,
        curvature_cap: raw.curvature_cap,
        max_steps: raw.max_steps.unwrap_or(DEFAULT_MAX_STEPS),
        max_dt: raw.max_dt,
        gauge,
        detector,
        energy_ceiling_factor,
        event_factor,
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        emit_snapshots_every: raw.emit_snapshots_every.unwrap_or(0),
        series_every,
    })
}

/// Joins a relative `dir` onto `$RICCI_LAB_OUTPUT_ROOT` when that is set.
pub fn resolve_output_dir(dir: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if dir.is_relative() => Path::new(&root).join(dir),
        _ => dir.to_path_buf(),
    }
}
