//! Experiment configuration: strict TOML parsing into a validated
//! [`ExperimentConfig`], with flag overrides layered on top. Unknown keys
//! are rejected, and the seed must be explicit; there is no wall-clock
//! fallback.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;
use thiserror::Error;

use crate::acquisition::AcquisitionConfig;
use crate::engine::ExperimentConfig;
use crate::plan::{PlanParams, SearchPlan};
use crate::space::{ParamValue, ParameterSpec, SearchSpace};
use crate::targets::{build_target, TargetSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read `{path}`: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Toml(Box<toml::de::Error>),
    #[error("config key `{key}`: {message}")]
    Semantic { key: String, message: String },
}

impl ConfigError {
    fn semantic(key: &str, message: impl Into<String>) -> Self {
        Self::Semantic {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub repetitions: Option<u32>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    workers: Option<usize>,
    repetitions: Option<u32>,
    output_dir: Option<PathBuf>,
    #[serde(default)]
    parameter: Vec<RawParameter>,
    plan: Option<RawPlan>,
    target: Option<RawTarget>,
    acquisition: Option<RawAcquisition>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParameter {
    name: String,
    kind: String,
    low: Option<f64>,
    high: Option<f64>,
    values: Option<toml::Value>,
    bayes_eligible: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    #[serde(default)]
    explicit: Vec<toml::Table>,
    n_random: Option<usize>,
    n_bayes: Option<usize>,
    bayes_params: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTarget {
    kind: String,
    name: Option<String>,
    sleep_ms: Option<u64>,
    command: Option<String>,
    #[serde(default)]
    args: Vec<String>,
    timeout_ms: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAcquisition {
    xi: Option<f64>,
    n_candidates: Option<usize>,
    pending_radius: Option<f64>,
}

/// Parse a config file with no overrides. The file must be self-contained
/// (seed and output_dir present).
pub fn parse_config(path: &std::path::Path) -> Result<ExperimentConfig, ConfigError> {
    parse_config_with_overrides(path, &Overrides::default())
}

/// Parse a config file, apply flag overrides, and validate everything:
/// space invariants, plan shape, bayes eligibility, and target arity.
pub fn parse_config_with_overrides(
    path: &std::path::Path,
    overrides: &Overrides,
) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let raw: RawConfig = toml::from_str(&text).map_err(|e| ConfigError::Toml(Box::new(e)))?;
    resolve(raw, overrides)
}

fn resolve(raw: RawConfig, overrides: &Overrides) -> Result<ExperimentConfig, ConfigError> {
    let seed = overrides.seed.or(raw.seed).ok_or_else(|| {
        ConfigError::semantic(
            "seed",
            "an explicit seed is required; wall-clock defaults would make runs unreproducible",
        )
    })?;
    let workers = overrides.workers.or(raw.workers).unwrap_or(1);
    if workers == 0 {
        return Err(ConfigError::semantic("workers", "must be at least 1"));
    }
    let repetitions = overrides.repetitions.or(raw.repetitions).unwrap_or(1);
    if repetitions == 0 {
        return Err(ConfigError::semantic("repetitions", "must be at least 1"));
    }
    let output_dir = overrides
        .output_dir
        .clone()
        .or(raw.output_dir)
        .ok_or_else(|| {
            ConfigError::semantic("output_dir", "set it in the config or pass -o/--output-dir")
        })?;

    if raw.parameter.is_empty() {
        return Err(ConfigError::semantic(
            "parameter",
            "declare at least one [[parameter]]",
        ));
    }
    let specs = raw
        .parameter
        .into_iter()
        .map(parameter_spec)
        .collect::<Result<Vec<_>, _>>()?;
    let space = SearchSpace::new(specs)
        .map_err(|e| ConfigError::semantic("parameter", e.to_string()))?;

    let plan = plan_params(raw.plan, &space)?;
    // Materialize once so every plan-level error surfaces at parse time.
    SearchPlan::build(&space, &plan)
        .map_err(|e| ConfigError::semantic("plan", e.to_string()))?;

    let target = target_spec(raw.target)?;
    build_target(&target, &space)
        .map_err(|e| ConfigError::semantic("target", e.to_string()))?;

    let acquisition = acquisition_config(raw.acquisition)?;

    Ok(ExperimentConfig {
        space,
        plan,
        target,
        workers,
        seed,
        repetitions,
        acquisition,
        output_dir,
    })
}

fn parameter_spec(raw: RawParameter) -> Result<ParameterSpec, ConfigError> {
    let key = format!("parameter.{}", raw.name);
    let reject = |field: &str, kind: &str| -> ConfigError {
        ConfigError::semantic(&key, format!("`{field}` does not apply to kind `{kind}`"))
    };
    match raw.kind.as_str() {
        "continuous" => {
            if raw.values.is_some() {
                return Err(reject("values", "continuous"));
            }
            let low = raw
                .low
                .ok_or_else(|| ConfigError::semantic(&key, "continuous needs `low`"))?;
            let high = raw
                .high
                .ok_or_else(|| ConfigError::semantic(&key, "continuous needs `high`"))?;
            let mut spec = ParameterSpec::continuous(raw.name, low, high);
            if let Some(flag) = raw.bayes_eligible {
                spec.bayes_eligible = flag;
            }
            Ok(spec)
        }
        kind @ ("discrete" | "categorical" | "opaque") => {
            if raw.low.is_some() || raw.high.is_some() {
                return Err(reject("low/high", kind));
            }
            let values = raw
                .values
                .ok_or_else(|| ConfigError::semantic(&key, format!("{kind} needs `values`")))?;
            let toml::Value::Array(items) = values else {
                return Err(ConfigError::semantic(&key, "`values` must be an array"));
            };
            let mut spec = match kind {
                "discrete" => {
                    let nums = items
                        .iter()
                        .map(|v| numeric(v).ok_or_else(|| {
                            ConfigError::semantic(&key, "discrete values must be numbers")
                        }))
                        .collect::<Result<Vec<_>, _>>()?;
                    ParameterSpec::discrete(raw.name, nums)
                }
                _ => {
                    let strings = items
                        .iter()
                        .map(|v| match v {
                            toml::Value::String(s) => Ok(s.clone()),
                            _ => Err(ConfigError::semantic(
                                &key,
                                format!("{kind} values must be strings"),
                            )),
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    if kind == "categorical" {
                        ParameterSpec::categorical(raw.name, strings)
                    } else {
                        ParameterSpec::opaque(raw.name, strings)
                    }
                }
            };
            if let Some(flag) = raw.bayes_eligible {
                spec.bayes_eligible = flag;
            }
            Ok(spec)
        }
        other => Err(ConfigError::semantic(
            &key,
            format!("unknown kind `{other}` (continuous | discrete | categorical | opaque)"),
        )),
    }
}

fn numeric(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Integer(i) => Some(*i as f64),
        toml::Value::Float(f) => Some(*f),
        _ => None,
    }
}

fn plan_params(raw: Option<RawPlan>, space: &SearchSpace) -> Result<PlanParams, ConfigError> {
    let raw = raw.ok_or_else(|| ConfigError::semantic("plan", "missing [plan] table"))?;
    let mut explicit_rows = Vec::with_capacity(raw.explicit.len());
    for (row_idx, table) in raw.explicit.iter().enumerate() {
        let mut row = BTreeMap::new();
        for (name, value) in table {
            if space.index_of(name).is_none() {
                return Err(ConfigError::semantic(
                    &format!("plan.explicit[{row_idx}]"),
                    format!("unknown parameter `{name}`"),
                ));
            }
            let value = match value {
                toml::Value::Integer(i) => ParamValue::Num(*i as f64),
                toml::Value::Float(f) => ParamValue::Num(*f),
                toml::Value::String(s) => ParamValue::Text(s.clone()),
                other => {
                    return Err(ConfigError::semantic(
                        &format!("plan.explicit[{row_idx}].{name}"),
                        format!("unsupported value type `{}`", other.type_str()),
                    ))
                }
            };
            row.insert(name.clone(), value);
        }
        explicit_rows.push(row);
    }
    Ok(PlanParams {
        explicit_rows,
        n_random: raw.n_random.unwrap_or(0),
        n_bayes: raw.n_bayes.unwrap_or(0),
        bayes_params: raw.bayes_params.unwrap_or_default(),
    })
}

fn target_spec(raw: Option<RawTarget>) -> Result<TargetSpec, ConfigError> {
    let raw = raw.ok_or_else(|| ConfigError::semantic("target", "missing [target] table"))?;
    match raw.kind.as_str() {
        "builtin" => {
            if raw.command.is_some() || !raw.args.is_empty() || raw.timeout_ms.is_some() {
                return Err(ConfigError::semantic(
                    "target",
                    "`command`/`args`/`timeout_ms` do not apply to builtin targets",
                ));
            }
            Ok(TargetSpec::Builtin {
                name: raw
                    .name
                    .ok_or_else(|| ConfigError::semantic("target.name", "builtin needs `name`"))?,
                sleep_ms: raw.sleep_ms,
            })
        }
        "subprocess" => {
            if raw.name.is_some() || raw.sleep_ms.is_some() {
                return Err(ConfigError::semantic(
                    "target",
                    "`name`/`sleep_ms` do not apply to subprocess targets",
                ));
            }
            Ok(TargetSpec::Subprocess {
                command: raw.command.ok_or_else(|| {
                    ConfigError::semantic("target.command", "subprocess needs `command`")
                })?,
                args: raw.args,
                timeout_ms: raw.timeout_ms,
            })
        }
        other => Err(ConfigError::semantic(
            "target.kind",
            format!("unknown kind `{other}` (builtin | subprocess)"),
        )),
    }
}

fn acquisition_config(raw: Option<RawAcquisition>) -> Result<AcquisitionConfig, ConfigError> {
    let defaults = AcquisitionConfig::default();
    let Some(raw) = raw else {
        return Ok(defaults);
    };
    if let Some(xi) = raw.xi {
        if xi < 0.0 {
            return Err(ConfigError::semantic("acquisition.xi", "must be >= 0"));
        }
    }
    let n_candidates = raw.n_candidates.unwrap_or(defaults.n_candidates);
    if n_candidates == 0 {
        return Err(ConfigError::semantic(
            "acquisition.n_candidates",
            "must be at least 1",
        ));
    }
    let pending_radius = raw.pending_radius.unwrap_or(defaults.pending_radius);
    if pending_radius < 0.0 {
        return Err(ConfigError::semantic(
            "acquisition.pending_radius",
            "must be >= 0",
        ));
    }
    Ok(AcquisitionConfig {
        xi: raw.xi.or(defaults.xi),
        n_candidates,
        pending_radius,
    })
}
