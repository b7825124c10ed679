//! Experiment schedule: an ordered list of parameter sets to evaluate, each
//! parameter tagged with the strategy that will resolve it at run time.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{ParamValue, SearchSpace, SpaceError};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("plan is empty: need at least one explicit row, random set, or bayes set")]
    EmptyPlan,
    #[error("bayes_params contains `{0}`, which is not bayes-eligible in this space")]
    IneligibleBayesParam(String),
    #[error("explicit row {row}: {source}")]
    BadExplicitValue { row: usize, source: SpaceError },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// How one parameter of one planned set gets its value.
#[derive(Debug, Clone, PartialEq)]
pub enum StrategyTag {
    Explicit(ParamValue),
    Random,
    Bayes,
}

/// One planned parameter set: a strategy tag per space parameter, in space order.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanEntry {
    pub set_index: usize,
    pub tags: Vec<StrategyTag>,
}

impl PlanEntry {
    pub fn has_bayes(&self) -> bool {
        self.tags.iter().any(|t| matches!(t, StrategyTag::Bayes))
    }

    /// Names of bayes-tagged parameters, in space order.
    pub fn bayes_names(&self, space: &SearchSpace) -> Vec<String> {
        space
            .specs()
            .iter()
            .zip(&self.tags)
            .filter(|(_, t)| matches!(t, StrategyTag::Bayes))
            .map(|(s, _)| s.name.clone())
            .collect()
    }
}

/// The plan-building inputs, as written in a config file and archived with
/// every experiment. Building the same params against the same space always
/// yields the same plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanParams {
    #[serde(default)]
    pub explicit_rows: Vec<BTreeMap<String, ParamValue>>,
    #[serde(default)]
    pub n_random: usize,
    #[serde(default)]
    pub n_bayes: usize,
    /// Parameters the bayes sets optimize. Empty means all bayes-eligible.
    #[serde(default)]
    pub bayes_params: Vec<String>,
}

/// Fully materialized schedule with contiguous indices from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchPlan {
    entries: Vec<PlanEntry>,
}

impl SearchPlan {
    /// Explicit rows first (missing parameters default to random), then
    /// `n_random` all-random sets, then `n_bayes` sets with bayes on the
    /// selected parameters and random everywhere else.
    pub fn build(space: &SearchSpace, params: &PlanParams) -> Result<Self, PlanError> {
        let total = params.explicit_rows.len() + params.n_random + params.n_bayes;
        if total == 0 {
            return Err(PlanError::EmptyPlan);
        }

        let eligible = space.bayes_eligible_names();
        let bayes_params: Vec<String> = if params.bayes_params.is_empty() {
            eligible.clone()
        } else {
            params.bayes_params.clone()
        };
        for name in &bayes_params {
            if !eligible.contains(name) {
                return Err(PlanError::IneligibleBayesParam(name.clone()));
            }
        }

        let mut entries = Vec::with_capacity(total);

        for (row_idx, row) in params.explicit_rows.iter().enumerate() {
            if let Some(unknown) = row.keys().find(|k| space.index_of(k).is_none()) {
                return Err(PlanError::BadExplicitValue {
                    row: row_idx,
                    source: SpaceError::UnknownParameter(unknown.clone()),
                });
            }
            let tags = space
                .specs()
                .iter()
                .map(|spec| match row.get(&spec.name) {
                    Some(v) => {
                        validate_explicit(space, &spec.name, v)
                            .map(|_| StrategyTag::Explicit(v.clone()))
                    }
                    None => Ok(StrategyTag::Random),
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(|source| PlanError::BadExplicitValue {
                    row: row_idx,
                    source,
                })?;
            entries.push(PlanEntry {
                set_index: entries.len(),
                tags,
            });
        }

        for _ in 0..params.n_random {
            entries.push(PlanEntry {
                set_index: entries.len(),
                tags: vec![StrategyTag::Random; space.len()],
            });
        }

        for _ in 0..params.n_bayes {
            let tags = space
                .specs()
                .iter()
                .map(|spec| {
                    if bayes_params.contains(&spec.name) {
                        StrategyTag::Bayes
                    } else {
                        StrategyTag::Random
                    }
                })
                .collect();
            entries.push(PlanEntry {
                set_index: entries.len(),
                tags,
            });
        }

        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[PlanEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn validate_explicit(
    space: &SearchSpace,
    name: &str,
    value: &ParamValue,
) -> Result<(), SpaceError> {
    // Reuse full-set validation on a synthetic set carrying this one value
    // would be clumsy; check the single spec directly instead.
    let spec = space
        .spec(name)
        .ok_or_else(|| SpaceError::UnknownParameter(name.to_string()))?;
    use crate::space::ParameterKind::*;
    let ok = match (&spec.kind, value) {
        (Continuous { low, high }, ParamValue::Num(v)) => {
            v.is_finite() && *v >= *low && *v <= *high
        }
        (Discrete { values }, ParamValue::Num(v)) => values.contains(v),
        (Categorical { values }, ParamValue::Text(s)) | (Opaque { values }, ParamValue::Text(s)) => {
            values.contains(s)
        }
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(SpaceError::InvalidValue {
            name: name.to_string(),
            value: value.to_wire(),
        })
    }
}
