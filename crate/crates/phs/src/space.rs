//! Parameter search space: declaration, random sampling, and mapping of
//! continuous parameters between native units and the unit cube.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("search space must declare at least one parameter")]
    EmptySpace,
    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),
    #[error("parameter name `{0}` is not a valid identifier ([A-Za-z_][A-Za-z0-9_]*)")]
    InvalidName(String),
    #[error("parameter `{name}`: bounds must be finite with low < high (got {low} .. {high})")]
    InvalidBounds { name: String, low: f64, high: f64 },
    #[error("parameter `{0}`: value set must not be empty")]
    EmptyValues(String),
    #[error("parameter `{0}`: empty strings are not allowed in value sets")]
    EmptyString(String),
    #[error("parameter `{0}`: discrete values must be finite and strictly increasing")]
    BadDiscreteValues(String),
    #[error("parameter `{0}`: only continuous parameters can be bayes-eligible")]
    IneligibleBayes(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("missing value for parameter `{0}`")]
    MissingValue(String),
    #[error("value {value} for parameter `{name}` violates its declared kind or bounds")]
    InvalidValue { name: String, value: String },
    #[error("space has no bayes-eligible parameters")]
    NoBayesParameters,
}

/// The kind of a single search parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParameterKind {
    /// Real-valued on a closed interval.
    Continuous { low: f64, high: f64 },
    /// Finite, strictly increasing set of numeric values.
    Discrete { values: Vec<f64> },
    /// Finite set of labels.
    Categorical { values: Vec<String> },
    /// Finite set of strings forwarded verbatim to the target,
    /// never interpreted numerically.
    Opaque { values: Vec<String> },
}

impl ParameterKind {
    pub fn is_continuous(&self) -> bool {
        matches!(self, ParameterKind::Continuous { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            ParameterKind::Continuous { .. } => "continuous",
            ParameterKind::Discrete { .. } => "discrete",
            ParameterKind::Categorical { .. } => "categorical",
            ParameterKind::Opaque { .. } => "opaque",
        }
    }
}

/// One declared parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ParameterKind,
    pub bayes_eligible: bool,
}

impl ParameterSpec {
    /// Continuous parameter, bayes-eligible by default.
    pub fn continuous(name: impl Into<String>, low: f64, high: f64) -> Self {
        Self {
            name: name.into(),
            kind: ParameterKind::Continuous { low, high },
            bayes_eligible: true,
        }
    }

    pub fn discrete(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            kind: ParameterKind::Discrete { values },
            bayes_eligible: false,
        }
    }

    pub fn categorical(name: impl Into<String>, values: Vec<String>) -> Self {
        Self {
            name: name.into(),
            kind: ParameterKind::Categorical { values },
            bayes_eligible: false,
        }
    }

    pub fn opaque(name: impl Into<String>, values: Vec<String>) -> Self {
        Self {
            name: name.into(),
            kind: ParameterKind::Opaque { values },
            bayes_eligible: false,
        }
    }

    fn validate(&self) -> Result<(), SpaceError> {
        if !is_identifier(&self.name) {
            return Err(SpaceError::InvalidName(self.name.clone()));
        }
        match &self.kind {
            ParameterKind::Continuous { low, high } => {
                if !low.is_finite() || !high.is_finite() || low >= high {
                    return Err(SpaceError::InvalidBounds {
                        name: self.name.clone(),
                        low: *low,
                        high: *high,
                    });
                }
            }
            ParameterKind::Discrete { values } => {
                if values.is_empty() {
                    return Err(SpaceError::EmptyValues(self.name.clone()));
                }
                let ordered = values.windows(2).all(|w| w[0] < w[1]);
                if !ordered || values.iter().any(|v| !v.is_finite()) {
                    return Err(SpaceError::BadDiscreteValues(self.name.clone()));
                }
            }
            ParameterKind::Categorical { values } | ParameterKind::Opaque { values } => {
                if values.is_empty() {
                    return Err(SpaceError::EmptyValues(self.name.clone()));
                }
                // An empty string cannot be told apart from a missing value
                // in the trial file.
                if values.iter().any(|v| v.is_empty()) {
                    return Err(SpaceError::EmptyString(self.name.clone()));
                }
            }
        }
        if self.bayes_eligible && !self.kind.is_continuous() {
            return Err(SpaceError::IneligibleBayes(self.name.clone()));
        }
        Ok(())
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A resolved value for one parameter, in native units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Num(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            ParamValue::Num(v) => Some(*v),
            ParamValue::Text(_) => None,
        }
    }

    /// Wire form: shortest round-trip decimal for numbers, verbatim text otherwise.
    pub fn to_wire(&self) -> String {
        match self {
            ParamValue::Num(v) => format!("{v}"),
            ParamValue::Text(s) => s.clone(),
        }
    }
}

impl std::fmt::Display for ParamValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_wire())
    }
}

/// One complete assignment of values to all parameters, in space order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    values: Vec<ParamValue>,
}

impl ParameterSet {
    pub fn new(values: Vec<ParamValue>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[ParamValue] {
        &self.values
    }

    pub fn value<'a>(&'a self, space: &SearchSpace, name: &str) -> Option<&'a ParamValue> {
        space.index_of(name).map(|i| &self.values[i])
    }
}

/// Validated, ordered collection of parameter specs. Immutable after
/// construction; shared read-only across workers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ParameterSpec>", into = "Vec<ParameterSpec>")]
pub struct SearchSpace {
    specs: Vec<ParameterSpec>,
}

impl TryFrom<Vec<ParameterSpec>> for SearchSpace {
    type Error = SpaceError;
    fn try_from(specs: Vec<ParameterSpec>) -> Result<Self, SpaceError> {
        SearchSpace::new(specs)
    }
}

impl From<SearchSpace> for Vec<ParameterSpec> {
    fn from(space: SearchSpace) -> Self {
        space.specs
    }
}

impl SearchSpace {
    pub fn new(specs: Vec<ParameterSpec>) -> Result<Self, SpaceError> {
        if specs.is_empty() {
            return Err(SpaceError::EmptySpace);
        }
        for (i, spec) in specs.iter().enumerate() {
            spec.validate()?;
            if specs[..i].iter().any(|s| s.name == spec.name) {
                return Err(SpaceError::DuplicateName(spec.name.clone()));
            }
        }
        Ok(Self { specs })
    }

    pub fn specs(&self) -> &[ParameterSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }

    pub fn spec(&self, name: &str) -> Option<&ParameterSpec> {
        self.specs.iter().find(|s| s.name == name)
    }

    /// Names of parameters eligible for surrogate-based search, in space order.
    pub fn bayes_eligible_names(&self) -> Vec<String> {
        self.specs
            .iter()
            .filter(|s| s.bayes_eligible)
            .map(|s| s.name.clone())
            .collect()
    }

    /// Draw one value for the parameter at `index`, uniformly over its domain.
    pub fn sample_value<R: Rng>(&self, index: usize, rng: &mut R) -> ParamValue {
        match &self.specs[index].kind {
            ParameterKind::Continuous { low, high } => {
                ParamValue::Num(rng.random_range(*low..=*high))
            }
            ParameterKind::Discrete { values } => {
                ParamValue::Num(values[rng.random_range(0..values.len())])
            }
            ParameterKind::Categorical { values } | ParameterKind::Opaque { values } => {
                ParamValue::Text(values[rng.random_range(0..values.len())].clone())
            }
        }
    }

    /// Draw a full parameter set uniformly at random, in space order.
    pub fn sample_random<R: Rng>(&self, rng: &mut R) -> ParameterSet {
        let values = (0..self.specs.len())
            .map(|i| self.sample_value(i, rng))
            .collect();
        ParameterSet::new(values)
    }

    /// Check a set against every spec's kind and bounds.
    pub fn validate_set(&self, set: &ParameterSet) -> Result<(), SpaceError> {
        if set.values().len() != self.specs.len() {
            let missing = self
                .specs
                .get(set.values().len())
                .map(|s| s.name.clone())
                .unwrap_or_default();
            return Err(SpaceError::MissingValue(missing));
        }
        for (spec, value) in self.specs.iter().zip(set.values()) {
            self.validate_value(spec, value)?;
        }
        Ok(())
    }

    fn validate_value(&self, spec: &ParameterSpec, value: &ParamValue) -> Result<(), SpaceError> {
        let ok = match (&spec.kind, value) {
            (ParameterKind::Continuous { low, high }, ParamValue::Num(v)) => {
                v.is_finite() && *v >= *low && *v <= *high
            }
            (ParameterKind::Discrete { values }, ParamValue::Num(v)) => values.contains(v),
            (ParameterKind::Categorical { values }, ParamValue::Text(s))
            | (ParameterKind::Opaque { values }, ParamValue::Text(s)) => values.contains(s),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(SpaceError::InvalidValue {
                name: spec.name.clone(),
                value: value.to_wire(),
            })
        }
    }

    /// Map the named continuous parameters of `set` onto [0,1]^d, in space order.
    pub fn normalize_subset(
        &self,
        set: &ParameterSet,
        names: &[String],
    ) -> Result<Vec<f64>, SpaceError> {
        if let Some(unknown) = names.iter().find(|n| self.index_of(n).is_none()) {
            return Err(SpaceError::UnknownParameter(unknown.clone()));
        }
        let mut out = Vec::with_capacity(names.len());
        for (idx, spec) in self.specs.iter().enumerate() {
            if !names.contains(&spec.name) {
                continue;
            }
            let v = set.values()[idx]
                .as_num()
                .ok_or_else(|| SpaceError::MissingValue(spec.name.clone()))?;
            match &spec.kind {
                ParameterKind::Continuous { low, high } => {
                    out.push((v - low) / (high - low));
                }
                _ => return Err(SpaceError::IneligibleBayes(spec.name.clone())),
            }
        }
        Ok(out)
    }

    /// Unit-cube coordinates of all bayes-eligible parameters of `set`.
    pub fn normalize(&self, set: &ParameterSet) -> Result<Vec<f64>, SpaceError> {
        let names = self.bayes_eligible_names();
        if names.is_empty() {
            return Err(SpaceError::NoBayesParameters);
        }
        self.normalize_subset(set, &names)
    }

    /// Exact inverse of [`normalize_subset`](Self::normalize_subset): unit
    /// coordinates back to native values for the named parameters, clamped
    /// to the declared bounds.
    pub fn denormalize_subset(
        &self,
        unit: &[f64],
        names: &[String],
    ) -> Result<Vec<(String, f64)>, SpaceError> {
        if let Some(unknown) = names.iter().find(|n| self.index_of(n).is_none()) {
            return Err(SpaceError::UnknownParameter(unknown.clone()));
        }
        let mut out = Vec::with_capacity(names.len());
        let mut k = 0;
        for spec in &self.specs {
            if !names.contains(&spec.name) {
                continue;
            }
            match &spec.kind {
                ParameterKind::Continuous { low, high } => {
                    let u = unit.get(k).copied().unwrap_or(0.0);
                    let v = (low + u * (high - low)).clamp(*low, *high);
                    out.push((spec.name.clone(), v));
                    k += 1;
                }
                _ => return Err(SpaceError::IneligibleBayes(spec.name.clone())),
            }
        }
        Ok(out)
    }
}
