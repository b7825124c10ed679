//! Append-only trial persistence.
//!
//! One experiment directory holds `trials.csv` (one durable row per finished
//! trial, flushed before the append is acknowledged, in completion order) and
//! `experiment.json` (config, seed, space, plan, and the completeness
//! marker). A missing `completed: true` marker identifies an interrupted
//! experiment.
//!
//! Floats are written as shortest round-trip decimals, so a load after a
//! persist reproduces every value bit-exactly.

use std::collections::HashSet;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::AcquisitionConfig;
use crate::plan::PlanParams;
use crate::space::{ParamValue, ParameterKind, SearchSpace};
use crate::targets::TargetSpec;

pub const TRIALS_FILE: &str = "trials.csv";
pub const EXPERIMENT_FILE: &str = "experiment.json";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("duplicate set_index {0}")]
    DuplicateIndex(usize),
    #[error("record has {got} values, space has {expected} parameters")]
    ShapeMismatch { got: usize, expected: usize },
    #[error("record {index} invalid: {reason}")]
    InvalidRecord { index: usize, reason: String },
    #[error("storage failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("storage failure: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path} line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("bad experiment.json: {0}")]
    BadSidecar(String),
    #[error("missing {0} in experiment directory")]
    MissingFile(String),
}

/// Which strategy actually produced a value at run time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Explicit,
    Random,
    Bayes,
    /// A bayes-tagged parameter resolved randomly because too few finished
    /// trials existed when the task started.
    RandomFallback,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Explicit => "explicit",
            Provenance::Random => "random",
            Provenance::Bayes => "bayes",
            Provenance::RandomFallback => "random-fallback",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "explicit" => Some(Provenance::Explicit),
            "random" => Some(Provenance::Random),
            "bayes" => Some(Provenance::Bayes),
            "random-fallback" => Some(Provenance::RandomFallback),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrialStatus {
    Ok,
    Failed,
}

impl TrialStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TrialStatus::Ok => "ok",
            TrialStatus::Failed => "failed",
        }
    }
}

/// One finished (or failed) evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub set_index: usize,
    /// Resolved values in space order; None only on failed records whose
    /// resolution itself errored.
    pub values: Vec<Option<ParamValue>>,
    pub provenance: Vec<Provenance>,
    pub repetition_results: Vec<f64>,
    /// Mean of the repetition results; None when the trial failed.
    pub result: Option<f64>,
    pub status: TrialStatus,
    pub diagnostic: Option<String>,
    pub worker_id: usize,
    /// UTC microseconds since the epoch.
    pub start_ts: i64,
    pub end_ts: i64,
}

impl TrialRecord {
    pub fn is_ok(&self) -> bool {
        self.status == TrialStatus::Ok
    }

    pub fn value(&self, space: &SearchSpace, name: &str) -> Option<&ParamValue> {
        space
            .index_of(name)
            .and_then(|i| self.values.get(i))
            .and_then(|v| v.as_ref())
    }

    pub fn num_value(&self, space: &SearchSpace, name: &str) -> Option<f64> {
        self.value(space, name).and_then(|v| v.as_num())
    }

    fn validate(&self, space: &SearchSpace) -> Result<(), StoreError> {
        let n = space.len();
        if self.values.len() != n || self.provenance.len() != n {
            return Err(StoreError::ShapeMismatch {
                got: self.values.len(),
                expected: n,
            });
        }
        if self.start_ts > self.end_ts {
            return Err(StoreError::InvalidRecord {
                index: self.set_index,
                reason: "start_ts > end_ts".into(),
            });
        }
        match (self.status, self.result) {
            (TrialStatus::Ok, Some(r)) if r.is_finite() => {}
            (TrialStatus::Ok, _) => {
                return Err(StoreError::InvalidRecord {
                    index: self.set_index,
                    reason: "ok record needs a finite result".into(),
                })
            }
            (TrialStatus::Failed, _) => {}
        }
        if self.status == TrialStatus::Ok && self.values.iter().any(|v| v.is_none()) {
            return Err(StoreError::InvalidRecord {
                index: self.set_index,
                reason: "ok record missing a resolved value".into(),
            });
        }
        Ok(())
    }
}

/// Lowest finite result among ok records; ties break toward the lowest
/// set_index. None when nothing succeeded.
pub fn best_trial(records: &[TrialRecord]) -> Option<&TrialRecord> {
    records
        .iter()
        .filter(|r| r.is_ok())
        .filter_map(|r| r.result.map(|v| (r, v)))
        .min_by(|(ra, va), (rb, vb)| {
            va.partial_cmp(vb)
                .unwrap()
                .then(ra.set_index.cmp(&rb.set_index))
        })
        .map(|(r, _)| r)
}

/// Everything archived alongside the trial rows; enough to replay the
/// experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentMeta {
    pub schema_version: u32,
    pub seed: u64,
    pub space: SearchSpace,
    pub plan: PlanParams,
    pub target: TargetSpec,
    pub workers: usize,
    pub repetitions: u32,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    #[serde(flatten)]
    meta: ExperimentMeta,
    completed: bool,
}

/// A store loaded back from disk.
#[derive(Debug)]
pub struct LoadedStore {
    pub meta: ExperimentMeta,
    pub records: Vec<TrialRecord>,
    pub completed: bool,
}

struct WriterState {
    writer: csv::Writer<File>,
    seen: HashSet<usize>,
}

/// Live store for a running experiment. Appends are serialized behind one
/// writer lock and flushed before returning; snapshots read a separate
/// in-memory copy and never touch the file.
pub struct TrialStore {
    dir: PathBuf,
    meta: ExperimentMeta,
    writer: Mutex<WriterState>,
    records: RwLock<Vec<TrialRecord>>,
}

impl TrialStore {
    /// Create a fresh store in `dir`, truncating any previous trial file and
    /// writing the sidecar with `completed: false`.
    pub fn create(dir: &Path, meta: ExperimentMeta) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir)?;
        write_sidecar(dir, &meta, false)?;
        let file = File::create(dir.join(TRIALS_FILE))?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(header_columns(&meta.space))?;
        writer.flush()?;
        Ok(Self {
            dir: dir.to_path_buf(),
            meta,
            writer: Mutex::new(WriterState {
                writer,
                seen: HashSet::new(),
            }),
            records: RwLock::new(Vec::new()),
        })
    }

    pub fn meta(&self) -> &ExperimentMeta {
        &self.meta
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Durably append one record. The row is flushed before this returns;
    /// rows land in completion order.
    pub fn append_trial(&self, mut record: TrialRecord) -> Result<(), StoreError> {
        // An empty diagnostic and an absent one share a wire form; store the
        // canonical absent variant.
        if record.diagnostic.as_deref() == Some("") {
            record.diagnostic = None;
        }
        record.validate(&self.meta.space)?;
        let mut state = self.writer.lock().expect("store writer poisoned");
        if !state.seen.insert(record.set_index) {
            return Err(StoreError::DuplicateIndex(record.set_index));
        }
        state.writer.write_record(record_columns(&record))?;
        state.writer.flush()?;
        self.records
            .write()
            .expect("store records poisoned")
            .push(record);
        drop(state);
        Ok(())
    }

    /// All records durable at call time, in completion order.
    pub fn snapshot(&self) -> Vec<TrialRecord> {
        self.records.read().expect("store records poisoned").clone()
    }

    /// Write the terminal completeness marker.
    pub fn finalize(&self) -> Result<(), StoreError> {
        write_sidecar(&self.dir, &self.meta, true)
    }

    /// Load a persisted experiment directory.
    pub fn load(dir: &Path) -> Result<LoadedStore, StoreError> {
        let sidecar_path = dir.join(EXPERIMENT_FILE);
        if !sidecar_path.exists() {
            return Err(StoreError::MissingFile(EXPERIMENT_FILE.into()));
        }
        let sidecar: Sidecar = serde_json::from_reader(File::open(&sidecar_path)?)
            .map_err(|e| StoreError::BadSidecar(e.to_string()))?;

        let trials_path = dir.join(TRIALS_FILE);
        if !trials_path.exists() {
            return Err(StoreError::MissingFile(TRIALS_FILE.into()));
        }
        let records = read_trials(&trials_path, &sidecar.meta.space)?;
        Ok(LoadedStore {
            meta: sidecar.meta,
            records,
            completed: sidecar.completed,
        })
    }
}

fn write_sidecar(dir: &Path, meta: &ExperimentMeta, completed: bool) -> Result<(), StoreError> {
    let tmp = dir.join(format!("{EXPERIMENT_FILE}.tmp"));
    let sidecar = Sidecar {
        meta: meta.clone(),
        completed,
    };
    let mut f = File::create(&tmp)?;
    serde_json::to_writer_pretty(&mut f, &sidecar)
        .map_err(|e| StoreError::BadSidecar(e.to_string()))?;
    f.write_all(b"\n")?;
    f.sync_all()?;
    std::fs::rename(tmp, dir.join(EXPERIMENT_FILE))?;
    Ok(())
}

fn header_columns(space: &SearchSpace) -> Vec<String> {
    let mut cols = vec![
        "set_index".to_string(),
        "status".to_string(),
        "result".to_string(),
        "repetition_results".to_string(),
        "worker_id".to_string(),
        "start_ts".to_string(),
        "end_ts".to_string(),
    ];
    for spec in space.specs() {
        cols.push(format!("param:{}", spec.name));
        cols.push(format!("prov:{}", spec.name));
    }
    cols.push("diagnostic".to_string());
    cols
}

fn fmt_float(v: f64) -> String {
    format!("{v}")
}

fn record_columns(record: &TrialRecord) -> Vec<String> {
    let mut cols = vec![
        record.set_index.to_string(),
        record.status.as_str().to_string(),
        record.result.map(fmt_float).unwrap_or_default(),
        record
            .repetition_results
            .iter()
            .map(|v| fmt_float(*v))
            .collect::<Vec<_>>()
            .join(";"),
        record.worker_id.to_string(),
        record.start_ts.to_string(),
        record.end_ts.to_string(),
    ];
    for (value, prov) in record.values.iter().zip(&record.provenance) {
        cols.push(value.as_ref().map(|v| v.to_wire()).unwrap_or_default());
        cols.push(prov.as_str().to_string());
    }
    cols.push(record.diagnostic.clone().unwrap_or_default());
    cols
}

fn read_trials(path: &Path, space: &SearchSpace) -> Result<Vec<TrialRecord>, StoreError> {
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .from_path(path)
        .map_err(|e| csv_error(&path_str, e))?;

    let expected = header_columns(space);
    let headers = reader.headers().map_err(|e| csv_error(&path_str, e))?;
    let got: Vec<String> = headers.iter().map(str::to_string).collect();
    if got != expected {
        return Err(StoreError::Parse {
            path: path_str,
            line: 1,
            message: format!("header mismatch: expected {expected:?}, got {got:?}"),
        });
    }

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(&path_str, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let record = parse_row(&row, space)
            .map_err(|message| StoreError::Parse {
                path: path_str.clone(),
                line,
                message,
            })?;
        if !seen.insert(record.set_index) {
            return Err(StoreError::Parse {
                path: path_str,
                line,
                message: format!("duplicate set_index {}", record.set_index),
            });
        }
        records.push(record);
    }
    Ok(records)
}

fn csv_error(path: &str, e: csv::Error) -> StoreError {
    let line = match e.position() {
        Some(p) => p.line(),
        None => 0,
    };
    StoreError::Parse {
        path: path.to_string(),
        line,
        message: e.to_string(),
    }
}

fn parse_row(row: &csv::StringRecord, space: &SearchSpace) -> Result<TrialRecord, String> {
    let field = |i: usize| -> &str { row.get(i).unwrap_or("") };

    let set_index: usize = field(0)
        .parse()
        .map_err(|_| format!("bad set_index `{}`", field(0)))?;
    let status = match field(1) {
        "ok" => TrialStatus::Ok,
        "failed" => TrialStatus::Failed,
        other => return Err(format!("bad status `{other}`")),
    };
    let result = if field(2).is_empty() {
        None
    } else {
        Some(
            field(2)
                .parse::<f64>()
                .map_err(|_| format!("bad result `{}`", field(2)))?,
        )
    };
    let repetition_results = if field(3).is_empty() {
        Vec::new()
    } else {
        field(3)
            .split(';')
            .map(|s| s.parse::<f64>().map_err(|_| format!("bad repetition `{s}`")))
            .collect::<Result<Vec<_>, _>>()?
    };
    let worker_id: usize = field(4)
        .parse()
        .map_err(|_| format!("bad worker_id `{}`", field(4)))?;
    let start_ts: i64 = field(5)
        .parse()
        .map_err(|_| format!("bad start_ts `{}`", field(5)))?;
    let end_ts: i64 = field(6)
        .parse()
        .map_err(|_| format!("bad end_ts `{}`", field(6)))?;

    let mut values = Vec::with_capacity(space.len());
    let mut provenance = Vec::with_capacity(space.len());
    for (k, spec) in space.specs().iter().enumerate() {
        let value_col = 7 + 2 * k;
        let raw = field(value_col);
        // Empty cell means the value was never resolved; spaces reject empty
        // strings in their value sets, so this never collides with data.
        let value = if raw.is_empty() {
            None
        } else {
            Some(parse_value(raw, &spec.kind)?)
        };
        values.push(value);
        let prov_raw = field(value_col + 1);
        provenance.push(
            Provenance::parse(prov_raw).ok_or_else(|| format!("bad provenance `{prov_raw}`"))?,
        );
    }
    let diag_field = field(7 + 2 * space.len());
    let diagnostic = if diag_field.is_empty() {
        None
    } else {
        Some(diag_field.to_string())
    };

    Ok(TrialRecord {
        set_index,
        values,
        provenance,
        repetition_results,
        result,
        status,
        diagnostic,
        worker_id,
        start_ts,
        end_ts,
    })
}

fn parse_value(raw: &str, kind: &ParameterKind) -> Result<ParamValue, String> {
    match kind {
        ParameterKind::Continuous { .. } | ParameterKind::Discrete { .. } => raw
            .parse::<f64>()
            .map(ParamValue::Num)
            .map_err(|_| format!("bad numeric value `{raw}`")),
        ParameterKind::Categorical { .. } | ParameterKind::Opaque { .. } => {
            Ok(ParamValue::Text(raw.to_string()))
        }
    }
}
