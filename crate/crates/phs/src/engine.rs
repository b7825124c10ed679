//! The lightweight master: schedules plan entries onto a worker pool,
//! resolves each entry's parameters on the worker at task start, and gathers
//! records into the store as trials complete.
//!
//! Random and explicit resolution draw from rng substreams keyed by
//! (experiment seed, set_index), so those values never depend on worker
//! count or scheduling order. Surrogate proposals read a snapshot of
//! finished trials plus the current in-flight points at task start.
//! Snapshots may be stale under parallelism; only proposal quality depends
//! on freshness, never correctness, so bayes-resolved values can
//! legitimately differ between pool sizes.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicI64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::{propose, AcquisitionConfig};
use crate::plan::{PlanEntry, PlanError, PlanParams, SearchPlan, StrategyTag};
use crate::space::{ParamValue, ParameterSet, SearchSpace, SpaceError};
use crate::store::{
    best_trial, ExperimentMeta, Provenance, StoreError, TrialRecord, TrialStatus, TrialStore,
    SCHEMA_VERSION,
};
use crate::surrogate::{GpModel, SurrogateError};
use crate::targets::{Target, TargetSpec};

/// Finished trials required before the first surrogate fit; below this,
/// bayes-tagged parameters fall back to random (and are flagged as such).
pub const MIN_INIT_TRIALS: usize = 3;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("repetitions must be at least 1")]
    ZeroRepetitions,
    #[error("all {0} trials failed; see the trial file for diagnostics")]
    AllTrialsFailed(usize),
}

/// Time source for trial timestamps. The engine only needs "now" in UTC
/// microseconds; swapping in a deterministic clock makes whole runs
/// byte-reproducible, which the replay tests rely on.
pub trait Clock: Send + Sync {
    fn now_micros(&self) -> i64;
}

/// Wall clock, UTC microseconds since the epoch.
#[derive(Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_micros(&self) -> i64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_micros() as i64)
            .unwrap_or(0)
    }
}

/// Deterministic clock: starts at `start` and advances by `step` per call.
#[derive(Debug)]
pub struct FixedStepClock {
    next: AtomicI64,
    step: i64,
}

impl FixedStepClock {
    pub fn new(start: i64, step: i64) -> Self {
        Self {
            next: AtomicI64::new(start),
            step,
        }
    }
}

impl Clock for FixedStepClock {
    fn now_micros(&self) -> i64 {
        self.next.fetch_add(self.step, Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Run every trial on the calling thread. Identical observable
    /// semantics to an in-process pool of size 1.
    Serial,
    /// One OS thread per worker.
    InProcess,
}

#[derive(Debug, Clone, Copy)]
pub struct WorkerPool {
    pub size: usize,
    pub backend: Backend,
}

impl WorkerPool {
    pub fn serial() -> Self {
        Self {
            size: 1,
            backend: Backend::Serial,
        }
    }

    pub fn in_process(size: usize) -> Self {
        Self {
            size: size.max(1),
            backend: Backend::InProcess,
        }
    }
}

/// Everything needed to run one experiment, and later to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub space: SearchSpace,
    pub plan: PlanParams,
    pub target: TargetSpec,
    pub workers: usize,
    pub seed: u64,
    pub repetitions: u32,
    pub acquisition: AcquisitionConfig,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn meta(&self) -> ExperimentMeta {
        ExperimentMeta {
            schema_version: SCHEMA_VERSION,
            seed: self.seed,
            space: self.space.clone(),
            plan: self.plan.clone(),
            target: self.target.clone(),
            workers: self.workers,
            repetitions: self.repetitions,
            acquisition: self.acquisition.clone(),
        }
    }

    /// Reconstruct a runnable config from an archived experiment.
    pub fn from_meta(meta: ExperimentMeta, output_dir: PathBuf) -> Self {
        Self {
            space: meta.space,
            plan: meta.plan,
            target: meta.target,
            workers: meta.workers,
            seed: meta.seed,
            repetitions: meta.repetitions,
            acquisition: meta.acquisition,
            output_dir,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub total: usize,
    pub failed: usize,
    pub best: Option<TrialRecord>,
    pub duration: Duration,
}

/// One schedulable unit: a plan entry plus the derived rng substreams and
/// the repetition count.
pub struct Task<'a> {
    pub entry: &'a PlanEntry,
    pub seed: u64,
    pub repetitions: u32,
}

impl Task<'_> {
    /// Stream used for explicit/random resolution. Keyed only by
    /// (seed, set_index), never by scheduling order.
    pub fn random_stream(&self) -> ChaCha8Rng {
        substream(self.seed, self.entry.set_index, 0)
    }

    /// Stream used for surrogate machinery: candidate sampling and the
    /// random fallback.
    pub fn bayes_stream(&self) -> ChaCha8Rng {
        substream(self.seed, self.entry.set_index, 1)
    }
}

/// Pure derivation of a per-entry rng substream.
pub fn substream(seed: u64, set_index: usize, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(set_index as u64).to_le_bytes());
    key[16..24].copy_from_slice(&stream.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
}

/// A resolved parameter set together with how each value was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub set: ParameterSet,
    pub provenance: Vec<Provenance>,
}

/// Resolve one plan entry against a snapshot of finished trials and the
/// in-flight points.
///
/// Explicit tags copy their value, random tags draw from the random stream
/// in space order, and bayes tags either fall back to random (fewer than
/// [`MIN_INIT_TRIALS`] usable trials) or fit a surrogate on the snapshot
/// restricted to the bayes-tagged dimensions and take the proposal.
pub fn resolve_parameters(
    space: &SearchSpace,
    entry: &PlanEntry,
    snapshot: &[TrialRecord],
    pending: &[ParameterSet],
    acquisition: &AcquisitionConfig,
    rng_random: &mut ChaCha8Rng,
    rng_bayes: &mut ChaCha8Rng,
) -> Result<Resolution, ResolveError> {
    let n = space.len();
    let mut values: Vec<Option<ParamValue>> = vec![None; n];
    let mut provenance = vec![Provenance::Random; n];

    for (i, tag) in entry.tags.iter().enumerate() {
        match tag {
            StrategyTag::Explicit(v) => {
                values[i] = Some(v.clone());
                provenance[i] = Provenance::Explicit;
            }
            StrategyTag::Random => {
                values[i] = Some(space.sample_value(i, rng_random));
                provenance[i] = Provenance::Random;
            }
            StrategyTag::Bayes => {}
        }
    }

    let bayes_names = entry.bayes_names(space);
    if !bayes_names.is_empty() {
        let usable: Vec<&TrialRecord> = snapshot
            .iter()
            .filter(|r| {
                r.is_ok()
                    && r.result.map(|v| v.is_finite()).unwrap_or(false)
                    && r.values.iter().all(|v| v.is_some())
            })
            .collect();

        if usable.len() < MIN_INIT_TRIALS {
            for (i, tag) in entry.tags.iter().enumerate() {
                if matches!(tag, StrategyTag::Bayes) {
                    values[i] = Some(space.sample_value(i, rng_bayes));
                    provenance[i] = Provenance::RandomFallback;
                }
            }
        } else {
            let mut xs = Vec::with_capacity(usable.len());
            let mut ys = Vec::with_capacity(usable.len());
            for record in &usable {
                let set = ParameterSet::new(
                    record
                        .values
                        .iter()
                        .map(|v| v.clone().expect("usable record has all values"))
                        .collect(),
                );
                xs.push(space.normalize_subset(&set, &bayes_names)?);
                ys.push(record.result.expect("usable record has a result"));
            }
            let model = GpModel::fit_auto(xs, ys)?;
            let pending_projected: Vec<Vec<f64>> = pending
                .iter()
                .map(|set| space.normalize_subset(set, &bayes_names))
                .collect::<Result<_, _>>()?;
            let proposal = propose(&model, &pending_projected, acquisition, rng_bayes)?;
            for (name, value) in space.denormalize_subset(&proposal.point, &bayes_names)? {
                let i = space.index_of(&name).expect("name came from the space");
                values[i] = Some(ParamValue::Num(value));
                provenance[i] = Provenance::Bayes;
            }
        }
    }

    let set = ParameterSet::new(values.into_iter().map(|v| v.expect("all tags resolved")).collect());
    space.validate_set(&set)?;
    Ok(Resolution { set, provenance })
}

/// Run the target `repetitions` times for one resolved set and build the
/// trial record. A failure on any repetition marks the record failed with
/// the diagnostic; earlier successful repetition results are kept.
pub fn execute_trial(
    task: &Task,
    resolution: &Resolution,
    space: &SearchSpace,
    target: &dyn Target,
    worker_id: usize,
    clock: &dyn Clock,
) -> TrialRecord {
    let start_ts = clock.now_micros();
    let mut repetition_results = Vec::with_capacity(task.repetitions as usize);
    let mut diagnostic = None;
    for rep in 0..task.repetitions {
        match target.eval(space, &resolution.set, rep) {
            Ok(v) if v.is_finite() => repetition_results.push(v),
            Ok(v) => {
                diagnostic = Some(format!("repetition {rep}: non-finite result `{v}`"));
                break;
            }
            Err(e) => {
                diagnostic = Some(format!("repetition {rep}: {e}"));
                break;
            }
        }
    }
    let end_ts = clock.now_micros().max(start_ts);

    let (status, result) = if diagnostic.is_none() {
        let mean = repetition_results.iter().sum::<f64>() / repetition_results.len().max(1) as f64;
        (TrialStatus::Ok, Some(mean))
    } else {
        (TrialStatus::Failed, None)
    };

    TrialRecord {
        set_index: task.entry.set_index,
        values: resolution.set.values().iter().cloned().map(Some).collect(),
        provenance: resolution.provenance.clone(),
        repetition_results,
        result,
        status,
        diagnostic,
        worker_id,
        start_ts,
        end_ts,
    }
}

struct Shared<'a> {
    config: &'a ExperimentConfig,
    plan: &'a SearchPlan,
    store: &'a TrialStore,
    target: &'a dyn Target,
    clock: &'a dyn Clock,
    next: AtomicUsize,
    pending: Mutex<BTreeMap<usize, ParameterSet>>,
    stop: AtomicBool,
    append_failure: Mutex<Option<StoreError>>,
}

/// Run one experiment with the system clock.
pub fn run_experiment(
    config: &ExperimentConfig,
    target: &dyn Target,
    pool: &WorkerPool,
) -> Result<ExperimentSummary, EngineError> {
    run_experiment_with_clock(config, target, pool, &SystemClock)
}

/// Run one experiment end to end: build the plan, create the store, fan the
/// entries out over the pool, and return the summary after the completeness
/// marker is written. Every plan entry produces exactly one record.
pub fn run_experiment_with_clock(
    config: &ExperimentConfig,
    target: &dyn Target,
    pool: &WorkerPool,
    clock: &dyn Clock,
) -> Result<ExperimentSummary, EngineError> {
    if config.repetitions == 0 {
        return Err(EngineError::ZeroRepetitions);
    }
    let plan = SearchPlan::build(&config.space, &config.plan)?;
    let store = TrialStore::create(&config.output_dir, config.meta())?;
    let started = Instant::now();

    let shared = Shared {
        config,
        plan: &plan,
        store: &store,
        target,
        clock,
        next: AtomicUsize::new(0),
        pending: Mutex::new(BTreeMap::new()),
        stop: AtomicBool::new(false),
        append_failure: Mutex::new(None),
    };

    match pool.backend {
        Backend::Serial => worker_loop(&shared, 0),
        Backend::InProcess => {
            std::thread::scope(|scope| {
                for worker_id in 0..pool.size {
                    let shared = &shared;
                    scope.spawn(move || worker_loop(shared, worker_id));
                }
            });
        }
    }

    if let Some(err) = shared.append_failure.lock().expect("append_failure").take() {
        return Err(EngineError::Store(err));
    }
    store.finalize()?;

    let records = store.snapshot();
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    let best = best_trial(&records).cloned();
    let summary = ExperimentSummary {
        total: records.len(),
        failed,
        best,
        duration: started.elapsed(),
    };
    if summary.best.is_none() {
        return Err(EngineError::AllTrialsFailed(summary.total));
    }
    Ok(summary)
}

fn worker_loop(shared: &Shared, worker_id: usize) {
    loop {
        if shared.stop.load(Ordering::SeqCst) {
            break;
        }
        // Lowest-index unstarted entry: dispatch follows plan order.
        let index = shared.next.fetch_add(1, Ordering::SeqCst);
        if index >= shared.plan.len() {
            break;
        }
        let entry = &shared.plan.entries()[index];
        let task = Task {
            entry,
            seed: shared.config.seed,
            repetitions: shared.config.repetitions,
        };

        // Snapshot finished and in-flight state at task start; both may be
        // stale by the time the surrogate finishes fitting, which is fine.
        let snapshot = shared.store.snapshot();
        let pending: Vec<ParameterSet> = shared
            .pending
            .lock()
            .expect("pending registry")
            .values()
            .cloned()
            .collect();

        let mut rng_random = task.random_stream();
        let mut rng_bayes = task.bayes_stream();
        let record = match resolve_parameters(
            &shared.config.space,
            entry,
            &snapshot,
            &pending,
            &shared.config.acquisition,
            &mut rng_random,
            &mut rng_bayes,
        ) {
            Ok(resolution) => {
                shared
                    .pending
                    .lock()
                    .expect("pending registry")
                    .insert(index, resolution.set.clone());
                let record = execute_trial(
                    &task,
                    &resolution,
                    &shared.config.space,
                    shared.target,
                    worker_id,
                    shared.clock,
                );
                shared
                    .pending
                    .lock()
                    .expect("pending registry")
                    .remove(&index);
                record
            }
            Err(e) => {
                // A resolution failure is a failed trial, never a master
                // crash; the planned tags stand in as provenance.
                let now = shared.clock.now_micros();
                TrialRecord {
                    set_index: index,
                    values: vec![None; shared.config.space.len()],
                    provenance: planned_provenance(entry),
                    repetition_results: Vec::new(),
                    result: None,
                    status: TrialStatus::Failed,
                    diagnostic: Some(format!("parameter resolution failed: {e}")),
                    worker_id,
                    start_ts: now,
                    end_ts: now,
                }
            }
        };

        if let Err(e) = shared.store.append_trial(record) {
            *shared.append_failure.lock().expect("append_failure") = Some(e);
            shared.stop.store(true, Ordering::SeqCst);
            break;
        }
    }
}

fn planned_provenance(entry: &PlanEntry) -> Vec<Provenance> {
    entry
        .tags
        .iter()
        .map(|t| match t {
            StrategyTag::Explicit(_) => Provenance::Explicit,
            StrategyTag::Random => Provenance::Random,
            StrategyTag::Bayes => Provenance::Bayes,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ParameterSpec;
    use crate::targets::build_target;
    use std::collections::BTreeMap as Map;

    fn griewank_config(dir: &std::path::Path, n_random: usize, n_bayes: usize) -> ExperimentConfig {
        ExperimentConfig {
            space: SearchSpace::new(vec![
                ParameterSpec::continuous("x", -5.0, 5.0),
                ParameterSpec::continuous("y", -5.0, 5.0),
            ])
            .unwrap(),
            plan: PlanParams {
                explicit_rows: vec![],
                n_random,
                n_bayes,
                bayes_params: vec![],
            },
            target: TargetSpec::Builtin {
                name: "griewank".into(),
                sleep_ms: None,
            },
            workers: 1,
            seed: 7,
            repetitions: 1,
            acquisition: AcquisitionConfig::default(),
            output_dir: dir.to_path_buf(),
        }
    }

    #[test]
    fn griewank_run_produces_all_records() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = griewank_config(&dir.path().join("out"), 15, 15);
        config.workers = 4;
        let target = build_target(&config.target, &config.space).unwrap();
        let summary =
            run_experiment(&config, target.as_ref(), &WorkerPool::in_process(4)).unwrap();
        assert_eq!(summary.total, 30);
        assert_eq!(summary.failed, 0);
        let loaded = crate::store::TrialStore::load(&config.output_dir).unwrap();
        assert!(loaded.completed);
        let mut indices: Vec<usize> = loaded.records.iter().map(|r| r.set_index).collect();
        indices.sort_unstable();
        assert_eq!(indices, (0..30).collect::<Vec<_>>());
        assert!(loaded
            .records
            .iter()
            .all(|r| r.result.unwrap().is_finite()));
    }

    #[test]
    fn serial_equals_pool_of_one() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg_a = griewank_config(&dir.path().join("a"), 6, 6);
        let mut cfg_b = griewank_config(&dir.path().join("b"), 6, 6);
        cfg_a.workers = 1;
        cfg_b.workers = 1;
        let target = build_target(&cfg_a.target, &cfg_a.space).unwrap();
        run_experiment_with_clock(
            &cfg_a,
            target.as_ref(),
            &WorkerPool::serial(),
            &FixedStepClock::new(0, 1),
        )
        .unwrap();
        run_experiment_with_clock(
            &cfg_b,
            target.as_ref(),
            &WorkerPool::in_process(1),
            &FixedStepClock::new(0, 1),
        )
        .unwrap();
        let bytes_a = std::fs::read(cfg_a.output_dir.join("trials.csv")).unwrap();
        let bytes_b = std::fs::read(cfg_b.output_dir.join("trials.csv")).unwrap();
        assert_eq!(bytes_a, bytes_b);
    }

    #[test]
    fn explicit_origin_hits_global_minimum() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = griewank_config(&dir.path().join("out"), 0, 0);
        let mut row = Map::new();
        row.insert("x".to_string(), ParamValue::Num(0.0));
        row.insert("y".to_string(), ParamValue::Num(0.0));
        config.plan.explicit_rows = vec![row];
        let target = build_target(&config.target, &config.space).unwrap();
        let summary = run_experiment(&config, target.as_ref(), &WorkerPool::serial()).unwrap();
        let best = summary.best.unwrap();
        assert_eq!(best.result, Some(0.0));
        assert!(best
            .provenance
            .iter()
            .all(|p| *p == Provenance::Explicit));
    }

    fn space_1d() -> SearchSpace {
        SearchSpace::new(vec![ParameterSpec::continuous("x", 0.0, 1.0)]).unwrap()
    }

    fn ok_record(set_index: usize, x: f64, result: f64) -> TrialRecord {
        TrialRecord {
            set_index,
            values: vec![Some(ParamValue::Num(x))],
            provenance: vec![Provenance::Random],
            repetition_results: vec![result],
            result: Some(result),
            status: TrialStatus::Ok,
            diagnostic: None,
            worker_id: 0,
            start_ts: 0,
            end_ts: 1,
        }
    }

    #[test]
    fn all_random_entry_gets_random_provenance() {
        let space = space_1d();
        let entry = PlanEntry {
            set_index: 0,
            tags: vec![StrategyTag::Random],
        };
        let res = resolve_parameters(
            &space,
            &entry,
            &[],
            &[],
            &AcquisitionConfig::default(),
            &mut substream(1, 0, 0),
            &mut substream(1, 0, 1),
        )
        .unwrap();
        assert_eq!(res.provenance, vec![Provenance::Random]);
    }

    #[test]
    fn bayes_without_history_falls_back() {
        let space = space_1d();
        let entry = PlanEntry {
            set_index: 0,
            tags: vec![StrategyTag::Bayes],
        };
        let res = resolve_parameters(
            &space,
            &entry,
            &[],
            &[],
            &AcquisitionConfig::default(),
            &mut substream(1, 0, 0),
            &mut substream(1, 0, 1),
        )
        .unwrap();
        assert_eq!(res.provenance, vec![Provenance::RandomFallback]);
    }

    #[test]
    fn bayes_resolution_replays_componentwise() {
        // Engine-path resolution must equal a standalone fit + propose on
        // the same snapshot with the same substream.
        let space = space_1d();
        let snapshot: Vec<TrialRecord> = (0..10)
            .map(|i| {
                let x = i as f64 / 9.0;
                ok_record(i, x, (x - 0.3) * (x - 0.3))
            })
            .collect();
        let entry = PlanEntry {
            set_index: 10,
            tags: vec![StrategyTag::Bayes],
        };
        let acq = AcquisitionConfig::default();
        let seed = 42;
        let res = resolve_parameters(
            &space,
            &entry,
            &snapshot,
            &[],
            &acq,
            &mut substream(seed, 10, 0),
            &mut substream(seed, 10, 1),
        )
        .unwrap();
        assert_eq!(res.provenance, vec![Provenance::Bayes]);

        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 9.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x[0] - 0.3) * (x[0] - 0.3)).collect();
        let model = GpModel::fit_auto(xs, ys).unwrap();
        let proposal = propose(&model, &[], &acq, &mut substream(seed, 10, 1)).unwrap();
        let expect = space
            .denormalize_subset(&proposal.point, &["x".to_string()])
            .unwrap()[0]
            .1;
        assert_eq!(res.set.values()[0], ParamValue::Num(expect));
    }

    #[test]
    fn random_draws_do_not_depend_on_bayes_path() {
        // The same entry resolved with and without enough history must give
        // identical values for its random-tagged parameter.
        let space = SearchSpace::new(vec![
            ParameterSpec::continuous("x", 0.0, 1.0),
            ParameterSpec::continuous("y", 0.0, 1.0),
        ])
        .unwrap();
        let entry = PlanEntry {
            set_index: 5,
            tags: vec![StrategyTag::Bayes, StrategyTag::Random],
        };
        let acq = AcquisitionConfig::default();
        let snapshot: Vec<TrialRecord> = (0..5)
            .map(|i| {
                let x = i as f64 / 4.0;
                TrialRecord {
                    set_index: i,
                    values: vec![Some(ParamValue::Num(x)), Some(ParamValue::Num(0.5))],
                    provenance: vec![Provenance::Random, Provenance::Random],
                    repetition_results: vec![x],
                    result: Some(x),
                    status: TrialStatus::Ok,
                    diagnostic: None,
                    worker_id: 0,
                    start_ts: 0,
                    end_ts: 1,
                }
            })
            .collect();

        let with_history = resolve_parameters(
            &space,
            &entry,
            &snapshot,
            &[],
            &acq,
            &mut substream(9, 5, 0),
            &mut substream(9, 5, 1),
        )
        .unwrap();
        let without_history = resolve_parameters(
            &space,
            &entry,
            &[],
            &[],
            &acq,
            &mut substream(9, 5, 0),
            &mut substream(9, 5, 1),
        )
        .unwrap();
        assert_eq!(with_history.provenance[0], Provenance::Bayes);
        assert_eq!(without_history.provenance[0], Provenance::RandomFallback);
        assert_eq!(
            with_history.set.values()[1],
            without_history.set.values()[1],
            "random draw must not depend on the bayes path"
        );
    }

    struct ScriptedTarget;

    impl Target for ScriptedTarget {
        fn eval(
            &self,
            _space: &SearchSpace,
            _set: &ParameterSet,
            repetition: u32,
        ) -> Result<f64, crate::targets::TargetError> {
            Ok((repetition + 1) as f64)
        }
    }

    #[test]
    fn repetitions_average_into_result() {
        let space = space_1d();
        let entry = PlanEntry {
            set_index: 0,
            tags: vec![StrategyTag::Random],
        };
        let task = Task {
            entry: &entry,
            seed: 1,
            repetitions: 3,
        };
        let resolution = Resolution {
            set: ParameterSet::new(vec![ParamValue::Num(0.5)]),
            provenance: vec![Provenance::Random],
        };
        let record = execute_trial(
            &task,
            &resolution,
            &space,
            &ScriptedTarget,
            0,
            &FixedStepClock::new(100, 10),
        );
        assert_eq!(record.repetition_results, vec![1.0, 2.0, 3.0]);
        assert_eq!(record.result, Some(2.0));
        assert!(record.start_ts <= record.end_ts);
    }

    struct FailingTarget;

    impl Target for FailingTarget {
        fn eval(
            &self,
            _space: &SearchSpace,
            _set: &ParameterSet,
            _repetition: u32,
        ) -> Result<f64, crate::targets::TargetError> {
            Err(crate::targets::TargetError::NonZeroExit {
                code: "1".into(),
                stderr: "boom".into(),
            })
        }
    }

    #[test]
    fn failing_trials_do_not_abort_the_experiment() {
        let dir = tempfile::tempdir().unwrap();
        let config = griewank_config(&dir.path().join("out"), 4, 0);
        let err =
            run_experiment(&config, &FailingTarget, &WorkerPool::in_process(2)).unwrap_err();
        assert!(matches!(err, EngineError::AllTrialsFailed(4)));
        // All records persisted and the marker written regardless.
        let loaded = crate::store::TrialStore::load(&config.output_dir).unwrap();
        assert_eq!(loaded.records.len(), 4);
        assert!(loaded.completed);
        assert!(loaded
            .records
            .iter()
            .all(|r| r.diagnostic.as_deref().unwrap().contains("boom")));
    }

    #[test]
    fn deterministic_target_repeats_identically() {
        let space = space_1d();
        let entry = PlanEntry {
            set_index: 0,
            tags: vec![StrategyTag::Explicit(ParamValue::Num(0.5))],
        };
        let task = Task {
            entry: &entry,
            seed: 1,
            repetitions: 3,
        };
        let resolution = Resolution {
            set: ParameterSet::new(vec![ParamValue::Num(0.5)]),
            provenance: vec![Provenance::Explicit],
        };
        let target = build_target(
            &TargetSpec::Builtin {
                name: "sphere".into(),
                sleep_ms: None,
            },
            &space,
        )
        .unwrap();
        let record = execute_trial(
            &task,
            &resolution,
            &space,
            target.as_ref(),
            0,
            &FixedStepClock::new(0, 1),
        );
        assert_eq!(record.repetition_results, vec![0.25, 0.25, 0.25]);
        assert_eq!(record.result, Some(0.25));
    }

    #[test]
    fn random_columns_independent_of_pool_size() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_serial = griewank_config(&dir.path().join("s"), 8, 0);
        let mut cfg_parallel = griewank_config(&dir.path().join("p"), 8, 0);
        cfg_parallel.workers = 4;
        let target = build_target(&cfg_serial.target, &cfg_serial.space).unwrap();
        run_experiment(&cfg_serial, target.as_ref(), &WorkerPool::serial()).unwrap();
        run_experiment(&cfg_parallel, target.as_ref(), &WorkerPool::in_process(4)).unwrap();
        let mut a = crate::store::TrialStore::load(&cfg_serial.output_dir)
            .unwrap()
            .records;
        let mut b = crate::store::TrialStore::load(&cfg_parallel.output_dir)
            .unwrap()
            .records;
        a.sort_by_key(|r| r.set_index);
        b.sort_by_key(|r| r.set_index);
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.values, rb.values);
            assert_eq!(ra.result, rb.result);
        }
    }
}
