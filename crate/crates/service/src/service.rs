use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use alp_core::config::validate_recipe_from;
use alp_core::discovery::{extract_timeline, tag_behaviors, BehaviorTags, ExperimentEvidence, SessionTimeline};
use alp_core::recipe::{expand, total_duration};
use alp_core::telemetry::{build_narrative, fields_to_tsv};
use alp_core::transport::RunOptions;
use alp_core::{parse_recipe, reference_config, Reactor, ReactorConfig, ReactorState, ReferenceRun};

use crate::error::ServiceError;
use crate::record::{
    BudgetReport, CompactResponse, ExperimentRecord, ExperimentStatus, RecipeCheck, SessionInfo, SessionMeta,
    TimeBudget,
};
use crate::store::{ManifestEntry, Store};

/// Reactor time granted to a new session unless asked otherwise (s).
pub const DEFAULT_BUDGET: f64 = 7200.0;

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    pub data_dir: PathBuf,
    /// Reactor descriptions sessions may be opened on, by id.
    pub configs: BTreeMap<String, ReactorConfig>,
    pub default_config: String,
    pub default_budget: f64,
    /// Interval of the full-field snapshots written next to each record.
    pub snapshot_interval: Option<f64>,
}

impl ServiceOptions {
    /// Both reference reactors, `run2` as default.
    pub fn with_reference_configs(data_dir: impl Into<PathBuf>) -> ServiceOptions {
        let configs = [ReferenceRun::Run1, ReferenceRun::Run2]
            .into_iter()
            .map(|r| (r.id().to_string(), reference_config(r)))
            .collect();
        ServiceOptions {
            data_dir: data_dir.into(),
            configs,
            default_config: ReferenceRun::Run2.id().to_string(),
            default_budget: DEFAULT_BUDGET,
            snapshot_interval: Some(1.0),
        }
    }
}

struct Session {
    meta: SessionMeta,
    reactor: Arc<Reactor>,
    state: ReactorState,
    budget: TimeBudget,
    experiments: Vec<ExperimentEvidence>,
}

/// Sessions, each holding one simulated reactor and a time budget.
///
/// A session is locked for the whole of an experiment, so submissions to
/// one session run one after another while different sessions proceed in
/// parallel.
pub struct ExperimentService {
    store: Store,
    options: ServiceOptions,
    reactors: BTreeMap<String, Arc<Reactor>>,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Session>>>>,
    next_session: AtomicU64,
    next_experiment: AtomicU64,
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl ExperimentService {
    /// Open the store and reload any sessions already in it.
    pub fn open(options: ServiceOptions) -> Result<ExperimentService, ServiceError> {
        let store = Store::open(&options.data_dir)?;
        let reactors: BTreeMap<String, Arc<Reactor>> = options
            .configs
            .iter()
            .map(|(id, c)| (id.clone(), Arc::new(Reactor::new(c.clone()))))
            .collect();
        if !reactors.contains_key(&options.default_config) {
            return Err(ServiceError::UnknownConfig(options.default_config.clone()));
        }
        let service = ExperimentService {
            store,
            options,
            reactors,
            sessions: RwLock::new(BTreeMap::new()),
            next_session: AtomicU64::new(1),
            next_experiment: AtomicU64::new(1),
        };
        service.reload()?;
        Ok(service)
    }

    fn reload(&self) -> Result<(), ServiceError> {
        let mut max_session = 0u64;
        let mut max_experiment = 0u64;
        let mut sessions = self.sessions.write().unwrap_or_else(|e| e.into_inner());
        for sid in self.store.session_ids()? {
            let Some(meta) = self.store.read_meta(&sid)? else {
                continue;
            };
            if let Some(n) = sid.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                max_session = max_session.max(n);
            }
            let reactor = self.reactor(&meta.config_id)?;
            let mut budget = TimeBudget::new(meta.budget);
            let mut experiments = Vec::new();
            for entry in self.store.read_manifest(&sid)? {
                max_experiment = max_experiment.max(entry.experiment_id);
                budget.charge(entry.duration);
                if let Some(rec) = self.store.read_experiment(&sid, entry.experiment_id)? {
                    experiments.push(evidence(&rec));
                }
            }
            let state = match self.store.read_state(&sid)? {
                Some(s) => s,
                None => reactor.initial_state(),
            };
            sessions.insert(
                sid,
                Arc::new(Mutex::new(Session {
                    meta,
                    reactor,
                    state,
                    budget,
                    experiments,
                })),
            );
        }
        self.next_session.store(max_session + 1, Ordering::SeqCst);
        self.next_experiment.store(max_experiment + 1, Ordering::SeqCst);
        Ok(())
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn config_ids(&self) -> Vec<String> {
        self.reactors.keys().cloned().collect()
    }

    fn reactor(&self, config_id: &str) -> Result<Arc<Reactor>, ServiceError> {
        self.reactors
            .get(config_id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownConfig(config_id.to_string()))
    }

    fn session(&self, sid: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(sid)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(sid.to_string()))
    }

    /// Start a session on a fresh reactor.
    pub fn create_session(&self, config_id: Option<&str>, budget: Option<f64>) -> Result<SessionInfo, ServiceError> {
        let config_id = config_id.unwrap_or(&self.options.default_config).to_string();
        let reactor = self.reactor(&config_id)?;
        let budget = budget.unwrap_or(self.options.default_budget);
        if !(budget.is_finite() && budget >= 0.0) {
            return Err(ServiceError::BadRequest(format!("budget must be a nonnegative number, got {budget}")));
        }
        let n = self.next_session.fetch_add(1, Ordering::SeqCst);
        let meta = SessionMeta {
            id: format!("s{n:04}"),
            config_id,
            budget,
        };
        self.store.create_session(&meta)?;
        let state = reactor.initial_state();
        self.store.write_state(&meta.id, &state)?;
        let session = Session {
            meta: meta.clone(),
            reactor,
            state,
            budget: TimeBudget::new(budget),
            experiments: Vec::new(),
        };
        self.sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(meta.id.clone(), Arc::new(Mutex::new(session)));
        self.session_info(&meta.id)
    }

    pub fn session_info(&self, sid: &str) -> Result<SessionInfo, ServiceError> {
        let s = self.session(sid)?;
        let s = lock(&s);
        Ok(SessionInfo {
            session_id: s.meta.id.clone(),
            config_id: s.meta.config_id.clone(),
            budget: budget_report(&s),
            experiment_ids: s.experiments.iter().map(|e| e.id).collect(),
        })
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .keys()
            .cloned()
            .collect()
    }

    pub fn budget(&self, sid: &str) -> Result<BudgetReport, ServiceError> {
        let s = self.session(sid)?;
        let s = lock(&s);
        Ok(budget_report(&s))
    }

    /// Parse and check a recipe against a configuration without running it.
    pub fn check_recipe(&self, config_id: Option<&str>, text: &str) -> Result<RecipeCheck, ServiceError> {
        let reactor = self.reactor(config_id.unwrap_or(&self.options.default_config))?;
        let recipe = parse_recipe(text)?;
        let controls = reactor.config().initial_controls();
        Ok(RecipeCheck {
            segments: expand(&recipe, &controls).len(),
            duration: total_duration(&recipe),
            report: validate_recipe_from(&recipe, reactor.config(), &controls),
        })
    }

    /// Run a recipe on the session's reactor.
    pub fn perform(&self, sid: &str, text: &str) -> Result<CompactResponse, ServiceError> {
        let session = self.session(sid)?;
        let mut s = lock(&session);
        let recipe = parse_recipe(text)?;
        let report = validate_recipe_from(&recipe, s.reactor.config(), &s.state.controls);
        if !report.is_ok() {
            return Err(ServiceError::Validation(report));
        }
        let requested = total_duration(&recipe);
        if !s.budget.allows(requested) {
            return Err(ServiceError::BudgetExceeded {
                requested,
                remaining: s.budget.remaining(),
            });
        }

        let before = s.state.clone();
        let opts = RunOptions {
            snapshot_interval: self.options.snapshot_interval,
            ..Default::default()
        };
        let reactor = Arc::clone(&s.reactor);
        let run = reactor
            .run_recipe(&mut s.state, &recipe, &opts)
            .map_err(ServiceError::Validation)?;
        let (status, charged, failure) = match &run.failure {
            None => (ExperimentStatus::Completed, requested, None),
            Some(e) => {
                // keep the last good fields; the clock still advances
                s.state = before;
                s.state.time += run.elapsed;
                (ExperimentStatus::Failed, run.elapsed, Some(e.to_string()))
            }
        };
        s.budget.charge(charged);

        let narrative = build_narrative(&run.trace, reactor.config(), &run.report, failure.as_deref());
        let id = self.next_experiment.fetch_add(1, Ordering::SeqCst);
        let record = ExperimentRecord {
            id,
            session: s.meta.id.clone(),
            config_id: s.meta.config_id.clone(),
            recipe: text.to_string(),
            status,
            failure,
            duration: charged,
            used_after: s.budget.used,
            remaining_after: s.budget.remaining(),
            report: run.report.clone(),
            narrative,
            trace: run.trace,
        };
        let fields = (!run.snapshots.is_empty()).then(|| fields_to_tsv(&run.snapshots, reactor.config()));
        self.store.write_experiment(&record, fields.as_deref())?;
        self.store.write_state(&s.meta.id, &s.state)?;
        self.store.append_manifest(
            &s.meta.id,
            &ManifestEntry {
                experiment_id: id,
                duration: charged,
                failed: status == ExperimentStatus::Failed,
            },
        )?;
        s.experiments.push(evidence(&record));
        Ok(record.compact())
    }

    pub fn experiment(&self, sid: &str, id: u64) -> Result<ExperimentRecord, ServiceError> {
        let session = self.session(sid)?;
        let known = lock(&session).experiments.iter().any(|e| e.id == id);
        let missing = || ServiceError::UnknownExperiment {
            session: sid.to_string(),
            experiment: id,
        };
        if !known {
            return Err(missing());
        }
        self.store.read_experiment(sid, id)?.ok_or_else(missing)
    }

    /// Every stored record of a session, oldest first.
    pub fn experiments(&self, sid: &str) -> Result<Vec<ExperimentRecord>, ServiceError> {
        let ids: Vec<u64> = {
            let session = self.session(sid)?;
            let s = lock(&session);
            s.experiments.iter().map(|e| e.id).collect()
        };
        ids.into_iter().map(|id| self.experiment(sid, id)).collect()
    }

    pub fn timeline(&self, sid: &str) -> Result<SessionTimeline, ServiceError> {
        let session = self.session(sid)?;
        let s = lock(&session);
        Ok(extract_timeline(&s.experiments, s.reactor.config()))
    }

    pub fn tags(&self, sid: &str) -> Result<BehaviorTags, ServiceError> {
        let session = self.session(sid)?;
        let s = lock(&session);
        Ok(tag_behaviors(&s.experiments, s.reactor.config()))
    }

    /// Resubmit every recipe of `sid`, in order, to a new session with the
    /// same reactor and budget. Returns the new session id.
    pub fn replay(&self, sid: &str) -> Result<String, ServiceError> {
        let (config_id, budget) = {
            let session = self.session(sid)?;
            let s = lock(&session);
            (s.meta.config_id.clone(), s.meta.budget)
        };
        let records = self.experiments(sid)?;
        let fresh = self.create_session(Some(&config_id), Some(budget))?;
        for r in records {
            self.perform(&fresh.session_id, &r.recipe)?;
        }
        Ok(fresh.session_id)
    }
}

fn budget_report(s: &Session) -> BudgetReport {
    BudgetReport {
        total: s.budget.total,
        used: s.budget.used,
        remaining: s.budget.remaining(),
        experiments: s.experiments.len(),
    }
}

fn evidence(rec: &ExperimentRecord) -> ExperimentEvidence {
    ExperimentEvidence {
        id: rec.id,
        recipe_text: rec.recipe.clone(),
        duration: rec.duration,
        header: rec.narrative.header.first().cloned().unwrap_or_default(),
        steps: rec.trace.steps.clone(),
    }
}
