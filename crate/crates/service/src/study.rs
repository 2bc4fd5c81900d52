use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use eop_core::domain::synthetic::compas_like_csv;
use eop_core::domain::{load_dataset, Part, Subject};
use eop_core::questiongen::{build_questionnaire, QuestionnaireConfig};

use crate::config::{valid_study_id, DatasetSource, ServiceConfig, StudyConfig};
use crate::error::ServiceError;
use crate::results::{compute_results, CompletedSession, StudyResults};
use crate::session::{NextQuestion, Plan, Session, SessionState};
use crate::store::{Event, EventLog};

/// Milliseconds since the Unix epoch; replaceable for tests.
pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    })
}

fn random_hex<const N: usize>() -> String {
    hex::encode(rand::rng().random::<[u8; N]>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub participant_id: String,
    pub part_order: [Part; 2],
    pub total_questions: usize,
    pub content: crate::content::StudyContent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitAnswer {
    pub question_id: String,
    pub answer: serde_json::Value,
    #[serde(default)]
    pub justification: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerAck {
    pub cursor: usize,
    pub total_questions: usize,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub session_id: String,
    pub participant_id: String,
    pub state: SessionState,
    pub cursor: usize,
    pub total_questions: usize,
    pub has_demographics: bool,
}

pub struct Study {
    pub config: StudyConfig,
    dataset: Vec<Subject>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    log: Mutex<EventLog>,
    revision: AtomicU64,
    cache: Mutex<Option<Arc<StudyResults>>>,
    computing: Mutex<()>,
    /// Sessions persisted so far; held while a session is created.
    created: Mutex<u64>,
    ttl_ms: u64,
    clock: Clock,
}

fn load_subjects(config: &StudyConfig) -> Result<Vec<Subject>, ServiceError> {
    let subjects = match &config.dataset {
        DatasetSource::Csv { path } => {
            let file = File::open(path)
                .map_err(|e| ServiceError::Config(format!("dataset {}: {e}", path.display())))?;
            load_dataset(file, &config.schema, &config.dataset_config)
        }
        DatasetSource::Synthetic { n, seed } => {
            let csv = compas_like_csv(*n, &mut ChaCha8Rng::seed_from_u64(*seed));
            load_dataset(csv.as_bytes(), &config.schema, &config.dataset_config)
        }
    };
    let subjects = subjects.map_err(|e| ServiceError::Config(format!("study `{}`: {e}", config.study_id)))?;
    if subjects.is_empty() {
        return Err(ServiceError::Config(format!("study `{}`: dataset is empty", config.study_id)));
    }
    Ok(subjects)
}

impl Study {
    pub fn open(
        mut config: StudyConfig,
        service: &ServiceConfig,
        clock: Clock,
    ) -> Result<Self, ServiceError> {
        if !valid_study_id(&config.study_id) {
            return Err(ServiceError::Config(format!("invalid study id `{}`", config.study_id)));
        }
        config.questionnaire.count_scaling = config.dataset_config.count_scaling;
        config.questionnaire.validate().map_err(|e| ServiceError::Config(e.to_string()))?;
        config.solver.validate().map_err(ServiceError::Config)?;
        config.hierarchical.validate().map_err(|e| ServiceError::Config(e.to_string()))?;
        config.content.validate(&config.schema).map_err(ServiceError::Config)?;
        let dataset = load_subjects(&config)?;

        let path = service.data_dir.join(format!("{}.jsonl", config.study_id));
        let (log, events) = EventLog::open(&path, service.sync_writes)?;
        let study = Study {
            config,
            dataset,
            sessions: RwLock::new(HashMap::new()),
            log: Mutex::new(log),
            revision: AtomicU64::new(0),
            cache: Mutex::new(None),
            computing: Mutex::new(()),
            created: Mutex::new(0),
            ttl_ms: service.session_ttl_secs.saturating_mul(1000),
            clock,
        };
        study.replay(events, &path.display().to_string())?;
        Ok(study)
    }

    fn replay(&self, events: Vec<(usize, Event)>, path: &str) -> Result<(), ServiceError> {
        let integrity = |line: usize, message: String| ServiceError::Integrity { path: path.to_string(), line, message };
        let k = self.config.schema.k();
        let mut sessions = self.sessions.write();
        let mut revision = 0;
        for (line, event) in events {
            match event {
                Event::SessionCreated { session_id, participant_id, seed, questionnaire, at } => {
                    if sessions.contains_key(&session_id) {
                        return Err(integrity(line, format!("session `{session_id}` created twice")));
                    }
                    let shapes_ok = questionnaire.likert_features.len() == k
                        && questionnaire
                            .pairwise_in_order()
                            .all(|q| q.subject_1.x.len() == k && q.subject_2.x.len() == k);
                    if !shapes_ok {
                        return Err(integrity(line, "questionnaire does not match the study schema".into()));
                    }
                    let session = Session::new(session_id.clone(), participant_id, seed, questionnaire, at);
                    sessions.insert(session_id, Arc::new(Mutex::new(session)));
                }
                other => {
                    let session = sessions
                        .get(other.session_id())
                        .ok_or_else(|| integrity(line, format!("unknown session `{}`", other.session_id())))?;
                    let mut s = session.lock();
                    let was_complete = s.is_complete();
                    s.apply(&other).map_err(|m| integrity(line, m))?;
                    if s.is_complete() && (!was_complete || matches!(other, Event::Demographics { .. })) {
                        revision += 1;
                    }
                }
            }
        }
        self.revision.store(revision, Ordering::SeqCst);
        *self.created.lock() = sessions.len() as u64;
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.config.study_id
    }

    pub fn dataset(&self) -> &[Subject] {
        &self.dataset
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.config.schema.feature_names().into_iter().map(String::from).collect()
    }

    pub fn revision(&self) -> u64 {
        self.revision.load(Ordering::SeqCst)
    }

    pub fn has_session(&self, session_id: &str) -> bool {
        self.sessions.read().contains_key(session_id)
    }

    fn session(&self, session_id: &str) -> Option<Arc<Mutex<Session>>> {
        self.sessions.read().get(session_id).cloned()
    }

    /// Questionnaire seed for the `index`-th session of the study.
    fn session_seed(&self, index: u64) -> u64 {
        match self.config.session_seed {
            Some(base) => {
                let mut rng = ChaCha8Rng::seed_from_u64(base);
                rng.set_stream(index);
                rng.random()
            }
            None => rand::rng().random(),
        }
    }

    pub fn create_session(&self) -> Result<SessionCreated, ServiceError> {
        let mut created = self.created.lock();
        let seed = self.session_seed(*created);
        let config = QuestionnaireConfig { seed, ..self.config.questionnaire.clone() };
        let questionnaire = build_questionnaire(&self.dataset, &self.config.schema, &config)
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
        let session_id = random_hex::<16>();
        let participant_id = format!("p-{}", random_hex::<8>());
        let now = (self.clock)();
        let event = Event::SessionCreated {
            session_id: session_id.clone(),
            participant_id: participant_id.clone(),
            seed,
            questionnaire: questionnaire.clone(),
            at: now,
        };
        self.log.lock().append(&event)?;
        *created += 1;
        let session = Session::new(session_id.clone(), participant_id.clone(), seed, questionnaire, now);
        let created = SessionCreated {
            session_id: session_id.clone(),
            participant_id,
            part_order: session.questionnaire.part_order,
            total_questions: session.total(),
            content: self.config.content.clone(),
        };
        self.sessions.write().insert(session_id, Arc::new(Mutex::new(session)));
        Ok(created)
    }

    fn next_question(&self, session: &Mutex<Session>) -> NextQuestion {
        let s = session.lock();
        s.view(&self.config.schema, &self.config.content, &self.config.dataset_config.count_scaling)
    }

    fn submit_answer(&self, session: &Mutex<Session>, request: SubmitAnswer) -> Result<AnswerAck, ServiceError> {
        let mut s = session.lock();
        let now = (self.clock)();
        let abandoned = s.state(now, self.ttl_ms) == SessionState::Abandoned;
        let plan = s.plan_answer(&request.question_id, &request.answer, request.justification, abandoned, now)?;
        if let Plan::Write(event) = plan {
            let was_complete = s.is_complete();
            self.log.lock().append(&event)?;
            s.apply(&event).map_err(ServiceError::Internal)?;
            if s.is_complete() && !was_complete {
                self.revision.fetch_add(1, Ordering::SeqCst);
            }
        }
        Ok(AnswerAck { cursor: s.cursor(), total_questions: s.total(), done: s.is_complete() })
    }

    fn submit_demographics(
        &self,
        session: &Mutex<Session>,
        demographics: BTreeMap<String, String>,
    ) -> Result<(), ServiceError> {
        let mut s = session.lock();
        if s.demographics.as_ref() == Some(&demographics) {
            return Ok(());
        }
        let event = s.plan_demographics(demographics, (self.clock)())?;
        self.log.lock().append(&event)?;
        s.apply(&event).map_err(ServiceError::Internal)?;
        self.revision.fetch_add(1, Ordering::SeqCst);
        Ok(())
    }

    fn status(&self, session: &Mutex<Session>) -> SessionStatus {
        let s = session.lock();
        SessionStatus {
            session_id: s.session_id.clone(),
            participant_id: s.participant_id.clone(),
            state: s.state((self.clock)(), self.ttl_ms),
            cursor: s.cursor(),
            total_questions: s.total(),
            has_demographics: s.demographics.is_some(),
        }
    }

    /// Results over completed sessions, cached until the next completion or
    /// demographics submission.
    pub fn results(&self) -> Result<Arc<StudyResults>, ServiceError> {
        if let Some(hit) = self.cached() {
            return Ok(hit);
        }
        let _guard = self.computing.lock();
        if let Some(hit) = self.cached() {
            return Ok(hit);
        }
        // read the revision before the snapshot so a racing completion can
        // only make the cached entry look stale, never fresh
        let revision = self.revision();
        let snapshot: Vec<CompletedSession> = {
            let sessions = self.sessions.read();
            let mut completed: Vec<CompletedSession> = sessions
                .values()
                .filter_map(|session| {
                    let s = session.lock();
                    s.is_complete().then(|| CompletedSession {
                        participant: s.participant(),
                        questionnaire: s.questionnaire.clone(),
                        attention: s.attention_checks(),
                    })
                })
                .collect();
            completed.sort_by(|a, b| a.participant.participant_id.cmp(&b.participant.participant_id));
            completed
        };
        let results = Arc::new(compute_results(
            self.id(),
            revision,
            &self.feature_names(),
            &snapshot,
            &self.config.solver,
            &self.config.hierarchical,
        )?);
        *self.cache.lock() = Some(results.clone());
        Ok(results)
    }

    fn cached(&self) -> Option<Arc<StudyResults>> {
        let cache = self.cache.lock();
        cache.as_ref().filter(|r| r.revision == self.revision()).cloned()
    }
}

/// All studies served by one process.
pub struct Service {
    studies: BTreeMap<String, Arc<Study>>,
}

impl Service {
    pub fn open(config: &ServiceConfig) -> Result<Self, ServiceError> {
        Self::with_clock(config, system_clock())
    }

    pub fn with_clock(config: &ServiceConfig, clock: Clock) -> Result<Self, ServiceError> {
        std::fs::create_dir_all(&config.data_dir)?;
        let mut studies = BTreeMap::new();
        for study in &config.studies {
            if studies.contains_key(&study.study_id) {
                return Err(ServiceError::Config(format!("study `{}` configured twice", study.study_id)));
            }
            let opened = Study::open(study.clone(), config, clock.clone())?;
            studies.insert(study.study_id.clone(), Arc::new(opened));
        }
        Ok(Service { studies })
    }

    pub fn study(&self, study_id: &str) -> Result<&Arc<Study>, ServiceError> {
        self.studies
            .get(study_id)
            .ok_or_else(|| ServiceError::NotFound(format!("study `{study_id}`")))
    }

    pub fn study_ids(&self) -> impl Iterator<Item = &str> {
        self.studies.keys().map(String::as_str)
    }

    fn locate(&self, session_id: &str) -> Result<(&Arc<Study>, Arc<Mutex<Session>>), ServiceError> {
        self.studies
            .values()
            .find_map(|study| study.session(session_id).map(|s| (study, s)))
            .ok_or_else(|| ServiceError::NotFound("session".into()))
    }

    pub fn create_session(&self, study_id: &str) -> Result<SessionCreated, ServiceError> {
        self.study(study_id)?.create_session()
    }

    pub fn next_question(&self, session_id: &str) -> Result<NextQuestion, ServiceError> {
        let (study, session) = self.locate(session_id)?;
        Ok(study.next_question(&session))
    }

    pub fn submit_answer(&self, session_id: &str, request: SubmitAnswer) -> Result<AnswerAck, ServiceError> {
        let (study, session) = self.locate(session_id)?;
        study.submit_answer(&session, request)
    }

    pub fn submit_demographics(
        &self,
        session_id: &str,
        demographics: BTreeMap<String, String>,
    ) -> Result<(), ServiceError> {
        let (study, session) = self.locate(session_id)?;
        study.submit_demographics(&session, demographics)
    }

    pub fn session_status(&self, session_id: &str) -> Result<SessionStatus, ServiceError> {
        let (study, session) = self.locate(session_id)?;
        Ok(study.status(&session))
    }

    pub fn results(&self, study_id: &str) -> Result<Arc<StudyResults>, ServiceError> {
        self.study(study_id)?.results()
    }
}
