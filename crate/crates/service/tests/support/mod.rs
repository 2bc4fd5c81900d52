#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use eop_core::domain::{dot, LikertLevel};
use eop_core::simulator::{simulate_answer, DEFAULT_CONFIDENCE_THRESHOLD};
use eop_service::session::{NextQuestion, PartName, QuestionView, SubjectView};
use eop_service::study::{SessionCreated, SubmitAnswer};
use eop_service::{Service, ServiceConfig, StudyConfig};

pub fn small_study(study_id: &str, n_desert: usize, n_utility: usize) -> StudyConfig {
    let mut study = StudyConfig::synthetic(study_id, 300, 7);
    study.questionnaire.n_desert = n_desert;
    study.questionnaire.n_utility = n_utility;
    study
}

pub fn service_config(dir: &Path, studies: Vec<StudyConfig>) -> ServiceConfig {
    ServiceConfig::new(dir, studies)
}

/// Attribute values in display order: the features, then y, then ŷ when shown.
pub fn features(subject: &SubjectView) -> Vec<f64> {
    subject.attributes.iter().map(|a| a.value).collect()
}

/// A respondent answering comparisons from fixed weights through the probit
/// model, and Likert items by a fixed irrelevance set.
pub struct Respondent {
    pub desert: Vec<f64>,
    pub utility: Vec<f64>,
    pub irrelevant: BTreeSet<String>,
    pub justification: Option<String>,
    rng: ChaCha8Rng,
}

impl Respondent {
    pub fn new(desert: Vec<f64>, utility: Vec<f64>, seed: u64) -> Self {
        Respondent { desert, utility, irrelevant: BTreeSet::new(), justification: None, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn answer(&mut self, view: &QuestionView) -> Value {
        match view.part {
            PartName::Likert => {
                let feature = view.feature.as_deref().expect("likert item names its feature");
                let level = if self.irrelevant.contains(feature) { LikertLevel::Disagree } else { LikertLevel::Agree };
                serde_json::to_value(level).unwrap()
            }
            PartName::Desert | PartName::Utility => {
                let [s1, s2] = view.subjects.as_ref().expect("comparison shows two subjects");
                let (a, b) = (features(s1), features(s2));
                let delta: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
                let truth = if view.part == PartName::Desert { &self.desert } else { &self.utility };
                assert_eq!(truth.len(), delta.len(), "view exposes exactly the part's attributes");
                let answer = simulate_answer(dot(truth, &delta), DEFAULT_CONFIDENCE_THRESHOLD, &mut self.rng);
                json!(answer.value())
            }
        }
    }

    pub fn submission(&mut self, view: &QuestionView) -> SubmitAnswer {
        SubmitAnswer {
            question_id: view.question_id.clone(),
            answer: self.answer(view),
            justification: self.justification.clone(),
        }
    }
}

pub fn question(next: NextQuestion) -> Option<QuestionView> {
    match next {
        NextQuestion::Question(view) => Some(*view),
        NextQuestion::Done { done } => {
            assert!(done);
            None
        }
    }
}

/// Answers up to `limit` questions of an existing session in process.
pub fn answer_some(service: &Service, session_id: &str, respondent: &mut Respondent, limit: usize) -> usize {
    let mut answered = 0;
    while answered < limit {
        let Some(view) = question(service.next_question(session_id).unwrap()) else { break };
        let ack = service.submit_answer(session_id, respondent.submission(&view)).unwrap();
        assert_eq!(ack.cursor, view.index + 1);
        answered += 1;
    }
    answered
}

/// Creates a session and answers every question in process.
pub fn complete_session(service: &Service, study_id: &str, respondent: &mut Respondent) -> SessionCreated {
    let created = service.create_session(study_id).unwrap();
    answer_some(service, &created.session_id, respondent, usize::MAX);
    created
}

pub fn line_count(path: &Path) -> usize {
    std::fs::read_to_string(path).map(|s| s.lines().count()).unwrap_or(0)
}
