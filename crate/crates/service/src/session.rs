//! One participant's progress through a questionnaire.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use eop_core::aggregator::DEMOGRAPHIC_ATTRIBUTES;
use eop_core::domain::{
    Answer, CountScaling, FeatureSchema, LikertLevel, LikertResponse, PairwiseAnswer, PairwiseQuestion, Part,
    Participant, Response, Subject,
};
use eop_core::questiongen::Questionnaire;

use crate::content::{self, LikertOption, PairwiseOption, PartIntro, StudyContent};
use crate::error::ServiceError;
use crate::store::Event;

pub const MAX_JUSTIFICATION_CHARS: usize = 5000;
pub const MAX_DEMOGRAPHIC_CHARS: usize = 200;

/// A stored answer: a Likert level for part 1, a signed confidence (or
/// neutral) for the comparison parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnswerValue {
    Likert(LikertLevel),
    Pairwise(PairwiseAnswer),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    InProgress,
    Completed,
    Abandoned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Item {
    Likert(usize),
    Pairwise(Part, usize),
}

#[derive(Debug, Clone, PartialEq)]
struct Recorded {
    value: AnswerValue,
    justification: Option<String>,
    at: u64,
}

/// What accepting a submission requires.
#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    /// Exact resend of the stored answer: acknowledge without writing.
    Duplicate { cursor: usize },
    Write(Event),
}

#[derive(Debug, Clone)]
pub struct Session {
    pub session_id: String,
    pub participant_id: String,
    pub seed: u64,
    pub questionnaire: Questionnaire,
    items: Vec<Item>,
    answers: Vec<Recorded>,
    pub demographics: Option<BTreeMap<String, String>>,
    pub created_at: u64,
    pub updated_at: u64,
}

fn parse_answer(item: Item, raw: &serde_json::Value, allow_neutral: bool) -> Result<AnswerValue, ServiceError> {
    match item {
        Item::Likert(_) => serde_json::from_value::<LikertLevel>(raw.clone())
            .map(AnswerValue::Likert)
            .map_err(|_| {
                ServiceError::Validation(format!(
                    "expected one of \"disagree\", \"somewhat_disagree\", \"somewhat_agree\", \"agree\"; got {raw}"
                ))
            }),
        Item::Pairwise(..) => {
            let answer = serde_json::from_value::<PairwiseAnswer>(raw.clone()).map_err(|_| {
                ServiceError::Validation(format!("expected one of 2, 1, -1, -2 or \"no_preference\"; got {raw}"))
            })?;
            if answer.signed().is_none() && !allow_neutral {
                return Err(ServiceError::Validation("this study does not offer a no-preference answer".into()));
            }
            Ok(AnswerValue::Pairwise(answer))
        }
    }
}

fn check_justification(j: &Option<String>) -> Result<(), ServiceError> {
    match j {
        Some(text) if text.chars().count() > MAX_JUSTIFICATION_CHARS => Err(ServiceError::Validation(format!(
            "justification longer than {MAX_JUSTIFICATION_CHARS} characters"
        ))),
        _ => Ok(()),
    }
}

impl Session {
    pub fn new(session_id: String, participant_id: String, seed: u64, questionnaire: Questionnaire, at: u64) -> Self {
        let mut items: Vec<Item> = (0..questionnaire.likert_features.len()).map(Item::Likert).collect();
        for part in questionnaire.part_order {
            items.extend((0..questionnaire.questions(part).len()).map(|i| Item::Pairwise(part, i)));
        }
        Session {
            session_id,
            participant_id,
            seed,
            questionnaire,
            items,
            answers: Vec::new(),
            demographics: None,
            created_at: at,
            updated_at: at,
        }
    }

    pub fn cursor(&self) -> usize {
        self.answers.len()
    }

    pub fn total(&self) -> usize {
        self.items.len()
    }

    pub fn is_complete(&self) -> bool {
        self.cursor() == self.total()
    }

    pub fn state(&self, now: u64, ttl_ms: u64) -> SessionState {
        if self.is_complete() {
            SessionState::Completed
        } else if now.saturating_sub(self.updated_at) > ttl_ms {
            SessionState::Abandoned
        } else {
            SessionState::InProgress
        }
    }

    pub fn item(&self, index: usize) -> Option<Item> {
        self.items.get(index).copied()
    }

    fn pairwise(&self, part: Part, i: usize) -> &PairwiseQuestion {
        &self.questionnaire.questions(part)[i]
    }

    pub fn question_id(&self, index: usize) -> Option<String> {
        self.item(index).map(|item| match item {
            Item::Likert(j) => format!("likert-{j}"),
            Item::Pairwise(part, i) => self.pairwise(part, i).question_id.clone(),
        })
    }

    /// Decides how to handle a submission without changing any state.
    pub fn plan_answer(
        &self,
        question_id: &str,
        raw: &serde_json::Value,
        justification: Option<String>,
        abandoned: bool,
        now: u64,
    ) -> Result<Plan, ServiceError> {
        check_justification(&justification)?;
        let justification = justification.filter(|j| !j.trim().is_empty());
        let cursor = self.cursor();
        let allow_neutral = self.questionnaire.allow_neutral;

        if cursor > 0 && self.question_id(cursor - 1).as_deref() == Some(question_id) {
            let value = parse_answer(self.items[cursor - 1], raw, allow_neutral)?;
            let stored = &self.answers[cursor - 1];
            if stored.value == value && stored.justification == justification {
                return Ok(Plan::Duplicate { cursor });
            }
            if self.is_complete() {
                return Err(ServiceError::conflict("session_completed", "the session is already completed"));
            }
            if abandoned {
                return Err(ServiceError::conflict("session_abandoned", "the session has expired"));
            }
            return Ok(Plan::Write(Event::Answer {
                session_id: self.session_id.clone(),
                question_id: question_id.to_string(),
                answer: value,
                justification,
                revision: true,
                at: now,
            }));
        }

        if self.is_complete() {
            return Err(ServiceError::conflict("session_completed", "the session is already completed"));
        }
        if abandoned {
            return Err(ServiceError::conflict("session_abandoned", "the session has expired"));
        }
        let expected = self.question_id(cursor).unwrap_or_default();
        if expected != question_id {
            return Err(ServiceError::conflict(
                "out_of_order",
                format!("expected an answer to `{expected}`, got `{question_id}`"),
            ));
        }
        let value = parse_answer(self.items[cursor], raw, allow_neutral)?;
        Ok(Plan::Write(Event::Answer {
            session_id: self.session_id.clone(),
            question_id: question_id.to_string(),
            answer: value,
            justification,
            revision: false,
            at: now,
        }))
    }

    pub fn plan_demographics(&self, demographics: BTreeMap<String, String>, now: u64) -> Result<Event, ServiceError> {
        if !self.is_complete() {
            return Err(ServiceError::conflict(
                "session_incomplete",
                "demographics are collected after the last question",
            ));
        }
        for (key, value) in &demographics {
            if !DEMOGRAPHIC_ATTRIBUTES.contains(&key.as_str()) {
                return Err(ServiceError::Validation(format!(
                    "unknown demographic field `{key}`; expected one of {}",
                    DEMOGRAPHIC_ATTRIBUTES.join(", ")
                )));
            }
            if value.chars().count() > MAX_DEMOGRAPHIC_CHARS {
                return Err(ServiceError::Validation(format!("value for `{key}` is too long")));
            }
        }
        Ok(Event::Demographics { session_id: self.session_id.clone(), demographics, at: now })
    }

    /// Applies a persisted event. Used both live and when replaying the log,
    /// so every check here doubles as a referential-integrity check.
    pub fn apply(&mut self, event: &Event) -> Result<(), String> {
        match event {
            Event::SessionCreated { .. } => Err("session created twice".into()),
            Event::Answer { question_id, answer, justification, revision, at, .. } => {
                let index = if *revision {
                    self.cursor().checked_sub(1).ok_or("revision before any answer")?
                } else {
                    self.cursor()
                };
                let item = self.item(index).ok_or("answer after the last question")?;
                if self.question_id(index).as_deref() != Some(question_id.as_str()) {
                    return Err(format!("answer references `{question_id}` out of order"));
                }
                let matches_kind = matches!(
                    (item, answer),
                    (Item::Likert(_), AnswerValue::Likert(_)) | (Item::Pairwise(..), AnswerValue::Pairwise(_))
                );
                if !matches_kind {
                    return Err(format!("answer to `{question_id}` has the wrong kind"));
                }
                let recorded = Recorded { value: *answer, justification: justification.clone(), at: *at };
                if *revision {
                    self.answers[index] = recorded;
                } else {
                    self.answers.push(recorded);
                }
                self.updated_at = self.updated_at.max(*at);
                Ok(())
            }
            Event::Demographics { demographics, at, .. } => {
                if !self.is_complete() {
                    return Err("demographics before completion".into());
                }
                self.demographics = Some(demographics.clone());
                self.updated_at = self.updated_at.max(*at);
                Ok(())
            }
        }
    }

    /// The effective answers as a domain participant.
    pub fn participant(&self) -> Participant {
        let mut p = Participant::new(self.participant_id.clone());
        for (index, recorded) in self.answers.iter().enumerate() {
            match (self.items[index], recorded.value) {
                (Item::Likert(feature_index), AnswerValue::Likert(level)) => p.likert.push(LikertResponse {
                    feature_index,
                    level,
                    justification: recorded.justification.clone(),
                }),
                (Item::Pairwise(part, i), AnswerValue::Pairwise(answer)) => {
                    let response = Response {
                        question_id: self.pairwise(part, i).question_id.clone(),
                        answer,
                        justification: recorded.justification.clone(),
                        answered_at: recorded.at,
                    };
                    match part {
                        Part::Desert => p.desert_responses.push(response),
                        Part::Utility => p.utility_responses.push(response),
                    }
                }
                _ => unreachable!("apply() checks answer kinds"),
            }
        }
        p.demographics = self.demographics.clone();
        p
    }

    /// `(passed, total)` over answered attention checks. Only the expected
    /// subject, at either confidence, passes.
    pub fn attention_checks(&self) -> (usize, usize) {
        let mut passed = 0;
        let mut total = 0;
        for (index, recorded) in self.answers.iter().enumerate() {
            let Item::Pairwise(part, i) = self.items[index] else { continue };
            let q = self.pairwise(part, i);
            if !q.is_attention_check {
                continue;
            }
            total += 1;
            let AnswerValue::Pairwise(answer) = recorded.value else { continue };
            if let (Some(expected), Some(given)) = (q.expected_choice, answer.signed().map(Answer::choice)) {
                if expected == given {
                    passed += 1;
                }
            }
        }
        (passed, total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeView {
    /// Schema column name.
    pub name: String,
    pub label: String,
    pub value: f64,
    pub display: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectView {
    pub attributes: Vec<AttributeView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartName {
    Likert,
    Desert,
    Utility,
}

/// What a participant sees for one question. Attention checks look exactly
/// like ordinary comparisons, and ŷ appears only where the study shows it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionView {
    pub done: bool,
    pub question_id: String,
    pub index: usize,
    pub total_questions: usize,
    pub part: PartName,
    /// Present on the first question of each part.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub part_intro: Option<PartIntro>,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statement: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subjects: Option<[SubjectView; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub likert_options: Vec<LikertOption>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairwise_options: Vec<PairwiseOption>,
    /// The one earlier question that may still be revised.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous_question_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NextQuestion {
    Question(Box<QuestionView>),
    Done { done: bool },
}

fn subject_view(
    subject: &Subject,
    show_prediction: bool,
    schema: &FeatureSchema,
    content: &StudyContent,
    scaling: &CountScaling,
) -> SubjectView {
    let mut attributes: Vec<AttributeView> = schema
        .features
        .iter()
        .zip(&subject.x)
        .zip(&content.features)
        .map(|((spec, &value), display)| AttributeView {
            name: spec.name.clone(),
            label: display.label.clone(),
            value,
            display: content::render_value(display, spec.kind, value, scaling),
        })
        .collect();
    let binary = eop_core::domain::FeatureKind::Binary;
    let y = f64::from(subject.y);
    attributes.push(AttributeView {
        name: schema.label_name.clone(),
        label: content.label.label.clone(),
        value: y,
        display: content::render_value(&content.label, binary, y, scaling),
    });
    if show_prediction {
        if let Some(y_hat) = subject.y_hat {
            let v = f64::from(y_hat);
            attributes.push(AttributeView {
                name: schema.prediction_name.clone(),
                label: content.prediction.label.clone(),
                value: v,
                display: content::render_value(&content.prediction, binary, v, scaling),
            });
        }
    }
    SubjectView { attributes }
}

impl Session {
    pub fn view(&self, schema: &FeatureSchema, content: &StudyContent, scaling: &CountScaling) -> NextQuestion {
        let index = self.cursor();
        let Some(item) = self.item(index) else {
            return NextQuestion::Done { done: true };
        };
        let first_in_part = index == 0 || {
            let prev = self.items[index - 1];
            !matches!((prev, item), (Item::Likert(_), Item::Likert(_)))
                && !matches!((prev, item), (Item::Pairwise(a, _), Item::Pairwise(b, _)) if a == b)
        };
        let previous_question_id = index.checked_sub(1).and_then(|i| self.question_id(i));
        let question_id = self.question_id(index).unwrap_or_default();
        let view = match item {
            Item::Likert(j) => QuestionView {
                done: false,
                question_id,
                index,
                total_questions: self.total(),
                part: PartName::Likert,
                part_intro: first_in_part.then(|| content.intro(None).clone()),
                prompt: content.likert_prompt.clone(),
                statement: Some(content.likert_text(j)),
                feature: Some(self.questionnaire.likert_features[j].clone()),
                subjects: None,
                likert_options: content::likert_options(),
                pairwise_options: Vec::new(),
                previous_question_id,
            },
            Item::Pairwise(part, i) => {
                let q = self.pairwise(part, i);
                QuestionView {
                    done: false,
                    question_id,
                    index,
                    total_questions: self.total(),
                    part: match part {
                        Part::Desert => PartName::Desert,
                        Part::Utility => PartName::Utility,
                    },
                    part_intro: first_in_part.then(|| content.intro(Some(part)).clone()),
                    prompt: content.pairwise_prompt(part).to_string(),
                    statement: None,
                    feature: None,
                    subjects: Some([
                        subject_view(&q.subject_1, q.show_prediction, schema, content, scaling),
                        subject_view(&q.subject_2, q.show_prediction, schema, content, scaling),
                    ]),
                    likert_options: Vec::new(),
                    pairwise_options: content::pairwise_options(self.questionnaire.allow_neutral),
                    previous_question_id,
                }
            }
        };
        NextQuestion::Question(Box::new(view))
    }
}
