//! Core data model shared by every stage of the pipeline.
//!
//! All types are plain values: once constructed they are never mutated in
//! place, and their serde encodings are the canonical JSON wire format.

mod dataset;
pub mod synthetic;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{load_dataset, CountScaling, DatasetConfig, Encoding, FeatureKind, FeatureSchema, FeatureSpec};

/// Slack allowed on the unit-ball constraint when validating weight vectors.
pub const FEASIBILITY_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("dataset is missing column `{0}`")]
    MissingColumn(String),
    #[error("record {row}: {message}")]
    Record { row: usize, message: String },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("invalid subject: {0}")]
    Subject(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("answer must be one of -2, -1, 1, 2; got {0}")]
    InvalidAnswer(i64),
    #[error("weight vector must be finite with norm at most 1, got norm {0}")]
    Infeasible(f64),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Which questionnaire a pairwise question belongs to, and equivalently which
/// kind of weight vector its answers estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Desert,
    Utility,
}

impl Part {
    /// Weight dimension for a schema with `k` features: `[x, y]` or `[x, y, ŷ]`.
    pub fn dim(self, k: usize) -> usize {
        match self {
            Part::Desert => k + 1,
            Part::Utility => k + 2,
        }
    }
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Part::Desert => "desert",
            Part::Utility => "utility",
        })
    }
}

/// A decision subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub id: String,
    pub x: Vec<f64>,
    pub y: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_hat: Option<u8>,
}

impl Subject {
    /// `[x, y]`, the vector desert weights act on.
    pub fn desert_features(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        v.push(f64::from(self.y));
        v
    }

    /// `[x, y, ŷ]` with an explicit prediction, which may differ from `y_hat`.
    pub fn utility_features(&self, y_hat: u8) -> Vec<f64> {
        let mut v = self.desert_features();
        v.push(f64::from(y_hat));
        v
    }

    /// Feature vector for the given part; `None` for utility without a prediction.
    pub fn features(&self, part: Part) -> Option<Vec<f64>> {
        match part {
            Part::Desert => Some(self.desert_features()),
            Part::Utility => self.y_hat.map(|p| self.utility_features(p)),
        }
    }

    /// Checks the subject against a schema's arity and feature kinds.
    pub fn validate(&self, schema: &FeatureSchema) -> Result<(), DomainError> {
        if self.x.len() != schema.k() {
            return Err(DomainError::Shape { expected: schema.k(), got: self.x.len() });
        }
        for (value, spec) in self.x.iter().zip(&schema.features) {
            let ok = match spec.kind {
                FeatureKind::Binary => *value == 0.0 || *value == 1.0,
                FeatureKind::BoundedCount => value.is_finite() && *value >= 0.0,
            };
            if !ok {
                return Err(DomainError::Subject(format!(
                    "{}: feature `{}` has value {}",
                    self.id, spec.name, value
                )));
            }
        }
        if self.y > 1 || self.y_hat.is_some_and(|p| p > 1) {
            return Err(DomainError::Subject(format!("{}: labels must be 0 or 1", self.id)));
        }
        Ok(())
    }
}

/// Which of the two displayed subjects a respondent picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    Subject1,
    Subject2,
}

/// A signed, confidence-weighted pairwise answer in {−2, −1, +1, +2}.
///
/// The sign selects the subject (positive is subject 1) and the magnitude is
/// the confidence: 2 for "Clearly", 1 for "Possibly".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct Answer(i8);

impl Answer {
    pub fn new(choice: Choice, clearly: bool) -> Self {
        let magnitude = if clearly { 2 } else { 1 };
        match choice {
            Choice::Subject1 => Answer(magnitude),
            Choice::Subject2 => Answer(-magnitude),
        }
    }

    pub fn value(self) -> i8 {
        self.0
    }

    pub fn choice(self) -> Choice {
        if self.0 > 0 {
            Choice::Subject1
        } else {
            Choice::Subject2
        }
    }

    pub fn confidence(self) -> u8 {
        self.0.unsigned_abs()
    }

    /// The same judgement expressed for the question with its subjects swapped.
    pub fn mirrored(self) -> Self {
        Answer(-self.0)
    }
}

impl TryFrom<i64> for Answer {
    type Error = DomainError;

    fn try_from(v: i64) -> Result<Self, Self::Error> {
        match v {
            -2 | -1 | 1 | 2 => Ok(Answer(v as i8)),
            _ => Err(DomainError::InvalidAnswer(v)),
        }
    }
}

impl From<Answer> for i64 {
    fn from(a: Answer) -> i64 {
        i64::from(a.0)
    }
}

/// A recorded pairwise answer: either a signed answer, or the neutral
/// "no preference" marker of the neutral-option questionnaire variant.
/// Neutral answers are kept for the record but carry no likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairwiseAnswer {
    Signed(Answer),
    Neutral(NoPreference),
}

impl PairwiseAnswer {
    pub fn signed(self) -> Option<Answer> {
        match self {
            PairwiseAnswer::Signed(a) => Some(a),
            PairwiseAnswer::Neutral(_) => None,
        }
    }
}

impl From<Answer> for PairwiseAnswer {
    fn from(a: Answer) -> Self {
        PairwiseAnswer::Signed(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoPreference {
    NoPreference,
}

/// One answered pairwise question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub question_id: String,
    pub answer: PairwiseAnswer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub justification: Option<String>,
    /// Milliseconds since the Unix epoch.
    pub answered_at: u64,
}

/// A two-subject comparison shown to a participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseQuestion {
    pub question_id: String,
    pub part: Part,
    pub subject_1: Subject,
    pub subject_2: Subject,
    pub is_attention_check: bool,
    /// Whether the subjects' predicted labels are displayed.
    pub show_prediction: bool,
    /// The dominant subject of an attention check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_choice: Option<Choice>,
}

impl PairwiseQuestion {
    /// Attributes compared by the difference rule: the features, the true
    /// label and, when it is displayed, the prediction.
    pub fn attributes(&self, subject: &Subject) -> Vec<f64> {
        let mut v = subject.desert_features();
        if self.show_prediction {
            v.push(subject.y_hat.map_or(f64::NAN, f64::from));
        }
        v
    }

    /// Number of displayed attributes on which the two subjects differ.
    pub fn differing_attributes(&self) -> usize {
        self.attributes(&self.subject_1)
            .iter()
            .zip(self.attributes(&self.subject_2))
            .filter(|(a, b)| **a != *b)
            .count()
    }

    /// Difference vector `features(subject_1) − features(subject_2)` for this
    /// question's part. `None` when a utility question lacks predictions.
    pub fn delta(&self) -> Option<Vec<f64>> {
        let a = self.subject_1.features(self.part)?;
        let b = self.subject_2.features(self.part)?;
        Some(a.iter().zip(&b).map(|(p, q)| p - q).collect())
    }
}

/// The four-point agreement scale used for the per-feature questions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikertLevel {
    Disagree,
    SomewhatDisagree,
    SomewhatAgree,
    Agree,
}

impl LikertLevel {
    pub const ALL: [LikertLevel; 4] = [
        LikertLevel::Disagree,
        LikertLevel::SomewhatDisagree,
        LikertLevel::SomewhatAgree,
        LikertLevel::Agree,
    ];

    /// Label as displayed to participants.
    pub fn label(self) -> &'static str {
        match self {
            LikertLevel::Disagree => "Disagree",
            LikertLevel::SomewhatDisagree => "Somewhat Disagree",
            LikertLevel::SomewhatAgree => "Somewhat Agree",
            LikertLevel::Agree => "Agree",
        }
    }

    /// Disagreeing that a feature may justify unequal treatment marks it as
    /// morally irrelevant, i.e. part of the circumstance.
    pub fn is_irrelevant_vote(self) -> bool {
        matches!(self, LikertLevel::Disagree | LikertLevel::SomewhatDisagree)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikertResponse {
    pub feature_index: usize,
    pub level: LikertLevel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub justification: Option<String>,
}

/// Linear desert (`[x, y]`) or utility (`[x, y, ŷ]`) coefficients inside the
/// unit ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeightVector")]
pub struct WeightVector {
    coefficients: Vec<f64>,
    kind: Part,
}

#[derive(Deserialize)]
struct RawWeightVector {
    coefficients: Vec<f64>,
    kind: Part,
}

impl TryFrom<RawWeightVector> for WeightVector {
    type Error = DomainError;

    fn try_from(raw: RawWeightVector) -> Result<Self, Self::Error> {
        WeightVector::new(raw.coefficients, raw.kind)
    }
}

impl WeightVector {
    pub fn new(coefficients: Vec<f64>, kind: Part) -> Result<Self, DomainError> {
        let norm = l2_norm(&coefficients);
        if !coefficients.iter().all(|c| c.is_finite()) || norm > 1.0 + FEASIBILITY_EPS {
            return Err(DomainError::Infeasible(norm));
        }
        Ok(WeightVector { coefficients, kind })
    }

    pub fn zeros(dim: usize, kind: Part) -> Self {
        WeightVector { coefficients: vec![0.0; dim], kind }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn kind(&self) -> Part {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.coefficients)
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }
}

/// Per-feature morally-irrelevant flags; the flagged features form the circumstance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircumstanceProfile {
    pub irrelevant_flags: Vec<bool>,
}

impl CircumstanceProfile {
    pub fn flagged(&self) -> impl Iterator<Item = usize> + '_ {
        self.irrelevant_flags
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f.then_some(i))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub participant_id: String,
    #[serde(default)]
    pub likert: Vec<LikertResponse>,
    #[serde(default)]
    pub desert_responses: Vec<Response>,
    #[serde(default)]
    pub utility_responses: Vec<Response>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demographics: Option<BTreeMap<String, String>>,
}

impl Participant {
    pub fn new(participant_id: impl Into<String>) -> Self {
        Participant {
            participant_id: participant_id.into(),
            likert: Vec::new(),
            desert_responses: Vec::new(),
            utility_responses: Vec::new(),
            demographics: None,
        }
    }

    pub fn responses(&self, part: Part) -> &[Response] {
        match part {
            Part::Desert => &self.desert_responses,
            Part::Utility => &self.utility_responses,
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// `a·b / (‖a‖‖b‖)`, clamped to [−1, 1] against rounding.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, DomainError> {
    if a.len() != b.len() {
        return Err(DomainError::Shape { expected: a.len(), got: b.len() });
    }
    let (na, nb) = (l2_norm(a), l2_norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(DomainError::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}
