//! Maximum-likelihood estimation of desert and utility weights under the
//! probit pairwise-comparison model.
//!
//! A participant answering question `q` with signed confidence `a` is assumed
//! to pick subject 1 with probability `Φ(w·Δ)`, where `Δ` is the difference of
//! the two subjects' feature vectors. The fitted `w` minimises
//! `−Σ log Φ(a · w·Δ)` over the unit ball.

mod solver;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{dot, l2_norm, Answer, DomainError, PairwiseQuestion, Part, Participant, WeightVector};
use crate::probit;

pub use solver::{minimize, Problem, Solution, SolverConfig};

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("response references unknown question `{0}`")]
    UnknownQuestion(String),
    #[error("question `{id}` belongs to the {found} part, expected {expected}")]
    WrongPart { id: String, expected: Part, found: Part },
    #[error("utility question `{0}` is missing a predicted label")]
    MissingPrediction(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// One pairwise observation: feature difference and signed answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub delta: Vec<f64>,
    pub answer: Answer,
}

impl ComparisonRow {
    pub fn new(delta: Vec<f64>, answer: Answer) -> Self {
        ComparisonRow { delta, answer }
    }

    fn margin(&self, w: &[f64]) -> f64 {
        f64::from(self.answer.value()) * dot(w, &self.delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub weights: WeightVector,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn check_rows(w: &[f64], rows: &[ComparisonRow]) -> Result<(), EstimateError> {
    if !w.iter().all(|v| v.is_finite()) {
        return Err(EstimateError::NonFinite("weights"));
    }
    for row in rows {
        if row.delta.len() != w.len() {
            return Err(EstimateError::Shape { expected: w.len(), got: row.delta.len() });
        }
        if !row.delta.iter().all(|v| v.is_finite()) {
            return Err(EstimateError::NonFinite("comparison row"));
        }
    }
    Ok(())
}

pub(crate) fn nll_unchecked(w: &[f64], rows: &[ComparisonRow]) -> f64 {
    rows.iter().map(|r| -probit::log_cdf(r.margin(w))).sum()
}

pub(crate) fn gradient_unchecked(w: &[f64], rows: &[ComparisonRow]) -> Vec<f64> {
    let mut g = vec![0.0; w.len()];
    for row in rows {
        let a = f64::from(row.answer.value());
        let scale = -a * probit::inv_mills(a * dot(w, &row.delta));
        for (gi, di) in g.iter_mut().zip(&row.delta) {
            *gi += scale * di;
        }
    }
    g
}

/// `Σ −log Φ(a · w·Δ)` over the rows.
pub fn negative_log_likelihood(w: &[f64], rows: &[ComparisonRow]) -> Result<f64, EstimateError> {
    check_rows(w, rows)?;
    Ok(nll_unchecked(w, rows))
}

/// Gradient of [`negative_log_likelihood`] with respect to `w`.
pub fn nll_gradient(w: &[f64], rows: &[ComparisonRow]) -> Result<Vec<f64>, EstimateError> {
    check_rows(w, rows)?;
    Ok(gradient_unchecked(w, rows))
}

/// Euclidean projection onto the closed unit ball.
pub fn project_unit_ball(w: &[f64]) -> Vec<f64> {
    project_ball(w, 1.0)
}

pub(crate) fn project_ball(w: &[f64], radius: f64) -> Vec<f64> {
    let norm = l2_norm(w);
    if norm <= radius {
        w.to_vec()
    } else {
        w.iter().map(|v| v * radius / norm).collect()
    }
}

struct BallLikelihood<'a> {
    rows: &'a [ComparisonRow],
}

impl Problem for BallLikelihood<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        nll_unchecked(x, self.rows)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        gradient_unchecked(x, self.rows)
    }
    fn project(&self, x: &[f64]) -> Vec<f64> {
        project_unit_ball(x)
    }
}

fn finish(x: Vec<f64>, kind: Part, rows: &[ComparisonRow], iterations: usize, converged: bool) -> Result<FitResult, EstimateError> {
    let log_likelihood = -nll_unchecked(&x, rows);
    Ok(FitResult {
        weights: WeightVector::new(x, kind)?,
        log_likelihood,
        iterations,
        converged,
    })
}

/// Constrained MLE over the unit ball, started from the zero vector.
///
/// Running out of iterations is reported through `converged = false`.
pub fn estimate_weights(
    rows: &[ComparisonRow],
    dim: usize,
    kind: Part,
    config: &SolverConfig,
) -> Result<FitResult, EstimateError> {
    config.validate().map_err(EstimateError::Config)?;
    if rows.is_empty() {
        return Err(EstimateError::InsufficientData("no comparison rows".into()));
    }
    let start = vec![0.0; dim];
    check_rows(&start, rows)?;
    let mut problem = BallLikelihood { rows };
    let sol = minimize(&mut problem, &start, config);
    finish(sol.x, kind, rows, sol.iterations, sol.converged)
}

/// Resolves question ids to the questions a participant was shown.
pub trait QuestionLookup {
    fn question(&self, id: &str) -> Option<&PairwiseQuestion>;
}

impl QuestionLookup for HashMap<String, PairwiseQuestion> {
    fn question(&self, id: &str) -> Option<&PairwiseQuestion> {
        self.get(id)
    }
}

impl QuestionLookup for [PairwiseQuestion] {
    fn question(&self, id: &str) -> Option<&PairwiseQuestion> {
        self.iter().find(|q| q.question_id == id)
    }
}

impl QuestionLookup for Vec<PairwiseQuestion> {
    fn question(&self, id: &str) -> Option<&PairwiseQuestion> {
        self.as_slice().question(id)
    }
}

/// Likelihood rows for one part of a participant's answers. Attention checks
/// and neutral answers are dropped.
pub fn comparison_rows<L: QuestionLookup + ?Sized>(
    participant: &Participant,
    part: Part,
    questions: &L,
) -> Result<Vec<ComparisonRow>, EstimateError> {
    let mut rows = Vec::new();
    for response in participant.responses(part) {
        let question = questions
            .question(&response.question_id)
            .ok_or_else(|| EstimateError::UnknownQuestion(response.question_id.clone()))?;
        if question.part != part {
            return Err(EstimateError::WrongPart {
                id: question.question_id.clone(),
                expected: part,
                found: question.part,
            });
        }
        let Some(answer) = response.answer.signed() else { continue };
        if question.is_attention_check {
            continue;
        }
        let delta = question
            .delta()
            .ok_or_else(|| EstimateError::MissingPrediction(question.question_id.clone()))?;
        rows.push(ComparisonRow::new(delta, answer));
    }
    Ok(rows)
}

fn estimate_part<L: QuestionLookup + ?Sized>(
    participant: &Participant,
    part: Part,
    questions: &L,
    k: usize,
    config: &SolverConfig,
) -> Result<FitResult, EstimateError> {
    let rows = comparison_rows(participant, part, questions)?;
    if rows.is_empty() {
        return Err(EstimateError::InsufficientData(format!(
            "participant `{}` has no scored {part} responses",
            participant.participant_id
        )));
    }
    estimate_weights(&rows, part.dim(k), part, config)
}

/// Desert weights over `[x, y]` for a participant; `k` is the feature count.
pub fn estimate_desert<L: QuestionLookup + ?Sized>(
    participant: &Participant,
    questions: &L,
    k: usize,
    config: &SolverConfig,
) -> Result<FitResult, EstimateError> {
    estimate_part(participant, Part::Desert, questions, k, config)
}

/// Utility weights over `[x, y, ŷ]` for a participant.
pub fn estimate_utility<L: QuestionLookup + ?Sized>(
    participant: &Participant,
    questions: &L,
    k: usize,
    config: &SolverConfig,
) -> Result<FitResult, EstimateError> {
    estimate_part(participant, Part::Utility, questions, k, config)
}

struct SegmentLikelihood {
    rows: Vec<ComparisonRow>,
}

impl Problem for SegmentLikelihood {
    fn value(&self, x: &[f64]) -> f64 {
        nll_unchecked(x, &self.rows)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        gradient_unchecked(x, &self.rows)
    }
    fn project(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0].clamp(-1.0, 1.0)]
    }
}

/// Coordinate the equality-of-odds model may weight: the true label for
/// desert, the prediction for utility.
pub fn eoo_index(part: Part, k: usize) -> usize {
    match part {
        Part::Desert => k,
        Part::Utility => k + 1,
    }
}

/// Equality-of-odds baseline: the MLE restricted to `w = t·e_i`, `|t| ≤ 1`,
/// with `i` from [`eoo_index`].
pub fn estimate_eoo_baseline(
    rows: &[ComparisonRow],
    index: usize,
    kind: Part,
    config: &SolverConfig,
) -> Result<FitResult, EstimateError> {
    config.validate().map_err(EstimateError::Config)?;
    let Some(first) = rows.first() else {
        return Err(EstimateError::InsufficientData("no comparison rows".into()));
    };
    let dim = first.delta.len();
    check_rows(&vec![0.0; dim], rows)?;
    if index >= dim {
        return Err(EstimateError::Shape { expected: index + 1, got: dim });
    }
    let mut problem = SegmentLikelihood {
        rows: rows
            .iter()
            .map(|r| ComparisonRow::new(vec![r.delta[index]], r.answer))
            .collect(),
    };
    let sol = minimize(&mut problem, &[0.0], config);
    let mut w = vec![0.0; dim];
    w[index] = sol.x[0];
    finish(w, kind, rows, sol.iterations, sol.converged)
}
