//! Simulated respondents with known weights, and the question-count
//! calibration curve built from them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    cosine_similarity, dot, l2_norm, Answer, Choice, DomainError, FeatureSchema, PairwiseQuestion,
    Part, Response, Subject, WeightVector,
};
use crate::estimator::{estimate_weights, ComparisonRow, EstimateError, SolverConfig};
use crate::probit;
use crate::questiongen::{GenError, PairSampler};

/// |z| with Φ(|z|) = 0.75.
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.6745;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("utility question `{0}` is missing a predicted label")]
    MissingPrediction(String),
    #[error("invalid simulation configuration: {0}")]
    Config(String),
    #[error("trial {trial} with {n_questions} questions: {source}")]
    Sampling { trial: usize, n_questions: usize, source: GenError },
    #[error("trial {trial} with {n_questions} questions: {source}")]
    Estimation { trial: usize, n_questions: usize, source: EstimateError },
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub dim: usize,
    pub n_trials: usize,
    pub question_counts: Vec<usize>,
    pub confidence_threshold: f64,
    pub seed: u64,
    pub max_attribute_diff: usize,
    /// Multiplies `truth·Δ` before the probit draw; 1 means the unit-norm
    /// truth is used as is. Larger values model more decisive respondents.
    pub signal_scale: f64,
    pub solver: SolverConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dim: 6,
            n_trials: 100,
            question_counts: vec![5, 10, 15, 20, 25, 30, 40],
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            seed: 0,
            max_attribute_diff: 2,
            signal_scale: 1.0,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryPoint {
    pub n_questions: usize,
    pub mean_cosine: f64,
    pub std_cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryCurve {
    pub points: Vec<RecoveryPoint>,
}

impl RecoveryCurve {
    /// Plain-text table, one row per question count.
    pub fn to_table(&self) -> String {
        let mut out = String::from("n_questions  mean_cosine  std_cosine\n");
        for p in &self.points {
            out.push_str(&format!("{:>11}  {:>11.4}  {:>10.4}\n", p.n_questions, p.mean_cosine, p.std_cosine));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_questions,mean_cosine,std_cosine\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.n_questions, p.mean_cosine, p.std_cosine));
        }
        out
    }
}

/// A direction drawn uniformly from the unit sphere in `dim` dimensions.
pub fn sample_truth<R: Rng>(dim: usize, kind: Part, rng: &mut R) -> WeightVector {
    assert!(dim >= 1, "dimension must be positive");
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = l2_norm(&v);
        if norm > 1e-12 {
            let unit = v.iter().map(|c| c / norm).collect();
            return WeightVector::new(unit, kind).expect("unit vector is feasible");
        }
    }
}

/// Answer a comparison with signal `z = truth·Δ`: subject 1 with probability
/// Φ(z), "Clearly" when `|z|` exceeds the threshold.
pub fn simulate_answer<R: Rng>(z: f64, confidence_threshold: f64, rng: &mut R) -> Answer {
    let choice = if rng.random::<f64>() < probit::cdf(z) {
        Choice::Subject1
    } else {
        Choice::Subject2
    };
    Answer::new(choice, z.abs() > confidence_threshold)
}

pub fn simulate_response<R: Rng>(
    truth: &WeightVector,
    question: &PairwiseQuestion,
    confidence_threshold: f64,
    rng: &mut R,
) -> Result<Response, SimError> {
    let delta = question
        .delta()
        .ok_or_else(|| SimError::MissingPrediction(question.question_id.clone()))?;
    if delta.len() != truth.dim() {
        return Err(SimError::Shape { expected: truth.dim(), got: delta.len() });
    }
    let answer = simulate_answer(dot(truth.coefficients(), &delta), confidence_threshold, rng);
    Ok(Response {
        question_id: question.question_id.clone(),
        answer: answer.into(),
        justification: None,
        answered_at: 0,
    })
}

/// Generator for trial `trial`, independent of every other trial's stream.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn run_trial(
    sampler: &PairSampler<'_>,
    part: Part,
    n_questions: usize,
    trial: usize,
    config: &SimConfig,
) -> Result<f64, SimError> {
    let mut rng = trial_rng(config.seed, trial);
    let truth = sample_truth(config.dim, part, &mut rng);
    let mut rows = Vec::with_capacity(n_questions);
    for _ in 0..n_questions {
        let question = sampler
            .sample(&mut rng)
            .map_err(|source| SimError::Sampling { trial, n_questions, source })?;
        let delta = question
            .delta()
            .ok_or_else(|| SimError::MissingPrediction(question.subject_1.id.clone()))?;
        let z = config.signal_scale * dot(truth.coefficients(), &delta);
        let answer = simulate_answer(z, config.confidence_threshold, &mut rng);
        rows.push(ComparisonRow::new(delta, answer));
    }
    let fit = estimate_weights(&rows, config.dim, part, &config.solver)
        .map_err(|source| SimError::Estimation { trial, n_questions, source })?;
    // An all-zero estimate has no direction; score it as orthogonal.
    Ok(cosine_similarity(fit.weights.coefficients(), truth.coefficients()).unwrap_or(0.0))
}

/// Mean and standard deviation of the truth/estimate cosine for each
/// requested question count.
pub fn recovery_curve(
    dataset: &[Subject],
    schema: &FeatureSchema,
    part: Part,
    config: &SimConfig,
) -> Result<RecoveryCurve, SimError> {
    let expected = part.dim(schema.k());
    if config.dim != expected {
        return Err(SimError::Shape { expected, got: config.dim });
    }
    if config.n_trials == 0 || config.question_counts.contains(&0) {
        return Err(SimError::Config("trial and question counts must be positive".into()));
    }
    if config.confidence_threshold.is_nan() || config.confidence_threshold <= 0.0 {
        return Err(SimError::Config("confidence threshold must be positive".into()));
    }
    if !(config.signal_scale > 0.0 && config.signal_scale.is_finite()) {
        return Err(SimError::Config("signal scale must be positive".into()));
    }
    config.solver.validate().map_err(SimError::Config)?;
    let sampler = PairSampler::new(dataset, part, part == Part::Utility, config.max_attribute_diff)?;

    let mut points = Vec::with_capacity(config.question_counts.len());
    for &n in &config.question_counts {
        let cosines = (0..config.n_trials)
            .into_par_iter()
            .map(|trial| run_trial(&sampler, part, n, trial, config))
            .collect::<Result<Vec<f64>, _>>()?;
        let count = cosines.len() as f64;
        let mean = cosines.iter().sum::<f64>() / count;
        let var = if cosines.len() > 1 {
            cosines.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (count - 1.0)
        } else {
            0.0
        };
        points.push(RecoveryPoint { n_questions: n, mean_cosine: mean, std_cosine: var.sqrt() });
    }
    Ok(RecoveryCurve { points })
}
