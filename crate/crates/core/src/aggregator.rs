//! Society-level aggregation: majority vote on circumstances, averaged
//! weights, and the hierarchical model where each participant's vector is a
//! perturbation of a shared society vector.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{dot, l2_norm, CircumstanceProfile, DomainError, Part, Participant, WeightVector};
use crate::estimator::{gradient_unchecked, minimize, nll_unchecked, ComparisonRow, FitResult, Problem, SolverConfig};

/// Attribute names accepted by [`group_by_demographic`].
pub const DEMOGRAPHIC_ATTRIBUTES: [&str; 5] = ["gender", "race", "age_bracket", "education", "political_view"];

/// Stopping rule for the inner search over the society block.
const PROJECTION_SOLVER: SolverConfig = SolverConfig {
    max_iterations: 500,
    gradient_tolerance: 1e-13,
    initial_step: 1.0,
    backtracking_factor: 0.5,
    seed: None,
};

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("nothing to aggregate")]
    Empty,
    #[error("participant `{0}` has an incomplete Likert questionnaire")]
    IncompleteLikert(String),
    #[error("participant `{0}` has no comparison rows")]
    NoRows(String),
    #[error("cannot mix {0} and {1} weights")]
    MixedKinds(Part, Part),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("unknown demographic attribute `{0}`")]
    UnknownAttribute(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HierarchicalConfig {
    pub lambda: f64,
    pub outer_iterations: usize,
    /// Step-size controls for the joint projected-gradient iterations.
    pub inner: SolverConfig,
    pub tolerance: f64,
}

impl Default for HierarchicalConfig {
    fn default() -> Self {
        HierarchicalConfig {
            lambda: 0.5,
            outer_iterations: 200,
            inner: SolverConfig::default(),
            tolerance: 1e-6,
        }
    }
}

impl HierarchicalConfig {
    pub fn validate(&self) -> Result<(), AggregateError> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(AggregateError::Config("lambda must be a nonnegative number".into()));
        }
        if self.outer_iterations == 0 {
            return Err(AggregateError::Config("outer_iterations must be positive".into()));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(AggregateError::Config("tolerance must be positive".into()));
        }
        self.inner.validate().map_err(AggregateError::Config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMethod {
    Average,
    Hierarchical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalDiagnostics {
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Total negative log-likelihood at the start and after every iteration.
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub society_weights: WeightVector,
    pub per_participant: BTreeMap<String, WeightVector>,
    pub method: AggregationMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_log_likelihood: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<HierarchicalDiagnostics>,
}

/// Feature `j` is a circumstance when strictly more than half of the
/// participants rate it morally irrelevant. A later Likert row for the same
/// feature supersedes an earlier one.
pub fn vote_circumstance(participants: &[Participant], k: usize) -> Result<CircumstanceProfile, AggregateError> {
    if participants.is_empty() {
        return Err(AggregateError::Empty);
    }
    let mut votes = vec![0usize; k];
    for p in participants {
        let mut levels = vec![None; k];
        for row in &p.likert {
            let slot = levels
                .get_mut(row.feature_index)
                .ok_or_else(|| AggregateError::IncompleteLikert(p.participant_id.clone()))?;
            *slot = Some(row.level);
        }
        for (j, level) in levels.into_iter().enumerate() {
            let level = level.ok_or_else(|| AggregateError::IncompleteLikert(p.participant_id.clone()))?;
            if level.is_irrelevant_vote() {
                votes[j] += 1;
            }
        }
    }
    let n = participants.len();
    Ok(CircumstanceProfile { irrelevant_flags: votes.into_iter().map(|v| 2 * v > n).collect() })
}

/// Coefficient-wise mean of the vectors.
pub fn aggregate_average(vectors: &[WeightVector]) -> Result<WeightVector, AggregateError> {
    let first = vectors.first().ok_or(AggregateError::Empty)?;
    let mut sum = vec![0.0; first.dim()];
    for v in vectors {
        if v.kind() != first.kind() {
            return Err(AggregateError::MixedKinds(first.kind(), v.kind()));
        }
        if v.dim() != first.dim() {
            return Err(AggregateError::Shape { expected: first.dim(), got: v.dim() });
        }
        for (s, c) in sum.iter_mut().zip(v.coefficients()) {
            *s += c;
        }
    }
    let n = vectors.len() as f64;
    Ok(WeightVector::new(sum.into_iter().map(|s| s / n).collect(), first.kind())?)
}

/// [`aggregate_average`] over named vectors, keeping them as the
/// per-participant entries.
pub fn aggregate_average_named(vectors: &BTreeMap<String, WeightVector>) -> Result<AggregateResult, AggregateError> {
    let list: Vec<WeightVector> = vectors.values().cloned().collect();
    Ok(AggregateResult {
        society_weights: aggregate_average(&list)?,
        per_participant: vectors.clone(),
        method: AggregationMethod::Average,
        total_log_likelihood: None,
        diagnostics: None,
    })
}

/// Joint variable layout: `[θ, θ_1, …, θ_P]`, each block of length `dim`.
struct Hierarchical<'a> {
    rows: Vec<&'a [ComparisonRow]>,
    dim: usize,
    lambda: f64,
    trace: Vec<f64>,
}

impl Hierarchical<'_> {
    fn block<'x>(&self, x: &'x [f64], b: usize) -> &'x [f64] {
        &x[b * self.dim..(b + 1) * self.dim]
    }

    fn project_balls(&self, x: &mut [f64]) {
        for chunk in x.chunks_mut(self.dim) {
            let norm = l2_norm(chunk);
            if norm > 1.0 {
                chunk.iter_mut().for_each(|v| *v /= norm);
            }
        }
    }

    /// Pulls every `θ_p` back towards `θ` along the connecting segment until
    /// it lies within `λ`. Keeps unit-ball feasibility by convexity.
    fn repair(&self, x: &mut [f64]) {
        self.project_balls(x);
        let d = self.dim;
        let (theta, rest) = x.split_at_mut(d);
        for chunk in rest.chunks_mut(d) {
            let gap = l2_norm(&chunk.iter().zip(theta.iter()).map(|(c, t)| c - t).collect::<Vec<_>>());
            if gap > self.lambda {
                let s = self.lambda / gap;
                for (c, t) in chunk.iter_mut().zip(theta.iter()) {
                    *c = t + s * (*c - t);
                }
            }
        }
    }
}

impl Problem for Hierarchical<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .enumerate()
            .map(|(p, rows)| nll_unchecked(self.block(x, p + 1), rows))
            .sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for (p, rows) in self.rows.iter().enumerate() {
            g.extend(gradient_unchecked(self.block(x, p + 1), rows));
        }
        g
    }

    /// Exact projection onto the feasible set, reduced to a search over `θ`
    /// alone (see [`SocietyProjection`]), then a feasibility repair to
    /// absorb rounding.
    fn project(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut inner = SocietyProjection { target: &x[..d], members: x[d..].chunks(d).collect(), lambda: self.lambda };
        let theta = minimize(&mut inner, &x[..d], &PROJECTION_SOLVER).x;
        let mut z = theta.clone();
        for member in &inner.members {
            z.extend(nearest_in_lens(member, &theta, self.lambda).0);
        }
        self.repair(&mut z);
        z
    }

    fn observe(&mut self, value: f64) {
        self.trace.push(value);
    }
}

/// Euclidean projection of `[θ, θ_1, …, θ_P]` (blocks of length `dim`) onto
/// `{‖θ‖ ≤ 1, ‖θ_p‖ ≤ 1, ‖θ_p − θ‖ ≤ λ}`.
pub fn project_hierarchical(x: &[f64], dim: usize, lambda: f64) -> Vec<f64> {
    assert!(dim > 0 && x.len().is_multiple_of(dim), "length {} is not a multiple of {dim}", x.len());
    let problem = Hierarchical { rows: vec![&[]; x.len() / dim - 1], dim, lambda, trace: Vec::new() };
    problem.project(x)
}

/// Projecting `(z, z_1, …, z_P)` onto the hierarchical feasible set. Once
/// `θ` is fixed each `θ_p` is the nearest point to `z_p` in the lens
/// `B(0, 1) ∩ B(θ, λ)`, which has a closed form, so what remains is the
/// strongly convex problem
/// `min_{‖θ‖ ≤ 1} ½‖θ − z‖² + Σ_p ½ dist(z_p, lens(θ))²`.
struct SocietyProjection<'a> {
    target: &'a [f64],
    members: Vec<&'a [f64]>,
    lambda: f64,
}

impl Problem for SocietyProjection<'_> {
    fn value(&self, theta: &[f64]) -> f64 {
        let own: f64 = theta.iter().zip(self.target).map(|(t, z)| (t - z).powi(2)).sum();
        let members: f64 = self
            .members
            .iter()
            .map(|z| {
                let (u, _) = nearest_in_lens(z, theta, self.lambda);
                u.iter().zip(z.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            })
            .sum();
        0.5 * (own + members)
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = theta.iter().zip(self.target).map(|(t, z)| t - z).collect();
        for z in &self.members {
            let (_, dg) = nearest_in_lens(z, theta, self.lambda);
            g.iter_mut().zip(dg).for_each(|(gi, di)| *gi += di);
        }
        g
    }

    fn project(&self, theta: &[f64]) -> Vec<f64> {
        let norm = l2_norm(theta);
        if norm > 1.0 {
            theta.iter().map(|t| t / norm).collect()
        } else {
            theta.to_vec()
        }
    }
}

/// Nearest point `u` to `z` in `B(0, 1) ∩ B(θ, λ)`, and the gradient with
/// respect to `θ` of `½‖u − z‖²`. Assumes `‖θ‖ ≤ 1`, so the lens is non-empty.
pub fn nearest_in_lens(z: &[f64], theta: &[f64], lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let d = z.len();
    let none = vec![0.0; d];
    let offset: Vec<f64> = z.iter().zip(theta).map(|(a, b)| a - b).collect();
    let z_norm = l2_norm(z);
    let offset_norm = l2_norm(&offset);
    if z_norm <= 1.0 && offset_norm <= lambda {
        return (z.to_vec(), none);
    }

    // nearest point of the unit ball, if it also lies within λ of θ
    let on_ball: Vec<f64> = if z_norm > 1.0 { z.iter().map(|v| v / z_norm).collect() } else { z.to_vec() };
    let gap: Vec<f64> = on_ball.iter().zip(theta).map(|(a, b)| a - b).collect();
    if l2_norm(&gap) <= lambda {
        return (on_ball, none);
    }

    // nearest point of B(θ, λ), if it also lies in the unit ball
    if offset_norm > lambda {
        let s = lambda / offset_norm;
        let u: Vec<f64> = theta.iter().zip(&offset).map(|(t, o)| t + s * o).collect();
        if l2_norm(&u) <= 1.0 {
            let g = u.iter().zip(z).map(|(a, b)| a - b).collect();
            return (u, g);
        }
    }

    // Both spheres are active: u lies on the circle where they meet, in the
    // half-plane spanned by θ and z.
    let n = l2_norm(theta);
    if n == 0.0 || d < 2 {
        return (on_ball, none);
    }
    let axis: Vec<f64> = theta.iter().map(|t| t / n).collect();
    let along = ((1.0 + n * n - lambda * lambda) / (2.0 * n)).clamp(-1.0, 1.0);
    let radius = (1.0 - along * along).max(0.0).sqrt();
    let za = dot(z, &axis);
    let mut side: Vec<f64> = z.iter().zip(&axis).map(|(v, a)| v - za * a).collect();
    let side_norm = l2_norm(&side);
    if side_norm > 1e-15 {
        side.iter_mut().for_each(|v| *v /= side_norm);
    } else {
        // z is on the axis; every point of the circle is equally near
        let i = (0..d).min_by(|&i, &j| axis[i].abs().total_cmp(&axis[j].abs())).unwrap_or(0);
        side = axis.iter().map(|a| -a * axis[i]).collect();
        side[i] += 1.0;
        let norm = l2_norm(&side);
        side.iter_mut().for_each(|v| *v /= norm);
    }
    let u: Vec<f64> = axis.iter().zip(&side).map(|(a, s)| along * a + radius * s).collect();

    // z − u = α u + μ (u − θ) with α, μ ≥ 0; the θ-gradient is μ (θ − u)
    let v: Vec<f64> = u.iter().zip(theta).map(|(a, b)| a - b).collect();
    let r: Vec<f64> = z.iter().zip(&u).map(|(a, b)| a - b).collect();
    let (uu, uv, vv) = (dot(&u, &u), dot(&u, &v), dot(&v, &v));
    let det = uu * vv - uv * uv;
    let mu = if det > 1e-12 * uu * vv {
        (uu * dot(&v, &r) - uv * dot(&u, &r)) / det
    } else if vv > 0.0 {
        dot(&v, &r) / vv
    } else {
        0.0
    };
    let mu = mu.max(0.0);
    let g = v.iter().map(|vi| -mu * vi).collect();
    (u, g)
}

/// Fits the society vector `θ` and participant vectors `θ_p` jointly:
/// minimise `Σ_p NLL_p(θ_p)` subject to `‖θ‖ ≤ 1`, `‖θ_p‖ ≤ 1` and
/// `‖θ_p − θ‖ ≤ λ`, by projected gradient descent from the origin.
pub fn aggregate_hierarchical(
    response_sets: &BTreeMap<String, Vec<ComparisonRow>>,
    kind: Part,
    config: &HierarchicalConfig,
) -> Result<AggregateResult, AggregateError> {
    config.validate()?;
    let (_, first_rows) = response_sets.iter().next().ok_or(AggregateError::Empty)?;
    let dim = first_rows.first().map(|r| r.delta.len()).unwrap_or(0);
    for (id, rows) in response_sets {
        if rows.is_empty() {
            return Err(AggregateError::NoRows(id.clone()));
        }
        for r in rows {
            if r.delta.len() != dim {
                return Err(AggregateError::Shape { expected: dim, got: r.delta.len() });
            }
            if !r.delta.iter().all(|v| v.is_finite()) {
                return Err(AggregateError::Config(format!("participant `{id}` has a non-finite comparison row")));
            }
        }
    }

    let mut problem = Hierarchical {
        rows: response_sets.values().map(Vec::as_slice).collect(),
        dim,
        lambda: config.lambda,
        trace: Vec::new(),
    };
    let start = vec![0.0; dim * (response_sets.len() + 1)];
    problem.trace.push(problem.value(&start));
    let solver = SolverConfig {
        max_iterations: config.outer_iterations,
        gradient_tolerance: config.tolerance,
        ..config.inner.clone()
    };
    let sol = minimize(&mut problem, &start, &solver);

    let society_weights = WeightVector::new(sol.x[..dim].to_vec(), kind)?;
    let mut per_participant = BTreeMap::new();
    for (p, id) in response_sets.keys().enumerate() {
        let w = WeightVector::new(problem.block(&sol.x, p + 1).to_vec(), kind)?;
        per_participant.insert(id.clone(), w);
    }
    Ok(AggregateResult {
        society_weights,
        per_participant,
        method: AggregationMethod::Hierarchical,
        total_log_likelihood: Some(-sol.value),
        diagnostics: Some(HierarchicalDiagnostics {
            lambda: config.lambda,
            iterations: sol.iterations,
            converged: sol.converged,
            objective_trace: problem.trace,
        }),
    })
}

/// How raw demographic answers map to reported groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Bucketing {
    /// Each distinct answer is its own group.
    Identity,
    /// Compares the first number in the answer (the lower end of a bracket
    /// such as "25-40") with `threshold`.
    NumericThreshold { threshold: f64, below: String, at_or_above: String },
    /// Explicit answer → group table; unmapped answers are skipped.
    Map { groups: BTreeMap<String, String> },
}

impl Bucketing {
    pub fn young_old(threshold: f64) -> Self {
        Bucketing::NumericThreshold { threshold, below: "young".into(), at_or_above: "old".into() }
    }

    pub fn bucket(&self, raw: &str) -> Option<String> {
        match self {
            Bucketing::Identity => Some(raw.to_string()),
            Bucketing::NumericThreshold { threshold, below, at_or_above } => {
                let value = leading_number(raw)?;
                Some(if value < *threshold { below.clone() } else { at_or_above.clone() })
            }
            Bucketing::Map { groups } => groups.get(raw).cloned(),
        }
    }
}

fn leading_number(s: &str) -> Option<f64> {
    let start = s.find(|c: char| c.is_ascii_digit())?;
    let digits: String = s[start..]
        .chars()
        .take_while(|c| c.is_ascii_digit() || *c == '.')
        .collect();
    digits.parse().ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicGroups {
    pub attribute: String,
    pub means: BTreeMap<String, WeightVector>,
    pub counts: BTreeMap<String, usize>,
    /// Participants without the attribute, without a fit, or whose answer
    /// the bucketing rule does not place.
    pub skipped: usize,
}

/// Mean fitted vector per demographic group.
pub fn group_by_demographic(
    participants: &[Participant],
    fits: &BTreeMap<String, FitResult>,
    attribute: &str,
    bucketing: &Bucketing,
) -> Result<DemographicGroups, AggregateError> {
    if !DEMOGRAPHIC_ATTRIBUTES.contains(&attribute) {
        return Err(AggregateError::UnknownAttribute(attribute.to_string()));
    }
    let mut members: BTreeMap<String, Vec<WeightVector>> = BTreeMap::new();
    let mut skipped = 0;
    for p in participants {
        let group = p
            .demographics
            .as_ref()
            .and_then(|d| d.get(attribute))
            .and_then(|raw| bucketing.bucket(raw));
        match (group, fits.get(&p.participant_id)) {
            (Some(g), Some(fit)) => members.entry(g).or_default().push(fit.weights.clone()),
            _ => skipped += 1,
        }
    }
    let mut means = BTreeMap::new();
    let mut counts = BTreeMap::new();
    for (group, vectors) in members {
        counts.insert(group.clone(), vectors.len());
        means.insert(group, aggregate_average(&vectors)?);
    }
    Ok(DemographicGroups { attribute: attribute.to_string(), means, counts, skipped })
}
