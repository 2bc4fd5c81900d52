//! Monotone projected gradient descent over a closed convex set.
//!
//! Trial steps use the Barzilai–Borwein length from the previous iteration
//! (the configured initial step on the first one) and are shortened
//! geometrically until the Armijo condition along the projection arc holds.
//! Stops when the gradient mapping `‖x − P(x − ∇f(x))‖` falls below the
//! tolerance, or when no step makes a representable decrease.

use serde::{Deserialize, Serialize};

use crate::domain::{dot, l2_norm};

const ARMIJO_SLOPE: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;
const MAX_STEP: f64 = 1e12;
const ROUNDING_SLACK: f64 = 16.0 * f64::EPSILON;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub initial_step: f64,
    pub backtracking_factor: f64,
    /// Unused by the deterministic zero start; kept so configs round-trip.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 10_000,
            gradient_tolerance: 1e-6,
            initial_step: 1.0,
            backtracking_factor: 0.5,
            seed: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_iterations == 0 {
            return Err("max_iterations must be positive".into());
        }
        if !(self.gradient_tolerance > 0.0 && self.gradient_tolerance.is_finite()) {
            return Err("gradient_tolerance must be positive".into());
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err("initial_step must be positive".into());
        }
        if !(self.backtracking_factor > 0.0 && self.backtracking_factor < 1.0) {
            return Err("backtracking_factor must lie in (0, 1)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// A smooth convex objective with its gradient, minimised over the set `project` maps onto.
pub trait Problem {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn project(&self, x: &[f64]) -> Vec<f64>;

    /// Called after each accepted step with the new objective value.
    fn observe(&mut self, _value: f64) {}
}

fn step_along(x: &[f64], g: &[f64], t: f64) -> Vec<f64> {
    x.iter().zip(g).map(|(xi, gi)| xi - t * gi).collect()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p - q).collect()
}

fn gradient_mapping_norm<P: Problem + ?Sized>(problem: &P, x: &[f64], g: &[f64]) -> f64 {
    l2_norm(&diff(x, &problem.project(&step_along(x, g, 1.0))))
}

pub fn minimize<P: Problem>(problem: &mut P, start: &[f64], config: &SolverConfig) -> Solution {
    let mut x = problem.project(start);
    let mut value = problem.value(&x);
    let mut g = problem.gradient(&x);
    let mut step = config.initial_step;
    // inverse-curvature estimate from the last step with positive curvature
    let mut curvature_step = config.initial_step;

    for iteration in 0..config.max_iterations {
        if gradient_mapping_norm(problem, &x, &g) <= config.gradient_tolerance {
            return Solution { x, value, iterations: iteration, converged: true };
        }

        let mut t = step;
        let accepted = loop {
            let candidate = problem.project(&step_along(&x, &g, t));
            if candidate == x {
                break None;
            }
            let direction = diff(&candidate, &x);
            let candidate_value = problem.value(&candidate);
            if candidate_value <= value + ARMIJO_SLOPE * dot(&g, &direction) {
                break Some((candidate, candidate_value, None));
            }
            // Near the optimum the decrease can drop below the rounding of
            // the objective. For a convex objective a non-positive slope at
            // the candidate still certifies descent along the segment.
            if candidate_value <= value {
                let candidate_g = problem.gradient(&candidate);
                if dot(&candidate_g, &direction) <= 0.0 {
                    break Some((candidate, candidate_value, Some(candidate_g)));
                }
            }
            t *= config.backtracking_factor;
            if t < MIN_STEP {
                break None;
            }
        };
        let Some((next, next_value, next_g)) = accepted else {
            // No decrease is representable at this point. That counts as
            // convergence when the decrease a full step would promise is
            // itself below the rounding of the objective.
            let gm = gradient_mapping_norm(problem, &x, &g);
            let predicted = curvature_step * gm * gm;
            let converged = gm <= config.gradient_tolerance || predicted <= ROUNDING_SLACK * value.abs().max(1.0);
            return Solution { x, value, iterations: iteration, converged };
        };

        let next_g = next_g.unwrap_or_else(|| problem.gradient(&next));
        let s = diff(&next, &x);
        let y = diff(&next_g, &g);
        let sy = dot(&s, &y);
        step = if sy > 0.0 {
            curvature_step = (dot(&s, &s) / sy).clamp(MIN_STEP, MAX_STEP);
            curvature_step
        } else {
            config.initial_step
        };

        x = next;
        value = next_value;
        g = next_g;
        problem.observe(value);
    }

    let converged = gradient_mapping_norm(problem, &x, &g) <= config.gradient_tolerance;
    Solution { x, value, iterations: config.max_iterations, converged }
}
