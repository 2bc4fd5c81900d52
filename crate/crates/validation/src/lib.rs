//! Acceptance criteria, each run as a function returning an [`Outcome`].
//! The `acceptance` test target runs them all and prints one line apiece.

use std::fmt;
use std::time::{Duration, Instant};

pub mod estimation;
pub mod generation;
pub mod service;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub criterion: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict}  {}: {} [{:.1} s]", self.criterion, self.detail, self.elapsed.as_secs_f64())
    }
}

/// Runs `check`, which returns the verdict and a one-line summary.
pub fn timed(criterion: &str, check: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = check();
    Outcome { criterion: criterion.to_string(), passed, detail, elapsed: start.elapsed() }
}
