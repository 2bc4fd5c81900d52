//! Equality-of-opportunity audit of a decision policy.
//!
//! Subjects are grouped by desert (equal-mass quantile bins) and, within each
//! bin, by circumstance. A policy passes when, inside every bin, the utility
//! distributions of every pair of circumstance groups are close in
//! Kolmogorov–Smirnov distance.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{dot, CircumstanceProfile, Part, Subject, WeightVector};

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("no subjects to audit")]
    Empty,
    #[error("no prediction for subject `{0}`")]
    MissingPrediction(String),
    #[error("prediction for subject `{0}` must be 0 or 1")]
    InvalidPrediction(String),
    #[error("{kind} weights have dimension {got}, expected {expected}")]
    Shape { kind: Part, expected: usize, got: usize },
    #[error("expected {expected} weights, got {got}")]
    WrongKind { expected: Part, got: Part },
    #[error("circumstance profile covers {got} features, subjects have {expected}")]
    ProfileLength { expected: usize, got: usize },
    #[error("invalid audit configuration: {0}")]
    Config(String),
}

/// Labels assigned by the audited policy, keyed by subject id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolicyPredictions(pub BTreeMap<String, u8>);

impl PolicyPredictions {
    pub fn get(&self, id: &str) -> Option<u8> {
        self.0.get(id).copied()
    }
}

impl FromIterator<(String, u8)> for PolicyPredictions {
    fn from_iter<I: IntoIterator<Item = (String, u8)>>(iter: I) -> Self {
        PolicyPredictions(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    pub n_desert_bins: usize,
    pub divergence_threshold: f64,
    pub min_cell_size: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig { n_desert_bins: 5, divergence_threshold: 0.1, min_cell_size: 10 }
    }
}

impl AuditConfig {
    pub fn validate(&self) -> Result<(), AuditError> {
        if self.n_desert_bins == 0 || self.min_cell_size == 0 {
            return Err(AuditError::Config("bin count and minimum cell size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.divergence_threshold) {
            return Err(AuditError::Config("divergence threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Values of the circumstance features; equal keys mean equal circumstance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CircumstanceKey(pub Vec<f64>);

impl Eq for CircumstanceKey {}

impl PartialOrd for CircumstanceKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CircumstanceKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or_else(|| self.0.len().cmp(&other.0.len()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSize {
    pub circumstance: CircumstanceKey,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRecord {
    pub bin_index: usize,
    /// Smallest and largest desert in the bin.
    pub bin_range: [f64; 2],
    pub circumstance_group_sizes: Vec<GroupSize>,
    /// Largest KS distance between eligible groups; `None` when fewer than two
    /// groups reach the minimum cell size.
    pub max_pairwise_divergence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub bin_index: usize,
    pub circumstance: CircumstanceKey,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EopReport {
    pub bins: Vec<BinRecord>,
    pub overall_violation: f64,
    pub passes: bool,
    pub skipped_cells: Vec<SkippedCell>,
    /// Only one circumstance class exists, so there is nothing to compare.
    pub trivial: bool,
}

fn check_weights(w: &WeightVector, kind: Part, expected: usize) -> Result<(), AuditError> {
    if w.kind() != kind {
        return Err(AuditError::WrongKind { expected: kind, got: w.kind() });
    }
    if w.dim() != expected {
        return Err(AuditError::Shape { kind, expected, got: w.dim() });
    }
    Ok(())
}

/// `δ · [x, y]`.
pub fn compute_desert(delta: &WeightVector, subject: &Subject) -> Result<f64, AuditError> {
    check_weights(delta, Part::Desert, subject.x.len() + 1)?;
    Ok(dot(delta.coefficients(), &subject.desert_features()))
}

/// `υ · [x, y, ŷ]` for the given prediction.
pub fn compute_utility(upsilon: &WeightVector, subject: &Subject, y_hat: u8) -> Result<f64, AuditError> {
    check_weights(upsilon, Part::Utility, subject.x.len() + 2)?;
    Ok(dot(upsilon.coefficients(), &subject.utility_features(y_hat)))
}

pub fn circumstance_key(profile: &CircumstanceProfile, subject: &Subject) -> CircumstanceKey {
    CircumstanceKey(profile.flagged().filter_map(|i| subject.x.get(i).copied()).collect())
}

/// Two-sample Kolmogorov–Smirnov statistic: the largest gap between the two
/// empirical CDFs. Zero if either sample is empty.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut gap: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = if a[i].total_cmp(&b[j]).is_le() { a[i] } else { b[j] };
        while i < a.len() && a[i].total_cmp(&v).is_le() {
            i += 1;
        }
        while j < b.len() && b[j].total_cmp(&v).is_le() {
            j += 1;
        }
        gap = gap.max((i as f64 / na - j as f64 / nb).abs());
    }
    gap
}

/// Bin index per desert value, using equal-mass cut points. Equal deserts
/// always share a bin.
pub fn quantile_bins(deserts: &[f64], n_bins: usize) -> Vec<usize> {
    let mut sorted = deserts.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut cuts: Vec<f64> = (1..n_bins).map(|j| sorted[j * n / n_bins]).collect();
    // repeated cut points would leave empty bins; merge them so indices stay dense
    cuts.dedup_by(|a, b| a.total_cmp(b).is_eq());
    let floor = cuts.iter().filter(|c| c.total_cmp(&sorted[0]).is_le()).count();
    deserts
        .iter()
        .map(|d| cuts.iter().filter(|c| c.total_cmp(d).is_le()).count() - floor)
        .collect()
}

/// Audits `predictions` against the desert/utility/circumstance specification.
pub fn check_eop(
    subjects: &[Subject],
    predictions: &PolicyPredictions,
    delta: &WeightVector,
    upsilon: &WeightVector,
    profile: &CircumstanceProfile,
    config: &AuditConfig,
) -> Result<EopReport, AuditError> {
    config.validate()?;
    let first = subjects.first().ok_or(AuditError::Empty)?;
    let k = first.x.len();
    if profile.irrelevant_flags.len() != k {
        return Err(AuditError::ProfileLength { expected: k, got: profile.irrelevant_flags.len() });
    }

    let mut deserts = Vec::with_capacity(subjects.len());
    let mut utilities = Vec::with_capacity(subjects.len());
    let mut keys = Vec::with_capacity(subjects.len());
    for s in subjects {
        let y_hat = predictions
            .get(&s.id)
            .ok_or_else(|| AuditError::MissingPrediction(s.id.clone()))?;
        if y_hat > 1 {
            return Err(AuditError::InvalidPrediction(s.id.clone()));
        }
        deserts.push(compute_desert(delta, s)?);
        utilities.push(compute_utility(upsilon, s, y_hat)?);
        keys.push(circumstance_key(profile, s));
    }

    let bin_of = quantile_bins(&deserts, config.n_desert_bins);
    let mut cells: BTreeMap<usize, BTreeMap<CircumstanceKey, Vec<f64>>> = BTreeMap::new();
    let mut ranges: BTreeMap<usize, [f64; 2]> = BTreeMap::new();
    for (i, key) in keys.iter().enumerate() {
        let bin = bin_of[i];
        cells.entry(bin).or_default().entry(key.clone()).or_default().push(utilities[i]);
        let r = ranges.entry(bin).or_insert([f64::INFINITY, f64::NEG_INFINITY]);
        r[0] = r[0].min(deserts[i]);
        r[1] = r[1].max(deserts[i]);
    }

    let distinct: std::collections::BTreeSet<&CircumstanceKey> = keys.iter().collect();
    let trivial = distinct.len() < 2;

    let mut bins = Vec::with_capacity(cells.len());
    let mut skipped_cells = Vec::new();
    let mut overall: f64 = 0.0;
    for (bin_index, groups) in &cells {
        let mut eligible = Vec::new();
        let mut sizes = Vec::with_capacity(groups.len());
        for (key, values) in groups {
            sizes.push(GroupSize { circumstance: key.clone(), size: values.len() });
            if values.len() >= config.min_cell_size {
                eligible.push(values);
            } else {
                skipped_cells.push(SkippedCell {
                    bin_index: *bin_index,
                    circumstance: key.clone(),
                    size: values.len(),
                });
            }
        }
        let mut max_div: Option<f64> = None;
        for (i, a) in eligible.iter().enumerate() {
            for b in &eligible[i + 1..] {
                let d = ks_statistic(a, b);
                max_div = Some(max_div.map_or(d, |m| m.max(d)));
            }
        }
        if let Some(d) = max_div {
            overall = overall.max(d);
        }
        bins.push(BinRecord {
            bin_index: *bin_index,
            bin_range: ranges[bin_index],
            circumstance_group_sizes: sizes,
            max_pairwise_divergence: max_div,
        });
    }

    Ok(EopReport {
        bins,
        overall_violation: overall,
        passes: trivial || overall <= config.divergence_threshold,
        skipped_cells,
        trivial,
    })
}
