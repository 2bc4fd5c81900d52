//! Study-level results over a snapshot of completed sessions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use eop_core::aggregator::{
    aggregate_average_named, aggregate_hierarchical, group_by_demographic, vote_circumstance, AggregateResult,
    Bucketing, DemographicGroups, HierarchicalConfig, DEMOGRAPHIC_ATTRIBUTES,
};
use eop_core::domain::{CircumstanceProfile, Part, Participant};
use eop_core::estimator::{
    comparison_rows, eoo_index, estimate_eoo_baseline, estimate_weights, ComparisonRow, FitResult, SolverConfig,
};
use eop_core::questiongen::Questionnaire;

use crate::error::ServiceError;

/// Age brackets whose lower end is under this are reported as "young".
pub const YOUNG_AGE_LIMIT: f64 = 40.0;

#[derive(Debug, Clone)]
pub struct CompletedSession {
    pub participant: Participant,
    pub questionnaire: Questionnaire,
    pub attention: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartFit {
    pub fit: FitResult,
    /// Equality-of-odds restricted model on the same answers.
    pub baseline: FitResult,
    pub n_comparisons: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionTally {
    pub passed: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantResult {
    /// Absent when every answer in the part was neutral.
    pub desert: Option<PartFit>,
    pub utility: Option<PartFit>,
    pub attention_checks: AttentionTally,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartAggregates {
    pub average: AggregateResult,
    pub hierarchical: AggregateResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodnessOfFit {
    pub participants: usize,
    pub mean_log_likelihood: f64,
    pub mean_baseline_log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircumstanceVote {
    pub profile: CircumstanceProfile,
    pub circumstance_features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicTable {
    pub desert: DemographicGroups,
    pub utility: DemographicGroups,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerPart<T> {
    pub desert: Option<T>,
    pub utility: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResults {
    pub study_id: String,
    /// Changes whenever a session completes or demographics arrive.
    pub revision: u64,
    pub completed_sessions: usize,
    pub features: Vec<String>,
    pub participants: BTreeMap<String, ParticipantResult>,
    pub circumstance: CircumstanceVote,
    pub aggregates: PerPart<PartAggregates>,
    pub goodness_of_fit: PerPart<GoodnessOfFit>,
    pub demographics: BTreeMap<String, DemographicTable>,
    pub attention_checks: AttentionTally,
    pub attention_check_pass_rate: Option<f64>,
}

fn internal<E: std::fmt::Display>(e: E) -> ServiceError {
    ServiceError::Internal(e.to_string())
}

fn fit_part(
    session: &CompletedSession,
    part: Part,
    k: usize,
    solver: &SolverConfig,
) -> Result<Option<(PartFit, Vec<ComparisonRow>)>, ServiceError> {
    let rows = comparison_rows(&session.participant, part, &session.questionnaire).map_err(internal)?;
    if rows.is_empty() {
        return Ok(None);
    }
    let fit = estimate_weights(&rows, part.dim(k), part, solver).map_err(internal)?;
    let baseline = estimate_eoo_baseline(&rows, eoo_index(part, k), part, solver).map_err(internal)?;
    Ok(Some((PartFit { fit, baseline, n_comparisons: rows.len() }, rows)))
}

struct PartOutputs {
    fits: BTreeMap<String, FitResult>,
    aggregates: Option<PartAggregates>,
    goodness: Option<GoodnessOfFit>,
}

fn summarise_part(
    part: Part,
    fits: BTreeMap<String, PartFit>,
    rows: BTreeMap<String, Vec<ComparisonRow>>,
    hierarchical: &HierarchicalConfig,
) -> Result<PartOutputs, ServiceError> {
    if fits.is_empty() {
        return Ok(PartOutputs { fits: BTreeMap::new(), aggregates: None, goodness: None });
    }
    let n = fits.len() as f64;
    let goodness = GoodnessOfFit {
        participants: fits.len(),
        mean_log_likelihood: fits.values().map(|f| f.fit.log_likelihood).sum::<f64>() / n,
        mean_baseline_log_likelihood: fits.values().map(|f| f.baseline.log_likelihood).sum::<f64>() / n,
    };
    let weights = fits.iter().map(|(id, f)| (id.clone(), f.fit.weights.clone())).collect();
    let average = aggregate_average_named(&weights).map_err(internal)?;
    let hierarchical = aggregate_hierarchical(&rows, part, hierarchical).map_err(internal)?;
    Ok(PartOutputs {
        fits: fits.into_iter().map(|(id, f)| (id, f.fit)).collect(),
        aggregates: Some(PartAggregates { average, hierarchical }),
        goodness: Some(goodness),
    })
}

pub fn compute_results(
    study_id: &str,
    revision: u64,
    feature_names: &[String],
    sessions: &[CompletedSession],
    solver: &SolverConfig,
    hierarchical: &HierarchicalConfig,
) -> Result<StudyResults, ServiceError> {
    if sessions.is_empty() {
        return Err(ServiceError::EmptyStudy(study_id.to_string()));
    }
    let k = feature_names.len();

    let mut participants = BTreeMap::new();
    let mut part_fits: [BTreeMap<String, PartFit>; 2] = Default::default();
    let mut part_rows: [BTreeMap<String, Vec<ComparisonRow>>; 2] = Default::default();
    let mut attention = AttentionTally { passed: 0, total: 0 };
    for s in sessions {
        let id = s.participant.participant_id.clone();
        let mut result = ParticipantResult {
            desert: None,
            utility: None,
            attention_checks: AttentionTally { passed: s.attention.0, total: s.attention.1 },
        };
        attention.passed += s.attention.0;
        attention.total += s.attention.1;
        for (slot, part) in [Part::Desert, Part::Utility].into_iter().enumerate() {
            if let Some((fit, rows)) = fit_part(s, part, k, solver)? {
                match part {
                    Part::Desert => result.desert = Some(fit.clone()),
                    Part::Utility => result.utility = Some(fit.clone()),
                }
                part_fits[slot].insert(id.clone(), fit);
                part_rows[slot].insert(id.clone(), rows);
            }
        }
        participants.insert(id, result);
    }

    let [desert_fits, utility_fits] = part_fits;
    let [desert_rows, utility_rows] = part_rows;
    let desert = summarise_part(Part::Desert, desert_fits, desert_rows, hierarchical)?;
    let utility = summarise_part(Part::Utility, utility_fits, utility_rows, hierarchical)?;

    let people: Vec<Participant> = sessions.iter().map(|s| s.participant.clone()).collect();
    let profile = vote_circumstance(&people, k).map_err(internal)?;
    let circumstance_features = profile.flagged().map(|j| feature_names[j].clone()).collect();

    let mut demographics = BTreeMap::new();
    for attribute in DEMOGRAPHIC_ATTRIBUTES {
        let bucketing = if attribute == "age_bracket" {
            Bucketing::young_old(YOUNG_AGE_LIMIT)
        } else {
            Bucketing::Identity
        };
        let table = DemographicTable {
            desert: group_by_demographic(&people, &desert.fits, attribute, &bucketing).map_err(internal)?,
            utility: group_by_demographic(&people, &utility.fits, attribute, &bucketing).map_err(internal)?,
        };
        demographics.insert(attribute.to_string(), table);
    }

    let attention_check_pass_rate =
        (attention.total > 0).then(|| attention.passed as f64 / attention.total as f64);
    Ok(StudyResults {
        study_id: study_id.to_string(),
        revision,
        completed_sessions: sessions.len(),
        features: feature_names.to_vec(),
        participants,
        circumstance: CircumstanceVote { profile, circumstance_features },
        aggregates: PerPart { desert: desert.aggregates, utility: utility.aggregates },
        goodness_of_fit: PerPart { desert: desert.goodness, utility: utility.goodness },
        demographics,
        attention_checks: attention,
        attention_check_pass_rate,
    })
}
