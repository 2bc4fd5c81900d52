//! Questionnaire assembly: per-feature agreement items, then the desert and
//! utility comparison parts in random order, each with hidden attention
//! checks.

use std::collections::HashMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Choice, CountScaling, FeatureKind, FeatureSchema, PairwiseQuestion, Part, Subject};
use crate::estimator::QuestionLookup;

/// Resamples of the first subject before giving up on finding a partner.
pub const MAX_RESAMPLES: usize = 1000;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("no subject pair within {max_diff} differing attributes after {MAX_RESAMPLES} draws")]
    SamplingExhausted { max_diff: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("subject `{0}` has no predicted label, required for the utility part")]
    MissingPrediction(String),
    #[error("invalid questionnaire configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Domain(#[from] crate::domain::DomainError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuestionnaireConfig {
    pub n_desert: usize,
    pub n_utility: usize,
    pub max_attribute_diff: usize,
    pub show_prediction_in_desert: bool,
    pub allow_neutral: bool,
    pub attention_checks_per_part: usize,
    pub seed: u64,
    /// Scaling applied to count features, used to place attention-check extremes.
    pub count_scaling: CountScaling,
}

impl Default for QuestionnaireConfig {
    fn default() -> Self {
        QuestionnaireConfig {
            n_desert: 25,
            n_utility: 25,
            max_attribute_diff: 2,
            show_prediction_in_desert: false,
            allow_neutral: false,
            attention_checks_per_part: 1,
            seed: 0,
            count_scaling: CountScaling::default(),
        }
    }
}

impl QuestionnaireConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.max_attribute_diff == 0 {
            return Err(GenError::Config("max_attribute_diff must be positive".into()));
        }
        Ok(())
    }

    fn show_prediction(&self, part: Part) -> bool {
        match part {
            Part::Desert => self.show_prediction_in_desert,
            Part::Utility => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Questionnaire {
    pub likert_features: Vec<String>,
    pub desert_questions: Vec<PairwiseQuestion>,
    pub utility_questions: Vec<PairwiseQuestion>,
    pub part_order: [Part; 2],
    pub allow_neutral: bool,
}

impl Questionnaire {
    pub fn questions(&self, part: Part) -> &[PairwiseQuestion] {
        match part {
            Part::Desert => &self.desert_questions,
            Part::Utility => &self.utility_questions,
        }
    }

    /// Comparison questions in presentation order.
    pub fn pairwise_in_order(&self) -> impl Iterator<Item = &PairwiseQuestion> {
        self.part_order.iter().flat_map(move |p| self.questions(*p))
    }

    /// Likert items plus every comparison question, attention checks included.
    pub fn total_questions(&self) -> usize {
        self.likert_features.len() + self.desert_questions.len() + self.utility_questions.len()
    }
}

impl QuestionLookup for Questionnaire {
    fn question(&self, id: &str) -> Option<&PairwiseQuestion> {
        self.desert_questions
            .iter()
            .chain(&self.utility_questions)
            .find(|q| q.question_id == id)
    }
}

fn attribute_key(subject: &Subject, show_prediction: bool) -> Vec<u64> {
    let mut key: Vec<u64> = subject.x.iter().map(|v| v.to_bits()).collect();
    key.push(u64::from(subject.y));
    if show_prediction {
        key.push(subject.y_hat.map_or(u64::MAX, u64::from));
    }
    key
}

/// Draws comparison pairs under the attribute-difference bound.
///
/// Subjects are grouped by their displayed attribute profile, so a draw costs
/// one pass over the distinct profiles rather than over the dataset.
pub struct PairSampler<'a> {
    dataset: &'a [Subject],
    part: Part,
    show_prediction: bool,
    max_diff: usize,
    profiles: Vec<Vec<u64>>,
    members: Vec<Vec<usize>>,
    profile_of: Vec<usize>,
    duplicates: HashMap<&'a str, Vec<usize>>,
}

impl<'a> PairSampler<'a> {
    pub fn new(
        dataset: &'a [Subject],
        part: Part,
        show_prediction: bool,
        max_diff: usize,
    ) -> Result<Self, GenError> {
        if dataset.is_empty() {
            return Err(GenError::EmptyDataset);
        }
        if part == Part::Utility || show_prediction {
            if let Some(s) = dataset.iter().find(|s| s.y_hat.is_none()) {
                return Err(GenError::MissingPrediction(s.id.clone()));
            }
        }
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut profiles = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut profile_of = Vec::with_capacity(dataset.len());
        let mut ids: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, s) in dataset.iter().enumerate() {
            let key = attribute_key(s, show_prediction);
            let p = *index.entry(key.clone()).or_insert_with(|| {
                profiles.push(key);
                members.push(Vec::new());
                profiles.len() - 1
            });
            members[p].push(i);
            profile_of.push(p);
            ids.entry(s.id.as_str()).or_default().push(i);
        }
        ids.retain(|_, v| v.len() > 1);
        Ok(PairSampler {
            dataset,
            part,
            show_prediction,
            max_diff,
            profiles,
            members,
            profile_of,
            duplicates: ids,
        })
    }

    fn differing(&self, a: usize, b: usize) -> usize {
        self.profiles[a]
            .iter()
            .zip(&self.profiles[b])
            .filter(|(p, q)| p != q)
            .count()
    }

    /// Draws `(subject_1, subject_2)` indices into the dataset.
    pub fn sample_indices<R: Rng>(&self, rng: &mut R) -> Result<(usize, usize), GenError> {
        for _ in 0..MAX_RESAMPLES {
            let first = rng.random_range(0..self.dataset.len());
            let own = self.profile_of[first];
            let same_id = self.duplicates.get(self.dataset[first].id.as_str());

            let mut eligible = Vec::new();
            let mut total = 0usize;
            for p in 0..self.profiles.len() {
                let d = self.differing(own, p);
                if d == 0 || d > self.max_diff {
                    continue;
                }
                let excluded = same_id.map_or(0, |dups| {
                    dups.iter().filter(|&&i| self.profile_of[i] == p).count()
                });
                let weight = self.members[p].len() - excluded;
                if weight > 0 {
                    eligible.push((p, weight));
                    total += weight;
                }
            }
            if total == 0 {
                continue;
            }

            let mut pick = rng.random_range(0..total);
            let (profile, _) = *eligible
                .iter()
                .find(|(_, w)| {
                    if pick < *w {
                        true
                    } else {
                        pick -= w;
                        false
                    }
                })
                .expect("pick is below the total weight");
            let first_id = self.dataset[first].id.as_str();
            let second = self.members[profile]
                .iter()
                .copied()
                .filter(|&i| self.dataset[i].id != first_id)
                .nth(pick)
                .expect("pick is below the profile weight");
            return Ok((first, second));
        }
        Err(GenError::SamplingExhausted { max_diff: self.max_diff })
    }

    /// Draws one comparison question. The id is left empty for the caller to assign.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<PairwiseQuestion, GenError> {
        let (a, b) = self.sample_indices(rng)?;
        Ok(PairwiseQuestion {
            question_id: String::new(),
            part: self.part,
            subject_1: self.dataset[a].clone(),
            subject_2: self.dataset[b].clone(),
            is_attention_check: false,
            show_prediction: self.show_prediction,
            expected_choice: None,
        })
    }
}

/// One pair drawn under the difference rule.
pub fn sample_pair<R: Rng>(
    dataset: &[Subject],
    part: Part,
    show_prediction: bool,
    max_diff: usize,
    rng: &mut R,
) -> Result<PairwiseQuestion, GenError> {
    PairSampler::new(dataset, part, show_prediction, max_diff)?.sample(rng)
}

/// A comparison with a dominant subject: identical except that one has the
/// fewest priors and the favourable label (`y = 0` for desert, `ŷ = 0` for
/// utility). The dominant subject's position is random and recorded.
pub fn make_attention_check<R: Rng>(
    part: Part,
    schema: &FeatureSchema,
    count_scaling: CountScaling,
    show_prediction: bool,
    rng: &mut R,
) -> PairwiseQuestion {
    let mut base: Vec<f64> = schema
        .features
        .iter()
        .map(|f| match f.kind {
            FeatureKind::Binary => f64::from(u8::from(rng.random_bool(0.5))),
            FeatureKind::BoundedCount => 0.0,
        })
        .collect();
    let y = u8::from(rng.random_bool(0.5));
    let y_hat = u8::from(rng.random_bool(0.5));

    let good = Subject { id: "check-a".into(), x: base.clone(), y, y_hat: Some(y_hat) };
    for (v, f) in base.iter_mut().zip(&schema.features) {
        if f.kind == FeatureKind::BoundedCount {
            *v = count_scaling.max_value();
        }
    }
    let mut bad = Subject { id: "check-b".into(), x: base, y, y_hat: Some(y_hat) };
    let mut good = good;
    match part {
        Part::Desert => {
            good.y = 0;
            bad.y = 1;
        }
        Part::Utility => {
            good.y_hat = Some(0);
            bad.y_hat = Some(1);
        }
    }

    let (subject_1, subject_2, expected) = if rng.random_bool(0.5) {
        (good, bad, Choice::Subject1)
    } else {
        (bad, good, Choice::Subject2)
    };
    PairwiseQuestion {
        question_id: String::new(),
        part,
        subject_1,
        subject_2,
        is_attention_check: true,
        show_prediction,
        expected_choice: Some(expected),
    }
}

fn build_part<R: Rng>(
    dataset: &[Subject],
    schema: &FeatureSchema,
    config: &QuestionnaireConfig,
    part: Part,
    count: usize,
    rng: &mut R,
) -> Result<Vec<PairwiseQuestion>, GenError> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let show = config.show_prediction(part);
    let sampler = PairSampler::new(dataset, part, show, config.max_attribute_diff)?;
    let mut questions = (0..count)
        .map(|_| sampler.sample(rng))
        .collect::<Result<Vec<_>, _>>()?;
    for _ in 0..config.attention_checks_per_part {
        let check = make_attention_check(part, schema, config.count_scaling, show, rng);
        let at = rng.random_range(0..=questions.len());
        questions.insert(at, check);
    }
    for (i, q) in questions.iter_mut().enumerate() {
        q.question_id = format!("{part}-{i:02}");
    }
    Ok(questions)
}

/// Full questionnaire, deterministic in `config.seed`.
pub fn build_questionnaire(
    dataset: &[Subject],
    schema: &FeatureSchema,
    config: &QuestionnaireConfig,
) -> Result<Questionnaire, GenError> {
    config.validate()?;
    schema.validate()?;
    if dataset.is_empty() {
        return Err(GenError::EmptyDataset);
    }
    for s in dataset {
        s.validate(schema)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let part_order = *[[Part::Desert, Part::Utility], [Part::Utility, Part::Desert]]
        .choose(&mut rng)
        .expect("non-empty");
    let desert_questions = build_part(dataset, schema, config, Part::Desert, config.n_desert, &mut rng)?;
    let utility_questions = build_part(dataset, schema, config, Part::Utility, config.n_utility, &mut rng)?;
    Ok(Questionnaire {
        likert_features: schema.feature_names().into_iter().map(String::from).collect(),
        desert_questions,
        utility_questions,
        part_order,
        allow_neutral: config.allow_neutral,
    })
}
