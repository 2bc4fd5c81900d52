use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use eop_core::aggregator::*;
use eop_core::domain::synthetic::compas_like;
use eop_core::domain::*;
use eop_core::eop_audit::*;
use eop_core::estimator::*;
use eop_core::probit::{log_std_normal_cdf, std_normal_cdf};
use eop_core::questiongen::{build_questionnaire, QuestionnaireConfig};

fn answer() -> impl Strategy<Value = Answer> {
    prop_oneof![Just(-2i64), Just(-1), Just(1), Just(2)].prop_map(|a| Answer::try_from(a).unwrap())
}

fn rows(dim: usize, n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<ComparisonRow>> {
    prop::collection::vec(
        (prop::collection::vec(-1.0..1.0f64, dim), answer()).prop_map(|(d, a)| ComparisonRow::new(d, a)),
        n,
    )
}

fn dim_and_rows() -> impl Strategy<Value = (usize, Vec<ComparisonRow>)> {
    (2usize..=5).prop_flat_map(|d| (Just(d), rows(d, 1..=20)))
}

/// A point of the closed unit ball of dimension `dim`.
fn in_ball(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-1.0..1.0f64, dim), 0.0..1.0f64).prop_map(|(v, r)| {
        let n = l2_norm(&v);
        if n == 0.0 {
            v
        } else {
            v.iter().map(|c| c * r / n).collect()
        }
    })
}

fn likert_level() -> impl Strategy<Value = LikertLevel> {
    prop_oneof![
        Just(LikertLevel::Disagree),
        Just(LikertLevel::SomewhatDisagree),
        Just(LikertLevel::SomewhatAgree),
        Just(LikertLevel::Agree),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exp_log_cdf_matches_cdf(z in -37.0..37.0f64) {
        let a = log_std_normal_cdf(z).unwrap().exp();
        let b = std_normal_cdf(z).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn negating_deltas_and_answers_leaves_the_fit_unchanged((dim, rows) in dim_and_rows()) {
        let flipped: Vec<ComparisonRow> = rows
            .iter()
            .map(|r| ComparisonRow::new(r.delta.iter().map(|v| -v).collect(), r.answer.mirrored()))
            .collect();
        let solver = SolverConfig::default();
        let a = estimate_weights(&rows, dim, Part::Desert, &solver).unwrap();
        let b = estimate_weights(&flipped, dim, Part::Desert, &solver).unwrap();
        prop_assert!((a.log_likelihood - b.log_likelihood).abs() <= 1e-9);
        for (x, y) in a.weights.coefficients().iter().zip(b.weights.coefficients()) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn full_model_is_at_least_as_likely_as_the_baseline((dim, rows) in dim_and_rows()) {
        let solver = SolverConfig::default();
        let full = estimate_weights(&rows, dim, Part::Desert, &solver).unwrap();
        let base = estimate_eoo_baseline(&rows, eoo_index(Part::Desert, dim - 1), Part::Desert, &solver).unwrap();
        prop_assert!(full.log_likelihood >= base.log_likelihood - 1e-9);
    }

    #[test]
    fn gradient_matches_central_differences((dim, rows) in dim_and_rows(), w in in_ball(5)) {
        let w = &w[..dim];
        let w: Vec<f64> = w.iter().map(|c| c * 0.95).collect();
        let g = nll_gradient(&w, &rows).unwrap();
        let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let h = 1e-5;
        for i in 0..dim {
            let (mut up, mut down) = (w.clone(), w.clone());
            up[i] += h;
            down[i] -= h;
            let fd = (negative_log_likelihood(&up, &rows).unwrap() - negative_log_likelihood(&down, &rows).unwrap())
                / (2.0 * h);
            prop_assert!((fd - g[i]).abs() / scale <= 1e-5);
        }
    }

    /// With one response only its sign matters: the optimum is the boundary
    /// point along the answered direction.
    #[test]
    fn single_response_fit_ignores_confidence(delta in prop::collection::vec(-1.0..1.0f64, 2..=5), subject_1 in any::<bool>()) {
        prop_assume!(l2_norm(&delta) > 1e-3);
        let choice = if subject_1 { Choice::Subject1 } else { Choice::Subject2 };
        let solver = SolverConfig::default();
        let fit = |clearly| {
            let rows = vec![ComparisonRow::new(delta.clone(), Answer::new(choice, clearly))];
            estimate_weights(&rows, delta.len(), Part::Desert, &solver).unwrap().weights
        };
        for (x, y) in fit(false).coefficients().iter().zip(fit(true).coefficients()) {
            prop_assert!((x - y).abs() <= 1e-6);
        }
    }

    #[test]
    fn average_is_permutation_invariant_and_idempotent(
        vectors in prop::collection::vec(in_ball(4), 1..=8),
        seed in any::<u64>(),
    ) {
        let weights: Vec<WeightVector> =
            vectors.iter().map(|v| WeightVector::new(v.clone(), Part::Desert).unwrap()).collect();
        let mut shuffled = weights.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = aggregate_average(&weights).unwrap();
        let b = aggregate_average(&shuffled).unwrap();
        for (x, y) in a.coefficients().iter().zip(b.coefficients()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        let copies = vec![weights[0].clone(); weights.len()];
        for (x, y) in aggregate_average(&copies).unwrap().coefficients().iter().zip(weights[0].coefficients()) {
            prop_assert!((x - y).abs() <= 1e-15);
        }
    }

    #[test]
    fn vote_ignores_participant_order(
        levels in prop::collection::vec(prop::collection::vec(likert_level(), 4), 1..=12),
        seed in any::<u64>(),
    ) {
        let mut participants: Vec<Participant> = levels
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut p = Participant::new(format!("p{i}"));
                p.likert = row
                    .iter()
                    .enumerate()
                    .map(|(feature_index, &level)| LikertResponse { feature_index, level, justification: None })
                    .collect();
                p
            })
            .collect();
        let before = vote_circumstance(&participants, 4).unwrap();
        participants.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(before, vote_circumstance(&participants, 4).unwrap());
    }

    #[test]
    fn emitted_pairs_respect_the_difference_bound(seed in any::<u64>(), max_diff in 2usize..=3, show in any::<bool>()) {
        let dataset = compas_like(300, 1);
        let config = QuestionnaireConfig {
            seed,
            max_attribute_diff: max_diff,
            show_prediction_in_desert: show,
            ..QuestionnaireConfig::default()
        };
        let q = build_questionnaire(&dataset, &FeatureSchema::compas(), &config).unwrap();
        for question in q.pairwise_in_order().filter(|q| !q.is_attention_check) {
            prop_assert!((1..=max_diff).contains(&question.differing_attributes()));
        }
        prop_assert_eq!(q, build_questionnaire(&dataset, &FeatureSchema::compas(), &config).unwrap());
    }
}

/// Joint objective of a hierarchical fit, evaluated from its reported vectors.
fn joint_objective(result: &AggregateResult, sets: &BTreeMap<String, Vec<ComparisonRow>>) -> f64 {
    sets.iter()
        .map(|(id, rows)| negative_log_likelihood(result.per_participant[id].coefficients(), rows).unwrap())
        .sum()
}

fn hierarchical_sets() -> impl Strategy<Value = BTreeMap<String, Vec<ComparisonRow>>> {
    (2usize..=3).prop_flat_map(|dim| {
        prop::collection::vec(rows(dim, 3..=8), 2..=4)
            .prop_map(|sets| sets.into_iter().enumerate().map(|(i, r)| (format!("p{i}"), r)).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hierarchical_fits_are_feasible_monotone_and_ordered_in_lambda(sets in hierarchical_sets()) {
        let mut objective = BTreeMap::new();
        for lambda in [0.0, 0.5, 2.0] {
            let config = HierarchicalConfig { lambda, ..HierarchicalConfig::default() };
            let result = aggregate_hierarchical(&sets, Part::Desert, &config).unwrap();
            let trace = &result.diagnostics.as_ref().unwrap().objective_trace;
            prop_assert!(trace.windows(2).all(|w| w[1] <= w[0]));
            let theta = result.society_weights.coefficients();
            for w in result.per_participant.values() {
                let gap: Vec<f64> = w.coefficients().iter().zip(theta).map(|(a, b)| a - b).collect();
                prop_assert!(l2_norm(&gap) <= lambda + 1e-9);
            }
            objective.insert(lambda.to_bits(), joint_objective(&result, &sets));
        }
        prop_assert!(objective[&0.0f64.to_bits()] >= objective[&2.0f64.to_bits()] - 1e-9);
    }
}

/// Subjects with three features, the first a binary circumstance, plus a
/// random binary decision for each.
fn audit_case() -> impl Strategy<Value = (Vec<Subject>, PolicyPredictions)> {
    prop::collection::vec((any::<bool>(), any::<bool>(), 0u8..=10, any::<bool>(), any::<bool>()), 40..=200).prop_map(
        |rows| {
            let mut subjects = Vec::new();
            let mut predictions = BTreeMap::new();
            for (i, (c, a, b, y, d)) in rows.into_iter().enumerate() {
                let id = format!("s{i}");
                subjects.push(Subject {
                    id: id.clone(),
                    x: vec![f64::from(u8::from(c)), f64::from(u8::from(a)), f64::from(b) / 10.0],
                    y: u8::from(y),
                    y_hat: None,
                });
                predictions.insert(id, u8::from(d));
            }
            (subjects, PolicyPredictions(predictions))
        },
    )
}

/// Desert weights with nothing on the circumstance feature.
fn audit_desert() -> impl Strategy<Value = WeightVector> {
    in_ball(3).prop_map(|v| WeightVector::new(vec![0.0, v[0], v[1], v[2]], Part::Desert).unwrap())
}

fn audit_utility() -> impl Strategy<Value = WeightVector> {
    in_ball(5).prop_map(|v| WeightVector::new(v, Part::Utility).unwrap())
}

fn circumstance_first() -> CircumstanceProfile {
    CircumstanceProfile { irrelevant_flags: vec![true, false, false] }
}

/// Per-bin divergences and sorted group sizes: the parts of a report that do
/// not name circumstance values.
fn shape(report: &EopReport) -> (Vec<Option<f64>>, Vec<Vec<usize>>, f64, bool) {
    let divergences = report.bins.iter().map(|b| b.max_pairwise_divergence).collect();
    let sizes = report
        .bins
        .iter()
        .map(|b| {
            let mut s: Vec<usize> = b.circumstance_group_sizes.iter().map(|g| g.size).collect();
            s.sort_unstable();
            s
        })
        .collect();
    (divergences, sizes, report.overall_violation, report.passes)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn audit_ignores_subject_order(
        (subjects, predictions) in audit_case(),
        delta in audit_desert(),
        upsilon in audit_utility(),
        seed in any::<u64>(),
    ) {
        let config = AuditConfig::default();
        let a = check_eop(&subjects, &predictions, &delta, &upsilon, &circumstance_first(), &config).unwrap();
        let mut shuffled = subjects.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let b = check_eop(&shuffled, &predictions, &delta, &upsilon, &circumstance_first(), &config).unwrap();
        prop_assert_eq!(a, b);
    }

    /// Flipping the binary circumstance swaps the two group labels. Neither
    /// weight vector looks at it, so only the labels change.
    #[test]
    fn audit_ignores_circumstance_labels(
        (subjects, predictions) in audit_case(),
        delta in audit_desert(),
        upsilon in audit_utility(),
    ) {
        let config = AuditConfig::default();
        let mut blind = upsilon.coefficients().to_vec();
        blind[0] = 0.0;
        let upsilon = WeightVector::new(blind, Part::Utility).unwrap();
        let relabelled: Vec<Subject> = subjects
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.x[0] = 1.0 - s.x[0];
                s
            })
            .collect();
        let a = check_eop(&subjects, &predictions, &delta, &upsilon, &circumstance_first(), &config).unwrap();
        let b = check_eop(&relabelled, &predictions, &delta, &upsilon, &circumstance_first(), &config).unwrap();
        prop_assert_eq!(shape(&a), shape(&b));
    }

    #[test]
    fn audit_ignores_positive_utility_scale(
        (subjects, predictions) in audit_case(),
        delta in audit_desert(),
        upsilon in audit_utility(),
        scale in 0.01..1.0f64,
    ) {
        let config = AuditConfig::default();
        let scaled = WeightVector::new(upsilon.coefficients().iter().map(|c| c * scale).collect(), Part::Utility).unwrap();
        let a = check_eop(&subjects, &predictions, &delta, &upsilon, &circumstance_first(), &config).unwrap();
        let b = check_eop(&subjects, &predictions, &delta, &scaled, &circumstance_first(), &config).unwrap();
        prop_assert_eq!(shape(&a), shape(&b));
    }

    #[test]
    fn audit_without_circumstances_always_passes(
        (subjects, predictions) in audit_case(),
        delta in audit_desert(),
        upsilon in audit_utility(),
    ) {
        let none = CircumstanceProfile { irrelevant_flags: vec![false; 3] };
        let report = check_eop(&subjects, &predictions, &delta, &upsilon, &none, &AuditConfig::default()).unwrap();
        prop_assert!(report.passes);
    }
}
