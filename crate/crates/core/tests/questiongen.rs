use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use eop_core::domain::*;
use eop_core::questiongen::*;
use eop_core::domain::synthetic;

fn subject(id: &str, x: &[f64], y: u8, y_hat: u8) -> Subject {
    Subject { id: id.into(), x: x.to_vec(), y, y_hat: Some(y_hat) }
}

#[test]
fn only_valid_pair_is_found_in_either_order() {
    let data = vec![subject("a", &[1.0, 0.0], 0, 1), subject("b", &[1.0, 0.0], 1, 1)];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut firsts = [0, 0];
    for _ in 0..200 {
        let q = sample_pair(&data, Part::Desert, false, 2, &mut rng).unwrap();
        assert_ne!(q.subject_1.id, q.subject_2.id);
        assert_eq!(q.differing_attributes(), 1);
        firsts[usize::from(q.subject_1.id == "b")] += 1;
    }
    assert!(firsts[0] > 50 && firsts[1] > 50);
}

#[test]
fn unsatisfiable_bound_exhausts() {
    let data = vec![subject("a", &[1.0, 1.0, 1.0], 0, 1), subject("b", &[0.0, 0.0, 0.0], 1, 1)];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert!(matches!(
        sample_pair(&data, Part::Desert, false, 2, &mut rng),
        Err(GenError::SamplingExhausted { max_diff: 2 })
    ));
}

#[test]
fn identical_profiles_are_never_paired() {
    let data = vec![
        subject("a", &[1.0], 0, 0),
        subject("b", &[1.0], 0, 0),
        subject("c", &[0.0], 0, 0),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let q = sample_pair(&data, Part::Desert, false, 2, &mut rng).unwrap();
        assert!(q.differing_attributes() >= 1);
    }
}

#[test]
fn duplicate_ids_are_excluded_as_partners() {
    let data = vec![subject("a", &[1.0], 0, 0), subject("a", &[0.0], 0, 0), subject("c", &[0.0], 1, 0)];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let q = sample_pair(&data, Part::Desert, false, 2, &mut rng).unwrap();
        assert_ne!(q.subject_1.id, q.subject_2.id);
    }
}

#[test]
fn utility_requires_predictions() {
    let data = vec![Subject { id: "a".into(), x: vec![0.0], y: 0, y_hat: None }];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    assert!(matches!(
        sample_pair(&data, Part::Utility, true, 2, &mut rng),
        Err(GenError::MissingPrediction(_))
    ));
}

#[test]
fn attention_checks_have_a_dominant_subject() {
    let schema = FeatureSchema::compas();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for part in [Part::Desert, Part::Utility] {
        let q = make_attention_check(part, &schema, CountScaling::default(), part == Part::Utility, &mut rng);
        assert!(q.is_attention_check);
        let (good, bad) = match q.expected_choice.unwrap() {
            Choice::Subject1 => (&q.subject_1, &q.subject_2),
            Choice::Subject2 => (&q.subject_2, &q.subject_1),
        };
        assert_eq!(good.x[4], 0.0);
        assert_eq!(bad.x[4], 1.0);
        assert_eq!(good.x[..4], bad.x[..4]);
        match part {
            Part::Desert => assert_eq!((good.y, bad.y), (0, 1)),
            Part::Utility => {
                assert_eq!(good.y, bad.y);
                assert_eq!((good.y_hat, bad.y_hat), (Some(0), Some(1)));
            }
        }
    }
    let a = make_attention_check(Part::Desert, &schema, CountScaling::default(), false, &mut ChaCha8Rng::seed_from_u64(8));
    let b = make_attention_check(Part::Desert, &schema, CountScaling::default(), false, &mut ChaCha8Rng::seed_from_u64(8));
    assert_eq!(a, b);
}

#[test]
fn default_questionnaire_shape() {
    let data = synthetic::compas_like(2000, 1);
    let q = build_questionnaire(&data, &FeatureSchema::compas(), &QuestionnaireConfig::default()).unwrap();
    assert_eq!(q.likert_features.len(), 5);
    assert_eq!(q.desert_questions.len(), 26);
    assert_eq!(q.utility_questions.len(), 26);
    assert_eq!(q.total_questions(), 57);
    let scored = q.pairwise_in_order().filter(|p| !p.is_attention_check).count();
    assert_eq!(scored + q.likert_features.len(), 55);
    assert_eq!(q.desert_questions.iter().filter(|p| p.is_attention_check).count(), 1);
    for p in q.pairwise_in_order().filter(|p| !p.is_attention_check) {
        assert!((1..=2).contains(&p.differing_attributes()));
    }
    assert!(q.desert_questions.iter().all(|p| !p.show_prediction));
    assert!(q.utility_questions.iter().all(|p| p.show_prediction && p.delta().unwrap().len() == 7));
    let mut ids: Vec<&str> = q.pairwise_in_order().map(|p| p.question_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    assert_eq!(ids.len(), 52);
}

#[test]
fn empty_desert_part_is_allowed() {
    let data = synthetic::compas_like(300, 1);
    let config = QuestionnaireConfig { n_desert: 0, ..Default::default() };
    let q = build_questionnaire(&data, &FeatureSchema::compas(), &config).unwrap();
    assert!(q.desert_questions.is_empty());
    assert_eq!(q.utility_questions.len(), 26);
}

#[test]
fn fixed_seed_is_byte_identical() {
    let data = synthetic::compas_like(1000, 7);
    let config = QuestionnaireConfig { seed: 42, ..Default::default() };
    let a = serde_json::to_string(&build_questionnaire(&data, &FeatureSchema::compas(), &config).unwrap()).unwrap();
    let b = serde_json::to_string(&build_questionnaire(&data, &FeatureSchema::compas(), &config).unwrap()).unwrap();
    assert_eq!(a, b);
    let other = QuestionnaireConfig { seed: 43, ..Default::default() };
    let c = serde_json::to_string(&build_questionnaire(&data, &FeatureSchema::compas(), &other).unwrap()).unwrap();
    assert_ne!(a, c);
}
