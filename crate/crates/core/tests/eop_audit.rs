use eop_core::domain::*;
use eop_core::eop_audit::*;

fn subject(id: &str, x: &[f64], y: u8) -> Subject {
    Subject { id: id.into(), x: x.to_vec(), y, y_hat: None }
}

fn desert(c: &[f64]) -> WeightVector {
    WeightVector::new(c.to_vec(), Part::Desert).unwrap()
}

fn utility(c: &[f64]) -> WeightVector {
    WeightVector::new(c.to_vec(), Part::Utility).unwrap()
}

#[test]
fn desert_examples() {
    let s = subject("a", &[1.0, 1.0, 0.0, 1.0, 0.3], 1);
    assert_eq!(compute_desert(&desert(&[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]), &s).unwrap(), 1.0);
    assert_eq!(compute_desert(&WeightVector::zeros(6, Part::Desert), &s).unwrap(), 0.0);
    let table = desert(&[0.11, -0.19, 0.13, -0.46, -0.25, -0.41]);
    let d = compute_desert(&table, &s).unwrap();
    assert!((d - (-1.025)).abs() < 1e-12, "{d}");
    assert!(matches!(compute_desert(&desert(&[1.0]), &s), Err(AuditError::Shape { .. })));
}

#[test]
fn utility_examples() {
    let s = subject("a", &[1.0, 0.0], 1);
    let e_hat = utility(&[0.0, 0.0, 0.0, 1.0]);
    assert_eq!(compute_utility(&e_hat, &s, 1).unwrap(), 1.0);
    assert_eq!(compute_utility(&WeightVector::zeros(4, Part::Utility), &s, 1).unwrap(), 0.0);
    let w = utility(&[0.2, -0.3, 0.1, -0.5]);
    let diff = compute_utility(&w, &s, 1).unwrap() - compute_utility(&w, &s, 0).unwrap();
    assert!((diff - (-0.5)).abs() < 1e-15);
    assert!(matches!(compute_utility(&desert(&[0.0, 0.0, 0.0]), &s, 1), Err(AuditError::WrongKind { .. })));
}

#[test]
fn circumstance_keys() {
    let profile = CircumstanceProfile { irrelevant_flags: vec![true, false, true] };
    let s = subject("a", &[1.0, 0.0, 0.0], 0);
    assert_eq!(circumstance_key(&profile, &s).0, vec![1.0, 0.0]);
    let none = CircumstanceProfile { irrelevant_flags: vec![false; 3] };
    assert!(circumstance_key(&none, &s).0.is_empty());
    let t = subject("b", &[1.0, 1.0, 0.0], 1);
    assert_eq!(circumstance_key(&profile, &s), circumstance_key(&profile, &t));
}

#[test]
fn ks_basic_values() {
    assert_eq!(ks_statistic(&[0.0, 1.0], &[0.0, 1.0]), 0.0);
    assert_eq!(ks_statistic(&[0.0; 5], &[1.0; 7]), 1.0);
    assert!((ks_statistic(&[1.0, 2.0, 3.0, 4.0], &[3.0, 4.0, 5.0, 6.0]) - 0.5).abs() < 1e-15);
    // ties across samples are stepped together
    assert!((ks_statistic(&[0.0, 0.0, 1.0, 1.0], &[0.0, 1.0, 1.0, 1.0]) - 0.25).abs() < 1e-15);
    assert_eq!(ks_statistic(&[], &[1.0]), 0.0);
}

#[test]
fn ks_matches_brute_force_ecdf_gap() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let a: Vec<f64> = (0..rng.random_range(1..30)).map(|_| f64::from(rng.random_range(0..6))).collect();
        let b: Vec<f64> = (0..rng.random_range(1..30)).map(|_| f64::from(rng.random_range(0..6))).collect();
        let ecdf = |s: &[f64], t: f64| s.iter().filter(|v| **v <= t).count() as f64 / s.len() as f64;
        let brute = a.iter().chain(&b).map(|&t| (ecdf(&a, t) - ecdf(&b, t)).abs()).fold(0.0, f64::max);
        assert!((ks_statistic(&a, &b) - brute).abs() < 1e-15);
    }
}

fn two_group_population(n_per_group: usize) -> Vec<Subject> {
    (0..2 * n_per_group)
        .map(|i| subject(&format!("s{i}"), &[f64::from(u8::from(i < n_per_group)), 0.0], 0))
        .collect()
}

#[test]
fn identical_utilities_pass() {
    let subjects = two_group_population(50);
    let preds: PolicyPredictions = subjects.iter().map(|s| (s.id.clone(), 1)).collect();
    let profile = CircumstanceProfile { irrelevant_flags: vec![true, false] };
    let r = check_eop(
        &subjects,
        &preds,
        &WeightVector::zeros(3, Part::Desert),
        &utility(&[0.0, 0.0, 0.0, 1.0]),
        &profile,
        &AuditConfig::default(),
    )
    .unwrap();
    assert_eq!(r.overall_violation, 0.0);
    assert!(r.passes && !r.trivial);
    assert_eq!(r.bins.len(), 1);
}

#[test]
fn circumstance_dependent_policy_fails_with_full_divergence() {
    let subjects = two_group_population(50);
    let preds: PolicyPredictions = subjects
        .iter()
        .map(|s| (s.id.clone(), u8::from(s.x[0] == 1.0)))
        .collect();
    let profile = CircumstanceProfile { irrelevant_flags: vec![true, false] };
    let r = check_eop(
        &subjects,
        &preds,
        &WeightVector::zeros(3, Part::Desert),
        &utility(&[0.0, 0.0, 0.0, 1.0]),
        &profile,
        &AuditConfig::default(),
    )
    .unwrap();
    assert_eq!(r.overall_violation, 1.0);
    assert!(!r.passes);
}

#[test]
fn small_cells_are_skipped_not_scored() {
    let mut subjects = two_group_population(50);
    subjects.push(subject("odd", &[2.0, 0.0], 0));
    let preds: PolicyPredictions = subjects
        .iter()
        .map(|s| (s.id.clone(), u8::from(s.id == "odd")))
        .collect();
    let profile = CircumstanceProfile { irrelevant_flags: vec![true, false] };
    let r = check_eop(
        &subjects,
        &preds,
        &WeightVector::zeros(3, Part::Desert),
        &utility(&[0.0, 0.0, 0.0, 1.0]),
        &profile,
        &AuditConfig::default(),
    )
    .unwrap();
    assert_eq!(r.skipped_cells.len(), 1);
    assert_eq!(r.skipped_cells[0].size, 1);
    assert_eq!(r.overall_violation, 0.0);
}

#[test]
fn single_circumstance_class_is_trivial_pass() {
    let subjects = two_group_population(20);
    let preds: PolicyPredictions = subjects
        .iter()
        .map(|s| (s.id.clone(), u8::from(s.x[0] == 1.0)))
        .collect();
    let profile = CircumstanceProfile { irrelevant_flags: vec![false, false] };
    let r = check_eop(
        &subjects,
        &preds,
        &WeightVector::zeros(3, Part::Desert),
        &utility(&[0.0, 0.0, 0.0, 1.0]),
        &profile,
        &AuditConfig::default(),
    )
    .unwrap();
    assert!(r.trivial && r.passes);
}

#[test]
fn input_errors() {
    let profile = CircumstanceProfile { irrelevant_flags: vec![true, false] };
    let d = WeightVector::zeros(3, Part::Desert);
    let u = utility(&[0.0, 0.0, 0.0, 1.0]);
    let empty = PolicyPredictions::default();
    assert!(matches!(
        check_eop(&[], &empty, &d, &u, &profile, &AuditConfig::default()),
        Err(AuditError::Empty)
    ));
    let subjects = two_group_population(2);
    assert!(matches!(
        check_eop(&subjects, &empty, &d, &u, &profile, &AuditConfig::default()),
        Err(AuditError::MissingPrediction(_))
    ));
    let bad = AuditConfig { divergence_threshold: 1.5, ..Default::default() };
    assert!(check_eop(&subjects, &empty, &d, &u, &profile, &bad).is_err());
}

#[test]
fn quantile_bins_are_equal_mass_and_tie_stable() {
    let deserts: Vec<f64> = (0..100).map(f64::from).collect();
    let bins = quantile_bins(&deserts, 5);
    for b in 0..5 {
        assert_eq!(bins.iter().filter(|&&x| x == b).count(), 20);
    }
    assert!(quantile_bins(&[0.3; 40], 5).iter().all(|&b| b == 0));
}
