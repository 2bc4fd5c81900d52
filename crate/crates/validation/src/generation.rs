//! Question-generation and audit criteria.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use eop_core::domain::{CircumstanceProfile, Part, Subject, WeightVector};
use eop_core::eop_audit::{check_eop, AuditConfig, PolicyPredictions};
use eop_core::questiongen::PairSampler;

use crate::{timed, Outcome};

fn displayed(s: &Subject, show_prediction: bool) -> Vec<f64> {
    let mut v = s.x.clone();
    v.push(f64::from(s.y));
    if show_prediction {
        v.push(f64::from(s.y_hat.unwrap_or(0)));
    }
    v
}

pub fn difference_rule(dataset: &[Subject]) -> Outcome {
    timed("10,000 pairs within the 2-attribute difference rule", || {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut bad = 0;
        let mut checked = 0;
        for (part, show) in [(Part::Desert, false), (Part::Utility, true)] {
            let sampler = PairSampler::new(dataset, part, show, 2).expect("fixture is non-empty");
            for _ in 0..5000 {
                let q = sampler.sample(&mut rng).expect("fixture has partners");
                let (a, b) = (displayed(&q.subject_1, show), displayed(&q.subject_2, show));
                let differing = a.iter().zip(&b).filter(|(x, y)| x != y).count();
                if !(1..=2).contains(&differing) || q.subject_1.id == q.subject_2.id {
                    bad += 1;
                }
                checked += 1;
            }
        }
        (bad == 0, format!("{} of {checked} pairs satisfy the rule", checked - bad))
    })
}

/// Two clusters of five subjects: partners exist only within a cluster.
pub fn ten_subjects() -> Vec<Subject> {
    (0..10)
        .map(|i| {
            let cluster = f64::from(u8::from(i >= 5));
            Subject {
                id: format!("t{i}"),
                x: vec![cluster, cluster, cluster, cluster, f64::from(i % 5) / 10.0],
                y: u8::from(i >= 5),
                y_hat: Some(0),
            }
        })
        .collect()
}

pub fn first_subject_uniformity() -> Outcome {
    timed("subject_1 uniform on 10 subjects (50k draws, 3 sigma)", || {
        let dataset = ten_subjects();
        let sampler = PairSampler::new(&dataset, Part::Desert, false, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let draws = 50_000usize;
        let mut counts = [0usize; 10];
        for _ in 0..draws {
            let (first, _) = sampler.sample_indices(&mut rng).unwrap();
            counts[first] += 1;
        }
        let p = 0.1;
        let expected = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        let worst = counts.iter().map(|&c| (c as f64 - expected).abs() / sigma).fold(0.0, f64::max);
        (worst <= 3.0, format!("counts {counts:?}, largest deviation {worst:.2} sigma"))
    })
}

/// `n` subjects whose first feature is a balanced binary circumstance.
pub fn audit_population(n: usize, rng: &mut ChaCha8Rng) -> Vec<Subject> {
    (0..n)
        .map(|i| Subject {
            id: format!("a{i}"),
            x: vec![
                f64::from(u8::from(rng.random_bool(0.5))),
                f64::from(u8::from(rng.random_bool(0.3))),
                f64::from(u8::from(rng.random_bool(0.4))),
                f64::from(u8::from(rng.random_bool(0.6))),
                f64::from(rng.random_range(0..=10u8)) / 10.0,
            ],
            y: u8::from(rng.random_bool(0.4)),
            y_hat: None,
        })
        .collect()
}

fn circumstance_is_first_feature() -> CircumstanceProfile {
    CircumstanceProfile { irrelevant_flags: vec![true, false, false, false, false] }
}

/// Utility is the decision itself.
fn decision_utility() -> WeightVector {
    WeightVector::new(vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0], Part::Utility).unwrap()
}

pub fn audit_constructed_violation() -> Outcome {
    timed("audit flags a circumstance-dependent policy", || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let subjects = audit_population(2000, &mut rng);
        let predictions: PolicyPredictions = subjects.iter().map(|s| (s.id.clone(), s.x[0] as u8)).collect();
        let delta = WeightVector::new(vec![0.0, 0.2, 0.0, 0.3, 0.6, 0.5], Part::Desert).unwrap();
        let report = check_eop(
            &subjects,
            &predictions,
            &delta,
            &decision_utility(),
            &circumstance_is_first_feature(),
            &AuditConfig::default(),
        )
        .unwrap();
        (
            report.overall_violation == 1.0 && !report.passes,
            format!(
                "violation {:.3}, passes {}, {} bins, {} skipped cells",
                report.overall_violation,
                report.passes,
                report.bins.len(),
                report.skipped_cells.len()
            ),
        )
    })
}

/// A fair coin decides every case. Desert is uniform (zero δ), so all
/// subjects share one desert level and the audit compares the two
/// circumstance groups directly.
pub fn audit_random_policy() -> Outcome {
    timed("audit passes a circumstance-independent random policy (100 repetitions)", || {
        let delta = WeightVector::new(vec![0.0; 6], Part::Desert).unwrap();
        let mut passes = 0;
        let mut worst: f64 = 0.0;
        for rep in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(10_000 + rep);
            let subjects = audit_population(2000, &mut rng);
            let predictions: PolicyPredictions =
                subjects.iter().map(|s| (s.id.clone(), u8::from(rng.random_bool(0.5)))).collect();
            let report = check_eop(
                &subjects,
                &predictions,
                &delta,
                &decision_utility(),
                &circumstance_is_first_feature(),
                &AuditConfig::default(),
            )
            .unwrap();
            worst = worst.max(report.overall_violation);
            if report.passes {
                passes += 1;
            }
        }
        (passes >= 99, format!("{passes}/100 pass at threshold 0.1, largest divergence {worst:.3}"))
    })
}
