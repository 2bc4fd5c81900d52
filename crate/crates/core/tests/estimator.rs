use eop_core::domain::*;
use eop_core::estimator::*;
use eop_core::domain::{Choice, PairwiseAnswer, Response, Subject};

fn ans(v: i64) -> Answer {
    Answer::try_from(v).unwrap()
}

fn row(delta: &[f64], a: i64) -> ComparisonRow {
    ComparisonRow::new(delta.to_vec(), ans(a))
}

#[test]
fn nll_at_zero_is_q_ln2() {
    let rows = vec![row(&[1.0, 0.0, 1.0], 1), row(&[0.0, -1.0, 0.3], -2), row(&[0.0, 0.0, 1.0], 2)];
    let v = negative_log_likelihood(&[0.0; 3], &rows).unwrap();
    assert!((v - 3.0 * 2f64.ln()).abs() < 1e-15);
}

#[test]
fn nll_single_row_values() {
    // −log Φ(1) and −log Φ(2)
    let one = negative_log_likelihood(&[1.0, 0.0], &[row(&[1.0, 0.0], 1)]).unwrap();
    assert!((one - 0.172_753_779_023_450).abs() < 1e-12, "{one}");
    let two = negative_log_likelihood(&[1.0, 0.0], &[row(&[1.0, 0.0], 2)]).unwrap();
    assert!((two - 0.023_012_909_328_963).abs() < 1e-12, "{two}");
}

#[test]
fn nll_shape_error() {
    assert!(matches!(
        negative_log_likelihood(&[0.0; 2], &[row(&[1.0], 1)]),
        Err(EstimateError::Shape { expected: 2, got: 1 })
    ));
    assert!(nll_gradient(&[0.0; 2], &[row(&[1.0, 2.0, 3.0], 1)]).is_err());
}

#[test]
fn gradient_examples() {
    let g = nll_gradient(&[0.0, 0.0], &[row(&[1.0, 0.0], 1)]).unwrap();
    assert!((g[0] + (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
    assert_eq!(g[1], 0.0);
    assert_eq!(nll_gradient(&[0.3, 0.1], &[]).unwrap(), vec![0.0, 0.0]);
    let g = nll_gradient(&[0.0, 0.0], &[row(&[0.5, -1.0], 1), row(&[-0.5, 1.0], 1)]).unwrap();
    assert_eq!(g, vec![0.0, 0.0]);
}

#[test]
fn projection_examples() {
    assert_eq!(project_unit_ball(&[0.3, 0.4]), vec![0.3, 0.4]);
    let p = project_unit_ball(&[3.0, 4.0]);
    assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
    assert_eq!(project_unit_ball(&[0.0, 0.0]), vec![0.0, 0.0]);
    assert_eq!(project_unit_ball(&p), p);
}

#[test]
fn flat_objective_returns_start() {
    let rows = vec![row(&[0.0, 0.0, 0.0], 2); 4];
    let fit = estimate_weights(&rows, 3, Part::Desert, &SolverConfig::default()).unwrap();
    assert_eq!(fit.weights.coefficients(), &[0.0, 0.0, 0.0]);
    assert!(fit.converged);
    assert!((fit.log_likelihood + 4.0 * 2f64.ln()).abs() < 1e-12);
}

#[test]
fn empty_rows_error() {
    assert!(matches!(
        estimate_weights(&[], 2, Part::Desert, &SolverConfig::default()),
        Err(EstimateError::InsufficientData(_))
    ));
    assert!(estimate_eoo_baseline(&[], 1, Part::Desert, &SolverConfig::default()).is_err());
}

#[test]
fn noiseless_2d_recovery() {
    // Deterministic answers a = sign(w*·Δ) over an evenly spread set of directions.
    let truth = [0.8, -0.6];
    let rows: Vec<ComparisonRow> = (0..200)
        .map(|i| {
            let angle = i as f64 * 2.0 * std::f64::consts::PI / 200.0 + 0.01;
            let delta = [angle.cos(), angle.sin()];
            let a = if dot(&truth, &delta) > 0.0 { 1 } else { -1 };
            row(&delta, a)
        })
        .collect();
    let fit = estimate_weights(&rows, 2, Part::Desert, &SolverConfig::default()).unwrap();
    let cos = eop_core::domain::cosine_similarity(fit.weights.coefficients(), &truth).unwrap();
    assert!(cos >= 0.99, "cosine {cos}");
    assert!(fit.converged);
}

#[test]
fn single_clear_response_hits_boundary_for_both_confidences() {
    for a in [1, 2] {
        let fit = estimate_weights(&[row(&[0.0, 1.0], a)], 2, Part::Desert, &SolverConfig::default()).unwrap();
        let w = fit.weights.coefficients();
        assert!((w[1] - 1.0).abs() < 1e-9 && w[0].abs() < 1e-12, "{w:?}");
        assert!(fit.converged);
    }
}

#[test]
fn eoo_baseline_examples() {
    let rows = vec![row(&[0.0, -1.0], 2), row(&[0.0, 1.0], -2), row(&[0.0, -1.0], 2)];
    let fit = estimate_eoo_baseline(&rows, 1, Part::Desert, &SolverConfig::default()).unwrap();
    assert_eq!(fit.weights.coefficients()[0], 0.0);
    assert!((fit.weights.coefficients()[1] + 1.0).abs() < 1e-12);

    let rows = vec![row(&[1.0, 0.0], 1), row(&[-1.0, 0.0], 2)];
    let fit = estimate_eoo_baseline(&rows, 1, Part::Desert, &SolverConfig::default()).unwrap();
    assert_eq!(fit.weights.coefficients(), &[0.0, 0.0]);
    assert!((fit.log_likelihood + 2.0 * 2f64.ln()).abs() < 1e-12);
}

#[test]
fn fit_log_likelihood_matches_objective() {
    let rows = vec![row(&[1.0, 0.0, 1.0], 1), row(&[0.0, -1.0, 0.3], -2), row(&[0.5, 0.0, 1.0], -1)];
    let fit = estimate_weights(&rows, 3, Part::Utility, &SolverConfig::default()).unwrap();
    let nll = negative_log_likelihood(fit.weights.coefficients(), &rows).unwrap();
    assert!((fit.log_likelihood + nll).abs() <= 1e-12);
    assert!(fit.weights.norm() <= 1.0 + 1e-9);
}

fn subject(id: &str, x: &[f64], y: u8, y_hat: u8) -> Subject {
    Subject { id: id.into(), x: x.to_vec(), y, y_hat: Some(y_hat) }
}

fn question(id: &str, part: Part, s1: Subject, s2: Subject, check: bool) -> PairwiseQuestion {
    PairwiseQuestion {
        question_id: id.into(),
        part,
        subject_1: s1,
        subject_2: s2,
        is_attention_check: check,
        show_prediction: part == Part::Utility,
        expected_choice: check.then_some(Choice::Subject1),
    }
}

fn response(id: &str, a: PairwiseAnswer) -> Response {
    Response { question_id: id.into(), answer: a, justification: None, answered_at: 0 }
}

#[test]
fn desert_prefers_negative_label_weight() {
    // Otherwise-identical pairs; the y=0 subject is always chosen.
    let mut questions = Vec::new();
    let mut p = Participant::new("p");
    for i in 0..6 {
        let x = [f64::from(i % 2), 0.0, 1.0];
        let (s1, s2, a) = if i % 3 == 0 {
            (subject("a", &x, 1, 0), subject("b", &x, 0, 0), -1)
        } else {
            (subject("a", &x, 0, 0), subject("b", &x, 1, 0), 2)
        };
        let id = format!("d{i}");
        questions.push(question(&id, Part::Desert, s1, s2, false));
        p.desert_responses.push(response(&id, ans(a).into()));
    }
    let fit = estimate_desert(&p, &questions, 3, &SolverConfig::default()).unwrap();
    assert_eq!(fit.weights.dim(), 4);
    assert!(fit.weights.coefficients()[3] < 0.0);
}

#[test]
fn desert_single_clear_choice_goes_to_boundary() {
    let x = [0.0, 1.0];
    let questions = vec![question("d0", Part::Desert, subject("a", &x, 1, 0), subject("b", &x, 0, 0), false)];
    let mut p = Participant::new("p");
    p.desert_responses.push(response("d0", ans(2).into()));
    let fit = estimate_desert(&p, &questions, 2, &SolverConfig::default()).unwrap();
    let w = fit.weights.coefficients();
    assert!((w[2] - 1.0).abs() < 1e-9 && w[0] == 0.0 && w[1] == 0.0);
}

#[test]
fn attention_checks_and_neutral_answers_are_excluded() {
    let x = [0.0];
    let questions = vec![
        question("c", Part::Desert, subject("a", &x, 0, 0), subject("b", &[1.0], 1, 0), true),
        question("n", Part::Desert, subject("a", &x, 0, 0), subject("b", &x, 1, 0), false),
    ];
    let mut p = Participant::new("p");
    p.desert_responses.push(response("c", ans(2).into()));
    p.desert_responses.push(response("n", PairwiseAnswer::Neutral(eop_core::domain::NoPreference::NoPreference)));
    assert!(comparison_rows(&p, Part::Desert, &questions).unwrap().is_empty());
    assert!(matches!(
        estimate_desert(&p, &questions, 1, &SolverConfig::default()),
        Err(EstimateError::InsufficientData(_))
    ));
    assert!(estimate_desert(&Participant::new("q"), &questions, 1, &SolverConfig::default()).is_err());
}

#[test]
fn unknown_or_wrong_part_question_is_an_error() {
    let x = [0.0];
    let questions = vec![question("u", Part::Utility, subject("a", &x, 0, 0), subject("b", &x, 0, 1), false)];
    let mut p = Participant::new("p");
    p.desert_responses.push(response("u", ans(1).into()));
    assert!(matches!(
        comparison_rows(&p, Part::Desert, &questions),
        Err(EstimateError::WrongPart { .. })
    ));
    p.desert_responses[0].question_id = "zz".into();
    assert!(matches!(
        comparison_rows(&p, Part::Desert, &questions),
        Err(EstimateError::UnknownQuestion(_))
    ));
}

#[test]
fn utility_prefers_positive_prediction_weight_and_mirrors() {
    let mut questions = Vec::new();
    let mut mirrored_questions = Vec::new();
    let mut p = Participant::new("p");
    let mut m = Participant::new("m");
    for i in 0..5 {
        let x = [f64::from(i % 2), 1.0];
        let hi = subject("hi", &x, (i % 2) as u8, 1);
        let lo = subject("lo", &x, (i % 2) as u8, 0);
        let id = format!("u{i}");
        let a = ans(if i % 2 == 0 { 2 } else { 1 });
        questions.push(question(&id, Part::Utility, hi.clone(), lo.clone(), false));
        mirrored_questions.push(question(&id, Part::Utility, lo, hi, false));
        p.utility_responses.push(response(&id, a.into()));
        m.utility_responses.push(response(&id, a.mirrored().into()));
    }
    let fit = estimate_utility(&p, &questions, 2, &SolverConfig::default()).unwrap();
    assert!(fit.weights.coefficients()[3] > 0.0);
    let mirrored = estimate_utility(&m, &mirrored_questions, 2, &SolverConfig::default()).unwrap();
    for (a, b) in fit.weights.coefficients().iter().zip(mirrored.weights.coefficients()) {
        assert!((a - b).abs() < 1e-6);
    }
    assert!((fit.log_likelihood - mirrored.log_likelihood).abs() < 1e-9);
}

#[test]
fn utility_all_zero_deltas_is_flat() {
    let s = subject("a", &[1.0], 0, 1);
    let questions = vec![question("u", Part::Utility, s.clone(), s, false)];
    let mut p = Participant::new("p");
    p.utility_responses.push(response("u", ans(-2).into()));
    let fit = estimate_utility(&p, &questions, 1, &SolverConfig::default()).unwrap();
    assert_eq!(fit.weights.coefficients(), &[0.0, 0.0, 0.0]);
}
