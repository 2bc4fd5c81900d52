use eop_core::domain::*;
use eop_core::domain::synthetic::*;

#[test]
fn generator_is_deterministic_and_valid() {
    let a = compas_like(500, 3);
    assert_eq!(a, compas_like(500, 3));
    assert_ne!(a, compas_like(500, 4));
    let schema = FeatureSchema::compas();
    assert!(a.iter().all(|s| s.validate(&schema).is_ok() && s.y_hat.is_some()));
    let male_rate = a.iter().filter(|s| s.x[0] == 1.0).count() as f64 / 500.0;
    assert!((0.7..0.9).contains(&male_rate));
    assert!(a.iter().any(|s| s.y == 1) && a.iter().any(|s| s.y == 0));
}
