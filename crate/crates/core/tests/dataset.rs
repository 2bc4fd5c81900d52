use eop_core::domain::*;

const HEADER: &str = "id,sex,age,race,c_charge_degree,priors_count,two_year_recid,decile_score\n";

fn load(body: &str) -> Result<Vec<Subject>, DomainError> {
    let text = format!("{HEADER}{body}");
    load_dataset(text.as_bytes(), &FeatureSchema::compas(), &DatasetConfig::default())
}

#[test]
fn encodes_compas_record() {
    let s = load("a,Male,22,Caucasian,F,3,1,7\n").unwrap();
    assert_eq!(s[0].x, vec![1.0, 1.0, 0.0, 1.0, 0.3]);
    assert_eq!(s[0].y, 1);
    assert_eq!(s[0].y_hat, Some(1));
    assert_eq!(s[0].id, "a");
}

#[test]
fn score_below_threshold_predicts_zero() {
    let s = load("a,Male,22,Caucasian,F,3,1,4\nb,Male,22,Caucasian,F,3,1,5\n").unwrap();
    assert_eq!(s[0].y_hat, Some(0));
    assert_eq!(s[1].y_hat, Some(1));
}

#[test]
fn zero_record() {
    let s = load("a,Female,40,Caucasian,M,0,0,1\n").unwrap();
    assert_eq!(s[0].x, vec![0.0; 5]);
}

#[test]
fn priors_are_capped_or_raw() {
    let s = load("a,Female,40,Caucasian,M,25,0,1\n").unwrap();
    assert_eq!(s[0].x[4], 1.0);

    let text = format!("{HEADER}a,Female,40,Caucasian,M,25,0,1\n");
    let config = DatasetConfig { count_scaling: CountScaling::Raw, ..Default::default() };
    let s = load_dataset(text.as_bytes(), &FeatureSchema::compas(), &config).unwrap();
    assert_eq!(s[0].x[4], 25.0);
}

#[test]
fn missing_column_is_named() {
    let text = "sex,age,race,priors_count,two_year_recid,decile_score\nMale,22,Other,1,0,3\n";
    let err = load_dataset(text.as_bytes(), &FeatureSchema::compas(), &DatasetConfig::default())
        .unwrap_err();
    assert!(matches!(err, DomainError::MissingColumn(ref c) if c == "c_charge_degree"));
}

#[test]
fn non_numeric_count_reports_row() {
    let err = load("a,Male,22,Caucasian,F,3,1,7\nb,Male,22,Caucasian,F,many,1,7\n").unwrap_err();
    assert!(matches!(err, DomainError::Record { row: 1, .. }), "{err}");
}

#[test]
fn negative_count_is_rejected() {
    assert!(matches!(load("a,Male,22,Other,F,-1,1,7\n"), Err(DomainError::Record { .. })));
}

#[test]
fn missing_id_column_uses_row_index() {
    let text = "sex,age,race,c_charge_degree,priors_count,two_year_recid,decile_score\n\
                Male,22,Other,F,1,0,3\nFemale,30,Other,M,0,1,8\n";
    let s = load_dataset(text.as_bytes(), &FeatureSchema::compas(), &DatasetConfig::default())
        .unwrap();
    assert_eq!(s[1].id, "1");
    assert!(s.iter().all(|s| s.validate(&FeatureSchema::compas()).is_ok()));
}

#[test]
fn deterministic() {
    let body = "a,Male,22,Caucasian,F,3,1,7\nb,Female,50,Other,M,12,0,2\n";
    assert_eq!(load(body).unwrap(), load(body).unwrap());
}

#[test]
fn schema_validation() {
    let mut schema = FeatureSchema::compas();
    schema.features[1].name = "sex".into();
    assert!(schema.validate().is_err());
    let mut schema = FeatureSchema::compas();
    schema.features[0].name = " ".into();
    assert!(schema.validate().is_err());
}
