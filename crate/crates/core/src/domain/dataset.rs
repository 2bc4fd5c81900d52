use std::collections::HashSet;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{DomainError, Subject};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Binary,
    BoundedCount,
}

/// How a raw column value becomes a feature value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Encoding {
    /// Column already holds 0 or 1.
    Flag,
    /// 1 iff the value equals `value` (case-insensitive).
    Equals { value: String },
    /// 1 iff the value differs from `value` (case-insensitive).
    NotEquals { value: String },
    /// 1 iff the numeric value is strictly below `threshold`.
    Below { threshold: f64 },
    /// Non-negative count, rescaled per [`CountScaling`].
    Count,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    pub encoding: Encoding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureSpec>,
    pub label_name: String,
    /// Column holding the raw risk score that is thresholded into ŷ.
    pub prediction_name: String,
}

impl FeatureSchema {
    /// The five recidivism attributes: male, younger than 25, not Caucasian,
    /// felony charge, prior count. Column names follow the ProPublica release.
    pub fn compas() -> Self {
        let binary = |name: &str, encoding: Encoding| FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Binary,
            encoding,
        };
        FeatureSchema {
            features: vec![
                binary("sex", Encoding::Equals { value: "Male".into() }),
                binary("age", Encoding::Below { threshold: 25.0 }),
                binary("race", Encoding::NotEquals { value: "Caucasian".into() }),
                binary("c_charge_degree", Encoding::Equals { value: "F".into() }),
                FeatureSpec {
                    name: "priors_count".into(),
                    kind: FeatureKind::BoundedCount,
                    encoding: Encoding::Count,
                },
            ],
            label_name: "two_year_recid".into(),
            prediction_name: "decile_score".into(),
        }
    }

    pub fn k(&self) -> usize {
        self.features.len()
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let mut seen = HashSet::new();
        for f in &self.features {
            if f.name.trim().is_empty() {
                return Err(DomainError::Schema("feature names must be non-empty".into()));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(DomainError::Schema(format!("duplicate feature `{}`", f.name)));
            }
            let count_encoding = matches!(f.encoding, Encoding::Count);
            if count_encoding != (f.kind == FeatureKind::BoundedCount) {
                return Err(DomainError::Schema(format!(
                    "feature `{}`: count encoding requires bounded_count kind",
                    f.name
                )));
            }
        }
        if self.features.is_empty() {
            return Err(DomainError::Schema("schema has no features".into()));
        }
        Ok(())
    }
}

/// Rescaling applied to count features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CountScaling {
    /// `min(count, cap) / cap`, in [0, 1].
    Capped { cap: f64 },
    /// Unnormalised counts.
    Raw,
}

impl CountScaling {
    pub fn apply(self, count: f64) -> f64 {
        match self {
            CountScaling::Capped { cap } => count.min(cap) / cap,
            CountScaling::Raw => count,
        }
    }

    /// Feature value of the largest count the scaling distinguishes.
    pub fn max_value(self) -> f64 {
        match self {
            CountScaling::Capped { .. } => 1.0,
            CountScaling::Raw => DEFAULT_PRIOR_CAP,
        }
    }
}

const DEFAULT_PRIOR_CAP: f64 = 10.0;

impl Default for CountScaling {
    fn default() -> Self {
        CountScaling::Capped { cap: DEFAULT_PRIOR_CAP }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    /// ŷ = 1 iff the raw score is at least this value.
    pub score_threshold: i64,
    pub count_scaling: CountScaling,
    /// Whether to derive ŷ from the score column (which must then exist).
    pub with_predictions: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            score_threshold: 5,
            count_scaling: CountScaling::default(),
            with_predictions: true,
        }
    }
}

/// Reads delimited records with a header row into subjects.
///
/// Subject ids come from an `id` column when present, otherwise from the
/// zero-based record index.
pub fn load_dataset<R: Read>(
    source: R,
    schema: &FeatureSchema,
    config: &DatasetConfig,
) -> Result<Vec<Subject>, DomainError> {
    schema.validate()?;
    if let CountScaling::Capped { cap } = config.count_scaling {
        if !(cap.is_finite() && cap > 0.0) {
            return Err(DomainError::Schema(format!("count cap must be positive, got {cap}")));
        }
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DomainError::MissingColumn(name.to_string()))
    };

    let feature_cols = schema
        .features
        .iter()
        .map(|f| column(&f.name))
        .collect::<Result<Vec<_>, _>>()?;
    let label_col = column(&schema.label_name)?;
    let score_col = if config.with_predictions {
        Some(column(&schema.prediction_name)?)
    } else {
        None
    };
    let id_col = headers.iter().position(|h| h == "id");

    let mut subjects = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let field = |idx: usize| record.get(idx).unwrap_or("");
        let bad = |message: String| DomainError::Record { row, message };

        let mut x = Vec::with_capacity(schema.k());
        for (spec, &col) in schema.features.iter().zip(&feature_cols) {
            let raw = field(col);
            let numeric = || {
                raw.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(format!("`{}` is not numeric: {raw:?}", spec.name)))
            };
            let value = match &spec.encoding {
                Encoding::Flag => match numeric()? {
                    v if v == 0.0 || v == 1.0 => v,
                    v => return Err(bad(format!("`{}` must be 0 or 1, got {v}", spec.name))),
                },
                Encoding::Equals { value } => f64::from(u8::from(raw.eq_ignore_ascii_case(value))),
                Encoding::NotEquals { value } => {
                    f64::from(u8::from(!raw.eq_ignore_ascii_case(value)))
                }
                Encoding::Below { threshold } => f64::from(u8::from(numeric()? < *threshold)),
                Encoding::Count => {
                    let count = numeric()?;
                    if count < 0.0 {
                        return Err(bad(format!("`{}` must be non-negative, got {count}", spec.name)));
                    }
                    config.count_scaling.apply(count)
                }
            };
            x.push(value);
        }

        let y = parse_label(field(label_col)).ok_or_else(|| {
            bad(format!("`{}` must be 0 or 1, got {:?}", schema.label_name, field(label_col)))
        })?;
        let y_hat = match score_col {
            Some(col) => {
                let raw = field(col);
                let score: f64 = raw
                    .parse()
                    .map_err(|_| bad(format!("`{}` is not numeric: {raw:?}", schema.prediction_name)))?;
                Some(u8::from(score >= config.score_threshold as f64))
            }
            None => None,
        };
        let id = id_col.map_or_else(|| row.to_string(), |c| field(c).to_string());
        subjects.push(Subject { id, x, y, y_hat });
    }
    Ok(subjects)
}

fn parse_label(raw: &str) -> Option<u8> {
    let v = raw.parse::<f64>().ok()?;
    if v == 0.0 {
        Some(0)
    } else if v == 1.0 {
        Some(1)
    } else {
        None
    }
}
