//! Participant-facing text. The defaults reproduce the study wording
//! verbatim; studies may override any of it in their config.

use serde::{Deserialize, Serialize};

use eop_core::domain::{CountScaling, FeatureKind, FeatureSchema, LikertLevel, Part};

pub const BACKGROUND: &str = "Data-driven decision-making algorithms are increasingly employed to automate the process of making important decisions for humans, in areas such as credit lending, medicine, criminal justice, and beyond. Organizations in charge of decision-making can utilize massive datasets of historical records to learn a decision-making rule capable of making accurate predictions about never-before-seen individuals. Such predictions often serve as the basis for consequential decisions for these individuals. (From this point on we will refer to individuals subject to decisions as decision subjects.)

In recent years, several studies have shown that automated/algorithmic decisions made in the above fashion may disparately impact certain groups and individuals. For instance, in the context of credit lending, the decision-making rule may systematically disadvantage loan applicants belonging to a certain racial group and reject their loan applications more frequently. These observations have raised many questions and concerns about the fairness of automated decisions.

The goal of our study is to understand your moral reasoning and perception about what it means for automated decisions to be fair---considering the specifics of the decision-making context. We would like to know your ethical judgment through your answers to the following questions:
- Which attributes of a decision subject do you consider morally acceptable for the decision-making rule to base its decisions on?
- Comparing the attributes of two decision subjects, which one of them do you believe is more deserving of receiving a better (more desirable) decision?
- How do you believe automated decisions will impact these subjects? We would like you to imagine how algorithmic decisions may contribute to the overall happiness, satisfaction, and well-being of a decision subject.";

pub const CONTEXT: &str = "In court-rooms across the United States, data-driven decision-making algorithms are employed to predict the likelihood of future crimes by defendants. These algorithmic predictions are utilized by judges to make sentencing decisions for defendants (e.g., setting the bail amount, or time to be spent in jail). Decision-making algorithms use historical data about past defendants to learn about factors that highly correlate with criminality. For instance, the algorithm may learn from past data that: 1) a defendant with a lengthy criminal history is more likely to reoffend if set free on bail---compared to a first-time offender, or 2) defendants belonging to certain groups (e.g., residents of neighborhoods with high crime rate) are more likely to reoffend if set free. These automated predictions may directly translate into sentencing decisions. For instance, a defendant who is predicted to have a high risk of reoffending may be sentenced to jail, whereas a defendant who is predicted to have a low risk of reoffending may be set free on bail.";

const DISCLAIMER: &str = "(Note that this example is only meant to illustrate the task. You may have a very different opinion.)";

pub const PAIRWISE_LABELS: [(&str, i8); 4] = [
    ("Clearly subject 1", 2),
    ("Possibly subject 1", 1),
    ("Possibly subject 2", -1),
    ("Clearly subject 2", -2),
];

pub const NO_PREFERENCE_LABEL: &str = "No preference";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartIntro {
    pub text: String,
    /// Shown highlighted as an illustration.
    pub example: String,
    /// Shown as a caution under the example.
    pub disclaimer: String,
}

/// How one feature is named and rendered to participants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDisplay {
    pub label: String,
    /// Completes "(which can take one of the following values: …)".
    pub values: String,
    /// Labels for encoded values 0 and 1; count features render as numbers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binary_labels: Option<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyContent {
    pub background: String,
    pub context: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub long_intro: Option<String>,
    pub likert_intro: PartIntro,
    pub desert_intro: PartIntro,
    pub utility_intro: PartIntro,
    pub likert_prompt: String,
    /// `{attribute}` and `{values}` are substituted per feature.
    pub likert_statement: String,
    pub desert_prompt: String,
    pub utility_prompt: String,
    pub features: Vec<FeatureDisplay>,
    pub label: FeatureDisplay,
    pub prediction: FeatureDisplay,
}

fn part_intro(text: &str, example: &str) -> PartIntro {
    PartIntro { text: text.into(), example: example.into(), disclaimer: DISCLAIMER.into() }
}

fn binary(label: &str, values: &str, zero: &str, one: &str) -> FeatureDisplay {
    FeatureDisplay {
        label: label.into(),
        values: values.into(),
        binary_labels: Some([zero.into(), one.into()]),
    }
}

impl StudyContent {
    /// Wording for the COMPAS recidivism study.
    pub fn compas() -> Self {
        StudyContent {
            background: BACKGROUND.into(),
            context: CONTEXT.into(),
            long_intro: None,
            likert_intro: part_intro(
                "In the first part, we would like to understand your moral reasoning about the following: Which attributes of a defendant do you consider morally acceptable for the decision-making rule to base its predictions on?",
                "Example: one may believe it acceptable for the decision-making rule to take the subject's criminal history into account, but find it unacceptable for his/her parents' criminal history to impact whether he/she is predicted to have a high or low risk of reoffending.",
            ),
            desert_intro: part_intro(
                "In the second part, we would like to understand your moral reasoning about the following: Comparing the attributes of two defendants, which one of them do you believe is more deserving of receiving a more lenient decision?",
                "Example: Consider two defendants with similar attributes, except for their employment status---one unemployed, the other a local government employee. One may consider the employed subject more deserving of the \"low risk to reoffend\" prediction.",
            ),
            utility_intro: part_intro(
                "In the third part, we would like to understand your moral reasoning about the following: Given the attributes of two defendants, which one of them do you believe would benefit more from their respective algorithmic decision? In responding to this question, imagine yourself in the circumstances of these two defendants and think about how the sentencing decision they receive may affect their lives.",
                "Example: Consider two defendants with similar attributes, except for their number of dependants (one with two children and another with no dependents.). One may believe that a \"low risk to reoffend\" prediction would contribute more to the overall satisfaction, happiness, and well-being of the subject who has kids.",
            ),
            likert_prompt: "To what extent do you agree with the following statement:".into(),
            likert_statement: "It is ethically acceptable for the attribute {attribute} (which can take one of the following values: {values}) to impact the decision a defendant receives.".into(),
            desert_prompt: "From an ethical standpoint, between the following two decision subjects, who do you believe deserves a more lenient decision?".into(),
            utility_prompt: "From an ethical standpoint, between the two following decision subjects, who do you think will benefit more from their algorithmic decision?".into(),
            features: vec![
                binary("gender", "male, female", "Female", "Male"),
                binary("age", "less than 25, 25 or older", "25 or older", "Less than 25"),
                binary("race", "Caucasian, not Caucasian", "Caucasian", "Not Caucasian"),
                binary("charge degree", "felony, misdemeanor", "Misdemeanor", "Felony"),
                FeatureDisplay {
                    label: "prior counts".into(),
                    values: "a non-negative integer".into(),
                    binary_labels: None,
                },
            ],
            label: binary("reoffended within two years", "yes, no", "No", "Yes"),
            prediction: binary("predicted risk", "high risk, low risk", "Low risk", "High risk"),
        }
    }

    pub fn intro(&self, part: Option<Part>) -> &PartIntro {
        match part {
            None => &self.likert_intro,
            Some(Part::Desert) => &self.desert_intro,
            Some(Part::Utility) => &self.utility_intro,
        }
    }

    pub fn pairwise_prompt(&self, part: Part) -> &str {
        match part {
            Part::Desert => &self.desert_prompt,
            Part::Utility => &self.utility_prompt,
        }
    }

    pub fn likert_text(&self, feature: usize) -> String {
        let display = self.features.get(feature);
        self.likert_statement
            .replace("{attribute}", display.map_or("?", |d| d.label.as_str()))
            .replace("{values}", display.map_or("?", |d| d.values.as_str()))
    }

    pub fn validate(&self, schema: &FeatureSchema) -> Result<(), String> {
        if self.features.len() != schema.k() {
            return Err(format!(
                "content describes {} features, schema has {}",
                self.features.len(),
                schema.k()
            ));
        }
        Ok(())
    }
}

pub fn likert_options() -> Vec<LikertOption> {
    LikertLevel::ALL
        .iter()
        .map(|&level| LikertOption { value: level, label: level.label().into() })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikertOption {
    pub value: LikertLevel,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseOption {
    /// Wire encoding: ±1, ±2, or "no_preference".
    pub value: serde_json::Value,
    pub label: String,
}

pub fn pairwise_options(allow_neutral: bool) -> Vec<PairwiseOption> {
    let mut options: Vec<PairwiseOption> = PAIRWISE_LABELS
        .iter()
        .map(|(label, v)| PairwiseOption { value: (*v).into(), label: (*label).into() })
        .collect();
    if allow_neutral {
        // between the two "possibly" options
        options.insert(
            2,
            PairwiseOption { value: "no_preference".into(), label: NO_PREFERENCE_LABEL.into() },
        );
    }
    options
}

/// Human-readable rendering of one encoded attribute value.
pub fn render_value(display: &FeatureDisplay, kind: FeatureKind, value: f64, scaling: &CountScaling) -> String {
    match (kind, &display.binary_labels) {
        (FeatureKind::Binary, Some([zero, one])) => {
            if value >= 0.5 { one.clone() } else { zero.clone() }
        }
        (FeatureKind::BoundedCount, _) => match scaling {
            CountScaling::Capped { cap } => {
                let count = (value * cap).round();
                if count >= *cap {
                    format!("{cap} or more")
                } else {
                    format!("{count}")
                }
            }
            CountScaling::Raw => format!("{}", value.round()),
        },
        _ => format!("{value}"),
    }
}
