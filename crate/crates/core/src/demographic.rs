//! Annotator demographics as pseudo-tokens placed ahead of the words.
//!
//! Each declared feature renders as one `name=value` token. Prefixing the
//! feature name keeps `age=25` distinct from a literal `25` in the text.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::al::{self, AlError, Instance, MultiTaskModel, TaskSuggestion};

/// One scalar demographic value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DemoValue {
    Number(f64),
    Text(String),
}

impl From<f64> for DemoValue {
    fn from(x: f64) -> Self {
        DemoValue::Number(x)
    }
}

impl From<&str> for DemoValue {
    fn from(s: &str) -> Self {
        DemoValue::Text(s.to_string())
    }
}

/// How a numeric value is discretized before rendering.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Binning {
    /// Render the value as given.
    Raw,
    /// `[10k, 10k + 9]`, rendered `20-29`.
    #[default]
    Decade,
    /// Ascending bin edges; values fall in `[e_i, e_{i+1})`.
    Edges(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDecl {
    pub name: String,
    #[serde(default)]
    pub binning: Binning,
}

impl FeatureDecl {
    pub fn new(name: impl Into<String>, binning: Binning) -> Self {
        Self { name: name.into(), binning }
    }

    fn render(&self, value: &DemoValue) -> String {
        let rendered = match value {
            DemoValue::Text(s) => s.clone(),
            DemoValue::Number(x) => match &self.binning {
                Binning::Raw => fmt_number(*x),
                Binning::Decade => {
                    let lo = (x / 10.0).floor() * 10.0;
                    format!("{}-{}", fmt_number(lo), fmt_number(lo + 9.0))
                }
                Binning::Edges(edges) => match edges.iter().rposition(|e| e <= x) {
                    None => format!("<{}", fmt_number(edges[0])),
                    Some(i) if i + 1 == edges.len() => format!(">={}", fmt_number(edges[i])),
                    Some(i) => format!("{}-{}", fmt_number(edges[i]), fmt_number(edges[i + 1])),
                },
            },
        };
        format!("{}={}", self.name, rendered)
    }
}

fn fmt_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// A task's declared features, in the order they are rendered.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DemographicSchema {
    pub features: Vec<FeatureDecl>,
}

impl DemographicSchema {
    pub fn new(features: Vec<FeatureDecl>) -> Self {
        Self { features }
    }

    /// The age-only schema with decade bins.
    pub fn age_only() -> Self {
        Self::new(vec![FeatureDecl::new("age", Binning::Decade)])
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// An annotator's feature values.
pub type DemographicProfile = BTreeMap<String, DemoValue>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DemoError {
    #[error("profile lacks declared feature `{0}`")]
    MissingFeature(String),
    #[error(transparent)]
    Model(#[from] AlError),
}

/// Renders the declared features of `profile` as pseudo-tokens.
pub fn encode_demographics(schema: &DemographicSchema, profile: &DemographicProfile) -> Result<Vec<String>, DemoError> {
    schema
        .features
        .iter()
        .map(|decl| {
            let value = profile.get(&decl.name).ok_or_else(|| DemoError::MissingFeature(decl.name.clone()))?;
            if matches!(value, DemoValue::Text(s) if s.is_empty()) {
                return Err(DemoError::MissingFeature(decl.name.clone()));
            }
            Ok(decl.render(value))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedInstance {
    pub base: Instance,
    pub demo_tokens: Vec<String>,
    /// `demo_tokens ++ base.tokens`, with labels carried over.
    pub combined: Instance,
}

/// Places the rendered profile ahead of the word tokens. Sequence labels
/// keep aligning with the words only; classification labels are unchanged.
pub fn augment(inst: &Instance, schema: &DemographicSchema, profile: &DemographicProfile) -> Result<AugmentedInstance, DemoError> {
    let demo_tokens = encode_demographics(schema, profile)?;
    let mut combined = inst.clone();
    combined.tokens = demo_tokens.iter().cloned().chain(inst.tokens.iter().cloned()).collect();
    combined.prefix = inst.prefix + demo_tokens.len();
    Ok(AugmentedInstance { base: inst.clone(), demo_tokens, combined })
}

/// The model's suggestion for `inst` as seen by the annotator `profile`.
pub fn suggest_for_annotator(
    model: &MultiTaskModel,
    inst: &Instance,
    schema: &DemographicSchema,
    profile: &DemographicProfile,
) -> Result<BTreeMap<String, TaskSuggestion>, DemoError> {
    let aug = augment(inst, schema, profile)?;
    Ok(al::suggest(model, &aug.combined)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(pairs: &[(&str, DemoValue)]) -> DemographicProfile {
        pairs.iter().cloned().map(|(k, v)| (k.to_string(), v)).collect()
    }

    #[test]
    fn renders_name_value_tokens_in_declared_order() {
        let raw_age = DemographicSchema::new(vec![FeatureDecl::new("age", Binning::Raw)]);
        assert_eq!(encode_demographics(&raw_age, &profile(&[("age", 25.0.into())])).unwrap(), ["age=25"]);

        let two = DemographicSchema::new(vec![FeatureDecl::new("age", Binning::Raw), FeatureDecl::new("gender", Binning::Raw)]);
        let p = profile(&[("gender", "F".into()), ("age", 25.0.into())]);
        assert_eq!(encode_demographics(&two, &p).unwrap(), ["age=25", "gender=F"]);
    }

    #[test]
    fn missing_feature() {
        let err = encode_demographics(&DemographicSchema::age_only(), &DemographicProfile::new()).unwrap_err();
        assert_eq!(err, DemoError::MissingFeature("age".into()));
    }

    #[test]
    fn binning() {
        let decade = FeatureDecl::new("age", Binning::Decade);
        assert_eq!(decade.render(&25.0.into()), "age=20-29");
        assert_eq!(decade.render(&60.0.into()), "age=60-69");
        let edges = FeatureDecl::new("age", Binning::Edges(vec![18.0, 35.0, 50.0]));
        assert_eq!(edges.render(&10.0.into()), "age=<18");
        assert_eq!(edges.render(&40.0.into()), "age=35-50");
        assert_eq!(edges.render(&70.0.into()), "age=>=50");
    }

    #[test]
    fn augmentation_prepends_and_keeps_words() {
        let inst = Instance::new(0, vec!["good".into(), "food".into()]);
        let schema = DemographicSchema::new(vec![FeatureDecl::new("age", Binning::Raw)]);
        let aug = augment(&inst, &schema, &profile(&[("age", 25.0.into())])).unwrap();
        assert_eq!(aug.combined.tokens, ["age=25", "good", "food"]);
        assert_eq!(aug.combined.word_tokens(), inst.tokens.as_slice());
        assert_eq!(aug.combined.tokens.len(), aug.demo_tokens.len() + inst.tokens.len());
    }

    #[test]
    fn empty_schema_is_identity() {
        let inst = Instance::new(3, vec!["x".into()]);
        let aug = augment(&inst, &DemographicSchema::default(), &DemographicProfile::new()).unwrap();
        assert_eq!(aug.combined, inst);
    }

    #[test]
    fn distinct_ages_give_distinct_inputs() {
        let inst = Instance::new(0, vec!["fine".into()]);
        let s = DemographicSchema::age_only();
        let a = augment(&inst, &s, &profile(&[("age", 30.0.into())])).unwrap();
        let b = augment(&inst, &s, &profile(&[("age", 60.0.into())])).unwrap();
        assert_ne!(a.combined.tokens, b.combined.tokens);
    }
}
