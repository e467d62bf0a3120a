//! JSON documents for instances and mechanisms.
//!
//! Instances use the keys `V`, `S`, `d`, `R`, `t` and an optional item count
//! `k`. A mechanism document carries either a `matrix` (also accepted as `X`,
//! or as a bare array of rows) or a multi-item `policy`; any other keys, such
//! as the summary written next to a solved mechanism, are ignored.

use serde::{Deserialize, Serialize};

use crate::model::{validate_instance, Instance, Mechanism, MultiInstance, MultiPolicy};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(rename = "V")]
    pub values: Vec<f64>,
    #[serde(rename = "S")]
    pub scores: Vec<f64>,
    #[serde(rename = "d")]
    pub prior: Vec<f64>,
    #[serde(rename = "R")]
    pub score_model: Vec<Vec<f64>>,
    #[serde(rename = "t")]
    pub bar: f64,
    #[serde(rename = "k", default, skip_serializing_if = "Option::is_none")]
    pub item_count: Option<usize>,
}

impl InstanceFile {
    pub fn from_instance(instance: &Instance, item_count: Option<usize>) -> Self {
        Self {
            values: instance.values().to_vec(),
            scores: instance.scores().to_vec(),
            prior: instance.prior().to_vec(),
            score_model: instance
                .score_model()
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect(),
            bar: instance.bar(),
            item_count,
        }
    }

    /// Validates the arrays; `k` defaults to one.
    pub fn into_multi(self) -> Result<MultiInstance> {
        let k = self.item_count.unwrap_or(1);
        let base = validate_instance(
            &self.values,
            &self.scores,
            &self.prior,
            &self.score_model,
            self.bar,
        )?;
        MultiInstance::new(base, k)
    }
}

pub fn parse_instance(json: &str) -> Result<MultiInstance> {
    let file: InstanceFile = serde_json::from_str(json).map_err(|e| Error::Parse(e.to_string()))?;
    file.into_multi()
}

pub fn instance_to_json(instance: &Instance, item_count: Option<usize>) -> String {
    serde_json::to_string_pretty(&InstanceFile::from_instance(instance, item_count))
        .expect("instance serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    #[serde(default)]
    pub label: String,
    #[serde(alias = "X")]
    pub matrix: Vec<Vec<f64>>,
}

impl From<&Mechanism> for MatrixFile {
    fn from(m: &Mechanism) -> Self {
        Self {
            label: m.label().to_string(),
            matrix: m.to_rows(),
        }
    }
}

/// A parsed mechanism document.
#[derive(Debug, Clone, PartialEq)]
pub enum MechanismDocument {
    Single(Mechanism),
    Multi(MultiPolicy),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawDocument {
    Rows(Vec<Vec<f64>>),
    Matrix(MatrixFile),
    Policy { policy: MultiPolicy },
}

pub fn parse_mechanism(json: &str) -> Result<MechanismDocument> {
    let raw: RawDocument = serde_json::from_str(json).map_err(|e| {
        Error::Parse(format!(
            "expected a matrix, an object with \"matrix\"/\"X\", or an object with \"policy\" ({e})"
        ))
    })?;
    Ok(match raw {
        RawDocument::Rows(rows) => MechanismDocument::Single(Mechanism::from_rows(&rows, "")?),
        RawDocument::Matrix(f) => {
            MechanismDocument::Single(Mechanism::from_rows(&f.matrix, f.label)?)
        }
        RawDocument::Policy { policy } => {
            // Deserialization skips the constructor's checks.
            MechanismDocument::Multi(MultiPolicy::new(policy.space(), policy.tensors)?)
        }
    })
}
