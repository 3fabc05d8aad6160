//! JSON instance files.
//!
//! ```json
//! {"k": 2, "flavor": "adversarial", "assignment_mode": "fixed",
//!  "elements": [
//!    {"owner": 1, "distribution": [{"x": 1, "p_num": 1, "p_den": 2}, {"x": 3, "p_num": 1, "p_den": 2}]},
//!    {"owner": 2, "distribution": {"kind": "uniform", "params": {"lo": 0, "hi": 1}}}]}
//! ```
//!
//! Owners are one-based. Probabilities are numerator/denominator pairs.

use super::{AssignmentMode, Atom, Element, Flavor, Instance, Outcome, OutcomeDistribution};
use crate::error::{Error, Result};
use crate::rational::{serde_rational, Rational};
use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub k: usize,
    pub flavor: Flavor,
    #[serde(default)]
    pub assignment_mode: AssignmentMode,
    pub elements: Vec<ElementFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElementFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner: Option<usize>,
    pub distribution: DistributionFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistributionFile {
    Finite(Vec<AtomFile>),
    Atomless(AtomlessFile),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(with = "serde_rational")]
    pub x: Rational,
    #[serde(default, with = "serde_rational::option", skip_serializing_if = "Option::is_none")]
    pub y: Option<Rational>,
    #[serde(with = "bigint_text")]
    pub p_num: BigInt,
    #[serde(with = "bigint_text")]
    pub p_den: BigInt,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum AtomlessFile {
    Uniform { lo: f64, hi: f64 },
    Exponential { rate: f64 },
    PiecewiseLinear { points: Vec<(f64, f64)> },
}

/// Big integers as JSON numbers when they fit, strings otherwise.
pub(crate) mod bigint_text {
    use num_bigint::BigInt;
    use num_traits::ToPrimitive;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        match v.to_i64() {
            Some(i) => s.serialize_i64(i),
            None => s.serialize_str(&v.to_string()),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(i) => Ok(BigInt::from(i)),
            Repr::Text(t) => t.trim().parse().map_err(de::Error::custom),
        }
    }
}

impl DistributionFile {
    pub fn to_distribution(&self) -> Result<OutcomeDistribution> {
        Ok(match self {
            DistributionFile::Finite(atoms) => OutcomeDistribution::Finite(
                atoms
                    .iter()
                    .map(|a| {
                        let p = crate::rational::from_pair(&a.p_num, &a.p_den)
                            .ok_or_else(|| Error::Parse("zero probability denominator".into()))?;
                        Ok(Atom {
                            outcome: Outcome { id: a.id.clone().unwrap_or_default(), x: a.x.clone(), y: a.y.clone() },
                            p,
                        })
                    })
                    .collect::<Result<_>>()?,
            ),
            DistributionFile::Atomless(AtomlessFile::Uniform { lo, hi }) => {
                OutcomeDistribution::Uniform { lo: *lo, hi: *hi }
            }
            DistributionFile::Atomless(AtomlessFile::Exponential { rate }) => {
                OutcomeDistribution::Exponential { rate: *rate }
            }
            DistributionFile::Atomless(AtomlessFile::PiecewiseLinear { points }) => {
                OutcomeDistribution::PiecewiseLinear { points: points.clone() }
            }
        })
    }

    pub fn from_distribution(d: &OutcomeDistribution) -> Self {
        match d {
            OutcomeDistribution::Finite(atoms) => DistributionFile::Finite(
                atoms
                    .iter()
                    .map(|a| AtomFile {
                        id: Some(a.outcome.id.clone()).filter(|s| !s.is_empty()),
                        x: a.outcome.x.clone(),
                        y: a.outcome.y.clone(),
                        p_num: a.p.numer().clone(),
                        p_den: a.p.denom().clone(),
                    })
                    .collect(),
            ),
            OutcomeDistribution::Uniform { lo, hi } => {
                DistributionFile::Atomless(AtomlessFile::Uniform { lo: *lo, hi: *hi })
            }
            OutcomeDistribution::Exponential { rate } => {
                DistributionFile::Atomless(AtomlessFile::Exponential { rate: *rate })
            }
            OutcomeDistribution::PiecewiseLinear { points } => {
                DistributionFile::Atomless(AtomlessFile::PiecewiseLinear { points: points.clone() })
            }
        }
    }
}

impl InstanceFile {
    pub fn to_instance(&self) -> Result<Instance> {
        let elements = self
            .elements
            .iter()
            .map(|e| {
                let owner = match e.owner {
                    Some(0) => return Err(Error::Parse("owners are one-based".into())),
                    Some(o) => Some(o - 1),
                    None => None,
                };
                Ok(Element {
                    id: e.id.clone().unwrap_or_default(),
                    owner,
                    distribution: e.distribution.to_distribution()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Instance::new(self.k, self.flavor, self.assignment_mode, elements))
    }

    pub fn from_instance(instance: &Instance) -> Self {
        InstanceFile {
            k: instance.k(),
            flavor: instance.flavor(),
            assignment_mode: instance.assignment(),
            elements: instance
                .elements()
                .iter()
                .map(|e| ElementFile {
                    id: Some(e.id.clone()),
                    owner: e.owner.map(|o| o + 1),
                    distribution: DistributionFile::from_distribution(&e.distribution),
                })
                .collect(),
        }
    }
}

pub fn instance_from_json(text: &str) -> Result<Instance> {
    serde_json::from_str::<InstanceFile>(text)?.to_instance()
}

pub fn instance_to_json(instance: &Instance) -> String {
    serde_json::to_string_pretty(&InstanceFile::from_instance(instance)).expect("serializable")
}

/// File contents; errors name the path.
pub fn read_text(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    std::fs::read_to_string(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    instance_from_json(&read_text(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_instance;
    use crate::rational::{int, ratio};

    const SAMPLE: &str = r#"{
        "k": 2, "flavor": "strategic", "assignment_mode": "fixed",
        "elements": [
            {"owner": 1, "distribution": [{"x": 1, "y": "1/4", "p_num": 1, "p_den": 2},
                                          {"x": 3, "y": 0.5, "p_num": 1, "p_den": 2}]},
            {"owner": 2, "distribution": [{"x": 1, "y": "1/4", "p_num": 1, "p_den": 2},
                                          {"x": 3, "y": 0.5, "p_num": 1, "p_den": 2}]}
        ]}"#;

    #[test]
    fn parses_sample_file() {
        let inst = instance_from_json(SAMPLE).unwrap();
        assert!(validate_instance(&inst).is_empty());
        assert_eq!(inst.k(), 2);
        assert_eq!(inst.atoms(1).unwrap()[1].outcome.y, Some(ratio(1, 2)));
        assert_eq!(inst.atoms(0).unwrap()[1].outcome.x, int(3));
        assert_eq!(inst.owner(1), Some(1));
    }

    #[test]
    fn parses_atomless_laws() {
        let text = r#"{"k": 1, "flavor": "adversarial", "elements": [
            {"owner": 1, "distribution": {"kind": "uniform", "params": {"lo": 0, "hi": 1}}},
            {"owner": 1, "distribution": {"kind": "exponential", "params": {"rate": 2.5}}},
            {"owner": 1, "distribution": {"kind": "piecewise_linear", "params": {"points": [[0, 0], [2, 1]]}}}]}"#;
        let inst = instance_from_json(text).unwrap();
        assert!(inst.is_atomless());
        assert!(validate_instance(&inst).is_empty());
    }

    #[test]
    fn json_round_trip_preserves_instance() {
        let inst = instance_from_json(SAMPLE).unwrap();
        let again = instance_from_json(&instance_to_json(&inst)).unwrap();
        assert_eq!(inst, again);
    }

    #[test]
    fn zero_owner_is_rejected() {
        let text = r#"{"k": 1, "flavor": "adversarial", "elements": [
            {"owner": 0, "distribution": [{"x": 1, "p_num": 1, "p_den": 1}]}]}"#;
        assert!(matches!(instance_from_json(text), Err(Error::Parse(_))));
    }
}
