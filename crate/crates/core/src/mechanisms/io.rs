//! JSON mechanism files.
//!
//! ```json
//! {"kind": "threshold", "thresholds": [{"element": "e1.1", "value": "1/2", "mode": "strict"}],
//!  "default": {"value": 0, "mode": "weak"}, "tie_order": ["e1.1", "e2.1"]}
//! {"kind": "single_proposal", "accept": [{"agent": 1, "outcomes": ["e1.1.2"]},
//!                                         {"agent": 2, "min_x": 2, "strict": false}]}
//! {"kind": "myerson", "phi": [{"element": "e1.1", "breakpoints": [[0, 0], [1, 1]]}]}
//! ```
//!
//! Elements missing from `thresholds` or `phi` fall back to `default`
//! (identity for `phi`).

use super::{
    AcceptClause, Mechanism, MyersonMechanism, MyersonTieRule, SingleProposalMechanism, ThresholdMechanism,
    ThresholdMode, ThresholdRule, TieOrder, VirtualValue,
};
use crate::error::{Error, Result};
use crate::model::Instance;
use crate::rational::{serde_rational, Rational};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RationalText(#[serde(with = "serde_rational")] pub Rational);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdEntry {
    pub element: String,
    #[serde(with = "serde_rational")]
    pub value: Rational,
    #[serde(default = "weak")]
    pub mode: ThresholdMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DefaultThreshold {
    #[serde(with = "serde_rational")]
    pub value: Rational,
    #[serde(default = "weak")]
    pub mode: ThresholdMode,
}

fn weak() -> ThresholdMode {
    ThresholdMode::Weak
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcceptEntry {
    /// One-based.
    pub agent: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<Vec<String>>,
    #[serde(default, with = "serde_rational::option", skip_serializing_if = "Option::is_none")]
    pub min_x: Option<Rational>,
    #[serde(default)]
    pub strict: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiEntry {
    pub element: String,
    pub breakpoints: Vec<(RationalText, RationalText)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MechanismFile {
    Threshold {
        #[serde(default)]
        thresholds: Vec<ThresholdEntry>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        default: Option<DefaultThreshold>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tie_order: Option<Vec<String>>,
    },
    SingleProposal {
        accept: Vec<AcceptEntry>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tie_order: Option<Vec<String>>,
    },
    Myerson {
        #[serde(default)]
        phi: Vec<PhiEntry>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tie_order: Option<Vec<String>>,
        #[serde(default)]
        tie_rule: MyersonTieRule,
    },
}

fn tie_for(instance: &Instance, ids: &Option<Vec<String>>) -> Result<TieOrder> {
    match ids {
        Some(ids) => TieOrder::from_ids(instance, ids),
        None => Ok(TieOrder::default_for(instance)),
    }
}

fn tie_ids(instance: &Instance, tie: &TieOrder) -> Option<Vec<String>> {
    (*tie != TieOrder::default_for(instance))
        .then(|| tie.order().iter().map(|&e| instance.element(e).id.clone()).collect())
}

impl MechanismFile {
    pub fn to_mechanism(&self, instance: &Instance) -> Result<Mechanism> {
        let n = instance.elements().len();
        match self {
            MechanismFile::Threshold { thresholds, default, tie_order } => {
                let mut rules: Vec<Option<ThresholdRule>> =
                    vec![default.as_ref().map(|d| ThresholdRule { value: d.value.clone(), mode: d.mode }); n];
                for t in thresholds {
                    rules[instance.element_index(&t.element)?] =
                        Some(ThresholdRule { value: t.value.clone(), mode: t.mode });
                }
                let rules = rules
                    .into_iter()
                    .enumerate()
                    .map(|(e, r)| {
                        r.ok_or_else(|| Error::Invalid(format!("no threshold for {}", instance.element(e).id)))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut m = ThresholdMechanism::new(instance, rules)?;
                m.tie = tie_for(instance, tie_order)?;
                Ok(Mechanism::Threshold(m))
            }
            MechanismFile::SingleProposal { accept, tie_order } => {
                let mut clauses = vec![Vec::new(); instance.k()];
                for entry in accept {
                    if entry.agent == 0 || entry.agent > instance.k() {
                        return Err(Error::Invalid(format!("agent {} outside 1..{}", entry.agent, instance.k())));
                    }
                    let agent = entry.agent - 1;
                    for id in entry.outcomes.iter().flatten() {
                        let (element, atom) = instance.outcome_index(id)?;
                        clauses[agent].push(AcceptClause::Outcome { element, atom });
                    }
                    if let Some(min_x) = &entry.min_x {
                        let element = entry.element.as_deref().map(|id| instance.element_index(id)).transpose()?;
                        clauses[agent].push(AcceptClause::Above {
                            element,
                            min_x: min_x.clone(),
                            strict: entry.strict,
                        });
                    }
                }
                let m = SingleProposalMechanism { accept: clauses, tie: tie_for(instance, tie_order)? };
                m.validate(instance)?;
                Ok(Mechanism::SingleProposal(m))
            }
            MechanismFile::Myerson { phi, tie_order, tie_rule } => {
                let mut funcs = vec![VirtualValue::identity(); n];
                for entry in phi {
                    let points = entry.breakpoints.iter().map(|(a, b)| (a.0.clone(), b.0.clone())).collect();
                    funcs[instance.element_index(&entry.element)?] = VirtualValue::new(points)?;
                }
                let mut m = MyersonMechanism::new(instance, funcs)?;
                m.tie = tie_for(instance, tie_order)?;
                m.tie_rule = *tie_rule;
                Ok(Mechanism::Myerson(m))
            }
        }
    }

    pub fn from_mechanism(mech: &Mechanism, instance: &Instance) -> Self {
        match mech {
            Mechanism::Threshold(m) => MechanismFile::Threshold {
                thresholds: m
                    .rules
                    .iter()
                    .enumerate()
                    .map(|(e, r)| ThresholdEntry {
                        element: instance.element(e).id.clone(),
                        value: r.value.clone(),
                        mode: r.mode,
                    })
                    .collect(),
                default: None,
                tie_order: tie_ids(instance, &m.tie),
            },
            Mechanism::SingleProposal(m) => MechanismFile::SingleProposal {
                accept: m
                    .accept
                    .iter()
                    .enumerate()
                    .flat_map(|(agent, clauses)| {
                        clauses.iter().map(move |c| match c {
                            AcceptClause::Outcome { element, atom } => AcceptEntry {
                                agent: agent + 1,
                                outcomes: Some(vec![instance.atoms(*element).expect("finite")[*atom]
                                    .outcome
                                    .id
                                    .clone()]),
                                min_x: None,
                                strict: false,
                                element: None,
                            },
                            AcceptClause::Above { element, min_x, strict } => AcceptEntry {
                                agent: agent + 1,
                                outcomes: None,
                                min_x: Some(min_x.clone()),
                                strict: *strict,
                                element: element.map(|e| instance.element(e).id.clone()),
                            },
                        })
                    })
                    .collect(),
                tie_order: tie_ids(instance, &m.tie),
            },
            Mechanism::Myerson(m) => MechanismFile::Myerson {
                phi: m
                    .phi
                    .iter()
                    .enumerate()
                    .map(|(e, f)| PhiEntry {
                        element: instance.element(e).id.clone(),
                        breakpoints: f
                            .points()
                            .iter()
                            .map(|(a, b)| (RationalText(a.clone()), RationalText(b.clone())))
                            .collect(),
                    })
                    .collect(),
                tie_order: tie_ids(instance, &m.tie),
                tie_rule: m.tie_rule,
            },
        }
    }
}

pub fn mechanism_from_json(text: &str, instance: &Instance) -> Result<Mechanism> {
    serde_json::from_str::<MechanismFile>(text)?.to_mechanism(instance)
}

pub fn mechanism_to_json(mech: &Mechanism, instance: &Instance) -> String {
    serde_json::to_string_pretty(&MechanismFile::from_mechanism(mech, instance)).expect("serializable")
}

pub fn read_mechanism(path: impl AsRef<Path>, instance: &Instance) -> Result<Mechanism> {
    mechanism_from_json(&crate::model::io::read_text(path)?, instance)
}
