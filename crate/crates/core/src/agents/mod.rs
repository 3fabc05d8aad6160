//! Agent behavior under single-proposal mechanisms: adversarial proposal
//! rules, strategic best responses, pure equilibrium search, and the
//! analogous-instance construction that turns adversarial agents into
//! strategic ones.

mod adversarial;
mod analogous;
pub(crate) mod bids;
mod strategic;

pub use adversarial::{
    adversarial_profile, adversarial_propose, constrained_fixpoint, AdversarialMode, ConstrainedOutcome,
};
pub use analogous::{analogous_adversarial, build_analogous_strategic};
pub use bids::win_probability;
pub use strategic::{
    best_response, find_principal_best_equilibrium, pure_equilibria, Equilibrium, DEFAULT_EQUILIBRIUM_CAP,
};

use crate::error::{Error, Result};
use crate::mechanisms::{Action, ProposalRule};
use crate::model::{mixed_radix_index, Draw, Instance, TypeProfile, Value};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// How one agent maps its realized type to an action.
#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    /// Action per own type; types are indexed mixed-radix over the agent's
    /// elements, first element most significant.
    Table(Vec<Action>),
    /// Propose the acceptable observed outcome with the least x.
    Pessimistic,
    /// Propose the acceptable observed outcome with the greatest x; under a
    /// Myerson-type mechanism, report every outcome truthfully.
    Truthful,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    pub strategies: Vec<Strategy>,
}

impl StrategyProfile {
    pub fn uniform(k: usize, s: Strategy) -> Self {
        StrategyProfile { strategies: vec![s; k] }
    }

    pub fn is_truthful(&self) -> bool {
        self.strategies.iter().all(|s| *s == Strategy::Truthful)
    }

    /// The actions every agent takes at a joint type.
    pub fn actions(&self, instance: &Instance, mech: &dyn ProposalRule, truth: &TypeProfile) -> Result<Vec<Action>> {
        (0..instance.k()).map(|a| self.strategies[a].act(instance, mech, a, truth)).collect()
    }

    /// Replaces rule-based strategies by explicit tables (finite instances).
    pub fn materialize(&self, instance: &Instance, mech: &dyn ProposalRule, cap: u64) -> Result<Self> {
        let strategies = (0..instance.k())
            .map(|a| match &self.strategies[a] {
                Strategy::Table(t) => Ok(Strategy::Table(t.clone())),
                s => {
                    let types = instance.agent_types(a, cap)?;
                    let own = instance.agent_elements(a);
                    let table = types
                        .iter()
                        .map(|(atoms, _)| {
                            let draws: Vec<Draw> = atoms.iter().map(|&x| Draw::Atom(x)).collect();
                            rule_action(instance, mech, own, &draws, s == &Strategy::Pessimistic)
                        })
                        .collect();
                    Ok(Strategy::Table(table))
                }
            })
            .collect::<Result<_>>()?;
        Ok(StrategyProfile { strategies })
    }
}

impl Strategy {
    pub fn act(
        &self,
        instance: &Instance,
        mech: &dyn ProposalRule,
        agent: usize,
        truth: &TypeProfile,
    ) -> Result<Action> {
        let own = instance.agent_elements(agent);
        let draws: Vec<Draw> = own.iter().map(|&e| truth.draws[e]).collect();
        match self {
            Strategy::Pessimistic => Ok(rule_action(instance, mech, own, &draws, true)),
            Strategy::Truthful => Ok(rule_action(instance, mech, own, &draws, false)),
            Strategy::Table(table) => {
                let idx = own_type_index(instance, agent, &draws)?;
                table
                    .get(idx)
                    .copied()
                    .ok_or_else(|| Error::Invalid(format!("strategy table of agent {} is too short", agent + 1)))
            }
        }
    }
}

/// Index of an agent's type in its strategy table.
pub fn own_type_index(instance: &Instance, agent: usize, draws: &[Draw]) -> Result<usize> {
    let radix = instance.agent_radix(agent)?;
    let digits = draws
        .iter()
        .map(|d| match d {
            Draw::Atom(a) => Ok(*a),
            Draw::Value(_) => Err(Error::NotFinite { element: "strategy table over an atomless element".into() }),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mixed_radix_index(&digits, &radix))
}

/// Lowest-x (pessimistic) or highest-x acceptable truthful proposal among
/// observed outcomes. Pessimistic ties go to the earlier element; optimistic
/// ties follow the mechanism's tie order.
fn rule_action(
    instance: &Instance,
    mech: &dyn ProposalRule,
    own: &[usize],
    draws: &[Draw],
    pessimistic: bool,
) -> Action {
    let mut best: Option<(Value, usize, usize, Draw)> = None;
    for (&e, d) in own.iter().zip(draws) {
        if !mech.accepts(instance, e, d) {
            continue;
        }
        let x = instance.draw_value(e, d);
        let rank = if pessimistic { e } else { mech.tie_order().rank(e) };
        let better = match &best {
            None => true,
            Some((bx, br, ..)) => {
                let ord = x.partial_cmp(bx).unwrap_or(Ordering::Equal);
                let ord = if pessimistic { ord.reverse() } else { ord };
                ord == Ordering::Greater || (ord == Ordering::Equal && rank < *br)
            }
        };
        if better {
            best = Some((x, rank, e, *d));
        }
    }
    match best {
        Some((_, _, element, claim)) => Action::Propose { element, claim },
        None => Action::Abstain,
    }
}

/// JSON form of a strategy profile: per agent either a rule name or the
/// list of (type as outcome ids → proposed element id or "abstain").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileFile {
    pub agents: Vec<AgentStrategyFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStrategyFile {
    /// One-based.
    pub agent: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub table: Vec<TypeEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeEntry {
    #[serde(rename = "type")]
    pub observed: Vec<String>,
    pub proposal: String,
}

impl ProfileFile {
    pub fn from_profile(profile: &StrategyProfile, instance: &Instance, cap: u64) -> Result<Self> {
        let agents = profile
            .strategies
            .iter()
            .enumerate()
            .map(|(a, s)| {
                Ok(match s {
                    Strategy::Pessimistic => {
                        AgentStrategyFile { agent: a + 1, rule: Some("pessimistic".into()), table: vec![] }
                    }
                    Strategy::Truthful => {
                        AgentStrategyFile { agent: a + 1, rule: Some("truthful".into()), table: vec![] }
                    }
                    Strategy::Table(t) => {
                        let own = instance.agent_elements(a);
                        let types = instance.agent_types(a, cap)?;
                        let table = types
                            .iter()
                            .zip(t)
                            .map(|((atoms, _), act)| {
                                let observed = own
                                    .iter()
                                    .zip(atoms)
                                    .map(|(&e, &x)| instance.atoms(e).map(|at| at[x].outcome.id.clone()))
                                    .collect::<Result<Vec<_>>>()?;
                                let proposal = match act {
                                    Action::Abstain => "abstain".to_string(),
                                    Action::Propose { element, claim } => {
                                        let own_idx = own.iter().position(|e| e == element);
                                        match (own_idx, claim) {
                                            (Some(i), Draw::Atom(c)) if *c == atoms[i] => {
                                                instance.element(*element).id.clone()
                                            }
                                            (_, Draw::Atom(c)) => instance.atoms(*element)?[*c].outcome.id.clone(),
                                            _ => instance.element(*element).id.clone(),
                                        }
                                    }
                                };
                                Ok(TypeEntry { observed, proposal })
                            })
                            .collect::<Result<Vec<_>>>()?;
                        AgentStrategyFile { agent: a + 1, rule: None, table }
                    }
                })
            })
            .collect::<Result<_>>()?;
        Ok(ProfileFile { agents })
    }

    /// Resolves ids against `instance`. Agents missing from the file and
    /// unlisted types abstain.
    pub fn to_profile(&self, instance: &Instance) -> Result<StrategyProfile> {
        let mut strategies = vec![Strategy::Table(Vec::new()); instance.k()];
        let mut seen = vec![false; instance.k()];
        for entry in &self.agents {
            let a = entry
                .agent
                .checked_sub(1)
                .filter(|&a| a < instance.k())
                .ok_or_else(|| Error::Domain(format!("agent {} outside 1..{}", entry.agent, instance.k())))?;
            if std::mem::replace(&mut seen[a], true) {
                return Err(Error::Invalid(format!("agent {} listed twice", entry.agent)));
            }
            strategies[a] = match entry.rule.as_deref() {
                Some("pessimistic") => Strategy::Pessimistic,
                Some("truthful") => Strategy::Truthful,
                Some(other) => return Err(Error::Parse(format!("unknown strategy rule `{other}`"))),
                None => Strategy::Table(Self::table(instance, a, &entry.table)?),
            };
        }
        for (a, s) in strategies.iter_mut().enumerate() {
            if let Strategy::Table(t) = s {
                let n: usize = instance.agent_radix(a)?.iter().product();
                t.resize(n, Action::Abstain);
            }
        }
        Ok(StrategyProfile { strategies })
    }

    fn table(instance: &Instance, agent: usize, entries: &[TypeEntry]) -> Result<Vec<Action>> {
        let own = instance.agent_elements(agent);
        let n: usize = instance.agent_radix(agent)?.iter().product();
        let mut table = vec![Action::Abstain; n];
        for entry in entries {
            if entry.observed.len() != own.len() {
                return Err(Error::Invalid(format!("type of agent {} must list {} outcomes", agent + 1, own.len())));
            }
            let mut draws = Vec::with_capacity(own.len());
            for (id, &e) in entry.observed.iter().zip(own) {
                let (el, atom) = instance.outcome_index(id)?;
                if el != e {
                    return Err(Error::UnknownElement(format!("{id} is not an outcome of {}", instance.element(e).id)));
                }
                draws.push(Draw::Atom(atom));
            }
            let action = if entry.proposal == "abstain" {
                Action::Abstain
            } else if let Some(i) = own.iter().position(|&e| instance.element(e).id == entry.proposal) {
                Action::Propose { element: own[i], claim: draws[i] }
            } else {
                let (element, atom) = instance.outcome_index(&entry.proposal)?;
                if !own.contains(&element) {
                    return Err(Error::UnknownElement(format!(
                        "{} is not owned by agent {}",
                        entry.proposal,
                        agent + 1
                    )));
                }
                Action::Propose { element, claim: Draw::Atom(atom) }
            };
            table[own_type_index(instance, agent, &draws)?] = action;
        }
        Ok(table)
    }
}
