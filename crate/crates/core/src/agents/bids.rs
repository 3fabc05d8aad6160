//! Exact evaluation through per-agent bid distributions.
//!
//! Under a single-proposal mechanism an agent's effect on the allocation is
//! its acceptable bid: the claimed x and the proposed element's tie rank.
//! Agents are independent, so win probabilities and expectations factor
//! into products of per-agent "bid below β" probabilities.

use super::{Strategy, StrategyProfile};
use crate::error::Result;
use crate::mechanisms::{Action, ProposalRule};
use crate::model::{Draw, Instance, TypeProfile, Value};
use crate::rational::Rational;
use num_traits::{One, Zero};
use std::cmp::{Ordering, Reverse};

/// Ordered so that the winning bid is the greatest.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct BidKey {
    pub x: Rational,
    pub rank: Reverse<usize>,
}

/// An acceptable bid together with what it pays the principal if it wins
/// (zero for a lie).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Bid {
    pub key: BidKey,
    pub payoff: Rational,
}

/// Resolves an action at a known type into its bid, if any.
pub(crate) fn bid_of(
    instance: &Instance,
    mech: &dyn ProposalRule,
    action: &Action,
    truth: &TypeProfile,
) -> Option<Bid> {
    let Action::Propose { element, claim } = action else { return None };
    if !mech.accepts(instance, *element, claim) {
        return None;
    }
    let Value::Exact(x) = instance.draw_value(*element, claim) else { return None };
    let payoff = if truth.draws[*element] == *claim { x.clone() } else { Rational::zero() };
    Some(Bid { key: BidKey { x, rank: Reverse(mech.tie_order().rank(*element)) }, payoff })
}

/// Law of one agent's bid.
#[derive(Debug, Clone)]
pub(crate) struct AgentBids {
    keys: Vec<BidKey>,
    /// Σ probability · payoff per key.
    weight: Vec<Rational>,
    /// below[i] = Pr[bid < keys[i]] (no bid counts as lowest).
    below: Vec<Rational>,
}

impl AgentBids {
    pub fn new(mut items: Vec<(Option<Bid>, Rational)>) -> Self {
        let mut none = Rational::zero();
        items.retain(|(b, p)| {
            if b.is_none() {
                none += p;
            }
            b.is_some()
        });
        let mut flat: Vec<(Bid, Rational)> = items.into_iter().map(|(b, p)| (b.expect("retained"), p)).collect();
        flat.sort_by(|a, b| a.0.key.cmp(&b.0.key));
        let mut keys: Vec<BidKey> = Vec::new();
        let mut prob: Vec<Rational> = Vec::new();
        let mut weight: Vec<Rational> = Vec::new();
        for (bid, p) in flat {
            if keys.last() != Some(&bid.key) {
                keys.push(bid.key.clone());
                prob.push(Rational::zero());
                weight.push(Rational::zero());
            }
            let i = keys.len() - 1;
            weight[i] += &p * &bid.payoff;
            prob[i] += p;
        }
        let mut below = Vec::with_capacity(keys.len());
        let mut acc = none;
        for p in &prob {
            below.push(acc.clone());
            acc += p;
        }
        AgentBids { keys, weight, below }
    }

    /// Never bids.
    pub fn silent() -> Self {
        AgentBids { keys: vec![], weight: vec![], below: vec![] }
    }

    pub fn below(&self, key: &BidKey) -> Rational {
        let i = self.keys.partition_point(|k| k < key);
        self.below.get(i).cloned().unwrap_or_else(Rational::one)
    }
}

/// Per-own-type bids of an agent under its strategy.
pub(crate) fn type_bids(
    instance: &Instance,
    mech: &dyn ProposalRule,
    agent: usize,
    strategy: &Strategy,
    cap: u64,
) -> Result<Vec<(Option<Bid>, Rational)>> {
    let own = instance.agent_elements(agent);
    let types = instance.agent_types(agent, cap)?;
    let mut truth = TypeProfile { draws: vec![Draw::Atom(0); instance.elements().len()] };
    types
        .into_iter()
        .map(|(atoms, p)| {
            for (&e, &a) in own.iter().zip(&atoms) {
                truth.draws[e] = Draw::Atom(a);
            }
            let act = strategy.act(instance, mech, agent, &truth)?;
            Ok((bid_of(instance, mech, &act, &truth), p))
        })
        .collect()
}

pub(crate) fn profile_bids(
    instance: &Instance,
    mech: &dyn ProposalRule,
    profile: &StrategyProfile,
    cap: u64,
) -> Result<Vec<AgentBids>> {
    (0..instance.k()).map(|a| Ok(AgentBids::new(type_bids(instance, mech, a, &profile.strategies[a], cap)?))).collect()
}

/// Pr[every agent other than `agent` bids below `key`].
pub(crate) fn win_given(bids: &[AgentBids], agent: usize, key: &BidKey) -> Rational {
    bids.iter().enumerate().filter(|&(l, _)| l != agent).fold(Rational::one(), |acc, (_, b)| acc * b.below(key))
}

/// Expected principal utility when every agent bids independently.
pub(crate) fn expected_principal(bids: &[AgentBids]) -> Rational {
    let mut total = Rational::zero();
    for (l, b) in bids.iter().enumerate() {
        for (key, w) in b.keys.iter().zip(&b.weight) {
            if !w.is_zero() {
                total += w * win_given(bids, l, key);
            }
        }
    }
    total
}

/// Expected principal utility given that `agent` bids `own` (or nothing)
/// while the others follow their laws.
pub(crate) fn principal_given(bids: &[AgentBids], agent: usize, own: Option<&Bid>) -> Rational {
    let mut total = match own {
        Some(bid) if !bid.payoff.is_zero() => &bid.payoff * win_given(bids, agent, &bid.key),
        _ => Rational::zero(),
    };
    for (l, b) in bids.iter().enumerate() {
        if l == agent {
            continue;
        }
        for (key, w) in b.keys.iter().zip(&b.weight) {
            if w.is_zero() || own.is_some_and(|o| o.key.cmp(key) == Ordering::Greater) {
                continue;
            }
            let others = bids
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != l && m != agent)
                .fold(Rational::one(), |acc, (_, c)| acc * c.below(key));
            total += w * others;
        }
    }
    total
}

/// Probability over the other agents' types that `action` by `agent` is
/// the selected proposal, holding the other strategies fixed.
pub fn win_probability(
    instance: &Instance,
    mech: &dyn ProposalRule,
    profile: &StrategyProfile,
    agent: usize,
    own_atoms: &[usize],
    action: &Action,
    cap: u64,
) -> Result<Rational> {
    let mut truth = TypeProfile { draws: vec![Draw::Atom(0); instance.elements().len()] };
    for (&e, &a) in instance.agent_elements(agent).iter().zip(own_atoms) {
        truth.draws[e] = Draw::Atom(a);
    }
    if let Action::Propose { element, claim } = action {
        crate::mechanisms::acceptable(mech, instance, agent, *element, claim)?;
    }
    let Some(bid) = bid_of(instance, mech, action, &truth) else { return Ok(Rational::zero()) };
    let mut bids = Vec::with_capacity(instance.k());
    for l in 0..instance.k() {
        bids.push(if l == agent {
            AgentBids::silent()
        } else {
            AgentBids::new(type_bids(instance, mech, l, &profile.strategies[l], cap)?)
        });
    }
    Ok(win_given(&bids, agent, &bid.key))
}
