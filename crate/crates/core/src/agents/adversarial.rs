use super::bids::{bid_of, win_given, AgentBids};
use super::{Strategy, StrategyProfile};
use crate::error::{Error, Result};
use crate::mechanisms::{Action, ProposalRule};
use crate::model::{Draw, Flavor, Instance, TypeProfile};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversarialMode {
    /// Least acceptable observed outcome, regardless of winning chances.
    #[default]
    Pessimistic,
    /// Least acceptable observed outcome that still wins with positive probability.
    Constrained,
}

/// Result of the constrained escalation fixpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedOutcome {
    pub profile: StrategyProfile,
    /// (agent, own-type index) pairs whose every acceptable proposal has zero
    /// win probability; these abstain.
    pub zero_win_types: Vec<(usize, usize)>,
    pub escalations: usize,
}

fn require_adversarial(instance: &Instance) -> Result<()> {
    match instance.flavor() {
        Flavor::Adversarial => Ok(()),
        Flavor::Strategic => Err(Error::WrongFlavor { expected: "adversarial" }),
    }
}

/// Profile in which every agent behaves adversarially.
pub fn adversarial_profile(
    instance: &Instance,
    mech: &dyn ProposalRule,
    mode: AdversarialMode,
    cap: u64,
) -> Result<StrategyProfile> {
    require_adversarial(instance)?;
    match mode {
        AdversarialMode::Pessimistic => Ok(StrategyProfile::uniform(instance.k(), Strategy::Pessimistic)),
        AdversarialMode::Constrained => Ok(constrained_fixpoint(instance, mech, cap)?.profile),
    }
}

/// One agent's adversarial action at its realized type (draws of its own
/// elements, in element order).
pub fn adversarial_propose(
    instance: &Instance,
    mech: &dyn ProposalRule,
    agent: usize,
    own: &[Draw],
    mode: AdversarialMode,
    cap: u64,
) -> Result<Action> {
    let profile = adversarial_profile(instance, mech, mode, cap)?;
    let mut truth = TypeProfile { draws: vec![Draw::Atom(0); instance.elements().len()] };
    if own.len() != instance.agent_elements(agent).len() {
        return Err(Error::IncompleteReport);
    }
    for (&e, d) in instance.agent_elements(agent).iter().zip(own) {
        truth.draws[e] = *d;
    }
    profile.strategies[agent].act(instance, mech, agent, &truth)
}

/// Acceptable truthful options of one own type in ascending order, with the type's probability.
type TypeOptions = (Vec<(Action, super::bids::Bid)>, crate::rational::Rational);

/// Starts from the pessimistic profile and repeatedly moves every proposal
/// that cannot win to the next acceptable observed outcome (ascending x,
/// then element order) that can, until nothing changes. Others' bids only
/// rise, so win probabilities only fall and the loop terminates.
pub fn constrained_fixpoint(instance: &Instance, mech: &dyn ProposalRule, cap: u64) -> Result<ConstrainedOutcome> {
    require_adversarial(instance)?;
    let k = instance.k();
    let n = instance.elements().len();
    // per agent, per type: acceptable truthful options ascending, plus the current choice
    let mut options: Vec<Vec<TypeOptions>> = Vec::with_capacity(k);
    for a in 0..k {
        let own = instance.agent_elements(a);
        let mut per_type = Vec::new();
        for (atoms, p) in instance.agent_types(a, cap)? {
            let mut truth = TypeProfile { draws: vec![Draw::Atom(0); n] };
            for (&e, &x) in own.iter().zip(&atoms) {
                truth.draws[e] = Draw::Atom(x);
            }
            let mut opts: Vec<(Action, super::bids::Bid, usize)> = own
                .iter()
                .zip(&atoms)
                .filter_map(|(&e, &x)| {
                    let act = Action::Propose { element: e, claim: Draw::Atom(x) };
                    bid_of(instance, mech, &act, &truth).map(|b| (act, b, e))
                })
                .collect();
            opts.sort_by(|a, b| a.1.key.x.cmp(&b.1.key.x).then(a.2.cmp(&b.2)));
            per_type.push((opts.into_iter().map(|(a, b, _)| (a, b)).collect(), p));
        }
        options.push(per_type);
    }
    // choice[a][t] = index into options, or None for abstain
    let mut choice: Vec<Vec<Option<usize>>> =
        options.iter().map(|ts| ts.iter().map(|(o, _)| (!o.is_empty()).then_some(0)).collect()).collect();
    let mut escalations = 0;
    loop {
        let bids: Vec<AgentBids> = (0..k)
            .map(|a| {
                AgentBids::new(
                    options[a]
                        .iter()
                        .zip(&choice[a])
                        .map(|((o, p), c)| (c.map(|i| o[i].1.clone()), p.clone()))
                        .collect(),
                )
            })
            .collect();
        let mut changed = false;
        for a in 0..k {
            for (t, (opts, _)) in options[a].iter().enumerate() {
                let Some(cur) = choice[a][t] else { continue };
                if !win_given(&bids, a, &opts[cur].1.key).is_zero() {
                    continue;
                }
                let next = (cur + 1..opts.len()).find(|&i| !win_given(&bids, a, &opts[i].1.key).is_zero());
                choice[a][t] = next;
                escalations += 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut zero_win_types = Vec::new();
    let strategies = (0..k)
        .map(|a| {
            Strategy::Table(
                options[a]
                    .iter()
                    .zip(&choice[a])
                    .enumerate()
                    .map(|(t, ((o, _), c))| match c {
                        Some(i) => o[*i].0,
                        None => {
                            if !o.is_empty() {
                                zero_win_types.push((a, t));
                            }
                            Action::Abstain
                        }
                    })
                    .collect(),
            )
        })
        .collect();
    Ok(ConstrainedOutcome { profile: StrategyProfile { strategies }, zero_win_types, escalations })
}
