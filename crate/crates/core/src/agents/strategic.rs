use super::bids::{bid_of, expected_principal, principal_given, win_given, AgentBids, Bid};
use super::{Strategy, StrategyProfile};
use crate::error::{Error, Result};
use crate::mechanisms::{Action, ProposalRule};
use crate::model::{Draw, Flavor, Instance, TypeProfile};
use crate::rational::Rational;
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

/// Default bound on enumerated strategy profiles.
pub const DEFAULT_EQUILIBRIUM_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub profile: StrategyProfile,
    pub expected_principal: Rational,
}

struct Candidate {
    action: Action,
    bid: Option<Bid>,
    y: Rational,
}

/// Per type: the undominated actions (acceptable truthful proposals in
/// element order, then abstention) and the type's probability.
struct AgentSpace {
    types: Vec<(Vec<Candidate>, Rational)>,
}

impl AgentSpace {
    fn build(instance: &Instance, mech: &dyn ProposalRule, agent: usize, cap: u64) -> Result<Self> {
        let own = instance.agent_elements(agent);
        let n = instance.elements().len();
        let types = instance
            .agent_types(agent, cap)?
            .into_iter()
            .map(|(atoms, p)| {
                let mut truth = TypeProfile { draws: vec![Draw::Atom(0); n] };
                for (&e, &a) in own.iter().zip(&atoms) {
                    truth.draws[e] = Draw::Atom(a);
                }
                let mut cands: Vec<Candidate> = own
                    .iter()
                    .zip(&atoms)
                    .filter_map(|(&e, &a)| {
                        let action = Action::Propose { element: e, claim: Draw::Atom(a) };
                        let bid = bid_of(instance, mech, &action, &truth)?;
                        let y = instance.draw_y(e, &Draw::Atom(a)).unwrap_or_else(Rational::zero);
                        Some(Candidate { action, bid: Some(bid), y })
                    })
                    .collect();
                cands.push(Candidate { action: Action::Abstain, bid: None, y: Rational::zero() });
                (cands, p)
            })
            .collect();
        Ok(AgentSpace { types })
    }

    fn radix(&self) -> Vec<usize> {
        self.types.iter().map(|(c, _)| c.len()).collect()
    }

    fn bids(&self, choice: &[usize]) -> AgentBids {
        AgentBids::new(self.types.iter().zip(choice).map(|((c, p), &i)| (c[i].bid.clone(), p.clone())).collect())
    }

    fn table(&self, choice: &[usize]) -> Strategy {
        Strategy::Table(self.types.iter().zip(choice).map(|((c, _), &i)| c[i].action).collect())
    }

    /// Agent's (expected y, expected principal utility) per candidate of a type.
    fn scores(&self, bids: &[AgentBids], agent: usize, t: usize) -> Vec<(Rational, Rational)> {
        self.types[t]
            .0
            .iter()
            .map(|c| {
                let ey = match &c.bid {
                    Some(b) if !c.y.is_zero() => &c.y * win_given(bids, agent, &b.key),
                    _ => Rational::zero(),
                };
                (ey, principal_given(bids, agent, c.bid.as_ref()))
            })
            .collect()
    }

    /// Candidates maximizing expected y, ties toward the principal.
    fn best_set(&self, bids: &[AgentBids], agent: usize, t: usize) -> Vec<usize> {
        let scores = self.scores(bids, agent, t);
        let top = scores.iter().max().expect("abstention is always a candidate").clone();
        (0..scores.len()).filter(|&i| scores[i] == top).collect()
    }

    fn is_best(&self, bids: &[AgentBids], agent: usize, t: usize, chosen: usize) -> bool {
        let scores = self.scores(bids, agent, t);
        scores.iter().all(|s| *s <= scores[chosen])
    }
}

fn require_strategic(instance: &Instance) -> Result<()> {
    match instance.flavor() {
        Flavor::Strategic => Ok(()),
        Flavor::Adversarial => Err(Error::WrongFlavor { expected: "strategic" }),
    }
}

/// For each type of `agent`, the proposal maximizing expected y against the
/// other agents' strategies; exact ties go to the larger expected principal
/// utility, then to the earlier outcome, abstention last.
pub fn best_response(
    instance: &Instance,
    mech: &dyn ProposalRule,
    agent: usize,
    others: &StrategyProfile,
    cap: u64,
) -> Result<Strategy> {
    require_strategic(instance)?;
    let space = AgentSpace::build(instance, mech, agent, cap)?;
    let mut bids = Vec::with_capacity(instance.k());
    for l in 0..instance.k() {
        bids.push(if l == agent {
            AgentBids::silent()
        } else {
            AgentBids::new(super::bids::type_bids(instance, mech, l, &others.strategies[l], cap)?)
        });
    }
    let choice: Vec<usize> = (0..space.types.len()).map(|t| space.best_set(&bids, agent, t)[0]).collect();
    Ok(space.table(&choice))
}

fn decode(mut idx: u64, radix: &[usize]) -> Vec<usize> {
    let mut digits = vec![0; radix.len()];
    for i in (0..radix.len()).rev() {
        let r = radix[i] as u64;
        digits[i] = (idx % r) as usize;
        idx /= r;
    }
    digits
}

struct Search<'a> {
    spaces: Vec<AgentSpace>,
    /// Flattened type radices of agents 0..k-1 (all but the last).
    prefix_radix: Vec<usize>,
    prefix_count: u64,
    cap: u64,
    _instance: &'a Instance,
}

type Found = (Vec<Vec<usize>>, Rational);

impl<'a> Search<'a> {
    fn new(instance: &'a Instance, mech: &dyn ProposalRule, cap: u64) -> Result<Self> {
        require_strategic(instance)?;
        let k = instance.k();
        let spaces = (0..k).map(|a| AgentSpace::build(instance, mech, a, cap)).collect::<Result<Vec<_>>>()?;
        let prefix_radix: Vec<usize> = spaces[..k - 1].iter().flat_map(|s| s.radix()).collect();
        let count: BigUint = prefix_radix.iter().fold(BigUint::one(), |acc, &r| acc * BigUint::from(r));
        let prefix_count = count.to_u64().filter(|&c| c <= cap).ok_or_else(|| Error::CapExceeded {
            what: "strategy profiles",
            size: count.to_string(),
            cap,
        })?;
        Ok(Search { spaces, prefix_radix, prefix_count, cap, _instance: instance })
    }

    /// Every equilibrium whose first k-1 strategies are given by `idx`.
    fn at(&self, idx: u64) -> Result<Vec<Found>> {
        let k = self.spaces.len();
        let flat = decode(idx, &self.prefix_radix);
        let mut choices: Vec<Vec<usize>> = Vec::with_capacity(k);
        let mut pos = 0;
        for s in &self.spaces[..k - 1] {
            let n = s.types.len();
            choices.push(flat[pos..pos + n].to_vec());
            pos += n;
        }
        let mut bids: Vec<AgentBids> = self.spaces[..k - 1].iter().zip(&choices).map(|(s, c)| s.bids(c)).collect();
        bids.push(AgentBids::silent());
        let last = &self.spaces[k - 1];
        let best: Vec<Vec<usize>> = (0..last.types.len()).map(|t| last.best_set(&bids, k - 1, t)).collect();
        let combos: BigUint = best.iter().fold(BigUint::one(), |acc, b| acc * BigUint::from(b.len()));
        let combos = combos.to_u64().filter(|&c| c <= self.cap).ok_or_else(|| Error::CapExceeded {
            what: "best-response combinations",
            size: combos.to_string(),
            cap: self.cap,
        })?;
        let radix: Vec<usize> = best.iter().map(Vec::len).collect();
        let mut out = Vec::new();
        for c in 0..combos {
            let pick: Vec<usize> = decode(c, &radix).iter().zip(&best).map(|(&d, b)| b[d]).collect();
            bids[k - 1] = last.bids(&pick);
            let stable = (0..k - 1).all(|a| {
                let s = &self.spaces[a];
                (0..s.types.len()).all(|t| s.is_best(&bids, a, t, choices[a][t]))
            });
            if stable {
                let mut all = choices.clone();
                all.push(pick);
                out.push((all, expected_principal(&bids)));
            }
        }
        Ok(out)
    }

    fn profile(&self, choices: &[Vec<usize>]) -> StrategyProfile {
        StrategyProfile { strategies: self.spaces.iter().zip(choices).map(|(s, c)| s.table(c)).collect() }
    }
}

/// Every pure equilibrium (ties toward the principal) over undominated
/// actions, in enumeration order.
pub fn pure_equilibria(instance: &Instance, mech: &dyn ProposalRule, cap: u64) -> Result<Vec<Equilibrium>> {
    let search = Search::new(instance, mech, cap)?;
    let found: Vec<Vec<Found>> =
        (0..search.prefix_count).into_par_iter().map(|i| search.at(i)).collect::<Result<_>>()?;
    Ok(found
        .into_iter()
        .flatten()
        .map(|(c, v)| Equilibrium { profile: search.profile(&c), expected_principal: v })
        .collect())
}

/// The pure equilibrium with the largest exact expected principal utility
/// (earliest in enumeration order on ties).
pub fn find_principal_best_equilibrium(instance: &Instance, mech: &dyn ProposalRule, cap: u64) -> Result<Equilibrium> {
    let search = Search::new(instance, mech, cap)?;
    let best = (0..search.prefix_count)
        .into_par_iter()
        .map(|i| -> Result<Option<((u64, usize), Found)>> {
            let found = search.at(i)?;
            Ok(found.into_iter().enumerate().fold(None, |acc: Option<((u64, usize), Found)>, (j, f)| match acc {
                Some(a) if a.1 .1 >= f.1 => Some(a),
                _ => Some(((i, j), f)),
            }))
        })
        .try_reduce(
            || None,
            |a, b| {
                Ok(match (a, b) {
                    (None, x) | (x, None) => x,
                    (Some(a), Some(b)) => {
                        if b.1 .1 > a.1 .1 || (b.1 .1 == a.1 .1 && b.0 < a.0) {
                            Some(b)
                        } else {
                            Some(a)
                        }
                    }
                })
            },
        )?;
    match best {
        Some((_, (c, v))) => Ok(Equilibrium { profile: search.profile(&c), expected_principal: v }),
        None => Err(Error::NoPureEquilibrium),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{ThresholdMechanism, ThresholdRule};
    use crate::model::OutcomeDistribution;
    use crate::rational::{int, ratio};

    #[test]
    fn single_agent_breaks_y_ties_toward_principal() {
        let a = OutcomeDistribution::finite([(int(1), Some(int(5)), int(1))]);
        let b = OutcomeDistribution::finite([(int(9), Some(int(5)), int(1))]);
        let inst = Instance::agent_symmetric(1, Flavor::Strategic, &[a, b]);
        let mech = ThresholdMechanism::uniform(&inst, ThresholdRule::weak(int(0)));
        let s = best_response(&inst, &mech, 0, &StrategyProfile::uniform(1, Strategy::Truthful), 10).unwrap();
        assert_eq!(s, Strategy::Table(vec![Action::Propose { element: 1, claim: Draw::Atom(0) }]));
    }

    #[test]
    fn single_agent_proposes_only_acceptable() {
        let a = OutcomeDistribution::finite([(int(1), Some(int(9)), int(1))]);
        let b = OutcomeDistribution::finite([(int(3), Some(int(1)), int(1))]);
        let inst = Instance::agent_symmetric(1, Flavor::Strategic, &[a, b]);
        let mech = ThresholdMechanism::uniform(&inst, ThresholdRule::weak(int(2)));
        let s = best_response(&inst, &mech, 0, &StrategyProfile::uniform(1, Strategy::Truthful), 10).unwrap();
        assert_eq!(s, Strategy::Table(vec![Action::Propose { element: 1, claim: Draw::Atom(0) }]));
    }

    #[test]
    fn trivial_equilibrium() {
        let d = OutcomeDistribution::finite([(int(2), Some(int(1)), int(1))]);
        let inst = Instance::agent_symmetric(1, Flavor::Strategic, &[d]);
        let mech = ThresholdMechanism::uniform(&inst, ThresholdRule::weak(int(0)));
        let eq = find_principal_best_equilibrium(&inst, &mech, 100).unwrap();
        assert_eq!(eq.expected_principal, int(2));
        assert_eq!(pure_equilibria(&inst, &mech, 100).unwrap().len(), 1);
    }

    /// Agent's expected y under a profile, by brute force over joint types.
    fn expected_y(inst: &Instance, mech: &ThresholdMechanism, p: &StrategyProfile, agent: usize) -> Rational {
        use crate::mechanisms::{allocate_single_proposal, Allocation, Proposal};
        let mut total = Rational::zero();
        for (t, prob) in crate::model::enumerate_type_profiles(inst, 10_000).unwrap() {
            let props: Vec<Proposal> = p
                .actions(inst, mech, &t)
                .unwrap()
                .into_iter()
                .enumerate()
                .map(|(agent, action)| Proposal { agent, action })
                .collect();
            if let Allocation::Accepted { agent: a, element, claim } =
                allocate_single_proposal(mech, inst, &props, &t).unwrap()
            {
                if a == agent {
                    total += prob * inst.draw_y(element, &claim).unwrap();
                }
            }
        }
        total
    }

    #[test]
    fn two_agent_equilibria_are_stable() {
        let d = OutcomeDistribution::finite([(int(1), Some(int(2)), ratio(1, 2)), (int(3), Some(int(1)), ratio(1, 2))]);
        let inst = Instance::agent_symmetric(2, Flavor::Strategic, &[d.clone(), d]);
        let mech = ThresholdMechanism::uniform(&inst, ThresholdRule::weak(int(1)));
        let all = pure_equilibria(&inst, &mech, 100_000).unwrap();
        assert!(!all.is_empty());
        for eq in &all {
            for a in 0..2 {
                let mut dev = eq.profile.clone();
                dev.strategies[a] = best_response(&inst, &mech, a, &eq.profile, 1000).unwrap();
                assert_eq!(expected_y(&inst, &mech, &eq.profile, a), expected_y(&inst, &mech, &dev, a));
            }
        }
        let best = find_principal_best_equilibrium(&inst, &mech, 100_000).unwrap();
        assert_eq!(best.expected_principal, all.iter().map(|e| e.expected_principal.clone()).max().unwrap());
    }
}
