use super::{Action, Allocation, Proposal, TieOrder};
use crate::error::{Error, Result};
use crate::model::{Draw, Instance, Value};
use crate::rational::Rational;
use std::cmp::Ordering;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Accept `x ≥ θ`.
    Weak,
    /// Accept `x > θ`.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdRule {
    pub value: Rational,
    pub mode: ThresholdMode,
}

impl ThresholdRule {
    pub fn weak(value: Rational) -> Self {
        ThresholdRule { value, mode: ThresholdMode::Weak }
    }

    pub fn strict(value: Rational) -> Self {
        ThresholdRule { value, mode: ThresholdMode::Strict }
    }

    pub fn accepts(&self, x: &Value) -> bool {
        let theta = Value::Exact(self.value.clone());
        match self.mode {
            ThresholdMode::Weak => *x >= theta,
            ThresholdMode::Strict => *x > theta,
        }
    }
}

/// Single-proposal family: decides whether a claimed outcome is in `R_i`.
pub trait ProposalRule: Sync {
    /// Whether `claim` on `element` (owned by the proposing agent) is acceptable.
    fn accepts(&self, instance: &Instance, element: usize, claim: &Draw) -> bool;

    fn tie_order(&self) -> &TieOrder;
}

/// Per-element thresholds, weak or strict.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdMechanism {
    /// Indexed by element.
    pub rules: Vec<ThresholdRule>,
    pub tie: TieOrder,
}

impl ThresholdMechanism {
    pub fn new(instance: &Instance, rules: Vec<ThresholdRule>) -> Result<Self> {
        if rules.len() != instance.elements().len() {
            return Err(Error::Invalid("every element needs a threshold".into()));
        }
        Ok(ThresholdMechanism { rules, tie: TieOrder::default_for(instance) })
    }

    /// Same threshold on every element.
    pub fn uniform(instance: &Instance, rule: ThresholdRule) -> Self {
        ThresholdMechanism { rules: vec![rule; instance.elements().len()], tie: TieOrder::default_for(instance) }
    }

    /// Element-symmetric: one threshold per agent.
    pub fn is_element_symmetric(&self, instance: &Instance) -> bool {
        (0..instance.k()).all(|i| {
            let elems = instance.agent_elements(i);
            elems.windows(2).all(|w| self.rules[w[0]] == self.rules[w[1]])
        })
    }

    /// Agent-symmetric: the j-th element of every agent shares a threshold.
    pub fn is_agent_symmetric(&self, instance: &Instance) -> bool {
        let first = instance.agent_elements(0);
        (1..instance.k()).all(|i| {
            let elems = instance.agent_elements(i);
            elems.len() == first.len() && elems.iter().zip(first).all(|(&a, &b)| self.rules[a] == self.rules[b])
        })
    }

    pub fn is_fully_symmetric(&self, instance: &Instance) -> bool {
        self.is_agent_symmetric(instance) && self.is_element_symmetric(instance)
    }
}

impl ProposalRule for ThresholdMechanism {
    fn accepts(&self, instance: &Instance, element: usize, claim: &Draw) -> bool {
        self.rules[element].accepts(&instance.draw_value(element, claim))
    }

    fn tie_order(&self) -> &TieOrder {
        &self.tie
    }
}

/// One disjunct of an acceptable set `R_i`.
#[derive(Debug, Clone, PartialEq)]
pub enum AcceptClause {
    /// A specific finite-support outcome.
    Outcome { element: usize, atom: usize },
    /// Every outcome with `x ≥ min_x` (or `>` when strict), optionally
    /// restricted to one element.
    Above { element: Option<usize>, min_x: Rational, strict: bool },
}

impl AcceptClause {
    fn matches(&self, instance: &Instance, element: usize, claim: &Draw) -> bool {
        match (self, claim) {
            (AcceptClause::Outcome { element: e, atom }, Draw::Atom(a)) => *e == element && atom == a,
            (AcceptClause::Outcome { .. }, Draw::Value(_)) => false,
            (AcceptClause::Above { element: scope, min_x, strict }, _) => {
                if scope.is_some_and(|s| s != element) {
                    return false;
                }
                let x = instance.draw_value(element, claim);
                let m = Value::Exact(min_x.clone());
                if *strict {
                    x > m
                } else {
                    x >= m
                }
            }
        }
    }
}

/// Acceptable sets `R_i` per agent plus a tie order.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleProposalMechanism {
    /// Indexed by agent; an outcome is acceptable if any clause matches.
    pub accept: Vec<Vec<AcceptClause>>,
    pub tie: TieOrder,
}

impl SingleProposalMechanism {
    /// Extensional mechanism from a per-element list of acceptable atoms.
    pub fn from_sets(instance: &Instance, sets: &[Vec<usize>]) -> Self {
        let mut accept = vec![Vec::new(); instance.k()];
        for (element, atoms) in sets.iter().enumerate() {
            if let Some(owner) = instance.owner(element) {
                accept[owner].extend(atoms.iter().map(|&atom| AcceptClause::Outcome { element, atom }));
            }
        }
        SingleProposalMechanism { accept, tie: TieOrder::default_for(instance) }
    }

    /// Checks that every clause only references the agent's own outcomes.
    pub fn validate(&self, instance: &Instance) -> Result<()> {
        if self.accept.len() != instance.k() {
            return Err(Error::Invalid("one acceptable set per agent".into()));
        }
        for (agent, clauses) in self.accept.iter().enumerate() {
            for c in clauses {
                let e = match c {
                    AcceptClause::Outcome { element, .. } => Some(*element),
                    AcceptClause::Above { element, .. } => *element,
                };
                if let Some(e) = e {
                    if instance.owner(e) != Some(agent) {
                        return Err(Error::Invalid(format!(
                            "acceptable set of agent {} references {}",
                            agent + 1,
                            instance.element(e).id
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

impl ProposalRule for SingleProposalMechanism {
    fn accepts(&self, instance: &Instance, element: usize, claim: &Draw) -> bool {
        let Some(owner) = instance.owner(element) else { return false };
        self.accept[owner].iter().any(|c| c.matches(instance, element, claim))
    }

    fn tie_order(&self) -> &TieOrder {
        &self.tie
    }
}

/// Whether `agent` proposing `claim` on `element` would be acceptable.
pub fn acceptable(
    mech: &dyn ProposalRule,
    instance: &Instance,
    agent: usize,
    element: usize,
    claim: &Draw,
) -> Result<bool> {
    if element >= instance.elements().len() || instance.owner(element) != Some(agent) {
        return Err(Error::UnknownElement(format!("element #{element} for agent {}", agent + 1)));
    }
    if let Draw::Atom(a) = claim {
        if instance.element(element).distribution.support_size().is_none_or(|s| *a >= s) {
            return Err(Error::UnknownElement(format!("outcome #{a} of {}", instance.element(element).id)));
        }
    }
    Ok(mech.accepts(instance, element, claim))
}

/// Accepts the acceptable claim with the largest x (earliest in the tie
/// order on ties), then checks it against the true realization.
pub fn allocate_single_proposal(
    mech: &dyn ProposalRule,
    instance: &Instance,
    proposals: &[Proposal],
    truth: &crate::model::TypeProfile,
) -> Result<Allocation> {
    let mut seen = vec![false; instance.k()];
    let mut best: Option<(Value, usize, usize, usize, Draw)> = None;
    for prop in proposals {
        if prop.agent >= instance.k() {
            return Err(Error::Domain(format!("agent {} outside 1..{}", prop.agent + 1, instance.k())));
        }
        if std::mem::replace(&mut seen[prop.agent], true) {
            return Err(Error::DuplicateProposal { agent: prop.agent + 1 });
        }
        let Action::Propose { element, claim } = prop.action else { continue };
        if !acceptable(mech, instance, prop.agent, element, &claim)? {
            continue;
        }
        let x = instance.draw_value(element, &claim);
        let rank = mech.tie_order().rank(element);
        let better = match &best {
            None => true,
            Some((bx, brank, ..)) => match x.partial_cmp(bx) {
                Some(Ordering::Greater) => true,
                Some(Ordering::Equal) => rank < *brank,
                _ => false,
            },
        };
        if better {
            best = Some((x, rank, prop.agent, element, claim));
        }
    }
    Ok(match best {
        None => Allocation::Rejected,
        Some((_, _, agent, element, claim)) => {
            if truth.draws.get(element) == Some(&claim) {
                Allocation::Accepted { agent, element, claim }
            } else {
                Allocation::LieDetected { agent, element }
            }
        }
    })
}

/// Extensional image of a threshold mechanism: `R_i` lists the acceptable
/// atoms of finite elements and an element-scoped value predicate for
/// atomless ones.
pub fn threshold_as_single_proposal(mech: &ThresholdMechanism, instance: &Instance) -> SingleProposalMechanism {
    let mut accept = vec![Vec::new(); instance.k()];
    for (element, rule) in mech.rules.iter().enumerate() {
        let Some(owner) = instance.owner(element) else { continue };
        match instance.element(element).distribution.atoms() {
            Some(atoms) => accept[owner].extend(
                (0..atoms.len())
                    .filter(|&atom| rule.accepts(&Value::Exact(atoms[atom].outcome.x.clone())))
                    .map(|atom| AcceptClause::Outcome { element, atom }),
            ),
            None => accept[owner].push(AcceptClause::Above {
                element: Some(element),
                min_x: rule.value.clone(),
                strict: rule.mode == ThresholdMode::Strict,
            }),
        }
    }
    SingleProposalMechanism { accept, tie: mech.tie.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{enumerate_type_profiles, Flavor, OutcomeDistribution, TypeProfile};
    use crate::rational::{int, ratio};

    fn coin() -> OutcomeDistribution {
        OutcomeDistribution::finite([(int(1), None, ratio(1, 2)), (int(3), None, ratio(1, 2))])
    }

    fn point(x: i64) -> OutcomeDistribution {
        OutcomeDistribution::point(int(x))
    }

    #[test]
    fn threshold_boundaries() {
        let inst = Instance::agent_symmetric(1, Flavor::Adversarial, &[point(2), point(5)]);
        let weak = ThresholdMechanism::uniform(&inst, ThresholdRule::weak(int(2)));
        let strict = ThresholdMechanism::uniform(&inst, ThresholdRule::strict(int(2)));
        assert!(acceptable(&weak, &inst, 0, 0, &Draw::Atom(0)).unwrap());
        assert!(!acceptable(&strict, &inst, 0, 0, &Draw::Atom(0)).unwrap());
        assert!(acceptable(&weak, &inst, 0, 1, &Draw::Atom(0)).unwrap());
        assert!(matches!(acceptable(&weak, &inst, 0, 7, &Draw::Atom(0)), Err(Error::UnknownElement(_))));
        assert!(matches!(acceptable(&weak, &inst, 0, 0, &Draw::Atom(3)), Err(Error::UnknownElement(_))));
    }

    fn two_agents() -> Instance {
        // agent 1 holds x=3, agent 2 holds x=5 (deterministic)
        let elements = vec![
            crate::model::Element { id: String::new(), owner: Some(0), distribution: point(3) },
            crate::model::Element { id: String::new(), owner: Some(1), distribution: point(5) },
        ];
        Instance::new(2, Flavor::Adversarial, crate::model::AssignmentMode::Fixed, elements)
    }

    fn propose(agent: usize, element: usize, atom: usize) -> Proposal {
        Proposal { agent, action: Action::Propose { element, claim: Draw::Atom(atom) } }
    }

    #[test]
    fn argmax_and_rejection() {
        let inst = two_agents();
        let truth = TypeProfile::from_atoms(&[0, 0]);
        let open = ThresholdMechanism::uniform(&inst, ThresholdRule::weak(int(0)));
        let alloc = allocate_single_proposal(&open, &inst, &[propose(0, 0, 0), propose(1, 1, 0)], &truth).unwrap();
        assert_eq!(alloc, Allocation::Accepted { agent: 1, element: 1, claim: Draw::Atom(0) });
        assert_eq!(alloc.principal_value(&inst), Value::Exact(int(5)));
        let closed = ThresholdMechanism::uniform(&inst, ThresholdRule::strict(int(5)));
        let alloc = allocate_single_proposal(&closed, &inst, &[propose(0, 0, 0), propose(1, 1, 0)], &truth).unwrap();
        assert_eq!(alloc, Allocation::Rejected);
    }

    #[test]
    fn lie_detection() {
        let inst = Instance::agent_symmetric(
            1,
            Flavor::Adversarial,
            &[OutcomeDistribution::finite([(int(1), None, ratio(1, 2)), (int(5), None, ratio(1, 2))])],
        );
        let open = ThresholdMechanism::uniform(&inst, ThresholdRule::weak(int(0)));
        let truth = TypeProfile::from_atoms(&[0]);
        let alloc = allocate_single_proposal(&open, &inst, &[propose(0, 0, 1)], &truth).unwrap();
        assert_eq!(alloc, Allocation::LieDetected { agent: 0, element: 0 });
        assert_eq!(alloc.principal_value(&inst), Value::Exact(int(0)));
    }

    #[test]
    fn duplicate_proposals_rejected() {
        let inst = two_agents();
        let open = ThresholdMechanism::uniform(&inst, ThresholdRule::weak(int(0)));
        let truth = TypeProfile::from_atoms(&[0, 0]);
        let r = allocate_single_proposal(&open, &inst, &[propose(0, 0, 0), propose(0, 0, 0)], &truth);
        assert!(matches!(r, Err(Error::DuplicateProposal { agent: 1 })));
    }

    #[test]
    fn tie_order_decides_identity_not_value() {
        let inst = Instance::agent_symmetric(2, Flavor::Adversarial, &[point(4)]);
        let mut mech = ThresholdMechanism::uniform(&inst, ThresholdRule::weak(int(0)));
        let truth = TypeProfile::from_atoms(&[0, 0]);
        let props = [propose(0, 0, 0), propose(1, 1, 0)];
        let a = allocate_single_proposal(&mech, &inst, &props, &truth).unwrap();
        mech.tie = TieOrder::from_order(vec![1, 0]).unwrap();
        let b = allocate_single_proposal(&mech, &inst, &props, &truth).unwrap();
        assert_ne!(a, b);
        assert_eq!(a.principal_value(&inst), b.principal_value(&inst));
    }

    #[test]
    fn threshold_image_sets() {
        let inst = Instance::agent_symmetric(1, Flavor::Adversarial, &[coin()]);
        let mech = ThresholdMechanism::uniform(&inst, ThresholdRule::weak(int(2)));
        let sp = threshold_as_single_proposal(&mech, &inst);
        assert_eq!(sp.accept[0], vec![AcceptClause::Outcome { element: 0, atom: 1 }]);
        let all = threshold_as_single_proposal(&ThresholdMechanism::uniform(&inst, ThresholdRule::weak(int(0))), &inst);
        assert_eq!(all.accept[0].len(), 2);
        sp.validate(&inst).unwrap();
    }

    #[test]
    fn threshold_image_agrees_on_every_profile() {
        let d = OutcomeDistribution::finite([(int(1), None, ratio(1, 2)), (int(2), None, ratio(1, 2))]);
        let inst = Instance::agent_symmetric(2, Flavor::Adversarial, &[d.clone(), d]);
        let rules = vec![
            ThresholdRule::strict(int(1)),
            ThresholdRule::weak(int(1)),
            ThresholdRule::weak(int(2)),
            ThresholdRule::strict(int(2)),
        ];
        let mech = ThresholdMechanism::new(&inst, rules).unwrap();
        let sp = threshold_as_single_proposal(&mech, &inst);
        for (truth, _) in enumerate_type_profiles(&inst, 100).unwrap() {
            // every agent proposes every one of its elements in turn
            for a in 0..2 {
                for b in 2..4 {
                    let props = [
                        Proposal { agent: 0, action: Action::Propose { element: a, claim: truth.draws[a] } },
                        Proposal { agent: 1, action: Action::Propose { element: b, claim: truth.draws[b] } },
                    ];
                    assert_eq!(
                        allocate_single_proposal(&mech, &inst, &props, &truth).unwrap(),
                        allocate_single_proposal(&sp, &inst, &props, &truth).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn atomless_threshold_image_uses_predicates() {
        let inst =
            Instance::agent_symmetric(1, Flavor::Adversarial, &[OutcomeDistribution::Uniform { lo: 0.0, hi: 1.0 }]);
        let mech = ThresholdMechanism::uniform(&inst, ThresholdRule::strict(ratio(1, 2)));
        let sp = threshold_as_single_proposal(&mech, &inst);
        assert!(sp.accepts(&inst, 0, &Draw::Value(0.75)));
        assert!(!sp.accepts(&inst, 0, &Draw::Value(0.5)));
    }

    #[test]
    fn symmetry_of_thresholds() {
        let inst = Instance::agent_symmetric(2, Flavor::Adversarial, &[coin(), coin()]);
        let full = ThresholdMechanism::uniform(&inst, ThresholdRule::weak(int(2)));
        assert!(full.is_fully_symmetric(&inst));
        let rules = vec![
            ThresholdRule::weak(int(1)),
            ThresholdRule::weak(int(2)),
            ThresholdRule::weak(int(1)),
            ThresholdRule::weak(int(2)),
        ];
        let agent_sym = ThresholdMechanism::new(&inst, rules).unwrap();
        assert!(agent_sym.is_agent_symmetric(&inst));
        assert!(!agent_sym.is_element_symmetric(&inst));
    }
}
