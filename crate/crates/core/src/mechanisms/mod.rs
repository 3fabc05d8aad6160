//! Deterministic mechanisms: single-proposal (with threshold mechanisms as a
//! special case) and Myerson-type direct revelation.
//!
//! Acceptance is always conditional: if the accepted claim differs from the
//! element's true realization the principal detects the lie and every
//! player gets nothing.

pub mod dsic;
pub mod io;
mod myerson;
mod single;

pub use myerson::{allocate_myerson, MyersonMechanism, MyersonTieRule, VirtualValue};
pub use single::{
    acceptable, allocate_single_proposal, threshold_as_single_proposal, AcceptClause, ProposalRule,
    SingleProposalMechanism, ThresholdMechanism, ThresholdMode, ThresholdRule,
};

use crate::error::{Error, Result};
use crate::model::{Draw, Instance, Value};

/// Total order over elements used to break ties between equal-x proposals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TieOrder {
    order: Vec<usize>,
    rank: Vec<usize>,
}

impl TieOrder {
    /// Lexicographic by (agent, element position); pool elements last.
    pub fn default_for(instance: &Instance) -> Self {
        let mut order: Vec<usize> = (0..instance.elements().len()).collect();
        order.sort_by_key(|&e| (instance.owner(e).unwrap_or(usize::MAX), e));
        Self::from_order(order).expect("permutation")
    }

    /// Order given as element indices, earliest first.
    pub fn from_order(order: Vec<usize>) -> Result<Self> {
        let mut rank = vec![usize::MAX; order.len()];
        for (r, &e) in order.iter().enumerate() {
            if e >= order.len() || rank[e] != usize::MAX {
                return Err(Error::Invalid("tie order must list every element exactly once".into()));
            }
            rank[e] = r;
        }
        Ok(TieOrder { order, rank })
    }

    pub fn from_ids(instance: &Instance, ids: &[String]) -> Result<Self> {
        if ids.len() != instance.elements().len() {
            return Err(Error::Invalid("tie order must list every element exactly once".into()));
        }
        let order = ids.iter().map(|id| instance.element_index(id)).collect::<Result<Vec<_>>>()?;
        Self::from_order(order)
    }

    pub fn rank(&self, element: usize) -> usize {
        self.rank[element]
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// What an agent sends in a single-proposal mechanism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    Abstain,
    /// Claims that `element` realized `claim`.
    Propose {
        element: usize,
        claim: Draw,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    pub agent: usize,
    pub action: Action,
}

/// Result of running a mechanism on one joint type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Allocation {
    Accepted {
        agent: usize,
        element: usize,
        claim: Draw,
    },
    /// The conditionally accepted claim was not the true realization.
    LieDetected {
        agent: usize,
        element: usize,
    },
    Rejected,
}

impl Allocation {
    /// Principal's realized utility (zero unless a truthful claim is accepted).
    pub fn principal_value(&self, instance: &Instance) -> Value {
        match self {
            Allocation::Accepted { element, claim, .. } => instance.draw_value(*element, claim),
            _ => Value::Exact(num_traits::Zero::zero()),
        }
    }

    pub fn is_accepted(&self) -> bool {
        matches!(self, Allocation::Accepted { .. })
    }
}

/// All supported mechanism kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum Mechanism {
    Threshold(ThresholdMechanism),
    SingleProposal(SingleProposalMechanism),
    Myerson(MyersonMechanism),
}

impl Mechanism {
    pub fn kind(&self) -> &'static str {
        match self {
            Mechanism::Threshold(_) => "threshold",
            Mechanism::SingleProposal(_) => "single_proposal",
            Mechanism::Myerson(_) => "myerson",
        }
    }

    /// Single-proposal view of the mechanism, if it belongs to that family.
    pub fn proposal_rule(&self) -> Option<&dyn ProposalRule> {
        match self {
            Mechanism::Threshold(m) => Some(m),
            Mechanism::SingleProposal(m) => Some(m),
            Mechanism::Myerson(_) => None,
        }
    }

    pub fn tie(&self) -> &TieOrder {
        match self {
            Mechanism::Threshold(m) => &m.tie,
            Mechanism::SingleProposal(m) => &m.tie,
            Mechanism::Myerson(m) => &m.tie,
        }
    }

    pub fn with_tie(&self, tie: TieOrder) -> Self {
        let mut out = self.clone();
        match &mut out {
            Mechanism::Threshold(m) => m.tie = tie,
            Mechanism::SingleProposal(m) => m.tie = tie,
            Mechanism::Myerson(m) => m.tie = tie,
        }
        out
    }
}
