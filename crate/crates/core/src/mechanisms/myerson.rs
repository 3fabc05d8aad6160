use super::{Allocation, TieOrder};
use crate::error::{Error, Result};
use crate::model::{Draw, Instance, TypeProfile};
use crate::rational::Rational;
use num_traits::{Signed, Zero};

/// Monotone nondecreasing piecewise-linear map from x to virtual value.
///
/// Linear extrapolation past the first and last breakpoints; a single
/// breakpoint is a constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VirtualValue {
    points: Vec<(Rational, Rational)>,
}

impl VirtualValue {
    pub fn new(points: Vec<(Rational, Rational)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Invalid("virtual value needs at least one breakpoint".into()));
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0 || w[0].1 > w[1].1) {
            return Err(Error::Invalid("virtual value breakpoints must be increasing in x and nondecreasing".into()));
        }
        Ok(VirtualValue { points })
    }

    pub fn identity() -> Self {
        VirtualValue {
            points: vec![(Rational::zero(), Rational::zero()), (crate::rational::int(1), crate::rational::int(1))],
        }
    }

    pub fn points(&self) -> &[(Rational, Rational)] {
        &self.points
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        let pts = &self.points;
        if pts.len() == 1 {
            return pts[0].1.clone();
        }
        let i = pts.partition_point(|p| p.0 <= *x).clamp(1, pts.len() - 1);
        let ((x0, v0), (x1, v1)) = (&pts[i - 1], &pts[i]);
        let slope = (v1 - v0) / (x1 - x0);
        v0 + slope * (x - x0)
    }
}

/// How case 2 (several agents share the top virtual value) is resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MyersonTieRule {
    /// Accept the top-value outcome earliest in the tie order.
    EarliestOutcome,
    /// Fixed agent priority (the agent whose first element is earliest in
    /// the tie order wins); the winner's favorite top-value outcome is accepted.
    #[default]
    AgentPriority,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MyersonMechanism {
    /// Indexed by element.
    pub phi: Vec<VirtualValue>,
    pub tie: TieOrder,
    pub tie_rule: MyersonTieRule,
}

impl MyersonMechanism {
    pub fn new(instance: &Instance, phi: Vec<VirtualValue>) -> Result<Self> {
        if phi.len() != instance.elements().len() {
            return Err(Error::Invalid("every element needs a virtual value function".into()));
        }
        Ok(MyersonMechanism { phi, tie: TieOrder::default_for(instance), tie_rule: MyersonTieRule::default() })
    }

    pub fn identity(instance: &Instance) -> Self {
        Self::new(instance, vec![VirtualValue::identity(); instance.elements().len()]).expect("sized")
    }

    /// Static agent priority derived from the tie order (lower is better).
    fn agent_priority(&self, instance: &Instance, agent: usize) -> usize {
        instance.agent_elements(agent).iter().map(|&e| self.tie.rank(e)).min().unwrap_or(usize::MAX)
    }
}

/// Runs the Myerson-type mechanism on reported types, then checks the
/// accepted claim against the truth.
pub fn allocate_myerson(
    mech: &MyersonMechanism,
    instance: &Instance,
    reported: &TypeProfile,
    truth: &TypeProfile,
) -> Result<Allocation> {
    let n = instance.elements().len();
    if reported.draws.len() != n || truth.draws.len() != n {
        return Err(Error::IncompleteReport);
    }
    let mut vv = Vec::with_capacity(n);
    for (e, d) in reported.draws.iter().enumerate() {
        let Draw::Atom(a) = d else { return Err(Error::IncompleteReport) };
        let atoms = instance.atoms(e)?;
        let atom = atoms.get(*a).ok_or(Error::IncompleteReport)?;
        vv.push(mech.phi[e].eval(&atom.outcome.x));
    }
    let agent_best: Vec<Option<Rational>> =
        (0..instance.k()).map(|i| instance.agent_elements(i).iter().map(|&e| vv[e].clone()).max()).collect();
    let Some(top) = agent_best.iter().flatten().max().cloned() else {
        return Ok(Allocation::Rejected);
    };
    if top.is_negative() {
        return Ok(Allocation::Rejected);
    }
    let tied: Vec<usize> = (0..instance.k()).filter(|&i| agent_best[i].as_ref() == Some(&top)).collect();
    let y_of = |e: usize| instance.draw_y(e, &reported.draws[e]).unwrap_or_else(Rational::zero);

    let (winner, element) = if tied.len() > 1 {
        match mech.tie_rule {
            MyersonTieRule::EarliestOutcome => {
                let element = (0..n)
                    .filter(|&e| vv[e] == top && instance.owner(e).is_some())
                    .min_by_key(|&e| mech.tie.rank(e))
                    .expect("top is attained");
                (instance.owner(element).expect("owned"), element)
            }
            MyersonTieRule::AgentPriority => {
                let winner = *tied.iter().min_by_key(|&&i| mech.agent_priority(instance, i)).expect("nonempty");
                let element = favorite(instance, mech, winner, |e| vv[e] == top, &y_of);
                (winner, element)
            }
        }
    } else {
        let winner = tied[0];
        let runner_up = (0..instance.k()).filter(|&i| i != winner).filter_map(|i| agent_best[i].clone()).max();
        let element = favorite(
            instance,
            mech,
            winner,
            |e| !vv[e].is_negative() && runner_up.as_ref().is_none_or(|r| vv[e] > *r),
            &y_of,
        );
        (winner, element)
    };
    let claim = reported.draws[element];
    Ok(if truth.draws[element] == claim {
        Allocation::Accepted { agent: winner, element, claim }
    } else {
        Allocation::LieDetected { agent: winner, element }
    })
}

/// Among the winner's eligible elements, the one with the largest reported
/// y (earliest in the tie order on ties).
fn favorite(
    instance: &Instance,
    mech: &MyersonMechanism,
    winner: usize,
    eligible: impl Fn(usize) -> bool,
    y_of: &impl Fn(usize) -> Rational,
) -> usize {
    instance
        .agent_elements(winner)
        .iter()
        .copied()
        .filter(|&e| eligible(e))
        .max_by(|&a, &b| y_of(a).cmp(&y_of(b)).then_with(|| mech.tie.rank(b).cmp(&mech.tie.rank(a))))
        .expect("the winner's best element is eligible")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AssignmentMode, Element, Flavor, OutcomeDistribution};
    use crate::rational::{int, ratio};

    fn outcome(x: i64, y: i64) -> OutcomeDistribution {
        OutcomeDistribution::finite([(int(x), Some(int(y)), int(1))])
    }

    fn build(owners_and_laws: Vec<(usize, OutcomeDistribution)>, k: usize) -> Instance {
        let elements = owners_and_laws
            .into_iter()
            .map(|(o, d)| Element { id: String::new(), owner: Some(o), distribution: d })
            .collect();
        Instance::new(k, Flavor::Strategic, AssignmentMode::Fixed, elements)
    }

    #[test]
    fn identity_phi_picks_larger_report() {
        let inst = build(vec![(0, outcome(5, 1)), (1, outcome(3, 1))], 2);
        let mech = MyersonMechanism::identity(&inst);
        let t = TypeProfile::from_atoms(&[0, 0]);
        assert_eq!(
            allocate_myerson(&mech, &inst, &t, &t).unwrap(),
            Allocation::Accepted { agent: 0, element: 0, claim: Draw::Atom(0) }
        );
    }

    #[test]
    fn winner_gets_favorite_outcome_above_runner_up() {
        let inst = build(vec![(0, outcome(5, 1)), (0, outcome(4, 9)), (1, outcome(3, 0))], 2);
        let mech = MyersonMechanism::identity(&inst);
        let t = TypeProfile::from_atoms(&[0, 0, 0]);
        assert_eq!(
            allocate_myerson(&mech, &inst, &t, &t).unwrap(),
            Allocation::Accepted { agent: 0, element: 1, claim: Draw::Atom(0) }
        );
    }

    #[test]
    fn negative_virtual_values_reject() {
        let inst = build(vec![(0, outcome(5, 1)), (1, outcome(3, 1))], 2);
        let shift = VirtualValue::new(vec![(int(0), int(-10)), (int(1), int(-9))]).unwrap();
        let mech = MyersonMechanism::new(&inst, vec![shift.clone(), shift]).unwrap();
        let t = TypeProfile::from_atoms(&[0, 0]);
        assert_eq!(allocate_myerson(&mech, &inst, &t, &t).unwrap(), Allocation::Rejected);
    }

    #[test]
    fn misreport_that_wins_is_detected() {
        let d = OutcomeDistribution::finite([(int(1), Some(int(1)), ratio(1, 2)), (int(9), Some(int(1)), ratio(1, 2))]);
        let inst = build(vec![(0, d), (1, outcome(3, 1))], 2);
        let mech = MyersonMechanism::identity(&inst);
        let truth = TypeProfile::from_atoms(&[0, 0]);
        let lie = TypeProfile::from_atoms(&[1, 0]);
        assert_eq!(
            allocate_myerson(&mech, &inst, &lie, &truth).unwrap(),
            Allocation::LieDetected { agent: 0, element: 0 }
        );
    }

    #[test]
    fn tie_rules_differ_on_cross_agent_ties() {
        // agent 1: e1.1 (x=5, y=1), e1.2 (x=5, y=9); agent 2: x=5
        let inst = build(vec![(0, outcome(5, 1)), (0, outcome(5, 9)), (1, outcome(5, 0))], 2);
        let t = TypeProfile::from_atoms(&[0, 0, 0]);
        let mut mech = MyersonMechanism::identity(&inst);
        mech.tie_rule = MyersonTieRule::EarliestOutcome;
        assert_eq!(
            allocate_myerson(&mech, &inst, &t, &t).unwrap(),
            Allocation::Accepted { agent: 0, element: 0, claim: Draw::Atom(0) }
        );
        mech.tie_rule = MyersonTieRule::AgentPriority;
        assert_eq!(
            allocate_myerson(&mech, &inst, &t, &t).unwrap(),
            Allocation::Accepted { agent: 0, element: 1, claim: Draw::Atom(0) }
        );
    }

    #[test]
    fn incomplete_reports_rejected() {
        let inst = build(vec![(0, outcome(5, 1)), (1, outcome(3, 1))], 2);
        let mech = MyersonMechanism::identity(&inst);
        let short = TypeProfile::from_atoms(&[0]);
        let full = TypeProfile::from_atoms(&[0, 0]);
        assert!(matches!(allocate_myerson(&mech, &inst, &short, &full), Err(Error::IncompleteReport)));
    }

    #[test]
    fn virtual_value_evaluation() {
        let phi = VirtualValue::new(vec![(int(0), int(-1)), (int(2), int(3)), (int(4), int(3))]).unwrap();
        assert_eq!(phi.eval(&int(1)), int(1));
        assert_eq!(phi.eval(&int(3)), int(3));
        assert_eq!(phi.eval(&int(9)), int(3));
        assert_eq!(phi.eval(&ratio(-1, 2)), int(-2));
        assert_eq!(VirtualValue::identity().eval(&int(7)), int(7));
        assert!(VirtualValue::new(vec![(int(0), int(2)), (int(1), int(1))]).is_err());
    }
}
