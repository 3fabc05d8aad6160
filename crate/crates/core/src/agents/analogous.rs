use crate::error::{Error, Result};
use crate::model::{Element, Flavor, Instance, OutcomeDistribution};
use crate::rational::{pow, Rational};
use num_traits::{One, Zero};

/// Atom order used to match copies across identically distributed elements.
fn canonical_order(d: &OutcomeDistribution) -> Vec<usize> {
    let atoms = d.atoms().expect("finite");
    let mut idx: Vec<usize> = (0..atoms.len()).collect();
    idx.sort_by(|&a, &b| (&atoms[a].outcome.x, &atoms[a].p, a).cmp(&(&atoms[b].outcome.x, &atoms[b].p, b)));
    idx
}

/// Strategic instance whose agents, by construction, strictly prefer the
/// adversarial proposal: the outcomes of one agent are labeled ω_1, ω_2, …
/// by ascending x (ties by outcome id) and receive y(ω_i) = (P/2)^i, where
/// P is the probability that every other agent observes only copies of ω_1.
/// Other agents receive the same values on the corresponding copies.
pub fn build_analogous_strategic(instance: &Instance) -> Result<Instance> {
    if instance.flavor() != Flavor::Adversarial {
        return Err(Error::WrongFlavor { expected: "adversarial" });
    }
    for e in 0..instance.elements().len() {
        instance.atoms(e)?;
    }
    if !instance.is_fully_symmetric() {
        return Err(Error::NotFullySymmetric);
    }
    let k = instance.k();
    let own = instance.agent_elements(0);
    let m = own.len();
    let mut labels: Vec<(Rational, usize, usize)> = Vec::new();
    for (j, &e) in own.iter().enumerate() {
        for (n, atom) in instance.atoms(e)?.iter().enumerate() {
            labels.push((atom.outcome.x.clone(), j, n));
        }
    }
    labels.sort();
    let (_, j1, n1) = &labels[0];
    let p1 = instance.atoms(own[*j1])?[*n1].p.clone();
    let p = pow(&p1, (k - 1) * m);
    if p.is_zero() {
        return Err(Error::ZeroP);
    }
    let half = &p / Rational::from_integer(2.into());
    // y by (position among the agent's elements, canonical atom rank)
    let mut y = vec![Vec::new(); m];
    let canon: Vec<Vec<usize>> = own.iter().map(|&e| canonical_order(&instance.element(e).distribution)).collect();
    for (j, c) in canon.iter().enumerate() {
        y[j] = vec![Rational::zero(); c.len()];
    }
    let mut acc = Rational::one();
    for (_, j, n) in &labels {
        acc *= &half;
        let rank = canon[*j].iter().position(|a| a == n).expect("atom present");
        y[*j][rank] = acc.clone();
    }
    let elements = instance
        .elements()
        .iter()
        .enumerate()
        .map(|(e, el)| {
            let owner = el.owner.expect("fully symmetric instances have owners");
            let j = instance.agent_elements(owner).iter().position(|&x| x == e).expect("owned");
            let order = canonical_order(&el.distribution);
            let mut atoms = el.distribution.atoms().expect("finite").to_vec();
            for (rank, &a) in order.iter().enumerate() {
                atoms[a].outcome.y = Some(y[j][rank].clone());
            }
            Element { id: el.id.clone(), owner: el.owner, distribution: OutcomeDistribution::Finite(atoms) }
        })
        .collect();
    Ok(Instance::new(k, Flavor::Strategic, instance.assignment(), elements))
}

/// Adversarial instance analogous to a strategic one (agent values dropped).
pub fn analogous_adversarial(instance: &Instance) -> Instance {
    let elements = instance
        .elements()
        .iter()
        .map(|el| {
            let distribution = match &el.distribution {
                OutcomeDistribution::Finite(atoms) => OutcomeDistribution::Finite(
                    atoms
                        .iter()
                        .map(|a| {
                            let mut a = a.clone();
                            a.outcome.y = None;
                            a
                        })
                        .collect(),
                ),
                other => other.clone(),
            };
            Element { id: el.id.clone(), owner: el.owner, distribution }
        })
        .collect();
    Instance::new(instance.k(), Flavor::Adversarial, instance.assignment(), elements)
}
