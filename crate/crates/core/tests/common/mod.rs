//! Seeded instance generators and brute-force oracles shared by the
//! integration tests.
#![allow(dead_code)]

use delegation::mechanisms::{ThresholdMechanism, ThresholdMode, ThresholdRule, VirtualValue};
use delegation::model::{AssignmentMode, Element, Flavor, Instance, OutcomeDistribution, TypeProfiles};
use delegation::rational::{int, ratio};
use delegation::Rational;
use num_traits::Zero;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Positive weights normalized to exact probabilities.
pub fn probabilities(rng: &mut impl Rng, n: usize) -> Vec<Rational> {
    let w: Vec<i64> = (0..n).map(|_| rng.random_range(1..=6)).collect();
    let total: i64 = w.iter().sum();
    w.into_iter().map(|v| ratio(v, total)).collect()
}

/// Finite law with `support` atoms, x drawn from `0..=x_max` (repeats
/// allowed), y drawn from `1..=8` when `with_y`.
pub fn finite_law(rng: &mut impl Rng, support: usize, x_max: i64, with_y: bool) -> OutcomeDistribution {
    let ps = probabilities(rng, support);
    OutcomeDistribution::finite(ps.into_iter().map(|p| {
        let x = int(rng.random_range(0..=x_max));
        let y = with_y.then(|| int(rng.random_range(1..=8)));
        (x, y, p)
    }))
}

fn support(rng: &mut impl Rng, max: usize) -> usize {
    rng.random_range(1..=max)
}

/// Every agent holds copies of the same per-agent collection of finite laws.
pub fn agent_symmetric_finite(rng: &mut impl Rng, k: usize, m: usize, max_support: usize) -> Instance {
    let laws: Vec<_> = (0..m)
        .map(|_| {
            let s = support(rng, max_support);
            finite_law(rng, s, 9, false)
        })
        .collect();
    Instance::agent_symmetric(k, Flavor::Adversarial, &laws)
}

/// Every element of every agent follows the same finite law.
pub fn fully_symmetric_finite(rng: &mut impl Rng, k: usize, m: usize, max_support: usize) -> Instance {
    let s = support(rng, max_support);
    let law = finite_law(rng, s, 9, false);
    Instance::agent_symmetric(k, Flavor::Adversarial, &vec![law; m])
}

pub fn atomless_law(rng: &mut impl Rng) -> OutcomeDistribution {
    match rng.random_range(0..3) {
        0 => {
            let lo = rng.random_range(0.0..2.0);
            OutcomeDistribution::Uniform { lo, hi: lo + rng.random_range(0.5..3.0) }
        }
        1 => OutcomeDistribution::Exponential { rate: rng.random_range(0.5..2.0) },
        _ => {
            let a = rng.random_range(0.0..1.0);
            let b = a + rng.random_range(0.2..2.0);
            let c = b + rng.random_range(0.2..2.0);
            let mid = rng.random_range(0.2..0.8);
            OutcomeDistribution::PiecewiseLinear { points: vec![(a, 0.0), (b, mid), (c, 1.0)] }
        }
    }
}

pub fn agent_symmetric_atomless(rng: &mut impl Rng, k: usize, m: usize) -> Instance {
    let laws: Vec<_> = (0..m).map(|_| atomless_law(rng)).collect();
    Instance::agent_symmetric(k, Flavor::Adversarial, &laws)
}

/// Fixed strategic instance; agents may hold different numbers of elements.
pub fn strategic_instance(rng: &mut impl Rng, k: usize, max_m: usize, max_support: usize) -> Instance {
    let mut elements = Vec::new();
    for agent in 0..k {
        for _ in 0..rng.random_range(1..=max_m) {
            let s = support(rng, max_support);
            elements.push(Element { id: String::new(), owner: Some(agent), distribution: finite_law(rng, s, 9, true) });
        }
    }
    Instance::new(k, Flavor::Strategic, AssignmentMode::Fixed, elements)
}

/// Unassigned pool of `n` finite elements for `k` agents.
pub fn pool(rng: &mut impl Rng, k: usize, n: usize, max_support: usize) -> Instance {
    let elements = (0..n)
        .map(|_| {
            let s = support(rng, max_support);
            Element { id: String::new(), owner: None, distribution: finite_law(rng, s, 9, false) }
        })
        .collect();
    Instance::new(k, Flavor::Adversarial, AssignmentMode::Shuffled, elements)
}

/// Per-element thresholds at one of the element's support values, weak or
/// strict at random. With `reject_lowest`, each element rejects its least
/// outcome, so every agent is left empty-handed with positive probability.
pub fn threshold_mechanism(rng: &mut impl Rng, instance: &Instance, reject_lowest: bool) -> ThresholdMechanism {
    let rules = (0..instance.elements().len())
        .map(|e| {
            let mut xs: Vec<Rational> = instance.atoms(e).unwrap().iter().map(|a| a.outcome.x.clone()).collect();
            xs.sort();
            xs.dedup();
            let value = xs.choose(rng).unwrap().clone();
            if rng.random_bool(0.5) || reject_lowest && value == xs[0] {
                ThresholdRule::strict(value)
            } else {
                ThresholdRule::weak(value)
            }
        })
        .collect();
    ThresholdMechanism::new(instance, rules).unwrap()
}

/// Same threshold on every element.
pub fn uniform_threshold(rng: &mut impl Rng, instance: &Instance, reject_lowest: bool) -> ThresholdMechanism {
    let mut xs: Vec<Rational> = (0..instance.elements().len())
        .flat_map(|e| instance.atoms(e).unwrap().iter().map(|a| a.outcome.x.clone()).collect::<Vec<_>>())
        .collect();
    xs.sort();
    xs.dedup();
    let value = xs.choose(rng).unwrap().clone();
    let rule = if reject_lowest && value == xs[0] || rng.random_bool(0.5) {
        ThresholdRule::strict(value)
    } else {
        ThresholdRule::weak(value)
    };
    ThresholdMechanism::uniform(instance, rule)
}

/// Monotone piecewise-linear virtual value with two or three breakpoints.
pub fn monotone_phi(rng: &mut impl Rng) -> VirtualValue {
    let n = rng.random_range(1..=3);
    let mut x = 0i64;
    let mut v = rng.random_range(-4i64..=2);
    let mut points = Vec::new();
    for _ in 0..n {
        points.push((int(x), int(v)));
        x += rng.random_range(1..=5);
        v += rng.random_range(0..=4);
    }
    VirtualValue::new(points).unwrap()
}

pub fn accepts(rule: &ThresholdRule, x: &Rational) -> bool {
    match rule.mode {
        ThresholdMode::Weak => x >= &rule.value,
        ThresholdMode::Strict => x > &rule.value,
    }
}

/// Expected principal utility under pessimistic agents, by brute force over
/// joint types: each agent offers its least acceptable x and the principal
/// keeps the largest offer. `accept(element, atom)` decides acceptability.
pub fn brute_pessimistic_by(instance: &Instance, accept: impl Fn(usize, usize) -> bool) -> Rational {
    let mut total = Rational::zero();
    for (atoms, p) in TypeProfiles::new(instance, u64::MAX).unwrap() {
        let mut best: Option<Rational> = None;
        for agent in 0..instance.k() {
            let offer = instance
                .agent_elements(agent)
                .iter()
                .filter(|&&e| accept(e, atoms[e]))
                .map(|&e| instance.atoms(e).unwrap()[atoms[e]].outcome.x.clone())
                .min();
            if let Some(x) = offer {
                best = Some(match best {
                    Some(b) => b.max(x),
                    None => x,
                });
            }
        }
        if let Some(b) = best {
            total += p * b;
        }
    }
    total
}

pub fn brute_pessimistic(instance: &Instance, rules: &[ThresholdRule]) -> Rational {
    brute_pessimistic_by(instance, |e, a| accepts(&rules[e], &instance.atoms(e).unwrap()[a].outcome.x))
}

/// `E[max x]` by brute force over joint types.
pub fn brute_opt(instance: &Instance) -> Rational {
    let mut total = Rational::zero();
    for (atoms, p) in TypeProfiles::new(instance, u64::MAX).unwrap() {
        let best = (0..instance.elements().len())
            .map(|e| instance.atoms(e).unwrap()[atoms[e]].outcome.x.clone())
            .max()
            .unwrap();
        total += p * best;
    }
    total
}

/// Pool with every element handed to an explicit owner.
pub fn assign(pool: &Instance, owners: &[usize]) -> Instance {
    let elements = pool
        .elements()
        .iter()
        .zip(owners)
        .map(|(e, &o)| Element { id: e.id.clone(), owner: Some(o), distribution: e.distribution.clone() })
        .collect();
    Instance::new(pool.k(), pool.flavor(), AssignmentMode::Fixed, elements)
}

/// Every owner vector in `0..k` of length `n`, first element slowest.
pub fn all_owner_vectors(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..k).map(move |a| {
                    let mut w = v.clone();
                    w.push(a);
                    w
                })
            })
            .collect();
    }
    out
}
