use super::plans::{PlanModes, Provenance, ThresholdPlan};
use super::solve_p;
use crate::agents::{Strategy, StrategyProfile};
use crate::engine::{exact_expected_opt, exact_expected_principal, sample_stats, McStats};
use crate::error::{Error, Result};
use crate::mechanisms::{Mechanism, ThresholdMechanism, ThresholdMode, ThresholdRule};
use crate::model::{odometer_step, AssignmentMode, Element, Instance, LawKey};
use crate::rational::{pow, to_f64, Rational};
use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Random assignment of pool elements to agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShuffleVariant {
    /// Each element goes to a uniformly random agent, independently.
    #[default]
    Independent,
    /// A uniformly random equipartition: every agent gets exactly `n / k`.
    Balanced,
}

fn pool_size(pool: &Instance) -> Result<usize> {
    match pool.elements().len() {
        0 => Err(Error::EmptyPool),
        n => Ok(n),
    }
}

fn check_variant(n: usize, k: usize, variant: ShuffleVariant) -> Result<()> {
    if variant == ShuffleVariant::Balanced && !n.is_multiple_of(k) {
        return Err(Error::IndivisiblePool { n, k });
    }
    Ok(())
}

/// The pool with owners taken from `owners` (one agent index per element).
fn assigned(pool: &Instance, owners: &[usize]) -> Instance {
    let elements = pool
        .elements()
        .iter()
        .zip(owners)
        .map(|(e, &o)| Element { id: e.id.clone(), owner: Some(o), distribution: e.distribution.clone() })
        .collect();
    Instance::new(pool.k(), pool.flavor(), AssignmentMode::Shuffled, elements)
}

/// Draws one assignment of the pool, deterministic per seed.
pub fn assign_shuffled(pool: &Instance, seed: u64, variant: ShuffleVariant) -> Result<Instance> {
    let n = pool_size(pool)?;
    let k = pool.k();
    check_variant(n, k, variant)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let owners: Vec<usize> = match variant {
        ShuffleVariant::Independent => (0..n).map(|_| rng.random_range(0..k)).collect(),
        ShuffleVariant::Balanced => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut owners = vec![0; n];
            for (slot, &e) in order.iter().enumerate() {
                owners[e] = slot / (n / k);
            }
            owners
        }
    };
    Ok(assigned(pool, &owners))
}

fn check_count(count: BigUint, cap: u64) -> Result<()> {
    if count > BigUint::from(cap) {
        return Err(Error::CapExceeded { what: "assignments", size: count.to_string(), cap });
    }
    Ok(())
}

/// Every owner vector with its probability under `variant`.
pub fn enumerate_assignments(
    n: usize,
    k: usize,
    variant: ShuffleVariant,
    cap: u64,
) -> Result<Vec<(Vec<usize>, Rational)>> {
    if n == 0 {
        return Err(Error::EmptyPool);
    }
    check_variant(n, k, variant)?;
    check_count(BigUint::from(k).pow(n as u32), cap)?;
    let radix = vec![k; n];
    let mut digits = vec![0usize; n];
    let mut all = Vec::new();
    loop {
        let keep = match variant {
            ShuffleVariant::Independent => true,
            ShuffleVariant::Balanced => (0..k).all(|a| digits.iter().filter(|&&d| d == a).count() == n / k),
        };
        if keep {
            all.push(digits.clone());
        }
        if !odometer_step(&mut digits, &radix) {
            break;
        }
    }
    let w = Rational::new(1.into(), all.len().into());
    Ok(all.into_iter().map(|a| (a, w.clone())).collect())
}

/// Set partitions of `0..n` into at most `k` blocks (restricted growth
/// strings), each with the probability of the owner vectors it stands for.
/// Agent-symmetric mechanisms and behavior make every relabeling of the
/// agents equivalent.
fn partitions(n: usize, k: usize, variant: ShuffleVariant, cap: u64) -> Result<Vec<(Vec<usize>, Rational)>> {
    check_variant(n, k, variant)?;
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut a = vec![0usize; n];
    fn rec(i: usize, used: usize, a: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>, cap: u64) -> Result<()> {
        if i == a.len() {
            if out.len() as u64 >= cap {
                return Err(Error::CapExceeded { what: "assignment classes", size: format!("> {cap}"), cap });
            }
            out.push(a.clone());
            return Ok(());
        }
        for b in 0..(used + 1).min(k) {
            a[i] = b;
            rec(i + 1, used.max(b + 1), a, k, out, cap)?;
        }
        Ok(())
    }
    rec(1, 1, &mut a, k, &mut out, cap)?;
    let kn = pow(&Rational::from_integer(k.into()), n);
    let sized = out.into_iter().map(|p| {
        let blocks = p.iter().max().map_or(0, |m| m + 1);
        (p, blocks)
    });
    Ok(match variant {
        ShuffleVariant::Independent => sized
            .into_iter()
            .map(|(p, b)| {
                let falling: u64 = (0..b as u64).map(|i| k as u64 - i).product();
                (p, Rational::from_integer(falling.into()) / &kn)
            })
            .collect(),
        ShuffleVariant::Balanced => {
            let equal: Vec<Vec<usize>> = sized
                .into_iter()
                .filter(|(p, b)| *b == k && (0..k).all(|a| p.iter().filter(|&&d| d == a).count() == n / k))
                .map(|(p, _)| p)
                .collect();
            let w = Rational::new(1.into(), equal.len().into());
            equal.into_iter().map(|p| (p, w.clone())).collect()
        }
    })
}

/// Exact expected principal utility of per-element threshold `rules`
/// averaged over the random assignment, with pessimistic adversarial agents.
pub fn shuffled_expected_principal(
    pool: &Instance,
    rules: &[ThresholdRule],
    variant: ShuffleVariant,
    cap: u64,
) -> Result<Rational> {
    let n = pool_size(pool)?;
    if rules.len() != n {
        return Err(Error::Invalid("every pool element needs a threshold".into()));
    }
    let classes = partitions(n, pool.k(), variant, cap)?;
    let profile = StrategyProfile::uniform(pool.k(), Strategy::Pessimistic);
    let values = classes
        .par_iter()
        .map(|(owners, w)| {
            let inst = assigned(pool, owners);
            let mech = Mechanism::Threshold(ThresholdMechanism::new(&inst, rules.to_vec())?);
            Ok(exact_expected_principal(&inst, &mech, &profile, cap)? * w)
        })
        .collect::<Result<Vec<Rational>>>()?;
    Ok(values.into_iter().fold(Rational::zero(), |acc, v| acc + v))
}

/// Mean exact utility over `samples` seeded random assignments. Assignment
/// `i` uses the `i`-th seed drawn from a ChaCha8 stream seeded by `seed`.
pub fn sampled_shuffled_principal(
    pool: &Instance,
    rules: &[ThresholdRule],
    variant: ShuffleVariant,
    samples: u64,
    seed: u64,
    cap: u64,
) -> Result<McStats> {
    if samples == 0 {
        return Err(Error::InvalidRange("at least one sample is needed".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..samples).map(|_| rng.random()).collect();
    let profile = StrategyProfile::uniform(pool.k(), Strategy::Pessimistic);
    let values = seeds
        .par_iter()
        .map(|&s| {
            let inst = assign_shuffled(pool, s, variant)?;
            let mech = Mechanism::Threshold(ThresholdMechanism::new(&inst, rules.to_vec())?);
            Ok(to_f64(&exact_expected_principal(&inst, &mech, &profile, cap)?))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(sample_stats(&values))
}

/// `E[Opt]` of the pool; independent of the assignment.
pub fn shuffled_expected_opt(pool: &Instance) -> Result<Rational> {
    pool_size(pool)?;
    exact_expected_opt(pool)
}

/// `Pr[X^max_i < t]` for one agent under independent assignment, where an
/// element counts as below the threshold when its rule rejects it:
/// `Π_e (1 + (q_e − 1)/k)`. Returns it with `Π_e q_e`.
pub fn agent_below_probability(pool: &Instance, rules: &[ThresholdRule]) -> Result<(Rational, Rational)> {
    pool_size(pool)?;
    let k = Rational::from_integer(pool.k().into());
    let mut below = Rational::one();
    let mut q = Rational::one();
    for (e, rule) in rules.iter().enumerate() {
        let atoms = pool.atoms(e)?;
        let q_e = atoms
            .iter()
            .filter(|a| !rule.accepts(&crate::model::Value::Exact(a.outcome.x.clone())))
            .fold(Rational::zero(), |acc, a| acc + &a.p);
        below *= Rational::one() + (&q_e - Rational::one()) / &k;
        q *= q_e;
    }
    Ok((below, q))
}

/// Pool-wide CDF pieces at `v`: `(Pr[X_e < v], Pr[X_e = v])` per element.
fn element_masses(pool: &Instance, v: f64) -> Vec<(f64, f64)> {
    pool.elements()
        .iter()
        .map(|el| {
            let below = el.distribution.cdf(v, true);
            (below, el.distribution.cdf(v, false) - below)
        })
        .collect()
}

/// Common split probability `φ` with `Π_e (a_e + φ b_e) = q`.
fn pool_split(masses: &[(f64, f64)], q: f64) -> f64 {
    let f = |phi: f64| masses.iter().map(|(a, b)| a + phi * b).product::<f64>();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Candidate plans for a pool: the exact plan when the pool maximum has a
/// `q`-quantile, otherwise one plan per choice of how many elements of
/// each law carrying an atom at `x′` are strict (lowest indices first).
pub fn shuffled_plan_candidates(pool: &Instance) -> Result<Vec<ThresholdPlan>> {
    let n = pool_size(pool)?;
    let k = pool.k();
    let p = solve_p(k);
    let q = 1.0 - p;
    let all: Vec<usize> = (0..n).collect();
    let plan = |t: Rational, modes: Vec<ThresholdMode>, split: Option<(Rational, f64)>| ThresholdPlan {
        k,
        p,
        q: Some(q),
        t,
        modes: PlanModes::PerElement(modes),
        provenance: Provenance::Shuffled { x_prime: split.as_ref().map(|s| s.0.clone()), phi: split.map(|s| s.1) },
    };
    let x_prime = match crate::model::quantile_of_max(pool, &all, q) {
        Ok(t) => return Ok(vec![plan(t, vec![ThresholdMode::Weak; n], None)]),
        Err(Error::Atom { x_prime }) => x_prime,
        Err(e) => return Err(e),
    };
    let masses = element_masses(pool, to_f64(&x_prime));
    let phi = pool_split(&masses, q);
    // Identical-law elements are exchangeable under a uniform assignment,
    // so only the number of strict ones per law matters.
    let mut groups: Vec<(LawKey, Vec<usize>)> = Vec::new();
    for e in (0..n).filter(|&e| masses[e].1 > 0.0) {
        let key = pool.element(e).distribution.law_key();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(e),
            None => groups.push((key, vec![e])),
        }
    }
    let total: BigUint = groups.iter().map(|(_, m)| BigUint::from(m.len() + 1)).product();
    if total > BigUint::from(1u64 << 31) {
        return Err(Error::CapExceeded { what: "split patterns", size: total.to_string(), cap: 1 << 31 });
    }
    let mut counts = vec![0usize; groups.len()];
    let mut out = Vec::new();
    loop {
        let mut modes = vec![ThresholdMode::Weak; n];
        for ((_, members), &c) in groups.iter().zip(&counts) {
            for &e in &members[..c] {
                modes[e] = ThresholdMode::Strict;
            }
        }
        out.push(plan(x_prime.clone(), modes, Some((x_prime.clone(), phi))));
        let Some(g) = (0..groups.len()).find(|&g| counts[g] < groups[g].1.len()) else { break };
        counts[g] += 1;
        counts[..g].iter_mut().for_each(|c| *c = 0);
    }
    Ok(out)
}

fn plan_rules(plan: &ThresholdPlan) -> Vec<ThresholdRule> {
    match &plan.modes {
        PlanModes::PerElement(m) | PlanModes::PerAgent(m) => {
            m.iter().map(|&mode| ThresholdRule { value: plan.t.clone(), mode }).collect()
        }
    }
}

/// Shuffled threshold plan. With atoms, every candidate is evaluated
/// exactly over the random assignment and the best one kept (first in
/// candidate order on ties). Returns the plan with its value.
pub fn shuffled_threshold_plan(
    pool: &Instance,
    variant: ShuffleVariant,
    cap: u64,
) -> Result<(ThresholdPlan, Option<Rational>)> {
    let mut candidates = shuffled_plan_candidates(pool)?;
    if candidates.len() == 1 {
        return Ok((candidates.remove(0), None));
    }
    check_count(BigUint::from(candidates.len()), cap)?;
    let values = candidates
        .iter()
        .map(|c| shuffled_expected_principal(pool, &plan_rules(c), variant, cap))
        .collect::<Result<Vec<_>>>()?;
    let best = (0..values.len()).fold(0, |b, i| if values[i] > values[b] { i } else { b });
    let value = values[best].clone();
    Ok((candidates.swap_remove(best), Some(value)))
}

impl ThresholdPlan {
    /// Per-element rules of a shuffled plan.
    pub fn element_rules(&self) -> Vec<ThresholdRule> {
        plan_rules(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Flavor, OutcomeDistribution};
    use crate::rational::{int, ratio};

    fn pool(k: usize, laws: &[OutcomeDistribution]) -> Instance {
        let elements =
            laws.iter().map(|d| Element { id: String::new(), owner: None, distribution: d.clone() }).collect();
        Instance::new(k, Flavor::Adversarial, AssignmentMode::Shuffled, elements)
    }

    fn coin(hi: i64) -> OutcomeDistribution {
        OutcomeDistribution::finite([(int(1), None, ratio(1, 2)), (int(hi), None, ratio(1, 2))])
    }

    #[test]
    fn uniform_pool_quantile() {
        let pl = pool(2, &[OutcomeDistribution::Uniform { lo: 0.0, hi: 1.0 }]);
        let (plan, _) = shuffled_threshold_plan(&pl, ShuffleVariant::Independent, 1 << 20).unwrap();
        let q = 1.0 - solve_p(2);
        assert!((plan.q.unwrap() - q).abs() < 1e-12);
        assert!((to_f64(&plan.t) - q).abs() < 1e-9);
    }

    #[test]
    fn single_agent_pool_matches_fixed_threshold() {
        let laws = [OutcomeDistribution::Uniform { lo: 0.0, hi: 1.0 }];
        let (plan, _) = shuffled_threshold_plan(&pool(1, &laws), ShuffleVariant::Independent, 1 << 20).unwrap();
        assert_eq!(plan.q, Some(0.5));
        let fixed = Instance::agent_symmetric(1, Flavor::Adversarial, &laws);
        assert_eq!(plan.t, super::super::atomless_threshold_plan(&fixed).unwrap().t);
    }

    #[test]
    fn assignment_probabilities() {
        let ind = enumerate_assignments(4, 2, ShuffleVariant::Independent, 1000).unwrap();
        assert_eq!(ind.len(), 16);
        assert!(ind.iter().all(|(_, w)| *w == ratio(1, 16)));
        let bal = enumerate_assignments(4, 2, ShuffleVariant::Balanced, 1000).unwrap();
        assert_eq!(bal.len(), 6);
        assert!(bal.iter().all(|(_, w)| *w == ratio(1, 6)));
        assert!(matches!(
            enumerate_assignments(3, 2, ShuffleVariant::Balanced, 1000),
            Err(Error::IndivisiblePool { .. })
        ));
        let one = assign_shuffled(&pool(1, &[coin(2), coin(3)]), 7, ShuffleVariant::Independent).unwrap();
        assert!(one.elements().iter().all(|e| e.owner == Some(0)));
    }

    #[test]
    fn partition_weights_sum_to_one() {
        for (n, k, v) in
            [(5, 3, ShuffleVariant::Independent), (6, 3, ShuffleVariant::Balanced), (4, 2, ShuffleVariant::Balanced)]
        {
            let total = partitions(n, k, v, 1 << 20).unwrap().into_iter().fold(Rational::zero(), |a, (_, w)| a + w);
            assert_eq!(total, Rational::one());
        }
    }

    #[test]
    fn class_sum_matches_full_enumeration() {
        let pl = pool(2, &[coin(2), coin(3), coin(5), coin(3)]);
        let rules: Vec<ThresholdRule> = [2, 3, 3, 1].iter().map(|&t| ThresholdRule::weak(int(t))).collect();
        let profile = StrategyProfile::uniform(2, Strategy::Pessimistic);
        for variant in [ShuffleVariant::Independent, ShuffleVariant::Balanced] {
            let mut brute = Rational::zero();
            for (owners, w) in enumerate_assignments(4, 2, variant, 1000).unwrap() {
                let inst = assigned(&pl, &owners);
                let mech = Mechanism::Threshold(ThresholdMechanism::new(&inst, rules.clone()).unwrap());
                brute += exact_expected_principal(&inst, &mech, &profile, 1000).unwrap() * w;
            }
            assert_eq!(shuffled_expected_principal(&pl, &rules, variant, 1000).unwrap(), brute);
        }
    }

    #[test]
    fn seeded_assignment_is_reproducible() {
        let pl = pool(2, &[coin(2), coin(3), coin(5), coin(7)]);
        let a = assign_shuffled(&pl, 11, ShuffleVariant::Balanced).unwrap();
        assert_eq!(a, assign_shuffled(&pl, 11, ShuffleVariant::Balanced).unwrap());
        assert_eq!(a.agent_elements(0).len(), 2);
    }

    #[test]
    fn atom_pool_meets_bound() {
        let pl = pool(2, &[coin(3), coin(3), coin(2)]);
        let (plan, value) = shuffled_threshold_plan(&pl, ShuffleVariant::Independent, 1 << 20).unwrap();
        let opt = shuffled_expected_opt(&pl).unwrap();
        assert!(to_f64(&value.unwrap()) >= plan.p * to_f64(&opt) - 1e-10);
        let (below, q) = agent_below_probability(&pl, &plan.element_rules()).unwrap();
        assert!(pow(&below, 2) >= q);
    }
}
