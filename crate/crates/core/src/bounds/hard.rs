use crate::agents::{Strategy, StrategyProfile};
use crate::engine::exact_expected_principal;
use crate::error::{Error, Result};
use crate::mechanisms::{Mechanism, SingleProposalMechanism};
use crate::model::{Flavor, Instance, OutcomeDistribution};
use crate::rational::{pow, serde_rational, to_f64, Rational};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

fn check(k: usize, eps: &Rational) -> Result<()> {
    if k < 2 {
        return Err(Error::Domain(format!("the hard instance needs k ≥ 2, got {k}")));
    }
    if *eps <= Rational::zero() || *eps >= Rational::one() {
        return Err(Error::Domain("ε must lie strictly between 0 and 1".into()));
    }
    Ok(())
}

/// `k` agents with two i.i.d. elements each: low `x = 1` with mass `1 − ε`
/// (first atom) and high `x = 1/ε` with mass `ε`.
pub fn hard_instance(k: usize, eps: &Rational) -> Result<Instance> {
    check(k, eps)?;
    let one = Rational::one();
    let law = OutcomeDistribution::finite([(one.clone(), None, &one - eps), (eps.recip(), None, eps.clone())]);
    Ok(Instance::agent_symmetric(k, Flavor::Adversarial, &[law.clone(), law]))
}

/// Closed forms for the hard instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardInstanceFormulas {
    pub k: usize,
    #[serde(with = "serde_rational")]
    pub eps: Rational,
    #[serde(with = "serde_rational")]
    pub e_opt: Rational,
    #[serde(with = "serde_rational")]
    pub e_a: Rational,
    #[serde(with = "serde_rational")]
    pub e_b: Rational,
    #[serde(with = "serde_rational")]
    pub ratio_exact: Rational,
    pub ratio: f64,
    /// `1 − 1/(2k + 1)`
    #[serde(with = "serde_rational")]
    pub limit: Rational,
}

pub fn hard_instance_formulas(k: usize, eps: &Rational) -> Result<HardInstanceFormulas> {
    check(k, eps)?;
    let one = Rational::one();
    let low = &one - eps;
    let all_low = pow(&low, 2 * k);
    let all_but_one_low = pow(&low, 2 * k - 1);
    let inv = eps.recip();
    let e_opt = &inv * (&one - &all_low) + &all_low;
    let e_a = &inv * (&one - &all_low);
    let e_b = &inv * (&one - &all_but_one_low) + &all_but_one_low;
    let ratio_exact = e_a.clone().max(e_b.clone()) / &e_opt;
    let limit = &one - Rational::new(1.into(), (2 * k + 1).into());
    Ok(HardInstanceFormulas { k, eps: eps.clone(), ratio: to_f64(&ratio_exact), e_opt, e_a, e_b, ratio_exact, limit })
}

/// Acceptable atoms per element: high only everywhere.
pub fn mechanism_a(instance: &Instance) -> Vec<Vec<usize>> {
    vec![vec![1]; instance.elements().len()]
}

/// Low or high on the first element of agent 1, high only elsewhere.
pub fn mechanism_b(instance: &Instance) -> Vec<Vec<usize>> {
    let mut sets = mechanism_a(instance);
    sets[instance.agent_elements(0)[0]] = vec![0, 1];
    sets
}

/// Result of scanning every per-element acceptance subset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub count: u64,
    #[serde(with = "serde_rational")]
    pub best_utility: Rational,
    /// Acceptable atoms per element of the first maximizer.
    pub best_sets: Vec<Vec<usize>>,
    /// Scan indices of every maximizer.
    pub argmax: Vec<u64>,
}

fn radix(instance: &Instance) -> Result<Vec<u32>> {
    (0..instance.elements().len()).map(|e| Ok(instance.atoms(e)?.len() as u32)).collect()
}

/// Acceptance sets encoded by a scan index: one bitmask over atoms per
/// element, first element most significant.
pub fn scan_sets(instance: &Instance, index: u64) -> Result<Vec<Vec<usize>>> {
    let sizes = radix(instance)?;
    let mut rest = index;
    let mut sets = vec![Vec::new(); sizes.len()];
    for (e, &s) in sizes.iter().enumerate().rev() {
        let base = 1u64 << s;
        let mask = rest % base;
        rest /= base;
        sets[e] = (0..s as usize).filter(|&a| mask >> a & 1 == 1).collect();
    }
    Ok(sets)
}

/// Inverse of [`scan_sets`].
pub fn scan_index_of(instance: &Instance, sets: &[Vec<usize>]) -> Result<u64> {
    let sizes = radix(instance)?;
    Ok(sizes.iter().zip(sets).fold(0u64, |acc, (&s, set)| {
        let mask = set.iter().fold(0u64, |m, &a| m | 1 << a);
        (acc << s) | mask
    }))
}

/// Evaluates every single-proposal mechanism given by per-element
/// acceptance subsets under pessimistic adversarial agents.
pub fn exhaustive_mechanism_scan(instance: &Instance, cap: u64) -> Result<ScanResult> {
    let sizes = radix(instance)?;
    let bits: u32 = sizes.iter().sum();
    let total = BigUint::one() << bits;
    if total > BigUint::from(cap) {
        return Err(Error::CapExceeded { what: "mechanisms", size: total.to_string(), cap });
    }
    let count = total.to_u64().expect("bounded by cap");
    let profile = StrategyProfile::uniform(instance.k(), Strategy::Pessimistic);
    let values = (0..count)
        .into_par_iter()
        .map(|i| {
            let mech =
                Mechanism::SingleProposal(SingleProposalMechanism::from_sets(instance, &scan_sets(instance, i)?));
            exact_expected_principal(instance, &mech, &profile, cap)
        })
        .collect::<Result<Vec<Rational>>>()?;
    let best_utility = values.iter().max().cloned().unwrap_or_else(Rational::zero);
    let argmax: Vec<u64> = (0..count).filter(|&i| values[i as usize] == best_utility).collect();
    Ok(ScanResult { count, best_sets: scan_sets(instance, argmax[0])?, best_utility, argmax })
}
