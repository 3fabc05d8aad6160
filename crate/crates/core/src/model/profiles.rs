use super::{Instance, OutcomeDistribution, TypeProfile};
use crate::error::{Error, Result};
use crate::rational::{from_f64, Rational};
use num_bigint::BigUint;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Default bound on exhaustively enumerated joint type profiles.
pub const DEFAULT_PROFILE_CAP: u64 = 1_000_000;

/// Odometer over joint type profiles of a finite instance, yielding the atom
/// index of every element together with the exact profile probability.
pub struct TypeProfiles<'a> {
    probs: Vec<&'a [super::Atom]>,
    digits: Vec<usize>,
    prefix: Vec<Rational>,
    done: bool,
}

impl<'a> TypeProfiles<'a> {
    pub fn new(instance: &'a Instance, cap: u64) -> Result<Self> {
        let count = instance.profile_count()?;
        if count > BigUint::from(cap) {
            return Err(Error::CapExceeded { what: "type profiles", size: count.to_string(), cap });
        }
        let probs: Vec<_> = (0..instance.elements().len()).map(|e| instance.atoms(e).expect("finite")).collect();
        let n = probs.len();
        let mut it = TypeProfiles { probs, digits: vec![0; n], prefix: vec![Rational::one(); n + 1], done: false };
        it.refresh(0);
        Ok(it)
    }

    fn refresh(&mut self, from: usize) {
        for i in from..self.digits.len() {
            self.prefix[i + 1] = &self.prefix[i] * &self.probs[i][self.digits[i]].p;
        }
    }
}

impl Iterator for TypeProfiles<'_> {
    type Item = (Vec<usize>, Rational);

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = (self.digits.clone(), self.prefix[self.digits.len()].clone());
        let mut i = self.digits.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.digits[i] += 1;
            if self.digits[i] < self.probs[i].len() {
                self.refresh(i);
                break;
            }
            self.digits[i] = 0;
        }
        Some(item)
    }
}

/// Every joint type profile of a finite instance with its exact probability.
pub fn enumerate_type_profiles(instance: &Instance, cap: u64) -> Result<Vec<(TypeProfile, Rational)>> {
    Ok(TypeProfiles::new(instance, cap)?.map(|(d, p)| (TypeProfile::from_atoms(&d), p)).collect())
}

/// Independent draw for every element from a seeded ChaCha stream.
pub fn sample_type_profile(instance: &Instance, seed: u64) -> TypeProfile {
    sample_type_profile_with(instance, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn sample_type_profile_with<R: Rng + ?Sized>(instance: &Instance, rng: &mut R) -> TypeProfile {
    TypeProfile { draws: instance.elements().iter().map(|e| e.distribution.sample(rng)).collect() }
}

fn owned(instance: &Instance, agent: usize) -> Result<&[usize]> {
    if agent >= instance.k() {
        return Err(Error::Domain(format!("agent {} outside 1..{}", agent + 1, instance.k())));
    }
    let elems = instance.agent_elements(agent);
    if elems.is_empty() {
        return Err(Error::NoElements { agent: agent + 1 });
    }
    Ok(elems)
}

/// `Pr[X^max_agent < v]` (strict) or `Pr[X^max_agent ≤ v]`.
pub fn max_cdf(instance: &Instance, agent: usize, v: f64, strict: bool) -> Result<f64> {
    let elems = owned(instance, agent)?;
    Ok(elems.iter().map(|&e| instance.element(e).distribution.cdf(v, strict)).product())
}

/// Exact version of [`max_cdf`] for finite supports.
pub fn max_cdf_exact(instance: &Instance, agent: usize, v: &Rational, strict: bool) -> Result<Rational> {
    let elems = owned(instance, agent)?;
    product_cdf_exact(instance, elems, v, strict)
}

/// Exact CDF of the maximum over every element of the instance.
pub fn pool_max_cdf_exact(instance: &Instance, v: &Rational, strict: bool) -> Result<Rational> {
    let all: Vec<usize> = (0..instance.elements().len()).collect();
    product_cdf_exact(instance, &all, v, strict)
}

fn product_cdf_exact(instance: &Instance, elems: &[usize], v: &Rational, strict: bool) -> Result<Rational> {
    let mut acc = Rational::one();
    for &e in elems {
        let c = instance.element(e).distribution.cdf_exact(v, strict).ok_or_else(|| instance.not_finite(e))?;
        acc *= c;
    }
    Ok(acc)
}

/// Threshold `t` with `Pr[X^max_agent < t] = p`.
///
/// Fails with [`Error::Atom`] carrying `x'` when `Pr[X^max < x'] < p ≤ Pr[X^max ≤ x']`
/// and no exact solution exists.
pub fn quantile_max(instance: &Instance, agent: usize, p: f64) -> Result<Rational> {
    let elems = owned(instance, agent)?.to_vec();
    quantile_of_max(instance, &elems, p)
}

/// [`quantile_max`] for the maximum over an arbitrary set of elements.
pub fn quantile_of_max(instance: &Instance, elems: &[usize], p: f64) -> Result<Rational> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("quantile level {p} outside (0,1)")));
    }
    if elems.is_empty() {
        return Err(Error::EmptyPool);
    }
    let laws: Vec<&OutcomeDistribution> = elems.iter().map(|&e| &instance.element(e).distribution).collect();
    let mut support: Vec<Rational> =
        laws.iter().filter_map(|d| d.atoms()).flat_map(|atoms| atoms.iter().map(|a| a.outcome.x.clone())).collect();
    support.sort();
    support.dedup();

    if laws.iter().all(|d| d.is_finite()) {
        let target = from_f64(p);
        for v in &support {
            let below = product_cdf_exact(instance, elems, v, true)?;
            if below == target {
                return Ok(v.clone());
            }
            let upto = product_cdf_exact(instance, elems, v, false)?;
            if below < target && target <= upto && upto != target {
                return Err(Error::Atom { x_prime: v.clone() });
            }
        }
        unreachable!("p < 1 is always reached by the top support value");
    }

    let cdf = |v: f64, strict: bool| laws.iter().map(|d| d.cdf(v, strict)).product::<f64>();
    for v in &support {
        let vf = crate::rational::to_f64(v);
        let (below, upto) = (cdf(vf, true), cdf(vf, false));
        if below < p && p <= upto && upto > below {
            return Err(Error::Atom { x_prime: v.clone() });
        }
    }
    let mut lo = laws.iter().map(|d| d.bounds().0).fold(f64::INFINITY, f64::min).min(0.0);
    let mut hi = laws.iter().map(|d| d.bounds().1).fold(f64::NEG_INFINITY, f64::max);
    if !hi.is_finite() {
        hi = 1.0;
        while cdf(hi, true) < p {
            hi *= 2.0;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid, true) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick whichever endpoint is closer in probability
    let t = if (cdf(lo, true) - p).abs() <= (cdf(hi, true) - p).abs() { lo } else { hi };
    Ok(from_f64(t))
}
