//! Delegation instances: agents, elements and their outcome laws.

mod distribution;
pub mod io;
mod profiles;

pub use distribution::{Atom, LawKey, Outcome, OutcomeDistribution, Value};
pub use profiles::{
    enumerate_type_profiles, max_cdf, max_cdf_exact, pool_max_cdf_exact, quantile_max, quantile_of_max,
    sample_type_profile, sample_type_profile_with, TypeProfiles, DEFAULT_PROFILE_CAP,
};

use crate::error::{Error, Result};
use crate::rational::Rational;
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    Strategic,
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentMode {
    #[default]
    Fixed,
    Shuffled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub id: String,
    /// Zero-based owning agent; `None` for an unassigned pool element.
    pub owner: Option<usize>,
    pub distribution: OutcomeDistribution,
}

/// Realization of one element: an index into a finite support, or a value
/// drawn from an atomless law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Draw {
    Atom(usize),
    Value(f64),
}

/// One realized outcome per element, in instance element order.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeProfile {
    pub draws: Vec<Draw>,
}

impl TypeProfile {
    pub fn from_atoms(atoms: &[usize]) -> Self {
        TypeProfile { draws: atoms.iter().map(|&a| Draw::Atom(a)).collect() }
    }
}

/// A diagnostic produced by [`validate_instance`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation(pub String);

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Common-knowledge setup of a delegation game.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    k: usize,
    elements: Vec<Element>,
    flavor: Flavor,
    assignment: AssignmentMode,
    by_agent: Vec<Vec<usize>>,
}

impl Instance {
    /// Builds an instance; elements without an id get `e{agent}.{j}` and
    /// outcomes without one get `{element}.{n}` (all one-based). Pool
    /// elements use agent number 0.
    pub fn new(k: usize, flavor: Flavor, assignment: AssignmentMode, elements: Vec<Element>) -> Self {
        let mut counters = vec![0usize; k + 1];
        let mut pool_counter = 0usize;
        let mut elements = elements;
        for e in &mut elements {
            if e.id.is_empty() {
                let (agent_no, j) = match e.owner {
                    Some(o) if o < k => {
                        counters[o] += 1;
                        (o + 1, counters[o])
                    }
                    _ => {
                        pool_counter += 1;
                        (0, pool_counter)
                    }
                };
                e.id = format!("e{agent_no}.{j}");
            }
            if let OutcomeDistribution::Finite(atoms) = &mut e.distribution {
                for (n, a) in atoms.iter_mut().enumerate() {
                    if a.outcome.id.is_empty() {
                        a.outcome.id = format!("{}.{}", e.id, n + 1);
                    }
                }
            }
        }
        let mut by_agent = vec![Vec::new(); k];
        for (idx, e) in elements.iter().enumerate() {
            if let Some(o) = e.owner.filter(|&o| o < k) {
                by_agent[o].push(idx);
            }
        }
        Instance { k, elements, flavor, assignment, by_agent }
    }

    /// `k` agents each holding copies of `per_agent` (ids assigned).
    pub fn agent_symmetric(k: usize, flavor: Flavor, per_agent: &[OutcomeDistribution]) -> Self {
        let elements = (0..k)
            .flat_map(|agent| {
                per_agent.iter().map(move |d| Element {
                    id: String::new(),
                    owner: Some(agent),
                    distribution: d.clone(),
                })
            })
            .collect();
        Instance::new(k, flavor, AssignmentMode::Fixed, elements)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn assignment(&self) -> AssignmentMode {
        self.assignment
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn element(&self, idx: usize) -> &Element {
        &self.elements[idx]
    }

    /// Element indices owned by `agent`, in instance order.
    pub fn agent_elements(&self, agent: usize) -> &[usize] {
        &self.by_agent[agent]
    }

    pub fn element_index(&self, id: &str) -> Result<usize> {
        self.elements.iter().position(|e| e.id == id).ok_or_else(|| Error::UnknownElement(id.to_string()))
    }

    /// `(element, atom)` for an outcome id.
    pub fn outcome_index(&self, id: &str) -> Result<(usize, usize)> {
        for (ei, e) in self.elements.iter().enumerate() {
            if let Some(atoms) = e.distribution.atoms() {
                if let Some(ai) = atoms.iter().position(|a| a.outcome.id == id) {
                    return Ok((ei, ai));
                }
            }
        }
        Err(Error::UnknownElement(id.to_string()))
    }

    pub fn atoms(&self, element: usize) -> Result<&[Atom]> {
        self.elements[element].distribution.atoms().ok_or_else(|| self.not_finite(element))
    }

    pub(crate) fn not_finite(&self, element: usize) -> Error {
        Error::NotFinite { element: self.elements[element].id.clone() }
    }

    pub fn owner(&self, element: usize) -> Option<usize> {
        self.elements[element].owner
    }

    pub fn is_finite(&self) -> bool {
        self.elements.iter().all(|e| e.distribution.is_finite())
    }

    pub fn is_atomless(&self) -> bool {
        self.elements.iter().all(|e| !e.distribution.is_finite())
    }

    /// Value realized by `draw` on `element`.
    pub fn draw_value(&self, element: usize, draw: &Draw) -> Value {
        match (draw, &self.elements[element].distribution) {
            (Draw::Atom(a), OutcomeDistribution::Finite(atoms)) => Value::Exact(atoms[*a].outcome.x.clone()),
            (Draw::Value(v), _) => Value::Float(*v),
            (Draw::Atom(_), _) => Value::Float(f64::NAN),
        }
    }

    pub fn draw_y(&self, element: usize, draw: &Draw) -> Option<Rational> {
        match (draw, &self.elements[element].distribution) {
            (Draw::Atom(a), OutcomeDistribution::Finite(atoms)) => atoms[*a].outcome.y.clone(),
            _ => None,
        }
    }

    /// Same instance with different elements (owners, laws); keeps k and flavor.
    pub fn with_elements(&self, elements: Vec<Element>) -> Self {
        Instance::new(self.k, self.flavor, self.assignment, elements)
    }

    pub fn with_flavor(&self, flavor: Flavor) -> Self {
        let mut out = self.clone();
        out.flavor = flavor;
        out
    }

    /// Sorted law fingerprints of one agent's elements.
    fn agent_law_multiset(&self, agent: usize) -> Vec<LawKey> {
        let mut keys: Vec<_> = self.by_agent[agent].iter().map(|&e| self.elements[e].distribution.law_key()).collect();
        keys.sort();
        keys
    }

    /// Every agent holds the same multiset of element laws.
    pub fn is_agent_symmetric(&self) -> bool {
        if self.k == 0 {
            return false;
        }
        let first = self.agent_law_multiset(0);
        (1..self.k).all(|i| self.agent_law_multiset(i) == first)
    }

    /// Every element has the same law and every agent the same element count.
    pub fn is_fully_symmetric(&self) -> bool {
        let Some(first) = self.elements.first() else { return false };
        let key = first.distribution.law_key();
        self.is_agent_symmetric() && self.elements.iter().all(|e| e.distribution.law_key() == key)
    }

    /// Number of joint type profiles (each finite element contributes its support size).
    pub fn profile_count(&self) -> Result<BigUint> {
        let mut n = BigUint::one();
        for (idx, e) in self.elements.iter().enumerate() {
            let s = e.distribution.support_size().ok_or_else(|| self.not_finite(idx))?;
            n *= BigUint::from(s);
        }
        Ok(n)
    }

    /// Types of one agent: atom index per own element with its probability.
    /// Type index is mixed-radix with the first element most significant.
    pub fn agent_types(&self, agent: usize, cap: u64) -> Result<Vec<(Vec<usize>, Rational)>> {
        let elems = &self.by_agent[agent];
        let mut sizes = Vec::with_capacity(elems.len());
        let mut count = BigUint::one();
        for &e in elems {
            let s = self.atoms(e)?.len();
            count *= BigUint::from(s);
            sizes.push(s);
        }
        if count > BigUint::from(cap) {
            return Err(Error::CapExceeded { what: "agent types", size: count.to_string(), cap });
        }
        let total = count.to_usize().unwrap_or(usize::MAX);
        let mut out = Vec::with_capacity(total);
        let mut digits = vec![0usize; elems.len()];
        loop {
            let p = elems
                .iter()
                .zip(&digits)
                .fold(Rational::one(), |acc, (&e, &a)| acc * &self.atoms(e).expect("finite")[a].p);
            out.push((digits.clone(), p));
            if !odometer_step(&mut digits, &sizes) {
                break;
            }
        }
        Ok(out)
    }

    /// Support sizes of an agent's elements.
    pub fn agent_radix(&self, agent: usize) -> Result<Vec<usize>> {
        self.by_agent[agent].iter().map(|&e| self.atoms(e).map(<[Atom]>::len)).collect()
    }
}

/// Advances a mixed-radix counter (last digit fastest); false after wrapping.
pub(crate) fn odometer_step(digits: &mut [usize], radix: &[usize]) -> bool {
    for i in (0..digits.len()).rev() {
        digits[i] += 1;
        if digits[i] < radix[i] {
            return true;
        }
        digits[i] = 0;
    }
    false
}

/// Mixed-radix index of `digits` (first digit most significant).
pub(crate) fn mixed_radix_index(digits: &[usize], radix: &[usize]) -> usize {
    digits.iter().zip(radix).fold(0, |acc, (&d, &r)| acc * r + d)
}

/// Checks every instance invariant and returns the violations (empty = ok).
pub fn validate_instance(instance: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    if instance.k == 0 {
        out.push(Violation("k must be at least 1".to_string()));
    }
    let mut element_ids = BTreeSet::new();
    let mut outcome_ids = BTreeSet::new();
    for e in &instance.elements {
        if !element_ids.insert(e.id.as_str()) {
            out.push(Violation(format!("duplicate element id {}", e.id)));
        }
        match e.owner {
            Some(o) if o >= instance.k => {
                out.push(Violation(format!("element {} owner {} outside 1..{}", e.id, o + 1, instance.k)))
            }
            None if instance.assignment == AssignmentMode::Fixed => {
                out.push(Violation(format!("element {} has no owner in a fixed assignment", e.id)))
            }
            _ => {}
        }
        for msg in e.distribution.violations() {
            out.push(Violation(format!("element {}: {msg}", e.id)));
        }
        if let Some(atoms) = e.distribution.atoms() {
            for a in atoms {
                if !outcome_ids.insert(a.outcome.id.as_str()) {
                    out.push(Violation(format!("duplicate outcome id {}", a.outcome.id)));
                }
                match (instance.flavor, &a.outcome.y) {
                    (Flavor::Adversarial, Some(_)) => {
                        out.push(Violation(format!("y present in adversarial flavor at {}", a.outcome.id)))
                    }
                    (Flavor::Strategic, None) => {
                        out.push(Violation(format!("y missing in strategic flavor at {}", a.outcome.id)))
                    }
                    _ => {}
                }
            }
        } else if instance.flavor == Flavor::Strategic {
            out.push(Violation(format!("element {}: strategic instances need finite supports", e.id)));
        }
    }
    out
}
