use crate::rational::{to_f64, Rational};
use num_traits::{One, Signed, Zero};
use rand::Rng;
use std::cmp::Ordering;

/// A realized value: either an exact rational from a finite support or a
/// float drawn from an atomless law.
#[derive(Debug, Clone)]
pub enum Value {
    Exact(Rational),
    Float(f64),
}

impl Value {
    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Exact(r) => to_f64(r),
            Value::Float(f) => *f,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Value::Exact(a), Value::Exact(b)) => Some(a.cmp(b)),
            _ => self.to_f64().partial_cmp(&other.to_f64()),
        }
    }
}

/// One possible realization of an element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub id: String,
    /// Principal's utility.
    pub x: Rational,
    /// Agent's utility; absent in adversarial instances.
    pub y: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub outcome: Outcome,
    pub p: Rational,
}

/// Law of a single element.
///
/// Atomless laws realize the outcome `x = value` and carry no agent utility.
#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeDistribution {
    Finite(Vec<Atom>),
    Uniform {
        lo: f64,
        hi: f64,
    },
    Exponential {
        rate: f64,
    },
    /// Breakpoints `(value, cdf)`; cdf runs from 0 to 1, linear in between.
    PiecewiseLinear {
        points: Vec<(f64, f64)>,
    },
}

/// Canonical, totally ordered fingerprint of a law, used by the symmetry
/// predicates. Floats are compared by bit pattern.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum LawKey {
    Finite(Vec<(Rational, Option<Rational>, Rational)>),
    Uniform(u64, u64),
    Exponential(u64),
    PiecewiseLinear(Vec<(u64, u64)>),
}

impl OutcomeDistribution {
    /// Finite support from `(x, y, p)` triples; ids are filled in when the
    /// element is placed into an instance.
    pub fn finite(atoms: impl IntoIterator<Item = (Rational, Option<Rational>, Rational)>) -> Self {
        OutcomeDistribution::Finite(
            atoms.into_iter().map(|(x, y, p)| Atom { outcome: Outcome { id: String::new(), x, y }, p }).collect(),
        )
    }

    /// A point mass at `x`.
    pub fn point(x: Rational) -> Self {
        Self::finite([(x, None, Rational::one())])
    }

    pub fn atoms(&self) -> Option<&[Atom]> {
        match self {
            OutcomeDistribution::Finite(atoms) => Some(atoms),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, OutcomeDistribution::Finite(_))
    }

    pub fn support_size(&self) -> Option<usize> {
        self.atoms().map(<[Atom]>::len)
    }

    pub fn law_key(&self) -> LawKey {
        match self {
            OutcomeDistribution::Finite(atoms) => {
                let mut v: Vec<_> =
                    atoms.iter().map(|a| (a.outcome.x.clone(), a.outcome.y.clone(), a.p.clone())).collect();
                v.sort();
                LawKey::Finite(v)
            }
            OutcomeDistribution::Uniform { lo, hi } => LawKey::Uniform(lo.to_bits(), hi.to_bits()),
            OutcomeDistribution::Exponential { rate } => LawKey::Exponential(rate.to_bits()),
            OutcomeDistribution::PiecewiseLinear { points } => {
                LawKey::PiecewiseLinear(points.iter().map(|(v, c)| (v.to_bits(), c.to_bits())).collect())
            }
        }
    }

    /// Same law ignoring agent utilities (used for analogous-instance checks).
    pub fn same_x_law(&self, other: &Self) -> bool {
        match (self.law_key(), other.law_key()) {
            (LawKey::Finite(a), LawKey::Finite(b)) => {
                let strip = |v: Vec<(Rational, Option<Rational>, Rational)>| {
                    let mut s: Vec<_> = v.into_iter().map(|(x, _, p)| (x, p)).collect();
                    s.sort();
                    s
                };
                strip(a) == strip(b)
            }
            (a, b) => a == b,
        }
    }

    /// Human-readable invariant violations.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            OutcomeDistribution::Finite(atoms) => {
                if atoms.is_empty() {
                    out.push("empty finite support".to_string());
                }
                let mut mass = Rational::zero();
                for a in atoms {
                    if !a.p.is_positive() || a.p > Rational::one() {
                        out.push(format!(
                            "probability {} of {} outside (0,1]",
                            crate::rational::format_rational(&a.p),
                            a.outcome.id
                        ));
                    }
                    if a.outcome.x.is_negative() {
                        out.push(format!("negative x at {}", a.outcome.id));
                    }
                    if a.outcome.y.as_ref().is_some_and(Signed::is_negative) {
                        out.push(format!("negative y at {}", a.outcome.id));
                    }
                    mass += &a.p;
                }
                if !atoms.is_empty() && !mass.is_one() {
                    out.push(format!("support mass {} ≠ 1", crate::rational::format_rational(&mass)));
                }
            }
            OutcomeDistribution::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    out.push(format!("uniform bounds lo={lo} hi={hi} need lo < hi"));
                }
                if *lo < 0.0 {
                    out.push("uniform support has negative values".to_string());
                }
            }
            OutcomeDistribution::Exponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    out.push(format!("exponential rate {rate} must be positive"));
                }
            }
            OutcomeDistribution::PiecewiseLinear { points } => {
                if points.len() < 2 {
                    out.push("piecewise-linear cdf needs at least two breakpoints".to_string());
                } else {
                    if points[0].1 != 0.0 || points[points.len() - 1].1 != 1.0 {
                        out.push("piecewise-linear cdf must run from 0 to 1".to_string());
                    }
                    if points.windows(2).any(|w| !(w[0].0 < w[1].0 && w[0].1 < w[1].1)) {
                        out.push("piecewise-linear cdf must be strictly increasing".to_string());
                    }
                    if points[0].0 < 0.0 {
                        out.push("piecewise-linear support has negative values".to_string());
                    }
                }
            }
        }
        out
    }

    /// `Pr[X < v]` (strict) or `Pr[X ≤ v]`.
    pub fn cdf(&self, v: f64, strict: bool) -> f64 {
        match self {
            OutcomeDistribution::Finite(atoms) => atoms
                .iter()
                .filter(|a| {
                    let x = to_f64(&a.outcome.x);
                    if strict {
                        x < v
                    } else {
                        x <= v
                    }
                })
                .map(|a| to_f64(&a.p))
                .sum::<f64>()
                .min(1.0),
            OutcomeDistribution::Uniform { lo, hi } => ((v - lo) / (hi - lo)).clamp(0.0, 1.0),
            OutcomeDistribution::Exponential { rate } => {
                if v <= 0.0 {
                    0.0
                } else {
                    -(-rate * v).exp_m1()
                }
            }
            OutcomeDistribution::PiecewiseLinear { points } => {
                let (first, last) = (points[0], points[points.len() - 1]);
                if v <= first.0 {
                    return 0.0;
                }
                if v >= last.0 {
                    return 1.0;
                }
                let i = points.partition_point(|p| p.0 <= v);
                let (a, b) = (points[i - 1], points[i]);
                a.1 + (b.1 - a.1) * (v - a.0) / (b.0 - a.0)
            }
        }
    }

    /// Exact `Pr[X < v]` / `Pr[X ≤ v]` for finite supports.
    pub fn cdf_exact(&self, v: &Rational, strict: bool) -> Option<Rational> {
        let atoms = self.atoms()?;
        Some(
            atoms
                .iter()
                .filter(|a| if strict { a.outcome.x < *v } else { a.outcome.x <= *v })
                .fold(Rational::zero(), |acc, a| acc + &a.p),
        )
    }

    /// Generalized inverse CDF: smallest `v` with `Pr[X ≤ v] ≥ u`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            OutcomeDistribution::Finite(atoms) => {
                let mut sorted: Vec<_> = atoms.iter().map(|a| (to_f64(&a.outcome.x), to_f64(&a.p))).collect();
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut acc = 0.0;
                for (x, p) in &sorted {
                    acc += p;
                    if acc >= u {
                        return *x;
                    }
                }
                sorted.last().map_or(0.0, |a| a.0)
            }
            OutcomeDistribution::Uniform { lo, hi } => lo + (hi - lo) * u,
            OutcomeDistribution::Exponential { rate } => -(-u).ln_1p() / rate,
            OutcomeDistribution::PiecewiseLinear { points } => {
                let i = points.partition_point(|p| p.1 < u).clamp(1, points.len() - 1);
                let (a, b) = (points[i - 1], points[i]);
                a.0 + (b.0 - a.0) * (u - a.1) / (b.1 - a.1)
            }
        }
    }

    /// Smallest and largest possible values (upper may be infinite).
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            OutcomeDistribution::Finite(atoms) => atoms
                .iter()
                .map(|a| to_f64(&a.outcome.x))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x))),
            OutcomeDistribution::Uniform { lo, hi } => (*lo, *hi),
            OutcomeDistribution::Exponential { .. } => (0.0, f64::INFINITY),
            OutcomeDistribution::PiecewiseLinear { points } => (points[0].0, points[points.len() - 1].0),
        }
    }

    /// Inverse-transform draw: atom index for finite laws, value otherwise.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> super::Draw {
        let u: f64 = rng.random();
        match self {
            OutcomeDistribution::Finite(atoms) => {
                let mut acc = 0.0;
                for (i, a) in atoms.iter().enumerate() {
                    acc += to_f64(&a.p);
                    if u < acc {
                        return super::Draw::Atom(i);
                    }
                }
                super::Draw::Atom(atoms.len() - 1)
            }
            _ => super::Draw::Value(self.quantile(u)),
        }
    }
}
