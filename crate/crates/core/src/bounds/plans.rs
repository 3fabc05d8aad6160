use super::solve_p;
use crate::agents::{Strategy, StrategyProfile};
use crate::engine::{exact_expected_opt, exact_expected_principal};
use crate::error::{Error, Result};
use crate::mechanisms::{Mechanism, ThresholdMechanism, ThresholdMode, ThresholdRule};
use crate::model::{max_cdf, max_cdf_exact, quantile_max, Instance};
use crate::rational::{serde_rational, to_f64, Rational};
use serde::Serialize;

/// Threshold modes, either one per agent or one per element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanModes {
    PerAgent(Vec<ThresholdMode>),
    PerElement(Vec<ThresholdMode>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Atomless,
    AtomSplit {
        #[serde(with = "serde_rational")]
        x_prime: Rational,
        phi: f64,
        strict_agents: usize,
    },
    Shuffled {
        #[serde(skip_serializing_if = "Option::is_none", with = "serde_rational::option")]
        x_prime: Option<Rational>,
        #[serde(skip_serializing_if = "Option::is_none")]
        phi: Option<f64>,
    },
}

/// A common threshold `t` with weak/strict modes, built to guarantee the
/// approximation factor `p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdPlan {
    pub k: usize,
    pub p: f64,
    /// `1 − p` (shuffled plans only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(with = "serde_rational")]
    pub t: Rational,
    pub modes: PlanModes,
    pub provenance: Provenance,
}

impl ThresholdPlan {
    /// The plan as a threshold mechanism on `instance`.
    pub fn mechanism(&self, instance: &Instance) -> Result<ThresholdMechanism> {
        let n = instance.elements().len();
        let rule = |mode: ThresholdMode| ThresholdRule { value: self.t.clone(), mode };
        let rules = match &self.modes {
            PlanModes::PerAgent(modes) => {
                if modes.len() != instance.k() {
                    return Err(Error::Invalid("plan has a different number of agents".into()));
                }
                (0..n)
                    .map(|e| {
                        let owner = instance
                            .owner(e)
                            .ok_or_else(|| Error::Invalid("per-agent plan on an unassigned element".into()))?;
                        Ok(rule(modes[owner]))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            PlanModes::PerElement(modes) => {
                if modes.len() != n {
                    return Err(Error::Invalid("plan has a different number of elements".into()));
                }
                modes.iter().map(|&m| rule(m)).collect()
            }
        };
        ThresholdMechanism::new(instance, rules)
    }

    pub fn strict_count(&self) -> usize {
        let modes = match &self.modes {
            PlanModes::PerAgent(m) | PlanModes::PerElement(m) => m,
        };
        modes.iter().filter(|&&m| m == ThresholdMode::Strict).count()
    }
}

/// `φ = (p − Pr[X < x′]) / Pr[X = x′]`.
pub fn split_probability(p: f64, below: f64, at: f64) -> f64 {
    (p - below) / at
}

fn require_agent_symmetric(instance: &Instance) -> Result<()> {
    if instance.is_agent_symmetric() {
        Ok(())
    } else {
        Err(Error::NotAgentSymmetric)
    }
}

/// Common weak threshold with `Pr[X^max_i < t] = p` for atomless instances.
pub fn atomless_threshold_plan(instance: &Instance) -> Result<ThresholdPlan> {
    require_agent_symmetric(instance)?;
    if !instance.is_atomless() {
        return Err(Error::HasAtoms);
    }
    let k = instance.k();
    let p = solve_p(k);
    let t = quantile_max(instance, 0, p)?;
    Ok(ThresholdPlan {
        k,
        p,
        q: None,
        t,
        modes: PlanModes::PerAgent(vec![ThresholdMode::Weak; k]),
        provenance: Provenance::Atomless,
    })
}

/// The exact plan when a quantile exists; otherwise the `k + 1`
/// determinizations of the split at the atom `x′`, where the first `j`
/// agents get a strict threshold and the rest a weak one.
pub fn atom_split_plan(instance: &Instance) -> Result<Vec<ThresholdPlan>> {
    require_agent_symmetric(instance)?;
    let k = instance.k();
    let p = solve_p(k);
    let x_prime = match quantile_max(instance, 0, p) {
        Ok(t) => {
            return Ok(vec![ThresholdPlan {
                k,
                p,
                q: None,
                t,
                modes: PlanModes::PerAgent(vec![ThresholdMode::Weak; k]),
                provenance: Provenance::Atomless,
            }])
        }
        Err(Error::Atom { x_prime }) => x_prime,
        Err(e) => return Err(e),
    };
    let (below, upto) = if instance.is_finite() {
        (to_f64(&max_cdf_exact(instance, 0, &x_prime, true)?), to_f64(&max_cdf_exact(instance, 0, &x_prime, false)?))
    } else {
        let v = to_f64(&x_prime);
        (max_cdf(instance, 0, v, true)?, max_cdf(instance, 0, v, false)?)
    };
    let phi = split_probability(p, below, upto - below);
    Ok((0..=k)
        .map(|j| ThresholdPlan {
            k,
            p,
            q: None,
            t: x_prime.clone(),
            modes: PlanModes::PerAgent(
                (0..k).map(|i| if i < j { ThresholdMode::Strict } else { ThresholdMode::Weak }).collect(),
            ),
            provenance: Provenance::AtomSplit { x_prime: x_prime.clone(), phi, strict_agents: j },
        })
        .collect())
}

/// Exact utility of a plan under pessimistic adversarial agents.
pub fn evaluate_plan(instance: &Instance, plan: &ThresholdPlan, cap: u64) -> Result<Rational> {
    let mech = Mechanism::Threshold(plan.mechanism(instance)?);
    let profile = StrategyProfile::uniform(instance.k(), Strategy::Pessimistic);
    exact_expected_principal(instance, &mech, &profile, cap)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanEvaluation {
    pub plan: ThresholdPlan,
    #[serde(with = "serde_rational")]
    pub expected_principal: Rational,
    #[serde(with = "serde_rational")]
    pub expected_opt: Rational,
    pub ratio: f64,
    /// Utility of every candidate plan, in candidate order.
    #[serde(serialize_with = "serialize_rationals")]
    pub candidates: Vec<Rational>,
}

pub(crate) fn serialize_rationals<S: serde::Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for r in v {
        seq.serialize_element(&crate::rational::format_rational(r))?;
    }
    seq.end()
}

/// Evaluates every atom-split candidate exactly and keeps the best (fewest
/// strict agents on ties).
pub fn best_atom_split_plan(instance: &Instance, cap: u64) -> Result<PlanEvaluation> {
    let plans = atom_split_plan(instance)?;
    let candidates = plans.iter().map(|p| evaluate_plan(instance, p, cap)).collect::<Result<Vec<_>>>()?;
    let opt = exact_expected_opt(instance)?;
    if opt <= Rational::from_integer(0.into()) {
        return Err(Error::ZeroOpt);
    }
    let best = (0..plans.len()).fold(0, |b, i| if candidates[i] > candidates[b] { i } else { b });
    let value = candidates[best].clone();
    Ok(PlanEvaluation {
        plan: plans[best].clone(),
        ratio: to_f64(&(&value / &opt)),
        expected_principal: value,
        expected_opt: opt,
        candidates,
    })
}
