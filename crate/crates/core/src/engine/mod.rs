//! Evaluation of principal utility, first-best utility and delegation
//! ratios, exactly (rational arithmetic) or by Monte Carlo.

mod mc;
pub mod quadrature;

pub use crate::agents::win_probability;
pub(crate) use mc::sample_stats;
pub use mc::{mc_expected_opt, mc_expected_principal, McStats, CHUNK};

use crate::agents::bids::{expected_principal, profile_bids};
use crate::agents::StrategyProfile;
use crate::error::{Error, Result};
use crate::mechanisms::{allocate_myerson, allocate_single_proposal, Allocation, Mechanism, Proposal};
use crate::model::{pool_max_cdf_exact, Instance, TypeProfile, TypeProfiles, Value};
use crate::rational::{format_rational, to_f64, Rational};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    #[default]
    Exact,
    Mc,
}

impl EvalMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EvalMode::Exact => "exact",
            EvalMode::Mc => "mc",
        }
    }
}

/// An expectation: exact rational, deterministic numerical integral, or
/// Monte Carlo estimate.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimate {
    Exact(Rational),
    Quadrature(f64),
    Mc(McStats),
}

impl Estimate {
    pub fn value(&self) -> f64 {
        match self {
            Estimate::Exact(r) => to_f64(r),
            Estimate::Quadrature(v) => *v,
            Estimate::Mc(s) => s.estimate,
        }
    }

    pub fn stderr(&self) -> Option<f64> {
        match self {
            Estimate::Mc(s) => Some(s.stderr),
            _ => None,
        }
    }

    pub fn exact(&self) -> Option<&Rational> {
        match self {
            Estimate::Exact(r) => Some(r),
            _ => None,
        }
    }
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum EstimateJson {
    Exact { value: String, approx: f64 },
    Quadrature { value: f64 },
    Mc { estimate: f64, stderr: f64, samples: u64 },
}

impl Serialize for Estimate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Estimate::Exact(r) => EstimateJson::Exact { value: format_rational(r), approx: to_f64(r) },
            Estimate::Quadrature(v) => EstimateJson::Quadrature { value: *v },
            Estimate::Mc(m) => EstimateJson::Mc { estimate: m.estimate, stderr: m.stderr, samples: m.samples },
        }
        .serialize(s)
    }
}

/// Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
}

fn check_profile(mech: &Mechanism, profile: &StrategyProfile, instance: &Instance) -> Result<()> {
    if profile.strategies.len() != instance.k() {
        return Err(Error::Invalid("the strategy profile must cover every agent".into()));
    }
    if matches!(mech, Mechanism::Myerson(_)) && !profile.is_truthful() {
        return Err(Error::Invalid("Myerson-type mechanisms are evaluated under truthful reports".into()));
    }
    Ok(())
}

/// Outcome of the mechanism at one joint type when agents follow `profile`.
pub fn allocate(
    instance: &Instance,
    mech: &Mechanism,
    profile: &StrategyProfile,
    truth: &TypeProfile,
) -> Result<Allocation> {
    check_profile(mech, profile, instance)?;
    match mech {
        Mechanism::Myerson(m) => allocate_myerson(m, instance, truth, truth),
        _ => {
            let rule = mech.proposal_rule().expect("single-proposal family");
            let proposals: Vec<Proposal> = profile
                .actions(instance, rule, truth)?
                .into_iter()
                .enumerate()
                .map(|(agent, action)| Proposal { agent, action })
                .collect();
            allocate_single_proposal(rule, instance, &proposals, truth)
        }
    }
}

/// The allocation at every joint type, with its probability.
pub fn allocation_table(
    instance: &Instance,
    mech: &Mechanism,
    profile: &StrategyProfile,
    cap: u64,
) -> Result<Vec<(TypeProfile, Rational, Allocation)>> {
    TypeProfiles::new(instance, cap)?
        .map(|(atoms, p)| {
            let t = TypeProfile::from_atoms(&atoms);
            let a = allocate(instance, mech, profile, &t)?;
            Ok((t, p, a))
        })
        .collect()
}

fn exact_value(v: Value) -> Rational {
    match v {
        Value::Exact(r) => r,
        Value::Float(_) => unreachable!("finite instances realize exact values"),
    }
}

/// Expected principal utility by summing over every joint type.
pub fn enumerated_expected_principal(
    instance: &Instance,
    mech: &Mechanism,
    profile: &StrategyProfile,
    cap: u64,
) -> Result<Rational> {
    let mut total = Rational::zero();
    for (atoms, p) in TypeProfiles::new(instance, cap)? {
        let t = TypeProfile::from_atoms(&atoms);
        let alloc = allocate(instance, mech, profile, &t)?;
        if alloc.is_accepted() {
            total += p * exact_value(alloc.principal_value(instance));
        }
    }
    Ok(total)
}

/// Exact expected principal utility. Single-proposal mechanisms factor
/// over agents (`cap` bounds each agent's type count); Myerson-type
/// mechanisms enumerate joint types (`cap` bounds their number).
pub fn exact_expected_principal(
    instance: &Instance,
    mech: &Mechanism,
    profile: &StrategyProfile,
    cap: u64,
) -> Result<Rational> {
    check_profile(mech, profile, instance)?;
    match mech.proposal_rule() {
        Some(rule) => Ok(expected_principal(&profile_bids(instance, rule, profile, cap)?)),
        None => enumerated_expected_principal(instance, mech, profile, cap),
    }
}

/// Exact `E[max_e x(V(e))]` for finite instances from the CDF of the maximum.
pub fn exact_expected_opt(instance: &Instance) -> Result<Rational> {
    let mut values: Vec<Rational> = Vec::new();
    for e in 0..instance.elements().len() {
        values.extend(instance.atoms(e)?.iter().map(|a| a.outcome.x.clone()));
    }
    values.sort();
    values.dedup();
    let mut total = Rational::zero();
    for v in values {
        let mass = pool_max_cdf_exact(instance, &v, false)? - pool_max_cdf_exact(instance, &v, true)?;
        total += mass * v;
    }
    Ok(total)
}

/// `E[Opt]`: exact for finite instances, adaptive quadrature otherwise, or
/// a Monte Carlo estimate when `mc` is given.
pub fn expected_opt(instance: &Instance, mode: EvalMode, mc: Option<McConfig>) -> Result<Estimate> {
    match (mode, mc) {
        (EvalMode::Mc, Some(c)) => Ok(Estimate::Mc(mc_expected_opt(instance, c.samples, c.seed)?)),
        (EvalMode::Mc, None) => Err(Error::Invalid("Monte Carlo needs a sample count and seed".into())),
        (EvalMode::Exact, _) if instance.is_finite() => Ok(Estimate::Exact(exact_expected_opt(instance)?)),
        (EvalMode::Exact, _) => Ok(Estimate::Quadrature(quadrature::expected_max(instance))),
    }
}

/// Expected principal utility against first-best.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub mode: EvalMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    pub expected_principal: Estimate,
    pub expected_opt: Estimate,
    pub ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none", with = "crate::rational::serde_rational::option")]
    pub ratio_exact: Option<Rational>,
    /// Standard error of the ratio when only the numerator is random.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_stderr: Option<f64>,
}

pub const CSV_HEADER: &str = "instance,mechanism,mode,seed,samples,E_principal,stderr,E_opt,ratio";

impl EvaluationReport {
    pub fn csv_row(&self, instance: &str, mechanism: &str) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        format!(
            "{instance},{mechanism},{},{},{},{},{},{},{}",
            self.mode.as_str(),
            opt(self.seed.map(|s| s.to_string())),
            opt(self.samples.map(|s| s.to_string())),
            self.expected_principal.value(),
            opt(self.expected_principal.stderr().map(|s| s.to_string())),
            self.expected_opt.value(),
            self.ratio
        )
    }
}

/// Assembles the report. In Monte Carlo mode only the principal's utility
/// is sampled; `E[Opt]` stays exact (finite) or is integrated numerically.
pub fn delegation_ratio(
    instance: &Instance,
    mech: &Mechanism,
    profile: &StrategyProfile,
    mode: EvalMode,
    mc: Option<McConfig>,
    cap: u64,
) -> Result<EvaluationReport> {
    check_profile(mech, profile, instance)?;
    let opt = expected_opt(instance, EvalMode::Exact, None)?;
    if opt.value() <= 0.0 {
        return Err(Error::ZeroOpt);
    }
    match mode {
        EvalMode::Exact => {
            let e = exact_expected_principal(instance, mech, profile, cap)?;
            let ratio_exact = opt.exact().map(|o| &e / o);
            let ratio = ratio_exact.as_ref().map_or_else(|| to_f64(&e) / opt.value(), to_f64);
            Ok(EvaluationReport {
                mode,
                seed: None,
                samples: None,
                expected_principal: Estimate::Exact(e),
                expected_opt: opt,
                ratio,
                ratio_exact,
                ratio_stderr: None,
            })
        }
        EvalMode::Mc => {
            let c = mc.ok_or_else(|| Error::Invalid("Monte Carlo needs a sample count and seed".into()))?;
            let s = mc_expected_principal(instance, mech, profile, c.samples, c.seed)?;
            Ok(EvaluationReport {
                mode,
                seed: Some(c.seed),
                samples: Some(c.samples),
                ratio: s.estimate / opt.value(),
                ratio_stderr: Some(s.stderr / opt.value()),
                expected_principal: Estimate::Mc(s),
                expected_opt: opt,
                ratio_exact: None,
            })
        }
    }
}
