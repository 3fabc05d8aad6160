//! Ex-post incentive check for Myerson-type mechanisms: for every agent,
//! every report of the other agents, every true type and every misreport,
//! compare the agent's realized utility against truthful reporting.

use super::{allocate_myerson, Allocation, MyersonMechanism};
use crate::error::Result;
use crate::model::{enumerate_type_profiles, Draw, Instance, TypeProfile};
use crate::rational::Rational;
use num_traits::Zero;

/// A strictly profitable deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Misreport {
    pub agent: usize,
    pub truth: TypeProfile,
    pub report: TypeProfile,
    pub truthful_utility: Rational,
    pub deviation_utility: Rational,
}

fn agent_utility(instance: &Instance, agent: usize, alloc: &Allocation, truth: &TypeProfile) -> Rational {
    match alloc {
        Allocation::Accepted { agent: a, element, .. } if *a == agent => {
            instance.draw_y(*element, &truth.draws[*element]).unwrap_or_else(Rational::zero)
        }
        _ => Rational::zero(),
    }
}

/// Every strictly profitable single-agent misreport, up to `limit` of them.
pub fn find_profitable_misreports(
    mech: &MyersonMechanism,
    instance: &Instance,
    cap: u64,
    limit: usize,
) -> Result<Vec<Misreport>> {
    let profiles = enumerate_type_profiles(instance, cap)?;
    let mut found = Vec::new();
    for agent in 0..instance.k() {
        let own = instance.agent_elements(agent);
        let own_types = instance.agent_types(agent, cap)?;
        for (truth, _) in &profiles {
            let honest = allocate_myerson(mech, instance, truth, truth)?;
            let honest_u = agent_utility(instance, agent, &honest, truth);
            for (lie, _) in &own_types {
                let mut report = truth.clone();
                for (&e, &a) in own.iter().zip(lie) {
                    report.draws[e] = Draw::Atom(a);
                }
                if report == *truth {
                    continue;
                }
                let alloc = allocate_myerson(mech, instance, &report, truth)?;
                let u = agent_utility(instance, agent, &alloc, truth);
                if u > honest_u {
                    found.push(Misreport {
                        agent,
                        truth: truth.clone(),
                        report,
                        truthful_utility: honest_u.clone(),
                        deviation_utility: u,
                    });
                    if found.len() >= limit {
                        return Ok(found);
                    }
                }
            }
        }
    }
    Ok(found)
}
