//! Deterministic parallel Monte Carlo.
//!
//! Samples are split into fixed-size chunks; chunk `c` draws from a ChaCha8
//! stream seeded by `(seed, c)` and chunk statistics are merged in chunk
//! order, so results do not depend on the number of worker threads.

use crate::agents::{own_type_index, Strategy, StrategyProfile};
use crate::error::{Error, Result};
use crate::mechanisms::{allocate_myerson, Action, Mechanism, ProposalRule, ThresholdMode};
use crate::model::{Draw, Instance, OutcomeDistribution, TypeProfile};
use crate::rational::to_f64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const CHUNK: u64 = 16_384;

/// Statistics of a sample taken in order.
pub(crate) fn sample_stats(values: &[f64]) -> McStats {
    let mut m = Moments::default();
    for &v in values {
        m.push(v);
    }
    m.stats()
}

/// Mean and spread of a sample.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct McStats {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64) * (o.n as f64) / n as f64,
        }
    }

    fn stats(self) -> McStats {
        let stderr =
            if self.n > 1 { (self.m2.max(0.0) / (self.n - 1) as f64).sqrt() / (self.n as f64).sqrt() } else { 0.0 };
        McStats { estimate: self.mean, stderr, samples: self.n }
    }
}

/// Per-element sampler with precomputed cumulative masses.
enum ElemSampler {
    Finite { cum: Vec<f64> },
    Atomless(OutcomeDistribution),
}

impl ElemSampler {
    fn draw(&self, rng: &mut ChaCha8Rng) -> Draw {
        let u: f64 = rng.random();
        match self {
            ElemSampler::Finite { cum } => Draw::Atom(cum.partition_point(|&c| c <= u).min(cum.len() - 1)),
            ElemSampler::Atomless(d) => Draw::Value(d.quantile(u)),
        }
    }
}

/// Instance data flattened to floats for fast per-sample evaluation.
struct Prepared<'a> {
    instance: &'a Instance,
    samplers: Vec<ElemSampler>,
    atom_x: Vec<Vec<f64>>,
}

impl<'a> Prepared<'a> {
    fn new(instance: &'a Instance) -> Self {
        let mut samplers = Vec::new();
        let mut atom_x = Vec::new();
        for el in instance.elements() {
            match el.distribution.atoms() {
                Some(atoms) => {
                    let mut acc = 0.0;
                    samplers.push(ElemSampler::Finite {
                        cum: atoms
                            .iter()
                            .map(|a| {
                                acc += to_f64(&a.p);
                                acc
                            })
                            .collect(),
                    });
                    atom_x.push(atoms.iter().map(|a| to_f64(&a.outcome.x)).collect());
                }
                None => {
                    samplers.push(ElemSampler::Atomless(el.distribution.clone()));
                    atom_x.push(Vec::new());
                }
            }
        }
        Prepared { instance, samplers, atom_x }
    }

    fn value(&self, e: usize, d: &Draw) -> f64 {
        match d {
            Draw::Atom(a) => self.atom_x[e][*a],
            Draw::Value(v) => *v,
        }
    }

    fn fill(&self, rng: &mut ChaCha8Rng, draws: &mut [Draw]) {
        for (d, s) in draws.iter_mut().zip(&self.samplers) {
            *d = s.draw(rng);
        }
    }
}

/// Acceptance test specialized to floats where the mechanism allows it.
struct Acceptor<'a> {
    rule: &'a dyn ProposalRule,
    /// Per element: per-atom verdict for finite laws, float threshold otherwise.
    atoms: Vec<Option<Vec<bool>>>,
    thresholds: Option<Vec<(f64, bool)>>,
}

impl<'a> Acceptor<'a> {
    fn new(instance: &Instance, mech: &'a Mechanism) -> Option<Self> {
        let rule = mech.proposal_rule()?;
        let atoms = (0..instance.elements().len())
            .map(|e| {
                instance
                    .element(e)
                    .distribution
                    .atoms()
                    .map(|a| (0..a.len()).map(|i| rule.accepts(instance, e, &Draw::Atom(i))).collect())
            })
            .collect();
        let thresholds = match mech {
            Mechanism::Threshold(t) => {
                Some(t.rules.iter().map(|r| (to_f64(&r.value), r.mode == ThresholdMode::Strict)).collect())
            }
            _ => None,
        };
        Some(Acceptor { rule, atoms, thresholds })
    }

    fn accepts(&self, instance: &Instance, e: usize, d: &Draw) -> bool {
        match (d, &self.atoms[e], &self.thresholds) {
            (Draw::Atom(a), Some(table), _) => table[*a],
            (Draw::Value(v), _, Some(th)) => {
                let (t, strict) = th[e];
                if strict {
                    *v > t
                } else {
                    *v >= t
                }
            }
            _ => self.rule.accepts(instance, e, d),
        }
    }
}

fn sample_principal(prep: &Prepared, acc: &Acceptor, profile: &StrategyProfile, draws: &[Draw]) -> Result<f64> {
    let inst = prep.instance;
    let tie = acc.rule.tie_order();
    // (x, rank, element, claim)
    let mut best: Option<(f64, usize, usize, Draw)> = None;
    for a in 0..inst.k() {
        let own = inst.agent_elements(a);
        let action = match &profile.strategies[a] {
            Strategy::Pessimistic | Strategy::Truthful => {
                let pess = profile.strategies[a] == Strategy::Pessimistic;
                let mut pick: Option<(f64, usize, usize)> = None;
                for &e in own {
                    if !acc.accepts(inst, e, &draws[e]) {
                        continue;
                    }
                    let x = prep.value(e, &draws[e]);
                    let rank = if pess { e } else { tie.rank(e) };
                    let better = match pick {
                        None => true,
                        Some((px, pr, _)) => {
                            if pess {
                                x < px || (x == px && rank < pr)
                            } else {
                                x > px || (x == px && rank < pr)
                            }
                        }
                    };
                    if better {
                        pick = Some((x, rank, e));
                    }
                }
                match pick {
                    Some((_, _, e)) => Action::Propose { element: e, claim: draws[e] },
                    None => Action::Abstain,
                }
            }
            Strategy::Table(t) => {
                let mine: Vec<Draw> = own.iter().map(|&e| draws[e]).collect();
                *t.get(own_type_index(inst, a, &mine)?)
                    .ok_or_else(|| Error::Invalid("strategy table too short".into()))?
            }
        };
        let Action::Propose { element, claim } = action else { continue };
        if !acc.accepts(inst, element, &claim) {
            continue;
        }
        let x = prep.value(element, &claim);
        let rank = tie.rank(element);
        if best.is_none_or(|(bx, br, ..)| x > bx || (x == bx && rank < br)) {
            best = Some((x, rank, element, claim));
        }
    }
    Ok(match best {
        Some((x, _, element, claim)) if draws[element] == claim => x,
        _ => 0.0,
    })
}

fn run_chunks<F>(samples: u64, seed: u64, per_chunk: F) -> Result<McStats>
where
    F: Fn(&mut ChaCha8Rng, u64) -> Result<Moments> + Sync,
{
    if samples == 0 {
        return Err(Error::InvalidRange("at least one sample is required".into()));
    }
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let n = CHUNK.min(samples - c * CHUNK);
            per_chunk(&mut rng, n)
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().fold(Moments::default(), Moments::merge).stats())
}

/// Sample mean of the principal's realized utility.
pub fn mc_expected_principal(
    instance: &Instance,
    mech: &Mechanism,
    profile: &StrategyProfile,
    samples: u64,
    seed: u64,
) -> Result<McStats> {
    let prep = Prepared::new(instance);
    let n = instance.elements().len();
    match mech {
        Mechanism::Myerson(m) => {
            if !profile.is_truthful() {
                return Err(Error::Invalid("Myerson-type mechanisms are evaluated under truthful reports".into()));
            }
            run_chunks(samples, seed, |rng, count| {
                let mut mo = Moments::default();
                let mut t = TypeProfile { draws: vec![Draw::Atom(0); n] };
                for _ in 0..count {
                    prep.fill(rng, &mut t.draws);
                    let alloc = allocate_myerson(m, instance, &t, &t)?;
                    mo.push(alloc.principal_value(instance).to_f64());
                }
                Ok(mo)
            })
        }
        _ => {
            let acc = Acceptor::new(instance, mech).expect("single-proposal family");
            run_chunks(samples, seed, |rng, count| {
                let mut mo = Moments::default();
                let mut draws = vec![Draw::Atom(0); n];
                for _ in 0..count {
                    prep.fill(rng, &mut draws);
                    mo.push(sample_principal(&prep, &acc, profile, &draws)?);
                }
                Ok(mo)
            })
        }
    }
}

/// Sample mean of the largest realized value.
pub fn mc_expected_opt(instance: &Instance, samples: u64, seed: u64) -> Result<McStats> {
    let prep = Prepared::new(instance);
    let n = instance.elements().len();
    run_chunks(samples, seed, |rng, count| {
        let mut mo = Moments::default();
        let mut draws = vec![Draw::Atom(0); n];
        for _ in 0..count {
            prep.fill(rng, &mut draws);
            let best = draws.iter().enumerate().map(|(e, d)| prep.value(e, d)).fold(0.0f64, f64::max);
            mo.push(best);
        }
        Ok(mo)
    })
}
