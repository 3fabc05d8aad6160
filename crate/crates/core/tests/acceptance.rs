//! Acceptance checks, one line per criterion. Exits nonzero if any fails.

mod common;

use delegation::agents::{
    adversarial_profile, analogous_adversarial, build_analogous_strategic, find_principal_best_equilibrium,
    AdversarialMode, Strategy, StrategyProfile,
};
use delegation::bounds::{
    agent_below_probability, asymptotic_check, atomless_threshold_plan, best_atom_split_plan,
    exhaustive_mechanism_scan, hard_instance, hard_instance_formulas, mechanism_a, mechanism_b, residual,
    sampled_shuffled_principal, shuffled_expected_opt, shuffled_expected_principal, shuffled_threshold_plan, solve_p,
    ShuffleVariant,
};
use delegation::engine::{
    allocation_table, delegation_ratio, enumerated_expected_principal, exact_expected_principal, EvalMode, McConfig,
};
use delegation::mechanisms::dsic::find_profitable_misreports;
use delegation::mechanisms::{Mechanism, MyersonMechanism, SingleProposalMechanism};
use delegation::model::{Instance, Value, DEFAULT_PROFILE_CAP};
use delegation::rational::{format_rational, pow, ratio, to_f64};
use delegation::Rational;
use num_traits::Zero;
use rand::Rng;
use std::process::ExitCode;
use std::time::Instant;

const CAP: u64 = DEFAULT_PROFILE_CAP;

type Check = Result<String, String>;

fn pessimistic(instance: &Instance) -> StrategyProfile {
    StrategyProfile::uniform(instance.k(), Strategy::Pessimistic)
}

fn exact_x(v: Value) -> Rational {
    match v {
        Value::Exact(r) => r,
        Value::Float(f) => panic!("finite instance produced a float value {f}"),
    }
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let mut prev = 0.0;
    let mut worst = 0.0f64;
    for k in 1..=10_000 {
        let p = solve_p(k);
        let r = residual(k, p).abs();
        worst = worst.max(r);
        if r > 1e-12 {
            return Err(format!("k={k}: |residual| = {r:e}"));
        }
        if p <= prev {
            return Err(format!("p({k}) = {p} does not exceed p({}) = {prev}", k - 1));
        }
        prev = p;
    }
    let elapsed = start.elapsed().as_secs_f64();
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    if (solve_p(1) - 0.5).abs() > 1e-12 || (solve_p(2) - golden).abs() > 1e-12 {
        return Err("p(1) or p(2) off its closed form".into());
    }
    if elapsed >= 5.0 {
        return Err(format!("took {elapsed:.2}s"));
    }
    Ok(format!("k=1..10000, max |residual| {worst:e}, increasing, {elapsed:.3}s"))
}

fn criterion_2() -> Check {
    let samples = 1_000_000;
    let mut worst = f64::INFINITY;
    for seed in 0..50u64 {
        let mut rng = common::rng(2000 + seed);
        let k = rng.random_range(2..=5);
        let m = rng.random_range(1..=3);
        let inst = common::agent_symmetric_atomless(&mut rng, k, m);
        let plan = atomless_threshold_plan(&inst).map_err(|e| e.to_string())?;
        let mech = Mechanism::Threshold(plan.mechanism(&inst).map_err(|e| e.to_string())?);
        let report =
            delegation_ratio(&inst, &mech, &pessimistic(&inst), EvalMode::Mc, Some(McConfig { samples, seed }), CAP)
                .map_err(|e| e.to_string())?;
        let se = report.ratio_stderr.unwrap_or(0.0);
        let slack = report.ratio - (plan.p - 3.0 * se - 0.005);
        worst = worst.min(report.ratio - plan.p);
        if slack < 0.0 {
            return Err(format!(
                "seed {seed} (k={k}, m={m}): ratio {} < p {} - 3·{se:e} - 0.005",
                report.ratio, plan.p
            ));
        }
    }
    Ok(format!("50 atomless instances, 10^6 samples each, min ratio - p = {worst:.5}"))
}

fn criterion_3() -> Check {
    let mut worst = f64::INFINITY;
    for seed in 0..100u64 {
        let mut rng = common::rng(3000 + seed);
        let k = rng.random_range(2..=4);
        let m = rng.random_range(1..=2);
        let inst = common::agent_symmetric_finite(&mut rng, k, m, 3);
        if common::brute_opt(&inst).is_zero() {
            continue;
        }
        let best = best_atom_split_plan(&inst, CAP).map_err(|e| e.to_string())?;
        let mech = best.plan.mechanism(&inst).map_err(|e| e.to_string())?;
        let oracle = common::brute_pessimistic(&inst, &mech.rules);
        if oracle != best.expected_principal {
            return Err(format!(
                "seed {seed}: plan value {} but brute force gives {}",
                format_rational(&best.expected_principal),
                format_rational(&oracle)
            ));
        }
        let r = to_f64(&best.expected_principal) / to_f64(&common::brute_opt(&inst));
        worst = worst.min(r - best.plan.p);
        if r < best.plan.p - 1e-10 {
            return Err(format!("seed {seed}: ratio {r} < p {}", best.plan.p));
        }
    }
    Ok(format!("100 finite instances, best plan min ratio - p = {worst:.5}"))
}

fn criterion_4() -> Check {
    let mut worst_gap: f64 = 0.0;
    for k in 2..=6 {
        for eps in [ratio(1, 2), ratio(1, 10), ratio(1, 100)] {
            let tag = format!("k={k}, ε={}", format_rational(&eps));
            let f = hard_instance_formulas(k, &eps).map_err(|e| e.to_string())?;
            let inst = hard_instance(k, &eps).map_err(|e| e.to_string())?;
            let a = SingleProposalMechanism::from_sets(&inst, &mechanism_a(&inst));
            let b = SingleProposalMechanism::from_sets(&inst, &mechanism_b(&inst));
            let prof = pessimistic(&inst);
            let (ma, mb) = (Mechanism::SingleProposal(a), Mechanism::SingleProposal(b));
            let ea = exact_expected_principal(&inst, &ma, &prof, CAP).map_err(|e| e.to_string())?;
            let eb = exact_expected_principal(&inst, &mb, &prof, CAP).map_err(|e| e.to_string())?;
            let enum_a = enumerated_expected_principal(&inst, &ma, &prof, CAP).map_err(|e| e.to_string())?;
            let enum_b = enumerated_expected_principal(&inst, &mb, &prof, CAP).map_err(|e| e.to_string())?;
            let sets_a = mechanism_a(&inst);
            let sets_b = mechanism_b(&inst);
            let oracle_a = common::brute_pessimistic_by(&inst, |e, atom| sets_a[e].contains(&atom));
            let oracle_b = common::brute_pessimistic_by(&inst, |e, atom| sets_b[e].contains(&atom));
            if ea != eb
                || ea != f.e_a
                || eb != f.e_b
                || enum_a != ea
                || enum_b != eb
                || oracle_a != ea
                || oracle_b != eb
            {
                return Err(format!("{tag}: E_A={} E_B={} disagree", format_rational(&ea), format_rational(&eb)));
            }
            if common::brute_opt(&inst) != f.e_opt {
                return Err(format!("{tag}: E_opt formula {} disagrees with enumeration", format_rational(&f.e_opt)));
            }
            if k == 2 {
                let scan = exhaustive_mechanism_scan(&inst, CAP).map_err(|e| e.to_string())?;
                if scan.best_utility != ea {
                    return Err(format!("{tag}: scan optimum {} ≠ E_A", format_rational(&scan.best_utility)));
                }
            }
            if eps <= ratio(1, 10) {
                let gap = (f.ratio - to_f64(&f.limit)).abs();
                worst_gap = worst_gap.max(gap / to_f64(&eps));
                if gap > 2.0 * to_f64(&eps) {
                    return Err(format!("{tag}: |ratio - limit| = {gap}"));
                }
            }
        }
    }
    Ok(format!(
        "k=2..6 × ε∈{{1/2,1/10,1/100}}: E_A=E_B=enumeration, k=2 scan optimal, max |ratio-limit|/ε = {worst_gap:.3}"
    ))
}

fn criterion_5() -> Check {
    let mut total_checked = 0usize;
    for seed in 0..100u64 {
        let mut rng = common::rng(5000 + seed);
        let k = rng.random_range(2..=3);
        let inst = common::strategic_instance(&mut rng, k, 2, 3);
        let phi = (0..inst.elements().len()).map(|_| common::monotone_phi(&mut rng)).collect();
        let mech = MyersonMechanism::new(&inst, phi).map_err(|e| e.to_string())?;
        let found = find_profitable_misreports(&mech, &inst, CAP, 1).map_err(|e| e.to_string())?;
        if let Some(m) = found.first() {
            return Err(format!(
                "seed {seed}: agent {} gains {} over {}",
                m.agent,
                format_rational(&m.deviation_utility),
                format_rational(&m.truthful_utility)
            ));
        }
        total_checked += 1;
    }
    Ok(format!("{total_checked} Myerson-type instances, no profitable misreport"))
}

fn criterion_6() -> Check {
    for seed in 0..25u64 {
        let mut rng = common::rng(6000 + seed);
        let k = rng.random_range(2..=3);
        let m = rng.random_range(1..=2);
        let inst = common::fully_symmetric_finite(&mut rng, k, m, 3);
        let mech = common::threshold_mechanism(&mut rng, &inst, true);
        let strategic = build_analogous_strategic(&inst).map_err(|e| e.to_string())?;
        let eq = find_principal_best_equilibrium(&strategic, &mech, CAP).map_err(|e| e.to_string())?;
        let mech = Mechanism::Threshold(mech);
        let adv = adversarial_profile(&inst, mech.proposal_rule().unwrap(), AdversarialMode::Pessimistic, CAP)
            .map_err(|e| e.to_string())?;
        let table_s = allocation_table(&strategic, &mech, &eq.profile, CAP).map_err(|e| e.to_string())?;
        let table_a = allocation_table(&inst, &mech, &adv, CAP).map_err(|e| e.to_string())?;
        let diff = table_s.iter().zip(&table_a).filter(|(s, a)| s.2 != a.2).count();
        if diff > 0 {
            return Err(format!("(a) seed {seed}: {diff} of {} joint types differ", table_a.len()));
        }
    }
    // Mechanisms that may accept everything: compare with the constrained table.
    for seed in 0..10u64 {
        let mut rng = common::rng(6300 + seed);
        let k = rng.random_range(2..=3);
        let m = rng.random_range(1..=2);
        let inst = common::fully_symmetric_finite(&mut rng, k, m, 3);
        let mech = common::threshold_mechanism(&mut rng, &inst, false);
        let strategic = build_analogous_strategic(&inst).map_err(|e| e.to_string())?;
        let eq = find_principal_best_equilibrium(&strategic, &mech, CAP).map_err(|e| e.to_string())?;
        let mech = Mechanism::Threshold(mech);
        let adv = adversarial_profile(&inst, mech.proposal_rule().unwrap(), AdversarialMode::Constrained, CAP)
            .map_err(|e| e.to_string())?;
        let table_s = allocation_table(&strategic, &mech, &eq.profile, CAP).map_err(|e| e.to_string())?;
        let table_a = allocation_table(&inst, &mech, &adv, CAP).map_err(|e| e.to_string())?;
        if table_s.iter().zip(&table_a).any(|(s, a)| s.2 != a.2) {
            return Err(format!("(a) seed {seed}: equilibrium differs from the constrained table"));
        }
    }
    let mut types = 0usize;
    for seed in 0..25u64 {
        let mut rng = common::rng(6500 + seed);
        let k = rng.random_range(2..=3);
        let strategic = common::strategic_instance(&mut rng, k, 2, 3);
        let mech = common::threshold_mechanism(&mut rng, &strategic, false);
        let eq = find_principal_best_equilibrium(&strategic, &mech, CAP).map_err(|e| e.to_string())?;
        let adversarial = analogous_adversarial(&strategic);
        let mech = Mechanism::Threshold(mech);
        let table_s = allocation_table(&strategic, &mech, &eq.profile, CAP).map_err(|e| e.to_string())?;
        let table_a =
            allocation_table(&adversarial, &mech, &pessimistic(&adversarial), CAP).map_err(|e| e.to_string())?;
        for ((t, _, s), (_, _, a)) in table_s.iter().zip(&table_a) {
            let xs = exact_x(s.principal_value(&strategic));
            let xa = exact_x(a.principal_value(&adversarial));
            if xs < xa {
                return Err(format!("(b) seed {seed}: at {t:?} strategic {} < adversarial {}", xs, xa));
            }
            types += 1;
        }
    }
    Ok(format!("(a) 25 analogous instances match the pessimistic table, 10 more the constrained one; (b) {types} joint types over 25 strategic instances"))
}

/// Exact expectation of a plan over every owner vector, uniformly weighted.
fn brute_shuffled(pool: &Instance, rules: &[delegation::mechanisms::ThresholdRule], balanced: bool) -> Rational {
    let n = pool.elements().len();
    let k = pool.k();
    let vectors: Vec<_> = common::all_owner_vectors(n, k)
        .into_iter()
        .filter(|v| !balanced || (0..k).all(|a| v.iter().filter(|&&o| o == a).count() * k == n))
        .collect();
    let count = vectors.len() as i64;
    let mut total = Rational::zero();
    for v in &vectors {
        let inst = common::assign(pool, v);
        total += common::brute_pessimistic(&inst, rules);
    }
    total / Rational::from_integer(count.into())
}

fn criterion_7() -> Check {
    let mut pools = 0usize;
    let mut balanced = 0usize;
    let mut worst = f64::INFINITY;
    for seed in 0..30u64 {
        let mut rng = common::rng(7000 + seed);
        let k = rng.random_range(1..=3);
        let n = rng.random_range(1..=8);
        let pool = common::pool(&mut rng, k, n, 2);
        let opt = shuffled_expected_opt(&pool).map_err(|e| e.to_string())?;
        if opt.is_zero() {
            continue;
        }
        let mut variants = vec![ShuffleVariant::Independent];
        if n % k == 0 {
            variants.push(ShuffleVariant::Balanced);
        }
        for variant in variants {
            let (plan, value) = shuffled_threshold_plan(&pool, variant, CAP).map_err(|e| e.to_string())?;
            let rules = plan.element_rules();
            let value = match value {
                Some(v) => v,
                None => shuffled_expected_principal(&pool, &rules, variant, CAP).map_err(|e| e.to_string())?,
            };
            let oracle = brute_shuffled(&pool, &rules, variant == ShuffleVariant::Balanced);
            if oracle != value {
                return Err(format!(
                    "seed {seed} {variant:?}: value {} but all k^n assignments give {}",
                    format_rational(&value),
                    format_rational(&oracle)
                ));
            }
            let r = to_f64(&value) / to_f64(&opt);
            worst = worst.min(r - plan.p);
            if r < plan.p - 1e-10 {
                return Err(format!("seed {seed} {variant:?} (k={k}, n={n}): ratio {r} < p {}", plan.p));
            }
            if variant == ShuffleVariant::Independent {
                let (below, q) = agent_below_probability(&pool, &rules).map_err(|e| e.to_string())?;
                if pow(&below, k) < q {
                    return Err(format!("seed {seed}: per-agent bound fails"));
                }
                pools += 1;
            } else {
                balanced += 1;
            }
        }
    }
    Ok(format!("{pools} pools (n≤8, k≤3) and {balanced} balanced runs ≥ p·Opt, min ratio - p = {worst:.5}"))
}

fn criterion_8() -> Check {
    for k in 2..=1000 {
        let r = asymptotic_check(k).map_err(|e| e.to_string())?;
        if !r.g_bracket || !r.p_bracket {
            return Err(format!(
                "k={k}: g(r⁻)={} g(r⁺)={} p={} in [{}, {}]",
                r.g_minus, r.g_plus, r.p, r.lower, r.upper
            ));
        }
    }
    let r = asymptotic_check(10).map_err(|e| e.to_string())?;
    if (r.g_minus + 0.312).abs() > 1e-3 || (r.g_plus - 0.393).abs() > 1e-3 {
        return Err(format!("k=10: g(r⁻)={} g(r⁺)={}", r.g_minus, r.g_plus));
    }
    Ok("k=2..1000: g(r⁻) < 0 < g(r⁺) and 1-r⁻/k < p < 1-r⁺/k".into())
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn criterion_9() -> Check {
    let mut rng = common::rng(9000);
    let atomless = common::agent_symmetric_atomless(&mut rng, 3, 2);
    let plan = atomless_threshold_plan(&atomless).map_err(|e| e.to_string())?;
    let mech = Mechanism::Threshold(plan.mechanism(&atomless).map_err(|e| e.to_string())?);
    let mc = |threads| {
        in_pool(threads, || {
            let r = delegation_ratio(
                &atomless,
                &mech,
                &pessimistic(&atomless),
                EvalMode::Mc,
                Some(McConfig { samples: 300_000, seed: 17 }),
                CAP,
            )
            .unwrap();
            serde_json::to_string(&r).unwrap()
        })
    };
    let pool = common::pool(&mut rng, 2, 6, 2);
    let (splan, _) = shuffled_threshold_plan(&pool, ShuffleVariant::Independent, CAP).map_err(|e| e.to_string())?;
    let rules = splan.element_rules();
    let shuffled = |threads| {
        in_pool(threads, || {
            let s = sampled_shuffled_principal(&pool, &rules, ShuffleVariant::Independent, 2_000, 5, CAP).unwrap();
            let e = shuffled_expected_principal(&pool, &rules, ShuffleVariant::Balanced, CAP).unwrap();
            format!("{}|{}", serde_json::to_string(&s).unwrap(), format_rational(&e))
        })
    };
    let base_mc = mc(1);
    let base_sh = shuffled(1);
    for threads in [2, 4, 8] {
        if mc(threads) != base_mc {
            return Err(format!("Monte Carlo report differs with {threads} threads"));
        }
        if shuffled(threads) != base_sh {
            return Err(format!("shuffled report differs with {threads} threads"));
        }
    }
    Ok("Monte Carlo and shuffled reports byte-identical with 1, 2, 4, 8 threads".into())
}

fn main() -> ExitCode {
    let criteria: [(usize, fn() -> Check); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let mut failed = 0;
    for (n, check) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {n}: PASS ({secs:.1}s) {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL ({secs:.1}s) {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
