use crate::output::Outcome;
use crate::{plot, Agents, Command, Mode, Sampling, Variant};
use delegation::agents::{
    adversarial_profile, build_analogous_strategic, find_principal_best_equilibrium, pure_equilibria, AdversarialMode,
    ProfileFile, Strategy, StrategyProfile,
};
use delegation::bounds::{
    agent_below_probability, asymptotic_check, atom_split_plan, best_atom_split_plan, exhaustive_mechanism_scan,
    hard_instance, hard_instance_formulas, mechanism_a, mechanism_b, residual, sampled_shuffled_principal,
    scan_index_of, shuffled_expected_opt, shuffled_expected_principal, shuffled_threshold_plan, solve_p, Provenance,
    ShuffleVariant, ASYMPTOTICS_CSV_HEADER,
};
use delegation::engine::{
    allocation_table, delegation_ratio, enumerated_expected_principal, exact_expected_opt, exact_expected_principal,
    expected_opt, EvalMode, McConfig, CSV_HEADER,
};
use delegation::mechanisms::io::read_mechanism;
use delegation::mechanisms::{Mechanism, ProposalRule, SingleProposalMechanism};
use delegation::model::io::{read_instance, InstanceFile};
use delegation::model::{validate_instance, Flavor, Instance};
use delegation::rational::{format_rational, pow, to_f64};
use delegation::{Error, Rational, Result};
use serde_json::{json, Value};
use std::path::Path;

fn path_text(p: &Path) -> String {
    p.display().to_string()
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn rat(r: &Rational) -> Value {
    json!({ "value": format_rational(r), "approx": to_f64(r) })
}

fn load_instance(path: &Path) -> Result<Instance> {
    let inst = read_instance(path)?;
    let violations = validate_instance(&inst);
    if violations.is_empty() {
        Ok(inst)
    } else {
        let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        Err(Error::Invalid(format!("{}: {}", path_text(path), msgs.join("; "))))
    }
}

fn single_proposal(mech: &Mechanism) -> Result<&dyn ProposalRule> {
    mech.proposal_rule()
        .ok_or_else(|| Error::Invalid("this command needs a single-proposal or threshold mechanism".into()))
}

fn sampling_config(s: &Sampling) -> Value {
    match s.mode {
        Mode::Exact => json!({ "mode": "exact" }),
        Mode::Mc => json!({ "mode": "mc", "samples": s.samples, "seed": s.seed }),
    }
}

fn mc_config(s: &Sampling) -> Option<McConfig> {
    (s.mode == Mode::Mc).then_some(McConfig { samples: s.samples, seed: s.seed })
}

fn eval_mode(m: Mode) -> EvalMode {
    match m {
        Mode::Exact => EvalMode::Exact,
        Mode::Mc => EvalMode::Mc,
    }
}

fn agents_name(a: Agents) -> &'static str {
    match a {
        Agents::Pessimistic => "pessimistic",
        Agents::Constrained => "constrained",
        Agents::Truthful => "truthful",
        Agents::Equilibrium => "equilibrium",
    }
}

fn default_agents(inst: &Instance, mech: &Mechanism) -> Agents {
    match (mech, inst.flavor()) {
        (Mechanism::Myerson(_), _) => Agents::Truthful,
        (_, Flavor::Strategic) => Agents::Equilibrium,
        (_, Flavor::Adversarial) => Agents::Pessimistic,
    }
}

fn resolve_profile(inst: &Instance, mech: &Mechanism, agents: Agents, cap: u64) -> Result<StrategyProfile> {
    match agents {
        Agents::Truthful => Ok(StrategyProfile::uniform(inst.k(), Strategy::Truthful)),
        Agents::Pessimistic => adversarial_profile(inst, single_proposal(mech)?, AdversarialMode::Pessimistic, cap),
        Agents::Constrained => adversarial_profile(inst, single_proposal(mech)?, AdversarialMode::Constrained, cap),
        Agents::Equilibrium => Ok(find_principal_best_equilibrium(inst, single_proposal(mech)?, cap)?.profile),
    }
}

pub fn dispatch(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::SolveP { k } => solve(*k),
        Command::Eval { instance, mechanism, profile, agents, sampling, cap } => {
            eval(instance, mechanism, profile.as_deref(), *agents, sampling, cap.cap)
        }
        Command::Gap { instance, sampling, cap } => gap(instance, sampling, cap.cap),
        Command::Equilibrium { instance, mechanism, all, cap } => equilibrium(instance, mechanism, *all, cap.cap),
        Command::Analogous { instance, mechanism, cap } => analogous(instance, mechanism.as_deref(), cap.cap),
        Command::AtomScan { instance, cap } => atom_scan(instance, cap.cap),
        Command::ShuffleEval { pool, variant, sampling, cap } => shuffle_eval(pool, *variant, sampling, cap.cap),
        Command::HardInstance { k, eps, scan, cap } => hard(*k, eps, *scan, cap.cap),
        Command::Asymptotics { k_min, k_max } => asymptotics(*k_min, *k_max),
        Command::PlotData { kind, k_min, k_max, eps, k } => {
            let (csv, rows) = plot::plot_data(*kind, *k_min, *k_max, eps, *k)?;
            let name = match kind {
                crate::PlotKind::RatioVsK => "ratio_vs_k",
                crate::PlotKind::BoundsVsK => "bounds_vs_k",
                crate::PlotKind::RatioVsEps => "ratio_vs_eps",
            };
            let eps_text: Vec<String> = eps.iter().map(format_rational).collect();
            let header =
                format!("# plot-data kind={name} k_min={k_min} k_max={k_max} k={k} eps={}\n", eps_text.join(","));
            let mut out = Outcome::new("plot-data", Value::Null, Value::Null, format!("{name}: {rows} rows"));
            out.csv = Some(header + &csv);
            out.csv_only = true;
            Ok(out)
        }
    }
}

fn solve(k: usize) -> Result<Outcome> {
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    let p = solve_p(k);
    Ok(Outcome::new(
        "solve-p",
        json!({ "k": k }),
        json!({ "k": k, "p": p, "residual": residual(k, p) }),
        format!("p({k}) = {p:.10}"),
    ))
}

fn eval(
    instance: &Path,
    mechanism: &Path,
    profile: Option<&Path>,
    agents: Option<Agents>,
    sampling: &Sampling,
    cap: u64,
) -> Result<Outcome> {
    let inst = load_instance(instance)?;
    let mech = read_mechanism(mechanism, &inst)?;
    let (strategies, label) = match profile {
        Some(p) => {
            let file: ProfileFile = serde_json::from_str(&delegation::model::io::read_text(p)?)?;
            (file.to_profile(&inst)?, format!("file:{}", path_text(p)))
        }
        None => {
            let a = agents.unwrap_or_else(|| default_agents(&inst, &mech));
            (resolve_profile(&inst, &mech, a, cap)?, agents_name(a).to_string())
        }
    };
    let report = delegation_ratio(&inst, &mech, &strategies, eval_mode(sampling.mode), mc_config(sampling), cap)?;
    let mut config = json!({
        "instance": path_text(instance),
        "mechanism": path_text(mechanism),
        "agents": label,
        "cap": cap,
    });
    merge(&mut config, sampling_config(sampling));
    let csv = format!("{CSV_HEADER}\n{}\n", report.csv_row(&stem(instance), &stem(mechanism)));
    let summary = format!(
        "ratio = {:.6} (E[principal] = {:.6}, E[opt] = {:.6})",
        report.ratio,
        report.expected_principal.value(),
        report.expected_opt.value()
    );
    Ok(Outcome::new("eval", config, serde_json::to_value(&report)?, summary).with_csv(csv))
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

fn upper_bound(k: usize) -> f64 {
    1.0 - 1.0 / (2 * k + 1) as f64
}

fn gap(instance: &Path, sampling: &Sampling, cap: u64) -> Result<Outcome> {
    let inst = load_instance(instance)?;
    let k = inst.k();
    let p = solve_p(k);
    let mut config = json!({ "instance": path_text(instance), "cap": cap });
    merge(&mut config, sampling_config(sampling));
    let result = if inst.is_finite() {
        let ev = best_atom_split_plan(&inst, cap)?;
        json!({
            "p": p,
            "upper_bound": upper_bound(k),
            "plan": ev.plan,
            "expected_principal": rat(&ev.expected_principal),
            "expected_opt": rat(&ev.expected_opt),
            "ratio": ev.ratio,
            "meets_lower_bound": ev.ratio >= p - 1e-10,
        })
    } else {
        let mc = mc_config(sampling)
            .ok_or_else(|| Error::Invalid("instances with atomless elements need --mode mc".into()))?;
        let profile = StrategyProfile::uniform(k, Strategy::Pessimistic);
        let mut best: Option<(Value, f64, f64)> = None;
        for plan in atom_split_plan(&inst)? {
            let mech = Mechanism::Threshold(plan.mechanism(&inst)?);
            let r = delegation_ratio(&inst, &mech, &profile, EvalMode::Mc, Some(mc), cap)?;
            let se = r.ratio_stderr.unwrap_or(0.0);
            if best.as_ref().is_none_or(|b| r.ratio > b.1) {
                best = Some((json!({ "plan": plan, "report": r }), r.ratio, se));
            }
        }
        let (detail, ratio, se) = best.expect("at least one plan");
        json!({
            "p": p,
            "upper_bound": upper_bound(k),
            "best": detail,
            "ratio": ratio,
            "ratio_stderr": se,
            "meets_lower_bound": ratio >= p - 3.0 * se,
        })
    };
    let summary = format!(
        "ratio = {:.6}, p = {p:.6}, upper bound = {:.6}",
        result["ratio"].as_f64().unwrap_or(0.0),
        upper_bound(k)
    );
    Ok(Outcome::new("gap", config, result, summary))
}

fn atom_scan(instance: &Path, cap: u64) -> Result<Outcome> {
    let inst = load_instance(instance)?;
    let ev = best_atom_split_plan(&inst, cap)?;
    let plans = atom_split_plan(&inst)?;
    let rows: Vec<Value> = plans
        .iter()
        .zip(&ev.candidates)
        .map(|(plan, v)| {
            json!({
                "strict_agents": plan.strict_count(),
                "expected_principal": rat(v),
                "ratio": to_f64(&(v / &ev.expected_opt)),
            })
        })
        .collect();
    let split = match &ev.plan.provenance {
        Provenance::AtomSplit { x_prime, phi, .. } => json!({ "x_prime": format_rational(x_prime), "phi": phi }),
        _ => Value::Null,
    };
    let summary = format!(
        "{} plans, best ratio = {:.6} with {} strict agents (p = {:.6})",
        rows.len(),
        ev.ratio,
        ev.plan.strict_count(),
        ev.plan.p
    );
    Ok(Outcome::new(
        "atom-scan",
        json!({ "instance": path_text(instance), "cap": cap }),
        json!({
            "p": ev.plan.p,
            "split": split,
            "plans": rows,
            "best": ev.plan,
            "expected_opt": rat(&ev.expected_opt),
            "ratio": ev.ratio,
            "meets_lower_bound": ev.ratio >= ev.plan.p - 1e-10,
        }),
        summary,
    ))
}

fn equilibrium(instance: &Path, mechanism: &Path, all: bool, cap: u64) -> Result<Outcome> {
    let inst = load_instance(instance)?;
    let mech = read_mechanism(mechanism, &inst)?;
    let rule = single_proposal(&mech)?;
    let best = find_principal_best_equilibrium(&inst, rule, cap)?;
    let opt = exact_expected_opt(&inst)?;
    let ratio = if opt > Rational::from_integer(0.into()) { to_f64(&(&best.expected_principal / &opt)) } else { 0.0 };
    let mut result = json!({
        "expected_principal": rat(&best.expected_principal),
        "expected_opt": rat(&opt),
        "ratio": ratio,
        "profile": ProfileFile::from_profile(&best.profile, &inst, cap)?,
    });
    if all {
        let list = pure_equilibria(&inst, rule, cap)?;
        let values: Vec<Value> = list.iter().map(|e| rat(&e.expected_principal)).collect();
        merge(&mut result, json!({ "equilibria": values }));
    }
    let summary = format!(
        "principal-best equilibrium: E[principal] = {}, ratio = {ratio:.6}",
        format_rational(&best.expected_principal)
    );
    Ok(Outcome::new(
        "equilibrium",
        json!({ "instance": path_text(instance), "mechanism": path_text(mechanism), "all": all, "cap": cap }),
        result,
        summary,
    ))
}

fn analogous(instance: &Path, mechanism: Option<&Path>, cap: u64) -> Result<Outcome> {
    let inst = load_instance(instance)?;
    let strategic = build_analogous_strategic(&inst)?;
    let mut result = json!({ "instance": InstanceFile::from_instance(&strategic) });
    let mut summary = format!("analogous strategic instance with {} elements", strategic.elements().len());
    if let Some(m) = mechanism {
        let mech = read_mechanism(m, &inst)?;
        let rule = single_proposal(&mech)?;
        let eq = find_principal_best_equilibrium(&strategic, rule, cap)?;
        let strategic_table = allocation_table(&strategic, &mech, &eq.profile, cap)?;
        let pessimistic = adversarial_profile(&inst, rule, AdversarialMode::Pessimistic, cap)?;
        let constrained = adversarial_profile(&inst, rule, AdversarialMode::Constrained, cap)?;
        let pess_table = allocation_table(&inst, &mech, &pessimistic, cap)?;
        let cons_table = allocation_table(&inst, &mech, &constrained, cap)?;
        let differing = strategic_table.iter().zip(&pess_table).filter(|(a, b)| a.2 != b.2).count();
        let adversarial_value = exact_expected_principal(&inst, &mech, &pessimistic, cap)?;
        merge(
            &mut result,
            json!({
                "mechanism": path_text(m),
                "equilibrium_principal": rat(&eq.expected_principal),
                "pessimistic_principal": rat(&adversarial_value),
                "matches_pessimistic": differing == 0,
                "matches_constrained": strategic_table == cons_table,
                "differing_types": differing,
                "profile": ProfileFile::from_profile(&eq.profile, &strategic, cap)?,
            }),
        );
        summary = format!("equilibrium allocations match pessimistic adversarial: {}", differing == 0);
    }
    let config = json!({
        "instance": path_text(instance),
        "mechanism": mechanism.map(path_text),
        "cap": cap,
    });
    Ok(Outcome::new("analogous", config, result, summary))
}

fn shuffle_eval(pool_path: &Path, variant: Variant, sampling: &Sampling, cap: u64) -> Result<Outcome> {
    let pool = load_instance(pool_path)?;
    let variant = match variant {
        Variant::Independent => ShuffleVariant::Independent,
        Variant::Balanced => ShuffleVariant::Balanced,
    };
    let (plan, exact_value) = shuffled_threshold_plan(&pool, variant, cap)?;
    let rules = plan.element_rules();
    let opt = if pool.is_finite() {
        shuffled_expected_opt(&pool).map(|o| to_f64(&o))?
    } else {
        expected_opt(&pool, EvalMode::Exact, None)?.value()
    };
    let k = pool.k();
    let mut result = json!({ "plan": plan, "expected_opt": opt });
    let (ratio, bound_ok) = match sampling.mode {
        Mode::Exact => {
            let v = match exact_value {
                Some(v) => v,
                None => shuffled_expected_principal(&pool, &rules, variant, cap)?,
            };
            let ratio = to_f64(&v) / opt;
            merge(&mut result, json!({ "expected_principal": rat(&v), "ratio": ratio }));
            (ratio, ratio >= plan.p - 1e-10)
        }
        Mode::Mc => {
            let s = sampled_shuffled_principal(&pool, &rules, variant, sampling.samples, sampling.seed, cap)?;
            let ratio = s.estimate / opt;
            merge(&mut result, json!({ "expected_principal": s, "ratio": ratio, "ratio_stderr": s.stderr / opt }));
            (ratio, ratio >= plan.p - 3.0 * s.stderr / opt)
        }
    };
    if pool.is_finite() {
        let (below, q) = agent_below_probability(&pool, &rules)?;
        merge(
            &mut result,
            json!({
                "agent_below": rat(&below),
                "q_product": rat(&q),
                "agent_bound_holds": pow(&below, k) >= q,
            }),
        );
    }
    merge(&mut result, json!({ "meets_lower_bound": bound_ok }));
    let mut config = json!({
        "pool": path_text(pool_path),
        "variant": serde_json::to_value(variant)?,
        "cap": cap,
    });
    merge(&mut config, sampling_config(sampling));
    let summary = format!("shuffled ratio = {ratio:.6} (p = {:.6})", plan.p);
    Ok(Outcome::new("shuffle-eval", config, result, summary))
}

fn hard(k: usize, eps: &Rational, scan: bool, cap: u64) -> Result<Outcome> {
    let f = hard_instance_formulas(k, eps)?;
    let inst = hard_instance(k, eps)?;
    let profile = StrategyProfile::uniform(k, Strategy::Pessimistic);
    let a = Mechanism::SingleProposal(SingleProposalMechanism::from_sets(&inst, &mechanism_a(&inst)));
    let b = Mechanism::SingleProposal(SingleProposalMechanism::from_sets(&inst, &mechanism_b(&inst)));
    let e_a = exact_expected_principal(&inst, &a, &profile, cap)?;
    let e_b = exact_expected_principal(&inst, &b, &profile, cap)?;
    let e_opt = exact_expected_opt(&inst)?;
    let enumerated = match inst.profile_count() {
        Ok(n) if n <= cap.into() => Some((
            enumerated_expected_principal(&inst, &a, &profile, cap)?,
            enumerated_expected_principal(&inst, &b, &profile, cap)?,
        )),
        _ => None,
    };
    let oracle_ok = e_a == f.e_a
        && e_b == f.e_b
        && e_opt == f.e_opt
        && enumerated.as_ref().is_none_or(|(x, y)| *x == f.e_a && *y == f.e_b);
    let mut result = json!({
        "formulas": f,
        "evaluated": { "e_opt": rat(&e_opt), "e_a": rat(&e_a), "e_b": rat(&e_b) },
        "enumeration_checked": enumerated.is_some(),
        "matches_formulas": oracle_ok,
    });
    let mut summary = format!(
        "E_opt = {}, best = {}, ratio = {:.6}",
        format_rational(&f.e_opt),
        format_rational(&f.e_a.clone().max(f.e_b.clone())),
        f.ratio
    );
    if scan {
        let s = exhaustive_mechanism_scan(&inst, cap)?;
        let ia = scan_index_of(&inst, &mechanism_a(&inst))?;
        let ib = scan_index_of(&inst, &mechanism_b(&inst))?;
        let (a_opt, b_opt) = (s.argmax.contains(&ia), s.argmax.contains(&ib));
        merge(
            &mut result,
            json!({
                "scan": {
                    "count": s.count,
                    "best_utility": rat(&s.best_utility),
                    "best_sets": s.best_sets,
                    "argmax_count": s.argmax.len(),
                    "a_optimal": a_opt,
                    "b_optimal": b_opt,
                }
            }),
        );
        summary += &format!("; scan of {} mechanisms: A optimal = {a_opt}, B optimal = {b_opt}", s.count);
    }
    Ok(Outcome::new(
        "hard-instance",
        json!({ "k": k, "eps": format_rational(eps), "scan": scan, "cap": cap }),
        result,
        summary,
    ))
}

fn asymptotics(k_min: usize, k_max: usize) -> Result<Outcome> {
    if k_min > k_max {
        return Err(Error::InvalidRange(format!("empty k range {k_min}..={k_max}")));
    }
    let records = (k_min..=k_max).map(asymptotic_check).collect::<Result<Vec<_>>>()?;
    let all_hold = records.iter().all(|r| r.g_bracket && r.p_bracket);
    let mut csv = format!("{ASYMPTOTICS_CSV_HEADER}\n");
    for r in &records {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    let summary = format!("brackets hold for every k in {k_min}..={k_max}: {all_hold}");
    Ok(Outcome::new(
        "asymptotics",
        json!({ "k_min": k_min, "k_max": k_max }),
        json!({ "all_hold": all_hold, "records": records }),
        summary,
    )
    .with_csv(csv))
}
