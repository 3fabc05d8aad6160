//! Delegation-gap bounds: the approximation factor `p`, threshold plans
//! that attain it (atomless, atom-split and shuffled), the hard instance
//! behind the upper bound, and the large-`k` bracket on `p`.

mod hard;
mod plans;
mod shuffled;

pub use hard::{
    exhaustive_mechanism_scan, hard_instance, hard_instance_formulas, mechanism_a, mechanism_b, scan_index_of,
    scan_sets, HardInstanceFormulas, ScanResult,
};
pub use plans::{
    atom_split_plan, atomless_threshold_plan, best_atom_split_plan, evaluate_plan, split_probability, PlanEvaluation,
    PlanModes, Provenance, ThresholdPlan,
};
pub use shuffled::{
    agent_below_probability, assign_shuffled, enumerate_assignments, sampled_shuffled_principal, shuffled_expected_opt,
    shuffled_expected_principal, shuffled_plan_candidates, shuffled_threshold_plan, ShuffleVariant,
};

use crate::error::{Error, Result};
use serde::Serialize;

const BISECTION_STEPS: usize = 64;

/// `p^k + p − 1`.
pub fn residual(k: usize, p: f64) -> f64 {
    p.powi(k as i32) + p - 1.0
}

/// Unique root in `(0, 1)` of `p^k + p − 1 = 0`, by bisection.
pub fn solve_p(k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if residual(k, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if residual(k, lo).abs() <= residual(k, hi).abs() {
        lo
    } else {
        hi
    }
}

/// `g(r) = (1 − r/k)^k − r/k`; its root `r*` gives `p = 1 − r*/k`.
pub fn g(k: usize, r: f64) -> f64 {
    let kf = k as f64;
    (1.0 - r / kf).powi(k as i32) - r / kf
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticsRecord {
    pub k: usize,
    pub r_minus: f64,
    pub r_plus: f64,
    pub g_minus: f64,
    pub g_plus: f64,
    pub p: f64,
    /// `1 − r⁻/k`
    pub lower: f64,
    /// `1 − r⁺/k`
    pub upper: f64,
    /// `g(r⁻) < 0 < g(r⁺)`
    pub g_bracket: bool,
    /// `lower < p < upper`
    pub p_bracket: bool,
}

pub const ASYMPTOTICS_CSV_HEADER: &str = "k,r_minus,r_plus,g_minus,g_plus,p,lower,upper";

impl AsymptoticsRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.k, self.r_minus, self.r_plus, self.g_minus, self.g_plus, self.p, self.lower, self.upper
        )
    }
}

/// Evaluates `g` at `r⁻ = 1 + ln k` and `r⁺ = ½(ln k − ln ln k)` and
/// brackets `p(k)` between `1 − r⁻/k` and `1 − r⁺/k`.
pub fn asymptotic_check(k: usize) -> Result<AsymptoticsRecord> {
    if k < 2 {
        return Err(Error::Domain(format!("asymptotics need k ≥ 2, got {k}")));
    }
    let kf = k as f64;
    let ln = kf.ln();
    let r_minus = 1.0 + ln;
    let r_plus = 0.5 * (ln - ln.ln());
    let (g_minus, g_plus) = (g(k, r_minus), g(k, r_plus));
    let p = solve_p(k);
    let (lower, upper) = (1.0 - r_minus / kf, 1.0 - r_plus / kf);
    Ok(AsymptoticsRecord {
        k,
        r_minus,
        r_plus,
        g_minus,
        g_plus,
        p,
        lower,
        upper,
        g_bracket: g_minus < 0.0 && 0.0 < g_plus,
        p_bracket: lower < p && p < upper,
    })
}
