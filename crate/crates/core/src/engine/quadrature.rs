use crate::model::{Instance, OutcomeDistribution};
use crate::rational::to_f64;

/// Tail mass below which exponential supports are truncated.
const TAIL: f64 = 1e-12;
const TOL: f64 = 1e-9;
const MAX_DEPTH: u32 = 60;

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson integral of a function smooth on `(a, b)`, given its
/// one-sided limits at the endpoints.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fb: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fm = f(0.5 * (a + b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

/// `E[max_e x(V(e))] = ∫₀^∞ (1 − Π_e F_e(v)) dv`, split at every point where
/// some CDF jumps or kinks so each piece is smooth.
pub fn expected_max(instance: &Instance) -> f64 {
    let laws: Vec<&OutcomeDistribution> = instance.elements().iter().map(|e| &e.distribution).collect();
    if laws.is_empty() {
        return 0.0;
    }
    let mut points = vec![0.0f64];
    let mut hi = 0.0f64;
    let mut tail = 0.0;
    for law in &laws {
        match law {
            OutcomeDistribution::Finite(atoms) => points.extend(atoms.iter().map(|a| to_f64(&a.outcome.x))),
            OutcomeDistribution::Uniform { lo, hi } => points.extend([*lo, *hi]),
            OutcomeDistribution::PiecewiseLinear { points: p } => points.extend(p.iter().map(|q| q.0)),
            OutcomeDistribution::Exponential { .. } => {}
        }
        let (_, top) = law.bounds();
        if top.is_finite() {
            hi = hi.max(top);
        }
    }
    for law in &laws {
        if let OutcomeDistribution::Exponential { rate } = law {
            hi = hi.max(-TAIL.ln() / rate);
        }
    }
    for law in &laws {
        if let OutcomeDistribution::Exponential { rate } = law {
            tail += (-rate * hi).exp() / rate;
        }
    }
    points.push(hi);
    points.retain(|p| (0.0..=hi).contains(p));
    points.sort_by(f64::total_cmp);
    points.dedup();
    let g = |v: f64, strict: bool| 1.0 - laws.iter().map(|l| l.cdf(v, strict)).product::<f64>();
    let pieces = (points.len() - 1).max(1) as f64;
    let body: f64 = points
        .windows(2)
        .map(|w| integrate(|v| g(v, false), w[0], w[1], g(w[0], false), g(w[1], true), TOL / pieces))
        .sum();
    body + tail
}
