use crate::PlotKind;
use delegation::bounds::{asymptotic_check, hard_instance_formulas, solve_p};
use delegation::rational::{format_rational, to_f64};
use delegation::{Error, Rational, Result};
use std::fmt::Write;

fn k_range(k_min: usize, k_max: usize, least: usize) -> Result<std::ops::RangeInclusive<usize>> {
    if k_min > k_max {
        return Err(Error::InvalidRange(format!("empty k range {k_min}..={k_max}")));
    }
    if k_min < least {
        return Err(Error::InvalidRange(format!("k must start at {least} or above")));
    }
    Ok(k_min..=k_max)
}

/// CSV text: a `#` line documenting the columns, the header, one row per point.
pub fn plot_data(kind: PlotKind, k_min: usize, k_max: usize, eps: &[Rational], k: usize) -> Result<(String, usize)> {
    let mut out = String::new();
    let mut rows = 0;
    match kind {
        PlotKind::RatioVsK => {
            let e = eps.first().ok_or_else(|| Error::InvalidRange("no ε given".into()))?;
            out.push_str("# k: agents; eps: hard-instance ε; ratio: max(E_A, E_B)/E_opt; limit: 1-1/(2k+1); p: root of p^k+p-1\n");
            out.push_str("k,eps,ratio,limit,p\n");
            for k in k_range(k_min, k_max, 2)? {
                let f = hard_instance_formulas(k, e)?;
                writeln!(out, "{k},{},{},{},{}", format_rational(e), f.ratio, to_f64(&f.limit), solve_p(k)).unwrap();
                rows += 1;
            }
        }
        PlotKind::BoundsVsK => {
            out.push_str("# k: agents; p: root of p^k+p-1; lower: 1-(1+ln k)/k; upper: 1-(ln k-ln ln k)/(2k); upper_bound: 1-1/(2k+1)\n");
            out.push_str("k,p,lower,upper,upper_bound\n");
            for k in k_range(k_min, k_max, 2)? {
                let r = asymptotic_check(k)?;
                let ub = 1.0 - 1.0 / (2 * k + 1) as f64;
                writeln!(out, "{k},{},{},{},{ub}", r.p, r.lower, r.upper).unwrap();
                rows += 1;
            }
        }
        PlotKind::RatioVsEps => {
            if eps.is_empty() {
                return Err(Error::InvalidRange("no ε given".into()));
            }
            out.push_str("# k: agents; eps: hard-instance ε; ratio: max(E_A, E_B)/E_opt; limit: 1-1/(2k+1)\n");
            out.push_str("k,eps,ratio,limit\n");
            for e in eps {
                let f = hard_instance_formulas(k, e)?;
                writeln!(out, "{k},{},{},{}", format_rational(e), f.ratio, to_f64(&f.limit)).unwrap();
                rows += 1;
            }
        }
    }
    Ok((out, rows))
}
