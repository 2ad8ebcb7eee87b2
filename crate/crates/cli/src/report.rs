//! Report rendering: exact values next to fixed 6-decimal renderings,
//! so scripts can parse either form.

use flowsched_core::cost::{Cost, PNorm, Q};
use num_traits::Signed;
use std::fmt;

/// Precision for decimal renderings; wide enough that the certified
/// enclosure is far tighter than the 6 printed decimals.
const RENDER_BITS: u32 = 384;

/// Renders a rational as `n` or `n/d`.
pub fn q_str(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Exact rendering: rational when the value is rational, otherwise the
/// exact sum-of-radicals form.
pub fn cost_exact(c: &Cost) -> String {
    match c.as_q() {
        Some(v) => q_str(&v),
        None => c.to_string(),
    }
}

/// Fixed 6-decimal rendering from a certified enclosure.
pub fn cost_decimal(c: &Cost) -> String {
    format!("{:.6}", c.bounds(RENDER_BITS).to_f64())
}

/// Decimal rendering of `c^(1/p)`.
pub fn norm_decimal(c: &Cost, p: PNorm) -> String {
    let inv = PNorm::new(p.denom(), p.numer()).expect("reciprocal of a valid exponent");
    format!("{:.6}", c.bounds(RENDER_BITS).pow_ratio(inv, RENDER_BITS).to_f64())
}

/// Ratio of two objectives: exact when both are rational, always with
/// a decimal rendering. `None` when the denominator is not certainly
/// positive.
pub fn ratio_parts(obj: &Cost, oracle: &Cost) -> Option<(Option<String>, f64)> {
    let ob = oracle.bounds(RENDER_BITS);
    if !ob.lo.is_positive() {
        return None;
    }
    let dec = obj.bounds(RENDER_BITS).div(&ob).to_f64();
    let exact = match (obj.as_q(), oracle.as_q()) {
        (Some(a), Some(b)) => Some(q_str(&(a / b))),
        _ => None,
    };
    Some((exact, dec))
}

/// One solve outcome, printed as stable `key: value` lines. Wall time
/// is deliberately not part of the report; it goes to stderr so that
/// repeated runs stay byte-identical on stdout.
pub struct RunReport {
    pub algo: &'static str,
    pub jobs: usize,
    pub machines: usize,
    pub objective: Cost,
    /// Decimal rendering of objective^(1/p) for non-integer exponents.
    pub norm: Option<(PNorm, String)>,
    /// Algorithm-specific lines, already formatted.
    pub extra: Vec<String>,
    pub oracle: Option<Cost>,
    pub cells: u64,
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "algo: {}", self.algo)?;
        writeln!(f, "jobs: {}  machines: {}", self.jobs, self.machines)?;
        writeln!(
            f,
            "objective: {} ({})",
            cost_exact(&self.objective),
            cost_decimal(&self.objective)
        )?;
        if let Some((p, dec)) = &self.norm {
            writeln!(f, "norm(1/{p}-th power): {dec}")?;
        }
        for line in &self.extra {
            writeln!(f, "{line}")?;
        }
        if let Some(oracle) = &self.oracle {
            writeln!(f, "oracle: {} ({})", cost_exact(oracle), cost_decimal(oracle))?;
            if let Some((exact, dec)) = ratio_parts(&self.objective, oracle) {
                debug_assert!(dec >= 1.0 - 1e-9, "objective below the exact optimum");
                match exact {
                    Some(e) => writeln!(f, "ratio: {e} ({dec:.6})")?,
                    None => writeln!(f, "ratio: {dec:.6}")?,
                }
            }
        }
        writeln!(f, "cells: {}", self.cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use flowsched_core::cost::q_int;

    #[test]
    fn rational_cost_renders_both_forms() {
        let mut c = Cost::zero();
        c.add_power_term(&q_int(3), &q_int(2), PNorm::one());
        assert_eq!(cost_exact(&c), "6");
        assert_eq!(cost_decimal(&c), "6.000000");
    }

    #[test]
    fn irrational_cost_renders_radical_and_decimal() {
        let mut c = Cost::zero();
        c.add_power_term(&q_int(1), &q_int(2), PNorm::new(1, 2).unwrap());
        assert!(cost_exact(&c).contains("^(1/2)"));
        assert_eq!(cost_decimal(&c), "1.414214");
    }

    #[test]
    fn ratio_is_exact_for_rationals() {
        let mut a = Cost::zero();
        a.add_power_term(&q_int(3), &q_int(1), PNorm::one());
        let mut b = Cost::zero();
        b.add_power_term(&q_int(2), &q_int(1), PNorm::one());
        let (exact, dec) = ratio_parts(&a, &b).unwrap();
        assert_eq!(exact.as_deref(), Some("3/2"));
        assert!((dec - 1.5).abs() < 1e-9);
    }
}
