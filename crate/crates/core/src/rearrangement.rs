//! Non-increasing rearrangements of piecewise-constant functions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{CellSubset, GridFunction};
use crate::numerics::{log_sum_exp, pairwise_sum};

/// Beyond this exponent (natural log) integrals are accumulated in log space.
const LOG_SPACE_THRESHOLD: f64 = 690.0;

/// A non-increasing step function on `[0, |Ω|)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRearrangement {
    /// `0 = b_0 < b_1 < … < b_n = |Ω|` (cells of zero width are dropped).
    breakpoints: Vec<f64>,
    /// `values[i]` on `[b_i, b_{i+1})`.
    values: Vec<f64>,
    /// Cell widths, equal to the measures of the sorted cells.
    widths: Vec<f64>,
}

impl StepRearrangement {
    fn from_pairs(mut pairs: Vec<(f64, f64)>) -> Self {
        // stable: ties keep cell order; +∞ sorts first
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut breakpoints = vec![0.0];
        let mut values = Vec::with_capacity(pairs.len());
        let mut widths = Vec::with_capacity(pairs.len());
        let mut t = 0.0;
        for (v, w) in pairs {
            if w <= 0.0 {
                continue;
            }
            t += w;
            breakpoints.push(t);
            values.push(v);
            widths.push(w);
        }
        Self { breakpoints, values, widths }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn total_measure(&self) -> f64 {
        self.breakpoints[self.breakpoints.len() - 1]
    }

    /// Right-continuous evaluation; zero beyond `|Ω|`.
    pub fn eval(&self, t: f64) -> f64 {
        if self.values.is_empty() || t >= self.total_measure() {
            return 0.0;
        }
        if t < 0.0 {
            return self.values[0];
        }
        let i = self.breakpoints.partition_point(|b| *b <= t);
        self.values[i - 1]
    }

    /// `∫₀^{|Ω|} F(u*(t)) dt` on the step representation.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let terms: Vec<f64> = self.values.iter().zip(&self.widths).map(|(&v, &w)| f(v) * w).collect();
        pairwise_sum(&terms)
    }

    /// Rows `(t_break, value)` for plotting, with equal neighbours merged.
    pub fn rows(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &v) in self.values.iter().enumerate() {
            if out.last().is_none_or(|last| last.1 != v) {
                out.push((self.breakpoints[i], v));
            }
        }
        out.push((self.total_measure(), 0.0));
        out
    }
}

/// `u*`: cells sorted by `|u|` descending, widths accumulated as breakpoints.
pub fn rearrange(u: &GridFunction) -> StepRearrangement {
    rearrange_values(&u.map(f64::abs))
}

/// Rearranges the values themselves (no absolute value); used for exponents such as `s ≥ 0`.
pub fn rearrange_values(u: &GridFunction) -> StepRearrangement {
    let pairs = u.values().iter().zip(u.partition().cells()).map(|(&v, c)| (v, c.measure)).collect();
    StepRearrangement::from_pairs(pairs)
}

/// Comparison of two step functions at the midpoints of their merged breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepComparison {
    pub points: usize,
    pub max_abs_diff: f64,
    pub max_rel_diff: f64,
    pub pass: bool,
}

fn compare_steps(lhs: &dyn Fn(f64) -> f64, rhs: &dyn Fn(f64) -> f64, breaks: Vec<f64>, tol: f64) -> StepComparison {
    let mut b = breaks;
    b.sort_by(f64::total_cmp);
    let total = b.last().copied().unwrap_or(0.0);
    let merge = 1e-12 * total.max(1e-300);
    let mut merged: Vec<f64> = Vec::with_capacity(b.len());
    for x in b {
        if merged.last().is_none_or(|l| x - l > merge) {
            merged.push(x);
        }
    }
    let (mut max_abs, mut max_rel) = (0.0f64, 0.0f64);
    let mut pass = true;
    for w in merged.windows(2) {
        let t = 0.5 * (w[0] + w[1]);
        let (l, r) = (lhs(t), rhs(t));
        if l == r {
            continue;
        }
        let abs = (l - r).abs();
        let rel = abs / l.abs().max(r.abs()).max(1.0);
        max_abs = max_abs.max(abs);
        max_rel = max_rel.max(rel);
        if !(rel <= tol) {
            pass = false;
        }
    }
    StepComparison { points: merged.len().saturating_sub(1), max_abs_diff: max_abs, max_rel_diff: max_rel, pass }
}

/// `(α^{s(·)})* = α^{s*}` on the step representation.
pub fn check_exp_commutes(s: &GridFunction, alpha: f64) -> Result<StepComparison> {
    if !(alpha > 1.0) {
        return Err(Error::Input(format!("base must exceed 1, got {alpha}")));
    }
    let powered = rearrange_values(&s.map(|v| alpha.powf(v)));
    let s_star = rearrange_values(s);
    let mut breaks = powered.breakpoints().to_vec();
    breaks.extend_from_slice(s_star.breakpoints());
    Ok(compare_steps(&|t| powered.eval(t), &|t| alpha.powf(s_star.eval(t)), breaks, 1e-12))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestrictedReport {
    pub inf_on_set: f64,
    pub sup_off_set: f64,
    /// Whether `inf_E g ≥ sup_{Ω∖E} g`.
    pub applicable: bool,
    pub set_measure: f64,
    pub comparison: StepComparison,
}

/// `(g χ_E)* = g* χ_{(0,|E|)}` for nonnegative `g` whose values on `E` dominate those off `E`.
pub fn check_restricted_rearrangement(g: &GridFunction, set: &CellSubset) -> Result<RestrictedReport> {
    if set.mask().len() != g.len() {
        return Err(Error::Input("cell subset does not match the partition".into()));
    }
    let (mut inf_on, mut sup_off) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, &v) in g.values().iter().enumerate() {
        if g.partition().cells()[i].measure <= 0.0 {
            continue;
        }
        if set.contains(i) {
            inf_on = inf_on.min(v.abs());
        } else {
            sup_off = sup_off.max(v.abs());
        }
    }
    let applicable = inf_on >= sup_off;
    let restricted_values: Vec<f64> =
        g.values().iter().enumerate().map(|(i, &v)| if set.contains(i) { v } else { 0.0 }).collect();
    let restricted = rearrange(&GridFunction::from_values(g.partition(), restricted_values)?);
    let g_star = rearrange(g);
    let set_measure = set.measure(g.partition());
    let mut breaks = restricted.breakpoints().to_vec();
    breaks.extend_from_slice(g_star.breakpoints());
    breaks.push(set_measure);
    let rhs = |t: f64| if t < set_measure { g_star.eval(t) } else { 0.0 };
    let comparison = compare_steps(&|t| restricted.eval(t), &rhs, breaks, 1e-12);
    Ok(RestrictedReport { inf_on_set: inf_on, sup_off_set: sup_off, applicable, set_measure, comparison })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquimeasurableIntegral {
    /// `∫_Ω α^{s(x)} dx`.
    pub space_side: f64,
    /// `∫₀^{|Ω|} α^{s*(t)} dt`.
    pub rearranged_side: f64,
    /// Natural logarithms of both sides.
    pub log_space_side: f64,
    pub log_rearranged_side: f64,
    pub log_space: bool,
}

impl EquimeasurableIntegral {
    pub fn relative_gap(&self) -> f64 {
        if self.log_space_side == self.log_rearranged_side {
            return 0.0;
        }
        ((self.log_space_side - self.log_rearranged_side).exp_m1()).abs()
    }
}

fn log_integral(values: &[f64], widths: &[f64], ln_alpha: f64) -> f64 {
    let logs: Vec<f64> = values.iter().zip(widths).filter(|(_, w)| **w > 0.0).map(|(&v, &w)| v * ln_alpha + w.ln()).collect();
    log_sum_exp(&logs)
}

/// Both sides of the equimeasurability identity for `α^{s}`.
pub fn equimeasurable_integral(s: &GridFunction, alpha: f64) -> Result<EquimeasurableIntegral> {
    if !(alpha > 1.0) {
        return Err(Error::Input(format!("base must exceed 1, got {alpha}")));
    }
    let ln_alpha = alpha.ln();
    let s_star = rearrange_values(s);
    let widths = s.partition().measures();
    let max_exp = s.values().iter().copied().fold(f64::NEG_INFINITY, f64::max) * ln_alpha;
    if max_exp > LOG_SPACE_THRESHOLD {
        let l1 = log_integral(s.values(), &widths, ln_alpha);
        let l2 = log_integral(s_star.values(), s_star.widths(), ln_alpha);
        return Ok(EquimeasurableIntegral {
            space_side: l1.exp(),
            rearranged_side: l2.exp(),
            log_space_side: l1,
            log_rearranged_side: l2,
            log_space: true,
        });
    }
    let space = s.integrate(|v| alpha.powf(v));
    let rearranged = s_star.integrate(|v| alpha.powf(v));
    Ok(EquimeasurableIntegral {
        space_side: space,
        rearranged_side: rearranged,
        log_space_side: space.ln(),
        log_rearranged_side: rearranged.ln(),
        log_space: false,
    })
}
