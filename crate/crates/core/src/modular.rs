//! The modular `m_{p(·)}(u) = ∫ |u|^{p(x)} dx`, the Luxemburg norm, and
//! checks of the standard inequalities relating them.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::grid::GridFunction;
use crate::numerics::pairwise_sum;

/// Constant of the variable-exponent Hölder inequality used in the witness chain.
pub const HOLDER_CONSTANT: f64 = 2.0;
/// Slack (relative to `max(1, |rhs|)`) granted to floating-point comparisons.
pub const CHECK_SLACK: f64 = 1e-10;
/// Bisection stops once `λ_hi / λ_lo − 1` falls below this.
const NORM_RTOL: f64 = 1e-13;
const PARALLEL_TERMS: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModularValue {
    pub value: f64,
    pub quadrature_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormValue {
    pub value: f64,
    /// Final bisection bracket `(λ_lo, λ_hi)` with `m(u/λ_hi) ≤ 1 ≤ m(u/λ_lo)`.
    pub bracket: (f64, f64),
}

/// One inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub margin: f64,
    /// Whether the inequality's proviso holds; inapplicable checks always pass.
    pub applicable: bool,
    pub pass: bool,
}

impl InequalityCheck {
    pub fn new(label: impl Into<String>, lhs: f64, rhs: f64, applicable: bool) -> Self {
        let margin = rhs - lhs;
        let slack = CHECK_SLACK * rhs.abs().max(1.0);
        Self { label: label.into(), lhs, rhs, margin, applicable, pass: !applicable || margin >= -slack }
    }
}

/// Per-cell data for repeated modular evaluation at varying scale.
struct ModularTerms {
    /// `(ln|u|, p, measure)` for cells with `u ≠ 0` and finite `p`.
    finite: Vec<(f64, f64, f64)>,
    /// Largest `|u|` on cells with `p = ∞` and positive measure.
    sup_infinite: f64,
}

impl ModularTerms {
    fn new(u: &GridFunction, p: &GridFunction) -> Result<Self> {
        u.check_same_partition(p)?;
        u.check_finite()?;
        if let Some(v) = p.values().iter().find(|v| v.is_nan() || **v < 0.0) {
            return Err(Error::Input(format!("exponent sample {v} is not a valid exponent")));
        }
        let mut finite = Vec::new();
        let mut sup_infinite: f64 = 0.0;
        for ((&uv, &pv), cell) in u.values().iter().zip(p.values()).zip(u.partition().cells()) {
            if uv == 0.0 || cell.measure == 0.0 {
                continue;
            }
            if pv.is_infinite() {
                sup_infinite = sup_infinite.max(uv.abs());
            } else {
                finite.push((uv.abs().ln(), pv, cell.measure));
            }
        }
        Ok(Self { finite, sup_infinite })
    }

    fn is_zero(&self) -> bool {
        self.finite.is_empty() && self.sup_infinite == 0.0
    }

    /// Finite part of `m(u/λ)`, `λ = e^{ln_lambda}`.
    fn finite_part(&self, ln_lambda: f64) -> f64 {
        let term = |&(lu, p, m): &(f64, f64, f64)| (p * (lu - ln_lambda)).exp() * m;
        let terms: Vec<f64> = if self.finite.len() >= PARALLEL_TERMS {
            self.finite.par_iter().map(term).collect()
        } else {
            self.finite.iter().map(term).collect()
        };
        pairwise_sum(&terms)
    }

    fn modular_at(&self, lambda: f64) -> f64 {
        if self.sup_infinite > lambda {
            return f64::INFINITY;
        }
        self.finite_part(lambda.ln())
    }
}

/// `Σ |u|^{p} · measure` with the exponent already sampled on the same cells.
///
/// Cells with `p = ∞` contribute `0` where `|u| ≤ 1` and `∞` otherwise.
pub fn modular_sampled(u: &GridFunction, p: &GridFunction) -> Result<f64> {
    Ok(ModularTerms::new(u, p)?.modular_at(1.0))
}

/// Midpoint modular with one refinement step.
///
/// When `u` carries its source expression, the partition is refined once and
/// the two midpoint sums are combined by Richardson extrapolation; the
/// reported error is the size of that correction. Data-only functions are
/// integrated exactly as piecewise constants.
pub fn modular(u: &GridFunction, p: &ExponentField) -> Result<ModularValue> {
    let coarse = modular_sampled(u, &p.sample(u.partition()))?;
    match u.refined() {
        Some(fine_u) => {
            let fine = modular_sampled(&fine_u, &p.sample(fine_u.partition()))?;
            let correction = (fine - coarse) / 3.0;
            if !correction.is_finite() {
                return Ok(ModularValue { value: fine, quadrature_error: f64::INFINITY });
            }
            Ok(ModularValue { value: fine + correction, quadrature_error: correction.abs() })
        }
        None => Ok(ModularValue { value: coarse, quadrature_error: 0.0 }),
    }
}

/// Luxemburg norm `inf{λ > 0 : m(u/λ) ≤ 1}` with the exponent sampled on `u`'s cells.
///
/// `λ ↦ m(u/λ)` is strictly decreasing, so the root is bracketed by stepping
/// geometrically in `ln λ` and refined by bisection. Cells with `p = ∞`
/// force `λ ≥ max |u|` there.
pub fn luxemburg_norm_sampled(u: &GridFunction, p: &GridFunction) -> Result<NormValue> {
    if !(u.partition().total_measure() > 0.0) {
        return Err(Error::Domain("the partition has zero measure".into()));
    }
    let terms = ModularTerms::new(u, p)?;
    if terms.is_zero() {
        return Ok(NormValue { value: 0.0, bracket: (0.0, 0.0) });
    }
    if terms.finite.is_empty() {
        let v = terms.sup_infinite;
        return Ok(NormValue { value: v, bracket: (v, v) });
    }
    let f = |ln_lambda: f64| terms.finite_part(ln_lambda);
    let start = terms.finite.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi);
    if f(start) > 1.0 {
        lo = start;
        let mut step = 1.0;
        hi = start + step;
        while f(hi) > 1.0 {
            lo = hi;
            step *= 2.0;
            hi = start + step;
        }
    } else {
        hi = start;
        let mut step = 1.0;
        lo = start - step;
        while f(lo) <= 1.0 {
            hi = lo;
            step *= 2.0;
            lo = start - step;
        }
    }
    while hi - lo > NORM_RTOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (lambda_lo, lambda_hi) = (lo.exp(), hi.exp());
    if terms.sup_infinite > lambda_lo {
        let v = terms.sup_infinite.max(lambda_hi);
        return Ok(NormValue { value: v, bracket: (terms.sup_infinite, v) });
    }
    let value = (0.5 * (lo + hi)).exp().clamp(lambda_lo, lambda_hi);
    Ok(NormValue { value, bracket: (lambda_lo, lambda_hi) })
}

pub fn luxemburg_norm(u: &GridFunction, p: &ExponentField) -> Result<NormValue> {
    luxemburg_norm_sampled(u, &p.sample(u.partition()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormModularReport {
    pub modular: f64,
    pub norm: f64,
    pub q_minus: f64,
    pub q_plus: f64,
    pub checks: Vec<InequalityCheck>,
    pub pass: bool,
}

/// The four norm–modular inequalities, each applicable on one side of `m = 1`.
pub fn check_norm_modular_bounds(u: &GridFunction, q: &ExponentField) -> Result<NormModularReport> {
    let qv = q.sample(u.partition());
    let (q_minus, q_plus) = min_max(qv.values());
    if !q_plus.is_finite() {
        return Err(Error::Precondition("the exponent must be bounded".into()));
    }
    let m = modular_sampled(u, &qv)?;
    let norm = luxemburg_norm_sampled(u, &qv)?.value;
    let (small, large) = (m <= 1.0, m >= 1.0);
    let checks = vec![
        InequalityCheck::new("‖u‖ ≤ m^(1/q₊) when m ≤ 1", norm, m.powf(1.0 / q_plus), small),
        InequalityCheck::new("m^(1/q₋) ≤ ‖u‖ when m ≤ 1", m.powf(1.0 / q_minus), norm, small),
        InequalityCheck::new("‖u‖ ≤ m^(1/q₋) when m ≥ 1", norm, m.powf(1.0 / q_minus), large),
        InequalityCheck::new("m^(1/q₊) ≤ ‖u‖ when m ≥ 1", m.powf(1.0 / q_plus), norm, large),
    ];
    let pass = checks.iter().all(|c| c.pass);
    Ok(NormModularReport { modular: m, norm, q_minus, q_plus, checks, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerBridgeReport {
    pub norm_p: f64,
    /// `‖ |u|^{q(·)} ‖_{r(·)}` with `r = p/q`.
    pub middle: f64,
    pub q_minus: f64,
    pub q_plus: f64,
    pub checks: Vec<InequalityCheck>,
    /// Set when `‖u‖_{p(·)} > 1`; the bridge is then not asserted.
    pub skipped: Option<String>,
    pub pass: bool,
}

/// `‖u‖_p^{q₊} ≤ ‖ |u|^q ‖_r ≤ ‖u‖_p^{q₋}` for `‖u‖_p ≤ 1`.
pub fn check_power_bridge(u: &GridFunction, p: &ExponentField, q: &ExponentField) -> Result<PowerBridgeReport> {
    let pv = p.sample(u.partition());
    let qv = q.sample(u.partition());
    if pv.values().iter().zip(qv.values()).any(|(a, b)| b > a || !a.is_finite()) {
        return Err(Error::Precondition("the power bridge needs q ≤ p < ∞".into()));
    }
    let (q_minus, q_plus) = min_max(qv.values());
    let norm_p = luxemburg_norm_sampled(u, &pv)?.value;
    let powered = u.zip_with(&qv, |uv, qx| uv.abs().powf(qx))?;
    let r = pv.zip_with(&qv, |a, b| a / b)?;
    let middle = luxemburg_norm_sampled(&powered, &r)?.value;
    let applicable = norm_p <= 1.0 + CHECK_SLACK;
    let checks = vec![
        InequalityCheck::new("‖u‖^(q₊) ≤ ‖|u|^q‖_r", norm_p.powf(q_plus), middle, applicable),
        InequalityCheck::new("‖|u|^q‖_r ≤ ‖u‖^(q₋)", middle, norm_p.powf(q_minus), applicable),
    ];
    let skipped = (!applicable).then(|| format!("‖u‖_p = {norm_p} exceeds 1"));
    let pass = checks.iter().all(|c| c.pass);
    Ok(PowerBridgeReport { norm_p, middle, q_minus, q_plus, checks, skipped, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FatouReport {
    pub norms: Vec<f64>,
    pub limit_norm: f64,
    pub nondecreasing: bool,
    /// `‖u‖ − ‖u_last‖`.
    pub final_gap: f64,
    pub pass: bool,
}

/// Norms along a pointwise nondecreasing sequence `0 ≤ u_n ↗ u`.
///
/// Passes when the norms are nondecreasing and never exceed `‖u‖`.
pub fn check_fatou(sequence: &[GridFunction], limit: &GridFunction, p: &ExponentField) -> Result<FatouReport> {
    if sequence.is_empty() {
        return Err(Error::Input("the sequence is empty".into()));
    }
    let mut prev: Option<&GridFunction> = None;
    for u in sequence.iter().chain(std::iter::once(limit)) {
        u.check_same_partition(limit)?;
        if u.values().iter().any(|v| *v < 0.0) {
            return Err(Error::Input("sequence members must be nonnegative".into()));
        }
        if let Some(prev) = prev {
            if prev.values().iter().zip(u.values()).any(|(a, b)| a > b) {
                return Err(Error::Input("sequence is not pointwise nondecreasing".into()));
            }
        }
        prev = Some(u);
    }
    let pv = p.sample(limit.partition());
    let norms: Vec<f64> = sequence.iter().map(|u| luxemburg_norm_sampled(u, &pv).map(|n| n.value)).collect::<Result<_>>()?;
    let limit_norm = luxemburg_norm_sampled(limit, &pv)?.value;
    let slack = |v: f64| CHECK_SLACK * v.max(1.0);
    let nondecreasing = norms.windows(2).all(|w| w[1] >= w[0] - slack(w[0]));
    let bounded = norms.iter().all(|n| *n <= limit_norm + slack(limit_norm));
    let final_gap = limit_norm - norms[norms.len() - 1];
    Ok(FatouReport { norms, limit_norm, nondecreasing, final_gap, pass: nondecreasing && bounded })
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::expr::Expr;
    use crate::grid::{uniform_breaks, Partition};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn unit_grid(n: usize) -> Arc<Partition> {
        Arc::new(Partition::uniform(&Domain::unit_interval(), n).unwrap())
    }

    fn half_split() -> ExponentField {
        ExponentField::new(Expr::step(0, vec![0.5], vec![1.0, 2.0]), Domain::unit_interval())
    }

    #[test]
    fn modular_examples() {
        let g = unit_grid(64);
        let one = GridFunction::sample(&g, &Expr::Const(1.0));
        let m = modular(&one, &ExponentField::constant(2.0, Domain::unit_interval())).unwrap();
        assert!((m.value - 1.0).abs() < 1e-15 && m.quadrature_error < 1e-15);

        let two = GridFunction::sample(&g, &Expr::Const(2.0));
        let m = modular(&two, &half_split()).unwrap();
        assert!((m.value - 3.0).abs() < 1e-14);

        let p2 = ExponentField::constant(2.0, Domain::unit_interval());
        let default = ExponentField::new(Expr::x(), Domain::unit_interval()).default_partition().unwrap();
        let x = GridFunction::sample(&default, &Expr::x());
        let m = modular(&x, &p2).unwrap();
        assert!((m.value - 1.0 / 3.0).abs() < 1e-8, "{m:?}");
        assert!(m.quadrature_error < 1e-6);
    }

    #[test]
    fn modular_rejects_non_finite() {
        let g = unit_grid(4);
        let u = GridFunction::from_values(&g, vec![1.0, f64::NAN, 0.0, 1.0]).unwrap();
        assert!(matches!(modular(&u, &ExponentField::constant(2.0, Domain::unit_interval())), Err(Error::Input(_))));
    }

    #[test]
    fn norm_examples() {
        let g = unit_grid(64);
        let one = GridFunction::sample(&g, &Expr::Const(1.0));
        let p = ExponentField::new(1.0 + Expr::x() * Expr::x(), Domain::unit_interval());
        let n = luxemburg_norm(&one, &p).unwrap();
        assert!((n.value - 1.0).abs() < 1e-12);

        let two = GridFunction::sample(&g, &Expr::Const(2.0));
        let n = luxemburg_norm(&two, &half_split()).unwrap();
        assert!((n.value - 2.0).abs() < 1e-10, "{n:?}");

        let fine = unit_grid(4096);
        let x = GridFunction::sample(&fine, &Expr::x());
        let n = luxemburg_norm(&x, &ExponentField::constant(2.0, Domain::unit_interval())).unwrap();
        assert!((n.value - (1.0f64 / 3.0).sqrt()).abs() < 1e-7);
    }

    #[test]
    fn norm_of_zero_is_zero() {
        let g = unit_grid(8);
        let z = GridFunction::sample(&g, &Expr::Const(0.0));
        let n = luxemburg_norm(&z, &ExponentField::constant(3.0, Domain::unit_interval())).unwrap();
        assert_eq!(n.value, 0.0);
    }

    #[test]
    fn bracket_witnesses_the_root() {
        let g = unit_grid(50);
        let u = GridFunction::sample(&g, &(Expr::x() * 7.0 + 0.1));
        let p = ExponentField::new(1.2 + Expr::x() * 2.0, Domain::unit_interval());
        let pv = p.sample(&g);
        let n = luxemburg_norm_sampled(&u, &pv).unwrap();
        let (lo, hi) = n.bracket;
        assert!(lo <= n.value && n.value <= hi);
        assert!((hi - lo) / n.value.max(1.0) <= 1e-10);
        assert!(modular_sampled(&u.scale(1.0 / hi), &pv).unwrap() <= 1.0);
        assert!(modular_sampled(&u.scale(1.0 / lo), &pv).unwrap() >= 1.0);
    }

    #[test]
    fn infinite_exponent_cells() {
        let g = unit_grid(4);
        let u = GridFunction::from_values(&g, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let p = GridFunction::from_values(&g, vec![f64::INFINITY, f64::INFINITY, 2.0, 2.0]).unwrap();
        // finite part alone: 0.5/λ² = 1 ⇒ λ = 0.707…, the ∞ part forces λ ≥ 1
        let n = luxemburg_norm_sampled(&u, &p).unwrap();
        assert!((n.value - 1.0).abs() < 1e-12);
        let p = GridFunction::from_values(&g, vec![f64::INFINITY, 2.0, 2.0, 2.0]).unwrap();
        let u = GridFunction::from_values(&g, vec![1.0, 3.0, 3.0, 3.0]).unwrap();
        let n = luxemburg_norm_sampled(&u, &p).unwrap();
        assert!((n.value - (27.0f64 / 4.0).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn lemma_bounds_collapse_at_unit_modular() {
        let g = unit_grid(10);
        let u = GridFunction::sample(&g, &Expr::Const(1.0));
        let q = ExponentField::new(1.5 + Expr::x(), Domain::unit_interval());
        let r = check_norm_modular_bounds(&u, &q).unwrap();
        assert!(r.pass);
        assert!((r.norm - 1.0).abs() < 1e-12);
        for c in &r.checks {
            assert!(c.applicable && c.margin.abs() < 1e-12);
        }
    }

    #[test]
    fn lemma_bounds_constant_case() {
        let g = unit_grid(10);
        let u = GridFunction::sample(&g, &Expr::Const(0.5));
        let r = check_norm_modular_bounds(&u, &ExponentField::constant(2.0, Domain::unit_interval())).unwrap();
        assert!((r.modular - 0.25).abs() < 1e-15 && (r.norm - 0.5).abs() < 1e-12);
        assert!(r.pass);
        assert!(r.checks[0].applicable && !r.checks[2].applicable);
    }

    #[test]
    fn power_bridge_examples() {
        let g = unit_grid(16);
        let u = GridFunction::sample(&g, &Expr::Const(0.5));
        let d = Domain::unit_interval();
        let r = check_power_bridge(&u, &ExponentField::constant(2.0, d.clone()), &ExponentField::constant(1.0, d.clone())).unwrap();
        assert!((r.middle - 0.5).abs() < 1e-12 && r.pass && r.skipped.is_none());

        let r = check_power_bridge(&u, &ExponentField::constant(2.5, d.clone()), &ExponentField::constant(2.5, d.clone())).unwrap();
        assert!((r.middle - r.norm_p.powf(2.5)).abs() < 1e-12);
        assert!(r.checks.iter().all(|c| c.margin.abs() < 1e-11));

        let big = GridFunction::sample(&g, &Expr::Const(3.0));
        let r = check_power_bridge(&big, &ExponentField::constant(2.0, d.clone()), &ExponentField::constant(1.0, d)).unwrap();
        assert!(r.skipped.is_some() && r.pass);
    }

    #[test]
    fn fatou_sequences() {
        let g = unit_grid(200);
        let d = Domain::unit_interval();
        let scaled: Vec<GridFunction> = (1..=20).map(|n| GridFunction::sample(&g, &Expr::Const(1.0 - 1.0 / n as f64))).collect();
        let one = GridFunction::sample(&g, &Expr::Const(1.0));
        let r = check_fatou(&scaled, &one, &ExponentField::constant(2.0, d.clone())).unwrap();
        assert!(r.pass);
        for (n, v) in r.norms.iter().enumerate() {
            assert!((v - (1.0 - 1.0 / (n + 1) as f64)).abs() < 1e-12);
        }

        let ind: Vec<GridFunction> = [2usize, 4, 5, 10, 20, 40]
            .iter()
            .map(|&n| GridFunction::sample(&g, &(1.0 - Expr::x()).indicator_ge(1.0 / n as f64)))
            .collect();
        let r = check_fatou(&ind, &one, &ExponentField::constant(1.0, d.clone())).unwrap();
        assert!(r.pass && r.norms.iter().zip([0.5, 0.75, 0.8, 0.9, 0.95, 0.975]).all(|(a, b)| (a - b).abs() < 1e-12));

        // truncations of x^{-1/2}: the limit has norm 2 in L¹
        let breaks = {
            let mut b: Vec<f64> = (0..=60).map(|j| 0.5f64.powi(60 - j)).collect();
            b.insert(0, 0.0);
            b.dedup();
            b
        };
        let fine: Vec<f64> = breaks.windows(2).flat_map(|w| uniform_breaks(w[0], w[1], 64)).collect();
        let fine = crate::grid::normalize_breaks(fine, 0.0, 1.0);
        let part = Arc::new(Partition::tensor(&d, vec![fine]).unwrap());
        let f = |n: f64| GridFunction::sample(&part, &Expr::x().pow(-0.5).min(n));
        let seq: Vec<GridFunction> = [1.0, 4.0, 16.0, 256.0, 4096.0].iter().map(|&n| f(n)).collect();
        let lim = f(1e12);
        let r = check_fatou(&seq, &lim, &ExponentField::constant(1.0, d)).unwrap();
        assert!(r.pass);
        assert!((r.limit_norm - 2.0).abs() < 1e-3, "{r:?}");
        // ∫ min(n, x^{-1/2}) = 2 − 1/n
        for (v, n) in r.norms.iter().zip([1.0, 4.0, 16.0, 256.0, 4096.0]) {
            assert!((v - (2.0 - 1.0 / n)).abs() < 1e-3, "{v} vs {n}");
        }
    }

    #[test]
    fn fatou_rejects_decreasing_input() {
        let g = unit_grid(4);
        let a = GridFunction::sample(&g, &Expr::Const(1.0));
        let b = GridFunction::sample(&g, &Expr::Const(0.5));
        assert!(check_fatou(&[a], &b, &ExponentField::constant(2.0, Domain::unit_interval())).is_err());
    }

    fn piecewise() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..5.0, 1..40)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn homogeneity(vals in piecewise(), c in -20.0f64..20.0, p0 in 1.0f64..3.0) {
            prop_assume!(c.abs() > 1e-3 && vals.iter().any(|v| *v > 0.0));
            let g = unit_grid(vals.len());
            let u = GridFunction::from_values(&g, vals).unwrap();
            let p = ExponentField::new(p0 + Expr::x(), Domain::unit_interval());
            let a = luxemburg_norm(&u, &p).unwrap().value;
            let b = luxemburg_norm(&u.scale(c), &p).unwrap().value;
            prop_assert!((b - c.abs() * a).abs() <= 1e-9 * b);
        }

        #[test]
        fn unit_ball_characterization(vals in piecewise(), p0 in 1.0f64..4.0) {
            let g = unit_grid(vals.len());
            let u = GridFunction::from_values(&g, vals).unwrap();
            let p = ExponentField::new(p0 + Expr::x() * 0.5, Domain::unit_interval());
            let pv = p.sample(&g);
            let n = luxemburg_norm_sampled(&u, &pv).unwrap().value;
            let m = modular_sampled(&u, &pv).unwrap();
            if n <= 1.0 - 1e-9 { prop_assert!(m <= 1.0 + 1e-9); }
            if m <= 1.0 - 1e-9 { prop_assert!(n <= 1.0 + 1e-9); }
            if n >= 1.0 + 1e-9 { prop_assert!(m >= 1.0 - 1e-9); }
        }

        #[test]
        fn constant_exponent_reduces_to_integral_norm(vals in piecewise(), p in prop::sample::select(vec![1.0, 1.5, 2.0, 3.0])) {
            prop_assume!(vals.iter().any(|v| *v > 0.0));
            let g = unit_grid(vals.len());
            let w = 1.0 / vals.len() as f64;
            let classical = vals.iter().map(|v| v.powf(p) * w).sum::<f64>().powf(1.0 / p);
            let u = GridFunction::from_values(&g, vals).unwrap();
            let n = luxemburg_norm(&u, &ExponentField::constant(p, Domain::unit_interval())).unwrap().value;
            prop_assert!((n - classical).abs() <= 1e-8 * classical);
        }

        #[test]
        fn lattice_monotone(vals in piecewise(), shrink in prop::collection::vec(0.0f64..1.0, 40)) {
            let g = unit_grid(vals.len());
            let small: Vec<f64> = vals.iter().zip(&shrink).map(|(v, s)| v * s).collect();
            let p = ExponentField::new(1.0 + Expr::x() * 2.0, Domain::unit_interval());
            let a = luxemburg_norm(&GridFunction::from_values(&g, small).unwrap(), &p).unwrap().value;
            let b = luxemburg_norm(&GridFunction::from_values(&g, vals).unwrap(), &p).unwrap().value;
            prop_assert!(a <= b + 1e-12);
        }

        #[test]
        fn embedding_into_smaller_exponent(vals in piecewise(), q0 in 1.0f64..2.0, gap in 0.0f64..2.0) {
            let g = unit_grid(vals.len());
            let u = GridFunction::from_values(&g, vals).unwrap();
            let q = ExponentField::new(q0 + Expr::x() * 0.3, Domain::unit_interval());
            let p = ExponentField::new(q0 + gap + Expr::x() * 0.3, Domain::unit_interval());
            let nq = luxemburg_norm(&u, &q).unwrap().value;
            let np = luxemburg_norm(&u, &p).unwrap().value;
            prop_assert!(nq <= 2.0 * np + 1e-12);
        }
    }
}
