//! Exponent fields `p(·)` on a domain and the exponents derived from them.

use std::sync::Arc;

use serde::Serialize;

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::expr::{Expr, COINCIDENCE_TOL};
use crate::grid::{GridFunction, GridResolution, Partition};

/// A measurable exponent `p: Ω → [1, ∞)` given by an expression.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentField {
    expr: Expr,
    domain: Domain,
}

/// `p₋`, `p₊` over an evaluation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentBounds {
    pub minus: f64,
    pub plus: f64,
    /// Number of evaluation points used.
    pub samples: usize,
}

impl ExponentField {
    pub fn new(expr: Expr, domain: Domain) -> Self {
        Self { expr, domain }
    }

    pub fn constant(c: f64, domain: Domain) -> Self {
        Self::new(Expr::Const(c), domain)
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.expr.eval(x)
    }

    pub fn is_constant(&self) -> bool {
        self.expr.is_constant()
    }

    /// Partition adapted to this field's jumps and singular points.
    pub fn default_partition(&self) -> Result<Arc<Partition>> {
        Partition::adapted(&self.domain, &[&self.expr], GridResolution::for_dim(self.domain.dim())).map(Arc::new)
    }

    pub fn sample(&self, partition: &Arc<Partition>) -> GridFunction {
        GridFunction::sample(partition, &self.expr)
    }

    /// Infimum and supremum over the cell centers of `partition`.
    pub fn bounds_on(&self, partition: &Arc<Partition>) -> ExponentBounds {
        let v = self.sample(partition);
        let (minus, plus) = v.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        ExponentBounds { minus, plus, samples: v.len() }
    }

    pub fn bounds(&self) -> Result<ExponentBounds> {
        if let Some(c) = self.expr.as_const() {
            return Ok(ExponentBounds { minus: c, plus: c, samples: 1 });
        }
        Ok(self.bounds_on(&self.default_partition()?))
    }

    /// Checks `1 ≤ p(x) < ∞` at every cell center.
    pub fn validate_on(&self, partition: &Arc<Partition>) -> Result<ExponentBounds> {
        let b = self.bounds_on(partition);
        if !(b.minus >= 1.0 - COINCIDENCE_TOL) || !b.plus.is_finite() {
            return Err(Error::Input(format!("exponent must satisfy 1 ≤ p < ∞, sampled range [{}, {}]", b.minus, b.plus)));
        }
        Ok(b)
    }

    fn same_domain(&self, other: &ExponentField) -> Result<()> {
        if self.domain == other.domain {
            Ok(())
        } else {
            Err(Error::Domain("exponent fields live on different domains".into()))
        }
    }
}

/// `p#(x) = N p(x) / (N − p(x))`.
pub fn sobolev_conjugate(p: &ExponentField, n: usize) -> Result<ExponentField> {
    let b = p.bounds()?;
    let nf = n as f64;
    if !(b.plus < nf) {
        return Err(Error::Domain(format!("Sobolev conjugate needs p₊ < N, got p₊ = {} with N = {n}", b.plus)));
    }
    let expr = match p.expr().as_const() {
        Some(c) => Expr::Const(nf * c / (nf - c)),
        None => nf * p.expr().clone() / (nf - p.expr().clone()),
    };
    Ok(ExponentField::new(expr, p.domain().clone()))
}

/// `r = p/q`, its conjugate `r' = r/(r − 1) = p/(p − q)` and `s = 1/(p − q)`.
///
/// `r'` and `s` evaluate to `+∞` on the coincidence set `{p = q}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioExponents {
    pub r: ExponentField,
    pub r_conj: ExponentField,
    pub s: ExponentField,
}

pub fn ratio_exponents(p: &ExponentField, q: &ExponentField, partition: &Arc<Partition>) -> Result<RatioExponents> {
    p.same_domain(q)?;
    let pv = p.sample(partition);
    let qv = q.sample(partition);
    if let Some(i) = pv.values().iter().zip(qv.values()).position(|(a, b)| *b > *a + COINCIDENCE_TOL) {
        let x = &partition.cells()[i].center;
        return Err(Error::Precondition(format!(
            "q ≤ p fails at {x:?}: q = {}, p = {}",
            qv.values()[i],
            pv.values()[i]
        )));
    }
    let domain = p.domain().clone();
    let (pe, qe) = (p.expr().clone(), q.expr().clone());
    let (r, r_conj, s) = match (pe.as_const(), qe.as_const()) {
        (Some(a), Some(b)) => {
            let s = if (a - b).abs() <= COINCIDENCE_TOL { f64::INFINITY } else { 1.0 / (a - b) };
            (Expr::Const(a / b), Expr::Const(a * s), Expr::Const(s))
        }
        _ => {
            let s = pe.clone().inv_gap(qe.clone());
            (pe.clone() / qe, pe * s.clone(), s)
        }
    };
    Ok(RatioExponents {
        r: ExponentField::new(r, domain.clone()),
        r_conj: ExponentField::new(r_conj, domain.clone()),
        s: ExponentField::new(s, domain),
    })
}

/// Points `lo + i (hi − lo)/(samples − 1)` per axis, restricted to the domain.
fn sample_points(domain: &Domain, samples: usize) -> Vec<Vec<f64>> {
    let (lower, upper) = domain.bounding_box();
    let mut points = vec![Vec::new()];
    for (lo, hi) in lower.iter().zip(&upper) {
        let axis: Vec<f64> = (0..samples).map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64).collect();
        points = points
            .into_iter()
            .flat_map(|p| axis.iter().map(move |&x| {
                let mut q = p.clone();
                q.push(x);
                q
            }))
            .collect();
    }
    points.retain(|x| domain.contains(x));
    points
}

/// Smallest `c` with `|p(x) − p(y)| ≤ −c / ln|x − y|` over all sampled pairs with
/// `0 < |x − y| ≤ 1/2`. `samples` is the number of points per axis (endpoints included).
pub fn log_holder_modulus(p: &ExponentField, samples: usize) -> Result<f64> {
    if samples < 2 {
        return Err(Error::Input("log-Hölder estimation needs at least two samples per axis".into()));
    }
    if p.is_constant() {
        return Ok(0.0);
    }
    let points = sample_points(p.domain(), samples);
    let values: Vec<f64> = points.iter().map(|x| p.eval(x)).collect();
    let mut c: f64 = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = crate::domain::euclidean(&points[i], &points[j]);
            if d > 0.0 && d <= 0.5 {
                c = c.max((values[i] - values[j]).abs() * -d.ln());
            }
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> Domain {
        Domain::unit_interval()
    }

    #[test]
    fn conjugate_constant_cases() {
        let c = sobolev_conjugate(&ExponentField::constant(1.0, Domain::unit_cube(2)), 2).unwrap();
        assert_eq!(c.expr().as_const(), Some(2.0));
        let c = sobolev_conjugate(&ExponentField::constant(2.0, Domain::unit_cube(3)), 3).unwrap();
        assert_eq!(c.expr().as_const(), Some(6.0));
    }

    #[test]
    fn conjugate_of_affine_field() {
        let d = Domain::interval(0.0, 0.5).unwrap();
        let p = ExponentField::new(1.0 + Expr::x(), d);
        let c = sobolev_conjugate(&p, 2).unwrap();
        assert!((c.eval(&[0.5]) - 6.0).abs() < 1e-14);
        assert!(c.eval(&[0.25]) > p.eval(&[0.25]));
    }

    #[test]
    fn conjugate_rejects_large_exponent() {
        let p = ExponentField::constant(2.0, Domain::unit_cube(2));
        assert!(matches!(sobolev_conjugate(&p, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn ratio_constant_cases() {
        let part = Arc::new(Partition::uniform(&unit(), 8).unwrap());
        let rx = ratio_exponents(&ExponentField::constant(2.0, unit()), &ExponentField::constant(1.0, unit()), &part).unwrap();
        assert_eq!((rx.r.eval(&[0.1]), rx.r_conj.eval(&[0.1]), rx.s.eval(&[0.1])), (2.0, 2.0, 1.0));
        let rx = ratio_exponents(&ExponentField::constant(2.0, unit()), &ExponentField::constant(2.0, unit()), &part).unwrap();
        assert_eq!(rx.r.eval(&[0.1]), 1.0);
        assert_eq!(rx.r_conj.eval(&[0.1]), f64::INFINITY);
        assert_eq!(rx.s.eval(&[0.1]), f64::INFINITY);
        let rx = ratio_exponents(&ExponentField::constant(3.0, unit()), &ExponentField::constant(2.0, unit()), &part).unwrap();
        assert_eq!((rx.r.eval(&[0.1]), rx.r_conj.eval(&[0.1]), rx.s.eval(&[0.1])), (1.5, 3.0, 1.0));
    }

    #[test]
    fn ratio_rejects_q_above_p() {
        let part = Arc::new(Partition::uniform(&unit(), 8).unwrap());
        let p = ExponentField::new(2.0 + Expr::x(), unit());
        let q = ExponentField::constant(2.5, unit());
        assert!(matches!(ratio_exponents(&p, &q, &part), Err(Error::Precondition(_))));
    }

    #[test]
    fn bounds_bracket_samples() {
        let p = ExponentField::new(1.5 + Expr::x() * Expr::x(), unit());
        let part = p.default_partition().unwrap();
        let b = p.bounds_on(&part);
        assert!(b.minus >= 1.5 && b.minus < 1.5 + 1e-5);
        assert!(b.plus <= 2.5 && b.plus > 2.5 - 1e-2);
        for c in part.cells() {
            let v = p.eval(&c.center);
            assert!(b.minus <= v && v <= b.plus);
        }
    }

    #[test]
    fn log_holder_constant_is_zero() {
        assert_eq!(log_holder_modulus(&ExponentField::constant(2.0, unit()), 50).unwrap(), 0.0);
    }

    #[test]
    fn log_holder_of_log_field_is_bounded() {
        let e2 = (2.0f64).exp();
        let p = ExponentField::new(2.0 - 1.0 / (e2 / Expr::x()).ln(), unit());
        let brute = |n: usize| {
            let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
            let mut c: f64 = 0.0;
            for &x in &xs {
                for &y in &xs {
                    let d = (x - y).abs();
                    if d > 0.0 && d <= 0.5 {
                        let px = 2.0 - 1.0 / (e2 / x).ln();
                        let py = 2.0 - 1.0 / (e2 / y).ln();
                        c = c.max((px - py).abs() * -d.ln());
                    }
                }
            }
            c
        };
        for n in [50, 400, 2000] {
            let c = log_holder_modulus(&p, n).unwrap();
            assert!((c - brute(n)).abs() < 1e-12);
            assert!(c <= 2.0, "n = {n}: c = {c}");
        }
    }

    #[test]
    fn log_holder_of_sqrt_field_saturates() {
        // √d·ln(1/d) ≤ 2/e, so the pair maximum stays bounded under refinement
        let p = ExponentField::new(2.0 + Expr::x().sqrt(), unit());
        let cs: Vec<f64> = [100, 1000, 4000].iter().map(|&n| log_holder_modulus(&p, n).unwrap()).collect();
        for c in &cs {
            assert!(*c <= 2.0 / std::f64::consts::E + 1e-12, "{cs:?}");
        }
        assert!(cs[2] > 0.7);
    }

    #[test]
    fn log_holder_detects_unbounded_growth() {
        // p(x) = 2 + 1/√ln(e/x): the pair (0, d) gives ln(1/d)/√(1 + ln(1/d))
        let p = ExponentField::new(2.0 + 1.0 / (std::f64::consts::E / Expr::x()).ln().sqrt(), unit());
        let cs: Vec<f64> = [100, 1000, 10000].iter().map(|&n| log_holder_modulus(&p, n).unwrap()).collect();
        assert!(cs[0] < cs[1] && cs[1] < cs[2], "{cs:?}");
        let l = (9999f64).ln();
        assert!(cs[2] >= l / (1.0 + l).sqrt() - 1e-12);
    }

    #[test]
    fn log_holder_two_dimensional() {
        let p = ExponentField::new(1.0 + Expr::x() * 0.5 + Expr::coord(1) * 0.25, Domain::unit_cube(2));
        let c = log_holder_modulus(&p, 12).unwrap();
        assert!(c > 0.0 && c.is_finite());
    }

    proptest! {
        #[test]
        fn conjugate_is_monotone(a in 1.0f64..2.9, b in 1.0f64..2.9) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let d = Domain::unit_cube(3);
            let cl = sobolev_conjugate(&ExponentField::constant(lo, d.clone()), 3).unwrap();
            let ch = sobolev_conjugate(&ExponentField::constant(hi, d), 3).unwrap();
            prop_assert!(cl.eval(&[0.5; 3]) <= ch.eval(&[0.5; 3]));
            prop_assert!(cl.eval(&[0.5; 3]) > lo);
        }

        #[test]
        fn ratio_conjugates_sum_to_one(q0 in 1.0f64..3.0, gap in 0.01f64..2.0, slope in 0.0f64..1.0) {
            let d = unit();
            let part = Arc::new(Partition::uniform(&d, 32).unwrap());
            let q = ExponentField::new(q0 + slope * Expr::x(), d.clone());
            let p = ExponentField::new(q0 + gap + slope * Expr::x() + gap * Expr::x(), d);
            let rx = ratio_exponents(&p, &q, &part).unwrap();
            for c in part.cells() {
                let r = rx.r.eval(&c.center);
                let rc = rx.r_conj.eval(&c.center);
                prop_assert!(r > 1.0);
                prop_assert!((1.0 / r + 1.0 / rc - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn sampled_values_within_bounds(a in 1.0f64..3.0, b in -0.9f64..0.9) {
            let p = ExponentField::new(a + 1.0 + b * Expr::x(), unit());
            let part = Arc::new(Partition::uniform(&unit(), 64).unwrap());
            let bd = p.bounds_on(&part);
            for c in part.cells() {
                let v = p.eval(&c.center);
                prop_assert!(bd.minus <= v && v <= bd.plus);
            }
        }
    }
}
