//! Closed-form real functions on `R^N`, evaluated lazily at points.
//!
//! Exponent fields, weights and test functions are all expression trees.
//! The tree also reports where it is discontinuous (`breakpoints`) and where
//! it is singular (`attractors`) so that partitions can be aligned and graded.

use std::ops;
use std::sync::Arc;

use crate::cantor::CantorStage;
use crate::domain::euclidean;

/// Tolerance below which two exponent values are treated as coincident.
pub const COINCIDENCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// The `i`-th coordinate.
    Coord(usize),
    /// Euclidean distance to a fixed point.
    DistToPoint(Vec<f64>),
    /// Distance to a Cantor set (embedded along the first axis), from stage endpoints.
    DistToCantor(Arc<CantorStage>),
    /// Piecewise constant along one axis: `values[i]` on `[breaks[i-1], breaks[i])`.
    Step { axis: usize, breaks: Vec<f64>, values: Vec<f64> },
    /// Nearest-sample lookup in scattered data.
    Samples(Arc<SampleTable>),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, Arc<Expr>),
    Neg(Arc<Expr>),
    Ln(Arc<Expr>),
    Exp(Arc<Expr>),
    Sqrt(Arc<Expr>),
    Abs(Arc<Expr>),
    Min(Arc<Expr>, Arc<Expr>),
    Max(Arc<Expr>, Arc<Expr>),
    /// `1/(a − b)`, or `+∞` where `|a − b| ≤ COINCIDENCE_TOL`.
    InvGap(Arc<Expr>, Arc<Expr>),
    /// `1` where the first argument is `≥` the threshold, `0` elsewhere.
    Indicator(Arc<Expr>, f64),
}

/// Scattered samples `(x, value)` read from a grid file.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl SampleTable {
    /// Rows are sorted by the first coordinate so one-dimensional lookups can bisect.
    pub fn new(mut rows: Vec<(Vec<f64>, f64)>) -> Option<Self> {
        let dim = rows.first()?.0.len();
        if dim == 0 || rows.iter().any(|(x, _)| x.len() != dim) {
            return None;
        }
        rows.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]));
        let (points, values) = rows.into_iter().unzip();
        Some(Self { points, values })
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn lookup(&self, x: &[f64]) -> f64 {
        if self.dim() == 1 {
            let i = self.points.partition_point(|p| p[0] < x[0]);
            if i == 0 {
                return self.values[0];
            }
            if i == self.len() {
                return self.values[i - 1];
            }
            // ties go to the right neighbour, matching right-continuous steps
            let left = x[0] - self.points[i - 1][0];
            let right = self.points[i][0] - x[0];
            return if left < right { self.values[i - 1] } else { self.values[i] };
        }
        let mut best = (f64::INFINITY, 0);
        for (i, p) in self.points.iter().enumerate() {
            let d = euclidean(p, x);
            if d < best.0 {
                best = (d, i);
            }
        }
        self.values[best.1]
    }

    /// Midpoints between consecutive distinct sample abscissae (1-D only).
    fn switch_points(&self) -> Vec<f64> {
        if self.dim() != 1 {
            return Vec::new();
        }
        self.points
            .windows(2)
            .filter(|w| w[0][0] < w[1][0])
            .map(|w| 0.5 * (w[0][0] + w[1][0]))
            .collect()
    }
}

/// A point (or point set) near which an expression is singular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attractor {
    pub point: f64,
    /// Radius of the graded neighbourhood.
    pub radius: f64,
}

/// Cantor stages deeper than this are not used as grading attractors.
const ATTRACTOR_STAGE: usize = 6;

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn coord(i: usize) -> Self {
        Expr::Coord(i)
    }

    pub fn x() -> Self {
        Expr::Coord(0)
    }

    pub fn dist_to_point(p: Vec<f64>) -> Self {
        Expr::DistToPoint(p)
    }

    pub fn dist_to_cantor(stage: CantorStage) -> Self {
        Expr::DistToCantor(Arc::new(stage))
    }

    /// Piecewise constant along `axis`. Requires `values.len() == breaks.len() + 1`.
    pub fn step(axis: usize, breaks: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), breaks.len() + 1, "step needs one more value than breaks");
        assert!(breaks.windows(2).all(|w| w[0] < w[1]), "step breaks must increase");
        Expr::Step { axis, breaks, values }
    }

    pub fn samples(table: SampleTable) -> Self {
        Expr::Samples(Arc::new(table))
    }

    pub fn pow(self, e: impl Into<Expr>) -> Self {
        Expr::Pow(Arc::new(self), Arc::new(e.into()))
    }

    pub fn ln(self) -> Self {
        Expr::Ln(Arc::new(self))
    }

    pub fn exp(self) -> Self {
        Expr::Exp(Arc::new(self))
    }

    pub fn sqrt(self) -> Self {
        Expr::Sqrt(Arc::new(self))
    }

    pub fn abs(self) -> Self {
        Expr::Abs(Arc::new(self))
    }

    pub fn min(self, other: impl Into<Expr>) -> Self {
        Expr::Min(Arc::new(self), Arc::new(other.into()))
    }

    pub fn max(self, other: impl Into<Expr>) -> Self {
        Expr::Max(Arc::new(self), Arc::new(other.into()))
    }

    pub fn inv_gap(self, other: impl Into<Expr>) -> Self {
        Expr::InvGap(Arc::new(self), Arc::new(other.into()))
    }

    pub fn indicator_ge(self, threshold: f64) -> Self {
        Expr::Indicator(Arc::new(self), threshold)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Coord(i) => x[*i],
            Expr::DistToPoint(p) => euclidean(x, p),
            Expr::DistToCantor(stage) => stage.distance_to_set(x).value,
            Expr::Step { axis, breaks, values } => values[breaks.partition_point(|b| *b <= x[*axis])],
            Expr::Samples(t) => t.lookup(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => a.eval(x).powf(b.eval(x)),
            Expr::Neg(a) => -a.eval(x),
            Expr::Ln(a) => a.eval(x).ln(),
            Expr::Exp(a) => a.eval(x).exp(),
            Expr::Sqrt(a) => a.eval(x).sqrt(),
            Expr::Abs(a) => a.eval(x).abs(),
            Expr::Min(a, b) => a.eval(x).min(b.eval(x)),
            Expr::Max(a, b) => a.eval(x).max(b.eval(x)),
            Expr::InvGap(a, b) => {
                let d = a.eval(x) - b.eval(x);
                if d.abs() <= COINCIDENCE_TOL {
                    f64::INFINITY
                } else {
                    1.0 / d
                }
            }
            Expr::Indicator(a, t) => {
                if a.eval(x) >= *t {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b)
            | Expr::Min(a, b)
            | Expr::Max(a, b)
            | Expr::InvGap(a, b) => vec![a, b],
            Expr::Neg(a) | Expr::Ln(a) | Expr::Exp(a) | Expr::Sqrt(a) | Expr::Abs(a) | Expr::Indicator(a, _) => {
                vec![a]
            }
            _ => Vec::new(),
        }
    }

    /// True when the expression does not depend on the point.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Coord(_) | Expr::DistToPoint(_) | Expr::DistToCantor(_) => false,
            Expr::Step { values, .. } => values.windows(2).all(|w| w[0] == w[1]),
            Expr::Samples(t) => t.values().windows(2).all(|w| w[0] == w[1]),
            _ => self.children().iter().all(|c| c.is_constant()),
        }
    }

    /// Sorted jump locations along `axis` (step breaks and sample switch points).
    pub fn breakpoints(&self, axis: usize) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_breaks(axis, &mut out);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn collect_breaks(&self, axis: usize, out: &mut Vec<f64>) {
        match self {
            Expr::Step { axis: a, breaks, .. } if *a == axis => out.extend(breaks),
            Expr::Samples(t) if axis == 0 => out.extend(t.switch_points()),
            _ => self.children().iter().for_each(|c| c.collect_breaks(axis, out)),
        }
    }

    /// Points along `axis` near which the expression may be singular.
    pub fn attractors(&self, axis: usize) -> Vec<Attractor> {
        let mut out = Vec::new();
        self.collect_attractors(axis, &mut out);
        out.sort_by(|a, b| a.point.total_cmp(&b.point));
        out.dedup_by(|a, b| a.point == b.point);
        out
    }

    fn collect_attractors(&self, axis: usize, out: &mut Vec<Attractor>) {
        match self {
            Expr::DistToPoint(p) => out.push(Attractor { point: p[axis], radius: f64::INFINITY }),
            Expr::DistToCantor(stage) if axis == 0 => {
                let m = stage.n().min(ATTRACTOR_STAGE);
                let coarse = crate::cantor::build_stage(stage.gaps(), m).expect("shallower stage of a valid stage");
                let radius = 0.5 * coarse.eps_n();
                if let Ok(ends) = coarse.endpoints() {
                    out.extend(ends.into_iter().map(|point| Attractor { point, radius }));
                }
            }
            Expr::DistToCantor(_) => out.push(Attractor { point: 0.0, radius: f64::INFINITY }),
            _ => self.children().iter().for_each(|c| c.collect_attractors(axis, out)),
        }
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::Const(c)
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl<R: Into<Expr>> ops::$trait<R> for Expr {
            type Output = Expr;
            fn $method(self, rhs: R) -> Expr {
                Expr::$variant(Arc::new(self), Arc::new(rhs.into()))
            }
        }
        impl ops::$trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Arc::new(Expr::Const(self)), Arc::new(rhs))
            }
        }
    };
}

binary_op!(Add, add, Add);
binary_op!(Sub, sub, Sub);
binary_op!(Mul, mul, Mul);
binary_op!(Div, div, Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Arc::new(self))
    }
}
