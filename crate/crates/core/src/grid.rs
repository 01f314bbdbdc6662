//! Measured partitions of a domain and piecewise-constant functions on them.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::expr::{Attractor, Expr};
use crate::numerics::{pairwise_sum, unit_sphere_area};

/// Partitions above this size are sampled in parallel.
const PARALLEL_CELLS: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub enum CellShape {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Annular sector `r0 ≤ |x − o| < r1`, `θ0 ≤ arg < θ1` in the plane.
    Polar { r0: f64, r1: f64, theta0: f64, theta1: f64 },
    /// Spherical shell `r0 ≤ |x − o| < r1` in `R^N`.
    Shell { r0: f64, r1: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Evaluation point. For polar and shell cells it sits at the radial centroid.
    pub center: Vec<f64>,
    pub measure: f64,
    pub shape: CellShape,
}

/// A finite partition of a domain (up to a null set) into measured cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    domain: Domain,
    cells: Vec<Cell>,
    /// Center of polar and shell partitions.
    origin: Option<Vec<f64>>,
}

/// Default resolution of adapted partitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridResolution {
    /// Uniform cells per axis before alignment and grading.
    pub base: usize,
    /// Dyadic layers of grading around each attractor.
    pub levels: usize,
    /// Cells per dyadic layer.
    pub per_layer: usize,
}

impl GridResolution {
    pub fn for_dim(dim: usize) -> Self {
        match dim {
            1 => Self { base: 256, levels: 20, per_layer: 8 },
            2 => Self { base: 48, levels: 12, per_layer: 2 },
            _ => Self { base: 12, levels: 6, per_layer: 1 },
        }
    }
}

fn radial_centroid(r0: f64, r1: f64, dim: usize) -> f64 {
    let n = dim as f64;
    n / (n + 1.0) * (r1.powi(dim as i32 + 1) - r0.powi(dim as i32 + 1)) / (r1.powi(dim as i32) - r0.powi(dim as i32))
}

impl Partition {
    /// Tensor product of per-axis breakpoint lists over a box.
    pub fn tensor(domain: &Domain, breaks: Vec<Vec<f64>>) -> Result<Self> {
        let Domain::Box { lower, upper } = domain else {
            return Err(Error::Unsupported("tensor partitions need a box domain".into()));
        };
        if breaks.len() != lower.len() {
            return Err(Error::Input("one breakpoint list per axis is required".into()));
        }
        for (axis, b) in breaks.iter().enumerate() {
            let ok = b.len() >= 2
                && b.windows(2).all(|w| w[0] < w[1])
                && b[0] == lower[axis]
                && b[b.len() - 1] == upper[axis];
            if !ok {
                return Err(Error::Input(format!("axis {axis}: breaks must increase from lower to upper bound")));
            }
        }
        let mut cells = vec![Cell { center: vec![], measure: 1.0, shape: CellShape::Box { lower: vec![], upper: vec![] } }];
        for b in &breaks {
            let mut next = Vec::with_capacity(cells.len() * (b.len() - 1));
            for cell in &cells {
                let CellShape::Box { lower, upper } = &cell.shape else { unreachable!() };
                for w in b.windows(2) {
                    let mut lo = lower.clone();
                    let mut hi = upper.clone();
                    let mut c = cell.center.clone();
                    lo.push(w[0]);
                    hi.push(w[1]);
                    c.push(0.5 * (w[0] + w[1]));
                    next.push(Cell { center: c, measure: cell.measure * (w[1] - w[0]), shape: CellShape::Box { lower: lo, upper: hi } });
                }
            }
            cells = next;
        }
        Ok(Self { domain: domain.clone(), cells, origin: None })
    }

    /// `n` equal cells per axis.
    pub fn uniform(domain: &Domain, n: usize) -> Result<Self> {
        let (lower, upper) = domain.bounding_box();
        let breaks = lower.iter().zip(&upper).map(|(&lo, &hi)| uniform_breaks(lo, hi, n.max(1))).collect();
        Self::tensor(domain, breaks)
    }

    /// Tensor partition aligned with the jumps of `exprs` and dyadically graded
    /// toward their singular points.
    pub fn adapted(domain: &Domain, exprs: &[&Expr], res: GridResolution) -> Result<Self> {
        match domain {
            Domain::Box { lower, upper } => {
                let breaks = (0..lower.len())
                    .map(|axis| {
                        let mut b = uniform_breaks(lower[axis], upper[axis], res.base.max(1));
                        let mut attractors = Vec::new();
                        for e in exprs {
                            b.extend(e.breakpoints(axis));
                            attractors.extend(e.attractors(axis));
                        }
                        b.extend(graded_breaks(lower[axis], upper[axis], &attractors, res.levels, res.per_layer));
                        normalize_breaks(b, lower[axis], upper[axis])
                    })
                    .collect();
                Self::tensor(domain, breaks)
            }
            Domain::Ball { center, radius } => {
                let radial = uniform_breaks(0.0, *radius, res.base.max(1));
                if center.len() == 2 {
                    Self::polar_disk(center.clone(), radial, 4 * res.base.max(1))
                } else {
                    Self::shells(center.clone(), radial)
                }
            }
        }
    }

    /// Disk partitioned into `sectors` angular sectors per ring; rings follow `radial_breaks`.
    pub fn polar_disk(center: Vec<f64>, radial_breaks: Vec<f64>, sectors: usize) -> Result<Self> {
        if center.len() != 2 {
            return Err(Error::Domain("polar partitions are planar".into()));
        }
        let radius = check_radial(&radial_breaks)?;
        let sectors = sectors.max(1);
        let mut cells = Vec::with_capacity((radial_breaks.len() - 1) * sectors);
        for w in radial_breaks.windows(2) {
            for j in 0..sectors {
                let theta0 = 2.0 * PI * j as f64 / sectors as f64;
                let theta1 = 2.0 * PI * (j + 1) as f64 / sectors as f64;
                cells.push(polar_cell(&center, w[0], w[1], theta0, theta1));
            }
        }
        let domain = Domain::ball(center.clone(), radius)?;
        Ok(Self { domain, cells, origin: Some(center) })
    }

    /// Ball in `R^N` partitioned into concentric shells. Cell centers lie on the first axis,
    /// so only radial integrands are represented exactly.
    pub fn shells(center: Vec<f64>, radial_breaks: Vec<f64>) -> Result<Self> {
        let radius = check_radial(&radial_breaks)?;
        let cells = radial_breaks.windows(2).map(|w| shell_cell(&center, w[0], w[1])).collect();
        let domain = Domain::ball(center.clone(), radius)?;
        Ok(Self { domain, cells, origin: Some(center) })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn origin(&self) -> Option<&[f64]> {
        self.origin.as_deref()
    }

    pub fn measures(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.measure).collect()
    }

    pub fn total_measure(&self) -> f64 {
        pairwise_sum(&self.measures())
    }

    /// Splits every cell in half along each of its coordinates.
    pub fn refine(&self) -> Self {
        let origin = self.origin.clone();
        let cells = self
            .cells
            .iter()
            .flat_map(|cell| match &cell.shape {
                CellShape::Box { lower, upper } => split_box(lower, upper),
                CellShape::Polar { r0, r1, theta0, theta1 } => {
                    let o = origin.as_deref().expect("polar cells carry an origin");
                    let (rm, tm) = (0.5 * (r0 + r1), 0.5 * (theta0 + theta1));
                    vec![
                        polar_cell(o, *r0, rm, *theta0, tm),
                        polar_cell(o, *r0, rm, tm, *theta1),
                        polar_cell(o, rm, *r1, *theta0, tm),
                        polar_cell(o, rm, *r1, tm, *theta1),
                    ]
                }
                CellShape::Shell { r0, r1 } => {
                    let o = origin.as_deref().expect("shell cells carry an origin");
                    let rm = 0.5 * (r0 + r1);
                    vec![shell_cell(o, *r0, rm), shell_cell(o, rm, *r1)]
                }
            })
            .collect();
        Self { domain: self.domain.clone(), cells, origin: self.origin.clone() }
    }
}

fn check_radial(radial_breaks: &[f64]) -> Result<f64> {
    let ok = radial_breaks.len() >= 2
        && radial_breaks[0] == 0.0
        && radial_breaks.windows(2).all(|w| w[0] < w[1])
        && radial_breaks.iter().all(|r| r.is_finite());
    if !ok {
        return Err(Error::Input("radial breaks must increase from 0".into()));
    }
    Ok(radial_breaks[radial_breaks.len() - 1])
}

fn polar_cell(o: &[f64], r0: f64, r1: f64, theta0: f64, theta1: f64) -> Cell {
    let rc = radial_centroid(r0, r1, 2);
    let tm = 0.5 * (theta0 + theta1);
    Cell {
        center: vec![o[0] + rc * tm.cos(), o[1] + rc * tm.sin()],
        measure: 0.5 * (theta1 - theta0) * (r1 * r1 - r0 * r0),
        shape: CellShape::Polar { r0, r1, theta0, theta1 },
    }
}

fn shell_cell(o: &[f64], r0: f64, r1: f64) -> Cell {
    let dim = o.len();
    let mut center = o.to_vec();
    center[0] += radial_centroid(r0, r1, dim);
    Cell {
        center,
        measure: unit_sphere_area(dim) / dim as f64 * (r1.powi(dim as i32) - r0.powi(dim as i32)),
        shape: CellShape::Shell { r0, r1 },
    }
}

fn split_box(lower: &[f64], upper: &[f64]) -> Vec<Cell> {
    let dim = lower.len();
    (0..1usize << dim)
        .map(|mask| {
            let mut lo = Vec::with_capacity(dim);
            let mut hi = Vec::with_capacity(dim);
            for axis in 0..dim {
                let mid = 0.5 * (lower[axis] + upper[axis]);
                if mask >> axis & 1 == 0 {
                    lo.push(lower[axis]);
                    hi.push(mid);
                } else {
                    lo.push(mid);
                    hi.push(upper[axis]);
                }
            }
            let center = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
            let measure = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
            Cell { center, measure, shape: CellShape::Box { lower: lo, upper: hi } }
        })
        .collect()
}

pub fn uniform_breaks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut b: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    b[n] = hi;
    b
}

/// Breakpoints at distances `R 2^{-j-1}(1 + i/per_layer)` on both sides of each attractor.
pub fn graded_breaks(lo: f64, hi: f64, attractors: &[Attractor], levels: usize, per_layer: usize) -> Vec<f64> {
    let per_layer = per_layer.max(1);
    let mut out = Vec::new();
    for a in attractors {
        let radius = a.radius.min(hi - lo);
        out.push(a.point);
        for j in 0..levels {
            for i in 0..per_layer {
                let d = radius * 0.5f64.powi(j as i32 + 1) * (1.0 + i as f64 / per_layer as f64);
                out.push(a.point - d);
                out.push(a.point + d);
            }
        }
    }
    out
}

/// Sorts, clips to `[lo, hi]` and drops near-duplicates.
pub fn normalize_breaks(mut b: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    b.retain(|x| x.is_finite() && *x > lo && *x < hi);
    b.sort_by(f64::total_cmp);
    let tol = 1e-14 * (hi - lo);
    let mut out = vec![lo];
    for x in b {
        if x - out[out.len() - 1] > tol {
            out.push(x);
        }
    }
    if hi - out[out.len() - 1] <= tol {
        out.pop();
    }
    out.push(hi);
    out
}

/// A piecewise-constant function on a partition.
#[derive(Debug, Clone)]
pub struct GridFunction {
    partition: Arc<Partition>,
    values: Vec<f64>,
    source: Option<Expr>,
}

impl GridFunction {
    /// Samples `expr` at the cell centers.
    pub fn sample(partition: &Arc<Partition>, expr: &Expr) -> Self {
        let values = sample_values(partition, expr);
        Self { partition: partition.clone(), values, source: Some(expr.clone()) }
    }

    pub fn from_values(partition: &Arc<Partition>, values: Vec<f64>) -> Result<Self> {
        if values.len() != partition.len() {
            return Err(Error::Input(format!(
                "{} values for a partition of {} cells",
                values.len(),
                partition.len()
            )));
        }
        Ok(Self { partition: partition.clone(), values, source: None })
    }

    pub fn partition(&self) -> &Arc<Partition> {
        &self.partition
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> Option<&Expr> {
        self.source.as_ref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Applies `f` pointwise; the result keeps no source expression.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { partition: self.partition.clone(), values: self.values.iter().map(|&v| f(v)).collect(), source: None }
    }

    /// Combines two functions on the same partition.
    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_partition(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { partition: self.partition.clone(), values, source: None })
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.map(|v| c * v);
        out.source = self.source.clone().map(|e| c * e);
        out
    }

    /// `Σ f(value)·measure`, summed pairwise.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let terms: Vec<f64> = self.values.iter().zip(self.partition.cells()).map(|(&v, c)| f(v) * c.measure).collect();
        pairwise_sum(&terms)
    }

    /// Resamples the source expression on the refined partition.
    pub fn refined(&self) -> Option<Self> {
        let expr = self.source.as_ref()?;
        Some(Self::sample(&Arc::new(self.partition.refine()), expr))
    }

    pub fn check_same_partition(&self, other: &GridFunction) -> Result<()> {
        if Arc::ptr_eq(&self.partition, &other.partition) || self.partition == other.partition {
            Ok(())
        } else {
            Err(Error::Input("functions live on different partitions".into()))
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::Input(format!("non-finite sample {} in cell {i}", self.values[i]))),
            None => Ok(()),
        }
    }
}

pub fn sample_values(partition: &Partition, expr: &Expr) -> Vec<f64> {
    let cells = partition.cells();
    if cells.len() >= PARALLEL_CELLS {
        cells.par_iter().map(|c| expr.eval(&c.center)).collect()
    } else {
        cells.iter().map(|c| expr.eval(&c.center)).collect()
    }
}

/// A set of cells, stored as a mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSubset {
    mask: Vec<bool>,
}

impl CellSubset {
    pub fn from_mask(mask: Vec<bool>) -> Self {
        Self { mask }
    }

    pub fn all(len: usize) -> Self {
        Self { mask: vec![true; len] }
    }

    pub fn empty(len: usize) -> Self {
        Self { mask: vec![false; len] }
    }

    pub fn from_predicate(f: &GridFunction, pred: impl Fn(f64) -> bool) -> Self {
        Self { mask: f.values().iter().map(|&v| pred(v)).collect() }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask[i]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn measure(&self, partition: &Partition) -> f64 {
        let terms: Vec<f64> = partition.cells().iter().zip(&self.mask).map(|(c, &m)| if m { c.measure } else { 0.0 }).collect();
        pairwise_sum(&terms)
    }

    /// `χ_E` as a grid function.
    pub fn indicator(&self, partition: &Arc<Partition>) -> GridFunction {
        let values = self.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
        GridFunction { partition: partition.clone(), values, source: None }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_measures_sum_to_domain() {
        let d = Domain::new_box(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap();
        let p = Partition::uniform(&d, 7).unwrap();
        assert_eq!(p.len(), 49);
        assert!((p.total_measure() - 4.0).abs() < 1e-12 * 4.0);
        assert!(p.cells().iter().all(|c| c.measure > 0.0));
    }

    #[test]
    fn adapted_aligns_with_steps() {
        let d = Domain::unit_interval();
        let e = Expr::step(0, vec![1.0 / 3.0], vec![1.0, 2.0]);
        let p = Partition::adapted(&d, &[&e], GridResolution { base: 4, levels: 0, per_layer: 1 }).unwrap();
        let has_break = p.cells().iter().any(|c| match &c.shape {
            CellShape::Box { upper, .. } => upper[0] == 1.0 / 3.0,
            _ => false,
        });
        assert!(has_break);
        assert!((p.total_measure() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn graded_toward_point() {
        let d = Domain::unit_interval();
        let e = Expr::dist_to_point(vec![0.0]);
        let p = Partition::adapted(&d, &[&e], GridResolution { base: 4, levels: 20, per_layer: 2 }).unwrap();
        let smallest = p.cells().iter().map(|c| c.measure).fold(f64::INFINITY, f64::min);
        assert!(smallest < 1e-6);
        assert!((p.total_measure() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn polar_measures() {
        let p = Partition::polar_disk(vec![0.5, 0.5], vec![0.0, 0.25, 0.5, 1.0], 16).unwrap();
        assert!((p.total_measure() - PI).abs() < 1e-13);
        let r = p.refine();
        assert_eq!(r.len(), 4 * p.len());
        assert!((r.total_measure() - PI).abs() < 1e-13);
    }

    #[test]
    fn shell_measures() {
        let p = Partition::shells(vec![0.0; 3], vec![0.0, 0.5, 1.0]).unwrap();
        assert!((p.total_measure() - 4.0 * PI / 3.0).abs() < 1e-13);
        assert!((p.refine().total_measure() - 4.0 * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn centroid_integrates_linear_radial_exactly() {
        // ∫_{B_1} (1 − |x|) dx = π/3 in the plane
        let p = Arc::new(Partition::polar_disk(vec![0.0, 0.0], uniform_breaks(0.0, 1.0, 3), 8).unwrap());
        let u = GridFunction::sample(&p, &(1.0 - Expr::dist_to_point(vec![0.0, 0.0])));
        assert!((u.integrate(|v| v) - PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn refine_box() {
        let p = Partition::uniform(&Domain::unit_cube(2), 3).unwrap();
        let r = p.refine();
        assert_eq!(r.len(), 36);
        assert!((r.total_measure() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = Arc::new(Partition::uniform(&Domain::unit_cube(2), 64).unwrap());
        let e = (Expr::x() * Expr::coord(1)).exp().sqrt();
        let a = GridFunction::sample(&p, &e);
        let b = GridFunction::sample(&p, &e);
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn subsets() {
        let p = Arc::new(Partition::uniform(&Domain::unit_interval(), 10).unwrap());
        let f = GridFunction::sample(&p, &Expr::x());
        let e = CellSubset::from_predicate(&f, |v| v > 0.7);
        assert_eq!(e.count(), 3);
        assert!((e.measure(&p) - 0.3).abs() < 1e-15);
        assert_eq!(e.indicator(&p).integrate(|v| v), e.measure(&p));
    }
}
