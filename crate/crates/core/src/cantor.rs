//! Generalized Cantor sets built from a gap sequence `{a_k}` with `Σ a_k = 1`.
//!
//! Stage `n` of the construction is the union of `2^n` closed intervals of
//! common length `ε_n = 2^{-n} r_n`, where `r_n = 1 − Σ_{k≤n} a_k`. At step `k`
//! a centered open gap of length `a_k / 2^{k-1}` is removed from each of the
//! `2^{k-1}` surviving intervals.
//!
//! The limit set `K` is never materialized. Every query reduces to a finite
//! stage: stage endpoints belong to `K` (lower bounds) and `K ⊂ K_n` (upper
//! bounds). Once `t ≥ ε_n / 2` both bounds coincide and the neighborhood
//! measure `φ(t) = |K(t)|` is exact.

use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::numerics::{linear_fit, pairwise_sum};

/// Largest stage for which the intervals are materialized.
pub const MATERIALIZE_LIMIT: usize = 24;
/// Stages up to this index use the interval sweep for neighborhood measures;
/// deeper stages use the (equivalent) gap-counting formula.
pub const SWEEP_LIMIT: usize = 16;
/// `2^{-n}` underflows past this point.
pub const MAX_STAGE: usize = 900;

/// Terms summed directly before switching to the Euler–Maclaurin tail.
const DIRECT_TERMS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GapFamily {
    /// `a_k = a^{k-1} / (a+1)^k`; `a = 2` is the middle-thirds set.
    Geometric { a: f64 },
    /// `a_k = k^{-s} / ζ(s)`.
    Zeta { s: f64 },
    /// `a_k = 1 / (η(s) (k+1) ln^s(k+1))`.
    #[serde(rename = "loglog")]
    LogLog { s: f64 },
    /// A finite prefix of a gap sequence; stages are limited to its length.
    Explicit { terms: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSequence {
    family: GapFamily,
    /// `ζ(s)`, `η(s)`, or 1.
    normalizer: f64,
}

impl GapSequence {
    pub fn new(family: GapFamily) -> Result<Self> {
        let normalizer = match &family {
            GapFamily::Geometric { a } => {
                if !(a.is_finite() && *a > 0.0) {
                    return Err(Error::GapSequence(format!("geometric family needs a > 0, got {a}")));
                }
                1.0
            }
            GapFamily::Zeta { s } => {
                check_exponent(*s)?;
                zeta_tail(*s, 0)
            }
            GapFamily::LogLog { s } => {
                check_exponent(*s)?;
                eta_tail(*s, 0)
            }
            GapFamily::Explicit { terms } => {
                if terms.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                    return Err(Error::GapSequence("explicit terms must be positive and finite".into()));
                }
                let total = pairwise_sum(terms);
                if total > 1.0 + 1e-12 {
                    return Err(Error::GapSequence(format!("explicit terms sum to {total} > 1")));
                }
                1.0
            }
        };
        Ok(Self { family, normalizer })
    }

    pub fn geometric(a: f64) -> Result<Self> {
        Self::new(GapFamily::Geometric { a })
    }

    /// The middle-thirds Cantor set.
    pub fn classical() -> Self {
        Self::geometric(2.0).expect("a = 2 is valid")
    }

    pub fn zeta(s: f64) -> Result<Self> {
        Self::new(GapFamily::Zeta { s })
    }

    pub fn loglog(s: f64) -> Result<Self> {
        Self::new(GapFamily::LogLog { s })
    }

    pub fn explicit(terms: Vec<f64>) -> Result<Self> {
        Self::new(GapFamily::Explicit { terms })
    }

    pub fn family(&self) -> &GapFamily {
        &self.family
    }

    /// `ζ(s)` for the zeta family, `η(s)` for the loglog family, 1 otherwise.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// The term `a_k`, `k ≥ 1`.
    pub fn term(&self, k: usize) -> f64 {
        assert!(k >= 1, "gap terms are indexed from 1");
        match &self.family {
            GapFamily::Geometric { a } => {
                let q = a / (a + 1.0);
                q.powi((k - 1) as i32) / (a + 1.0)
            }
            GapFamily::Zeta { s } => (k as f64).powf(-s) / self.normalizer,
            GapFamily::LogLog { s } => {
                let x = (k + 1) as f64;
                1.0 / (x * x.ln().powf(*s) * self.normalizer)
            }
            GapFamily::Explicit { terms } => terms.get(k - 1).copied().unwrap_or(0.0),
        }
    }

    /// `r_n = 1 − Σ_{k≤n} a_k`, computed as the tail `Σ_{k>n} a_k` for the
    /// analytic families so that it keeps full relative precision.
    pub fn remainder(&self, n: usize) -> f64 {
        match &self.family {
            GapFamily::Geometric { a } => (a / (a + 1.0)).powi(n as i32),
            GapFamily::Zeta { s } => zeta_tail(*s, n) / self.normalizer,
            GapFamily::LogLog { s } => eta_tail(*s, n) / self.normalizer,
            GapFamily::Explicit { terms } => {
                let n = n.min(terms.len());
                1.0 - pairwise_sum(&terms[..n])
            }
        }
    }

    /// Largest stage index that can be built.
    pub fn max_stage(&self) -> usize {
        match &self.family {
            GapFamily::Explicit { terms } => {
                let mut n = 0;
                while n < terms.len() && self.remainder(n + 1) > 0.0 {
                    n += 1;
                }
                n
            }
            _ => MAX_STAGE,
        }
    }

    /// `ε_n = 2^{-n} r_n`.
    pub fn eps(&self, n: usize) -> f64 {
        libm_ldexp(self.remainder(n), n)
    }
}

fn check_exponent(s: f64) -> Result<()> {
    if s.is_finite() && s > 1.0 {
        Ok(())
    } else {
        Err(Error::GapSequence(format!("family exponent must satisfy s > 1, got {s}")))
    }
}

fn libm_ldexp(x: f64, n: usize) -> f64 {
    x * 2f64.powi(-(n as i32))
}

/// `Σ_{k>n} k^{-s}`: direct summation followed by an Euler–Maclaurin tail.
fn zeta_tail(s: f64, n: usize) -> f64 {
    let start = n + 1;
    let m = start.max(DIRECT_TERMS);
    let direct: Vec<f64> = (start..m).map(|k| (k as f64).powf(-s)).collect();
    let x = m as f64;
    let f = x.powf(-s);
    let d1 = -s * x.powf(-s - 1.0);
    let d3 = -s * (s + 1.0) * (s + 2.0) * x.powf(-s - 3.0);
    let tail = x.powf(1.0 - s) / (s - 1.0) + 0.5 * f - d1 / 12.0 + d3 / 720.0;
    pairwise_sum(&direct) + tail
}

/// `Σ_{k>n} 1 / ((k+1) ln^s(k+1))`.
fn eta_tail(s: f64, n: usize) -> f64 {
    let f = |x: f64| 1.0 / (x * x.ln().powf(s));
    let start = n + 2;
    let m = start.max(DIRECT_TERMS);
    let direct: Vec<f64> = (start..m).map(|j| f(j as f64)).collect();
    let x = m as f64;
    let l = x.ln();
    let d1 = -(1.0 + s / l) / (x * x * l.powf(s));
    let tail = l.powf(1.0 - s) / (s - 1.0) + 0.5 * f(x) - d1 / 12.0;
    pairwise_sum(&direct) + tail
}

/// The `2^{k-1}` gaps removed at step `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapLevel {
    pub k: usize,
    pub count: f64,
    pub length: f64,
}

/// Stage `K_n` of the construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CantorStage {
    gaps: GapSequence,
    n: usize,
    /// `ε_k` for `k = 0..=n`.
    eps: Vec<f64>,
    r_n: f64,
    levels: Vec<GapLevel>,
}

/// Builds stage `n`.
pub fn build_stage(gaps: &GapSequence, n: usize) -> Result<CantorStage> {
    if n > gaps.max_stage() {
        return Err(Error::GapSequence(format!(
            "stage {n} requested but the sequence supports at most {}",
            gaps.max_stage()
        )));
    }
    let mut eps = Vec::with_capacity(n + 1);
    let mut levels = Vec::with_capacity(n);
    eps.push(1.0);
    for k in 1..=n {
        let r_k = gaps.remainder(k);
        if !(r_k > 0.0) {
            return Err(Error::GapSequence(format!("partial sum reaches 1 at k = {k}")));
        }
        eps.push(libm_ldexp(r_k, k));
        levels.push(GapLevel {
            k,
            count: 2f64.powi(k as i32 - 1),
            length: gaps.term(k) * 2f64.powi(1 - k as i32),
        });
    }
    Ok(CantorStage { gaps: gaps.clone(), n, r_n: gaps.remainder(n), eps, levels })
}

impl CantorStage {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gaps(&self) -> &GapSequence {
        &self.gaps
    }

    /// `r_n`, the total length `|K_n|`.
    pub fn r_n(&self) -> f64 {
        self.r_n
    }

    /// `ε_n`, the common interval length.
    pub fn eps_n(&self) -> f64 {
        self.eps[self.n]
    }

    pub fn eps_at(&self, k: usize) -> f64 {
        self.eps[k]
    }

    pub fn levels(&self) -> &[GapLevel] {
        &self.levels
    }

    pub fn interval_count(&self) -> f64 {
        2f64.powi(self.n as i32)
    }

    /// The `2^n` intervals `J_α`, left to right.
    pub fn intervals(&self) -> Result<Vec<(f64, f64)>> {
        if self.n > MATERIALIZE_LIMIT {
            return Err(Error::Unsupported(format!(
                "stage {} has too many intervals to materialize (limit {MATERIALIZE_LIMIT})",
                self.n
            )));
        }
        let mut current = vec![(0.0, 1.0)];
        for k in 1..=self.n {
            let len = self.eps[k];
            current = current.iter().flat_map(|&(a, b)| [(a, a + len), (b - len, b)]).collect();
        }
        Ok(current)
    }

    /// Sorted endpoints of all stage intervals; all of them belong to `K`.
    pub fn endpoints(&self) -> Result<Vec<f64>> {
        Ok(self.intervals()?.into_iter().flat_map(|(a, b)| [a, b]).collect())
    }

    /// Distance from `x` to the nearest stage endpoint.
    ///
    /// `K` is embedded as `K × {0}^{N-1}` when `x` has more than one
    /// coordinate. The returned value never under-estimates `d_K(x)` and
    /// exceeds it by at most `error_bound`.
    pub fn distance_to_set(&self, x: &[f64]) -> DistanceBound {
        let d1 = self.distance_1d(x[0]);
        if x.len() == 1 {
            return d1;
        }
        let rest: f64 = x[1..].iter().map(|v| v * v).sum();
        let value = (d1.value * d1.value + rest).sqrt();
        DistanceBound { value, error_bound: d1.error_bound }
    }

    fn distance_1d(&self, x: f64) -> DistanceBound {
        if x <= 0.0 {
            return DistanceBound { value: -x, error_bound: 0.0 };
        }
        if x >= 1.0 {
            return DistanceBound { value: x - 1.0, error_bound: 0.0 };
        }
        let (mut a, mut b) = (0.0, 1.0);
        for k in 1..=self.n {
            let len = self.eps[k];
            let left_end = a + len;
            let right_start = b - len;
            if x <= left_end {
                b = left_end;
            } else if x >= right_start {
                a = right_start;
            } else {
                // inside a removed gap whose endpoints lie in K
                return DistanceBound { value: (x - left_end).min(right_start - x), error_bound: 0.0 };
            }
        }
        DistanceBound { value: (x - a).min(b - x), error_bound: 0.5 * self.eps_n() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceBound {
    pub value: f64,
    pub error_bound: f64,
}

/// Certified two-sided bounds on `φ(t) = |K(t) ∩ Ω|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeighborhoodMeasure {
    pub t: f64,
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
}

/// Measure of the union of open intervals, clipped to `clip`, by a sorted sweep.
pub fn union_measure(intervals: impl IntoIterator<Item = (f64, f64)>, clip: (f64, f64)) -> f64 {
    let mut pieces: Vec<(f64, f64)> = intervals
        .into_iter()
        .map(|(a, b)| (a.max(clip.0), b.min(clip.1)))
        .filter(|(a, b)| a < b)
        .collect();
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut lengths = Vec::new();
    let mut iter = pieces.into_iter();
    let Some(mut cur) = iter.next() else { return 0.0 };
    for (a, b) in iter {
        if a <= cur.1 {
            cur.1 = cur.1.max(b);
        } else {
            lengths.push(cur.1 - cur.0);
            cur = (a, b);
        }
    }
    lengths.push(cur.1 - cur.0);
    pairwise_sum(&lengths)
}

fn clip_interval(omega: &Domain) -> Result<(f64, f64)> {
    match omega {
        Domain::Box { lower, upper } if lower.len() == 1 && lower[0] <= 0.0 && upper[0] >= 1.0 => {
            Ok((lower[0], upper[0]))
        }
        _ => Err(Error::Domain("neighborhood measures need a 1-D interval Ω ⊇ [0, 1]".into())),
    }
}

fn check_radius(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::Input(format!("neighborhood radius must be positive, got {t}")))
    }
}

/// Bounds on `φ(t)` from stage `stage`.
///
/// The lower bound is the measure of the union of radius-`t` balls around the
/// stage endpoints, the upper bound that of the stage intervals dilated by
/// `t`; both clipped to `Ω`. Shallow stages use an explicit interval sweep,
/// deep stages the equivalent count over gap levels.
pub fn neighborhood_measure(stage: &CantorStage, t: f64, omega: &Domain) -> Result<NeighborhoodMeasure> {
    if stage.n <= SWEEP_LIMIT {
        neighborhood_measure_sweep(stage, t, omega)
    } else {
        neighborhood_measure_counting(stage, t, omega)
    }
}

/// Sweep route: explicit unions of `2^n` dilated intervals and `2^{n+1}` endpoint balls.
pub fn neighborhood_measure_sweep(stage: &CantorStage, t: f64, omega: &Domain) -> Result<NeighborhoodMeasure> {
    check_radius(t)?;
    let clip = clip_interval(omega)?;
    let intervals = stage.intervals()?;
    let upper = union_measure(intervals.iter().map(|&(a, b)| (a - t, b + t)), clip);
    let lower = union_measure(
        intervals.iter().flat_map(|&(a, b)| [(a - t, a + t), (b - t, b + t)]),
        clip,
    );
    Ok(NeighborhoodMeasure { t, lower, upper, exact: upper - lower <= 1e-14 })
}

/// Counting route: every stage interval and gap has a known length and
/// multiplicity, so the unions reduce to sums of `min(length, 2t)`.
pub fn neighborhood_measure_counting(
    stage: &CantorStage,
    t: f64,
    omega: &Domain,
) -> Result<NeighborhoodMeasure> {
    check_radius(t)?;
    let clip = clip_interval(omega)?;
    let outer = t.min(-clip.0) + t.min(clip.1 - 1.0);
    let gap_cover: Vec<f64> = stage.levels.iter().map(|g| g.count * g.length.min(2.0 * t)).collect();
    let gap_cover = pairwise_sum(&gap_cover);
    let upper = stage.r_n + gap_cover + outer;
    let lower = gap_cover + stage.interval_count() * stage.eps_n().min(2.0 * t) + outer;
    Ok(NeighborhoodMeasure { t, lower, upper, exact: upper - lower <= 1e-14 })
}

/// Smallest stage `n` with `ε_n ≤ 2t`: from there on the bounds coincide.
pub fn exact_stage_for(gaps: &GapSequence, t: f64) -> Result<usize> {
    check_radius(t)?;
    let limit = gaps.max_stage();
    (0..=limit)
        .find(|&n| gaps.eps(n) <= 2.0 * t)
        .ok_or_else(|| Error::Unsupported(format!("no stage up to {limit} resolves t = {t}")))
}

/// `φ(t)` for the limit set, evaluated at the automatically chosen exact stage.
pub fn phi(gaps: &GapSequence, t: f64, omega: &Domain) -> Result<NeighborhoodMeasure> {
    let n = exact_stage_for(gaps, t)?;
    let stage = build_stage(gaps, n)?;
    neighborhood_measure(&stage, t, omega)
}

/// Upper bound `φ^N` for the neighborhood measure of the `N`-fold product set
/// (sup-metric neighborhoods).
pub fn product_upper_bound(phi_value: f64, dim: usize) -> f64 {
    assert!(dim >= 1, "product dimension must be at least 1");
    phi_value.powi(dim as i32)
}

/// `s = ln(a/(a+1)) / ln(a/(2(a+1)))`, the decay exponent of `φ` for the geometric family.
pub fn geometric_exponent(a: f64) -> f64 {
    let q = a / (a + 1.0);
    q.ln() / (q / 2.0).ln()
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticsRow {
    pub t: f64,
    pub lower: f64,
    pub upper: f64,
    pub envelope_lower: f64,
    pub envelope_upper: f64,
    pub within: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticsReport {
    pub family: GapFamily,
    /// Decay exponent (geometric) or family exponent `s` (zeta, loglog).
    pub exponent: f64,
    /// Least-squares slope of `ln φ` against `ln t`.
    pub loglog_slope: f64,
    /// Envelope constants `(c₁, c₂)`; explicit for the geometric family, fitted otherwise.
    pub c1: f64,
    pub c2: f64,
    pub constants_fitted: bool,
    /// Fitted shift `b` of the loglog envelope.
    pub b: Option<f64>,
    /// `c₂ / c₁`.
    pub band_ratio: f64,
    pub band_limit: f64,
    pub rows: Vec<AsymptoticsRow>,
    pub pass: bool,
}

type EnvelopeParts = (f64, f64, f64, bool, Option<f64>, Box<dyn Fn(f64) -> f64>);

/// Evaluates `φ` exactly on `t_grid` and checks the family envelope.
///
/// Geometric family: the explicit constants `q t^s ≤ φ(t) ≤ (4/q) t^s`,
/// `q = a/(a+1)`. Zeta family: the product `φ(t) (ln(e/t))^{s-1}`. Loglog
/// family: the product `φ(t) (ln ln(b/t))^{s-1}` with `b` fitted to minimize
/// the band. For fitted families the check passes when `c₂/c₁ ≤ band_limit`.
pub fn verify_asymptotics(gaps: &GapSequence, t_grid: &[f64], band_limit: f64) -> Result<AsymptoticsReport> {
    if t_grid.len() < 2 {
        return Err(Error::Input("asymptotics need at least two radii".into()));
    }
    let omega = Domain::unit_interval();
    let measures: Vec<NeighborhoodMeasure> = t_grid.iter().map(|&t| phi(gaps, t, &omega)).collect::<Result<_>>()?;
    let ln_t: Vec<f64> = t_grid.iter().map(|t| t.ln()).collect();
    let ln_phi: Vec<f64> = measures.iter().map(|m| m.upper.ln()).collect();
    let (slope, _) = linear_fit(&ln_t, &ln_phi);

    let (exponent, c1, c2, fitted, b, envelope): EnvelopeParts =
        match gaps.family() {
            GapFamily::Geometric { a } => {
                let q = a / (a + 1.0);
                let s = geometric_exponent(*a);
                (s, q, 4.0 / q, false, None, Box::new(move |t: f64| t.powf(s)))
            }
            GapFamily::Zeta { s } => {
                let s = *s;
                let shape = move |t: f64| (1.0f64 - t.ln()).powf(1.0 - s);
                let (c1, c2) = product_band(&measures, &shape);
                (s, c1, c2, true, None, Box::new(shape))
            }
            GapFamily::LogLog { s } => {
                let s = *s;
                let t_max = t_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let ln_b = fit_loglog_shift(&measures, s, t_max);
                let shape = move |t: f64| (ln_b - t.ln()).ln().powf(1.0 - s);
                let (c1, c2) = product_band(&measures, &shape);
                (s, c1, c2, true, Some(ln_b.exp()), Box::new(shape))
            }
            GapFamily::Explicit { .. } => {
                return Err(Error::Unsupported("asymptotics are defined for the preset families only".into()))
            }
        };

    let rows: Vec<AsymptoticsRow> = measures
        .iter()
        .map(|m| {
            let shape = envelope(m.t);
            let (lo, hi) = (c1 * shape, c2 * shape);
            let slack = 1e-12 * hi;
            AsymptoticsRow {
                t: m.t,
                lower: m.lower,
                upper: m.upper,
                envelope_lower: lo,
                envelope_upper: hi,
                within: lo - slack <= m.lower && m.upper <= hi + slack,
            }
        })
        .collect();
    let band_ratio = c2 / c1;
    let pass = rows.iter().all(|r| r.within) && (!fitted || band_ratio <= band_limit);
    Ok(AsymptoticsReport {
        family: gaps.family().clone(),
        exponent,
        loglog_slope: slope,
        c1,
        c2,
        constants_fitted: fitted,
        b,
        band_ratio,
        band_limit,
        rows,
        pass,
    })
}

fn product_band(measures: &[NeighborhoodMeasure], shape: &dyn Fn(f64) -> f64) -> (f64, f64) {
    measures.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| {
        let p = m.upper / shape(m.t);
        (lo.min(p), hi.max(p))
    })
}

/// Chooses `ln b` minimizing the band of `φ(t) (ln ln(b/t))^{s-1}`; `b > e·t_max`.
fn fit_loglog_shift(measures: &[NeighborhoodMeasure], s: f64, t_max: f64) -> f64 {
    let lower = 1.0 + t_max.ln() + 1e-9;
    let band = |ln_b: f64| {
        let (lo, hi) = product_band(measures, &|t: f64| (ln_b - t.ln()).ln().powf(1.0 - s));
        hi / lo
    };
    let steps = 4000;
    let width = 80.0;
    let mut best = (f64::INFINITY, lower);
    for i in 0..=steps {
        let x = lower + width * i as f64 / steps as f64;
        let v = band(x);
        if v < best.0 {
            best = (v, x);
        }
    }
    // golden-section polish around the best scan point
    let h = width / steps as f64;
    let (mut a, mut b) = ((best.1 - h).max(lower), best.1 + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if band(c) < band(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let polished = 0.5 * (a + b);
    if band(polished) < best.0 {
        polished
    } else {
        best.1
    }
}
