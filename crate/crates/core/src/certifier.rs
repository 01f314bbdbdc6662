//! Almost-compactness of `L^{p(·)} ↪ L^{q(·)}`: the rearrangement criterion,
//! weight-based sufficient conditions near a singular set, and witness
//! sequences for the negative direction.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cantor::{geometric_exponent, phi, verify_asymptotics, CantorStage, GapFamily, GapSequence};
use crate::domain::{euclidean, Domain};
use crate::error::{Error, Result};
use crate::exponent::{ratio_exponents, ExponentField};
use crate::expr::{Expr, COINCIDENCE_TOL};
use crate::grid::{CellShape, CellSubset, GridFunction, GridResolution, Partition};
use crate::modular::{luxemburg_norm_sampled, modular_sampled};
use crate::numerics::{bisect_predicate, gauss_legendre, unit_ball_volume};
use crate::rearrangement::equimeasurable_integral;
use crate::report::{Evidence, Real, Verdict};

/// Tunables shared by the criterion, the tail certificate and the witnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifierConfig {
    /// Bases `a > 1` at which the criterion integral is evaluated.
    pub a_list: Vec<f64>,
    /// Dyadic grading levels toward singular points; the dimension default when absent.
    pub grid_levels: Option<usize>,
    /// Number of whole-grid refinements in a criterion trajectory.
    pub refinements: usize,
    /// Relative change between the last two trajectory values that counts as converged.
    pub convergence_rtol: f64,
    /// Allowed relative gap between the two sides of the equimeasurability identity.
    pub equimeasurable_tol: f64,
    /// Witness indices `n`.
    pub witness_n: Vec<usize>,
    /// Lower bound demanded of `‖χ_{E_n}‖_{r'}` by a passing witness.
    pub witness_alpha: f64,
    /// Tolerance for the witness identities and the tail cross-check.
    pub identity_tol: f64,
}

impl Default for CertifierConfig {
    fn default() -> Self {
        Self {
            a_list: vec![2.0, 10.0, 100.0],
            grid_levels: None,
            refinements: 3,
            convergence_rtol: 1e-3,
            equimeasurable_tol: 1e-10,
            witness_n: vec![1, 4, 16, 64, 256, 1024],
            witness_alpha: 0.5,
            identity_tol: 1e-8,
        }
    }
}

impl CertifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.a_list.is_empty() || self.a_list.iter().any(|a| !(a.is_finite() && *a > 1.0)) {
            return Err(Error::Input(format!("every base must be finite and exceed 1, got {:?}", self.a_list)));
        }
        for (name, v) in [
            ("convergence_rtol", self.convergence_rtol),
            ("equimeasurable_tol", self.equimeasurable_tol),
            ("witness_alpha", self.witness_alpha),
            ("identity_tol", self.identity_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Input(format!("{name} must be positive, got {v}")));
            }
        }
        if self.witness_n.contains(&0) {
            return Err(Error::Input("witness indices must be positive".into()));
        }
        Ok(())
    }

    pub fn resolution(&self, dim: usize) -> GridResolution {
        let mut res = GridResolution::for_dim(dim);
        if let Some(levels) = self.grid_levels {
            res.levels = levels;
        }
        res
    }

    fn witness_resolution(&self, dim: usize) -> GridResolution {
        let mut res = self.resolution(dim);
        res.base *= match dim {
            1 => 16,
            2 => 4,
            _ => 2,
        };
        res
    }
}

// ---------------------------------------------------------------------------
// Criterion integral

/// Refinement stops before a trajectory grid would exceed this many cells.
pub const CELL_BUDGET: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    /// The last two values agree to the convergence tolerance.
    Converged,
    /// Increments are positive and not shrinking.
    Diverging,
    /// `s = ∞` on a set of positive measure.
    Infinite,
    Undecided,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionStep {
    pub cells: usize,
    pub space_side: Real,
    pub rearranged_side: Real,
    pub log_value: f64,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionTrajectory {
    pub alpha: f64,
    pub steps: Vec<CriterionStep>,
    pub value: Real,
    pub trend: Trend,
    /// Both sides agreed to tolerance at every step.
    pub equimeasurable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    /// Measure of `{s = ∞}` on the grid.
    pub infinite_measure: f64,
    pub s_max: Real,
    pub trajectories: Vec<CriterionTrajectory>,
}

impl CriterionReport {
    pub fn all_converged(&self) -> bool {
        self.trajectories.iter().all(|t| t.trend == Trend::Converged)
    }

    pub fn any_diverging(&self) -> bool {
        self.trajectories.iter().any(|t| matches!(t.trend, Trend::Diverging | Trend::Infinite))
    }

    pub fn trajectory(&self, alpha: f64) -> Option<&CriterionTrajectory> {
        self.trajectories.iter().find(|t| t.alpha == alpha)
    }
}

fn base_partition(p: &ExponentField, q: &ExponentField, extra: &[&Expr], res: GridResolution) -> Result<Arc<Partition>> {
    let mut exprs = vec![p.expr(), q.expr()];
    exprs.extend_from_slice(extra);
    Ok(Arc::new(Partition::adapted(p.domain(), &exprs, res)?))
}

/// Samples `s = 1/(p − q)` at cell centers. A box cell whose center gives
/// `s = ∞` is probed at interior points along each axis; it keeps `s = ∞`
/// only when every probe does, and otherwise takes the largest finite probe
/// value. This keeps isolated singular points, such as a center that lands on
/// a Cantor set, from posing as a coincidence set of positive measure.
pub fn sample_gap(s: &ExponentField, partition: &Arc<Partition>) -> GridFunction {
    let mut values = s.sample(partition).values().to_vec();
    for (v, cell) in values.iter_mut().zip(partition.cells()) {
        if *v != f64::INFINITY {
            continue;
        }
        if let CellShape::Box { lower, upper } = &cell.shape {
            let mut best = f64::NEG_INFINITY;
            let mut all_infinite = true;
            for axis in 0..lower.len() {
                for frac in [0.25, 0.75] {
                    let mut x = cell.center.clone();
                    x[axis] = lower[axis] + frac * (upper[axis] - lower[axis]);
                    let sv = s.eval(&x);
                    if sv != f64::INFINITY {
                        all_infinite = false;
                        best = best.max(sv);
                    }
                }
            }
            if !all_infinite {
                *v = best;
            }
        }
    }
    GridFunction::from_values(partition, values).expect("one value per cell")
}

fn infinite_measure(s: &GridFunction) -> f64 {
    CellSubset::from_predicate(s, |v| v == f64::INFINITY).measure(s.partition())
}

fn classify(logs: &[f64], rtol: f64) -> Trend {
    let n = logs.len();
    if n < 2 {
        return Trend::Undecided;
    }
    let last = logs[n - 1] - logs[n - 2];
    if last.abs().exp_m1() <= rtol {
        return Trend::Converged;
    }
    if n >= 3 {
        let prev = logs[n - 2] - logs[n - 3];
        if last > 0.0 && prev > 0.0 && last >= 0.5 * prev {
            return Trend::Diverging;
        }
    }
    Trend::Undecided
}

/// `∫_Ω a^{s(x)} dx` and `∫₀^{|Ω|} a^{s*(t)} dt` with `s = 1/(p − q)`, on a
/// sequence of refined grids.
pub fn criterion_integral(
    p: &ExponentField,
    q: &ExponentField,
    alpha_list: &[f64],
    config: &CertifierConfig,
) -> Result<CriterionReport> {
    criterion_on(p, q, alpha_list, config, &[])
}

fn criterion_on(
    p: &ExponentField,
    q: &ExponentField,
    alpha_list: &[f64],
    config: &CertifierConfig,
    extra: &[&Expr],
) -> Result<CriterionReport> {
    if alpha_list.iter().any(|a| !(a.is_finite() && *a > 1.0)) {
        return Err(Error::Input(format!("every base must be finite and exceed 1, got {alpha_list:?}")));
    }
    let mut partition = base_partition(p, q, extra, config.resolution(p.domain().dim()))?;
    let ratio = ratio_exponents(p, q, &partition)?;
    let s0 = sample_gap(&ratio.s, &partition);
    let inf_measure = infinite_measure(&s0);
    let s_max = s0.values().iter().copied().fold(0.0, f64::max);
    if inf_measure > 0.0 {
        let trajectories = alpha_list
            .iter()
            .map(|&alpha| CriterionTrajectory {
                alpha,
                steps: Vec::new(),
                value: Real(f64::INFINITY),
                trend: Trend::Infinite,
                equimeasurable: true,
            })
            .collect();
        return Ok(CriterionReport { infinite_measure: inf_measure, s_max: Real(s_max), trajectories });
    }
    let mut steps: Vec<Vec<CriterionStep>> = vec![Vec::new(); alpha_list.len()];
    for level in 0..=config.refinements {
        if level > 0 {
            if partition.len() << partition.domain().dim() > CELL_BUDGET {
                break;
            }
            partition = Arc::new(partition.refine());
        }
        let s = sample_gap(&ratio.s, &partition);
        for (k, &alpha) in alpha_list.iter().enumerate() {
            let e = equimeasurable_integral(&s, alpha)?;
            steps[k].push(CriterionStep {
                cells: partition.len(),
                space_side: Real(e.space_side),
                rearranged_side: Real(e.rearranged_side),
                log_value: e.log_rearranged_side,
                relative_gap: e.relative_gap(),
            });
        }
    }
    let trajectories = alpha_list
        .iter()
        .zip(steps)
        .map(|(&alpha, steps)| {
            let logs: Vec<f64> = steps.iter().map(|s| s.log_value).collect();
            let equimeasurable = steps.iter().all(|s| s.relative_gap <= config.equimeasurable_tol);
            let value = steps.last().map_or(Real(f64::NAN), |s| s.rearranged_side);
            CriterionTrajectory { alpha, trend: classify(&logs, config.convergence_rtol), steps, value, equimeasurable }
        })
        .collect();
    Ok(CriterionReport { infinite_measure: 0.0, s_max: Real(s_max), trajectories })
}

// ---------------------------------------------------------------------------
// Weights

/// `ℓ_1 = ln`, `ℓ_2 = ln ln`, `ℓ_3 = ln ln ln`, applied to `x = e^{ln_x}`.
fn ell(level: u8, ln_x: f64) -> f64 {
    match level {
        1 => ln_x,
        2 => ln_x.ln(),
        _ => ln_x.ln().ln(),
    }
}

/// `ℓ_k(b/t)` as a function of `z = ln ln(b/t)`.
fn ell_of_z(level: u8, z: f64) -> f64 {
    match level {
        1 => z.exp(),
        2 => z,
        _ => {
            if z > 0.0 {
                z.ln()
            } else {
                f64::NEG_INFINITY
            }
        }
    }
}

/// Point where `ℓ_k` equals 1: `e`, `e^e`, `e^{e^e}`.
fn ell_unit(level: u8) -> f64 {
    let e = std::f64::consts::E;
    match level {
        1 => e,
        2 => e.powf(e),
        _ => e.powf(e.powf(e)),
    }
}

/// A radius `t` in logarithmic form: `ln t` and, when `t < 1`, `ln(−ln t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRadius {
    pub ln_t: f64,
    pub ln_w: f64,
}

impl LogRadius {
    pub fn from_t(t: f64) -> Self {
        let ln_t = t.ln();
        Self { ln_t, ln_w: (-ln_t).ln() }
    }

    /// `ln(c − ln t)`.
    fn ln_shifted(&self, c: f64) -> f64 {
        if self.ln_t.is_finite() {
            (c - self.ln_t).ln()
        } else {
            self.ln_w
        }
    }
}

/// `ω(t) = ℓ_k(b/t)^{1−β}` with `ψ(t) = ℓ_k(t)^β`, clamped to 0 where `ℓ_k(b/t) ≤ 0`.
///
/// The comparison condition is `s(x) ≤ c ω(d_K(x))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub level: u8,
    pub beta: f64,
    pub c: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisCheck {
    pub label: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightHypotheses {
    pub omega0: f64,
    pub checks: Vec<HypothesisCheck>,
    pub pass: bool,
}

impl WeightSpec {
    pub fn new(level: u8, beta: f64, c: f64, scale: f64) -> Result<Self> {
        if !(1..=3).contains(&level) {
            return Err(Error::Input(format!("weight level must be 1, 2 or 3, got {level}")));
        }
        if !(beta.is_finite() && c.is_finite() && c > 0.0 && scale.is_finite() && scale > 0.0) {
            return Err(Error::Input(format!("invalid weight parameters beta = {beta}, c = {c}, scale = {scale}")));
        }
        Ok(Self { level, beta, c, scale })
    }

    /// Scale chosen so that `ω(diam Ω) = 1`.
    pub fn normalized(level: u8, beta: f64, c: f64, domain: &Domain) -> Result<Self> {
        Self::new(level, beta, c, ell_unit(level) * domain.diameter())
    }

    /// `ω(t)`.
    pub fn omega(&self, t: f64) -> f64 {
        self.omega_ln(t.ln())
    }

    fn omega_ln(&self, ln_t: f64) -> f64 {
        let l = ell(self.level, self.scale.ln() - ln_t);
        if l > 0.0 {
            l.powf(1.0 - self.beta)
        } else {
            0.0
        }
    }

    /// `ω` composed with a distance expression, `ℓ_k(b/d)^{1−β}`.
    pub fn omega_expr(&self, d: Expr) -> Expr {
        let mut l = (self.scale / d).ln();
        for _ in 1..self.level {
            l = l.ln();
        }
        l.pow(1.0 - self.beta)
    }

    /// `ψ(t)`, zero below the root of `ℓ_k`.
    pub fn psi(&self, t: f64) -> f64 {
        let l = ell(self.level, t.ln());
        if l > 0.0 {
            l.powf(self.beta)
        } else {
            0.0
        }
    }

    /// `ω₀ = ω(diam Ω)`.
    pub fn omega0(&self, diam: f64) -> f64 {
        self.omega(diam)
    }

    /// `ω⁻¹(y)` for `y > 0`, by bisection on `ln ln(b/t)`.
    pub fn inverse(&self, y: f64) -> LogRadius {
        let target = y.powf(1.0 / (1.0 - self.beta));
        let f = |z: f64| ell_of_z(self.level, z) >= target;
        let mut hi = 1.0;
        while !f(hi) {
            hi *= 2.0;
            if hi > 1e300 {
                return LogRadius { ln_t: f64::NEG_INFINITY, ln_w: f64::INFINITY };
            }
        }
        let mut lo = -1.0;
        while f(lo) {
            lo *= 2.0;
            if lo < -1e300 {
                break;
            }
        }
        let (lo, hi) = bisect_predicate(lo, hi, 1e-12 * hi.abs().max(1.0), 4000, f);
        let z = 0.5 * (lo + hi);
        let ln_scale = self.scale.ln();
        if z < 700.0 {
            let ln_t = ln_scale - z.exp();
            LogRadius { ln_t, ln_w: (-ln_t).ln() }
        } else {
            LogRadius { ln_t: f64::NEG_INFINITY, ln_w: z + (-ln_scale * (-z).exp()).ln_1p() }
        }
    }

    /// Structural hypotheses on `ω` and `ψ`, verified on log-spaced grids.
    pub fn check_hypotheses(&self, diam: f64) -> WeightHypotheses {
        let mut checks = Vec::new();
        checks.push(HypothesisCheck {
            label: "beta in (0, 1)".into(),
            pass: self.beta > 0.0 && self.beta < 1.0,
            detail: format!("beta = {}", self.beta),
        });

        // ω strictly decreasing wherever positive, on t = diam·2^{-j/4}
        let mut prev = f64::NEG_INFINITY;
        let mut decreasing = true;
        let mut support = 0usize;
        for j in (0..=4000).rev() {
            let ln_t = diam.ln() - j as f64 * 0.25 * std::f64::consts::LN_2;
            let w = self.omega_ln(ln_t);
            if w > 0.0 {
                support += 1;
                if prev > 0.0 && !(w < prev) {
                    decreasing = false;
                }
            }
            prev = w;
        }
        // the loop runs from small t upward, so ω must strictly decrease along it
        checks.push(HypothesisCheck {
            label: "omega strictly decreasing on its support".into(),
            pass: decreasing && support > 1,
            detail: format!("{support} grid points in the support"),
        });

        // ψ/ℓ_k decreasing and ψ unbounded, on ln t log-spaced up to 1e300
        let start = ell_unit(self.level).ln();
        let grid: Vec<f64> = (0..=600).map(|i| start * (1e300 / start).powf(i as f64 / 600.0)).collect();
        let ratios: Vec<f64> = grid.iter().map(|&ln_t| ell(self.level, ln_t).powf(self.beta - 1.0)).collect();
        let psis: Vec<f64> = grid.iter().map(|&ln_t| ell(self.level, ln_t).powf(self.beta)).collect();
        let ratio_decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
        checks.push(HypothesisCheck {
            label: "psi / ell_k decreasing".into(),
            pass: ratio_decreasing,
            detail: format!("ratio from {:.6e} to {:.6e}", ratios[0], ratios[ratios.len() - 1]),
        });
        let psi_increasing = psis.windows(2).all(|w| w[1] > w[0]);
        let growth = psis[psis.len() - 1] / psis[0];
        checks.push(HypothesisCheck {
            label: "psi increasing without bound".into(),
            pass: psi_increasing && growth >= 2.0,
            detail: format!("psi grows by a factor {growth:.6e} on the grid"),
        });
        let pass = checks.iter().all(|c| c.pass);
        WeightHypotheses { omega0: self.omega0(diam), checks, pass }
    }
}

// ---------------------------------------------------------------------------
// Singular sets and neighborhood envelopes

/// Upper bound `φ(t) ≤ C t^σ ln(e/t)^λ (ln ln(b/t))^μ` for `t ≤ valid_up_to`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelope {
    pub ln_c: f64,
    pub power: f64,
    pub log_exponent: f64,
    pub loglog_exponent: f64,
    pub loglog_b: f64,
    pub valid_up_to: f64,
    pub constants_fitted: bool,
}

impl Envelope {
    fn power_law(c: f64, power: f64) -> Self {
        Self {
            ln_c: c.ln(),
            power,
            log_exponent: 0.0,
            loglog_exponent: 0.0,
            loglog_b: std::f64::consts::E,
            valid_up_to: f64::INFINITY,
            constants_fitted: false,
        }
    }

    /// 1 for power decay, 2 for logarithmic, 3 for doubly logarithmic; `None` without decay.
    pub fn decay_level(&self) -> Option<u8> {
        if self.power > 0.0 {
            Some(1)
        } else if self.log_exponent < 0.0 {
            Some(2)
        } else if self.loglog_exponent < 0.0 {
            Some(3)
        } else {
            None
        }
    }

    pub fn ln_eval(&self, r: &LogRadius) -> f64 {
        let mut v = self.ln_c;
        if self.power != 0.0 {
            v += self.power * r.ln_t;
        }
        if self.log_exponent != 0.0 {
            v += self.log_exponent * r.ln_shifted(1.0);
        }
        if self.loglog_exponent != 0.0 {
            v += self.loglog_exponent * r.ln_shifted(self.loglog_b.ln()).ln();
        }
        v
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.ln_eval(&LogRadius::from_t(t)).exp()
    }
}

/// The set `K` whose distance function controls `s`.
#[derive(Debug, Clone, PartialEq)]
pub enum SingularSet {
    Point(Vec<f64>),
    /// A Cantor set embedded as `K × {0}^{N−1}`.
    Cantor(CantorStage),
}

impl SingularSet {
    pub fn distance_expr(&self) -> Expr {
        match self {
            SingularSet::Point(p) => Expr::dist_to_point(p.clone()),
            SingularSet::Cantor(stage) => Expr::dist_to_cantor(stage.clone()),
        }
    }

    /// Upper estimate of `d_K(x)`.
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            SingularSet::Point(p) => euclidean(p, x),
            SingularSet::Cantor(stage) => stage.distance_to_set(x).value,
        }
    }

    /// An upper envelope for `φ(t) = |{x ∈ Ω : d_K(x) < t}|`.
    pub fn envelope(&self, domain: &Domain) -> Result<Envelope> {
        let dim = domain.dim();
        match self {
            SingularSet::Point(x0) => {
                if x0.len() != dim {
                    return Err(Error::Input(format!("point has {} coordinates in a {dim}-dimensional domain", x0.len())));
                }
                let faces = match domain {
                    Domain::Box { lower, upper } => (0..dim)
                        .filter(|&i| (x0[i] - lower[i]).abs() <= 1e-14 || (x0[i] - upper[i]).abs() <= 1e-14)
                        .count(),
                    Domain::Ball { center, radius } => usize::from((euclidean(center, x0) - radius).abs() <= 1e-14),
                };
                Ok(Envelope::power_law(unit_ball_volume(dim) * 0.5f64.powi(faces as i32), dim as f64))
            }
            SingularSet::Cantor(stage) => {
                let (lower, upper) = domain.bounding_box();
                let clip = Domain::interval(lower[0].min(0.0), upper[0].max(1.0))?;
                let spill = f64::from(u8::from(lower[0] < 0.0)) + f64::from(u8::from(upper[0] > 1.0));
                let mut env = cantor_envelope(stage, &clip, spill)?;
                if dim > 1 {
                    // the transverse factor (2t)^{N−1}
                    env.ln_c += (dim - 1) as f64 * std::f64::consts::LN_2;
                    env.power += (dim - 1) as f64;
                }
                Ok(env)
            }
        }
    }
}

/// Envelope of the 1-D neighborhood measure within `clip ⊇ [0, 1]`.
fn cantor_envelope(stage: &CantorStage, clip: &Domain, spill: f64) -> Result<Envelope> {
    let gaps = stage.gaps();
    match gaps.family() {
        GapFamily::Geometric { a } => {
            // φ ≤ (4/q) t^s inside [0,1]; each side spilling past [0,1] adds t ≤ t^s
            let q = a / (a + 1.0);
            let mut env = Envelope::power_law(4.0 / q + spill, geometric_exponent(*a));
            env.valid_up_to = 1.0;
            Ok(env)
        }
        GapFamily::Zeta { s } => {
            let s = *s;
            let shape = move |t: f64| (1.0 - t.ln()).powf(1.0 - s);
            let c = fitted_constant(gaps, clip, 1.0, &shape)?;
            Ok(Envelope {
                ln_c: c.ln(),
                power: 0.0,
                log_exponent: 1.0 - s,
                loglog_exponent: 0.0,
                loglog_b: std::f64::consts::E,
                valid_up_to: 1.0,
                constants_fitted: true,
            })
        }
        GapFamily::LogLog { s } => {
            let s = *s;
            let top = gaps.eps(4);
            let t_grid: Vec<f64> = (4..=40).map(|k| gaps.eps(k)).collect();
            let report = verify_asymptotics(gaps, &t_grid, f64::INFINITY)?;
            let b = report.b.ok_or_else(|| Error::Unsupported("loglog fit returned no shift".into()))?;
            let ln_b = b.ln();
            let shape = move |t: f64| (ln_b - t.ln()).ln().powf(1.0 - s);
            let c = fitted_constant(gaps, clip, top, &shape)?;
            Ok(Envelope {
                ln_c: c.ln(),
                power: 0.0,
                log_exponent: 0.0,
                loglog_exponent: 1.0 - s,
                loglog_b: b,
                valid_up_to: top,
                constants_fitted: true,
            })
        }
        GapFamily::Explicit { .. } => {
            Err(Error::Unsupported("neighborhood envelopes exist for the preset gap families only".into()))
        }
    }
}

/// Smallest `C` with `φ(t) ≤ C·shape(t)` on `[ε_60, top]`, valid between grid
/// points because `φ` and `shape` are both nondecreasing.
fn fitted_constant(
    gaps: &GapSequence,
    clip: &Domain,
    top: f64,
    shape: &dyn Fn(f64) -> f64,
) -> Result<f64> {
    let bottom = gaps.eps(60);
    let steps = 400;
    let ratio = (top / bottom).powf(1.0 / steps as f64);
    let mut c: f64 = 0.0;
    let mut t_hi = top;
    for _ in 0..steps {
        let t_lo = t_hi / ratio;
        let upper = phi(gaps, t_hi, clip)?.upper;
        c = c.max(upper / shape(t_lo));
        t_hi = t_lo;
    }
    Ok(c)
}

// ---------------------------------------------------------------------------
// Tail certificate

#[derive(Debug, Clone, Serialize)]
pub struct TailCertificate {
    pub alpha: f64,
    pub omega0: f64,
    /// Beyond `y*` the integrand is at most `e^{−y}` on the grid.
    pub y_star: Real,
    pub finite_part: f64,
    /// `a^{cω₀}|Ω| + c ln a (∫_{ω₀}^{y*} φ(ω⁻¹(y)) a^{cy} dy + e^{−y*})`.
    pub bound: Real,
    pub tail_monotone: bool,
    pub certified: bool,
}

const TAIL_GRID: usize = 96;

/// Bounds `∫_Ω a^{c ω(d_K(x))} dx` through the layer-cake formula.
pub fn certify_tail(weight: &WeightSpec, envelope: &Envelope, domain: &Domain, alpha: f64) -> TailCertificate {
    let measure = domain.measure();
    let ln_measure = measure.ln();
    let omega0 = weight.omega0(domain.diameter());
    let ln_a = alpha.ln();
    let c = weight.c;
    let g = |y: f64| -> f64 {
        let ln_phi = if y <= 0.0 {
            ln_measure
        } else {
            let r = weight.inverse(y);
            if r.ln_t > envelope.valid_up_to.ln() {
                ln_measure
            } else {
                envelope.ln_eval(&r).min(ln_measure)
            }
        };
        ln_phi + c * y * ln_a
    };
    let ys: Vec<f64> = (0..=TAIL_GRID).map(|j| omega0 + 2f64.powf(j as f64 / 4.0) - 1.0).collect();
    let h: Vec<f64> = ys.iter().map(|&y| g(y) + y).collect();
    let last_bad = h.iter().rposition(|&v| v > 0.0);
    let start = last_bad.map_or(0, |j| j + 1);
    let compatible = envelope.decay_level().is_some_and(|l| l <= weight.level) && weight.beta > 0.0 && weight.beta < 1.0;
    if start > TAIL_GRID || !compatible {
        return TailCertificate {
            alpha,
            omega0,
            y_star: Real(f64::INFINITY),
            finite_part: f64::NAN,
            bound: Real(f64::INFINITY),
            tail_monotone: false,
            certified: false,
        };
    }
    let y_star = ys[start];
    let tail_monotone = h[start..].windows(2).all(|w| w[1] <= w[0] || w[1] == f64::NEG_INFINITY);
    let panels = ((y_star - omega0) * 32.0).ceil().clamp(64.0, 20_000.0) as usize;
    let finite_part = if y_star > omega0 { gauss_legendre(|y| g(y).exp(), omega0, y_star, panels) } else { 0.0 };
    let bound = (c * omega0 * ln_a).exp() * measure + c * ln_a * (finite_part + (-y_star).exp());
    TailCertificate {
        alpha,
        omega0,
        y_star: Real(y_star),
        finite_part,
        bound: Real(bound),
        tail_monotone,
        certified: tail_monotone && bound.is_finite(),
    }
}

// ---------------------------------------------------------------------------
// Witnesses

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    /// `E_n = {s ≥ n}`.
    LevelSets,
    /// Shrinking subsets of `{p = q}`.
    Coincidence,
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessEntry {
    pub n: usize,
    pub available: bool,
    pub cells: usize,
    pub set_measure: f64,
    /// `‖χ_{E_n}‖_{r'(·)}`.
    pub chi_norm: Real,
    /// `‖u_n‖_{p(·)}`.
    pub u_norm: f64,
    /// `m_{q(·)}(u_n χ_{E_n})`.
    pub q_modular: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessBundle {
    pub kind: WitnessKind,
    pub entries: Vec<WitnessEntry>,
    /// Smallest `‖χ_{E_n}‖_{r'}` over the available entries.
    pub alpha: Real,
    pub q_minus: f64,
    pub q_plus: f64,
    /// `min(α^{1/q₊}, α^{1/q₋})`.
    pub separation_bound: Real,
    /// `|E_first| / |E_last|` over the available entries.
    pub shrink_ratio: Real,
    pub pass: bool,
    #[serde(skip)]
    pub sets: Vec<CellSubset>,
    #[serde(skip)]
    pub functions: Vec<GridFunction>,
}

/// Sampled exponents on a common partition.
struct WitnessGrid {
    p: GridFunction,
    q: GridFunction,
    s: GridFunction,
    r_conj: GridFunction,
}

impl WitnessGrid {
    fn new(p: &ExponentField, q: &ExponentField, partition: &Arc<Partition>) -> Result<Self> {
        let ratio = ratio_exponents(p, q, partition)?;
        let p = p.sample(partition);
        let s = sample_gap(&ratio.s, partition);
        let r_conj = p.zip_with(&s, |a, b| a * b)?;
        Ok(Self { q: q.sample(partition), p, s, r_conj })
    }
}

fn witness_on(grid: &WitnessGrid, n: usize, set: &CellSubset, tol: f64) -> Result<(WitnessEntry, GridFunction)> {
    let partition = grid.p.partition();
    let measure = set.measure(partition);
    if set.count() == 0 || !(measure > 0.0) {
        let entry = WitnessEntry {
            n,
            available: false,
            cells: 0,
            set_measure: 0.0,
            chi_norm: Real(f64::NAN),
            u_norm: f64::NAN,
            q_modular: f64::NAN,
            pass: false,
        };
        return Ok((entry, GridFunction::from_values(partition, vec![0.0; partition.len()])?));
    }
    let chi = set.indicator(partition);
    let chi_norm = luxemburg_norm_sampled(&chi, &grid.r_conj)?.value;
    let infinite = (0..partition.len()).filter(|&i| set.contains(i)).any(|i| grid.s.values()[i] == f64::INFINITY);
    let values: Vec<f64> = if infinite {
        let norm_p = luxemburg_norm_sampled(&chi, &grid.p)?.value;
        (0..partition.len()).map(|i| if set.contains(i) { 1.0 / norm_p } else { 0.0 }).collect()
    } else {
        let ln_norm = chi_norm.ln();
        (0..partition.len())
            .map(|i| if set.contains(i) { (-grid.s.values()[i] * ln_norm).exp() } else { 0.0 })
            .collect()
    };
    let u = GridFunction::from_values(partition, values)?;
    let u_norm = luxemburg_norm_sampled(&u, &grid.p)?.value;
    let q_modular = modular_sampled(&u, &grid.q)?;
    let pass = (u_norm - 1.0).abs() <= tol && (q_modular - chi_norm).abs() <= tol * chi_norm.max(1.0);
    let entry = WitnessEntry {
        n,
        available: true,
        cells: set.count(),
        set_measure: measure,
        chi_norm: Real(chi_norm),
        u_norm,
        q_modular,
        pass,
    };
    Ok((entry, u))
}

/// Witness for a single set `E` on the given partition.
pub fn witness_for_set(
    p: &ExponentField,
    q: &ExponentField,
    partition: &Arc<Partition>,
    set: &CellSubset,
    tol: f64,
) -> Result<(WitnessEntry, GridFunction)> {
    let grid = WitnessGrid::new(p, q, partition)?;
    witness_on(&grid, 0, set, tol)
}

fn witness_partition(p: &ExponentField, q: &ExponentField, config: &CertifierConfig) -> Result<Arc<Partition>> {
    base_partition(p, q, &[], config.witness_resolution(p.domain().dim()))
}

/// Sets `E_n` and unit-norm functions `u_n` concentrated on them.
///
/// If `{p = q}` has positive measure the sets are shrinking prefixes of it;
/// otherwise `E_n = {s ≥ n}`.
pub fn build_witness(
    p: &ExponentField,
    q: &ExponentField,
    n_list: &[usize],
    config: &CertifierConfig,
) -> Result<WitnessBundle> {
    let partition = witness_partition(p, q, config)?;
    let grid = WitnessGrid::new(p, q, &partition)?;
    let coincidence = CellSubset::from_predicate(&grid.s, |v| v == f64::INFINITY);
    let coincidence_measure = coincidence.measure(&partition);
    let kind = if coincidence_measure > 0.0 { WitnessKind::Coincidence } else { WitnessKind::LevelSets };
    let measures = partition.measures();
    let mut entries = Vec::with_capacity(n_list.len());
    let mut sets = Vec::with_capacity(n_list.len());
    let mut functions = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let set = match kind {
            WitnessKind::Coincidence => {
                let target = coincidence_measure / n as f64;
                let mut mask = vec![false; partition.len()];
                let mut acc = 0.0;
                for i in (0..partition.len()).filter(|&i| coincidence.contains(i)) {
                    if acc >= target * (1.0 - 1e-12) {
                        break;
                    }
                    mask[i] = true;
                    acc += measures[i];
                }
                CellSubset::from_mask(mask)
            }
            WitnessKind::LevelSets => CellSubset::from_predicate(&grid.s, |v| v >= n as f64),
        };
        let (entry, u) = witness_on(&grid, n, &set, config.identity_tol)?;
        entries.push(entry);
        sets.push(set);
        functions.push(u);
    }
    let available: Vec<&WitnessEntry> = entries.iter().filter(|e| e.available).collect();
    let alpha = available.iter().map(|e| e.chi_norm.0).fold(f64::INFINITY, f64::min);
    let alpha = if available.is_empty() { 0.0 } else { alpha };
    let q_minus = grid.q.values().iter().copied().fold(f64::INFINITY, f64::min);
    let q_plus = grid.q.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let separation = alpha.powf(1.0 / q_plus).min(alpha.powf(1.0 / q_minus));
    let shrink = match (available.first(), available.last()) {
        (Some(a), Some(b)) if available.len() >= 2 => a.set_measure / b.set_measure,
        _ => 1.0,
    };
    let pass = available.len() >= 2
        && available.len() == entries.len()
        && available.iter().all(|e| e.pass)
        && shrink >= 100.0
        && alpha >= config.witness_alpha;
    Ok(WitnessBundle {
        kind,
        entries,
        alpha: Real(alpha),
        q_minus,
        q_plus,
        separation_bound: Real(separation),
        shrink_ratio: Real(shrink),
        pass,
        sets,
        functions,
    })
}

// ---------------------------------------------------------------------------
// Certificates

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonCheck {
    pub cells: usize,
    /// Largest `s(x) − c ω(d_K(x))` over the cells.
    pub max_excess: f64,
    pub worst_point: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PresetReport {
    pub weight: WeightSpec,
    pub hypotheses: WeightHypotheses,
    pub envelope: Envelope,
    pub compatible: bool,
    pub comparison: ComparisonCheck,
    pub tails: Vec<TailCertificate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSummary {
    pub cells: usize,
    pub base: usize,
    pub levels: usize,
    pub per_layer: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub verdict: Verdict,
    pub numeric_evidence_only: bool,
    pub evidence: Vec<Evidence>,
    pub diagnostics: Vec<String>,
    pub witness: Option<WitnessBundle>,
    pub criterion: Option<CriterionReport>,
    pub preset: Option<PresetReport>,
    pub grid: GridSummary,
    pub config: CertifierConfig,
}

/// `δ` when `p − q ≡ δ` can be read off the expressions.
pub fn structural_gap(p: &Expr, q: &Expr) -> Option<f64> {
    if let (Some(a), Some(b)) = (p.as_const(), q.as_const()) {
        return Some(a - b);
    }
    let from_q = match q {
        Expr::Sub(x, d) if **x == *p => d.as_const(),
        Expr::Add(x, d) if **x == *p => d.as_const().map(|v| -v),
        _ => None,
    };
    from_q.or_else(|| match p {
        Expr::Add(x, d) if **x == *q => d.as_const(),
        Expr::Add(d, x) if **x == *q => d.as_const(),
        _ => None,
    })
}

fn comparison_check(
    s: &GridFunction,
    singular: &SingularSet,
    weight: &WeightSpec,
) -> ComparisonCheck {
    let cells = s.partition().cells();
    let mut max_excess = f64::NEG_INFINITY;
    let mut worst = Vec::new();
    let mut pass = true;
    for (cell, &sv) in cells.iter().zip(s.values()) {
        let bound = weight.c * weight.omega(singular.distance(&cell.center));
        let excess = sv - bound;
        if excess > max_excess {
            max_excess = excess;
            worst = cell.center.clone();
        }
        if excess > 1e-9 * bound.abs().max(1.0) {
            pass = false;
        }
    }
    ComparisonCheck { cells: cells.len(), max_excess, worst_point: worst, pass }
}

/// Decides almost-compactness of `L^{p(·)}(Ω) ↪ L^{q(·)}(Ω)`.
///
/// Paths, in order: positive-measure coincidence set (witness), uniform gap
/// read from the expressions, a singular set with weight (tail certificate),
/// and finally criterion trajectories, whose positive outcome is flagged as
/// numeric evidence only.
pub fn certify_almost_compact(
    p: &ExponentField,
    q: &ExponentField,
    singular: Option<&SingularSet>,
    weight: Option<&WeightSpec>,
    config: &CertifierConfig,
) -> Result<Certificate> {
    config.validate()?;
    let domain = p.domain().clone();
    let dist = singular.map(SingularSet::distance_expr);
    let extra: Vec<&Expr> = dist.iter().collect();
    let res = config.resolution(domain.dim());
    let partition = base_partition(p, q, &extra, res)?;
    let bounds = p.validate_on(&partition)?;
    if !bounds.plus.is_finite() {
        return Err(Error::Precondition("p must be bounded".into()));
    }
    let ratio = ratio_exponents(p, q, &partition)?;
    let s = sample_gap(&ratio.s, &partition);
    let grid = GridSummary { cells: partition.len(), base: res.base, levels: res.levels, per_layer: res.per_layer };
    let mut cert = Certificate {
        verdict: Verdict::Inconclusive,
        numeric_evidence_only: false,
        evidence: Vec::new(),
        diagnostics: Vec::new(),
        witness: None,
        criterion: None,
        preset: None,
        grid,
        config: config.clone(),
    };
    cert.evidence.push(Evidence::new("sampled p_plus", bounds.plus, "grid: cell centers"));

    let coincidence = infinite_measure(&s);
    cert.evidence.push(Evidence::new("measure of {p = q}", coincidence, "grid: coincidence detection"));
    if coincidence > 0.0 {
        cert.criterion = Some(criterion_on(p, q, &config.a_list, config, &extra)?);
        let witness = build_witness(p, q, &config.witness_n, config)?;
        cert.evidence.push(Evidence::new("criterion integral", f64::INFINITY, "analytic: s* = +inf on an initial segment"));
        cert.evidence.push(Evidence::new("witness alpha", witness.alpha.0, "witness: min norm of indicator in L^{r'}"));
        cert.evidence.push(Evidence::new("separation bound", witness.separation_bound.0, "witness: alpha^(1/q)"));
        if witness.pass {
            cert.verdict = Verdict::NotAlmostCompact;
        } else {
            cert.diagnostics.push("coincidence set has positive measure but the witness failed its checks".into());
        }
        cert.witness = Some(witness);
        return Ok(cert);
    }

    if let Some(delta) = structural_gap(p.expr(), q.expr()).filter(|d| *d > 0.0) {
        let measure = domain.measure();
        cert.evidence.push(Evidence::new("uniform gap p - q", delta, "analytic: expression structure"));
        cert.evidence.push(Evidence::new("sup s", 1.0 / delta, "analytic: 1/gap"));
        for &a in &config.a_list {
            cert.evidence.push(Evidence::new(
                format!("criterion bound at a = {a}"),
                a.powf(1.0 / delta) * measure,
                "analytic: a^(1/gap) |Omega|",
            ));
        }
        cert.criterion = Some(criterion_on(p, q, &config.a_list, config, &extra)?);
        cert.verdict = Verdict::AlmostCompact;
        return Ok(cert);
    }

    match (singular, weight) {
        (Some(set), Some(w)) => {
            preset_path(&mut cert, p, q, set, w, &s, &extra, config)?;
            return Ok(cert);
        }
        (Some(_), None) | (None, Some(_)) => {
            cert.diagnostics.push("singular set and weight must be given together; using the numeric path".into());
        }
        (None, None) => {}
    }

    let criterion = criterion_on(p, q, &config.a_list, config, &extra)?;
    if criterion.all_converged() {
        cert.verdict = Verdict::AlmostCompact;
        cert.numeric_evidence_only = true;
        for t in &criterion.trajectories {
            cert.evidence.push(Evidence::new(format!("criterion integral at a = {}", t.alpha), t.value.0, "numeric: converged trajectory"));
        }
    } else if criterion.any_diverging() {
        let witness = build_witness(p, q, &config.witness_n, config)?;
        cert.evidence.push(Evidence::new("witness alpha", witness.alpha.0, "witness: min norm of indicator in L^{r'}"));
        if witness.pass {
            cert.verdict = Verdict::NotAlmostCompact;
            cert.evidence.push(Evidence::new("separation bound", witness.separation_bound.0, "witness: alpha^(1/q)"));
        } else {
            cert.diagnostics.push("criterion trajectories grow but no witness passed its checks".into());
        }
        cert.witness = Some(witness);
    } else {
        cert.diagnostics.push("criterion trajectories neither converged nor diverged".into());
    }
    cert.criterion = Some(criterion);
    Ok(cert)
}

#[allow(clippy::too_many_arguments)]
fn preset_path(
    cert: &mut Certificate,
    p: &ExponentField,
    q: &ExponentField,
    set: &SingularSet,
    weight: &WeightSpec,
    s: &GridFunction,
    extra: &[&Expr],
    config: &CertifierConfig,
) -> Result<()> {
    let domain = p.domain();
    let hypotheses = weight.check_hypotheses(domain.diameter());
    let envelope = set.envelope(domain)?;
    let compatible = envelope.decay_level().is_some_and(|l| l <= weight.level);
    let refined = s.refined().unwrap_or_else(|| s.clone());
    let comparison = comparison_check(&refined, set, weight);
    let tails: Vec<TailCertificate> =
        config.a_list.iter().map(|&a| certify_tail(weight, &envelope, domain, a)).collect();
    for check in hypotheses.checks.iter().filter(|c| !c.pass) {
        cert.diagnostics.push(format!("weight hypothesis failed: {} ({})", check.label, check.detail));
    }
    if !compatible {
        cert.diagnostics.push(format!(
            "envelope decay level {:?} is not dominated by weight level {}",
            envelope.decay_level(),
            weight.level
        ));
    }
    if !comparison.pass {
        cert.diagnostics.push(format!(
            "s exceeds c*omega(d_K) by {:.3e} at {:?}",
            comparison.max_excess, comparison.worst_point
        ));
    }
    cert.evidence.push(Evidence::new("omega0", hypotheses.omega0, "analytic: weight at diam"));
    cert.evidence.push(Evidence::new(
        "envelope power",
        envelope.power,
        if envelope.constants_fitted { "numeric: fitted envelope" } else { "analytic: envelope" },
    ));
    cert.evidence.push(Evidence::new("max s - c omega(d_K)", comparison.max_excess, "grid: refined cell centers"));
    let criterion = criterion_on(p, q, &config.a_list, config, extra)?;
    let mut tails_ok = true;
    for tail in &tails {
        cert.evidence.push(Evidence::new(format!("tail index y* at a = {}", tail.alpha), tail.y_star.0, "numeric: tail grid"));
        cert.evidence.push(Evidence::new(format!("criterion bound at a = {}", tail.alpha), tail.bound.0, "analytic: layer-cake bound with quadrature"));
        if !tail.certified {
            tails_ok = false;
            cert.diagnostics.push(format!("tail not certified at a = {}", tail.alpha));
        }
        if let Some(traj) = criterion.trajectory(tail.alpha) {
            let consistent = traj.trend != Trend::Converged || traj.value.0 <= tail.bound.0 * (1.0 + 1e-3);
            if !consistent {
                tails_ok = false;
                cert.diagnostics.push(format!(
                    "criterion value {} exceeds the certified bound {} at a = {}",
                    traj.value.0, tail.bound.0, tail.alpha
                ));
            }
        }
    }
    if hypotheses.pass && compatible && comparison.pass && tails_ok {
        cert.verdict = Verdict::AlmostCompact;
    }
    cert.criterion = Some(criterion);
    cert.preset = Some(PresetReport { weight: *weight, hypotheses, envelope, compatible, comparison, tails });
    Ok(())
}

/// `{x : |p(x) − q(x)| ≤ tol}` on the partition, for callers outside the certifier.
pub fn coincidence_set(p: &GridFunction, q: &GridFunction) -> Result<CellSubset> {
    p.check_same_partition(q)?;
    let mask = p.values().iter().zip(q.values()).map(|(a, b)| (a - b).abs() <= COINCIDENCE_TOL).collect();
    Ok(CellSubset::from_mask(mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::{build_stage, GapSequence};

    /// `∫₀^∞ e^{√L − L} dL`, evaluated with mpmath at 30 digits.
    const SQRT_LOG_ORACLE: f64 = 2.730_234_433_703_700_2;

    fn unit() -> Domain {
        Domain::unit_interval()
    }

    fn field(e: Expr) -> ExponentField {
        ExponentField::new(e, unit())
    }

    fn sqrt_log_pair() -> (ExponentField, ExponentField) {
        let s = (1.0 / Expr::dist_to_point(vec![0.0])).ln().sqrt();
        (field(2.0 + 1.0 / s), ExponentField::constant(2.0, unit()))
    }

    fn fast() -> CertifierConfig {
        CertifierConfig { refinements: 2, ..CertifierConfig::default() }
    }

    #[test]
    fn bounded_gap_criterion_is_exact() {
        let p = ExponentField::constant(2.0, unit());
        let q = ExponentField::constant(1.0, unit());
        let r = criterion_integral(&p, &q, &[2.0], &fast()).unwrap();
        let t = &r.trajectories[0];
        assert_eq!(t.trend, Trend::Converged);
        assert!((t.value.0 - 2.0).abs() < 1e-12, "{}", t.value.0);
        assert!(t.equimeasurable);
    }

    #[test]
    fn sqrt_log_criterion_matches_substitution_oracle() {
        let (p, q) = sqrt_log_pair();
        let r = criterion_integral(&p, &q, &[std::f64::consts::E], &fast()).unwrap();
        let t = &r.trajectories[0];
        assert!(t.equimeasurable);
        assert!(((t.value.0 - SQRT_LOG_ORACLE) / SQRT_LOG_ORACLE).abs() < 1e-3, "{}", t.value.0);
        assert_eq!(t.trend, Trend::Converged);
    }

    #[test]
    fn reciprocal_gap_diverges() {
        let p = field(2.0 + Expr::x());
        let q = ExponentField::constant(2.0, unit());
        let r = criterion_integral(&p, &q, &[2.0], &CertifierConfig::default()).unwrap();
        let t = &r.trajectories[0];
        assert_eq!(t.trend, Trend::Diverging, "{:?}", t.steps.iter().map(|s| s.log_value).collect::<Vec<_>>());
        assert!(t.equimeasurable);
    }

    #[test]
    fn criterion_rejects_q_above_p() {
        let p = ExponentField::constant(2.0, unit());
        let q = field(1.5 + Expr::x());
        assert!(matches!(criterion_integral(&p, &q, &[2.0], &fast()), Err(Error::Precondition(_))));
    }

    #[test]
    fn criterion_is_monotone_in_the_base() {
        let (p, q) = sqrt_log_pair();
        let bases = [1.5, 2.0, std::f64::consts::E, 5.0, 10.0];
        let r = criterion_integral(&p, &q, &bases, &CertifierConfig { refinements: 0, ..fast() }).unwrap();
        let values: Vec<f64> = r.trajectories.iter().map(|t| t.value.0).collect();
        assert!(values.windows(2).all(|w| w[0] <= w[1]), "{values:?}");
    }

    #[test]
    fn coincidence_reports_infinite_criterion() {
        let p = ExponentField::constant(2.0, unit());
        let q = field(Expr::step(0, vec![0.5], vec![2.0, 1.5]));
        let r = criterion_integral(&p, &q, &[2.0], &fast()).unwrap();
        assert!((r.infinite_measure - 0.5).abs() < 1e-12);
        assert_eq!(r.trajectories[0].trend, Trend::Infinite);
    }

    #[test]
    fn weight_inverse_round_trips() {
        for level in 1..=3u8 {
            let w = WeightSpec::normalized(level, 0.5, 1.0, &unit()).unwrap();
            assert!((w.omega0(1.0) - 1.0).abs() < 1e-12);
            for &y in &[1.05, 1.5, 2.0, 2.5] {
                let r = w.inverse(y);
                let back = w.omega_ln(r.ln_t);
                assert!((back - y).abs() < 1e-9, "level {level}: ω(ω⁻¹({y})) = {back}");
            }
        }
    }

    #[test]
    fn weight_hypotheses() {
        for level in 1..=3u8 {
            let ok = WeightSpec::normalized(level, 0.5, 1.0, &unit()).unwrap();
            assert!(ok.check_hypotheses(1.0).pass, "level {level}");
        }
        let bad = WeightSpec::new(1, 1.2, 1.0, std::f64::consts::E).unwrap();
        let h = bad.check_hypotheses(1.0);
        assert!(!h.pass);
        let zero = WeightSpec::new(2, 0.0, 1.0, 10.0).unwrap();
        assert!(!zero.check_hypotheses(1.0).pass);
    }

    #[test]
    fn boundary_point_envelope_is_exact_on_the_interval() {
        let env = SingularSet::Point(vec![0.0]).envelope(&unit()).unwrap();
        for &t in &[1e-6, 1e-3, 0.25, 0.9] {
            assert!((env.eval(t) - t).abs() < 1e-15 * t.max(1.0) + 1e-15);
        }
        let interior = SingularSet::Point(vec![0.5, 0.5]).envelope(&Domain::unit_cube(2)).unwrap();
        assert!((interior.eval(0.1) - std::f64::consts::PI * 0.01).abs() < 1e-14);
    }

    #[test]
    fn tail_bound_matches_layer_cake_oracle() {
        // φ(t) = t and ω(t) = √ln(1/t) give 1 + ∫₀^∞ e^{y − y²} dy at a = e
        let env = SingularSet::Point(vec![0.0]).envelope(&unit()).unwrap();
        let w = WeightSpec::new(1, 0.5, 1.0, 1.0).unwrap();
        let tail = certify_tail(&w, &env, &unit(), std::f64::consts::E);
        assert!(tail.certified);
        // exact below y*, with e^{−y*} standing in for the remaining tail
        let slack = (-tail.y_star.0).exp();
        assert!(tail.bound.0 >= SQRT_LOG_ORACLE && tail.bound.0 <= SQRT_LOG_ORACLE + slack, "{}", tail.bound.0);
        let exact_part = 1.0 + tail.finite_part + slack;
        assert!((exact_part - tail.bound.0).abs() < 1e-12);
    }

    #[test]
    fn incompatible_envelope_is_not_certified() {
        let stage = build_stage(&GapSequence::zeta(2.0).unwrap(), 30).unwrap();
        let env = SingularSet::Cantor(stage).envelope(&unit()).unwrap();
        assert_eq!(env.decay_level(), Some(2));
        let w = WeightSpec::normalized(1, 0.5, 1.0, &unit()).unwrap();
        assert!(!certify_tail(&w, &env, &unit(), 2.0).certified);
        let w2 = WeightSpec::normalized(2, 0.5, 1.0, &unit()).unwrap();
        assert!(certify_tail(&w2, &env, &unit(), 2.0).certified);
    }

    #[test]
    fn cantor_envelopes_dominate_exact_measure() {
        let omega = unit();
        for gaps in [GapSequence::classical(), GapSequence::geometric(3.0).unwrap(), GapSequence::zeta(2.0).unwrap()] {
            let stage = build_stage(&gaps, 30).unwrap();
            let env = SingularSet::Cantor(stage).envelope(&omega).unwrap();
            for k in 1..=50 {
                let t = gaps.eps(k) * 0.7;
                let exact = phi(&gaps, t, &omega).unwrap().upper;
                assert!(exact <= env.eval(t) * (1.0 + 1e-12), "{:?} k = {k}: {exact} > {}", gaps.family(), env.eval(t));
            }
        }
    }

    #[test]
    fn embedded_cantor_envelope_dominates_grid_measure() {
        let domain = Domain::new_box(vec![0.0, -0.5], vec![1.0, 0.5]).unwrap();
        let set = SingularSet::Cantor(build_stage(&GapSequence::classical(), 12).unwrap());
        let env = set.envelope(&domain).unwrap();
        let part = Partition::uniform(&domain, 400).unwrap();
        for &t in &[0.02, 0.05, 0.2] {
            let covered: f64 = part.cells().iter().filter(|c| set.distance(&c.center) < t).map(|c| c.measure).sum();
            assert!(covered <= env.eval(t), "t = {t}: {covered} > {}", env.eval(t));
        }
    }

    #[test]
    fn constant_witness_closed_form() {
        let p = ExponentField::constant(2.0, unit());
        let q = ExponentField::constant(1.0, unit());
        let part = Arc::new(Partition::uniform(&unit(), 100).unwrap());
        let set = CellSubset::from_mask((0..100).map(|i| i < 30).collect());
        let (e, u) = witness_for_set(&p, &q, &part, &set, 1e-8).unwrap();
        let m: f64 = 0.3;
        assert!((e.chi_norm.0 - m.sqrt()).abs() < 1e-12);
        assert!((e.u_norm - 1.0).abs() < 1e-12);
        assert!((e.q_modular - m.sqrt()).abs() < 1e-12);
        assert!((u.values()[0] - 1.0 / m.sqrt()).abs() < 1e-12);
        assert!(e.pass);
    }

    #[test]
    fn whole_domain_witness_has_unit_norm() {
        let q = field(1.2 + 0.5 * Expr::x());
        let p = field(2.2 + 0.5 * Expr::x());
        let part = Arc::new(Partition::uniform(&unit(), 512).unwrap());
        let (e, u) = witness_for_set(&p, &q, &part, &CellSubset::all(512), 1e-8).unwrap();
        let oracle = crate::modular::luxemburg_norm(&u, &p).unwrap().value;
        assert!((oracle - 1.0).abs() < 1e-8 && e.pass, "{oracle} {e:?}");
    }

    #[test]
    fn uniform_gap_is_almost_compact() {
        let p = ExponentField::constant(2.0, unit());
        let q = ExponentField::constant(1.9, unit());
        let c = certify_almost_compact(&p, &q, None, None, &fast()).unwrap();
        assert_eq!(c.verdict, Verdict::AlmostCompact);
        assert!(!c.numeric_evidence_only);
        // a passing witness would contradict the verdict
        let w = build_witness(&p, &q, &[1, 4, 16, 64, 256, 1024], &fast()).unwrap();
        assert!(!w.pass);
    }

    #[test]
    fn sqrt_log_preset_is_almost_compact() {
        let (p, q) = sqrt_log_pair();
        let set = SingularSet::Point(vec![0.0]);
        let w = WeightSpec::new(1, 0.5, 1.0, 1.0).unwrap();
        let c = certify_almost_compact(&p, &q, Some(&set), Some(&w), &fast()).unwrap();
        assert_eq!(c.verdict, Verdict::AlmostCompact, "{:?}", c.diagnostics);
        assert!(!c.numeric_evidence_only);
        let preset = c.preset.unwrap();
        assert!(preset.tails.iter().all(|t| t.certified));
    }

    #[test]
    fn violated_comparison_is_inconclusive() {
        let (p, q) = sqrt_log_pair();
        let set = SingularSet::Point(vec![0.0]);
        let w = WeightSpec::new(1, 0.5, 0.5, 1.0).unwrap();
        let c = certify_almost_compact(&p, &q, Some(&set), Some(&w), &fast()).unwrap();
        assert_eq!(c.verdict, Verdict::Inconclusive);
        assert!(!c.diagnostics.is_empty());
    }

    #[test]
    fn coincidence_on_subinterval_is_not_almost_compact() {
        let p = ExponentField::constant(2.0, unit());
        let q = field(Expr::step(0, vec![0.5], vec![2.0, 1.5]));
        let c = certify_almost_compact(&p, &q, None, None, &fast()).unwrap();
        assert_eq!(c.verdict, Verdict::NotAlmostCompact, "{:?}", c.diagnostics);
        let w = c.witness.unwrap();
        assert_eq!(w.kind, WitnessKind::Coincidence);
        for e in &w.entries {
            assert!((e.u_norm - 1.0).abs() <= 1e-8);
            assert!((e.q_modular - e.chi_norm.0).abs() <= 1e-8);
        }
        assert!(w.separation_bound.0 > 0.0);
        assert!(w.shrink_ratio.0 >= 100.0);
    }

    #[test]
    fn reciprocal_gap_is_not_almost_compact_through_level_sets() {
        let p = field(2.0 + Expr::x());
        let q = ExponentField::constant(2.0, unit());
        let c = certify_almost_compact(&p, &q, None, None, &CertifierConfig::default()).unwrap();
        assert_eq!(c.verdict, Verdict::NotAlmostCompact, "{:?}", c.diagnostics);
        let w = c.witness.unwrap();
        assert_eq!(w.kind, WitnessKind::LevelSets);
        assert!(w.alpha.0 >= 0.5);
    }

    #[test]
    fn structural_gap_detection() {
        let p = 2.0 + Expr::x();
        assert_eq!(structural_gap(&p, &(p.clone() - 0.25)), Some(0.25));
        assert_eq!(structural_gap(&(p.clone() + 0.5), &p), Some(0.5));
        assert_eq!(structural_gap(&p, &Expr::x()), Some(2.0));
        assert_eq!(structural_gap(&p, &(1.5 * Expr::x())), None);
    }
}
