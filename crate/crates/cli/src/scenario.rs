//! Scenario files: schema, validation, and resolution into core objects.

use std::fmt;
use std::path::{Component, Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use vexspace_core::cantor::{build_stage, GapFamily, GapSequence};
use vexspace_core::certifier::{CertifierConfig, SingularSet, WeightSpec};
use vexspace_core::exponent::sobolev_conjugate;
use vexspace_core::expr::SampleTable;
use vexspace_core::{Domain, ExponentField, Expr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Norm,
    Rearrange,
    Cantor,
    CertifyAe,
    CertifyCompact,
    Witness,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Task::Norm => "norm",
            Task::Rearrange => "rearrange",
            Task::Cantor => "cantor",
            Task::CertifyAe => "certify-ae",
            Task::CertifyCompact => "certify-compact",
            Task::Witness => "witness",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    pub task: Task,
    pub domain: DomainSpec,
    #[serde(default)]
    pub p: Option<FieldSpec>,
    #[serde(default)]
    pub q: Option<FieldSpec>,
    /// The function for the `norm` and `rearrange` tasks.
    #[serde(default)]
    pub u: Option<FieldSpec>,
    #[serde(default)]
    pub cantor: Option<CantorSpec>,
    /// Defaults to the Cantor set when one is declared.
    #[serde(default)]
    pub singular: Option<SingularSpec>,
    #[serde(default)]
    pub weight: Option<WeightInput>,
    #[serde(default)]
    pub witness: Option<WitnessSpec>,
    /// Grid, base and tolerance overrides.
    #[serde(default)]
    pub config: CertifierConfig,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Interval { lower: f64, upper: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl DomainSpec {
    pub fn build(&self) -> vexspace_core::Result<Domain> {
        match self {
            DomainSpec::Interval { lower, upper } => Domain::interval(*lower, *upper),
            DomainSpec::Box { lower, upper } => Domain::new_box(lower.clone(), upper.clone()),
            DomainSpec::Ball { center, radius } => Domain::ball(center.clone(), *radius),
        }
    }
}

/// A real field on `Ω`: an exponent or a test function.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    Constant { value: f64 },
    Family(Family),
    /// CSV rows `x₁,…,x_N,value`, looked up by nearest sample.
    Grid { file: PathBuf },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Family {
    /// `a + b·x_axis`.
    Affine(AffineParams),
    /// `base + amplitude·|x_axis|^exponent`.
    Power(PowerParams),
    /// `base − amplitude/ln(e²/|x_axis|)`.
    LogHolder(LogHolderParams),
    Step(StepParams),
    /// `reference ∓ delta`.
    UniformGap(GapParams),
    /// `reference ∓ 1/√ln(1/d_K)`.
    SqrtLogGap(GapParams),
    /// `reference ∓ 1/(c·ω(d_K))` with the scenario weight.
    WeightedGap(GapParams),
    /// `reference` on a slab `lower ≤ x_axis < upper`, `reference − delta` elsewhere.
    CoincidenceWindow(WindowParams),
    /// Uniform random values on equal pieces along one axis, drawn from the scenario seed.
    RandomSteps(RandomParams),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineParams {
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub axis: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerParams {
    pub base: f64,
    pub amplitude: f64,
    pub exponent: f64,
    #[serde(default)]
    pub axis: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogHolderParams {
    pub base: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub axis: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepParams {
    #[serde(default)]
    pub axis: usize,
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapParams {
    #[serde(default)]
    pub reference: Reference,
    #[serde(default)]
    pub side: Side,
    /// Required by `uniform-gap`.
    #[serde(default)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowParams {
    #[serde(default)]
    pub reference: Reference,
    #[serde(default)]
    pub axis: usize,
    pub lower: f64,
    pub upper: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomParams {
    pub pieces: usize,
    pub low: f64,
    pub high: f64,
    #[serde(default)]
    pub axis: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Reference {
    Value(f64),
    Field(FieldRef),
}

impl Default for Reference {
    fn default() -> Self {
        Reference::Field(FieldRef::P)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum FieldRef {
    #[serde(rename = "p")]
    P,
    #[serde(rename = "p#")]
    PSharp,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    #[default]
    Below,
    Above,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CantorSpec {
    pub gaps: GapFamily,
    /// Stage used as the singular set.
    #[serde(default = "default_stage")]
    pub stage: usize,
    /// Radii `ε_k` for `k` in this inclusive range feed the asymptotics table.
    #[serde(default = "default_k_range")]
    pub k_range: [usize; 2],
    #[serde(default = "default_band_limit")]
    pub band_limit: f64,
}

fn default_stage() -> usize {
    30
}

fn default_k_range() -> [usize; 2] {
    [2, 20]
}

fn default_band_limit() -> f64 {
    10.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SingularSpec {
    Point { at: Vec<f64> },
    Cantor,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightInput {
    pub level: u8,
    pub beta: f64,
    #[serde(default = "one")]
    pub c: f64,
    /// Normalized so that `ω(diam Ω) = 1` when absent.
    #[serde(default)]
    pub scale: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WitnessSpec {
    LevelSets {
        #[serde(default)]
        n: Option<Vec<usize>>,
    },
    Bump { center: Vec<f64>, eps0: f64, count: usize },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    /// Relative path stem for every artifact; the scenario name by default.
    #[serde(default)]
    pub prefix: Option<String>,
    #[serde(default = "yes")]
    pub csv: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Self { prefix: None, csv: true }
    }
}

fn yes() -> bool {
    true
}

/// Command-line settings applied on top of every scenario.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub grid_levels: Option<usize>,
    pub a_list: Option<Vec<f64>>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

/// A schema violation, located by field path.
#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl Issue {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

/// A validated scenario with every field resolved.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub name: String,
    pub task: Task,
    pub seed: u64,
    pub domain: Domain,
    pub p: Option<ExponentField>,
    pub q: Option<ExponentField>,
    pub u: Option<ExponentField>,
    pub gaps: Option<GapSequence>,
    pub cantor: Option<CantorSpec>,
    pub singular: Option<SingularSet>,
    pub weight: Option<WeightSpec>,
    pub witness: WitnessSpec,
    pub config: CertifierConfig,
    pub prefix: String,
    pub csv: bool,
}

struct Ctx<'a> {
    domain: &'a Domain,
    p: Option<&'a ExponentField>,
    singular: Option<&'a SingularSet>,
    weight: Option<&'a WeightSpec>,
    seed: u64,
    base_dir: &'a Path,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.')) && !name.starts_with('.')
}

fn valid_prefix(prefix: &str) -> bool {
    let path = Path::new(prefix);
    !prefix.is_empty() && path.components().all(|c| matches!(c, Component::Normal(_)))
}

impl Scenario {
    /// Validates the scenario and resolves its fields; `base_dir` anchors grid files.
    pub fn prepare(&self, base_dir: &Path, overrides: &Overrides) -> Result<Prepared, Vec<Issue>> {
        let mut issues = Vec::new();
        if !valid_name(&self.name) {
            issues.push(Issue::new("name", "must be non-empty and use only letters, digits, '-', '_' and '.'"));
        }

        let mut config = self.config.clone();
        if let Some(levels) = overrides.grid_levels {
            config.grid_levels = Some(levels);
        }
        if let Some(a) = &overrides.a_list {
            config.a_list = a.clone();
        }
        if let Some(tol) = overrides.tol {
            config.equimeasurable_tol = tol;
        }
        if let Err(e) = config.validate() {
            issues.push(Issue::new("config", e.to_string()));
        }
        let seed = overrides.seed.unwrap_or(self.seed);

        let domain = match self.domain.build() {
            Ok(d) => d,
            Err(e) => {
                issues.push(Issue::new("domain", e.to_string()));
                return Err(issues);
            }
        };
        let dim = domain.dim();

        let needs: &[(&str, bool)] = match self.task {
            Task::Norm => &[("p", self.p.is_some()), ("u", self.u.is_some())],
            Task::Rearrange => &[("u", self.u.is_some())],
            Task::Cantor => &[("cantor", self.cantor.is_some())],
            Task::CertifyAe | Task::CertifyCompact | Task::Witness => {
                &[("p", self.p.is_some()), ("q", self.q.is_some())]
            }
        };
        for (field, present) in needs {
            if !present {
                issues.push(Issue::new(*field, format!("required by task {}", self.task)));
            }
        }

        let mut gaps = None;
        let mut stage = None;
        if let Some(c) = &self.cantor {
            match GapSequence::new(c.gaps.clone()) {
                Ok(g) => {
                    match build_stage(&g, c.stage) {
                        Ok(s) => stage = Some(s),
                        Err(e) => issues.push(Issue::new("cantor.stage", e.to_string())),
                    }
                    gaps = Some(g);
                }
                Err(e) => issues.push(Issue::new("cantor.gaps", e.to_string())),
            }
            if c.k_range[0] > c.k_range[1] {
                issues.push(Issue::new("cantor.k_range", "lower index exceeds upper index"));
            }
            if !(c.band_limit.is_finite() && c.band_limit > 0.0) {
                issues.push(Issue::new("cantor.band_limit", "must be positive"));
            }
        }

        let singular = match (&self.singular, &stage) {
            (Some(SingularSpec::Point { at }), _) => {
                if at.len() != dim {
                    issues.push(Issue::new("singular.at", format!("expected {dim} coordinates")));
                }
                Some(SingularSet::Point(at.clone()))
            }
            (Some(SingularSpec::Cantor), Some(s)) | (None, Some(s)) => Some(SingularSet::Cantor(s.clone())),
            (Some(SingularSpec::Cantor), None) => {
                if self.cantor.is_none() {
                    issues.push(Issue::new("singular", "a Cantor singular set needs a cantor section"));
                }
                None
            }
            (None, None) => None,
        };

        let weight = match &self.weight {
            None => None,
            Some(w) => {
                let built = match w.scale {
                    Some(b) => WeightSpec::new(w.level, w.beta, w.c, b),
                    None => WeightSpec::normalized(w.level, w.beta, w.c, &domain),
                };
                match built {
                    Ok(w) => Some(w),
                    Err(e) => {
                        issues.push(Issue::new("weight", e.to_string()));
                        None
                    }
                }
            }
        };

        let witness = self.witness.clone().unwrap_or(WitnessSpec::LevelSets { n: None });
        if let WitnessSpec::Bump { center, eps0, count } = &witness {
            if center.len() != dim {
                issues.push(Issue::new("witness.center", format!("expected {dim} coordinates")));
            }
            if !(eps0.is_finite() && *eps0 > 0.0) {
                issues.push(Issue::new("witness.eps0", "must be positive"));
            }
            if *count < 2 {
                issues.push(Issue::new("witness.count", "must be at least 2"));
            }
        }

        let prefix = self.outputs.prefix.clone().unwrap_or_else(|| self.name.clone());
        if !valid_prefix(&prefix) {
            issues.push(Issue::new("outputs.prefix", "must be a relative path without '..'"));
        }

        let mut ctx = Ctx { domain: &domain, p: None, singular: singular.as_ref(), weight: weight.as_ref(), seed, base_dir };
        let p = self.resolve_field("p", self.p.as_ref(), &ctx, 1, &mut issues);
        ctx.p = p.as_ref();
        let q = self.resolve_field("q", self.q.as_ref(), &ctx, 2, &mut issues);
        let u = self.resolve_field("u", self.u.as_ref(), &ctx, 3, &mut issues);

        if !issues.is_empty() {
            return Err(issues);
        }
        Ok(Prepared {
            name: self.name.clone(),
            task: self.task,
            seed,
            domain,
            p,
            q,
            u,
            gaps,
            cantor: self.cantor.clone(),
            singular,
            weight,
            witness,
            config,
            prefix,
            csv: self.outputs.csv,
        })
    }

    fn resolve_field(
        &self,
        path: &str,
        spec: Option<&FieldSpec>,
        ctx: &Ctx,
        salt: u64,
        issues: &mut Vec<Issue>,
    ) -> Option<ExponentField> {
        let spec = spec?;
        match resolve_expr(spec, path, ctx, salt) {
            Ok(expr) => Some(ExponentField::new(expr, ctx.domain.clone())),
            Err(mut errs) => {
                issues.append(&mut errs);
                None
            }
        }
    }
}

fn check_axis(path: &str, axis: usize, dim: usize) -> Result<(), Vec<Issue>> {
    if axis >= dim {
        return Err(vec![Issue::new(format!("{path}.params.axis"), format!("axis {axis} out of range for dimension {dim}"))]);
    }
    Ok(())
}

fn reference_expr(path: &str, reference: &Reference, ctx: &Ctx) -> Result<Expr, Vec<Issue>> {
    let at = format!("{path}.params.reference");
    match reference {
        Reference::Value(v) => Ok(Expr::constant(*v)),
        Reference::Field(r) => {
            let p = ctx.p.ok_or_else(|| vec![Issue::new(&at, "p is not available here")])?;
            match r {
                FieldRef::P => Ok(p.expr().clone()),
                FieldRef::PSharp => sobolev_conjugate(p, ctx.domain.dim())
                    .map(|f| f.expr().clone())
                    .map_err(|e| vec![Issue::new(&at, e.to_string())]),
            }
        }
    }
}

fn apply_side(reference: Expr, gap: Expr, side: Side) -> Expr {
    match side {
        Side::Below => reference - gap,
        Side::Above => reference + gap,
    }
}

fn distance(path: &str, ctx: &Ctx) -> Result<Expr, Vec<Issue>> {
    ctx.singular
        .map(|s| s.distance_expr())
        .ok_or_else(|| vec![Issue::new(format!("{path}.params"), "this family needs a singular set")])
}

fn resolve_expr(spec: &FieldSpec, path: &str, ctx: &Ctx, salt: u64) -> Result<Expr, Vec<Issue>> {
    let dim = ctx.domain.dim();
    match spec {
        FieldSpec::Constant { value } => Ok(Expr::constant(*value)),
        FieldSpec::Grid { file } => read_grid(&ctx.base_dir.join(file), dim)
            .map(Expr::samples)
            .map_err(|m| vec![Issue::new(format!("{path}.file"), m)]),
        FieldSpec::Family(family) => match family {
            Family::Affine(a) => {
                check_axis(path, a.axis, dim)?;
                Ok(a.a + a.b * Expr::coord(a.axis))
            }
            Family::Power(pw) => {
                check_axis(path, pw.axis, dim)?;
                Ok(pw.base + pw.amplitude * Expr::coord(pw.axis).abs().pow(pw.exponent))
            }
            Family::LogHolder(l) => {
                check_axis(path, l.axis, dim)?;
                let e2 = std::f64::consts::E * std::f64::consts::E;
                Ok(l.base - l.amplitude / (e2 / Expr::coord(l.axis).abs()).ln())
            }
            Family::Step(s) => {
                check_axis(path, s.axis, dim)?;
                if s.values.len() != s.breaks.len() + 1 {
                    return Err(vec![Issue::new(format!("{path}.params.values"), "needs one more value than breaks")]);
                }
                if s.breaks.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(vec![Issue::new(format!("{path}.params.breaks"), "must be strictly increasing")]);
                }
                Ok(Expr::step(s.axis, s.breaks.clone(), s.values.clone()))
            }
            Family::UniformGap(g) => {
                let delta = g.delta.ok_or_else(|| vec![Issue::new(format!("{path}.params.delta"), "required")])?;
                if !(delta.is_finite() && delta > 0.0) {
                    return Err(vec![Issue::new(format!("{path}.params.delta"), "must be positive")]);
                }
                Ok(apply_side(reference_expr(path, &g.reference, ctx)?, Expr::constant(delta), g.side))
            }
            Family::SqrtLogGap(g) => {
                let d = distance(path, ctx)?;
                let gap = 1.0 / (1.0 / d).ln().sqrt();
                Ok(apply_side(reference_expr(path, &g.reference, ctx)?, gap, g.side))
            }
            Family::WeightedGap(g) => {
                let d = distance(path, ctx)?;
                let w = ctx.weight.ok_or_else(|| vec![Issue::new(format!("{path}.params"), "weighted-gap needs a weight section")])?;
                let gap = 1.0 / (w.c * w.omega_expr(d));
                Ok(apply_side(reference_expr(path, &g.reference, ctx)?, gap, g.side))
            }
            Family::CoincidenceWindow(wp) => {
                check_axis(path, wp.axis, dim)?;
                if !(wp.lower < wp.upper) {
                    return Err(vec![Issue::new(format!("{path}.params.lower"), "must be below upper")]);
                }
                if !(wp.delta.is_finite() && wp.delta > 0.0) {
                    return Err(vec![Issue::new(format!("{path}.params.delta"), "must be positive")]);
                }
                let reference = reference_expr(path, &wp.reference, ctx)?;
                let drop = Expr::step(wp.axis, vec![wp.lower, wp.upper], vec![wp.delta, 0.0, wp.delta]);
                Ok(reference - drop)
            }
            Family::RandomSteps(r) => {
                check_axis(path, r.axis, dim)?;
                if r.pieces == 0 || !(r.low <= r.high) || !r.low.is_finite() || !r.high.is_finite() {
                    return Err(vec![Issue::new(format!("{path}.params"), "needs pieces > 0 and finite low ≤ high")]);
                }
                let (lo, hi) = ctx.domain.bounding_box();
                let (a, b) = (lo[r.axis], hi[r.axis]);
                let breaks: Vec<f64> = (1..r.pieces).map(|i| a + (b - a) * i as f64 / r.pieces as f64).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(salt));
                let values = (0..r.pieces).map(|_| if r.low < r.high { rng.gen_range(r.low..r.high) } else { r.low }).collect();
                Ok(Expr::step(r.axis, breaks, values))
            }
        },
    }
}

/// Reads `x₁,…,x_N,value` rows; a header row is skipped when it does not parse.
pub fn read_grid(path: &Path, dim: usize) -> Result<SampleTable, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format!("{}: {e}", path.display()))?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if i == 0 => continue,
            Err(e) => return Err(format!("{}: row {}: {e}", path.display(), i + 1)),
        };
        if values.len() != dim + 1 {
            return Err(format!("{}: row {} has {} columns, expected {}", path.display(), i + 1, values.len(), dim + 1));
        }
        let value = values[dim];
        rows.push((values[..dim].to_vec(), value));
    }
    SampleTable::new(rows).ok_or_else(|| format!("{} has no samples", path.display()))
}
