//! Task execution: one prepared scenario in, a list of artifacts out.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use serde::Serialize;
use vexspace_core::cantor::{verify_asymptotics, AsymptoticsReport};
use vexspace_core::certifier::{build_witness, certify_almost_compact, Certificate, CriterionReport, WitnessBundle};
use vexspace_core::exponent::ExponentBounds;
use vexspace_core::modular::{luxemburg_norm, modular, NormValue};
use vexspace_core::rearrangement::{check_exp_commutes, equimeasurable_integral, rearrange, EquimeasurableIntegral, StepComparison};
use vexspace_core::sobolev::{build_bump_sequence, certify_compact, BumpWitness, CompactnessCertificate};
use vexspace_core::{Domain, ExponentField, GridFunction, Partition, Verdict};

use crate::output::{to_json, Cell, Table};
use crate::scenario::{Prepared, Task, WitnessSpec};

/// A file to be written under the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub name: String,
    pub task: Task,
    pub verdict: Option<Verdict>,
    pub summary: String,
    pub artifacts: Vec<Artifact>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    scenario: &'a str,
    task: Task,
    seed: u64,
    domain: &'a Domain,
    verdict: Option<Verdict>,
    result: T,
}

#[derive(Serialize)]
struct NormReport {
    cells: usize,
    norm: NormValue,
    /// `m_p(u/‖u‖)`, which should be 1 for nonzero `u`.
    modular_at_norm: f64,
    modular: f64,
    p_bounds: ExponentBounds,
    /// `(∫|u|^p)^{1/p}` when `p` is constant.
    classical_norm: Option<f64>,
}

#[derive(Serialize)]
struct AlphaCheck {
    alpha: f64,
    commutes: StepComparison,
    equimeasurable: EquimeasurableIntegral,
    relative_gap: f64,
}

#[derive(Serialize)]
struct RearrangeReport {
    cells: usize,
    pieces: usize,
    total_measure: f64,
    checks: Vec<AlphaCheck>,
}

#[derive(Serialize)]
#[serde(untagged)]
enum WitnessResult {
    LevelSets(WitnessBundle),
    Bump(BumpWitness),
}

struct Builder<'a> {
    prepared: &'a Prepared,
    artifacts: Vec<Artifact>,
}

impl Builder<'_> {
    fn json<T: Serialize>(&mut self, verdict: Option<Verdict>, result: T) -> Result<()> {
        let p = self.prepared;
        let envelope = Envelope { scenario: &p.name, task: p.task, seed: p.seed, domain: &p.domain, verdict, result };
        let bytes = to_json(&envelope).context("encoding certificate")?;
        self.artifacts.push(Artifact { path: PathBuf::from(format!("{}.certificate.json", p.prefix)), bytes });
        Ok(())
    }

    fn csv(&mut self, label: &str, table: Table) -> Result<()> {
        if !self.prepared.csv || table.is_empty() {
            return Ok(());
        }
        let bytes = table.to_csv().with_context(|| format!("encoding {label} table"))?;
        self.artifacts.push(Artifact { path: PathBuf::from(format!("{}.{label}.csv", self.prepared.prefix)), bytes });
        Ok(())
    }
}

fn field<'a>(f: &'a Option<ExponentField>, name: &str) -> Result<&'a ExponentField> {
    f.as_ref().with_context(|| format!("field {name} is missing"))
}

fn sample_grid(prepared: &Prepared, exprs: &[&ExponentField]) -> Result<Arc<Partition>> {
    let exprs: Vec<_> = exprs.iter().map(|f| f.expr()).collect();
    let res = prepared.config.resolution(prepared.domain.dim());
    Ok(Arc::new(Partition::adapted(&prepared.domain, &exprs, res)?))
}

fn cell_table(u: &GridFunction, p: Option<&GridFunction>) -> Table {
    let dim = u.partition().domain().dim();
    let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    header.extend(["measure".to_string(), "u".to_string()]);
    if p.is_some() {
        header.push("p".into());
    }
    let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new(&header_ref);
    for (i, cell) in u.partition().cells().iter().enumerate() {
        let mut row: Vec<Cell> = cell.center.iter().map(|&x| Cell::F(x)).collect();
        row.push(Cell::F(cell.measure));
        row.push(Cell::F(u.values()[i]));
        if let Some(p) = p {
            row.push(Cell::F(p.values()[i]));
        }
        t.push(&row);
    }
    t
}

fn criterion_table(c: &CriterionReport) -> Table {
    let mut t = Table::new(&["alpha", "step", "cells", "space_side", "rearranged_side", "log_value", "relative_gap"]);
    for traj in &c.trajectories {
        for (i, s) in traj.steps.iter().enumerate() {
            t.push(&[
                Cell::F(traj.alpha),
                Cell::U(i),
                Cell::U(s.cells),
                Cell::F(s.space_side.0),
                Cell::F(s.rearranged_side.0),
                Cell::F(s.log_value),
                Cell::F(s.relative_gap),
            ]);
        }
    }
    t
}

fn witness_table(w: &WitnessBundle) -> Table {
    let mut t = Table::new(&["n", "available", "cells", "set_measure", "chi_norm", "u_norm", "q_modular", "pass"]);
    for e in &w.entries {
        t.push(&[
            Cell::U(e.n),
            Cell::B(e.available),
            Cell::U(e.cells),
            Cell::F(e.set_measure),
            Cell::F(e.chi_norm.0),
            Cell::F(e.u_norm),
            Cell::F(e.q_modular),
            Cell::B(e.pass),
        ]);
    }
    t
}

fn bump_tables(b: &BumpWitness) -> (Table, Table) {
    let mut rows = Table::new(&["n", "eps", "p_minus", "p_plus", "modular_u", "modular_grad", "pairwise_min_separation"]);
    for r in &b.rows {
        rows.push(&[
            Cell::U(r.n),
            Cell::F(r.eps),
            Cell::F(r.p_minus),
            Cell::F(r.p_plus),
            Cell::F(r.modular_u),
            Cell::F(r.modular_grad),
            Cell::F(r.pairwise_min_separation),
        ]);
    }
    let mut pairs = Table::new(&["m", "n", "separation_modular", "k_bound", "k_quadrature", "norm"]);
    for p in &b.pairs {
        pairs.push(&[
            Cell::U(p.m),
            Cell::U(p.n),
            Cell::F(p.separation_modular),
            Cell::F(p.k_bound),
            Cell::F(p.k_quadrature),
            Cell::F(p.norm),
        ]);
    }
    (rows, pairs)
}

fn asymptotics_table(r: &AsymptoticsReport) -> Table {
    let mut t = Table::new(&["t", "lower", "upper", "envelope_lower", "envelope_upper", "within"]);
    for row in &r.rows {
        t.push(&[
            Cell::F(row.t),
            Cell::F(row.lower),
            Cell::F(row.upper),
            Cell::F(row.envelope_lower),
            Cell::F(row.envelope_upper),
            Cell::B(row.within),
        ]);
    }
    t
}

fn emit_certificate_tables(b: &mut Builder, c: &Certificate) -> Result<()> {
    if let Some(cr) = &c.criterion {
        b.csv("criterion", criterion_table(cr))?;
    }
    if let Some(w) = &c.witness {
        b.csv("witness", witness_table(w))?;
    }
    if let Some(preset) = &c.preset {
        let mut t = Table::new(&["alpha", "omega0", "y_star", "finite_part", "bound", "tail_monotone", "certified"]);
        for tail in &preset.tails {
            t.push(&[
                Cell::F(tail.alpha),
                Cell::F(tail.omega0),
                Cell::F(tail.y_star.0),
                Cell::F(tail.finite_part),
                Cell::F(tail.bound.0),
                Cell::B(tail.tail_monotone),
                Cell::B(tail.certified),
            ]);
        }
        b.csv("tails", t)?;
    }
    Ok(())
}

fn verdict_name(v: Verdict) -> String {
    serde_json::to_value(v).ok().and_then(|s| s.as_str().map(str::to_owned)).unwrap_or_default()
}

/// Runs one scenario; nothing is written here.
pub fn execute(prepared: &Prepared) -> Result<Outcome> {
    let mut b = Builder { prepared, artifacts: Vec::new() };
    let config = &prepared.config;
    let (verdict, summary) = match prepared.task {
        Task::Norm => {
            let p = field(&prepared.p, "p")?;
            let u_field = field(&prepared.u, "u")?;
            let partition = sample_grid(prepared, &[p, u_field])?;
            let u = u_field.sample(&partition);
            let pv = p.sample(&partition);
            let norm = luxemburg_norm(&u, p)?;
            let m = modular(&u, p)?;
            let modular_at_norm = if norm.value > 0.0 { modular(&u.scale(1.0 / norm.value), p)?.value } else { 0.0 };
            let classical_norm = p.expr().as_const().map(|c| u.integrate(|v| v.abs().powf(c)).powf(1.0 / c));
            let report = NormReport {
                cells: partition.len(),
                norm,
                modular_at_norm,
                modular: m.value,
                p_bounds: p.bounds_on(&partition),
                classical_norm,
            };
            let summary = format!("norm = {}", norm.value);
            b.json(None, report)?;
            b.csv("cells", cell_table(&u, Some(&pv)))?;
            (None, summary)
        }
        Task::Rearrange => {
            let u_field = field(&prepared.u, "u")?;
            let partition = sample_grid(prepared, &[u_field])?;
            let u = u_field.sample(&partition);
            let r = rearrange(&u);
            let mut checks = Vec::new();
            for &alpha in &config.a_list {
                let equimeasurable = equimeasurable_integral(&u, alpha)?;
                checks.push(AlphaCheck {
                    alpha,
                    commutes: check_exp_commutes(&u, alpha)?,
                    relative_gap: equimeasurable.relative_gap(),
                    equimeasurable,
                });
            }
            let ok = checks.iter().all(|c| c.commutes.pass && c.relative_gap <= config.equimeasurable_tol);
            let report = RearrangeReport { cells: partition.len(), pieces: r.values().len(), total_measure: r.total_measure(), checks };
            b.json(None, report)?;
            let mut t = Table::new(&["t_start", "t_end", "value"]);
            let bp = r.breakpoints();
            for (i, v) in r.values().iter().enumerate() {
                t.push(&[Cell::F(bp[i]), Cell::F(bp[i + 1]), Cell::F(*v)]);
            }
            b.csv("rearrangement", t)?;
            (None, format!("{} pieces, identities {}", r.values().len(), if ok { "hold" } else { "FAIL" }))
        }
        Task::Cantor => {
            let gaps = prepared.gaps.as_ref().context("cantor section is missing")?;
            let spec = prepared.cantor.as_ref().context("cantor section is missing")?;
            let top = spec.k_range[1].min(gaps.max_stage());
            let t_grid: Vec<f64> = (spec.k_range[0]..=top).map(|k| gaps.eps(k)).collect();
            let report = verify_asymptotics(gaps, &t_grid, spec.band_limit)?;
            let summary = format!(
                "exponent {:.5}, slope {:.5}, band [{:.4}, {:.4}], {}",
                report.exponent,
                report.loglog_slope,
                report.c1,
                report.c2,
                if report.pass { "pass" } else { "FAIL" }
            );
            b.csv("asymptotics", asymptotics_table(&report))?;
            b.json(None, report)?;
            (None, summary)
        }
        Task::CertifyAe => {
            let p = field(&prepared.p, "p")?;
            let q = field(&prepared.q, "q")?;
            let c = certify_almost_compact(p, q, prepared.singular.as_ref(), prepared.weight.as_ref(), config)?;
            emit_certificate_tables(&mut b, &c)?;
            let v = c.verdict;
            b.json(Some(v), c)?;
            (Some(v), verdict_name(v))
        }
        Task::CertifyCompact => {
            let p = field(&prepared.p, "p")?;
            let q = field(&prepared.q, "q")?;
            let c: CompactnessCertificate =
                certify_compact(p, q, prepared.singular.as_ref(), prepared.weight.as_ref(), config)?;
            if let Some(ac) = &c.almost_compact {
                emit_certificate_tables(&mut b, ac)?;
            }
            if let Some(bump) = &c.bump {
                let (rows, pairs) = bump_tables(bump);
                b.csv("bump", rows)?;
                b.csv("bump_pairs", pairs)?;
            }
            let v = c.verdict;
            b.json(Some(v), c)?;
            (Some(v), verdict_name(v))
        }
        Task::Witness => {
            let p = field(&prepared.p, "p")?;
            let q = field(&prepared.q, "q")?;
            match &prepared.witness {
                WitnessSpec::LevelSets { n } => {
                    let n_list = n.clone().unwrap_or_else(|| config.witness_n.clone());
                    let w = build_witness(p, q, &n_list, config)?;
                    b.csv("witness", witness_table(&w))?;
                    let summary = format!("level-set witness {}", if w.pass { "passes" } else { "fails" });
                    b.json(None, WitnessResult::LevelSets(w))?;
                    (None, summary)
                }
                WitnessSpec::Bump { center, eps0, count } => {
                    let w = build_bump_sequence(p, q, center, *eps0, *count)?;
                    let (rows, pairs) = bump_tables(&w);
                    b.csv("bump", rows)?;
                    b.csv("bump_pairs", pairs)?;
                    let summary = format!("bump witness: min separation norm {:.6}", w.norm_min);
                    b.json(None, WitnessResult::Bump(w))?;
                    (None, summary)
                }
            }
        }
    };
    Ok(Outcome { name: prepared.name.clone(), task: prepared.task, verdict, summary, artifacts: b.artifacts })
}
