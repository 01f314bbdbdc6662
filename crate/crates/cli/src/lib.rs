//! Batch front-end for the variable-exponent toolkit: scenario files in,
//! JSON certificates and CSV tables out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod output;
pub mod run;
pub mod scenario;

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::run::{execute, Outcome};
use crate::scenario::{Issue, Overrides, Prepared, Scenario};

/// Scenarios shipped with the binary, run by `--all`.
pub const BUNDLED: &[(&str, &str)] = &[
    ("classical-cantor-asymptotics", include_str!("../scenarios/classical-cantor-asymptotics.json")),
    ("zeta-cantor-asymptotics", include_str!("../scenarios/zeta-cantor-asymptotics.json")),
    ("loglog-cantor-asymptotics", include_str!("../scenarios/loglog-cantor-asymptotics.json")),
    ("split-exponent-norm", include_str!("../scenarios/split-exponent-norm.json")),
    ("random-step-rearrangement", include_str!("../scenarios/random-step-rearrangement.json")),
    ("uniform-gap-interval", include_str!("../scenarios/uniform-gap-interval.json")),
    ("sqrt-log-point", include_str!("../scenarios/sqrt-log-point.json")),
    ("coincidence-window", include_str!("../scenarios/coincidence-window.json")),
    ("kr-uniform-gap", include_str!("../scenarios/kr-uniform-gap.json")),
    ("critical-bumps", include_str!("../scenarios/critical-bumps.json")),
    ("cantor-strip-compact", include_str!("../scenarios/cantor-strip-compact.json")),
];

/// Directory that relative grid files in bundled scenarios resolve against.
pub fn bundled_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

/// Input problems; the process exits nonzero without running anything.
#[derive(Debug)]
pub enum InputError {
    Io { file: String, message: String },
    Syntax { file: String, line: usize, column: usize, message: String, excerpt: String },
    Schema { file: String, issues: Vec<LocatedIssue> },
    Threads(String),
}

#[derive(Debug, Clone)]
pub struct LocatedIssue {
    pub scenario: String,
    pub line: Option<usize>,
    pub excerpt: String,
    pub issue: Issue,
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputError::Io { file, message } => write!(f, "{file}: {message}"),
            InputError::Syntax { file, line, column, message, excerpt } => {
                writeln!(f, "{file}:{line}:{column}: {message}")?;
                writeln!(f, "{line:>5} | {excerpt}")?;
                write!(f, "      | {}^", " ".repeat(column.saturating_sub(1)))
            }
            InputError::Schema { file, issues } => {
                write!(f, "{file}: {} schema violation(s)", issues.len())?;
                for i in issues {
                    match i.line {
                        Some(line) => {
                            write!(f, "\n  {file}:{line}: [{}] {}: {}", i.scenario, i.issue.path, i.issue.message)?;
                            write!(f, "\n  {line:>5} | {}", i.excerpt)?;
                        }
                        None => write!(f, "\n  {file}: [{}] {}: {}", i.scenario, i.issue.path, i.issue.message)?,
                    }
                }
                Ok(())
            }
            InputError::Threads(m) => write!(f, "VEXSPACE_THREADS: {m}"),
        }
    }
}

impl std::error::Error for InputError {}

fn line_text(text: &str, line: usize) -> String {
    text.lines().nth(line.saturating_sub(1)).unwrap_or("").trim_end().to_string()
}

/// Parses a scenario file holding one scenario object or an array of them.
pub fn parse_scenarios(text: &str, file: &str) -> Result<Vec<Scenario>, InputError> {
    let array = text.trim_start().starts_with('[');
    let parsed = if array {
        serde_json::from_str::<Vec<Scenario>>(text)
    } else {
        serde_json::from_str::<Scenario>(text).map(|s| vec![s])
    };
    parsed.map_err(|e| InputError::Syntax {
        file: file.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string().split(" at line ").next().unwrap_or_default().to_string(),
        excerpt: line_text(text, e.line()),
    })
}

/// Line of the field `path` inside the scenario called `name`, by forward key search.
fn locate(text: &str, name: &str, path: &str) -> Option<usize> {
    let anchor = text.find(&format!("\"{name}\"")).unwrap_or(0);
    let start = text[..anchor].rfind('{').unwrap_or(0);
    let mut pos = start;
    let mut found = None;
    for seg in path.split('.') {
        let key = format!("\"{seg}\"");
        match text[pos..].find(&key) {
            Some(off) => {
                pos += off;
                found = Some(pos);
            }
            None => break,
        }
    }
    found.map(|p| text[..p].matches('\n').count() + 1)
}

/// Validates and resolves every scenario, collecting all violations.
pub fn prepare_all(
    scenarios: &[Scenario],
    text: &str,
    file: &str,
    base_dir: &Path,
    overrides: &Overrides,
) -> Result<Vec<Prepared>, InputError> {
    let mut issues = Vec::new();
    let mut prepared = Vec::new();
    let mut prefixes = BTreeSet::new();
    for s in scenarios {
        let mut push = |issue: Issue| {
            let line = locate(text, &s.name, &issue.path);
            let excerpt = line.map(|l| line_text(text, l).trim().to_string()).unwrap_or_default();
            issues.push(LocatedIssue { scenario: s.name.clone(), line, excerpt, issue });
        };
        match s.prepare(base_dir, overrides) {
            Ok(p) => {
                if !prefixes.insert(p.prefix.clone()) {
                    push(Issue { path: "outputs.prefix".into(), message: format!("artifact prefix {} is used twice", p.prefix) });
                }
                prepared.push(p);
            }
            Err(errs) => errs.into_iter().for_each(push),
        }
    }
    if issues.is_empty() {
        Ok(prepared)
    } else {
        Err(InputError::Schema { file: file.to_string(), issues })
    }
}

/// Reads, parses and prepares a scenario file.
pub fn load_file(path: &Path, overrides: &Overrides) -> Result<Vec<Prepared>, InputError> {
    let file = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| InputError::Io { file: file.clone(), message: e.to_string() })?;
    let scenarios = parse_scenarios(&text, &file)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    prepare_all(&scenarios, &text, &file, &base, overrides)
}

/// Parses and prepares the bundled suite.
pub fn load_bundled(overrides: &Overrides) -> Result<Vec<Prepared>, InputError> {
    let mut all = Vec::new();
    for (name, text) in BUNDLED {
        let file = format!("<bundled>/{name}.json");
        let scenarios = parse_scenarios(text, &file)?;
        all.extend(prepare_all(&scenarios, text, &file, &bundled_dir(), overrides)?);
    }
    Ok(all)
}

/// `VEXSPACE_THREADS`, when set.
pub fn thread_cap() -> Result<Option<usize>, InputError> {
    match std::env::var("VEXSPACE_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(InputError::Threads(format!("expected a positive integer, got {v:?}"))),
        },
    }
}

/// Runs the scenarios concurrently, up to `threads` at a time; results keep input order.
pub fn run_all(prepared: &[Prepared], threads: Option<usize>) -> anyhow::Result<Vec<anyhow::Result<Outcome>>> {
    let work = || prepared.par_iter().map(execute).collect::<Vec<_>>();
    match threads {
        Some(n) => Ok(rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(work)),
        None => Ok(work()),
    }
}

/// Writes each artifact to its own file under `out_dir`.
pub fn write_artifacts(out_dir: &Path, outcome: &Outcome) -> std::io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for a in &outcome.artifacts {
        let path = out_dir.join(&a.path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, &a.bytes)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_validate() {
        let all = load_bundled(&Overrides::default()).unwrap();
        assert_eq!(all.len(), BUNDLED.len());
        for (p, (name, _)) in all.iter().zip(BUNDLED) {
            assert_eq!(&p.name, name);
        }
    }

    #[test]
    fn empty_list_parses() {
        assert!(parse_scenarios("  []\n", "x.json").unwrap().is_empty());
    }

    #[test]
    fn syntax_errors_carry_line_context() {
        let text = "{\n  \"name\": \"a\",\n  \"task\": \"nope\"\n}\n";
        let err = parse_scenarios(text, "s.json").unwrap_err();
        let InputError::Syntax { line, excerpt, .. } = &err else { panic!("{err}") };
        assert_eq!(*line, 3);
        assert!(excerpt.contains("nope"));
        assert!(err.to_string().starts_with("s.json:3:"));
    }

    #[test]
    fn unknown_family_is_a_schema_error() {
        let text = r#"{
  "name": "bad",
  "task": "certify-ae",
  "domain": {"kind": "interval", "lower": 0, "upper": 1},
  "p": {"kind": "constant", "value": 2},
  "q": {"kind": "family", "name": "no-such-family", "params": {}}
}"#;
        let err = parse_scenarios(text, "s.json").unwrap_err();
        assert!(err.to_string().contains("no-such-family"), "{err}");
    }

    #[test]
    fn semantic_issues_are_all_listed() {
        let text = r#"{
  "name": "bad",
  "task": "certify-ae",
  "domain": {"kind": "interval", "lower": 0, "upper": 1},
  "p": {"kind": "family", "name": "uniform-gap", "params": {"delta": 0.5}},
  "q": {"kind": "family", "name": "sqrt-log-gap", "params": {}},
  "config": {"identity_tol": -1.0}
}"#;
        let scenarios = parse_scenarios(text, "s.json").unwrap();
        let err = prepare_all(&scenarios, text, "s.json", Path::new("."), &Overrides::default()).unwrap_err();
        let InputError::Schema { issues, .. } = &err else { panic!("{err}") };
        let paths: Vec<&str> = issues.iter().map(|i| i.issue.path.as_str()).collect();
        assert!(paths.contains(&"config"), "{paths:?}");
        assert!(paths.contains(&"p.params.reference"), "{paths:?}");
        assert!(paths.contains(&"q.params"), "{paths:?}");
        let config = issues.iter().find(|i| i.issue.path == "config").unwrap();
        assert_eq!(config.line, Some(7));
    }

    #[test]
    fn overrides_reach_the_config() {
        let text = BUNDLED[5].1;
        let scenarios = parse_scenarios(text, "x").unwrap();
        let o = Overrides { grid_levels: Some(3), a_list: Some(vec![3.0]), tol: Some(1e-9), seed: Some(7) };
        let p = prepare_all(&scenarios, text, "x", Path::new("."), &o).unwrap();
        assert_eq!(p[0].config.grid_levels, Some(3));
        assert_eq!(p[0].config.a_list, vec![3.0]);
        assert_eq!(p[0].config.equimeasurable_tol, 1e-9);
        assert_eq!(p[0].seed, 7);
        let bad = Overrides { tol: Some(0.0), ..Overrides::default() };
        assert!(prepare_all(&scenarios, text, "x", Path::new("."), &bad).is_err());
    }
}
