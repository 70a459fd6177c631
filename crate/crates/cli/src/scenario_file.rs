//! TOML scenario documents.
//!
//! ```toml
//! version = 1
//! n = 2
//! m = 3
//! theta_bar = [1.0, -0.5]
//! sigma_theta = [[6.0, 1.0], [1.0, 4.0]]
//! edges = ["1 -> 2", "2 -> 3", "3 -> 1"]
//!
//! [[agents]]
//! H = [[1.0, 0.0]]
//! R = [[1.0]]
//! # ... one [[agents]] table per agent
//!
//! [defaults]
//! use_prior = true
//! mode = "exact-grid"
//! ```
//!
//! Agents are numbered from 1 in the file. Matrices are row-major lists of rows.

use std::fmt;
use std::ops::Range;
use std::path::Path;

use ciest_core::{AgentModel, CovarianceMode, DirectedGraph, Initialization, Matrix, Scenario, Vector};
use serde::Deserialize;
use toml::Spanned;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub version: Spanned<u32>,
    pub n: Spanned<usize>,
    pub m: Spanned<usize>,
    pub theta_bar: Spanned<Vec<f64>>,
    pub sigma_theta: Spanned<Vec<Vec<f64>>>,
    #[serde(default)]
    pub edges: Vec<Spanned<String>>,
    pub agents: Spanned<Vec<Spanned<AgentDocument>>>,
    #[serde(default)]
    pub defaults: Option<DefaultsDocument>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentDocument {
    #[serde(rename = "H")]
    pub h: Spanned<Vec<Vec<f64>>>,
    #[serde(rename = "R")]
    pub r: Spanned<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefaultsDocument {
    pub use_prior: Option<bool>,
    pub mode: Option<Spanned<String>>,
}

/// Run settings a scenario file may carry; command-line flags override them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Defaults {
    pub init: Initialization,
    pub mode: CovarianceMode,
}

#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub defaults: Defaults,
}

/// One problem in a scenario file, addressed by field path and, where known, line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldIssue {
    pub field: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for FieldIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}, {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{}", join_issues(.0))]
    Invalid(Vec<FieldIssue>),
}

impl ScenarioFileError {
    pub fn issues(&self) -> &[FieldIssue] {
        match self {
            Self::Invalid(issues) => issues,
            _ => &[],
        }
    }
}

fn join_issues(issues: &[FieldIssue]) -> String {
    issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

/// Byte offset to one-based line number.
fn line_of(text: &str, span: Range<usize>) -> usize {
    text.as_bytes()[..span.start.min(text.len())].iter().filter(|&&b| b == b'\n').count() + 1
}

/// Parses `"from -> to"` with one-based agent ids.
pub fn parse_edge(text: &str, agents: usize) -> Result<(usize, usize), String> {
    let (from, to) = text
        .split_once("->")
        .ok_or_else(|| format!("expected \"from -> to\", found {text:?}"))?;
    let id = |s: &str| -> Result<usize, String> {
        let id: usize = s.trim().parse().map_err(|_| format!("{:?} is not an agent id", s.trim()))?;
        if id == 0 || id > agents {
            return Err(format!("agent id {id} outside 1..={agents}"));
        }
        Ok(id - 1)
    };
    let (from, to) = (id(from)?, id(to)?);
    if from == to {
        return Err(format!("self-loop at agent {}", from + 1));
    }
    Ok((from, to))
}

struct Issues<'a> {
    text: &'a str,
    list: Vec<FieldIssue>,
}

impl Issues<'_> {
    fn push(&mut self, field: impl Into<String>, span: Option<Range<usize>>, message: impl Into<String>) {
        self.list.push(FieldIssue {
            field: field.into(),
            line: span.map(|s| line_of(self.text, s)),
            message: message.into(),
        });
    }
}

/// Checks that `rows` is a `r × c` matrix and builds it.
fn matrix(
    issues: &mut Issues<'_>,
    field: &str,
    rows: &Spanned<Vec<Vec<f64>>>,
    shape: (Option<usize>, usize),
) -> Option<Matrix> {
    let data = rows.get_ref();
    let cols = shape.1;
    if let Some(r) = shape.0 {
        if data.len() != r {
            issues.push(field, Some(rows.span()), format!("expected {r} rows, found {}", data.len()));
            return None;
        }
    }
    if data.is_empty() {
        issues.push(field, Some(rows.span()), "matrix has no rows");
        return None;
    }
    for (idx, row) in data.iter().enumerate() {
        if row.len() != cols {
            issues.push(
                format!("{field}[{idx}]"),
                Some(rows.span()),
                format!("expected {cols} columns, found {}", row.len()),
            );
            return None;
        }
    }
    if data.iter().flatten().any(|v| !v.is_finite()) {
        issues.push(field, Some(rows.span()), "entries must be finite");
        return None;
    }
    Some(Matrix::from_row_iterator(data.len(), cols, data.iter().flatten().copied()))
}

impl ScenarioDocument {
    pub fn parse(text: &str) -> Result<Self, ScenarioFileError> {
        toml::from_str(text).map_err(|e| ScenarioFileError::Syntax {
            line: e.span().map_or(1, |s| line_of(text, s)),
            message: e.message().trim().to_string(),
        })
    }

    /// Validates the document against `text`, the source it was parsed from
    /// (used for line numbers).
    pub fn into_scenario(self, text: &str) -> Result<LoadedScenario, ScenarioFileError> {
        let mut issues = Issues { text, list: Vec::new() };
        if *self.version.get_ref() != SCHEMA_VERSION {
            issues.push(
                "version",
                Some(self.version.span()),
                format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.version.get_ref()),
            );
        }
        let n = *self.n.get_ref();
        let m = *self.m.get_ref();
        if n == 0 {
            issues.push("n", Some(self.n.span()), "parameter dimension must be positive");
        }
        if m == 0 {
            issues.push("m", Some(self.m.span()), "at least one agent is required");
        }
        if self.theta_bar.get_ref().len() != n {
            issues.push(
                "theta_bar",
                Some(self.theta_bar.span()),
                format!("expected {n} entries, found {}", self.theta_bar.get_ref().len()),
            );
        }
        let theta_bar = Vector::from_vec(self.theta_bar.get_ref().clone());
        let sigma_theta = matrix(&mut issues, "sigma_theta", &self.sigma_theta, (Some(n), n));
        let agent_docs = self.agents.get_ref();
        if agent_docs.len() != m {
            issues.push(
                "agents",
                Some(self.agents.span()),
                format!("m = {m} but {} agents are listed", agent_docs.len()),
            );
        }
        let agents: Vec<Option<AgentModel>> = agent_docs
            .iter()
            .enumerate()
            .map(|(idx, doc)| {
                let doc = doc.get_ref();
                let h = matrix(&mut issues, &format!("agents[{idx}].H"), &doc.h, (None, n))?;
                let p = h.nrows();
                let r = matrix(&mut issues, &format!("agents[{idx}].R"), &doc.r, (Some(p), p))?;
                Some(AgentModel::new(h, r))
            })
            .collect();
        let mut edges = Vec::new();
        for (idx, edge) in self.edges.iter().enumerate() {
            match parse_edge(edge.get_ref(), m) {
                Ok(pair) if edges.contains(&pair) => {
                    issues.push(format!("edges[{idx}]"), Some(edge.span()), "duplicate edge")
                }
                Ok(pair) => edges.push(pair),
                Err(message) => issues.push(format!("edges[{idx}]"), Some(edge.span()), message),
            }
        }
        let mut defaults = Defaults::default();
        if let Some(doc) = &self.defaults {
            if let Some(use_prior) = doc.use_prior {
                defaults.init = Initialization::from_use_prior(use_prior);
            }
            if let Some(mode) = &doc.mode {
                match mode.get_ref().parse() {
                    Ok(mode) => defaults.mode = mode,
                    Err(_) => issues.push(
                        "defaults.mode",
                        Some(mode.span()),
                        format!("unknown mode {:?}, expected exact-grid or paper-sparse", mode.get_ref()),
                    ),
                }
            }
        }
        if !issues.list.is_empty() {
            return Err(ScenarioFileError::Invalid(issues.list));
        }
        let graph = DirectedGraph::new(m, edges).expect("edges validated");
        let agents = agents.into_iter().map(|a| a.expect("agents validated")).collect();
        let sigma_theta = sigma_theta.expect("sigma_theta validated");
        match Scenario::new(theta_bar, sigma_theta, graph, agents) {
            Ok(scenario) => Ok(LoadedScenario { scenario, defaults }),
            Err(errors) => {
                for issue in errors.issues() {
                    let span = self.span_of(&issue.field);
                    issues.push(issue.field.clone(), span, issue.message.clone());
                }
                Err(ScenarioFileError::Invalid(issues.list))
            }
        }
    }

    /// Source span of a validation field path such as `agents[1].R`.
    fn span_of(&self, field: &str) -> Option<Range<usize>> {
        match field {
            "n" => return Some(self.n.span()),
            "theta_bar" => return Some(self.theta_bar.span()),
            "sigma_theta" => return Some(self.sigma_theta.span()),
            "agents" | "edges" => return Some(self.agents.span()),
            _ => {}
        }
        let rest = field.strip_prefix("agents[")?;
        let (idx, member) = rest.split_once("].")?;
        let agent = self.agents.get_ref().get(idx.parse::<usize>().ok()?)?.get_ref();
        match member {
            "H" => Some(agent.h.span()),
            "R" => Some(agent.r.span()),
            _ => None,
        }
    }
}

pub fn parse_scenario(text: &str) -> Result<LoadedScenario, ScenarioFileError> {
    ScenarioDocument::parse(text)?.into_scenario(text)
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, ScenarioFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}
