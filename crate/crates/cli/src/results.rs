//! CSV result tables.
//!
//! Each file starts with `# key=value` metadata lines, followed by a fixed
//! header and one row per `(k, entity)`. Floats are written with 17
//! significant digits so a file parses back to the exact values.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::harness::{ExperimentSummary, ModeComparison};

pub const SCHEMA_VERSION: u32 = 1;
pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const RESULTS_HEADER: [&str; 9] = [
    "k",
    "entity",
    "trace_cov",
    "empirical_mse",
    "mse_stderr",
    "consensus_disagreement",
    "spectral_radius",
    "fixup_count",
    "jitter_count",
];

pub const COMPARE_HEADER: [&str; 12] = [
    "k",
    "entity",
    "trace_exact",
    "mse_exact",
    "trace_sparse",
    "mse_sparse",
    "trace_central",
    "mse_central",
    "trace_isolated",
    "mse_isolated",
    "gain_divergence",
    "trace_divergence",
];

#[derive(Debug, thiserror::Error)]
pub enum ResultsError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("unexpected header {found:?}")]
    Header { found: Vec<String> },
    #[error("line {line}, column {column}: {message}")]
    Field { line: u64, column: &'static str, message: String },
    #[error("malformed metadata line {0:?}")]
    Metadata(String),
}

/// Row subject: the fusion center or a one-based agent id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Entity {
    Central,
    Agent(usize),
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Central => f.write_str("central"),
            Self::Agent(id) => write!(f, "{id}"),
        }
    }
}

impl FromStr for Entity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "central" {
            return Ok(Self::Central);
        }
        match s.parse::<usize>() {
            Ok(id) if id >= 1 => Ok(Self::Agent(id)),
            _ => Err(format!("expected \"central\" or an agent id, found {s:?}")),
        }
    }
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub k: usize,
    pub entity: Entity,
    pub trace_cov: f64,
    pub empirical_mse: f64,
    pub mse_stderr: f64,
    pub consensus_disagreement: f64,
    pub spectral_radius: f64,
    pub fixup_count: usize,
    pub jitter_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub k: usize,
    /// Always an agent; the centralized values are repeated on every row.
    pub entity: Entity,
    pub trace_exact: f64,
    pub mse_exact: f64,
    /// NaN past the point where the sparse recursion broke down.
    pub trace_sparse: f64,
    pub mse_sparse: f64,
    pub trace_central: f64,
    pub mse_central: f64,
    pub trace_isolated: f64,
    pub mse_isolated: f64,
    pub gain_divergence: f64,
    pub trace_divergence: f64,
}

/// Ordered `# key=value` lines.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Metadata(pub Vec<(String, String)>);

impl Metadata {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    fn write(&self, out: &mut impl Write) -> std::io::Result<()> {
        for (k, v) in &self.0 {
            writeln!(out, "# {k}={v}")?;
        }
        Ok(())
    }

    fn parse(text: &str) -> Result<Self, ResultsError> {
        let mut meta = Metadata::default();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let (k, v) = line[1..]
                .trim()
                .split_once('=')
                .ok_or_else(|| ResultsError::Metadata(line.to_string()))?;
            meta.push(k, v);
        }
        Ok(meta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub metadata: Metadata,
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    pub fn from_summary(summary: &ExperimentSummary) -> Self {
        let mut metadata = Metadata::default();
        metadata.push("schema_version", SCHEMA_VERSION);
        metadata.push("library_version", LIBRARY_VERSION);
        metadata.push("seed", summary.seed);
        metadata.push("mode", summary.mode.name());
        metadata.push("init", init_name(summary));
        metadata.push("horizon", summary.horizon);
        metadata.push("requested_horizon", summary.requested_horizon);
        metadata.push("trials", summary.trials);
        if let Some(b) = &summary.breakdown {
            metadata.push("breakdown", b);
        }
        let mut rows = Vec::new();
        for it in &summary.iterations {
            let entities = std::iter::once((Entity::Central, &it.central))
                .chain(it.agents.iter().enumerate().map(|(i, a)| (Entity::Agent(i + 1), a)));
            for (entity, s) in entities {
                rows.push(ResultRow {
                    k: it.k,
                    entity,
                    trace_cov: s.trace_cov,
                    empirical_mse: s.empirical_mse,
                    mse_stderr: s.mse_stderr,
                    consensus_disagreement: s.consensus_disagreement,
                    spectral_radius: s.spectral_radius,
                    fixup_count: s.fixup_count,
                    jitter_count: s.jitter_count,
                });
            }
        }
        Self { metadata, rows }
    }

    pub fn write(&self, mut out: impl Write) -> Result<(), ResultsError> {
        self.metadata.write(&mut out)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RESULTS_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.k.to_string(),
                r.entity.to_string(),
                format_float(r.trace_cov),
                format_float(r.empirical_mse),
                format_float(r.mse_stderr),
                format_float(r.consensus_disagreement),
                format_float(r.spectral_radius),
                r.fixup_count.to_string(),
                r.jitter_count.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(input: impl Read) -> Result<Self, ResultsError> {
        let (metadata, records) = read_records(input, &RESULTS_HEADER)?;
        let rows = records
            .iter()
            .map(|rec| {
                let f = Fields { rec, header: &RESULTS_HEADER };
                Ok(ResultRow {
                    k: f.parse(0)?,
                    entity: f.parse(1)?,
                    trace_cov: f.parse(2)?,
                    empirical_mse: f.parse(3)?,
                    mse_stderr: f.parse(4)?,
                    consensus_disagreement: f.parse(5)?,
                    spectral_radius: f.parse(6)?,
                    fixup_count: f.parse(7)?,
                    jitter_count: f.parse(8)?,
                })
            })
            .collect::<Result<_, ResultsError>>()?;
        Ok(Self { metadata, rows })
    }

    /// Rows of one entity in `k` order.
    pub fn series(&self, entity: Entity) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(move |r| r.entity == entity)
    }
}

fn init_name(summary: &ExperimentSummary) -> &'static str {
    match summary.init {
        ciest_core::Initialization::Prior => "prior",
        ciest_core::Initialization::Uninformed => "uninformed",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareTable {
    pub metadata: Metadata,
    pub rows: Vec<CompareRow>,
}

impl CompareTable {
    pub fn from_comparison(cmp: &ModeComparison) -> Self {
        let exact = &cmp.exact;
        let sparse = &cmp.sparse;
        let mut metadata = Metadata::default();
        metadata.push("schema_version", SCHEMA_VERSION);
        metadata.push("library_version", LIBRARY_VERSION);
        metadata.push("seed", exact.seed);
        metadata.push("mode", "exact-grid,paper-sparse");
        metadata.push("init", init_name(exact));
        metadata.push("horizon", exact.horizon);
        metadata.push("requested_horizon", exact.requested_horizon);
        metadata.push("trials", exact.trials);
        if let Some(b) = &exact.breakdown {
            metadata.push("exact_breakdown", b);
        }
        if let Some(b) = &sparse.breakdown {
            metadata.push("sparse_breakdown", b);
            metadata.push("sparse_horizon", sparse.horizon);
        }
        let mut rows = Vec::new();
        for it in &exact.iterations {
            let k = it.k;
            let sp = sparse.iterations.get(k);
            for (i, a) in it.agents.iter().enumerate() {
                let iso = it.isolated.as_ref().map(|v| v[i]);
                rows.push(CompareRow {
                    k,
                    entity: Entity::Agent(i + 1),
                    trace_exact: a.trace_cov,
                    mse_exact: a.empirical_mse,
                    trace_sparse: sp.map_or(f64::NAN, |s| s.agents[i].trace_cov),
                    mse_sparse: sp.map_or(f64::NAN, |s| s.agents[i].empirical_mse),
                    trace_central: it.central.trace_cov,
                    mse_central: it.central.empirical_mse,
                    trace_isolated: iso.map_or(f64::NAN, |v| v.0),
                    mse_isolated: iso.map_or(f64::NAN, |v| v.1),
                    gain_divergence: cmp.gain_divergence.get(k).copied().unwrap_or(f64::NAN),
                    trace_divergence: cmp.trace_divergence.get(k).copied().unwrap_or(f64::NAN),
                });
            }
        }
        Self { metadata, rows }
    }

    pub fn write(&self, mut out: impl Write) -> Result<(), ResultsError> {
        self.metadata.write(&mut out)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(COMPARE_HEADER)?;
        for r in &self.rows {
            let floats = [
                r.trace_exact,
                r.mse_exact,
                r.trace_sparse,
                r.mse_sparse,
                r.trace_central,
                r.mse_central,
                r.trace_isolated,
                r.mse_isolated,
                r.gain_divergence,
                r.trace_divergence,
            ];
            let record: Vec<String> = [r.k.to_string(), r.entity.to_string()]
                .into_iter()
                .chain(floats.into_iter().map(format_float))
                .collect();
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(input: impl Read) -> Result<Self, ResultsError> {
        let (metadata, records) = read_records(input, &COMPARE_HEADER)?;
        let rows = records
            .iter()
            .map(|rec| {
                let f = Fields { rec, header: &COMPARE_HEADER };
                Ok(CompareRow {
                    k: f.parse(0)?,
                    entity: f.parse(1)?,
                    trace_exact: f.parse(2)?,
                    mse_exact: f.parse(3)?,
                    trace_sparse: f.parse(4)?,
                    mse_sparse: f.parse(5)?,
                    trace_central: f.parse(6)?,
                    mse_central: f.parse(7)?,
                    trace_isolated: f.parse(8)?,
                    mse_isolated: f.parse(9)?,
                    gain_divergence: f.parse(10)?,
                    trace_divergence: f.parse(11)?,
                })
            })
            .collect::<Result<_, ResultsError>>()?;
        Ok(Self { metadata, rows })
    }
}

fn read_records(mut input: impl Read, header: &[&str]) -> Result<(Metadata, Vec<csv::StringRecord>), ResultsError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let metadata = Metadata::parse(&text)?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let found = reader.headers()?;
    if found.iter().ne(header.iter().copied()) {
        return Err(ResultsError::Header {
            found: found.iter().map(String::from).collect(),
        });
    }
    let records = reader.records().collect::<Result<_, _>>()?;
    Ok((metadata, records))
}

struct Fields<'a> {
    rec: &'a csv::StringRecord,
    header: &'a [&'static str],
}

impl Fields<'_> {
    fn parse<T: FromStr>(&self, idx: usize) -> Result<T, ResultsError>
    where
        T::Err: fmt::Display,
    {
        let line = self.rec.position().map_or(0, |p| p.line());
        let raw = self.rec.get(idx).ok_or_else(|| ResultsError::Field {
            line,
            column: self.header[idx],
            message: "missing".into(),
        })?;
        raw.parse().map_err(|e: T::Err| ResultsError::Field {
            line,
            column: self.header[idx],
            message: e.to_string(),
        })
    }
}
