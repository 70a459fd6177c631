//! Subcommands of the `ciest` binary.
//!
//! Exit codes: 0 success, 1 input or I/O error, 2 `check-obs` found an agent
//! that is not distributedly observable.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use ciest_core::observability::ObservabilityAnalysis;
use ciest_core::{CovarianceMode, DistributedConfig, Initialization, RankTolerance};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::harness::{compare_modes, run_monte_carlo, HarnessOptions};
use crate::results::{CompareTable, ResultsTable};
use crate::scenario_file::{load_scenario, LoadedScenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_UNOBSERVABLE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ciest", version, about = "Distributed consensus+innovations estimation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report centralized and per-agent distributed observability.
    CheckObs {
        scenario: PathBuf,
    },
    /// Run a Monte Carlo experiment and write per-iteration statistics as CSV.
    Run(RunArgs),
    /// Run exact-grid and paper-sparse bookkeeping on the same realizations.
    Compare(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Prior,
    Uninformed,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub scenario: PathBuf,
    /// Iterations K.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub horizon: u64,
    /// Monte Carlo trials T.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Covariance bookkeeping; overrides the scenario default. Ignored by `compare`.
    #[arg(long)]
    pub mode: Option<CovarianceMode>,
    /// Initialization; overrides the scenario's `use_prior`.
    #[arg(long, value_enum)]
    pub init: Option<InitArg>,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Print nothing but the CSV.
    #[arg(long)]
    pub quiet: bool,
}

impl RunArgs {
    fn options(&self, loaded: &LoadedScenario) -> HarnessOptions {
        let init = match self.init {
            Some(InitArg::Prior) => Initialization::Prior,
            Some(InitArg::Uninformed) => Initialization::Uninformed,
            None => loaded.defaults.init,
        };
        HarnessOptions {
            init,
            distributed: DistributedConfig::with_mode(self.mode.unwrap_or(loaded.defaults.mode)),
            ..HarnessOptions::default()
        }
    }
}

/// Runs a parsed command line, writing reports to `stdout` and diagnostics to
/// `stderr`, and returns the process exit code.
pub fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let outcome = match cli.command {
        Command::CheckObs { scenario } => check_obs(&scenario, stdout),
        Command::Run(args) => cmd_run(&args, stdout).map(|()| EXIT_OK),
        Command::Compare(args) => cmd_compare(&args, stdout).map(|()| EXIT_OK),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            let _ = writeln!(stderr, "error: {err:#}");
            EXIT_INPUT
        }
    }
}

fn with_threads<T>(threads: Option<usize>, f: impl FnOnce() -> anyhow::Result<T> + Send) -> anyhow::Result<T>
where
    T: Send,
{
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("cannot build thread pool")?
            .install(f),
    }
}

pub fn check_obs(path: &Path, out: &mut dyn Write) -> anyhow::Result<i32> {
    let loaded = load_scenario(path)?;
    let s = &loaded.scenario;
    let analysis = ObservabilityAnalysis::new(s, RankTolerance::default())?;
    let edges = s.graph().edge_count();
    let plural = if edges == 1 { "" } else { "s" };
    writeln!(out, "scenario: n={}, m={}, {edges} edge{plural}", s.dim(), s.agent_count())?;
    let positive = analysis.connectivity.is_positive();
    writeln!(
        out,
        "connectivity matrix: {}",
        if positive { "positive (strongly connected)" } else { "not positive" }
    )?;
    let c = &analysis.centralized;
    writeln!(
        out,
        "centralized: rank {}/{} {}",
        c.grammian_rank,
        c.required_rank,
        if c.observable { "observable" } else { "NOT observable" }
    )?;
    for (i, r) in analysis.per_agent.iter().enumerate() {
        let margin = r
            .smallest_nonzero_singular_value()
            .map_or(String::new(), |v| format!(", smallest singular value {v:.3e}"));
        writeln!(
            out,
            "agent {}: rank {}/{} {}{margin}",
            i + 1,
            r.grammian_rank,
            r.required_rank,
            if r.observable { "observable" } else { "NOT observable" }
        )?;
    }
    let failing: Vec<String> = analysis.unobservable_agents().map(|i| (i + 1).to_string()).collect();
    if failing.is_empty() {
        writeln!(out, "observable at all {} agents", s.agent_count())?;
        Ok(EXIT_OK)
    } else {
        writeln!(out, "unobservable at agents {}", failing.join(", "))?;
        Ok(EXIT_UNOBSERVABLE)
    }
}

fn write_output(path: Option<&Path>, stdout: &mut dyn Write, write: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            let mut w = BufWriter::new(file);
            write(&mut w)?;
            w.flush().with_context(|| format!("cannot write {}", p.display()))?;
        }
        None => write(stdout)?,
    }
    Ok(())
}

pub fn cmd_run(args: &RunArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let loaded = load_scenario(&args.scenario)?;
    let options = args.options(&loaded);
    let summary = with_threads(args.threads, || {
        Ok(run_monte_carlo(
            &loaded.scenario,
            args.horizon as usize,
            args.trials as usize,
            args.seed,
            &options,
        )?)
    })?;
    let table = ResultsTable::from_summary(&summary);
    write_output(args.out.as_deref(), stdout, |w| Ok(table.write(w)?))?;
    if let (Some(out), false) = (&args.out, args.quiet) {
        let last = summary.iterations.last().expect("k = 0 is always present");
        let worst = last.agents.iter().map(|a| a.trace_cov).fold(0.0, f64::max);
        write!(
            stdout,
            "{} trials x {} iterations ({}) -> {}; final max agent trace {:.3e}, centralized {:.3e}",
            summary.trials,
            summary.horizon,
            summary.mode.name(),
            out.display(),
            worst,
            last.central.trace_cov
        )?;
        if let Some(b) = &summary.breakdown {
            write!(stdout, "; stopped early: {b}")?;
        }
        writeln!(stdout)?;
    }
    Ok(())
}

pub fn cmd_compare(args: &RunArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let loaded = load_scenario(&args.scenario)?;
    let options = args.options(&loaded);
    let cmp = with_threads(args.threads, || {
        Ok(compare_modes(
            &loaded.scenario,
            args.horizon as usize,
            args.trials as usize,
            args.seed,
            &options,
        )?)
    })?;
    let table = CompareTable::from_comparison(&cmp);
    write_output(args.out.as_deref(), stdout, |w| Ok(table.write(w)?))?;
    if let (Some(out), false) = (&args.out, args.quiet) {
        let max_div = cmp.gain_divergence.iter().copied().fold(0.0, f64::max);
        write!(
            stdout,
            "{} trials x {} iterations -> {}; max relative gain divergence {:.3e}",
            cmp.exact.trials,
            cmp.exact.horizon,
            out.display(),
            max_div
        )?;
        if let Some(b) = &cmp.sparse.breakdown {
            write!(stdout, "; paper-sparse stopped at k={}: {b}", cmp.sparse.horizon)?;
        }
        writeln!(stdout)?;
    }
    Ok(())
}
