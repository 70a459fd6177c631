//! Monte Carlo driver: samples parameters and measurement sequences, steps the
//! centralized and distributed estimators in lockstep on the same realizations,
//! and reduces the trials into per-iteration statistics.

use ciest_core::centralized::centralized_gain;
use ciest_core::distributed::{stack_innovation, CovarianceMode, PartialSchedule};
use ciest_core::linalg::{self, Matrix, Vector};
use ciest_core::{
    DistributedConfig, Error, GainSchedule, Initialization, InnovationGeometry, MeasurementRound, Scenario,
};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

/// Trials per work unit. Fixed so that the reduction order, and therefore
/// every floating-point sum, is independent of the thread count.
const CHUNK_TRIALS: usize = 64;

/// Stream slot of the parameter draw; agent `i` draws its noise from slot `1 + i`.
const THETA_SLOT: u64 = 0;

/// Independent generator for one (trial, slot) pair of a master seed.
pub fn substream(master_seed: u64, trial: u64, slot: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream((trial << 20) | slot);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessOptions {
    pub init: Initialization,
    pub distributed: DistributedConfig,
    /// Iterations at which error moments and innovation means are estimated.
    pub checkpoints: Vec<usize>,
    /// Keep every innovation draw in [`TrialResult`].
    pub retain_innovations: bool,
    /// Also run each agent's filter on its own measurements only.
    pub isolated_baseline: bool,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        Self {
            init: Initialization::Prior,
            distributed: DistributedConfig::default(),
            checkpoints: Vec::new(),
            retain_innovations: false,
            isolated_baseline: false,
        }
    }
}

/// Data-independent quantities shared by every trial.
#[derive(Debug, Clone)]
pub struct Experiment {
    scenario: Scenario,
    geometry: InnovationGeometry,
    schedule: GainSchedule,
    breakdown: Option<Error>,
    horizon: usize,
    central: FilterSchedule,
    isolated: Option<Vec<FilterSchedule>>,
    options: HarnessOptions,
}

/// Gains, `tr P` and `ρ(I − KH)` of a single filter seeing `h`, `r` each round.
#[derive(Debug, Clone)]
struct FilterSchedule {
    gains: Vec<Matrix>,
    traces: Vec<f64>,
    radii: Vec<f64>,
}

fn filter_schedule(p0: &Matrix, h: &Matrix, r: &Matrix, horizon: usize) -> Result<FilterSchedule, Error> {
    let n = p0.nrows();
    let mut p = p0.clone();
    let mut gains = Vec::with_capacity(horizon);
    let mut traces = Vec::with_capacity(horizon + 1);
    let mut radii = Vec::with_capacity(horizon + 1);
    for k in 0..=horizon {
        traces.push(p.trace());
        let g = centralized_gain(&p, h, r)?;
        radii.push(linalg::spectral_radius(&(Matrix::identity(n, n) - &g * h))?);
        if k < horizon {
            p = linalg::symmetrized((Matrix::identity(n, n) - &g * h) * &p);
            gains.push(g);
        }
    }
    Ok(FilterSchedule { gains, traces, radii })
}

impl Experiment {
    /// Computes the gain schedules for `horizon` iterations. A distributed
    /// schedule that breaks down early shortens the effective horizon; the
    /// cause is kept in [`Experiment::breakdown`].
    pub fn prepare(scenario: &Scenario, horizon: usize, options: &HarnessOptions) -> Result<Self, Error> {
        let geometry = InnovationGeometry::new(scenario);
        let PartialSchedule { schedule, breakdown } =
            GainSchedule::compute_partial(scenario, &geometry, options.init, options.distributed, horizon, false);
        if schedule.rounds.is_empty() {
            return Err(breakdown.unwrap_or(Error::NonFiniteCovariance { k: 0 }));
        }
        let effective = if breakdown.is_some() { schedule.applicable_rounds() } else { horizon };
        let p0 = options.init.initial_covariance(scenario);
        let central = filter_schedule(&p0, &scenario.stacked_h(), &scenario.stacked_r(), effective)?;
        let isolated = if options.isolated_baseline {
            Some(
                scenario
                    .agents()
                    .iter()
                    .map(|a| filter_schedule(&p0, &a.h, &a.r, effective))
                    .collect::<Result<Vec<_>, _>>()?,
            )
        } else {
            None
        };
        Ok(Self {
            scenario: scenario.clone(),
            geometry,
            schedule,
            breakdown,
            horizon: effective,
            central,
            isolated,
            options: options.clone(),
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn schedule(&self) -> &GainSchedule {
        &self.schedule
    }

    /// Iterations actually simulated (shorter than requested after a breakdown).
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn breakdown(&self) -> Option<&Error> {
        self.breakdown.as_ref()
    }

    /// Runs trial number `trial` of `master_seed`.
    pub fn run_trial(&self, master_seed: u64, trial: u64) -> Result<TrialResult, Error> {
        let s = &self.scenario;
        let m = s.agent_count();
        let horizon = self.horizon;
        let theta = s.sample_parameter(&mut substream(master_seed, trial, THETA_SLOT));
        let mut noise: Vec<ChaCha12Rng> = (0..m as u64).map(|i| substream(master_seed, trial, 1 + i)).collect();

        let x0 = self.options.init.initial_mean(s);
        let mut central = x0.clone();
        let mut x = vec![x0.clone(); m];
        let mut local = self.isolated.as_ref().map(|_| vec![x0.clone(); m]);
        let h = s.stacked_h();

        let mut result = TrialResult {
            centralized_errors: Vec::with_capacity(horizon + 1),
            distributed_errors: Vec::with_capacity(horizon + 1),
            isolated_errors: local.as_ref().map(|_| Vec::with_capacity(horizon + 1)),
            checkpoint_innovations: Vec::new(),
            innovations_sample: self.options.retain_innovations.then(Vec::new),
            theta: theta.clone(),
        };
        for k in 0..=horizon {
            result.centralized_errors.push(&theta - &central);
            result.distributed_errors.push(x.iter().map(|xi| &theta - xi).collect());
            if let (Some(errs), Some(l)) = (result.isolated_errors.as_mut(), local.as_ref()) {
                errs.push(l.iter().map(|xi| &theta - xi).collect());
            }
            if k == horizon {
                break;
            }
            let round = s.sample_round(&theta, k, &mut noise);
            let wants_innovation = self.options.checkpoints.contains(&k);
            if wants_innovation || self.options.retain_innovations {
                let y: Vec<Vector> = (0..m)
                    .map(|i| stack_innovation(&x, &round, s, &self.geometry, i))
                    .collect::<Result<_, _>>()?;
                if wants_innovation {
                    result.checkpoint_innovations.push((k, y.clone()));
                }
                if let Some(sample) = result.innovations_sample.as_mut() {
                    sample.push(y);
                }
            }
            central = &central + &self.central.gains[k] * (round.stacked() - &h * &central);
            x = self.schedule.advance(&x, &round, s)?;
            if let (Some(l), Some(filters)) = (local.as_mut(), self.isolated.as_ref()) {
                step_local(l, filters, &round, s, k);
            }
        }
        Ok(result)
    }
}

fn step_local(estimates: &mut [Vector], filters: &[FilterSchedule], round: &MeasurementRound, s: &Scenario, k: usize) {
    for (i, xi) in estimates.iter_mut().enumerate() {
        let agent = s.agent(i);
        *xi = &*xi + &filters[i].gains[k] * (&round.z[i] - &agent.h * &*xi);
    }
}

/// One sampled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub theta: Vector,
    /// `ε*ₖ` for `k = 0..=K`.
    pub centralized_errors: Vec<Vector>,
    /// `εᵢ,ₖ` indexed `[k][i]`.
    pub distributed_errors: Vec<Vec<Vector>>,
    /// Errors of the isolated per-agent filters, `[k][i]`, when requested.
    pub isolated_errors: Option<Vec<Vec<Vector>>>,
    /// `(k, [yᵢ,ₖ])` at the configured checkpoints.
    pub checkpoint_innovations: Vec<(usize, Vec<Vector>)>,
    /// Every `yᵢ,ₖ`, `[k][i]`, for `k < K`, when retained.
    pub innovations_sample: Option<Vec<Vec<Vector>>>,
}

impl TrialResult {
    /// `max_{i,j} ‖xᵢ,ₖ − xⱼ,ₖ‖`, from the errors (`xᵢ − xⱼ = εⱼ − εᵢ`).
    pub fn disagreement(&self, k: usize) -> f64 {
        ciest_core::distributed::max_disagreement(&self.distributed_errors[k])
    }
}

/// Convenience wrapper: prepares the schedules and runs trial 0 of `seed`.
pub fn run_trial(scenario: &Scenario, horizon: usize, seed: u64, options: &HarnessOptions) -> Result<TrialResult, Error> {
    Experiment::prepare(scenario, horizon, options)?.run_trial(seed, 0)
}

/// Running first and second moments of a fixed-size block of values.
#[derive(Debug, Clone, PartialEq)]
struct Moments {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Self {
            sum: vec![0.0; len],
            sum_sq: vec![0.0; len],
        }
    }

    fn push(&mut self, values: impl IntoIterator<Item = f64>) {
        for ((s, q), v) in self.sum.iter_mut().zip(self.sum_sq.iter_mut()).zip(values) {
            *s += v;
            *q += v * v;
        }
    }

    fn merge(&mut self, other: &Self) {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
    }

    fn mean(&self, idx: usize, count: usize) -> f64 {
        self.sum[idx] / count as f64
    }

    /// Standard error of the mean from the unbiased sample variance; zero for a single trial.
    fn stderr(&self, idx: usize, count: usize) -> f64 {
        if count < 2 {
            return 0.0;
        }
        let t = count as f64;
        let mean = self.sum[idx] / t;
        let var = ((self.sum_sq[idx] - t * mean * mean) / (t - 1.0)).max(0.0);
        (var / t).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Accumulator {
    count: usize,
    /// `[k]` over entities `[central, agent 0, …]` of squared error norms.
    sq_err: Vec<Moments>,
    isolated_sq_err: Option<Vec<Moments>>,
    /// `[k]` over entities `[network, agent 0, …]` of disagreements.
    disagreement: Vec<Moments>,
    /// Per checkpoint: joint error entries, then outer-product entries.
    error_mean: Vec<Moments>,
    error_outer: Vec<Moments>,
    innovation: Vec<Moments>,
}

impl Accumulator {
    fn new(exp: &Experiment) -> Self {
        let m = exp.scenario.agent_count();
        let n = exp.scenario.dim();
        let joint = m * n;
        let steps = exp.horizon + 1;
        let innovation_len: usize = exp.geometry.agents().iter().map(|g| g.rows()).sum();
        let checkpoints = &exp.options.checkpoints;
        Self {
            count: 0,
            sq_err: (0..steps).map(|_| Moments::new(m + 1)).collect(),
            isolated_sq_err: exp.isolated.as_ref().map(|_| (0..steps).map(|_| Moments::new(m)).collect()),
            disagreement: (0..steps).map(|_| Moments::new(m + 1)).collect(),
            error_mean: checkpoints.iter().map(|_| Moments::new(joint)).collect(),
            error_outer: checkpoints.iter().map(|_| Moments::new(joint * joint)).collect(),
            innovation: checkpoints.iter().map(|_| Moments::new(innovation_len)).collect(),
        }
    }

    fn push(&mut self, exp: &Experiment, trial: &TrialResult) {
        self.count += 1;
        for (k, moments) in self.sq_err.iter_mut().enumerate() {
            let central = trial.centralized_errors[k].norm_squared();
            moments.push(std::iter::once(central).chain(trial.distributed_errors[k].iter().map(|e| e.norm_squared())));
        }
        if let (Some(acc), Some(errs)) = (self.isolated_sq_err.as_mut(), trial.isolated_errors.as_ref()) {
            for (moments, errs_k) in acc.iter_mut().zip(errs) {
                moments.push(errs_k.iter().map(|e| e.norm_squared()));
            }
        }
        for (k, moments) in self.disagreement.iter_mut().enumerate() {
            let errs = &trial.distributed_errors[k];
            let per_agent: Vec<f64> = errs
                .iter()
                .map(|a| errs.iter().map(|b| (a - b).norm()).fold(0.0, f64::max))
                .collect();
            let network = per_agent.iter().copied().fold(0.0, f64::max);
            moments.push(std::iter::once(network).chain(per_agent));
        }
        for (c, &k) in exp.options.checkpoints.iter().enumerate() {
            if k > exp.horizon {
                continue;
            }
            let joint: Vec<f64> = trial.distributed_errors[k].iter().flat_map(|e| e.iter().copied()).collect();
            self.error_outer[c].push(joint.iter().flat_map(|a| joint.iter().map(move |b| a * b)));
            self.error_mean[c].push(joint);
            if let Some((_, ys)) = trial.checkpoint_innovations.iter().find(|(kk, _)| *kk == k) {
                self.innovation[c].push(ys.iter().flat_map(|y| y.iter().copied()));
            }
        }
    }

    fn merge(&mut self, other: &Self) {
        self.count += other.count;
        let pairs = self
            .sq_err
            .iter_mut()
            .zip(&other.sq_err)
            .chain(self.disagreement.iter_mut().zip(&other.disagreement))
            .chain(self.error_mean.iter_mut().zip(&other.error_mean))
            .chain(self.error_outer.iter_mut().zip(&other.error_outer))
            .chain(self.innovation.iter_mut().zip(&other.innovation));
        for (a, b) in pairs {
            a.merge(b);
        }
        if let (Some(a), Some(b)) = (self.isolated_sq_err.as_mut(), other.isolated_sq_err.as_ref()) {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        }
    }
}

/// Per-iteration statistics of one estimator (the fusion center or an agent).
#[derive(Debug, Clone, PartialEq)]
pub struct EntityStats {
    /// Analytic `tr P` reported by the filter.
    pub trace_cov: f64,
    /// Monte Carlo mean of `‖ε‖²`.
    pub empirical_mse: f64,
    pub mse_stderr: f64,
    /// Mean of `maxⱼ ‖xᵢ − xⱼ‖` for an agent, of `max_{i,j} ‖xᵢ − xⱼ‖` for the center row.
    pub consensus_disagreement: f64,
    /// `ρ(I − 𝒦H̃)` of the gain applied at this iteration.
    pub spectral_radius: f64,
    pub fixup_count: usize,
    pub jitter_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationSummary {
    pub k: usize,
    pub central: EntityStats,
    pub agents: Vec<EntityStats>,
    pub disagreement_stderr: f64,
    /// `max_{i,j} tr(Pᵢ + Pⱼ − Pᵢⱼ − Pⱼᵢ)` from the analytic grid.
    pub expected_disagreement: f64,
    /// `(analytic tr P, empirical MSE, SE)` of the isolated per-agent filters.
    pub isolated: Option<Vec<(f64, f64, f64)>>,
}

/// Empirical error and innovation moments at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointSummary {
    pub k: usize,
    /// Mean and standard error of the joint error `[ε₁; …; ε_m]`.
    pub error_mean: Vector,
    pub error_mean_stderr: Vector,
    /// `E[εεᵀ]` of the joint error and its entrywise standard error.
    pub error_second_moment: Matrix,
    pub error_second_moment_stderr: Matrix,
    /// Mean and standard error of the stacked innovations `[y₁; …; y_m]`;
    /// empty when `k` is the final iteration (no measurements are drawn there).
    pub innovation_mean: Vector,
    pub innovation_mean_stderr: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub horizon: usize,
    pub requested_horizon: usize,
    pub trials: usize,
    pub seed: u64,
    pub mode: CovarianceMode,
    pub init: Initialization,
    /// Reason the distributed recursion stopped before the requested horizon.
    pub breakdown: Option<String>,
    pub iterations: Vec<IterationSummary>,
    pub checkpoints: Vec<CheckpointSummary>,
}

impl ExperimentSummary {
    pub fn checkpoint(&self, k: usize) -> Option<&CheckpointSummary> {
        self.checkpoints.iter().find(|c| c.k == k)
    }
}

fn run_chunk(exp: &Experiment, seed: u64, range: std::ops::Range<usize>) -> Result<Accumulator, Error> {
    let mut acc = Accumulator::new(exp);
    for trial in range {
        let result = exp.run_trial(seed, trial as u64)?;
        acc.push(exp, &result);
    }
    Ok(acc)
}

/// Runs `trials` independent trials in parallel and reduces them. The result
/// is bit-identical to a sequential run with the same seed.
pub fn run_monte_carlo(
    scenario: &Scenario,
    horizon: usize,
    trials: usize,
    master_seed: u64,
    options: &HarnessOptions,
) -> Result<ExperimentSummary, Error> {
    let exp = Experiment::prepare(scenario, horizon, options)?;
    run_prepared(&exp, horizon, trials, master_seed)
}

pub fn run_prepared(exp: &Experiment, requested_horizon: usize, trials: usize, master_seed: u64) -> Result<ExperimentSummary, Error> {
    if trials == 0 {
        return Err(Error::DimensionMismatch("at least one trial is required".into()));
    }
    let chunks: Vec<std::ops::Range<usize>> = (0..trials)
        .step_by(CHUNK_TRIALS)
        .map(|start| start..(start + CHUNK_TRIALS).min(trials))
        .collect();
    let partials: Vec<Accumulator> = chunks
        .into_par_iter()
        .map(|range| run_chunk(exp, master_seed, range))
        .collect::<Result<_, _>>()?;
    let mut total = Accumulator::new(exp);
    for part in &partials {
        total.merge(part);
    }
    Ok(summarize(exp, &total, requested_horizon, master_seed))
}

fn summarize(exp: &Experiment, acc: &Accumulator, requested_horizon: usize, seed: u64) -> ExperimentSummary {
    let t = acc.count;
    let m = exp.scenario.agent_count();
    let iterations = (0..=exp.horizon)
        .map(|k| {
            let round = &exp.schedule.rounds[k];
            let sq = &acc.sq_err[k];
            let dis = &acc.disagreement[k];
            let agents = (0..m)
                .map(|i| EntityStats {
                    trace_cov: round.traces[i],
                    empirical_mse: sq.mean(i + 1, t),
                    mse_stderr: sq.stderr(i + 1, t),
                    consensus_disagreement: dis.mean(i + 1, t),
                    spectral_radius: round.diagnostics[i].spectral_radius,
                    fixup_count: usize::from(round.diagnostics[i].fixup.is_some()),
                    jitter_count: usize::from(round.diagnostics[i].jitter.is_some()),
                })
                .collect();
            let central = EntityStats {
                trace_cov: exp.central.traces[k],
                empirical_mse: sq.mean(0, t),
                mse_stderr: sq.stderr(0, t),
                consensus_disagreement: dis.mean(0, t),
                spectral_radius: exp.central.radii[k],
                fixup_count: round.fixup_count(),
                jitter_count: round.jitter_count(),
            };
            let isolated = match (exp.isolated.as_ref(), acc.isolated_sq_err.as_ref()) {
                (Some(filters), Some(moments)) => Some(
                    (0..m)
                        .map(|i| (filters[i].traces[k], moments[k].mean(i, t), moments[k].stderr(i, t)))
                        .collect(),
                ),
                _ => None,
            };
            IterationSummary {
                k,
                central,
                agents,
                disagreement_stderr: dis.stderr(0, t),
                expected_disagreement: round.expected_disagreement,
                isolated,
            }
        })
        .collect();
    let joint = m * exp.scenario.dim();
    let checkpoints = exp
        .options
        .checkpoints
        .iter()
        .enumerate()
        .filter(|(_, &k)| k <= exp.horizon)
        .map(|(c, &k)| {
            let vector = |moments: &Moments, f: fn(&Moments, usize, usize) -> f64| {
                Vector::from_iterator(moments.sum.len(), (0..moments.sum.len()).map(|idx| f(moments, idx, t)))
            };
            // No measurements are drawn at the final iteration.
            let (innovation_mean, innovation_mean_stderr) = if k < exp.horizon {
                (vector(&acc.innovation[c], Moments::mean), vector(&acc.innovation[c], Moments::stderr))
            } else {
                (Vector::zeros(0), Vector::zeros(0))
            };
            CheckpointSummary {
                k,
                error_mean: vector(&acc.error_mean[c], Moments::mean),
                error_mean_stderr: vector(&acc.error_mean[c], Moments::stderr),
                error_second_moment: Matrix::from_fn(joint, joint, |a, b| acc.error_outer[c].mean(a * joint + b, t)),
                error_second_moment_stderr: Matrix::from_fn(joint, joint, |a, b| acc.error_outer[c].stderr(a * joint + b, t)),
                innovation_mean,
                innovation_mean_stderr,
            }
        })
        .collect();
    ExperimentSummary {
        horizon: exp.horizon,
        requested_horizon,
        trials: t,
        seed,
        mode: exp.options.distributed.mode,
        init: exp.options.init,
        breakdown: exp.breakdown.as_ref().map(|e| e.to_string()),
        iterations,
        checkpoints,
    }
}

/// Exact-grid and paper-sparse runs on identical realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeComparison {
    pub exact: ExperimentSummary,
    pub sparse: ExperimentSummary,
    /// Per `k` up to the shorter horizon: `maxᵢ ‖𝒦ᵢ^exact − 𝒦ᵢ^sparse‖_F / ‖𝒦ᵢ^exact‖_F`
    /// (zero when both gains vanish).
    pub gain_divergence: Vec<f64>,
    /// Per `k`: `maxᵢ |tr Pᵢ^exact − tr Pᵢ^sparse|`.
    pub trace_divergence: Vec<f64>,
}

/// Runs both bookkeeping modes with the same master seed. Realizations depend
/// only on (seed, trial, slot), so both runs see the same data.
pub fn compare_modes(
    scenario: &Scenario,
    horizon: usize,
    trials: usize,
    master_seed: u64,
    options: &HarnessOptions,
) -> Result<ModeComparison, Error> {
    let with_mode = |mode| HarnessOptions {
        distributed: DistributedConfig { mode, ..options.distributed },
        isolated_baseline: true,
        ..options.clone()
    };
    let exact_exp = Experiment::prepare(scenario, horizon, &with_mode(CovarianceMode::ExactGrid))?;
    let sparse_exp = Experiment::prepare(scenario, horizon, &with_mode(CovarianceMode::PaperSparse))?;
    let exact = run_prepared(&exact_exp, horizon, trials, master_seed)?;
    let sparse = run_prepared(&sparse_exp, horizon, trials, master_seed)?;
    let shared = exact_exp.horizon.min(sparse_exp.horizon);
    let dim = scenario.dim();
    let gain_divergence = (0..=shared)
        .map(|k| {
            let a = &exact_exp.schedule.rounds[k].weights;
            let b = &sparse_exp.schedule.rounds[k].weights;
            (0..scenario.agent_count())
                .map(|i| {
                    let ga = a.agent(i).gain(dim);
                    let gb = b.agent(i).gain(dim);
                    let diff = (&ga - &gb).norm();
                    let scale = ga.norm();
                    if scale > 0.0 {
                        diff / scale
                    } else {
                        diff
                    }
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let trace_divergence = (0..=shared)
        .map(|k| {
            let a = &exact_exp.schedule.rounds[k].traces;
            let b = &sparse_exp.schedule.rounds[k].traces;
            a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        })
        .collect();
    Ok(ModeComparison {
        exact,
        sparse,
        gain_divergence,
        trace_divergence,
    })
}
