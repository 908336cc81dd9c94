//! Synthetic tracking experiments: reference solutions, per-step records,
//! and hyperparameter grid searches.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dissim::{mean_dissimilarity, ForgettingSchedule};
use crate::error::{param, Error, Result};
use crate::graph::{l2_distance, EdgeVector};
use crate::online::{ComparatorTracker, OnlineLearner, OnlinePg, Opadmm, RegretLedger};
use crate::padmm::{batch_solve, tau1_bound, Hyperparams};
use crate::synth::{generate_stream, GraphModelSpec, Stream, StreamSpec};

/// Tolerance of the batch solves that produce reference solutions.
pub const REFERENCE_TOL: f64 = 1e-9;
const REFERENCE_MAX_ITER: usize = 1_000_000;

/// Default relative threshold for calling an edge present.
pub const DEFAULT_FSCORE_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Opadmm,
    Pg,
}

impl Algo {
    pub fn name(&self) -> &'static str {
        match self {
            Algo::Opadmm => "opadmm",
            Algo::Pg => "pg",
        }
    }
}

impl std::str::FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "opadmm" => Ok(Algo::Opadmm),
            "pg" => Ok(Algo::Pg),
            other => Err(Error::Parse(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// One online solver to run. Unset step sizes take the defaults for the graph size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub algo: Algo,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau2: Option<f64>,
    #[serde(default)]
    pub schedule: ForgettingSchedule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl SolverConfig {
    pub fn new(algo: Algo, alpha: f64, beta: f64, schedule: ForgettingSchedule) -> Self {
        SolverConfig {
            algo,
            alpha,
            beta,
            rho: None,
            tau1: None,
            tau2: None,
            schedule,
            label: None,
        }
    }

    pub fn with_hyperparams(algo: Algo, hp: Hyperparams, schedule: ForgettingSchedule) -> Self {
        SolverConfig {
            rho: Some(hp.rho),
            tau1: Some(hp.tau1),
            tau2: Some(hp.tau2),
            ..Self::new(algo, hp.alpha, hp.beta, schedule)
        }
    }

    pub fn hyperparams(&self, n: usize) -> Hyperparams {
        let mut hp = Hyperparams::with_rho(n, self.alpha, self.beta, self.rho.unwrap_or(1.0));
        if let Some(t) = self.tau1 {
            hp.tau1 = t;
        }
        if let Some(t) = self.tau2 {
            hp.tau2 = t;
        }
        hp
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| match self.algo {
            Algo::Opadmm => "opadmm".to_string(),
            Algo::Pg => "pg (illustrative baseline)".to_string(),
        })
    }

    pub fn build(&self, n: usize) -> Result<Box<dyn OnlineLearner + Send>> {
        let hp = self.hyperparams(n);
        Ok(match self.algo {
            Algo::Opadmm => Box::new(Opadmm::new(n, hp, self.schedule)?),
            Algo::Pg => Box::new(OnlinePg::new(n, hp, self.schedule)?),
        })
    }
}

/// Hyperparameter grids for [`run_grid`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub rho: Vec<f64>,
    #[serde(default)]
    pub tau1: Vec<f64>,
    #[serde(default)]
    pub tau2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Suboptimality,
    Regret,
    Fscore,
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::Suboptimality]
}

fn default_stride() -> usize {
    1
}

fn default_true() -> bool {
    true
}

fn default_threshold() -> f64 {
    DEFAULT_FSCORE_THRESHOLD
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub graph: GraphModelSpec,
    pub stream: StreamSpec,
    pub solvers: Vec<SolverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    /// Regret is evaluated every `regret_stride` steps (and at the last step).
    #[serde(default = "default_stride")]
    pub regret_stride: usize,
    /// When false, `wall_time_us` is written as 0 so outputs are byte-reproducible.
    #[serde(default = "default_true")]
    pub record_wall_time: bool,
    #[serde(default = "default_threshold")]
    pub fscore_threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(graph: GraphModelSpec, stream: StreamSpec, solvers: Vec<SolverConfig>) -> Self {
        ExperimentConfig {
            graph,
            stream,
            solvers,
            grid: None,
            metrics: default_metrics(),
            regret_stride: 1,
            record_wall_time: true,
            fscore_threshold: DEFAULT_FSCORE_THRESHOLD,
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.solvers.is_empty() {
            return Err(param("experiment needs at least one solver"));
        }
        self.graph.validate()?;
        self.stream.validate()?;
        for s in &self.solvers {
            s.hyperparams(self.graph.n).validate(self.graph.n)?;
            s.schedule.validate()?;
        }
        if self.regret_stride == 0 {
            return Err(param("regret_stride must be at least 1"));
        }
        if !(self.fscore_threshold >= 0.0 && self.fscore_threshold < 1.0) {
            return Err(param("fscore_threshold must lie in [0, 1)"));
        }
        if let Some(g) = &self.grid {
            let reg = !g.alpha.is_empty() || !g.beta.is_empty();
            let sol = !g.rho.is_empty() || !g.tau1.is_empty() || !g.tau2.is_empty();
            if !reg && !sol {
                return Err(param("grid mode needs at least one nonempty grid"));
            }
            if reg && (g.alpha.is_empty() || g.beta.is_empty()) {
                return Err(param("alpha and beta grids must both be nonempty"));
            }
            if sol && (g.rho.is_empty() || g.tau1.is_empty() || g.tau2.is_empty()) {
                return Err(param("rho, tau1 and tau2 grids must all be nonempty"));
            }
        }
        Ok(())
    }

    pub fn wants(&self, m: Metric) -> bool {
        self.metrics.contains(&m)
    }
}

/// One row of a run log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    /// 1-based step.
    pub k: u64,
    /// `‖w⁽ᵏ⁾ − ŵ‖₂` against the reference of the segment containing step k.
    pub suboptimality: f64,
    /// `f⁽ᵏ⁾(w⁽ᵏ⁾) + g(v⁽ᵏ⁾)`.
    pub objective: f64,
    /// Cumulative cost minus the static comparator, at reporting steps only.
    pub regret_partial: Option<f64>,
    /// Cumulative time spent inside solver steps.
    pub wall_time_us: u64,
}

/// Batch solution on the mean dissimilarity of `signals`.
pub fn reference_solution(signals: &[Vec<f64>], hp: &Hyperparams) -> Result<EdgeVector> {
    let z = mean_dissimilarity(signals)?;
    let sol = batch_solve(&z, hp, REFERENCE_TOL, REFERENCE_MAX_ITER)?;
    Ok(sol.weights())
}

/// Piecewise-constant reference: one batch solution per stationary segment.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrack {
    /// `(first sample index, reference)` in increasing order; the first start is 0.
    pub segments: Vec<(usize, EdgeVector)>,
}

impl ReferenceTrack {
    pub fn single(w: EdgeVector) -> Self {
        ReferenceTrack {
            segments: vec![(0, w)],
        }
    }

    /// Solves one reference per `[start, end)` range of `signals`.
    pub fn from_segments(
        signals: &[Vec<f64>],
        bounds: &[(usize, usize)],
        hp: &Hyperparams,
    ) -> Result<Self> {
        let segments = bounds
            .par_iter()
            .map(|&(start, end)| Ok((start, reference_solution(&signals[start..end], hp)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ReferenceTrack { segments })
    }

    /// Reference for 0-based sample `index`.
    pub fn at(&self, index: usize) -> &EdgeVector {
        let pos = self.segments.partition_point(|(start, _)| *start <= index);
        &self.segments[pos.saturating_sub(1)].1
    }
}

/// Options of [`run_learner`].
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// `Some((stride, hp))` evaluates the static regret every `stride` steps.
    pub regret: Option<(usize, Hyperparams)>,
    pub record_wall_time: bool,
}

/// Streams `signals` through `learner`, logging one record per step.
pub fn run_learner(
    learner: &mut dyn OnlineLearner,
    signals: &[Vec<f64>],
    references: &ReferenceTrack,
    opts: RunOptions,
) -> Result<Vec<ExperimentRecord>> {
    let n = references.segments[0].1.nodes();
    let mut ledger = RegretLedger::new(false);
    let mut comparator = match opts.regret {
        Some((_, hp)) => Some(ComparatorTracker::new(n, hp)?),
        None => None,
    };
    let mut elapsed_us = 0u64;
    let mut records = Vec::with_capacity(signals.len());
    let p = signals.len();
    for (index, x) in signals.iter().enumerate() {
        let t0 = Instant::now();
        learner.step(x)?;
        if opts.record_wall_time {
            elapsed_us += t0.elapsed().as_micros() as u64;
        }
        let k = index as u64 + 1;
        let suboptimality = l2_distance(learner.current_estimate(), references.at(index).as_slice());
        let objective = learner.instantaneous_cost();
        let mut regret_partial = None;
        if let (Some(tracker), Some((stride, _))) = (comparator.as_mut(), opts.regret) {
            ledger.add_cost(objective);
            tracker.push(learner.running_dissimilarity())?;
            if k as usize % stride == 0 || index + 1 == p {
                regret_partial = Some(ledger.cumulative_cost - tracker.value()?);
            }
        }
        records.push(ExperimentRecord {
            k,
            suboptimality,
            objective,
            regret_partial,
            wall_time_us: elapsed_us,
        });
    }
    Ok(records)
}

/// Outcome of one configured solver.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub label: String,
    pub config: SolverConfig,
    /// Run log, or the error that stopped this run.
    pub records: std::result::Result<Vec<ExperimentRecord>, String>,
    /// F-measure of the final estimate against the final ground truth.
    pub final_fscore: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub stream: Stream,
    pub runs: Vec<RunResult>,
}

/// Generates the stream, solves the per-segment references and runs every solver.
///
/// A failing solver is recorded in its [`RunResult`]; the others still run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let stream = generate_stream(&config.graph, &config.stream)?;
    let runs = run_on_stream(config, &stream)?;
    Ok(ExperimentOutcome { stream, runs })
}

/// [`run_experiment`] on an already generated stream.
pub fn run_on_stream(config: &ExperimentConfig, stream: &Stream) -> Result<Vec<RunResult>> {
    config.validate()?;
    let n = config.graph.n;
    let bounds: Vec<(usize, usize)> = stream.segments.iter().map(|s| (s.start, s.end)).collect();
    let mut cache: Vec<((u64, u64), ReferenceTrack)> = Vec::new();
    let mut runs = Vec::with_capacity(config.solvers.len());
    for solver in &config.solvers {
        let key = (solver.alpha.to_bits(), solver.beta.to_bits());
        if !cache.iter().any(|(k, _)| *k == key) {
            let hp = Hyperparams::with_defaults(n, solver.alpha, solver.beta);
            cache.push((key, ReferenceTrack::from_segments(&stream.signals, &bounds, &hp)?));
        }
        let refs = &cache.iter().find(|(k, _)| *k == key).expect("cached").1;
        let opts = RunOptions {
            regret: config
                .wants(Metric::Regret)
                .then(|| (config.regret_stride, solver.hyperparams(n))),
            record_wall_time: config.record_wall_time,
        };
        let mut final_fscore = None;
        let records = solver.build(n).and_then(|mut learner| {
            let records = run_learner(learner.as_mut(), &stream.signals, refs, opts)?;
            if config.wants(Metric::Fscore) {
                let est = EdgeVector::new(n, learner.current_estimate().to_vec())?;
                let truth = &stream.segments.last().expect("stream has a segment").graph;
                final_fscore = Some(fscore(&est, truth, config.fscore_threshold)?);
            }
            Ok(records)
        });
        runs.push(RunResult {
            label: solver.label(),
            config: solver.clone(),
            records: records.map_err(|e| e.to_string()),
            final_fscore,
        });
    }
    Ok(runs)
}

/// F-measure of support recovery. An estimated edge counts as present when
/// its weight exceeds `rel_threshold` times the largest estimated weight.
pub fn fscore(estimate: &EdgeVector, truth: &EdgeVector, rel_threshold: f64) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            what: "edge vector",
            expected: truth.len(),
            got: estimate.len(),
        });
    }
    let cut = rel_threshold * estimate.max_weight();
    let (mut tp, mut est, mut tru) = (0usize, 0usize, 0usize);
    for (&e, &t) in estimate.as_slice().iter().zip(truth.as_slice()) {
        let pe = e > cut && e > 0.0;
        let pt = t > 0.0;
        est += pe as usize;
        tru += pt as usize;
        tp += (pe && pt) as usize;
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / est as f64;
    let recall = tp as f64 / tru as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizerCell {
    pub alpha: f64,
    pub beta: f64,
    pub fscore: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizerSearch {
    pub alpha: f64,
    pub beta: f64,
    pub fscore: f64,
    pub cells: Vec<RegularizerCell>,
}

/// Picks `(α, β)` maximizing the F-measure of the batch solution against
/// `truth`. Ties go to the larger α, then the larger β.
pub fn grid_search_regularizers(
    signals: &[Vec<f64>],
    alpha_grid: &[f64],
    beta_grid: &[f64],
    truth: &EdgeVector,
    rel_threshold: f64,
) -> Result<RegularizerSearch> {
    if alpha_grid.is_empty() || beta_grid.is_empty() {
        return Err(param("regularizer grids must be nonempty"));
    }
    let n = truth.nodes();
    let z = mean_dissimilarity(signals)?;
    let pairs: Vec<(f64, f64)> = alpha_grid
        .iter()
        .flat_map(|&a| beta_grid.iter().map(move |&b| (a, b)))
        .collect();
    let solved = pairs
        .par_iter()
        .map(|&(alpha, beta)| {
            let hp = Hyperparams::with_defaults(n, alpha, beta);
            let w = batch_solve(&z, &hp, 1e-8, REFERENCE_MAX_ITER)?.weights();
            Ok((RegularizerCell {
                alpha,
                beta,
                fscore: fscore(&w, truth, rel_threshold)?,
            }, w.edge_count() == 0))
        })
        .collect::<Result<Vec<_>>>()?;
    if solved.iter().all(|(_, empty)| *empty) {
        return Err(Error::Degenerate("every grid cell produced an empty graph".into()));
    }
    let cells: Vec<RegularizerCell> = solved.into_iter().map(|(c, _)| c).collect();
    let best = cells
        .iter()
        .max_by(|a, b| {
            a.fscore
                .total_cmp(&b.fscore)
                .then(a.alpha.total_cmp(&b.alpha))
                .then(a.beta.total_cmp(&b.beta))
        })
        .expect("nonempty grid")
        .clone();
    Ok(RegularizerSearch {
        alpha: best.alpha,
        beta: best.beta,
        fscore: best.fscore,
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverCell {
    pub hp: Hyperparams,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub rho: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSearch {
    pub best: Hyperparams,
    pub score: f64,
    pub evaluated: Vec<SolverCell>,
    pub skipped: Vec<SkippedCell>,
}

/// Mean of the last 10% (at least one) of the suboptimality values.
pub fn tail_score(records: &[ExperimentRecord]) -> f64 {
    let m = (records.len() / 10).max(1).min(records.len());
    records[records.len() - m..]
        .iter()
        .map(|r| r.suboptimality)
        .sum::<f64>()
        / m as f64
}

/// Runs OPADMM for every admissible `(ρ, τ₁, τ₂)` cell and returns the one
/// with the lowest [`tail_score`]. Cells violating the step-size ranges are
/// skipped and listed.
#[allow(clippy::too_many_arguments)]
pub fn grid_search_solver(
    signals: &[Vec<f64>],
    rho_grid: &[f64],
    tau1_grid: &[f64],
    tau2_grid: &[f64],
    references: &ReferenceTrack,
    alpha: f64,
    beta: f64,
    schedule: ForgettingSchedule,
) -> Result<SolverSearch> {
    let n = references.segments[0].1.nodes();
    let mut feasible = Vec::new();
    let mut skipped = Vec::new();
    for &rho in rho_grid {
        for &tau1 in tau1_grid {
            for &tau2 in tau2_grid {
                let hp = Hyperparams {
                    alpha,
                    beta,
                    rho,
                    tau1,
                    tau2,
                };
                match hp.validate(n) {
                    Ok(()) => feasible.push(hp),
                    Err(e) => skipped.push(SkippedCell {
                        rho,
                        tau1,
                        tau2,
                        reason: e.to_string(),
                    }),
                }
            }
        }
    }
    if feasible.is_empty() {
        return Err(Error::Degenerate(format!(
            "all {} solver grid cells are infeasible (tau1 must be below {})",
            skipped.len(),
            tau1_bound(n, rho_grid.first().copied().unwrap_or(1.0))
        )));
    }
    let evaluated = feasible
        .par_iter()
        .map(|&hp| {
            let mut learner = Opadmm::new(n, hp, schedule)?;
            let records = run_learner(
                &mut learner,
                signals,
                references,
                RunOptions {
                    regret: None,
                    record_wall_time: false,
                },
            )?;
            Ok(SolverCell {
                hp,
                score: tail_score(&records),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = evaluated
        .iter()
        .min_by(|a, b| a.score.total_cmp(&b.score))
        .expect("at least one feasible cell");
    Ok(SolverSearch {
        best: best.hp,
        score: best.score,
        evaluated: evaluated.clone(),
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub regularizers: Option<RegularizerSearch>,
    pub solver: Option<SolverSearch>,
}

/// Runs the grids of `config.grid` on the configured stream: first `(α, β)`
/// against the first segment's ground truth, then `(ρ, τ₁, τ₂)` with the
/// chosen `(α, β)` (or the first solver's, without a regularizer grid).
pub fn run_grid(config: &ExperimentConfig) -> Result<GridOutcome> {
    config.validate()?;
    let grid = config
        .grid
        .as_ref()
        .ok_or_else(|| param("configuration has no grid section"))?;
    let stream = generate_stream(&config.graph, &config.stream)?;
    let first = &stream.segments[0];
    let regularizers = if grid.alpha.is_empty() {
        None
    } else {
        Some(grid_search_regularizers(
            &stream.signals[first.start..first.end],
            &grid.alpha,
            &grid.beta,
            &first.graph,
            config.fscore_threshold,
        )?)
    };
    let (alpha, beta) = match &regularizers {
        Some(r) => (r.alpha, r.beta),
        None => (config.solvers[0].alpha, config.solvers[0].beta),
    };
    let solver = if grid.rho.is_empty() {
        None
    } else {
        let n = config.graph.n;
        let bounds: Vec<(usize, usize)> =
            stream.segments.iter().map(|s| (s.start, s.end)).collect();
        let refs = ReferenceTrack::from_segments(
            &stream.signals,
            &bounds,
            &Hyperparams::with_defaults(n, alpha, beta),
        )?;
        Some(grid_search_solver(
            &stream.signals,
            &grid.rho,
            &grid.tau1,
            &grid.tau2,
            &refs,
            alpha,
            beta,
            config.solvers[0].schedule,
        )?)
    };
    Ok(GridOutcome {
        regularizers,
        solver,
    })
}
