//! Online graph learning from a stream of signals.
//!
//! [`Opadmm`] absorbs each sample into the running dissimilarity and then
//! takes exactly one PADMM iteration against it. Per-sample work and memory
//! are `O(r + n)` regardless of how many samples have been seen.
//!
//! [`OnlinePg`] is an illustrative projected-gradient baseline on the same
//! time-varying cost. Other comparators plug in through [`OnlineLearner`].

use serde::{Deserialize, Serialize};

use crate::dissim::{DissimilarityState, ForgettingSchedule};
use crate::error::{check_len, param, Error, Result};
use crate::graph::{DegreeMap, EdgeIndexing, EdgeVector};
use crate::padmm::{
    barrier_cost, batch_solve_from, edge_cost, objective, Hyperparams, Padmm, PadmmState,
};

/// Common surface of streaming topology estimators.
pub trait OnlineLearner {
    /// Short name used in reports.
    fn label(&self) -> &str;

    /// Returns the learner to its initial state.
    fn reset(&mut self);

    /// Consumes one graph signal.
    fn step(&mut self, x: &[f64]) -> Result<()>;

    /// Current edge-weight estimate.
    fn current_estimate(&self) -> &[f64];

    /// Running dissimilarity `z_{1:k}` the estimate was computed against.
    fn running_dissimilarity(&self) -> &[f64];

    /// `f⁽ᵏ⁾(w⁽ᵏ⁾) + g(v⁽ᵏ⁾)` for the current iterate. Learners without a
    /// separate degree variable evaluate `g` at `S w`.
    fn instantaneous_cost(&self) -> f64;

    /// Number of samples consumed since the last reset.
    fn steps(&self) -> u64;
}

/// Full state of an OPADMM stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineSolverState {
    pub padmm: PadmmState,
    pub dissim: DissimilarityState,
    pub hp: Hyperparams,
    pub step_count: u64,
}

impl OnlineSolverState {
    pub fn new(n: usize, hp: Hyperparams, schedule: ForgettingSchedule) -> Result<Self> {
        hp.validate(n)?;
        let slots = EdgeIndexing::new(n)?.slots();
        Ok(OnlineSolverState {
            padmm: PadmmState::initial(n)?,
            dissim: DissimilarityState::new(slots, schedule)?,
            hp,
            step_count: 0,
        })
    }

    pub fn nodes(&self) -> usize {
        self.padmm.nodes()
    }

    /// `f⁽ᵏ⁾(w) + g(v)` with `f⁽ᵏ⁾` built from the running dissimilarity.
    pub fn cost(&self) -> f64 {
        edge_cost(self.padmm.weights(), self.dissim.running(), self.hp.beta)
            + barrier_cost(self.padmm.degree_proxy(), self.hp.alpha)
    }
}

/// Pure OPADMM step: dissimilarity update followed by one PADMM iteration.
pub fn opadmm_step(state: &OnlineSolverState, x: &[f64]) -> Result<OnlineSolverState> {
    let mut learner = Opadmm::from_state(state.clone())?;
    learner.step(x)?;
    Ok(learner.into_state())
}

/// Online proximal ADMM learner.
#[derive(Debug, Clone)]
pub struct Opadmm {
    state: OnlineSolverState,
    engine: Padmm,
    scratch: Vec<f64>,
}

impl Opadmm {
    pub fn new(n: usize, hp: Hyperparams, schedule: ForgettingSchedule) -> Result<Self> {
        Self::from_state(OnlineSolverState::new(n, hp, schedule)?)
    }

    pub fn from_state(state: OnlineSolverState) -> Result<Self> {
        let n = state.nodes();
        let engine = Padmm::new(n, state.hp)?;
        check_len(
            "running dissimilarity",
            EdgeIndexing::new(n)?.slots(),
            state.dissim.running().len(),
        )?;
        Ok(Opadmm {
            scratch: vec![0.0; state.dissim.running().len()],
            state,
            engine,
        })
    }

    pub fn state(&self) -> &OnlineSolverState {
        &self.state
    }

    pub fn into_state(self) -> OnlineSolverState {
        self.state
    }

    pub fn estimate(&self) -> EdgeVector {
        self.state.padmm.edge_vector()
    }
}

impl OnlineLearner for Opadmm {
    fn label(&self) -> &str {
        "opadmm"
    }

    fn reset(&mut self) {
        let n = self.state.nodes();
        let schedule = self.state.dissim.schedule();
        self.state = OnlineSolverState::new(n, self.state.hp, schedule)
            .expect("parameters were validated on construction");
    }

    fn step(&mut self, x: &[f64]) -> Result<()> {
        check_len("graph signal", self.state.nodes(), x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("graph signal has non-finite entries".into()));
        }
        self.state.dissim.observe(x, &mut self.scratch);
        self.engine
            .step_unchecked(&mut self.state.padmm, self.state.dissim.running());
        self.state.step_count += 1;
        Ok(())
    }

    fn current_estimate(&self) -> &[f64] {
        self.state.padmm.weights()
    }

    fn running_dissimilarity(&self) -> &[f64] {
        self.state.dissim.running()
    }

    fn instantaneous_cost(&self) -> f64 {
        self.state.cost()
    }

    fn steps(&self) -> u64 {
        self.state.step_count
    }
}

/// Barrier smoothing used by [`OnlinePg`] in `1/(S w + ε)`.
pub const PG_BARRIER_EPS: f64 = 1e-9;

/// Illustrative online projected-gradient baseline.
///
/// After updating `z_{1:k}` it takes one step
/// `w⁺ = max(0, w − η(2z + 2βw − α Sᵀ(1/(S w + ε))))`
/// with `η = τ₁` by default. The iterate starts at uniform weights `1/(n−1)`
/// (unit degrees) so the first barrier gradient is bounded.
#[derive(Debug, Clone)]
pub struct OnlinePg {
    map: DegreeMap,
    hp: Hyperparams,
    eta: f64,
    w: Vec<f64>,
    dissim: DissimilarityState,
    step_count: u64,
    deg: Vec<f64>,
    scratch: Vec<f64>,
}

impl OnlinePg {
    pub fn new(n: usize, hp: Hyperparams, schedule: ForgettingSchedule) -> Result<Self> {
        hp.validate(n)?;
        let map = DegreeMap::new(n)?;
        let r = map.slots();
        Ok(OnlinePg {
            map,
            hp,
            eta: hp.tau1,
            w: vec![1.0 / (n as f64 - 1.0); r],
            dissim: DissimilarityState::new(r, schedule)?,
            step_count: 0,
            deg: vec![0.0; n],
            scratch: vec![0.0; r],
        })
    }

    pub fn with_step_size(mut self, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(param(format!("step size must be positive, got {eta}")));
        }
        self.eta = eta;
        Ok(self)
    }

    /// Replaces the current iterate; entries must be nonnegative.
    pub fn with_weights(mut self, w: EdgeVector) -> Result<Self> {
        check_len("edge vector", self.map.slots(), w.len())?;
        self.w = w.into_vec();
        Ok(self)
    }

    pub fn step_size(&self) -> f64 {
        self.eta
    }

    /// One projected-gradient step against a fixed dissimilarity `z`.
    pub fn gradient_step(&mut self, z: &[f64]) -> Result<()> {
        check_len("dissimilarity vector", self.map.slots(), z.len())?;
        self.gradient_step_unchecked(z);
        Ok(())
    }

    fn gradient_step_unchecked(&mut self, z: &[f64]) {
        let n = self.map.nodes();
        let Hyperparams { alpha, beta, .. } = self.hp;
        self.map.apply_into(&self.w, &mut self.deg);
        for d in self.deg.iter_mut() {
            *d = alpha / (*d + PG_BARRIER_EPS);
        }
        let eta = self.eta;
        let mut e = 0;
        for i in 0..n {
            let qi = self.deg[i];
            for j in i + 1..n {
                let grad = 2.0 * z[e] + 2.0 * beta * self.w[e] - (qi + self.deg[j]);
                self.w[e] = (self.w[e] - eta * grad).max(0.0);
                e += 1;
            }
        }
    }
}

/// Pure baseline step.
pub fn online_pg_step(learner: &OnlinePg, x: &[f64]) -> Result<OnlinePg> {
    let mut next = learner.clone();
    next.step(x)?;
    Ok(next)
}

impl OnlineLearner for OnlinePg {
    fn label(&self) -> &str {
        "pg (illustrative baseline)"
    }

    fn reset(&mut self) {
        let n = self.map.nodes();
        self.w.iter_mut().for_each(|w| *w = 1.0 / (n as f64 - 1.0));
        self.dissim = DissimilarityState::new(self.map.slots(), self.dissim.schedule())
            .expect("schedule was validated on construction");
        self.step_count = 0;
    }

    fn step(&mut self, x: &[f64]) -> Result<()> {
        check_len("graph signal", self.map.nodes(), x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("graph signal has non-finite entries".into()));
        }
        let mut scratch = std::mem::take(&mut self.scratch);
        self.dissim.observe(x, &mut scratch);
        self.scratch = scratch;
        let z = self.dissim.running().to_vec();
        self.gradient_step_unchecked(&z);
        self.step_count += 1;
        Ok(())
    }

    fn current_estimate(&self) -> &[f64] {
        &self.w
    }

    fn running_dissimilarity(&self) -> &[f64] {
        self.dissim.running()
    }

    fn instantaneous_cost(&self) -> f64 {
        objective(&self.w, self.dissim.running(), &self.hp)
    }

    fn steps(&self) -> u64 {
        self.step_count
    }
}

/// Running sum of the per-step online costs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    pub cumulative_cost: f64,
    pub per_step_costs: Option<Vec<f64>>,
}

impl RegretLedger {
    pub fn new(keep_trace: bool) -> Self {
        RegretLedger {
            cumulative_cost: 0.0,
            per_step_costs: keep_trace.then(Vec::new),
        }
    }

    /// Adds `f⁽ᵏ⁾(w⁽ᵏ⁾) + g(v⁽ᵏ⁾)` for the given OPADMM state.
    pub fn accumulate(&mut self, state: &OnlineSolverState) {
        self.add_cost(state.cost());
    }

    pub fn add_cost(&mut self, cost: f64) {
        self.cumulative_cost += cost;
        if let Some(trace) = self.per_step_costs.as_mut() {
            trace.push(cost);
        }
    }
}

/// Functional form of [`RegretLedger::accumulate`].
pub fn accumulate_regret(mut ledger: RegretLedger, state: &OnlineSolverState) -> RegretLedger {
    ledger.accumulate(state);
    ledger
}

/// Best fixed decision in hindsight, `min_{Sw=v} Σ_k f⁽ᵏ⁾(w) + g(v)`.
///
/// The sum of the `p` costs equals `p` times the batch objective at the mean
/// of the running dissimilarities, which is minimized with PADMM.
pub fn static_comparator(z_history: &[Vec<f64>], hp: &Hyperparams) -> Result<f64> {
    let first = z_history
        .first()
        .ok_or_else(|| Error::Degenerate("empty dissimilarity history".into()))?;
    let mut tracker = ComparatorTracker::new(EdgeIndexing::from_slots(first.len())?.nodes(), *hp)?;
    for z in z_history {
        tracker.push(z)?;
    }
    tracker.value()
}

/// Incremental form of [`static_comparator`]: stores only the running sum of
/// `z_{1:k}` and warm-starts each solve from the previous minimizer.
#[derive(Debug, Clone)]
pub struct ComparatorTracker {
    hp: Hyperparams,
    z_sum: Vec<f64>,
    count: u64,
    warm: PadmmState,
    tol: f64,
    max_iter: usize,
}

impl ComparatorTracker {
    pub fn new(n: usize, hp: Hyperparams) -> Result<Self> {
        let solve_hp = Hyperparams::with_defaults(n, hp.alpha, hp.beta);
        solve_hp.validate(n)?;
        Ok(ComparatorTracker {
            hp: solve_hp,
            z_sum: vec![0.0; EdgeIndexing::new(n)?.slots()],
            count: 0,
            warm: PadmmState::initial(n)?,
            tol: 1e-11,
            max_iter: 200_000,
        })
    }

    pub fn push(&mut self, z: &[f64]) -> Result<()> {
        check_len("dissimilarity vector", self.z_sum.len(), z.len())?;
        self.z_sum.iter_mut().zip(z).for_each(|(s, v)| *s += v);
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn value(&mut self) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::Degenerate("empty dissimilarity history".into()));
        }
        let p = self.count as f64;
        let mean: Vec<f64> = self.z_sum.iter().map(|s| s / p).collect();
        let sol = batch_solve_from(self.warm.clone(), &mean, &self.hp, self.tol, self.max_iter)?;
        let value = p * objective(sol.state.weights(), &mean, &self.hp);
        self.warm = sol.state;
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barrier_and_edge_cost_edge_cases() {
        assert_eq!(barrier_cost(&[1.0; 4], 2.0), 0.0);
        assert_eq!(edge_cost(&[0.0; 3], &[5.0; 3], 3.0), 0.0);
        assert_eq!(barrier_cost(&[1.0, 0.0], 1.0), f64::INFINITY);
    }

    #[test]
    fn ledger_trace_matches_sum() {
        let mut ledger = RegretLedger::new(true);
        for c in [1.5, -0.25, 3.0] {
            ledger.add_cost(c);
        }
        let trace = ledger.per_step_costs.as_ref().unwrap();
        assert_eq!(trace.iter().sum::<f64>(), ledger.cumulative_cost);
        assert!(RegretLedger::new(false).per_step_costs.is_none());
    }

    #[test]
    fn pg_clamps_negative_coordinates() {
        let hp = Hyperparams::with_defaults(3, 1e-6, 1.0);
        let w = EdgeVector::new(3, vec![0.01, 1.0, 1.0]).unwrap();
        let mut pg = OnlinePg::new(3, hp, ForgettingSchedule::Stationary)
            .unwrap()
            .with_weights(w)
            .unwrap()
            .with_step_size(1.0)
            .unwrap();
        pg.gradient_step(&[10.0, 0.0, 0.0]).unwrap();
        assert_eq!(pg.current_estimate()[0], 0.0);
        assert!(pg.current_estimate().iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn pg_rejects_bad_step() {
        let hp = Hyperparams::with_defaults(3, 1.0, 1.0);
        let pg = OnlinePg::new(3, hp, ForgettingSchedule::Stationary).unwrap();
        assert!(pg.clone().with_step_size(0.0).is_err());
        assert!(pg.with_step_size(-1.0).is_err());
    }

    #[test]
    fn step_rejects_wrong_length() {
        let hp = Hyperparams::with_defaults(4, 1.0, 1.0);
        let mut opadmm = Opadmm::new(4, hp, ForgettingSchedule::Stationary).unwrap();
        assert!(opadmm.step(&[1.0, 2.0]).is_err());
        assert_eq!(opadmm.steps(), 0);
        opadmm.step(&[1.0, 2.0, 0.0, 1.0]).unwrap();
        assert_eq!(opadmm.steps(), 1);
        opadmm.reset();
        assert_eq!(opadmm.steps(), 0);
        assert!(opadmm.current_estimate().iter().all(|w| *w == 0.0));
    }

    #[test]
    fn comparator_requires_history() {
        let hp = Hyperparams::with_defaults(3, 1.0, 1.0);
        assert!(static_comparator(&[], &hp).is_err());
    }
}
