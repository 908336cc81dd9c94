//! Proximal ADMM for the log-barrier graph learning problem
//!
//! ```text
//! minimize  2zᵀw + β‖w‖² + ι(w ≥ 0) − α 1ᵀ log(S w)
//! ```
//!
//! split as `f(w) + g(v)` subject to `S w = v`, with the proximity matrices
//! `G = τ₁⁻¹ I − ρ SᵀS` and `H = (τ₂⁻¹ − ρ) I`. With those choices both
//! primal subproblems reduce to entrywise closed-form proximal maps, so one
//! iteration costs a constant number of sweeps over the `r` edge slots.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, param, Error, Result};
use crate::graph::{l2_distance, norm, DegreeMap, EdgeIndexing, EdgeVector};

/// Regularization and step-size parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Weight of the degree log-barrier.
    pub alpha: f64,
    /// Weight of the squared-norm penalty on edge weights.
    pub beta: f64,
    /// Augmented-Lagrangian penalty.
    pub rho: f64,
    /// Step for the edge-weight update; must satisfy `τ₁ < 1/(ρ·2(n−1))`.
    pub tau1: f64,
    /// Step for the degree-proxy update; must satisfy `τ₂ ≤ 1/ρ`.
    pub tau2: f64,
}

impl Hyperparams {
    /// `ρ = 1`, `τ₁` and `τ₂` at 90% of their upper bounds.
    pub fn with_defaults(n: usize, alpha: f64, beta: f64) -> Self {
        Self::with_rho(n, alpha, beta, 1.0)
    }

    pub fn with_rho(n: usize, alpha: f64, beta: f64, rho: f64) -> Self {
        Hyperparams {
            alpha,
            beta,
            rho,
            tau1: 0.9 * tau1_bound(n, rho),
            tau2: 0.9 / rho,
        }
    }

    /// Same as [`with_defaults`](Self::with_defaults) but with `τ₂ = 1/ρ`, which
    /// makes `H = 0` (the setting in which static regret is analysed).
    pub fn regret_regime(n: usize, alpha: f64, beta: f64) -> Self {
        let mut hp = Self::with_defaults(n, alpha, beta);
        hp.tau2 = 1.0 / hp.rho;
        hp
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("rho", self.rho),
            ("tau1", self.tau1),
            ("tau2", self.tau2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(param(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let bound = tau1_bound(n, self.rho);
        if self.tau1 >= bound {
            return Err(param(format!(
                "tau1 = {} must be below 1/(rho*2(n-1)) = {bound}",
                self.tau1
            )));
        }
        if self.tau2 > 1.0 / self.rho {
            return Err(param(format!(
                "tau2 = {} must not exceed 1/rho = {}",
                self.tau2,
                1.0 / self.rho
            )));
        }
        Ok(())
    }
}

/// Exclusive upper bound `1/(ρ‖S‖₂²)` on `τ₁`, with `‖S‖₂² = 2(n−1)`.
pub fn tau1_bound(n: usize, rho: f64) -> f64 {
    1.0 / (rho * 2.0 * (n as f64 - 1.0))
}

#[inline]
fn prox_f_scalar(w: f64, z: f64, tau: f64, beta: f64) -> f64 {
    ((w - 2.0 * tau * z) / (2.0 * tau * beta + 1.0)).max(0.0)
}

/// Positive root of `u² − v u − c = 0`, evaluated without cancellation.
#[inline]
fn prox_g_scalar(v: f64, c: f64) -> f64 {
    let s = (v * v + 4.0 * c).sqrt();
    if v >= 0.0 {
        0.5 * (v + s)
    } else {
        2.0 * c / (s - v)
    }
}

/// Proximal map of `τ f` with `f(u) = 2zᵀu + β‖u‖² + ι(u ≥ 0)`:
/// `max((w − 2τz) / (2τβ + 1), 0)`.
pub fn prox_f(w_in: &[f64], z: &[f64], tau: f64, beta: f64) -> Result<Vec<f64>> {
    check_len("dissimilarity vector", w_in.len(), z.len())?;
    if !(tau > 0.0) || !(beta > 0.0) {
        return Err(param(format!(
            "prox_f needs tau > 0 and beta > 0, got tau={tau}, beta={beta}"
        )));
    }
    Ok(w_in
        .iter()
        .zip(z)
        .map(|(&w, &z)| prox_f_scalar(w, z, tau, beta))
        .collect())
}

/// Proximal map of `τ g` with `g(u) = −α Σ log uᵢ`: `(v + √(v² + 4τα)) / 2`.
///
/// The output is strictly positive and satisfies `u (u − v) = τα` entrywise.
pub fn prox_g(v_in: &[f64], tau: f64, alpha: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) || !(alpha > 0.0) {
        return Err(param(format!(
            "prox_g needs tau > 0 and alpha > 0, got tau={tau}, alpha={alpha}"
        )));
    }
    let c = tau * alpha;
    Ok(v_in.iter().map(|&v| prox_g_scalar(v, c)).collect())
}

/// Smooth-plus-indicator part `2zᵀw + β‖w‖² + ι(w ≥ 0)`.
pub fn edge_cost(w: &[f64], z: &[f64], beta: f64) -> f64 {
    assert_eq!(w.len(), z.len(), "edge cost shape mismatch");
    let mut acc = 0.0;
    for (&we, &ze) in w.iter().zip(z) {
        if we < 0.0 {
            return f64::INFINITY;
        }
        acc += 2.0 * ze * we + beta * we * we;
    }
    acc
}

/// Log-barrier `−α Σ log dᵢ`, `+∞` if any `dᵢ ≤ 0`.
pub fn barrier_cost(d: &[f64], alpha: f64) -> f64 {
    let mut acc = 0.0;
    for &di in d {
        if !(di > 0.0) {
            return f64::INFINITY;
        }
        acc -= alpha * di.ln();
    }
    acc
}

/// Full objective `2zᵀw + β‖w‖² + ι(w ≥ 0) − α 1ᵀ log(S w)`.
///
/// Returns `+∞` for negative weights or any node with non-positive degree.
///
/// # Panics
///
/// Panics if `w` and `z` differ in length or the length is not triangular.
pub fn objective(w: &[f64], z: &[f64], hp: &Hyperparams) -> f64 {
    let map = DegreeMap::new(
        EdgeIndexing::from_slots(w.len())
            .expect("edge vector length must be n(n-1)/2")
            .nodes(),
    )
    .expect("at least two nodes");
    let f = edge_cost(w, z, hp.beta);
    if f.is_infinite() {
        return f;
    }
    let mut d = vec![0.0; map.nodes()];
    map.apply_into(w, &mut d);
    f + barrier_cost(&d, hp.alpha)
}

/// Iterate of the split problem: edge weights, degree proxy and multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PadmmState {
    w: Vec<f64>,
    v: Vec<f64>,
    lambda: Vec<f64>,
}

impl PadmmState {
    /// `w = 0`, `v = 1`, `λ = 0`.
    pub fn initial(n: usize) -> Result<Self> {
        let idx = EdgeIndexing::new(n)?;
        Ok(PadmmState {
            w: vec![0.0; idx.slots()],
            v: vec![1.0; n],
            lambda: vec![0.0; n],
        })
    }

    /// Builds a state from explicit parts; `w` must be nonnegative and `v` positive.
    pub fn from_parts(w: EdgeVector, v: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        let n = w.nodes();
        check_len("degree proxy", n, v.len())?;
        check_len("multiplier", n, lambda.len())?;
        if let Some(index) = v.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::InvalidEntry {
                what: "degree proxy",
                index,
            });
        }
        if let Some(index) = lambda.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidEntry {
                what: "multiplier",
                index,
            });
        }
        Ok(PadmmState {
            w: w.into_vec(),
            v,
            lambda,
        })
    }

    pub fn nodes(&self) -> usize {
        self.v.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn edge_vector(&self) -> EdgeVector {
        EdgeVector::from_vec_unchecked(
            EdgeIndexing::new(self.nodes()).expect("state has at least two nodes"),
            self.w.clone(),
        )
    }

    pub fn degree_proxy(&self) -> &[f64] {
        &self.v
    }

    pub fn multiplier(&self) -> &[f64] {
        &self.lambda
    }

    /// `‖S w − v‖₂`.
    pub fn primal_residual(&self) -> f64 {
        let map = DegreeMap::new(self.nodes()).expect("state has at least two nodes");
        let mut d = vec![0.0; self.nodes()];
        map.apply_into(&self.w, &mut d);
        l2_distance(&d, &self.v)
    }
}

/// Form of the degree-proxy pre-update `v̄`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VUpdate {
    /// `v̄ = v + τ₂ρ(S w⁺ − v) + τ₂λ`, the minimizer of the `v`-subproblem
    /// of the augmented Lagrangian with `H = (τ₂⁻¹ − ρ) I`.
    #[default]
    Lagrangian,
    /// `v̄ = (1 + ρτ₂) v − ρτ₂ S w⁺ + τ₂λ`. Shares fixed points with
    /// [`Lagrangian`](Self::Lagrangian) but does not drive `S w − v` to zero;
    /// kept for comparison only.
    AsPrinted,
}

/// One-iteration PADMM engine with preallocated workspaces.
///
/// Every call to [`step`](Padmm::step) performs, in order,
///
/// ```text
/// w̄  = w − τ₁ρ Sᵀ(S w − v + λ/ρ)
/// w⁺ = prox_{τ₁f}(w̄)
/// v̄  = v + τ₂ρ(S w⁺ − v) + τ₂λ
/// v⁺ = prox_{τ₂g}(v̄)
/// λ⁺ = λ + ρ(S w⁺ − v⁺)
/// ```
///
/// touching each edge slot once.
#[derive(Debug, Clone)]
pub struct Padmm {
    map: DegreeMap,
    hp: Hyperparams,
    v_update: VUpdate,
    u: Vec<f64>,
    deg: Vec<f64>,
}

impl Padmm {
    pub fn new(n: usize, hp: Hyperparams) -> Result<Self> {
        hp.validate(n)?;
        Ok(Padmm {
            map: DegreeMap::new(n)?,
            hp,
            v_update: VUpdate::default(),
            u: vec![0.0; n],
            deg: vec![0.0; n],
        })
    }

    pub fn with_v_update(mut self, v_update: VUpdate) -> Self {
        self.v_update = v_update;
        self
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    pub fn nodes(&self) -> usize {
        self.map.nodes()
    }

    pub fn step(&mut self, state: &mut PadmmState, z: &[f64]) -> Result<()> {
        check_len("state", self.map.nodes(), state.nodes())?;
        check_len("dissimilarity vector", self.map.slots(), z.len())?;
        self.step_unchecked(state, z);
        Ok(())
    }

    pub(crate) fn step_unchecked(&mut self, state: &mut PadmmState, z: &[f64]) {
        let n = self.map.nodes();
        let Hyperparams {
            alpha,
            beta,
            rho,
            tau1,
            tau2,
        } = self.hp;

        self.map.apply_into(&state.w, &mut self.deg);
        for i in 0..n {
            self.u[i] = self.deg[i] - state.v[i] + state.lambda[i] / rho;
        }

        // w-update fused with accumulation of the new degrees
        let step = tau1 * rho;
        let shrink = 1.0 / (2.0 * tau1 * beta + 1.0);
        let shift = 2.0 * tau1;
        self.deg.iter_mut().for_each(|d| *d = 0.0);
        let mut e = 0;
        for i in 0..n {
            let ui = self.u[i];
            let len = n - i - 1;
            let w_row = &mut state.w[e..e + len];
            let z_row = &z[e..e + len];
            let mut acc = 0.0;
            for (off, (we, &ze)) in w_row.iter_mut().zip(z_row).enumerate() {
                let j = i + 1 + off;
                let w_bar = *we - step * (ui + self.u[j]);
                let w_new = ((w_bar - shift * ze) * shrink).max(0.0);
                *we = w_new;
                acc += w_new;
                self.deg[j] += w_new;
            }
            self.deg[i] += acc;
            e += len;
        }

        let c = tau2 * alpha;
        for i in 0..n {
            let v = state.v[i];
            let sw = self.deg[i];
            let lam = state.lambda[i];
            let v_bar = match self.v_update {
                VUpdate::Lagrangian => v + tau2 * rho * (sw - v) + tau2 * lam,
                VUpdate::AsPrinted => (1.0 + rho * tau2) * v - rho * tau2 * sw + tau2 * lam,
            };
            let v_new = prox_g_scalar(v_bar, c);
            state.v[i] = v_new;
            state.lambda[i] = lam + rho * (sw - v_new);
        }
    }
}

/// Pure single PADMM iteration; see [`Padmm`] for the update order.
pub fn padmm_step(state: &PadmmState, z: &[f64], hp: &Hyperparams) -> Result<PadmmState> {
    let mut solver = Padmm::new(state.nodes(), *hp)?;
    let mut next = state.clone();
    solver.step(&mut next, z)?;
    Ok(next)
}

/// Optimality residuals of a split-problem iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `‖S w − v‖₂`.
    pub primal: f64,
    /// `‖λ + α/v‖₂`, stationarity in `v`.
    pub degree: f64,
    /// `‖w − max(w − ∇ₗ, 0)‖₂` with `∇ₗ = 2z + 2βw + Sᵀλ`, stationarity in `w`
    /// under the nonnegativity constraint.
    pub edge: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.degree).max(self.edge)
    }
}

pub fn kkt_residuals(state: &PadmmState, z: &[f64], hp: &Hyperparams) -> Result<KktResiduals> {
    let map = DegreeMap::new(state.nodes())?;
    check_len("dissimilarity vector", map.slots(), z.len())?;
    let degree: f64 = state
        .v
        .iter()
        .zip(&state.lambda)
        .map(|(v, l)| (l + hp.alpha / v).powi(2))
        .sum::<f64>()
        .sqrt();
    let st = map.adjoint(&state.lambda)?;
    let edge = state
        .w
        .iter()
        .zip(z)
        .zip(&st)
        .map(|((&w, &z), &s)| {
            let g = 2.0 * z + 2.0 * hp.beta * w + s;
            (w - (w - g).max(0.0)).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    Ok(KktResiduals {
        primal: state.primal_residual(),
        degree,
        edge,
    })
}

/// One row of a batch convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    /// `‖w⁽ᵏ⁺¹⁾ − w⁽ᵏ⁾‖₂ / max(1, ‖w⁽ᵏ⁾‖₂)`.
    pub w_change: f64,
    /// `‖S w − v‖₂`.
    pub primal_residual: f64,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct BatchSolution {
    pub state: PadmmState,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    pub iterations: usize,
}

impl BatchSolution {
    pub fn weights(&self) -> EdgeVector {
        self.state.edge_vector()
    }
}

/// Runs PADMM from `w = 0, v = 1, λ = 0` until the relative change in `w`
/// and the primal residual both drop below `tol`, or `max_iter` iterations.
///
/// Hitting `max_iter` is not an error; check [`BatchSolution::converged`].
pub fn batch_solve(z: &[f64], hp: &Hyperparams, tol: f64, max_iter: usize) -> Result<BatchSolution> {
    let n = EdgeIndexing::from_slots(z.len())?.nodes();
    batch_solve_from(PadmmState::initial(n)?, z, hp, tol, max_iter)
}

/// [`batch_solve`] from a caller-supplied starting point.
pub fn batch_solve_from(
    mut state: PadmmState,
    z: &[f64],
    hp: &Hyperparams,
    tol: f64,
    max_iter: usize,
) -> Result<BatchSolution> {
    if !(tol > 0.0) {
        return Err(param(format!("tolerance must be positive, got {tol}")));
    }
    if let Some(index) = z.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidEntry {
            what: "dissimilarity vector",
            index,
        });
    }
    let n = state.nodes();
    let mut solver = Padmm::new(n, *hp)?;
    check_len("dissimilarity vector", solver.map.slots(), z.len())?;
    let mut trace = Vec::new();
    let mut prev = state.w.clone();
    let mut converged = false;
    let mut iterations = 0;
    for iter in 1..=max_iter {
        solver.step_unchecked(&mut state, z);
        iterations = iter;
        let w_change = l2_distance(&state.w, &prev) / norm(&prev).max(1.0);
        let primal_residual = l2_distance(&solver.deg, &state.v);
        trace.push(TraceRow {
            iter,
            w_change,
            primal_residual,
            objective: objective(&state.w, z, hp),
        });
        if w_change < tol && primal_residual < tol {
            converged = true;
            break;
        }
        prev.copy_from_slice(&state.w);
    }
    Ok(BatchSolution {
        state,
        trace,
        converged,
        iterations,
    })
}
