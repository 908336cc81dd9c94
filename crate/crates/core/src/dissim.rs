//! Pairwise dissimilarities and their forgetting-factor running average.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, param, Error, Result};
use crate::graph::EdgeIndexing;

/// Squared differences `(x_i − x_j)²` of one signal, in edge-slot order.
pub fn instantaneous_dissimilarity(x: &[f64]) -> Result<Vec<f64>> {
    let indexing = EdgeIndexing::new(x.len())?;
    let mut out = vec![0.0; indexing.slots()];
    dissimilarity_into(x, &mut out);
    Ok(out)
}

pub(crate) fn dissimilarity_into(x: &[f64], out: &mut [f64]) {
    let n = x.len();
    let mut e = 0;
    for i in 0..n {
        let xi = x[i];
        let len = n - i - 1;
        for (o, &xj) in out[e..e + len].iter_mut().zip(&x[i + 1..]) {
            let d = xi - xj;
            *o = d * d;
        }
        e += len;
    }
}

/// Mean of the instantaneous dissimilarities of a batch of signals.
pub fn mean_dissimilarity(signals: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = signals
        .first()
        .ok_or_else(|| Error::Degenerate("empty signal batch".into()))?;
    let indexing = EdgeIndexing::new(first.len())?;
    let mut acc = vec![0.0; indexing.slots()];
    let mut buf = vec![0.0; indexing.slots()];
    for x in signals {
        check_len("graph signal", indexing.nodes(), x.len())?;
        dissimilarity_into(x, &mut buf);
        acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += b);
    }
    let p = signals.len() as f64;
    acc.iter_mut().for_each(|a| *a /= p);
    Ok(acc)
}

/// How the forgetting factor `γ⁽ᵏ⁾` evolves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "gamma")]
pub enum ForgettingSchedule {
    /// `γ⁽ᵏ⁾ = 1/k`: the running value is the sample mean.
    Stationary,
    /// Constant `γ ∈ (0, 1)`: exponentially weighted moving average.
    Fixed(f64),
}

impl ForgettingSchedule {
    /// Rejects fixed factors outside the open interval `(0, 1)`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            ForgettingSchedule::Stationary => Ok(()),
            ForgettingSchedule::Fixed(g) if g > 0.0 && g < 1.0 => Ok(()),
            ForgettingSchedule::Fixed(g) => Err(param(format!(
                "forgetting factor must lie in (0, 1), got {g}"
            ))),
        }
    }

    /// Factor applied at step `k >= 1`.
    pub fn gamma(&self, k: u64) -> f64 {
        match *self {
            ForgettingSchedule::Stationary => 1.0 / k as f64,
            ForgettingSchedule::Fixed(g) => g,
        }
    }
}

impl Default for ForgettingSchedule {
    fn default() -> Self {
        ForgettingSchedule::Stationary
    }
}

impl fmt::Display for ForgettingSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForgettingSchedule::Stationary => f.write_str("stationary"),
            ForgettingSchedule::Fixed(g) => write!(f, "fixed:{g}"),
        }
    }
}

/// Parses `stationary` or `fixed:<value>`.
impl FromStr for ForgettingSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("stationary") {
            return Ok(ForgettingSchedule::Stationary);
        }
        let value = s
            .strip_prefix("fixed:")
            .ok_or_else(|| Error::Parse(format!("unknown schedule {s:?}")))?;
        let g: f64 = value
            .parse()
            .map_err(|_| Error::Parse(format!("bad forgetting factor {value:?}")))?;
        let schedule = ForgettingSchedule::Fixed(g);
        schedule.validate()?;
        Ok(schedule)
    }
}

/// Running dissimilarity `z_{1:k}` with its schedule.
///
/// The state starts empty. The first sample seeds it exactly in both modes
/// (`γ⁽¹⁾ = 1` under the stationary schedule, direct copy under a fixed one),
/// so there is no cold-start bias towards zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissimilarityState {
    z_run: Vec<f64>,
    k: u64,
    schedule: ForgettingSchedule,
}

impl DissimilarityState {
    pub fn new(slots: usize, schedule: ForgettingSchedule) -> Result<Self> {
        schedule.validate()?;
        Ok(DissimilarityState {
            z_run: vec![0.0; slots],
            k: 0,
            schedule,
        })
    }

    pub fn running(&self) -> &[f64] {
        &self.z_run
    }

    /// Number of samples absorbed so far.
    pub fn steps(&self) -> u64 {
        self.k
    }

    pub fn schedule(&self) -> ForgettingSchedule {
        self.schedule
    }

    /// Absorbs one dissimilarity vector: `z ← (1−γ) z + γ z̄`.
    pub fn update(&mut self, z_bar: &[f64]) -> Result<()> {
        check_len("dissimilarity vector", self.z_run.len(), z_bar.len())?;
        if let Some(index) = z_bar.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidEntry {
                what: "dissimilarity vector",
                index,
            });
        }
        self.absorb(z_bar);
        Ok(())
    }

    /// Consuming form of [`update`](Self::update).
    pub fn updated(mut self, z_bar: &[f64]) -> Result<Self> {
        self.update(z_bar)?;
        Ok(self)
    }

    /// Computes the instantaneous dissimilarity of `x` into `scratch` and absorbs it.
    pub(crate) fn observe(&mut self, x: &[f64], scratch: &mut [f64]) {
        dissimilarity_into(x, scratch);
        self.absorb(scratch);
    }

    fn absorb(&mut self, z_bar: &[f64]) {
        self.k += 1;
        if self.k == 1 {
            self.z_run.copy_from_slice(z_bar);
            return;
        }
        let g = self.schedule.gamma(self.k);
        for (z, &zb) in self.z_run.iter_mut().zip(z_bar) {
            *z = (1.0 - g) * *z + g * zb;
        }
    }
}
