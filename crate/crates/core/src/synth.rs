//! Random graphs, smooth signals on them, and piecewise-stationary streams.
//!
//! All randomness comes from ChaCha8 generators seeded from the spec, so the
//! same spec and seed reproduce the same output bit for bit.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::graph::{laplacian, EdgeIndexing, EdgeVector};

/// Eigenvalues of the Laplacian below this are treated as zero.
pub const PINV_EIGEN_CUTOFF: f64 = 1e-10;

/// Random graph families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum GraphModel {
    /// Nodes uniform in the unit square, weight `exp(−dist²/(2·scale²))`,
    /// weights strictly below `threshold` dropped.
    Gaussian { threshold: f64, scale: f64 },
    /// Each pair present independently with `probability`, unit weight.
    Er { probability: f64 },
    /// Preferential attachment: a clique on `initial_nodes`, then each new
    /// node links to `edges_per_node` existing nodes chosen proportionally to
    /// degree. Unit weights.
    Pa {
        initial_nodes: usize,
        edges_per_node: usize,
    },
}

impl GraphModel {
    pub fn gaussian() -> Self {
        GraphModel::Gaussian {
            threshold: 0.8,
            scale: 0.2,
        }
    }

    pub fn er() -> Self {
        GraphModel::Er { probability: 0.1 }
    }

    pub fn pa() -> Self {
        GraphModel::Pa {
            initial_nodes: 2,
            edges_per_node: 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GraphModel::Gaussian { .. } => "gaussian",
            GraphModel::Er { .. } => "er",
            GraphModel::Pa { .. } => "pa",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphModelSpec {
    #[serde(flatten)]
    pub model: GraphModel,
    pub n: usize,
    pub seed: u64,
}

impl GraphModelSpec {
    pub fn new(model: GraphModel, n: usize, seed: u64) -> Self {
        GraphModelSpec { model, n, seed }
    }

    pub fn validate(&self) -> Result<()> {
        EdgeIndexing::new(self.n)?;
        match self.model {
            GraphModel::Gaussian { threshold, scale } => {
                if !(threshold > 0.0 && threshold < 1.0) {
                    return Err(param(format!("threshold must lie in (0, 1), got {threshold}")));
                }
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(param(format!("scale must be positive, got {scale}")));
                }
            }
            GraphModel::Er { probability } => {
                if !(0.0..=1.0).contains(&probability) {
                    return Err(param(format!(
                        "edge probability must lie in [0, 1], got {probability}"
                    )));
                }
            }
            GraphModel::Pa {
                initial_nodes,
                edges_per_node,
            } => {
                if initial_nodes < 2 || initial_nodes > self.n {
                    return Err(param(format!(
                        "initial_nodes must be in [2, n], got {initial_nodes}"
                    )));
                }
                if edges_per_node == 0 || edges_per_node > initial_nodes {
                    return Err(param(format!(
                        "edges_per_node must be in [1, initial_nodes], got {edges_per_node}"
                    )));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn generate_graph(spec: &GraphModelSpec) -> Result<EdgeVector> {
    spec.validate()?;
    let n = spec.n;
    let idx = EdgeIndexing::new(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut w = vec![0.0; idx.slots()];
    match spec.model {
        GraphModel::Gaussian { threshold, scale } => {
            let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
            for (e, i, j) in idx.pairs() {
                let (dx, dy) = (pts[i].0 - pts[j].0, pts[i].1 - pts[j].1);
                let k = (-(dx * dx + dy * dy) / (2.0 * scale * scale)).exp();
                if k >= threshold {
                    w[e] = k;
                }
            }
        }
        GraphModel::Er { probability } => {
            for we in w.iter_mut() {
                if rng.random::<f64>() < probability {
                    *we = 1.0;
                }
            }
        }
        GraphModel::Pa {
            initial_nodes,
            edges_per_node,
        } => {
            // each node appears in `ends` once per incident edge
            let mut ends = Vec::new();
            for i in 0..initial_nodes {
                for j in i + 1..initial_nodes {
                    w[idx.slot_of(i, j)?] = 1.0;
                    ends.push(i);
                    ends.push(j);
                }
            }
            for t in initial_nodes..n {
                let mut targets: Vec<usize> = Vec::with_capacity(edges_per_node);
                while targets.len() < edges_per_node.min(t) {
                    let c = ends[rng.random_range(0..ends.len())];
                    if !targets.contains(&c) {
                        targets.push(c);
                    }
                }
                for &c in &targets {
                    w[idx.slot_of(c, t)?] = 1.0;
                    ends.push(c);
                    ends.push(t);
                }
            }
        }
    }
    EdgeVector::new(n, w)
}

/// Square root of the Laplacian pseudoinverse, `U diag(λ⁺^{-1/2}) Uᵀ`.
fn laplacian_pinv_sqrt(w: &EdgeVector) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(laplacian(w));
    let scales = eig.eigenvalues.map(|l| {
        if l > PINV_EIGEN_CUTOFF {
            1.0 / l.sqrt()
        } else {
            0.0
        }
    });
    let u = &eig.eigenvectors;
    u * DMatrix::from_diagonal(&scales) * u.transpose()
}

/// Draws `p` signals `x = L†^{1/2} ε + η`, `ε ~ N(0, I)`, `η ~ N(0, σ² I)`.
pub fn generate_smooth_signals(
    w: &EdgeVector,
    p: usize,
    noise_variance: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if w.edge_count() == 0 {
        return Err(Error::Degenerate("cannot draw smooth signals on an empty graph".into()));
    }
    if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
        return Err(param(format!("noise variance must be >= 0, got {noise_variance}")));
    }
    let n = w.nodes();
    let factor = laplacian_pinv_sqrt(w);
    let noise = Normal::new(0.0, noise_variance.sqrt()).map_err(|e| param(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(p);
    for _ in 0..p {
        let eps = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let x = &factor * eps;
        let row: Vec<f64> = if noise_variance > 0.0 {
            x.iter().map(|v| v + noise.sample(&mut rng)).collect()
        } else {
            x.iter().copied().collect()
        };
        out.push(row);
    }
    Ok(out)
}

/// Removes `⌈fraction·|E|⌉` existing edges and adds as many new ones.
///
/// New slots come from pairs absent in the input graph (falling back to the
/// removed pairs only when there are not enough of them). Endpoints follow
/// the model: uniform for Gaussian and ER, degree-proportional for PA. New
/// edges take the weights of the removed ones in shuffled order, so the
/// weight distribution and the edge count are preserved.
pub fn resample_edges(
    w: &EdgeVector,
    fraction: f64,
    spec: &GraphModelSpec,
    seed: u64,
) -> Result<EdgeVector> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(param(format!("fraction must lie in [0, 1], got {fraction}")));
    }
    spec.validate()?;
    if spec.n != w.nodes() {
        return Err(Error::DimensionMismatch {
            what: "graph spec node count",
            expected: w.nodes(),
            got: spec.n,
        });
    }
    let idx = w.indexing();
    let present: Vec<usize> = (0..w.len()).filter(|&e| w.as_slice()[e] > 0.0).collect();
    let m = (fraction * present.len() as f64 - 1e-9).ceil().max(0.0) as usize;
    if m == 0 {
        return Ok(w.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let removed: Vec<usize> = index::sample(&mut rng, present.len(), m)
        .into_iter()
        .map(|k| present[k])
        .collect();
    let mut weights: Vec<f64> = removed.iter().map(|&e| w.as_slice()[e]).collect();
    for k in (1..weights.len()).rev() {
        weights.swap(k, rng.random_range(0..=k));
    }

    let mut out = w.as_slice().to_vec();
    for &e in &removed {
        out[e] = 0.0;
    }
    let mut allowed: Vec<bool> = w.as_slice().iter().map(|v| *v == 0.0).collect();
    let absent = allowed.iter().filter(|a| **a).count();
    if absent < m {
        for &e in &removed {
            allowed[e] = true;
        }
    }

    let mut chosen: Vec<usize> = Vec::with_capacity(m);
    match spec.model {
        GraphModel::Pa { .. } => {
            let mut ends: Vec<usize> = Vec::new();
            for (e, i, j) in idx.pairs() {
                if out[e] > 0.0 {
                    ends.push(i);
                    ends.push(j);
                }
            }
            let mut tries = 0usize;
            while chosen.len() < m && tries < 1000 * m {
                tries += 1;
                let a = rng.random_range(0..idx.nodes());
                let b = if ends.is_empty() {
                    rng.random_range(0..idx.nodes())
                } else {
                    ends[rng.random_range(0..ends.len())]
                };
                if a == b {
                    continue;
                }
                let e = idx.slot_of(a.min(b), a.max(b))?;
                if allowed[e] {
                    allowed[e] = false;
                    chosen.push(e);
                }
            }
            // degree sampling can stall on near-complete graphs; finish uniformly
            if chosen.len() < m {
                fill_uniform(&mut rng, &mut allowed, &mut chosen, m);
            }
        }
        _ => fill_uniform(&mut rng, &mut allowed, &mut chosen, m),
    }
    for (e, weight) in chosen.into_iter().zip(weights) {
        out[e] = weight;
    }
    EdgeVector::new(idx.nodes(), out)
}

fn fill_uniform(rng: &mut ChaCha8Rng, allowed: &mut [bool], chosen: &mut Vec<usize>, m: usize) {
    let pool: Vec<usize> = (0..allowed.len()).filter(|&e| allowed[e]).collect();
    let need = (m - chosen.len()).min(pool.len());
    for k in index::sample(rng, pool.len(), need) {
        allowed[pool[k]] = false;
        chosen.push(pool[k]);
    }
}

/// Topology change: samples with index `>= at` are drawn on a graph with
/// `fraction` of its edges resampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangePoint {
    pub at: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub p: usize,
    pub noise_variance: f64,
    #[serde(default)]
    pub change_points: Vec<ChangePoint>,
}

impl StreamSpec {
    pub fn stationary(p: usize, noise_variance: f64) -> Self {
        StreamSpec {
            p,
            noise_variance,
            change_points: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(param("stream length must be positive"));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(param(format!(
                "noise variance must be >= 0, got {}",
                self.noise_variance
            )));
        }
        let mut last = 0;
        for cp in &self.change_points {
            if cp.at <= last || cp.at >= self.p {
                return Err(param(format!(
                    "change points must be strictly increasing within (0, {}), got {}",
                    self.p, cp.at
                )));
            }
            if !(0.0..=1.0).contains(&cp.fraction) {
                return Err(param(format!(
                    "resample fraction must lie in [0, 1], got {}",
                    cp.fraction
                )));
            }
            last = cp.at;
        }
        Ok(())
    }

    /// `[start, end)` sample ranges of the stationary segments.
    pub fn segment_bounds(&self) -> Vec<(usize, usize)> {
        let mut starts = vec![0];
        starts.extend(self.change_points.iter().map(|c| c.at));
        let mut ends: Vec<usize> = starts[1..].to_vec();
        ends.push(self.p);
        starts.into_iter().zip(ends).collect()
    }
}

/// A stationary stretch of a stream and the graph it was drawn on.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub graph: EdgeVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub signals: Vec<Vec<f64>>,
    pub segments: Vec<Segment>,
}

impl Stream {
    /// Segment containing 0-based sample `index`.
    pub fn segment_of(&self, index: usize) -> &Segment {
        self.segments
            .iter()
            .find(|s| index < s.end)
            .unwrap_or_else(|| self.segments.last().expect("stream has a segment"))
    }

    pub fn truth_at(&self, index: usize) -> &EdgeVector {
        &self.segment_of(index).graph
    }
}

/// Draws a stream whose ground-truth graph is resampled at each change point.
/// All seeds derive from `graph_spec.seed`.
pub fn generate_stream(graph_spec: &GraphModelSpec, stream_spec: &StreamSpec) -> Result<Stream> {
    stream_spec.validate()?;
    let mut graph = generate_graph(graph_spec)?;
    let bounds = stream_spec.segment_bounds();
    let mut signals = Vec::with_capacity(stream_spec.p);
    let mut segments = Vec::with_capacity(bounds.len());
    for (s, &(start, end)) in bounds.iter().enumerate() {
        if s > 0 {
            let cp = stream_spec.change_points[s - 1];
            graph = resample_edges(
                &graph,
                cp.fraction,
                graph_spec,
                derive_seed(graph_spec.seed, 2 * s as u64 + 1),
            )?;
        }
        signals.extend(generate_smooth_signals(
            &graph,
            end - start,
            stream_spec.noise_variance,
            derive_seed(graph_spec.seed, 2 * s as u64 + 2),
        )?);
        segments.push(Segment {
            start,
            end,
            graph: graph.clone(),
        });
    }
    Ok(Stream { signals, segments })
}
