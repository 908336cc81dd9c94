//! Vectorized undirected graphs.
//!
//! A weighted, hollow, symmetric adjacency matrix on `n` nodes is stored as
//! the `r = n(n-1)/2` entries of its strict upper triangle, in lexicographic
//! pair order `(0,1), (0,2), ..., (0,n-1), (1,2), ...`. Every serialized edge
//! vector in this crate uses that layout.

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};

/// Bijection between edge slots `0..r` and node pairs `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeIndexing {
    n: usize,
}

impl EdgeIndexing {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "a graph needs at least 2 nodes, got {n}"
            )));
        }
        Ok(EdgeIndexing { n })
    }

    /// Recovers the node count from a slot count, if `r = n(n-1)/2` for some `n >= 2`.
    pub fn from_slots(r: usize) -> Result<Self> {
        let n = ((1.0 + (1.0 + 8.0 * r as f64).sqrt()) / 2.0).round() as usize;
        if n >= 2 && n * (n - 1) / 2 == r {
            Ok(EdgeIndexing { n })
        } else {
            Err(Error::InvalidParameter(format!(
                "{r} is not a triangular edge count"
            )))
        }
    }

    #[inline]
    pub fn nodes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn slots(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    /// Slot of the pair `(i, j)`; requires `i < j < n`.
    pub fn slot_of(&self, i: usize, j: usize) -> Result<usize> {
        if i >= j || j >= self.n {
            return Err(Error::InvalidPair { i, j, n: self.n });
        }
        Ok(self.row_start(i) + (j - i - 1))
    }

    /// Node pair stored at slot `e`.
    ///
    /// # Panics
    ///
    /// Panics if `e >= r`.
    pub fn pair_of(&self, e: usize) -> (usize, usize) {
        assert!(e < self.slots(), "edge slot {e} out of range");
        let m = (2 * self.n - 1) as f64;
        let mut i = ((m - (m * m - 8.0 * e as f64).max(0.0).sqrt()) / 2.0).floor() as usize;
        // float guess can be off by one near row boundaries
        while i > 0 && self.row_start(i) > e {
            i -= 1;
        }
        while i + 1 < self.n && self.row_start(i + 1) <= e {
            i += 1;
        }
        (i, e - self.row_start(i) + i + 1)
    }

    /// Iterates `(slot, i, j)` in slot order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let n = self.n;
        (0..n)
            .flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
            .enumerate()
            .map(|(e, (i, j))| (e, i, j))
    }

    #[inline]
    fn row_start(&self, i: usize) -> usize {
        i * (2 * self.n - i - 1) / 2
    }
}

/// Nonnegative upper-triangular edge weights of an undirected graph.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeVector {
    indexing: EdgeIndexing,
    values: Vec<f64>,
}

impl EdgeVector {
    /// Wraps `values`, checking the length against `n` and that every entry is finite and `>= 0`.
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        let indexing = EdgeIndexing::new(n)?;
        check_len("edge vector", indexing.slots(), values.len())?;
        if let Some(index) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidEntry {
                what: "edge vector",
                index,
            });
        }
        Ok(EdgeVector { indexing, values })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        let indexing = EdgeIndexing::new(n)?;
        Ok(EdgeVector {
            indexing,
            values: vec![0.0; indexing.slots()],
        })
    }

    /// Builds an edge vector from `(i, j, weight)` triples; later duplicates overwrite earlier ones.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut w = Self::zeros(n)?;
        for (i, j, weight) in edges {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            let e = w.indexing.slot_of(a, b)?;
            if !weight.is_finite() || weight < 0.0 {
                return Err(Error::InvalidEntry {
                    what: "edge weight",
                    index: e,
                });
            }
            w.values[e] = weight;
        }
        Ok(w)
    }

    pub(crate) fn from_vec_unchecked(indexing: EdgeIndexing, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), indexing.slots());
        EdgeVector { indexing, values }
    }

    #[inline]
    pub fn indexing(&self) -> EdgeIndexing {
        self.indexing
    }

    #[inline]
    pub fn nodes(&self) -> usize {
        self.indexing.nodes()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Weight of the (unordered) pair `{i, j}`; zero on the diagonal.
    pub fn weight(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return if i < self.nodes() {
                Ok(0.0)
            } else {
                Err(Error::InvalidPair { i, j, n: self.nodes() })
            };
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        Ok(self.values[self.indexing.slot_of(a, b)?])
    }

    /// Number of strictly positive weights.
    pub fn edge_count(&self) -> usize {
        self.values.iter().filter(|v| **v > 0.0).count()
    }

    pub fn max_weight(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Euclidean distance to another edge vector on the same node set.
    pub fn distance(&self, other: &EdgeVector) -> Result<f64> {
        check_len("edge vector", self.len(), other.len())?;
        Ok(l2_distance(&self.values, &other.values))
    }

    /// `(i, j, weight)` for every strictly positive weight, in slot order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.indexing
            .pairs()
            .filter_map(|(e, i, j)| (self.values[e] > 0.0).then(|| (i, j, self.values[e])))
    }

    /// Symmetric hollow adjacency matrix.
    pub fn to_adjacency(&self) -> DMatrix<f64> {
        let n = self.nodes();
        let mut a = DMatrix::zeros(n, n);
        for (e, i, j) in self.indexing.pairs() {
            a[(i, j)] = self.values[e];
            a[(j, i)] = self.values[e];
        }
        a
    }
}

/// The linear map `S` sending edge weights to nodal degrees.
///
/// Each column of `S` has exactly two ones (the endpoints of the edge), so
/// `S` is applied by a single sweep over the slots and never stored.
/// Its squared spectral norm is `2(n-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegreeMap {
    indexing: EdgeIndexing,
}

impl DegreeMap {
    pub fn new(n: usize) -> Result<Self> {
        Ok(DegreeMap {
            indexing: EdgeIndexing::new(n)?,
        })
    }

    pub fn indexing(&self) -> EdgeIndexing {
        self.indexing
    }

    pub fn nodes(&self) -> usize {
        self.indexing.nodes()
    }

    pub fn slots(&self) -> usize {
        self.indexing.slots()
    }

    /// `out = S w`.
    pub fn apply_into(&self, w: &[f64], out: &mut [f64]) {
        let n = self.nodes();
        assert_eq!(w.len(), self.slots());
        assert_eq!(out.len(), n);
        out.iter_mut().for_each(|d| *d = 0.0);
        let mut e = 0;
        for i in 0..n {
            let row = &w[e..e + (n - i - 1)];
            let mut acc = 0.0;
            for (off, &we) in row.iter().enumerate() {
                acc += we;
                out[i + 1 + off] += we;
            }
            out[i] += acc;
            e += n - i - 1;
        }
    }

    /// `out = Sᵀ u`, i.e. `out[e] = u[i] + u[j]` for slot `e ↔ (i, j)`.
    pub fn adjoint_into(&self, u: &[f64], out: &mut [f64]) {
        let n = self.nodes();
        assert_eq!(u.len(), n);
        assert_eq!(out.len(), self.slots());
        let mut e = 0;
        for i in 0..n {
            let ui = u[i];
            let len = n - i - 1;
            for (o, &uj) in out[e..e + len].iter_mut().zip(&u[i + 1..]) {
                *o = ui + uj;
            }
            e += len;
        }
    }

    pub fn apply(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_len("edge vector", self.slots(), w.len())?;
        let mut out = vec![0.0; self.nodes()];
        self.apply_into(w, &mut out);
        Ok(out)
    }

    pub fn adjoint(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len("node vector", self.nodes(), u.len())?;
        let mut out = vec![0.0; self.slots()];
        self.adjoint_into(u, &mut out);
        Ok(out)
    }

    /// Estimates `‖S‖₂²`, the largest eigenvalue of `SᵀS`, by power iteration.
    pub fn operator_norm_sq(&self, max_iter: usize, tol: f64) -> f64 {
        let r = self.slots();
        let mut x: Vec<f64> = (0..r).map(|e| 1.0 + (e % 3) as f64).collect();
        normalize(&mut x);
        let mut deg = vec![0.0; self.nodes()];
        let mut y = vec![0.0; r];
        let mut estimate = 0.0;
        for _ in 0..max_iter {
            self.apply_into(&x, &mut deg);
            self.adjoint_into(&deg, &mut y);
            let next = dot(&x, &y);
            std::mem::swap(&mut x, &mut y);
            normalize(&mut x);
            let done = (next - estimate).abs() <= tol * next.abs();
            estimate = next;
            if done {
                break;
            }
        }
        estimate
    }
}

/// Nodal degrees `S w` (row sums of the adjacency matrix).
pub fn degree(w: &EdgeVector) -> Vec<f64> {
    let map = DegreeMap {
        indexing: w.indexing,
    };
    let mut d = vec![0.0; w.nodes()];
    map.apply_into(w.as_slice(), &mut d);
    d
}

/// `Sᵀ u` for a node vector `u` of length `n`.
pub fn degree_adjoint(u: &[f64]) -> Result<Vec<f64>> {
    DegreeMap::new(u.len())?.adjoint(u)
}

/// Combinatorial Laplacian `diag(d) - W`. Dense, `O(n²)`; meant for tests and metrics.
pub fn laplacian(w: &EdgeVector) -> DMatrix<f64> {
    let mut l = -w.to_adjacency();
    for (i, d) in degree(w).into_iter().enumerate() {
        l[(i, i)] = d;
    }
    l
}

/// Total variation `½ Σ_{i≠j} W_ij (x_i − x_j)²` of a signal on the graph.
pub fn total_variation(w: &EdgeVector, x: &[f64]) -> Result<f64> {
    check_len("graph signal", w.nodes(), x.len())?;
    let values = w.as_slice();
    Ok(w
        .indexing
        .pairs()
        .map(|(e, i, j)| {
            let diff = x[i] - x[j];
            values[e] * diff * diff
        })
        .sum())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn normalize(x: &mut [f64]) {
    let nrm = norm(x);
    if nrm > 0.0 {
        x.iter_mut().for_each(|v| *v /= nrm);
    }
}
