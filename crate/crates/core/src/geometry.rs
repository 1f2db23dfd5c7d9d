//! Point storage, sample pooling, and canonical edge indexing for the
//! complete graph over a pooled sample.
//!
//! Edge order is a pure function of the vertex count and mode, so an edge
//! index is meaningful across every structure derived from the same pooled
//! sample (marginal vectors, neighbourhood sets, gradients).
//!
//! * undirected: all pairs `(i, j)` with `i < j`, lexicographic;
//! * directed: all ordered pairs `(i, j)` with `i != j`, lexicographic.
//!
//! Edges are never materialized; endpoints and indices convert in O(1).

use crate::error::{Error, Result};

/// Whether the complete graph carries one edge per pair or both directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeMode {
    Undirected,
    Directed,
}

/// Distance used to weigh edges. A parameter slot so further norms can be
/// added without touching call sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
}

/// Which of the two pooled samples a point came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    First,
    Second,
}

/// An `n x d` matrix of points, one point per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSample {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl PointSample {
    /// Wrap a row-major coordinate buffer. Rejects non-finite entries and
    /// buffers whose length is not a multiple of `d`.
    pub fn new(data: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        if !data.len().is_multiple_of(d) {
            return Err(Error::InvalidInput(format!(
                "coordinate buffer of length {} is not a multiple of d = {}",
                data.len(),
                d
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite coordinate at flat index {pos}"
            )));
        }
        let n = data.len() / d;
        Ok(PointSample { data, n, d })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(|r| r.len()).unwrap_or(1);
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch {
                    left: d,
                    right: r.len(),
                });
            }
        }
        PointSample::new(rows.concat(), d.max(1))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Two samples pooled in canonical order: all of `X1`, then all of `X2`.
#[derive(Debug, Clone)]
pub struct PooledData {
    points: PointSample,
    n1: usize,
    n2: usize,
    labels: Vec<Label>,
}

/// Pool two samples of equal dimension into one labelled point set.
pub fn pool_samples(x1: &PointSample, x2: &PointSample) -> Result<PooledData> {
    if x1.dim() != x2.dim() {
        return Err(Error::DimensionMismatch {
            left: x1.dim(),
            right: x2.dim(),
        });
    }
    if x1.is_empty() || x2.is_empty() {
        return Err(Error::TooFewPoints {
            required: 1,
            actual: x1.len().min(x2.len()),
        });
    }
    let mut data = Vec::with_capacity((x1.len() + x2.len()) * x1.dim());
    data.extend_from_slice(x1.data());
    data.extend_from_slice(x2.data());
    let mut labels = vec![Label::First; x1.len()];
    labels.extend(std::iter::repeat_n(Label::Second, x2.len()));
    Ok(PooledData {
        points: PointSample::new(data, x1.dim())?,
        n1: x1.len(),
        n2: x2.len(),
        labels,
    })
}

impl PooledData {
    pub fn points(&self) -> &PointSample {
        &self.points
    }

    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    /// The canonical labelling `pi*`: `First` for the initial `n1` points.
    pub fn labels(&self) -> &[Label] {
        &self.labels
    }
}

/// Indicator that an edge joins points with different labels.
#[inline]
pub fn crosses(labels: &[Label], i: usize, j: usize) -> bool {
    labels[i] != labels[j]
}

/// Complete graph over `n` vertices with a distance per edge, in canonical
/// edge order. Distances are raw; temperature scaling happens downstream so
/// one edge system serves many temperatures.
#[derive(Debug, Clone)]
pub struct EdgeSystem {
    mode: EdgeMode,
    n: usize,
    distances: Vec<f64>,
}

impl EdgeSystem {
    /// Build from an explicit distance vector in canonical order.
    /// Used by tests; normal construction goes through [`pairwise_distances`].
    pub fn from_distances(mode: EdgeMode, n: usize, distances: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewPoints {
                required: 2,
                actual: n,
            });
        }
        let expect = match mode {
            EdgeMode::Undirected => n * (n - 1) / 2,
            EdgeMode::Directed => n * (n - 1),
        };
        if distances.len() != expect {
            return Err(Error::InvalidInput(format!(
                "expected {expect} distances for n = {n} ({mode:?}), got {}",
                distances.len()
            )));
        }
        if distances.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::InvalidInput(
                "distances must be finite and nonnegative".into(),
            ));
        }
        if mode == EdgeMode::Directed {
            for e in 0..distances.len() {
                let (i, j) = directed_endpoints(n, e);
                let rev = directed_index(n, j, i);
                if distances[e] != distances[rev] {
                    return Err(Error::InvalidInput(format!(
                        "distance of edge {i}->{j} differs from its reverse"
                    )));
                }
            }
        }
        Ok(EdgeSystem { mode, n, distances })
    }

    pub fn mode(&self) -> EdgeMode {
        self.mode
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.distances.len()
    }

    #[inline]
    pub fn distance(&self, e: usize) -> f64 {
        self.distances[e]
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    /// Endpoints of edge `e`; `(source, target)` in directed mode,
    /// `(i, j)` with `i < j` otherwise.
    #[inline]
    pub fn endpoints(&self, e: usize) -> (usize, usize) {
        match self.mode {
            EdgeMode::Undirected => undirected_endpoints(self.n, e),
            EdgeMode::Directed => directed_endpoints(self.n, e),
        }
    }

    /// Canonical index of the edge between `i` and `j` (from `i` to `j` in
    /// directed mode).
    #[inline]
    pub fn index_of(&self, i: usize, j: usize) -> usize {
        debug_assert!(i != j && i < self.n && j < self.n);
        match self.mode {
            EdgeMode::Undirected => undirected_index(self.n, i.min(j), i.max(j)),
            EdgeMode::Directed => directed_index(self.n, i, j),
        }
    }

    /// Index of the reverse edge; total in directed mode, `None` otherwise.
    #[inline]
    pub fn reverse(&self, e: usize) -> Option<usize> {
        match self.mode {
            EdgeMode::Undirected => None,
            EdgeMode::Directed => {
                let (i, j) = directed_endpoints(self.n, e);
                Some(directed_index(self.n, j, i))
            }
        }
    }

    /// Iterate `(edge index, (endpoint, endpoint), distance)` in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, (usize, usize), f64)> + '_ {
        (0..self.edge_count()).map(move |e| (e, self.endpoints(e), self.distances[e]))
    }

    pub(crate) fn expect_mode(&self, expected: EdgeMode) -> Result<()> {
        if self.mode != expected {
            return Err(Error::WrongMode {
                expected,
                actual: self.mode,
            });
        }
        Ok(())
    }
}

/// Endpoints of edge `e` in the canonical order for `(mode, n)`, without an
/// [`EdgeSystem`] in hand.
#[inline]
pub fn edge_endpoints(mode: EdgeMode, n: usize, e: usize) -> (usize, usize) {
    match mode {
        EdgeMode::Undirected => undirected_endpoints(n, e),
        EdgeMode::Directed => directed_endpoints(n, e),
    }
}

/// Canonical index of the edge between `i` and `j` for `(mode, n)`.
#[inline]
pub fn edge_index(mode: EdgeMode, n: usize, i: usize, j: usize) -> usize {
    match mode {
        EdgeMode::Undirected => undirected_index(n, i.min(j), i.max(j)),
        EdgeMode::Directed => directed_index(n, i, j),
    }
}

#[inline]
fn undirected_index(n: usize, i: usize, j: usize) -> usize {
    // Edges (i, *) start after the i rows above, each row t holding n-1-t edges.
    i * (n - 1) - i * (i.wrapping_sub(1)) / 2 + (j - i - 1)
}

#[inline]
fn undirected_endpoints(n: usize, e: usize) -> (usize, usize) {
    // Invert the row-offset formula; the float seed is then fixed up exactly.
    let mut i = {
        let nf = n as f64;
        let ef = e as f64;
        let disc = (2.0 * nf - 1.0) * (2.0 * nf - 1.0) - 8.0 * ef;
        (((2.0 * nf - 1.0) - disc.max(0.0).sqrt()) / 2.0).floor() as usize
    };
    i = i.min(n - 2);
    while undirected_index(n, i, i + 1) > e {
        i -= 1;
    }
    while i + 1 < n - 1 && undirected_index(n, i + 1, i + 2) <= e {
        i += 1;
    }
    let j = e - undirected_index(n, i, i + 1) + i + 1;
    (i, j)
}

#[inline]
fn directed_index(n: usize, i: usize, j: usize) -> usize {
    i * (n - 1) + if j < i { j } else { j - 1 }
}

#[inline]
fn directed_endpoints(n: usize, e: usize) -> (usize, usize) {
    let i = e / (n - 1);
    let r = e % (n - 1);
    let j = if r < i { r } else { r + 1 };
    (i, j)
}

/// Chain per-edge distance gradients to point coordinates through the
/// Euclidean norm: `d(e) = ||x_i - x_j||`, so each edge contributes along
/// the unit direction between its endpoints. Coincident points contribute
/// zero (the subgradient chosen for the kink at distance zero).
pub fn distance_grad_to_points(
    es: &EdgeSystem,
    sample: &PointSample,
    grad_d: &[f64],
) -> crate::linalg::Matrix {
    let (n, d) = (sample.len(), sample.dim());
    let mut out = crate::linalg::Matrix::zeros(n, d);
    for (e, (i, j), dist) in es.iter() {
        let g = grad_d[e];
        if g == 0.0 || dist == 0.0 {
            continue;
        }
        let xi = sample.row(i);
        let xj = sample.row(j);
        for c in 0..d {
            let u = (xi[c] - xj[c]) / dist;
            out.add_to(i, c, g * u);
            out.add_to(j, c, -g * u);
        }
    }
    out
}

/// Euclidean distance between two coordinate slices.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// All pairwise distances of a sample as an [`EdgeSystem`] in the requested
/// mode. Needs at least two points.
pub fn pairwise_distances(
    sample: &PointSample,
    metric: Metric,
    mode: EdgeMode,
) -> Result<EdgeSystem> {
    let Metric::Euclidean = metric;
    let n = sample.len();
    if n < 2 {
        return Err(Error::TooFewPoints {
            required: 2,
            actual: n,
        });
    }
    let distances = match mode {
        EdgeMode::Undirected => {
            let mut d = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                let a = sample.row(i);
                for j in (i + 1)..n {
                    d.push(euclidean(a, sample.row(j)));
                }
            }
            d
        }
        EdgeMode::Directed => {
            let mut d = vec![0.0; n * (n - 1)];
            for i in 0..n {
                let a = sample.row(i);
                for j in (i + 1)..n {
                    let v = euclidean(a, sample.row(j));
                    d[directed_index(n, i, j)] = v;
                    d[directed_index(n, j, i)] = v;
                }
            }
            d
        }
    };
    Ok(EdgeSystem { mode, n, distances })
}
