//! Classical (non-smoothed) Friedman-Rafsky and k-NN tests: neighbourhood
//! construction, the raw cross-count statistic, and the permutation test.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{crosses, edge_endpoints, EdgeMode, EdgeSystem, Label, PooledData};

/// Which construction produced a neighbourhood set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighbourhoodKind {
    Mst,
    Knn(usize),
}

/// A subset of the edges of an [`EdgeSystem`], by canonical edge index.
#[derive(Debug, Clone)]
pub struct NeighbourhoodSet {
    mode: EdgeMode,
    n: usize,
    edge_indices: Vec<usize>,
    kind: NeighbourhoodKind,
}

impl NeighbourhoodSet {
    pub fn kind(&self) -> NeighbourhoodKind {
        self.kind
    }

    pub fn edge_indices(&self) -> &[usize] {
        &self.edge_indices
    }

    pub fn len(&self) -> usize {
        self.edge_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_indices.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> EdgeMode {
        self.mode
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn root(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if the two vertices were already connected.
    fn unite(&mut self, x: usize, y: usize) -> bool {
        let (rx, ry) = (self.root(x), self.root(y));
        if rx == ry {
            return false;
        }
        match self.rank[rx].cmp(&self.rank[ry]) {
            std::cmp::Ordering::Less => self.parent[rx] = ry,
            std::cmp::Ordering::Greater => self.parent[ry] = rx,
            std::cmp::Ordering::Equal => {
                self.parent[ry] = rx;
                self.rank[rx] += 1;
            }
        }
        true
    }
}

/// Minimum spanning tree by Kruskal's algorithm. Among equal-weight edges the
/// smaller canonical index wins, so the output is deterministic even with ties.
pub fn mst_kruskal(es: &EdgeSystem) -> Result<NeighbourhoodSet> {
    es.expect_mode(EdgeMode::Undirected)?;
    let n = es.vertex_count();
    let mut order: Vec<u32> = (0..es.edge_count() as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        es.distance(a as usize)
            .total_cmp(&es.distance(b as usize))
            .then(a.cmp(&b))
    });
    let mut uf = UnionFind::new(n);
    let mut tree = Vec::with_capacity(n - 1);
    for &e in &order {
        let (i, j) = es.endpoints(e as usize);
        if uf.unite(i, j) {
            tree.push(e as usize);
            if tree.len() == n - 1 {
                break;
            }
        }
    }
    tree.sort_unstable();
    Ok(NeighbourhoodSet {
        mode: EdgeMode::Undirected,
        n,
        edge_indices: tree,
        kind: NeighbourhoodKind::Mst,
    })
}

/// Minimum spanning tree by dense Prim: O(n^2) time, no edge sort. Produces
/// the same tree as [`mst_kruskal`] whenever edge weights are distinct; used
/// for large samples where sorting all pairs is wasteful.
pub fn mst_prim(es: &EdgeSystem) -> Result<NeighbourhoodSet> {
    es.expect_mode(EdgeMode::Undirected)?;
    let n = es.vertex_count();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut best_from = vec![0usize; n];
    let mut tree = Vec::with_capacity(n - 1);
    in_tree[0] = true;
    for j in 1..n {
        best[j] = es.distance(es.index_of(0, j));
    }
    for _ in 1..n {
        let mut v = usize::MAX;
        let mut dv = f64::INFINITY;
        for j in 0..n {
            if !in_tree[j] && best[j] < dv {
                dv = best[j];
                v = j;
            }
        }
        in_tree[v] = true;
        tree.push(es.index_of(best_from[v], v));
        for j in 0..n {
            if !in_tree[j] {
                let d = es.distance(es.index_of(v, j));
                if d < best[j] {
                    best[j] = d;
                    best_from[j] = v;
                }
            }
        }
    }
    tree.sort_unstable();
    Ok(NeighbourhoodSet {
        mode: EdgeMode::Undirected,
        n,
        edge_indices: tree,
        kind: NeighbourhoodKind::Mst,
    })
}

/// Directed k-nearest-neighbour edges: `i -> j` is selected iff `i` is among
/// the `k` closest candidates of the target `j`. Distance ties break toward
/// the smaller source index.
pub fn knn_edges(es: &EdgeSystem, k: usize) -> Result<NeighbourhoodSet> {
    es.expect_mode(EdgeMode::Directed)?;
    let n = es.vertex_count();
    if k == 0 || k > n - 1 {
        return Err(Error::InvalidParameter(format!(
            "k = {k} out of range 1..={}",
            n - 1
        )));
    }
    let mut selected = Vec::with_capacity(k * n);
    let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for target in 0..n {
        candidates.clear();
        for source in 0..n {
            if source != target {
                candidates.push((es.distance(es.index_of(source, target)), source));
            }
        }
        candidates.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, source) in candidates.iter().take(k) {
            selected.push(es.index_of(source, target));
        }
    }
    selected.sort_unstable();
    Ok(NeighbourhoodSet {
        mode: EdgeMode::Directed,
        n,
        edge_indices: selected,
        kind: NeighbourhoodKind::Knn(k),
    })
}

/// The raw statistic `T`: how many selected edges join the two samples.
pub fn cross_count(set: &NeighbourhoodSet, data: &PooledData) -> Result<usize> {
    if set.vertex_count() != data.n() {
        return Err(Error::InvalidInput(format!(
            "neighbourhood over {} vertices does not match pooled n = {}",
            set.vertex_count(),
            data.n()
        )));
    }
    Ok(cross_count_labels(set, data.labels()))
}

/// As [`cross_count`] but against an arbitrary labelling; used by the
/// permutation machinery.
pub fn cross_count_labels(set: &NeighbourhoodSet, labels: &[Label]) -> usize {
    set.edge_indices
        .iter()
        .filter(|&&e| {
            let (i, j) = edge_endpoints(set.mode, set.n, e);
            crosses(labels, i, j)
        })
        .count()
}

/// Permutation p-value with add-one smoothing. Draws `n_perms` uniformly
/// random labellings with exactly `n1` first-sample labels and counts how
/// often the statistic falls at or below the observed value, so small
/// observed statistics give small p-values.
pub fn permutation_pvalue<F: FnMut(&[Label]) -> f64>(
    mut stat: F,
    data: &PooledData,
    n_perms: usize,
    seed: u64,
) -> Result<f64> {
    if n_perms == 0 {
        return Err(Error::InvalidParameter(
            "need at least one permutation".into(),
        ));
    }
    let observed = stat(data.labels());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = data.labels().to_vec();
    let mut at_or_below = 0usize;
    for _ in 0..n_perms {
        labels.shuffle(&mut rng);
        if stat(&labels) <= observed {
            at_or_below += 1;
        }
    }
    Ok((1 + at_or_below) as f64 / (n_perms + 1) as f64)
}
