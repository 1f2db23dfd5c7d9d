//! The smoothed Friedman-Rafsky test: exact inference in the Gibbs
//! spanning-tree model through the grounded Laplacian.
//!
//! With edge weights `w_e = exp(-d_e / lambda)` the model is a determinantal
//! point process over edges, so edge marginals are weighted effective
//! resistances and pairwise moments are 2x2 kernel minors. Weights are
//! rescaled by the minimum distance before exponentiation, which leaves all
//! marginals unchanged (every spanning tree has exactly n-1 edges) but keeps
//! the exponentials representable at small temperatures.
//!
//! Deep in the low-temperature regime, where every non-MST edge is separated
//! from the tree by a margin that dwarfs `lambda`, the distribution carries
//! all of its f64 mass on the minimum spanning tree; inference switches to
//! that hard selection and gradients are defined as zero.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classical::mst_kruskal;
use crate::error::{Error, Result};
use crate::geometry::{crosses, distance_grad_to_points, EdgeMode, EdgeSystem, PooledData};
use crate::linalg::{cholesky, CholeskyFactor, Matrix};
use crate::marginals::MarginalVector;
use crate::smooth_knn::HARD_LOG_LIMIT;

/// Laplacian of the weight graph with the last vertex removed; positive
/// definite whenever the positive-weight support is connected.
pub struct GroundedLaplacian {
    matrix: Matrix,
    weights: Vec<f64>,
    lambda: f64,
}

impl GroundedLaplacian {
    /// Assemble the grounded Laplacian for an undirected edge system at
    /// temperature `lambda`. Weights that underflow to zero are tolerated as
    /// long as the remaining support stays connected.
    pub fn new(es: &EdgeSystem, lambda: f64) -> Result<Self> {
        es.expect_mode(EdgeMode::Undirected)?;
        validate_lambda(lambda)?;
        let n = es.vertex_count();
        let d_min = es
            .distances()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let mut weights = Vec::with_capacity(es.edge_count());
        let mut underflowed = false;
        for &d in es.distances() {
            let w = (-(d - d_min) / lambda).exp();
            underflowed |= w == 0.0;
            weights.push(w);
        }
        if underflowed && !support_connected(es, &weights) {
            return Err(Error::IllConditioned {
                lambda,
                reason: "edge weights underflowed to zero and disconnected the graph".into(),
            });
        }
        let mut matrix = Matrix::zeros(n - 1, n - 1);
        for (e, (i, j), _) in es.iter() {
            let w = weights[e];
            if w == 0.0 {
                continue;
            }
            if j < n - 1 {
                matrix.add_to(i, i, w);
                matrix.add_to(j, j, w);
                matrix.add_to(i, j, -w);
                matrix.add_to(j, i, -w);
            } else {
                // Edge into the grounded vertex contributes only its degree term.
                matrix.add_to(i, i, w);
            }
        }
        Ok(GroundedLaplacian {
            matrix,
            weights,
            lambda,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// Rescaled edge weights `exp(-(d_e - d_min) / lambda)`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The removed vertex: always the last one, for determinism.
    pub fn grounded_vertex(&self) -> usize {
        self.matrix.rows()
    }

    pub fn factorize(&self) -> Result<CholeskyFactor> {
        cholesky(&self.matrix).ok_or_else(|| Error::IllConditioned {
            lambda: self.lambda,
            reason: "Cholesky factorization of the grounded Laplacian failed".into(),
        })
    }
}

fn validate_lambda(lambda: f64) -> Result<()> {
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "temperature lambda = {lambda} must be positive and finite"
        )));
    }
    Ok(())
}

fn support_connected(es: &EdgeSystem, weights: &[f64]) -> bool {
    let n = es.vertex_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = n;
    for (e, (i, j), _) in es.iter() {
        if weights[e] > 0.0 {
            let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
            if ri != rj {
                parent[ri] = rj;
                components -= 1;
                if components == 1 {
                    return true;
                }
            }
        }
    }
    components == 1
}

/// Either exact DPP state or the hard MST selection at extreme temperatures.
enum Inference {
    Hard { in_tree: Vec<bool> },
    Smooth { lap: GroundedLaplacian, inv: Matrix },
}

fn infer(es: &EdgeSystem, lambda: f64) -> Result<Inference> {
    es.expect_mode(EdgeMode::Undirected)?;
    validate_lambda(lambda)?;
    let n = es.vertex_count();
    let (mut d_min, mut d_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &d in es.distances() {
        d_min = d_min.min(d);
        d_max = d_max.max(d);
    }
    // Cheap pre-filter: the MST margin is at most the distance spread, so the
    // hard regime is impossible while the spread is representable.
    if (d_max - d_min) / lambda > HARD_LOG_LIMIT {
        let mst = mst_kruskal(es)?;
        let mut in_tree = vec![false; es.edge_count()];
        for &e in mst.edge_indices() {
            in_tree[e] = true;
        }
        let margin = mst_margin(es, &in_tree);
        if margin / lambda > HARD_LOG_LIMIT + (n as f64).ln() {
            return Ok(Inference::Hard { in_tree });
        }
    }
    let lap = GroundedLaplacian::new(es, lambda)?;
    let inv = lap.factorize()?.inverse();
    Ok(Inference::Smooth { lap, inv })
}

/// Smallest slack `d_e - max path distance` over non-tree edges: how far the
/// MST is from being challenged by any single swap.
fn mst_margin(es: &EdgeSystem, in_tree: &[bool]) -> f64 {
    let n = es.vertex_count();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (e, (i, j), d) in es.iter() {
        if in_tree[e] {
            adj[i].push((j, d));
            adj[j].push((i, d));
        }
    }
    let mut margin = f64::INFINITY;
    let mut path_max = vec![0.0f64; n];
    let mut stack: Vec<usize> = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    for root in 0..n {
        visited.iter_mut().for_each(|v| *v = false);
        visited[root] = true;
        path_max[root] = 0.0;
        stack.push(root);
        while let Some(u) = stack.pop() {
            for &(v, d) in &adj[u] {
                if !visited[v] {
                    visited[v] = true;
                    path_max[v] = path_max[u].max(d);
                    stack.push(v);
                }
            }
        }
        for v in (root + 1)..n {
            let e = es.index_of(root, v);
            if !in_tree[e] {
                margin = margin.min(es.distance(e) - path_max[v]);
            }
        }
    }
    margin
}

#[inline]
fn resistance(inv: &Matrix, grounded: usize, i: usize, j: usize) -> f64 {
    // (u_i - u_j)^T L^{-1} (u_i - u_j) with the grounded coordinate dropped.
    if j == grounded {
        inv.get(i, i)
    } else if i == grounded {
        inv.get(j, j)
    } else {
        inv.get(i, i) + inv.get(j, j) - 2.0 * inv.get(i, j)
    }
}

#[inline]
fn cross_resistance(inv: &Matrix, grounded: usize, a: (usize, usize), b: (usize, usize)) -> f64 {
    // (u_i - u_j)^T L^{-1} (u_k - u_l), grounded coordinates dropped.
    let entry = |r: usize, c: usize| -> f64 {
        if r == grounded || c == grounded {
            0.0
        } else {
            inv.get(r, c)
        }
    };
    entry(a.0, b.0) - entry(a.0, b.1) - entry(a.1, b.0) + entry(a.1, b.1)
}

/// Exact spanning-tree edge marginals under the Gibbs measure; they sum to
/// `n - 1`.
pub fn st_marginals(es: &EdgeSystem, lambda: f64) -> Result<MarginalVector> {
    let values = match infer(es, lambda)? {
        Inference::Hard { in_tree } => in_tree
            .iter()
            .map(|&t| if t { 1.0 } else { 0.0 })
            .collect(),
        Inference::Smooth { lap, inv } => {
            let grounded = es.vertex_count() - 1;
            es.iter()
                .map(|(e, (i, j), _)| {
                    (lap.weights()[e] * resistance(&inv, grounded, i, j)).clamp(0.0, 1.0)
                })
                .collect()
        }
    };
    Ok(MarginalVector::new(values, lambda))
}

/// Joint inclusion probability `P(e in U, f in U)`: the 2x2 minor of the DPP
/// kernel.
pub fn st_pair_moment(es: &EdgeSystem, lambda: f64, e: usize, f: usize) -> Result<f64> {
    if e == f || e >= es.edge_count() || f >= es.edge_count() {
        return Err(Error::InvalidParameter(format!(
            "pair moment needs two distinct valid edges, got {e} and {f}"
        )));
    }
    match infer(es, lambda)? {
        Inference::Hard { in_tree } => {
            Ok(if in_tree[e] && in_tree[f] { 1.0 } else { 0.0 })
        }
        Inference::Smooth { lap, inv } => {
            let grounded = es.vertex_count() - 1;
            let (ei, ej) = es.endpoints(e);
            let (fi, fj) = es.endpoints(f);
            let mu_e = lap.weights()[e] * resistance(&inv, grounded, ei, ej);
            let mu_f = lap.weights()[f] * resistance(&inv, grounded, fi, fj);
            let k_ef = (lap.weights()[e] * lap.weights()[f]).sqrt()
                * cross_resistance(&inv, grounded, (ei, ej), (fi, fj));
            Ok((mu_e * mu_f - k_ef * k_ef).clamp(0.0, 1.0))
        }
    }
}

/// The smoothed FR statistic `T = sum_e Delta(e) mu_e` with its marginals.
pub fn smooth_fr_statistic(
    es: &EdgeSystem,
    data: &PooledData,
    lambda: f64,
) -> Result<(f64, MarginalVector)> {
    check_pooled(es, data)?;
    let mu = st_marginals(es, lambda)?;
    let labels = data.labels();
    let t = es
        .iter()
        .filter(|&(_, (i, j), _)| crosses(labels, i, j))
        .map(|(e, _, _)| mu.values()[e])
        .sum();
    Ok((t, mu))
}

fn check_pooled(es: &EdgeSystem, data: &PooledData) -> Result<()> {
    if es.vertex_count() != data.n() {
        return Err(Error::InvalidInput(format!(
            "edge system over {} vertices does not match pooled n = {}",
            es.vertex_count(),
            data.n()
        )));
    }
    Ok(())
}

/// Gradient of `sum_e cotangent_e mu_e` with respect to edge distances.
///
/// Uses the exponential-family identity: with `theta = -d / lambda` the
/// Jacobian entry is the indicator covariance, so
/// `d mu_e / d d_f = -(delta_ef mu_e - K_ef^2) / lambda`. The inner sum over
/// edges collapses into `w_f b_f^T (M L_c M) b_f` with `L_c` the Laplacian of
/// the cotangent-weighted graph, keeping the whole pass at `O(n^3 + |E|)`.
pub fn smooth_fr_vjp(
    es: &EdgeSystem,
    lambda: f64,
    cotangent: &[f64],
) -> Result<(MarginalVector, Vec<f64>)> {
    if cotangent.len() != es.edge_count() {
        return Err(Error::InvalidInput(format!(
            "cotangent length {} does not match edge count {}",
            cotangent.len(),
            es.edge_count()
        )));
    }
    match infer(es, lambda)? {
        Inference::Hard { in_tree } => {
            let values = in_tree
                .iter()
                .map(|&t| if t { 1.0 } else { 0.0 })
                .collect();
            Ok((
                MarginalVector::new(values, lambda),
                vec![0.0; es.edge_count()],
            ))
        }
        Inference::Smooth { lap, inv } => {
            let n = es.vertex_count();
            let grounded = n - 1;
            let mut mu = vec![0.0; es.edge_count()];
            for (e, (i, j), _) in es.iter() {
                mu[e] = (lap.weights()[e] * resistance(&inv, grounded, i, j)).clamp(0.0, 1.0);
            }
            // Grounded Laplacian of the cotangent-weighted support.
            let mut lc = Matrix::zeros(n - 1, n - 1);
            for (e, (i, j), _) in es.iter() {
                let cw = cotangent[e] * lap.weights()[e];
                if cw == 0.0 {
                    continue;
                }
                if j < grounded {
                    lc.add_to(i, i, cw);
                    lc.add_to(j, j, cw);
                    lc.add_to(i, j, -cw);
                    lc.add_to(j, i, -cw);
                } else {
                    lc.add_to(i, i, cw);
                }
            }
            let mlm = inv.matmul(&lc).matmul(&inv);
            let mut grad = vec![0.0; es.edge_count()];
            for (f, (i, j), _) in es.iter() {
                let quad = lap.weights()[f] * resistance_of(&mlm, grounded, i, j);
                grad[f] = -(cotangent[f] * mu[f] - quad) / lambda;
            }
            Ok((MarginalVector::new(mu, lambda), grad))
        }
    }
}

#[inline]
fn resistance_of(m: &Matrix, grounded: usize, i: usize, j: usize) -> f64 {
    if j == grounded {
        m.get(i, i)
    } else if i == grounded {
        m.get(j, j)
    } else {
        m.get(i, i) + m.get(j, j) - m.get(i, j) - m.get(j, i)
    }
}

/// Gradients of the smoothed FR statistic with respect to distances and
/// points, scaled by `upstream`.
pub fn smooth_fr_backward(
    es: &EdgeSystem,
    data: &PooledData,
    lambda: f64,
    upstream: f64,
) -> Result<(Vec<f64>, Matrix)> {
    check_pooled(es, data)?;
    let labels = data.labels();
    let cotangent: Vec<f64> = (0..es.edge_count())
        .map(|e| {
            let (i, j) = es.endpoints(e);
            if crosses(labels, i, j) {
                upstream
            } else {
                0.0
            }
        })
        .collect();
    let (_, grad_d) = smooth_fr_vjp(es, lambda, &cotangent)?;
    let grad_points = distance_grad_to_points(es, data.points(), &grad_d);
    Ok((grad_d, grad_points))
}

/// Randomized approximation of all spanning-tree marginals at once via a
/// sign-matrix random projection: `mu_e ~ w_e ||Z (u_i - u_j)||^2` with
/// projection dimension `p = ceil(24 ln n / eps^2)`.
pub fn approx_marginals_jl(
    es: &EdgeSystem,
    lambda: f64,
    epsilon: f64,
    seed: u64,
) -> Result<MarginalVector> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon = {epsilon} must lie in (0, 1)"
        )));
    }
    let n = es.vertex_count();
    match infer(es, lambda)? {
        Inference::Hard { in_tree } => Ok(MarginalVector::new(
            in_tree
                .iter()
                .map(|&t| if t { 1.0 } else { 0.0 })
                .collect(),
            lambda,
        )),
        Inference::Smooth { lap, .. } => {
            let p = (24.0 * (n as f64).ln() / (epsilon * epsilon)).ceil() as usize;
            let factor = lap.factorize()?;
            let scale = 1.0 / (p as f64).sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // z-rows: one p-vector per non-grounded vertex.
            let mut z = Matrix::zeros(n - 1, p);
            let mut col = vec![0.0; n - 1];
            let sqrt_w: Vec<f64> = lap.weights().iter().map(|w| w.sqrt()).collect();
            for c in 0..p {
                col.iter_mut().for_each(|v| *v = 0.0);
                for (e, (i, j), _) in es.iter() {
                    let sign = if rng.gen::<bool>() { scale } else { -scale };
                    let v = sqrt_w[e] * sign;
                    if i < n - 1 {
                        col[i] += v;
                    }
                    if j < n - 1 {
                        col[j] -= v;
                    }
                }
                factor.solve_in_place(&mut col);
                for r in 0..n - 1 {
                    z.set(r, c, col[r]);
                }
            }
            let mut values = vec![0.0; es.edge_count()];
            for (e, (i, j), _) in es.iter() {
                let norm_sq = if j == n - 1 {
                    z.row(i).iter().map(|v| v * v).sum::<f64>()
                } else {
                    z.row(i)
                        .iter()
                        .zip(z.row(j))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                };
                values[e] = (lap.weights()[e] * norm_sq).clamp(0.0, 1.0);
            }
            Ok(MarginalVector::new(values, lambda))
        }
    }
}
