//! Brute-force reference implementations used by the test suites.
//!
//! Everything here is deliberately independent of the production inference
//! paths: spanning-tree quantities come from enumerating all labeled trees
//! through Prüfer sequences, subset models from enumerating subsets, and
//! derivatives from central finite differences. Exponential in the input
//! size; intended for toy instances only.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{crosses, EdgeMode, EdgeSystem, Label};
use crate::linalg::Matrix;

/// All labeled spanning trees of the complete graph on `n` vertices, as edge
/// lists, decoded from every Prüfer sequence. There are `n^(n-2)` of them.
pub fn labeled_trees(n: usize) -> Vec<Vec<(usize, usize)>> {
    assert!((2..=8).contains(&n), "tree enumeration is for toy sizes");
    if n == 2 {
        return vec![vec![(0, 1)]];
    }
    let len = n - 2;
    let total = n.pow(len as u32);
    let mut trees = Vec::with_capacity(total);
    let mut seq = vec![0usize; len];
    for code in 0..total {
        let mut c = code;
        for s in seq.iter_mut() {
            *s = c % n;
            c /= n;
        }
        trees.push(prufer_decode(&seq, n));
    }
    trees
}

fn prufer_decode(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &v in seq {
        degree[v] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    // Repeatedly attach the smallest remaining leaf; quadratic but plenty for
    // the toy sizes this oracle serves.
    for &v in seq {
        let u = (0..n).find(|&u| degree[u] == 1).expect("a leaf exists");
        edges.push((u.min(v), u.max(v)));
        degree[u] -= 1;
        degree[v] -= 1;
    }
    let mut last = (0..n).filter(|&v| degree[v] == 1);
    let a = last.next().expect("two leaves remain");
    let b = last.next().expect("two leaves remain");
    edges.push((a.min(b), a.max(b)));
    edges
}

/// Gibbs spanning-tree marginals and pairwise moments by full enumeration.
/// Returns the per-edge marginals and the symmetric matrix of joint
/// inclusion probabilities (diagonal holds the marginals).
pub fn gibbs_tree_moments(es: &EdgeSystem, lambda: f64) -> (Vec<f64>, Matrix) {
    assert_eq!(es.mode(), EdgeMode::Undirected);
    let n = es.vertex_count();
    let ne = es.edge_count();
    let d_min = es
        .distances()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    let mut single = vec![0.0; ne];
    let mut joint = Matrix::zeros(ne, ne);
    let mut members = Vec::with_capacity(n - 1);
    for tree in labeled_trees(n) {
        members.clear();
        let mut cost = 0.0;
        for &(i, j) in &tree {
            let e = es.index_of(i, j);
            members.push(e);
            cost += es.distance(e) - d_min;
        }
        let weight = (-cost / lambda).exp();
        total += weight;
        for &e in &members {
            single[e] += weight;
            for &f in &members {
                joint.add_to(e, f, weight);
            }
        }
    }
    for v in single.iter_mut() {
        *v /= total;
    }
    let scale = 1.0 / total;
    for v in joint.data_mut() {
        *v *= scale;
    }
    (single, joint)
}

/// Marginals of the k-subset cardinality model by enumerating all
/// `C(m, k)` subsets of candidates.
pub fn subset_marginals(logits: &[f64], k: usize) -> Vec<f64> {
    let m = logits.len();
    assert!(m <= 25, "subset enumeration is for toy sizes");
    let shift = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut single = vec![0.0; m];
    let mut subset = Vec::with_capacity(k);
    enumerate_subsets(m, k, 0, &mut subset, &mut |chosen| {
        let weight: f64 = chosen.iter().map(|&i| logits[i] - shift).sum::<f64>().exp();
        total += weight;
        for &i in chosen {
            single[i] += weight;
        }
    });
    for v in single.iter_mut() {
        *v /= total;
    }
    single
}

fn enumerate_subsets(
    m: usize,
    k: usize,
    start: usize,
    current: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if current.len() == k {
        visit(current);
        return;
    }
    let needed = k - current.len();
    for i in start..=(m - needed) {
        current.push(i);
        enumerate_subsets(m, k, i + 1, current, visit);
        current.pop();
    }
}

/// Central finite-difference gradient of `f` at `point`.
pub fn finite_difference_grad<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    point: &[f64],
    h: f64,
) -> Vec<f64> {
    let mut grad = Vec::with_capacity(point.len());
    let mut x = point.to_vec();
    for i in 0..point.len() {
        x[i] = point[i] + h;
        let up = f(&x);
        x[i] = point[i] - h;
        let down = f(&x);
        x[i] = point[i];
        grad.push((up - down) / (2.0 * h));
    }
    grad
}

/// Empirical permutation-null moments of `T = sum_e Delta(e) mu_e` from
/// uniformly drawn labellings, with standard errors for both estimates.
pub struct PermutationMoments {
    pub mean: f64,
    pub variance: f64,
    pub mean_se: f64,
    pub variance_se: f64,
}

pub fn mc_permutation_moments(
    mu: &[f64],
    es: &EdgeSystem,
    n1: usize,
    n2: usize,
    labellings: usize,
    seed: u64,
) -> PermutationMoments {
    let n = es.vertex_count();
    assert_eq!(n, n1 + n2);
    let mut labels: Vec<Label> = (0..n)
        .map(|i| if i < n1 { Label::First } else { Label::Second })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(labellings);
    for _ in 0..labellings {
        labels.shuffle(&mut rng);
        let t: f64 = es
            .iter()
            .filter(|&(_, (i, j), _)| crosses(&labels, i, j))
            .map(|(e, _, _)| mu[e])
            .sum();
        samples.push(t);
    }
    let b = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / b;
    let m2 = samples.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / b;
    let m4 = samples
        .iter()
        .map(|t| (t - mean).powi(4))
        .sum::<f64>()
        / b;
    let variance = m2 * b / (b - 1.0);
    PermutationMoments {
        mean,
        variance,
        mean_se: (variance / b).sqrt(),
        variance_se: ((m4 - m2 * m2).max(0.0) / b).sqrt(),
    }
}
