//! Permutation-null moments of the smoothed statistic, the smooth
//! t-statistic, normality diagnostics, and the f-divergence limits of the
//! classical tests.
//!
//! Under H0 the labelling is uniform over all assignments with fixed class
//! counts, so the moments of `T = sum_e Delta(e) mu_e` depend on the
//! marginals only through a handful of aggregate sums. The quadratic-form
//! route is kept as an O(|E|^2) oracle for the linear-time formula.

use crate::error::{Error, Result};
use crate::geometry::{EdgeMode, EdgeSystem};
use crate::linalg::Matrix;
use crate::stats::adaptive_simpson;

/// `chi_1 = n1 n2 / (n (n-1))`.
pub fn chi1(n1: usize, n2: usize) -> f64 {
    let n = (n1 + n2) as f64;
    (n1 as f64) * (n2 as f64) / (n * (n - 1.0))
}

/// `chi_2 = 4 (n1-1)(n2-1) / ((n-2)(n-3))`.
pub fn chi2(n1: usize, n2: usize) -> f64 {
    let n = (n1 + n2) as f64;
    4.0 * ((n1 - 1) as f64) * ((n2 - 1) as f64) / ((n - 2.0) * (n - 3.0))
}

/// Second moment `E[Delta(e) Delta(f)]` of the crossing indicators under the
/// permutation null, by how many endpoints the two edges share.
pub fn pi_entry(e: (usize, usize), f: (usize, usize), n1: usize, n2: usize) -> Result<f64> {
    let n = n1 + n2;
    if n < 4 {
        return Err(Error::InvalidParameter(format!(
            "null second moments need n >= 4, got {n}"
        )));
    }
    if e.0 == e.1 || f.0 == f.1 {
        return Err(Error::InvalidParameter("edges must join two vertices".into()));
    }
    let shared = [e.0, e.1]
        .iter()
        .filter(|v| **v == f.0 || **v == f.1)
        .count();
    let c1 = chi1(n1, n2);
    Ok(match shared {
        2 => 2.0 * c1,
        1 => c1,
        _ => c1 * chi2(n1, n2),
    })
}

/// Null mean of the statistic: `2 m n1 n2 / (n (n-1))` for any model whose
/// configurations hold exactly `m` edges.
pub fn null_mean(m: usize, n1: usize, n2: usize) -> f64 {
    2.0 * (m as f64) * chi1(n1, n2)
}

fn check_variance_args(mu: &[f64], es: &EdgeSystem, n1: usize, n2: usize) -> Result<()> {
    if n1 + n2 < 4 {
        return Err(Error::InvalidParameter(format!(
            "null variance needs n >= 4, got {}",
            n1 + n2
        )));
    }
    if mu.len() != es.edge_count() {
        return Err(Error::InvalidInput(format!(
            "marginal vector of length {} does not match {} edges",
            mu.len(),
            es.edge_count()
        )));
    }
    if es.vertex_count() != n1 + n2 {
        return Err(Error::InvalidInput(format!(
            "edge system over {} vertices does not match n1 + n2 = {}",
            es.vertex_count(),
            n1 + n2
        )));
    }
    Ok(())
}

/// Null variance in O(|E|): a vertex-degree square sum, a parallel-edge sum,
/// and a constant term.
///
/// The parallel-edge sum pairs every edge with itself and, in directed mode,
/// with its reverse; undirected systems have no reverse term.
pub fn null_variance_fast(
    mu: &[f64],
    es: &EdgeSystem,
    n1: usize,
    n2: usize,
    m: usize,
) -> Result<f64> {
    check_variance_args(mu, es, n1, n2)?;
    let n = es.vertex_count();
    let mut incident = vec![0.0f64; n];
    for (e, (i, j), _) in es.iter() {
        incident[i] += mu[e];
        incident[j] += mu[e];
    }
    let degree_sq: f64 = incident.iter().map(|v| v * v).sum();
    let parallel: f64 = match es.mode() {
        EdgeMode::Undirected => mu.iter().map(|v| v * v).sum(),
        EdgeMode::Directed => (0..es.edge_count())
            .map(|e| mu[e] * mu[e] + mu[e] * mu[es.reverse(e).expect("directed")])
            .sum(),
    };
    let c1 = chi1(n1, n2);
    let c2 = chi2(n1, n2);
    let mf = m as f64;
    Ok(c1 * (1.0 - c2) * degree_sq + c1 * c2 * parallel + c1 * (c2 - 4.0 * c1) * mf * mf)
}

/// Null variance as the explicit quadratic form `mu^T Pi mu - mean^2`.
/// O(|E|^2); intended as a test oracle for [`null_variance_fast`].
pub fn null_variance_quadratic(
    mu: &[f64],
    es: &EdgeSystem,
    n1: usize,
    n2: usize,
    m: usize,
) -> Result<f64> {
    check_variance_args(mu, es, n1, n2)?;
    let mut quad = 0.0;
    for (e, pe, _) in es.iter() {
        if mu[e] == 0.0 {
            continue;
        }
        for (f, pf, _) in es.iter() {
            if mu[f] != 0.0 {
                quad += mu[e] * mu[f] * pi_entry(pe, pf, n1, n2)?;
            }
        }
    }
    let mean = null_mean(m, n1, n2);
    Ok(quad - mean * mean)
}

/// First two permutation-null moments of a smoothed statistic.
#[derive(Debug, Clone, Copy)]
pub struct NullMoments {
    pub mean: f64,
    pub variance: f64,
    /// Edge budget of the model: `n - 1` for FR, `k n` for k-NN.
    pub m: usize,
    pub chi1: f64,
    pub chi2: f64,
}

/// Package mean and variance for a marginal vector with edge budget `m`.
pub fn null_moments(
    mu: &[f64],
    es: &EdgeSystem,
    n1: usize,
    n2: usize,
    m: usize,
) -> Result<NullMoments> {
    Ok(NullMoments {
        mean: null_mean(m, n1, n2),
        variance: null_variance_fast(mu, es, n1, n2, m)?,
        m,
        chi1: chi1(n1, n2),
        chi2: chi2(n1, n2),
    })
}

/// Gradient of [`null_variance_fast`] with respect to each marginal; the
/// edge-budget term is constant, so only the degree and parallel sums
/// contribute. Needed when differentiating the t-statistic, whose scale
/// depends on the marginals.
pub fn null_variance_gradient(
    mu: &[f64],
    es: &EdgeSystem,
    n1: usize,
    n2: usize,
) -> Result<Vec<f64>> {
    check_variance_args(mu, es, n1, n2)?;
    let n = es.vertex_count();
    let mut incident = vec![0.0f64; n];
    for (e, (i, j), _) in es.iter() {
        incident[i] += mu[e];
        incident[j] += mu[e];
    }
    let c1 = chi1(n1, n2);
    let c2 = chi2(n1, n2);
    let grad = es
        .iter()
        .map(|(e, (i, j), _)| {
            let degree_part = 2.0 * (incident[i] + incident[j]);
            let parallel_part = match es.mode() {
                EdgeMode::Undirected => 2.0 * mu[e],
                EdgeMode::Directed => 2.0 * mu[e] + 2.0 * mu[es.reverse(e).expect("directed")],
            };
            c1 * (1.0 - c2) * degree_part + c1 * c2 * parallel_part
        })
        .collect();
    Ok(grad)
}

/// Standardize an observed statistic against its permutation null.
pub fn t_statistic(t: f64, moments: &NullMoments) -> Result<f64> {
    if moments.variance.is_nan() || moments.variance <= 0.0 {
        return Err(Error::DegenerateNull {
            variance: moments.variance,
        });
    }
    Ok((t - moments.mean) / moments.variance.sqrt())
}

/// The configuration sums entering the normality bound.
#[derive(Debug, Clone, Copy)]
pub struct NormalityTerms {
    /// Expected number of ordered edge pairs sharing a vertex.
    pub s2: f64,
    /// Expected number of 3-stars (ordered, distinct leaves).
    pub s3: f64,
    /// Expected number of 4-node paths (ordered, distinct nodes).
    pub l4: f64,
    /// The bound numerator `n k^3 + k S2 + S3 + L4`, with `k` the average
    /// expected degree. A diagnostic, not a certified bound.
    pub bound_order: f64,
}

/// Compute S2, S3, L4 over tuples of pairwise-distinct indices from a
/// symmetrized marginal matrix (zero diagonal).
pub fn normality_terms(mu_bar: &Matrix) -> NormalityTerms {
    assert_eq!(mu_bar.rows(), mu_bar.cols(), "mu_bar must be square");
    let n = mu_bar.rows();
    let mut row_sum = vec![0.0; n];
    let mut row_sq = vec![0.0; n];
    let mut row_cube = vec![0.0; n];
    let mut total_cube = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = mu_bar.get(i, j);
            row_sum[i] += v;
            row_sq[i] += v * v;
            row_cube[i] += v * v * v;
        }
        total_cube += row_cube[i];
    }
    // Distinct ordered tuples via inclusion-exclusion over coincidences.
    let s2: f64 = (0..n).map(|i| row_sum[i] * row_sum[i] - row_sq[i]).sum();
    let s3: f64 = (0..n)
        .map(|i| {
            row_sum[i] * row_sum[i] * row_sum[i] - 3.0 * row_sum[i] * row_sq[i]
                + 2.0 * row_cube[i]
        })
        .sum();

    let m2 = mu_bar.matmul(mu_bar);
    let m3 = m2.matmul(mu_bar);
    let grand_m3: f64 = m3.data().iter().sum();
    let trace_m3: f64 = (0..n).map(|i| m3.get(i, i)).sum();
    let diag_m2_dot_rows: f64 = (0..n).map(|i| m2.get(i, i) * row_sum[i]).sum();
    // Zero diagonal already rules out adjacent coincidences; remove k=j, m=i,
    // m=k, and add back the doubly-counted k=j,m=i case.
    let l4 = grand_m3 - 2.0 * diag_m2_dot_rows - trace_m3 + total_cube;

    let total: f64 = row_sum.iter().sum();
    let k_eff = total / n as f64;
    let bound_order = n as f64 * k_eff.powi(3) + k_eff * s2 + s3 + l4;
    NormalityTerms {
        s2,
        s3,
        l4,
        bound_order,
    }
}

/// Which classical test's limiting f-divergence to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceKind {
    Fr,
    Nn,
}

/// Generator of the limiting f-divergence, shifted so `f(1) = 0`.
pub fn f_generator(x: f64, alpha: f64, kind: DivergenceKind) -> f64 {
    debug_assert!(x >= 0.0 && alpha > 0.0 && alpha < 1.0);
    let a = alpha;
    let b = 1.0 - alpha;
    match kind {
        DivergenceKind::Fr => {
            let num = (a * x - b) * (a * x - b);
            let value = num / (4.0 * a * b * (a * x + b));
            let at_one = (2.0 * a - 1.0) * (2.0 * a - 1.0) / (4.0 * a * b);
            value - at_one
        }
        DivergenceKind::Nn => {
            let value = (a * a * x * x + b * b) / (a * x + b);
            let at_one = a * a + b * b;
            value - at_one
        }
    }
}

/// Asymptotic limit of the normalized classical statistic for 1-D densities:
/// `T/n -> 2 a(1-a) int p q / (a p + (1-a) q)` for FR and
/// `1 - T/(n k) -> int (a^2 p^2 + (1-a)^2 q^2) / (a p + (1-a) q)` for k-NN.
/// The integral is evaluated by adaptive quadrature on `interval` to absolute
/// tolerance 1e-8.
pub fn divergence_limit_1d<P, Q>(
    p: P,
    q: Q,
    alpha: f64,
    kind: DivergenceKind,
    interval: (f64, f64),
) -> Result<f64>
where
    P: Fn(f64) -> f64,
    Q: Fn(f64) -> f64,
{
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} must lie in (0, 1)"
        )));
    }
    let a = alpha;
    let b = 1.0 - alpha;
    let integrand = move |x: f64| {
        let px = p(x);
        let qx = q(x);
        let denom = a * px + b * qx;
        if denom <= 0.0 {
            return 0.0;
        }
        match kind {
            DivergenceKind::Fr => 2.0 * a * b * px * qx / denom,
            DivergenceKind::Nn => (a * a * px * px + b * b * qx * qx) / denom,
        }
    };
    adaptive_simpson(&integrand, interval.0, interval.1, 1e-8)
        .ok_or_else(|| Error::Numerical("divergence quadrature did not converge".into()))
}

/// Default quadrature window; Gaussian integrands carry mass below 1e-16
/// outside of it.
pub const DEFAULT_QUADRATURE_INTERVAL: (f64, f64) = (-12.0, 12.0);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pi_entries_for_two_and_two() {
        // n1 = n2 = 2.
        assert!((pi_entry((0, 1), (1, 0), 2, 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((pi_entry((0, 1), (1, 2), 2, 2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((pi_entry((0, 1), (2, 3), 2, 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pi_entry_needs_four_points() {
        assert!(pi_entry((0, 1), (1, 2), 1, 2).is_err());
    }

    #[test]
    fn null_mean_formula_values() {
        assert!((null_mean(3, 2, 2) - 2.0).abs() < 1e-15);
        assert!((null_mean(4, 2, 2) - 8.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn chi2_dominates_four_chi1_for_balanced_samples() {
        for n1 in 2..=512usize {
            let diff = chi2(n1, n1) - 4.0 * chi1(n1, n1);
            assert!(diff >= -1e-12, "failed at n1 = {n1}: {diff}");
        }
    }

    #[test]
    fn t_statistic_basic_values() {
        let moments = NullMoments {
            mean: 2.0,
            variance: 4.0,
            m: 3,
            chi1: 0.25,
            chi2: 1.0,
        };
        assert_eq!(t_statistic(2.0, &moments).unwrap(), 0.0);
        assert_eq!(t_statistic(0.0, &moments).unwrap(), -1.0);
        let degenerate = NullMoments {
            variance: 0.0,
            ..moments
        };
        assert!(matches!(
            t_statistic(1.0, &degenerate),
            Err(Error::DegenerateNull { .. })
        ));
    }

    #[test]
    fn variance_of_zero_marginals_is_zero() {
        let es = EdgeSystem::from_distances(EdgeMode::Undirected, 4, vec![1.0; 6]).unwrap();
        let mu = vec![0.0; 6];
        let v = null_variance_fast(&mu, &es, 2, 2, 0).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn variance_needs_four_points() {
        let es = EdgeSystem::from_distances(EdgeMode::Undirected, 2, vec![1.0]).unwrap();
        assert!(null_variance_quadratic(&[1.0], &es, 1, 1, 1).is_err());
    }

    #[test]
    fn single_active_edge_has_no_shared_terms() {
        let mut m = Matrix::zeros(4, 4);
        m.set(0, 1, 0.9);
        m.set(1, 0, 0.9);
        let t = normality_terms(&m);
        assert_eq!(t.s2, 0.0);
        assert_eq!(t.s3, 0.0);
        assert_eq!(t.l4, 0.0);
    }

    #[test]
    fn normality_terms_scale_homogeneously() {
        let mut m = Matrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    m.set(i, j, 2.0 / 3.0);
                }
            }
        }
        let base = normality_terms(&m);
        let mut scaled = Matrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                scaled.set(i, j, 0.5 * m.get(i, j));
            }
        }
        let s = normality_terms(&scaled);
        assert!((s.s2 - 0.25 * base.s2).abs() < 1e-12);
        assert!((s.s3 - 0.125 * base.s3).abs() < 1e-12);
        assert!((s.l4 - 0.125 * base.l4).abs() < 1e-12);
    }

    #[test]
    fn generators_vanish_at_one() {
        for alpha in [0.2, 0.5, 0.7] {
            assert!(f_generator(1.0, alpha, DivergenceKind::Fr).abs() < 1e-15);
            assert!(f_generator(1.0, alpha, DivergenceKind::Nn).abs() < 1e-15);
        }
    }

    #[test]
    fn fr_generator_at_zero() {
        assert!((f_generator(0.0, 0.5, DivergenceKind::Fr) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn equal_densities_reach_known_limits() {
        let gauss = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let fr = divergence_limit_1d(
            gauss,
            gauss,
            0.5,
            DivergenceKind::Fr,
            DEFAULT_QUADRATURE_INTERVAL,
        )
        .unwrap();
        assert!((fr - 0.5).abs() < 1e-8);
        let nn = divergence_limit_1d(
            gauss,
            gauss,
            0.5,
            DivergenceKind::Nn,
            DEFAULT_QUADRATURE_INTERVAL,
        )
        .unwrap();
        assert!((nn - 0.5).abs() < 1e-8);
    }

    #[test]
    fn nn_generator_recovers_nn_integrand() {
        // int q f(p/q) with the shifted generator plus the constant equals
        // the printed integrand; spot-check pointwise.
        let (alpha, p, q) = (0.3, 0.7, 0.4);
        let f = f_generator(p / q, alpha, DivergenceKind::Nn)
            + alpha * alpha
            + (1.0 - alpha) * (1.0 - alpha);
        let direct = (alpha * alpha * p * p + (1.0 - alpha) * (1.0 - alpha) * q * q)
            / (alpha * p + (1.0 - alpha) * q);
        assert!((q * f - direct).abs() < 1e-12);
    }
}
