#![allow(clippy::needless_range_loop)]

//! Null-moment formulas against the quadratic-form oracle and Monte Carlo
//! permutation draws, plus the normality-term and divergence oracles.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use graphtest::linalg::Matrix;
use graphtest::null_calculus::{
    divergence_limit_1d, normality_terms, null_mean, null_moments, null_variance_fast,
    null_variance_quadratic, t_statistic, DivergenceKind, DEFAULT_QUADRATURE_INTERVAL,
};
use graphtest::oracles::mc_permutation_moments;
use graphtest::smooth_fr::st_marginals;
use graphtest::smooth_knn::knn_marginals;
use graphtest::{
    pairwise_distances, pool_samples, EdgeMode, EdgeSystem, Label, Metric, PointSample,
};

fn random_marginals(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(0.0..1.0)).collect()
}

#[test]
fn fast_variance_equals_quadratic_oracle_both_modes() {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    for trial in 0..40 {
        let n1 = rng.gen_range(2..6usize);
        let n2 = rng.gen_range(2..6usize);
        let n = n1 + n2;
        for mode in [EdgeMode::Undirected, EdgeMode::Directed] {
            let count = match mode {
                EdgeMode::Undirected => n * (n - 1) / 2,
                EdgeMode::Directed => n * (n - 1),
            };
            let es = {
                // Distances are irrelevant to the null moments; use any
                // symmetric assignment.
                let probe =
                    EdgeSystem::from_distances(mode, n, vec![1.0; count]).unwrap();
                let mut d = vec![0.0; count];
                for e in 0..count {
                    let (i, j) = probe.endpoints(e);
                    d[e] = ((i.min(j) * 31 + i.max(j) * 17) % 23 + 1) as f64;
                }
                EdgeSystem::from_distances(mode, n, d).unwrap()
            };
            // Both formulas assume the model's edge budget: sum(mu) = m.
            let m = rng.gen_range(1..=n);
            let mut mu = random_marginals(count, &mut rng);
            let scale = m as f64 / mu.iter().sum::<f64>();
            mu.iter_mut().for_each(|v| *v *= scale);
            let fast = null_variance_fast(&mu, &es, n1, n2, m).unwrap();
            let quad = null_variance_quadratic(&mu, &es, n1, n2, m).unwrap();
            let rel = (fast - quad).abs() / quad.abs().max(1e-12);
            assert!(
                rel < 1e-10,
                "trial {trial} mode {mode:?}: fast {fast} vs quadratic {quad}"
            );
        }
    }
}

#[test]
fn marginal_moments_match_monte_carlo() {
    // K8 with spanning-tree marginals: empirical permutation moments agree
    // with the closed forms within three standard errors.
    let mut rng = ChaCha8Rng::seed_from_u64(73);
    let pts: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let sample = PointSample::new(pts, 2).unwrap();
    let es = pairwise_distances(&sample, Metric::Euclidean, EdgeMode::Undirected).unwrap();
    let mu = st_marginals(&es, 1.0).unwrap();
    let (n1, n2) = (4, 4);
    let m = 7;
    let mc = mc_permutation_moments(mu.values(), &es, n1, n2, 20_000, 7001);
    let mean = null_mean(m, n1, n2);
    let var = null_variance_fast(mu.values(), &es, n1, n2, m).unwrap();
    assert!(
        (mc.mean - mean).abs() <= 3.0 * mc.mean_se,
        "mean {mean} vs MC {} (se {})",
        mc.mean,
        mc.mean_se
    );
    assert!(
        (mc.variance - var).abs() <= 3.0 * mc.variance_se,
        "variance {var} vs MC {} (se {})",
        mc.variance,
        mc.variance_se
    );
}

#[test]
fn directed_marginal_moments_match_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(79);
    let pts: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let sample = PointSample::new(pts, 2).unwrap();
    let es = pairwise_distances(&sample, Metric::Euclidean, EdgeMode::Directed).unwrap();
    let k = 2;
    let mu = knn_marginals(&es, 0.8, k).unwrap();
    let (n1, n2) = (4, 4);
    let m = k * 8;
    let mc = mc_permutation_moments(mu.values(), &es, n1, n2, 20_000, 7003);
    let mean = null_mean(m, n1, n2);
    let var = null_variance_fast(mu.values(), &es, n1, n2, m).unwrap();
    assert!((mc.mean - mean).abs() <= 3.0 * mc.mean_se);
    assert!((mc.variance - var).abs() <= 3.0 * mc.variance_se);
}

#[test]
fn balanced_variance_constant_term_is_nonnegative() {
    use graphtest::null_calculus::{chi1, chi2};
    for n1 in [2usize, 3, 8, 64, 512] {
        assert!(chi2(n1, n1) - 4.0 * chi1(n1, n1) >= -1e-12);
    }
}

#[test]
fn standardized_null_is_centered_and_scaled() {
    // Permuted t-values should have mean ~0 and variance ~1 when
    // standardized by the closed-form moments (n = 128).
    let mut rng = ChaCha8Rng::seed_from_u64(83);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let draw = |count: usize, rng: &mut ChaCha8Rng| -> PointSample {
        PointSample::new((0..count * 2).map(|_| normal.sample(rng)).collect(), 2).unwrap()
    };
    let x1 = draw(64, &mut rng);
    let x2 = draw(64, &mut rng);
    let data = pool_samples(&x1, &x2).unwrap();
    let es = pairwise_distances(data.points(), Metric::Euclidean, EdgeMode::Undirected).unwrap();
    let mu = st_marginals(&es, 1.0).unwrap();
    let moments = null_moments(mu.values(), &es, 64, 64, 127).unwrap();

    use rand::seq::SliceRandom;
    let mut labels: Vec<Label> = data.labels().to_vec();
    let mut ts = Vec::with_capacity(4000);
    for _ in 0..4000 {
        labels.shuffle(&mut rng);
        let t_raw: f64 = es
            .iter()
            .filter(|&(_, (i, j), _)| labels[i] != labels[j])
            .map(|(e, _, _)| mu.values()[e])
            .sum();
        ts.push(t_statistic(t_raw, &moments).unwrap());
    }
    let mean = ts.iter().sum::<f64>() / ts.len() as f64;
    let var = ts.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (ts.len() - 1) as f64;
    assert!(mean.abs() < 0.05, "standardized mean {mean}");
    assert!((var - 1.0).abs() < 0.1, "standardized variance {var}");
}

#[test]
fn variance_gradient_matches_finite_differences() {
    use graphtest::null_calculus::null_variance_gradient;
    use graphtest::oracles::finite_difference_grad;
    let mut rng = ChaCha8Rng::seed_from_u64(59);
    for mode in [EdgeMode::Undirected, EdgeMode::Directed] {
        let pts: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sample = PointSample::new(pts, 2).unwrap();
        let es = pairwise_distances(&sample, Metric::Euclidean, mode).unwrap();
        let mu = random_marginals(es.edge_count(), &mut rng);
        let grad = null_variance_gradient(&mu, &es, 3, 3, ).unwrap();
        let fd = finite_difference_grad(
            |m| null_variance_fast(m, &es, 3, 3, 5).unwrap(),
            &mu,
            1e-6,
        );
        for (g, f) in grad.iter().zip(&fd) {
            assert!((g - f).abs() < 1e-6 + 1e-6 * f.abs(), "{g} vs {f}");
        }
    }
}

#[test]
fn normality_terms_match_brute_force_loops() {
    let check = |m: &Matrix| {
        let n = m.rows();
        let mut s2 = 0.0;
        let mut s3 = 0.0;
        let mut l4 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if i != j && i != k && j != k {
                        s2 += m.get(i, j) * m.get(i, k);
                    }
                    for l in 0..n {
                        let distinct =
                            i != j && i != k && i != l && j != k && j != l && k != l;
                        if distinct {
                            s3 += m.get(i, j) * m.get(i, k) * m.get(i, l);
                            l4 += m.get(j, i) * m.get(i, k) * m.get(k, l);
                        }
                    }
                }
            }
        }
        let t = normality_terms(m);
        assert!((t.s2 - s2).abs() < 1e-10 * s2.abs().max(1.0), "{} vs {s2}", t.s2);
        assert!((t.s3 - s3).abs() < 1e-10 * s3.abs().max(1.0), "{} vs {s3}", t.s3);
        assert!((t.l4 - l4).abs() < 1e-10 * l4.abs().max(1.0), "{} vs {l4}", t.l4);
    };

    // K3 with all entries 2/3.
    let mut k3 = Matrix::zeros(3, 3);
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                k3.set(i, j, 2.0 / 3.0);
            }
        }
    }
    check(&k3);

    // Random symmetric matrices with zero diagonal.
    let mut rng = ChaCha8Rng::seed_from_u64(89);
    for n in [4usize, 5, 6] {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rng.gen_range(0.0..1.0);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        check(&m);
    }
}

#[test]
fn gaussian_divergence_matches_monte_carlo_integration() {
    // FR limit for N(0,1) vs N(1,1) at alpha = 1/2, cross-checked by Monte
    // Carlo integration over x ~ p.
    let p = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let q = |x: f64| (-0.5 * (x - 1.0) * (x - 1.0)).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let quad = divergence_limit_1d(p, q, 0.5, DivergenceKind::Fr, DEFAULT_QUADRATURE_INTERVAL)
        .unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(97);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let samples = 2_000_000;
    let mut acc = 0.0;
    for _ in 0..samples {
        let x: f64 = normal.sample(&mut rng);
        // E_p[ 2 a b q / (a p + b q) ] equals the integral of the integrand.
        acc += 0.5 * q(x) / (0.5 * p(x) + 0.5 * q(x));
    }
    let mc = acc / samples as f64;
    assert!(
        (quad - mc).abs() < 5e-4,
        "quadrature {quad} vs Monte Carlo {mc}"
    );
}
