//! Null-normality diagnostics: how close the standardized permutation null
//! of the smoothed statistic sits to a standard normal at each temperature,
//! and how the normal-approximation p-value tracks the permutation one.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use graphtest::null_calculus::{null_moments, t_statistic};
use graphtest::smooth_fr::st_marginals;
use graphtest::smooth_knn::knn_marginals;
use graphtest::stats::normal_cdf;
use graphtest::{
    pairwise_distances, pool_samples, EdgeMode, Error, Label, Metric, PooledData, Result,
};

use crate::dataset::two_moons;
use crate::report::TestKind;
use crate::stats_util::{ks_distance_to_standard_normal, spearman_rho};

#[derive(Debug, Clone)]
pub struct DiagnosticsConfig {
    pub lambdas: Vec<f64>,
    /// Per-sample size; the pooled set has twice this many points.
    pub n: usize,
    pub labellings: usize,
    pub test: TestKind,
    pub k: usize,
    pub moons_noise: f64,
    pub seed: u64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            lambdas: vec![10.0, 1.0, 0.05],
            n: 128,
            labellings: 1000,
            test: TestKind::KnnSmooth,
            k: 1,
            moons_noise: 0.05,
            seed: 0,
        }
    }
}

/// Summary per temperature.
#[derive(Debug, Clone)]
pub struct DiagnosticsRow {
    pub lambda: f64,
    pub ks_distance: f64,
    pub spearman: f64,
    pub standardized_mean: f64,
    pub standardized_variance: f64,
}

/// One permutation draw: both p-value estimates for the same labelling.
#[derive(Debug, Clone)]
pub struct PValuePair {
    pub lambda: f64,
    pub p_normal: f64,
    pub p_permutation: f64,
}

/// Run the diagnostic over the configured temperature grid on a fixed
/// two-moons dataset.
pub fn null_diagnostics(
    cfg: &DiagnosticsConfig,
) -> Result<(Vec<DiagnosticsRow>, Vec<PValuePair>)> {
    if !cfg.test.is_smooth() {
        return Err(Error::InvalidParameter(
            "null diagnostics need a smoothed test".into(),
        ));
    }
    if cfg.labellings < 2 || cfg.n < 2 {
        return Err(Error::InvalidParameter(
            "need at least two labellings and two points per sample".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x1 = two_moons(cfg.n, cfg.moons_noise, &mut rng);
    let x2 = two_moons(cfg.n, cfg.moons_noise, &mut rng);
    let data = pool_samples(&x1, &x2)?;

    let mut rows = Vec::with_capacity(cfg.lambdas.len());
    let mut pairs = Vec::new();
    for &lambda in &cfg.lambdas {
        let (row, mut lambda_pairs) = diagnose_at(&data, cfg, lambda)?;
        rows.push(row);
        pairs.append(&mut lambda_pairs);
    }
    Ok((rows, pairs))
}

fn diagnose_at(
    data: &PooledData,
    cfg: &DiagnosticsConfig,
    lambda: f64,
) -> Result<(DiagnosticsRow, Vec<PValuePair>)> {
    let n = data.n();
    let (es, mu, m) = match cfg.test {
        TestKind::FrSmooth => {
            let es =
                pairwise_distances(data.points(), Metric::Euclidean, EdgeMode::Undirected)?;
            let mu = st_marginals(&es, lambda)?;
            (es, mu, n - 1)
        }
        TestKind::KnnSmooth => {
            let es = pairwise_distances(data.points(), Metric::Euclidean, EdgeMode::Directed)?;
            let mu = knn_marginals(&es, lambda, cfg.k)?;
            (es, mu, cfg.k * n)
        }
        _ => unreachable!("validated smooth"),
    };
    let moments = null_moments(mu.values(), &es, data.n1(), data.n2(), m)?;

    // Stream keyed by the temperature bits so each lambda sees independent
    // labellings but the whole diagnostic is reproducible.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(lambda.to_bits());
    let mut labels: Vec<Label> = data.labels().to_vec();
    let b = cfg.labellings;
    let mut raw = Vec::with_capacity(b);
    for _ in 0..b {
        labels.shuffle(&mut rng);
        let t: f64 = es
            .iter()
            .filter(|&(_, (i, j), _)| labels[i] != labels[j])
            .map(|(e, _, _)| mu.values()[e])
            .sum();
        raw.push(t);
    }
    let standardized: Vec<f64> = raw
        .iter()
        .map(|&t| t_statistic(t, &moments))
        .collect::<Result<_>>()?;

    // Empirical permutation p-value of each draw against the whole batch.
    let mut sorted = raw.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let mut pairs = Vec::with_capacity(b);
    let mut p_normals = Vec::with_capacity(b);
    let mut p_perms = Vec::with_capacity(b);
    for (&t_raw, &t_std) in raw.iter().zip(&standardized) {
        let rank = sorted.partition_point(|&v| v <= t_raw);
        let p_perm = rank as f64 / b as f64;
        let p_norm = normal_cdf(t_std);
        p_normals.push(p_norm);
        p_perms.push(p_perm);
        pairs.push(PValuePair {
            lambda,
            p_normal: p_norm,
            p_permutation: p_perm,
        });
    }

    let mean = standardized.iter().sum::<f64>() / b as f64;
    let var = standardized
        .iter()
        .map(|t| (t - mean) * (t - mean))
        .sum::<f64>()
        / (b - 1) as f64;
    Ok((
        DiagnosticsRow {
            lambda,
            ks_distance: ks_distance_to_standard_normal(&standardized),
            spearman: spearman_rho(&p_normals, &p_perms),
            standardized_mean: mean,
            standardized_variance: var,
        },
        pairs,
    ))
}

/// Summary CSV with a header row.
pub fn diagnostics_csv(rows: &[DiagnosticsRow]) -> String {
    let mut out =
        String::from("lambda,ks_distance,spearman,standardized_mean,standardized_variance\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.lambda, r.ks_distance, r.spearman, r.standardized_mean, r.standardized_variance
        ));
    }
    out
}

/// Scatter-pair CSV with a header row.
pub fn pairs_csv(pairs: &[PValuePair]) -> String {
    let mut out = String::from("lambda,p_normal,p_permutation\n");
    for p in pairs {
        out.push_str(&format!("{},{},{}\n", p.lambda, p.p_normal, p.p_permutation));
    }
    out
}
