//! Single-test runner: computes a statistic, its permutation p-value, and
//! for smoothed tests the closed-form t-statistic and normal p-value.

use serde::Serialize;

use graphtest::baselines::{median_heuristic, KernelConfig};
use graphtest::classical::{
    cross_count_labels, knn_edges, mst_kruskal, permutation_pvalue,
};
use graphtest::geometry::euclidean;
use graphtest::null_calculus::{null_moments, t_statistic};
use graphtest::smooth_fr::smooth_fr_statistic;
use graphtest::smooth_knn::smooth_knn_statistic;
use graphtest::stats::normal_cdf;
use graphtest::{
    pairwise_distances, pool_samples, EdgeMode, Error, Label, Metric, PointSample, PooledData,
    Result,
};

/// The statistics the harness knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TestKind {
    Fr,
    Knn,
    FrSmooth,
    KnnSmooth,
    Mmd,
    Energy,
}

impl TestKind {
    pub fn name(&self) -> &'static str {
        match self {
            TestKind::Fr => "fr",
            TestKind::Knn => "knn",
            TestKind::FrSmooth => "fr-smooth",
            TestKind::KnnSmooth => "knn-smooth",
            TestKind::Mmd => "mmd",
            TestKind::Energy => "energy",
        }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self, TestKind::FrSmooth | TestKind::KnnSmooth)
    }

    pub fn uses_k(&self) -> bool {
        matches!(self, TestKind::Knn | TestKind::KnnSmooth)
    }
}

impl std::str::FromStr for TestKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fr" => Ok(TestKind::Fr),
            "knn" => Ok(TestKind::Knn),
            "fr-smooth" => Ok(TestKind::FrSmooth),
            "knn-smooth" => Ok(TestKind::KnnSmooth),
            "mmd" => Ok(TestKind::Mmd),
            "energy" => Ok(TestKind::Energy),
            other => Err(format!(
                "unknown test '{other}' (expected fr, knn, fr-smooth, knn-smooth, mmd, energy)"
            )),
        }
    }
}

/// Options for a single test run.
#[derive(Debug, Clone)]
pub struct TestOptions {
    pub test: TestKind,
    pub k: usize,
    /// Explicit temperature; mutually exclusive with `gamma`.
    pub lambda: Option<f64>,
    /// Sets `lambda = d^gamma` from the data dimension.
    pub gamma: Option<f64>,
    pub permutations: usize,
    pub seed: u64,
}

impl Default for TestOptions {
    fn default() -> Self {
        TestOptions {
            test: TestKind::FrSmooth,
            k: 1,
            lambda: None,
            gamma: None,
            permutations: 1000,
            seed: 0,
        }
    }
}

impl TestOptions {
    /// Resolve the temperature for a given data dimension: explicit lambda
    /// wins, then `d^gamma`, then 1.
    pub fn resolve_lambda(&self, dim: usize) -> Result<f64> {
        if self.lambda.is_some() && self.gamma.is_some() {
            return Err(Error::InvalidParameter(
                "pass either --lambda or --gamma, not both".into(),
            ));
        }
        if let Some(l) = self.lambda {
            return Ok(l);
        }
        if let Some(g) = self.gamma {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::InvalidParameter(format!(
                    "gamma = {g} must lie in [0, 1]"
                )));
            }
            return Ok((dim as f64).powf(g));
        }
        Ok(1.0)
    }
}

/// One test outcome; serializes to the JSON report. Fields that do not
/// apply to the chosen test are omitted.
#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub test_name: String,
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_stat: Option<f64>,
    pub p_permutation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_normal: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub seed: u64,
    pub n1: usize,
    pub n2: usize,
}

/// Symmetric pairwise-value matrix over the pooled points, for re-scoring
/// kernel statistics under permuted labels without recomputing kernels.
struct PairMatrix {
    values: Vec<f64>,
    n: usize,
}

impl PairMatrix {
    fn build(data: &PooledData, f: impl Fn(&[f64], &[f64]) -> f64) -> Self {
        let pts = data.points();
        let n = pts.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(pts.row(i), pts.row(j));
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        PairMatrix { values, n }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Mean over cross pairs and within-group means over distinct ordered
    /// pairs for an arbitrary labelling.
    fn group_means(&self, labels: &[Label]) -> (f64, f64, f64) {
        let mut cross = 0.0;
        let mut w1 = 0.0;
        let mut w2 = 0.0;
        let mut n1 = 0usize;
        for (i, &li) in labels.iter().enumerate() {
            if li == Label::First {
                n1 += 1;
            }
            for j in (i + 1)..self.n {
                let v = self.get(i, j);
                if li != labels[j] {
                    cross += v;
                } else if li == Label::First {
                    w1 += v;
                } else {
                    w2 += v;
                }
            }
        }
        let n2 = self.n - n1;
        (
            cross / (n1 * n2) as f64,
            2.0 * w1 / (n1 * (n1 - 1)).max(1) as f64,
            2.0 * w2 / (n2 * (n2 - 1)).max(1) as f64,
        )
    }
}

/// Run one test on two already-parsed samples.
pub fn run_test_on_samples(
    x1: &PointSample,
    x2: &PointSample,
    opts: &TestOptions,
) -> Result<TestReport> {
    if opts.permutations == 0 {
        return Err(Error::InvalidParameter(
            "need at least one permutation".into(),
        ));
    }
    let data = pool_samples(x1, x2)?;
    let (n1, n2) = (data.n1(), data.n2());
    let n = data.n();
    let dim = data.points().dim();

    let mut report = TestReport {
        test_name: opts.test.name().to_string(),
        statistic: 0.0,
        t_stat: None,
        p_permutation: 0.0,
        p_normal: None,
        lambda: None,
        k: None,
        seed: opts.seed,
        n1,
        n2,
    };

    match opts.test {
        TestKind::Fr => {
            let es =
                pairwise_distances(data.points(), Metric::Euclidean, EdgeMode::Undirected)?;
            let mst = mst_kruskal(&es)?;
            report.statistic = cross_count_labels(&mst, data.labels()) as f64;
            report.p_permutation = permutation_pvalue(
                |labels| cross_count_labels(&mst, labels) as f64,
                &data,
                opts.permutations,
                opts.seed,
            )?;
        }
        TestKind::Knn => {
            let es = pairwise_distances(data.points(), Metric::Euclidean, EdgeMode::Directed)?;
            let knn = knn_edges(&es, opts.k)?;
            report.k = Some(opts.k);
            report.statistic = cross_count_labels(&knn, data.labels()) as f64;
            report.p_permutation = permutation_pvalue(
                |labels| cross_count_labels(&knn, labels) as f64,
                &data,
                opts.permutations,
                opts.seed,
            )?;
        }
        TestKind::FrSmooth | TestKind::KnnSmooth => {
            let lambda = opts.resolve_lambda(dim)?;
            report.lambda = Some(lambda);
            let (mode, m) = if opts.test == TestKind::FrSmooth {
                (EdgeMode::Undirected, n - 1)
            } else {
                report.k = Some(opts.k);
                (EdgeMode::Directed, opts.k * n)
            };
            let es = pairwise_distances(data.points(), Metric::Euclidean, mode)?;
            let (t_raw, mu) = if opts.test == TestKind::FrSmooth {
                smooth_fr_statistic(&es, &data, lambda)?
            } else {
                smooth_knn_statistic(&es, &data, lambda, opts.k)?
            };
            report.statistic = t_raw;
            let moments = null_moments(mu.values(), &es, n1, n2, m)?;
            let t = t_statistic(t_raw, &moments)?;
            report.t_stat = Some(t);
            // Phi underflows around t = -38; keep the report in (0, 1].
            report.p_normal = Some(normal_cdf(t).max(f64::MIN_POSITIVE));
            report.p_permutation = permutation_pvalue(
                |labels| {
                    es.iter()
                        .filter(|&(_, (i, j), _)| labels[i] != labels[j])
                        .map(|(e, _, _)| mu.values()[e])
                        .sum()
                },
                &data,
                opts.permutations,
                opts.seed,
            )?;
        }
        TestKind::Mmd => {
            let cfg = match (opts.lambda, opts.gamma) {
                // The temperature flags double as the kernel bandwidth grid.
                (Some(_), _) | (_, Some(_)) => {
                    KernelConfig::new(opts.resolve_lambda(dim)?)?
                }
                _ => median_heuristic(&data)?,
            };
            report.lambda = Some(cfg.bandwidth);
            if n1 < 2 || n2 < 2 {
                return Err(Error::TooFewPoints {
                    required: 2,
                    actual: n1.min(n2),
                });
            }
            let sigma = cfg.bandwidth;
            let pair = PairMatrix::build(&data, move |a, b| {
                let d = euclidean(a, b);
                (-d * d / (2.0 * sigma * sigma)).exp()
            });
            let stat = |labels: &[Label]| {
                let (cross, w1, w2) = pair.group_means(labels);
                w1 + w2 - 2.0 * cross
            };
            report.statistic = stat(data.labels());
            // Large values reject: feed the negated statistic to the
            // left-tail permutation machinery.
            report.p_permutation =
                permutation_pvalue(|l| -stat(l), &data, opts.permutations, opts.seed)?;
        }
        TestKind::Energy => {
            let pair = PairMatrix::build(&data, euclidean);
            let stat = |labels: &[Label]| {
                let (cross, w1, w2) = pair.group_means(labels);
                2.0 * cross - w1 - w2
            };
            report.statistic = stat(data.labels());
            report.p_permutation =
                permutation_pvalue(|l| -stat(l), &data, opts.permutations, opts.seed)?;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use graphtest::baselines::{energy_statistic, mmd_unbiased};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(seed: u64, n: usize, shift: f64) -> PointSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointSample::new(
            (0..n * 2).map(|_| rng.gen_range(0.0..1.0) + shift).collect(),
            2,
        )
        .unwrap()
    }

    #[test]
    fn pair_matrix_statistic_matches_direct_baselines() {
        let x1 = sample(1, 8, 0.0);
        let x2 = sample(2, 6, 0.4);
        let data = pool_samples(&x1, &x2).unwrap();

        let pair = PairMatrix::build(&data, euclidean);
        let (cross, w1, w2) = pair.group_means(data.labels());
        let via_matrix = 2.0 * cross - w1 - w2;
        let direct = energy_statistic(&x1, &x2).unwrap();
        assert!((via_matrix - direct).abs() < 1e-12);

        let cfg = KernelConfig::new(0.7).unwrap();
        let kpair = PairMatrix::build(&data, |a, b| {
            let d = euclidean(a, b);
            (-d * d / (2.0 * 0.7 * 0.7)).exp()
        });
        let (cross, w1, w2) = kpair.group_means(data.labels());
        let via_matrix = w1 + w2 - 2.0 * cross;
        let direct = mmd_unbiased(&x1, &x2, &cfg).unwrap();
        assert!((via_matrix - direct).abs() < 1e-12);
    }

    #[test]
    fn smooth_report_carries_t_and_normal_p() {
        let x1 = sample(3, 10, 0.0);
        let x2 = sample(4, 10, 0.0);
        let opts = TestOptions {
            test: TestKind::KnnSmooth,
            k: 2,
            lambda: Some(1.0),
            permutations: 200,
            ..Default::default()
        };
        let r = run_test_on_samples(&x1, &x2, &opts).unwrap();
        assert_eq!(r.test_name, "knn-smooth");
        assert!(r.t_stat.is_some());
        let p = r.p_normal.unwrap();
        assert!(p > 0.0 && p < 1.0);
        assert!(r.p_permutation > 0.0 && r.p_permutation <= 1.0);
        assert_eq!(r.k, Some(2));
    }

    #[test]
    fn classical_report_omits_t() {
        let x1 = sample(5, 8, 0.0);
        let x2 = sample(6, 8, 0.0);
        let opts = TestOptions {
            test: TestKind::Fr,
            permutations: 99,
            ..Default::default()
        };
        let r = run_test_on_samples(&x1, &x2, &opts).unwrap();
        assert!(r.t_stat.is_none() && r.p_normal.is_none() && r.lambda.is_none());
        let json = serde_json::to_string(&r).unwrap();
        assert!(!json.contains("t_stat"));
    }

    #[test]
    fn gamma_resolves_against_dimension() {
        let opts = TestOptions {
            gamma: Some(0.5),
            lambda: None,
            ..Default::default()
        };
        assert!((opts.resolve_lambda(16).unwrap() - 4.0).abs() < 1e-12);
        let both = TestOptions {
            gamma: Some(0.5),
            lambda: Some(1.0),
            ..Default::default()
        };
        assert!(both.resolve_lambda(16).is_err());
    }

    #[test]
    fn identical_samples_give_large_p() {
        let x = sample(7, 12, 0.0);
        for test in [TestKind::Fr, TestKind::FrSmooth, TestKind::Energy] {
            let opts = TestOptions {
                test,
                lambda: if test.is_smooth() { Some(1.0) } else { None },
                permutations: 200,
                seed: 9,
                ..Default::default()
            };
            let r = run_test_on_samples(&x, &x, &opts).unwrap();
            assert!(
                r.p_permutation > 0.2,
                "{}: p = {}",
                r.test_name,
                r.p_permutation
            );
        }
    }
}
