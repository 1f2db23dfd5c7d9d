#![allow(clippy::needless_range_loop)]

//! Property tests for the structural invariants.

use proptest::prelude::*;

use graphtest::classical::{knn_edges, mst_kruskal};
use graphtest::smooth_fr::st_marginals;
use graphtest::smooth_knn::knn_marginals;
use graphtest::{pairwise_distances, EdgeMode, Metric, PointSample};

fn sample_strategy(max_n: usize) -> impl Strategy<Value = PointSample> {
    (2usize..=max_n, 1usize..=3).prop_flat_map(|(n, d)| {
        proptest::collection::vec(-10.0f64..10.0, n * d)
            .prop_map(move |coords| PointSample::new(coords, d).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn triangle_inequality_holds(sample in sample_strategy(10)) {
        let es = pairwise_distances(&sample, Metric::Euclidean, EdgeMode::Undirected).unwrap();
        let n = sample.len();
        for a in 0..n {
            for b in (a + 1)..n {
                for c in 0..n {
                    if c == a || c == b {
                        continue;
                    }
                    let ab = es.distance(es.index_of(a, b));
                    let ac = es.distance(es.index_of(a, c));
                    let cb = es.distance(es.index_of(c, b));
                    prop_assert!(ab <= ac + cb + 1e-9);
                }
            }
        }
    }

    #[test]
    fn edge_order_is_deterministic(sample in sample_strategy(8)) {
        let a = pairwise_distances(&sample, Metric::Euclidean, EdgeMode::Directed).unwrap();
        let b = pairwise_distances(&sample, Metric::Euclidean, EdgeMode::Directed).unwrap();
        prop_assert_eq!(a.distances(), b.distances());
        for e in 0..a.edge_count() {
            prop_assert_eq!(a.endpoints(e), b.endpoints(e));
        }
    }

    #[test]
    fn mst_weight_is_minimal_over_enumerated_trees(sample in sample_strategy(6)) {
        let es = pairwise_distances(&sample, Metric::Euclidean, EdgeMode::Undirected).unwrap();
        let mst = mst_kruskal(&es).unwrap();
        let weight: f64 = mst.edge_indices().iter().map(|&e| es.distance(e)).sum();
        let best = graphtest::oracles::labeled_trees(sample.len())
            .into_iter()
            .map(|tree| {
                tree.iter()
                    .map(|&(i, j)| es.distance(es.index_of(i, j)))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        prop_assert!((weight - best).abs() < 1e-9);
    }

    #[test]
    fn knn_degrees_and_marginal_sums_agree(
        sample in sample_strategy(8),
        k in 1usize..4,
        lambda in 0.05f64..5.0,
    ) {
        let n = sample.len();
        prop_assume!(k < n);
        let es = pairwise_distances(&sample, Metric::Euclidean, EdgeMode::Directed).unwrap();
        let hard = knn_edges(&es, k).unwrap();
        let mut indeg = vec![0usize; n];
        for &e in hard.edge_indices() {
            indeg[es.endpoints(e).1] += 1;
        }
        prop_assert!(indeg.iter().all(|&d| d == k));

        let mu = knn_marginals(&es, lambda, k).unwrap();
        prop_assert!(mu.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        for target in 0..n {
            let sum: f64 = (0..n)
                .filter(|&s| s != target)
                .map(|s| mu.values()[es.index_of(s, target)])
                .sum();
            prop_assert!((sum - k as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn tree_marginals_stay_in_range_and_sum(
        sample in sample_strategy(9),
        lambda in 0.1f64..5.0,
    ) {
        let es = pairwise_distances(&sample, Metric::Euclidean, EdgeMode::Undirected).unwrap();
        // Stay where the factorization is comfortably conditioned; the
        // conditioning error path for extreme spreads has its own test.
        let spread = es.distances().iter().cloned().fold(0.0, f64::max)
            - es.distances().iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread / lambda < 30.0);
        let mu = st_marginals(&es, lambda).unwrap();
        prop_assert!(mu.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        let target = (sample.len() - 1) as f64;
        prop_assert!((mu.sum() - target).abs() < 1e-9);
    }
}
