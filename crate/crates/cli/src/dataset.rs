//! Synthetic data sources for the experiments: Gaussian location/scale
//! alternatives and the two-moons toy distribution.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use graphtest::PointSample;

/// `n` draws from `N(0, I_d)`.
pub fn standard_gaussian<R: Rng>(n: usize, d: usize, rng: &mut R) -> PointSample {
    let data: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(rng)).collect();
    PointSample::new(data, d).expect("finite draws")
}

/// `n` draws from `N((mu, 0, ..., 0), diag(sigma^2, 1, ..., 1))`: the first
/// coordinate carries both the location shift and the scale change.
pub fn shifted_scaled_gaussian<R: Rng>(
    n: usize,
    d: usize,
    mu_shift: f64,
    sigma_scale: f64,
    rng: &mut R,
) -> PointSample {
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let first: f64 = StandardNormal.sample(rng);
        data.push(mu_shift + sigma_scale * first);
        for _ in 1..d {
            data.push(StandardNormal.sample(rng));
        }
    }
    PointSample::new(data, d).expect("finite draws")
}

/// Random draws from the two-moons distribution: two interleaved half
/// circles with isotropic Gaussian noise. Each point picks its moon and arc
/// position uniformly at random.
pub fn two_moons<R: Rng>(n: usize, noise: f64, rng: &mut R) -> PointSample {
    let jitter = Normal::new(0.0, noise).expect("noise >= 0");
    let mut data = Vec::with_capacity(n * 2);
    for _ in 0..n {
        let t = rng.gen_range(0.0..std::f64::consts::PI);
        let (x, y) = if rng.gen::<bool>() {
            (t.cos(), t.sin())
        } else {
            (1.0 - t.cos(), 0.5 - t.sin())
        };
        data.push(x + jitter.sample(rng));
        data.push(y + jitter.sample(rng));
    }
    PointSample::new(data, 2).expect("finite draws")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shapes_are_right() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = standard_gaussian(7, 3, &mut rng);
        assert_eq!((g.len(), g.dim()), (7, 3));
        let m = two_moons(11, 0.05, &mut rng);
        assert_eq!((m.len(), m.dim()), (11, 2));
    }

    #[test]
    fn scale_alternative_spreads_first_coordinate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = shifted_scaled_gaussian(4000, 2, 0.0, 3.0, &mut rng);
        let var = |col: usize| {
            let mean: f64 = (0..s.len()).map(|i| s.row(i)[col]).sum::<f64>() / s.len() as f64;
            (0..s.len())
                .map(|i| (s.row(i)[col] - mean).powi(2))
                .sum::<f64>()
                / s.len() as f64
        };
        assert!(var(0) > 7.0 && var(0) < 11.0);
        assert!(var(1) > 0.8 && var(1) < 1.2);
    }

    #[test]
    fn moons_live_in_the_expected_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = two_moons(500, 0.05, &mut rng);
        for i in 0..m.len() {
            let p = m.row(i);
            assert!(p[0] > -1.5 && p[0] < 2.5);
            assert!(p[1] > -1.0 && p[1] < 1.5);
        }
    }
}
