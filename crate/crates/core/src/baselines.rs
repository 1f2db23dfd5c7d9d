//! Comparison statistics: unbiased MMD with a squared-exponential kernel,
//! the energy statistic, and the median-heuristic bandwidth.

use crate::error::{Error, Result};
use crate::geometry::{euclidean, PointSample, PooledData};

/// Bandwidth of the squared-exponential kernel, in distance units.
#[derive(Debug, Clone, Copy)]
pub struct KernelConfig {
    pub bandwidth: f64,
}

impl KernelConfig {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if bandwidth <= 0.0 || !bandwidth.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bandwidth = {bandwidth} must be positive and finite"
            )));
        }
        Ok(KernelConfig { bandwidth })
    }
}

#[inline]
fn sq_exp_kernel(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    let d = euclidean(a, b);
    (-d * d / (2.0 * sigma * sigma)).exp()
}

/// Unbiased MMD^2 estimator: within-sample kernel means exclude the diagonal.
pub fn mmd_unbiased(x1: &PointSample, x2: &PointSample, cfg: &KernelConfig) -> Result<f64> {
    if x1.dim() != x2.dim() {
        return Err(Error::DimensionMismatch {
            left: x1.dim(),
            right: x2.dim(),
        });
    }
    let (n1, n2) = (x1.len(), x2.len());
    if n1 < 2 || n2 < 2 {
        return Err(Error::TooFewPoints {
            required: 2,
            actual: n1.min(n2),
        });
    }
    let sigma = cfg.bandwidth;
    let mut within1 = 0.0;
    for i in 0..n1 {
        for j in 0..n1 {
            if i != j {
                within1 += sq_exp_kernel(x1.row(i), x1.row(j), sigma);
            }
        }
    }
    let mut within2 = 0.0;
    for i in 0..n2 {
        for j in 0..n2 {
            if i != j {
                within2 += sq_exp_kernel(x2.row(i), x2.row(j), sigma);
            }
        }
    }
    let mut cross = 0.0;
    for i in 0..n1 {
        for j in 0..n2 {
            cross += sq_exp_kernel(x1.row(i), x2.row(j), sigma);
        }
    }
    Ok(within1 / (n1 * (n1 - 1)) as f64 + within2 / (n2 * (n2 - 1)) as f64
        - 2.0 * cross / (n1 * n2) as f64)
}

/// Energy statistic `2 E||X-Y|| - E||X-X'|| - E||Y-Y'||` with within-sample
/// means over ordered distinct pairs.
pub fn energy_statistic(x1: &PointSample, x2: &PointSample) -> Result<f64> {
    if x1.dim() != x2.dim() {
        return Err(Error::DimensionMismatch {
            left: x1.dim(),
            right: x2.dim(),
        });
    }
    let (n1, n2) = (x1.len(), x2.len());
    if n1 == 0 || n2 == 0 {
        return Err(Error::TooFewPoints {
            required: 1,
            actual: 0,
        });
    }
    let mut cross = 0.0;
    for i in 0..n1 {
        for j in 0..n2 {
            cross += euclidean(x1.row(i), x2.row(j));
        }
    }
    let mean_pairs = |s: &PointSample| -> f64 {
        let n = s.len();
        if n < 2 {
            return 0.0;
        }
        let mut sum = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                sum += euclidean(s.row(i), s.row(j));
            }
        }
        2.0 * sum / (n * (n - 1)) as f64
    };
    Ok(2.0 * cross / (n1 * n2) as f64 - mean_pairs(x1) - mean_pairs(x2))
}

/// Bandwidth from the median of all pooled pairwise distances; even counts
/// take the lower median so the choice is deterministic.
pub fn median_heuristic(pooled: &PooledData) -> Result<KernelConfig> {
    let pts = pooled.points();
    let n = pts.len();
    if n < 2 {
        return Err(Error::TooFewPoints {
            required: 2,
            actual: n,
        });
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(euclidean(pts.row(i), pts.row(j)));
        }
    }
    dists.sort_unstable_by(f64::total_cmp);
    let median = dists[(dists.len() - 1) / 2];
    if median == 0.0 {
        return Err(Error::DegenerateBandwidth);
    }
    KernelConfig::new(median)
}
