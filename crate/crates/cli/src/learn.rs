//! Desk-scale implicit-model learning: push Gaussian noise through a small
//! generator and ascend the smoothed t-statistic against two-moons data.
//!
//! The objective is `t = (T - mean) / sqrt(V)`. The null mean is constant in
//! the points, but `V` depends on the marginals, so the gradient carries two
//! pieces: the crossing cotangent scaled by `1/sqrt(V)` and the variance
//! cotangent `-(T - mean) dV/dmu / (2 V^(3/2))`. Both flow through the
//! exact inference backward passes and then through the generator by
//! hand-rolled reverse mode.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Serialize;

use graphtest::geometry::distance_grad_to_points;
use graphtest::linalg::Matrix;
use graphtest::null_calculus::{null_moments, null_variance_gradient, t_statistic};
use graphtest::smooth_fr::{smooth_fr_statistic, smooth_fr_vjp};
use graphtest::smooth_knn::{smooth_knn_statistic, smooth_knn_vjp};
use graphtest::{
    pairwise_distances, pool_samples, EdgeMode, Error, Metric, PointSample, PooledData, Result,
};

use crate::dataset::two_moons;
use crate::report::TestKind;

/// Generator architectures for the demo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Architecture {
    Affine,
    OneHiddenTanh { width: usize },
}

/// A small generator `x = f_theta(z)` with flat parameter storage so the
/// optimizer and finite-difference checks can treat it as one vector.
#[derive(Debug, Clone, Serialize)]
pub struct GeneratorParams {
    pub arch: Architecture,
    pub noise_dim: usize,
    pub out_dim: usize,
    pub theta: Vec<f64>,
}

impl GeneratorParams {
    pub fn init(arch: Architecture, noise_dim: usize, out_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = Normal::new(0.0, 0.1).unwrap();
        let count = match arch {
            Architecture::Affine => noise_dim * out_dim + out_dim,
            Architecture::OneHiddenTanh { width } => {
                noise_dim * width + width + width * out_dim + out_dim
            }
        };
        let theta = (0..count).map(|_| scale.sample(&mut rng)).collect();
        GeneratorParams {
            arch,
            noise_dim,
            out_dim,
            theta,
        }
    }

    pub fn param_count(&self) -> usize {
        self.theta.len()
    }

    /// Map a noise batch (`n x noise_dim`, row-major) to points, returning
    /// the hidden activations needed by the backward pass.
    pub fn forward(&self, z: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
        let (nd, od) = (self.noise_dim, self.out_dim);
        match self.arch {
            Architecture::Affine => {
                let (w, b) = self.theta.split_at(nd * od);
                let mut x = vec![0.0; n * od];
                for r in 0..n {
                    for c in 0..od {
                        let mut acc = b[c];
                        for a in 0..nd {
                            acc += z[r * nd + a] * w[a * od + c];
                        }
                        x[r * od + c] = acc;
                    }
                }
                (x, Vec::new())
            }
            Architecture::OneHiddenTanh { width } => {
                let (w1, rest) = self.theta.split_at(nd * width);
                let (b1, rest) = rest.split_at(width);
                let (w2, b2) = rest.split_at(width * od);
                let mut h = vec![0.0; n * width];
                for r in 0..n {
                    for c in 0..width {
                        let mut acc = b1[c];
                        for a in 0..nd {
                            acc += z[r * nd + a] * w1[a * width + c];
                        }
                        h[r * width + c] = acc.tanh();
                    }
                }
                let mut x = vec![0.0; n * od];
                for r in 0..n {
                    for c in 0..od {
                        let mut acc = b2[c];
                        for a in 0..width {
                            acc += h[r * width + a] * w2[a * od + c];
                        }
                        x[r * od + c] = acc;
                    }
                }
                (x, h)
            }
        }
    }

    /// Accumulate `d(objective)/d(theta)` from the gradient on the generated
    /// points.
    pub fn backward(&self, z: &[f64], n: usize, hidden: &[f64], grad_x: &[f64]) -> Vec<f64> {
        let (nd, od) = (self.noise_dim, self.out_dim);
        let mut grad = vec![0.0; self.theta.len()];
        match self.arch {
            Architecture::Affine => {
                let (gw, gb) = grad.split_at_mut(nd * od);
                for r in 0..n {
                    for c in 0..od {
                        let g = grad_x[r * od + c];
                        gb[c] += g;
                        for a in 0..nd {
                            gw[a * od + c] += z[r * nd + a] * g;
                        }
                    }
                }
            }
            Architecture::OneHiddenTanh { width } => {
                let (w1_len, b1_len, w2_len) = (nd * width, width, width * od);
                let w2 = &self.theta[w1_len + b1_len..w1_len + b1_len + w2_len];
                // Backprop through the output layer into the activations.
                let mut gh = vec![0.0; n * width];
                for r in 0..n {
                    for c in 0..od {
                        let g = grad_x[r * od + c];
                        grad[w1_len + b1_len + w2_len + c] += g; // b2
                        for a in 0..width {
                            grad[w1_len + b1_len + a * od + c] += hidden[r * width + a] * g;
                            gh[r * width + a] += w2[a * od + c] * g;
                        }
                    }
                }
                // Through tanh into the first layer.
                for r in 0..n {
                    for c in 0..width {
                        let hval = hidden[r * width + c];
                        let gpre = gh[r * width + c] * (1.0 - hval * hval);
                        grad[w1_len + c] += gpre; // b1
                        for a in 0..nd {
                            grad[a * width + c] += z[r * nd + a] * gpre;
                        }
                    }
                }
            }
        }
        grad
    }
}

/// Adam state for ascent on a flat parameter vector.
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(dim: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    /// One ascent step along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / b1t;
            let vhat = self.v[i] / b2t;
            params[i] += self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone)]
pub struct LearnConfig {
    pub test: TestKind,
    pub k: usize,
    pub lambda: f64,
    /// Per-sample batch size (both the data batch and the generated batch).
    pub batch: usize,
    pub steps: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub arch: Architecture,
    pub noise_dim: usize,
    pub moons_noise: f64,
    pub seed: u64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            test: TestKind::KnnSmooth,
            k: 1,
            lambda: 1.0,
            batch: 256,
            steps: 500,
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            arch: Architecture::Affine,
            noise_dim: 10,
            moons_noise: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug)]
pub struct LearnOutcome {
    pub params: GeneratorParams,
    /// Smoothed t-statistic after each step.
    pub trace: Vec<f64>,
    /// Final generated sample (batch x 2).
    pub samples: PointSample,
}

/// Smoothed t-statistic and its gradient with respect to all pooled points.
pub fn smooth_t_with_point_grad(
    test: TestKind,
    data: &PooledData,
    lambda: f64,
    k: usize,
) -> Result<(f64, Matrix)> {
    let n = data.n();
    let labels = data.labels();
    let (es, t_raw, mu, m) = match test {
        TestKind::FrSmooth => {
            let es =
                pairwise_distances(data.points(), Metric::Euclidean, EdgeMode::Undirected)?;
            let (t, mu) = smooth_fr_statistic(&es, data, lambda)?;
            (es, t, mu, n - 1)
        }
        TestKind::KnnSmooth => {
            let es = pairwise_distances(data.points(), Metric::Euclidean, EdgeMode::Directed)?;
            let (t, mu) = smooth_knn_statistic(&es, data, lambda, k)?;
            (es, t, mu, k * n)
        }
        _ => {
            return Err(Error::InvalidParameter(
                "learning needs a smoothed test".into(),
            ))
        }
    };
    let moments = null_moments(mu.values(), &es, data.n1(), data.n2(), m)?;
    let t = t_statistic(t_raw, &moments)?;
    let sigma = moments.variance.sqrt();
    let dvar = null_variance_gradient(mu.values(), &es, data.n1(), data.n2())?;
    let scale_var = (t_raw - moments.mean) / (2.0 * moments.variance * sigma);
    let cotangent: Vec<f64> = (0..es.edge_count())
        .map(|e| {
            let (i, j) = es.endpoints(e);
            let delta = if labels[i] != labels[j] { 1.0 } else { 0.0 };
            delta / sigma - scale_var * dvar[e]
        })
        .collect();
    let grad_d = match test {
        TestKind::FrSmooth => smooth_fr_vjp(&es, lambda, &cotangent)?.1,
        TestKind::KnnSmooth => smooth_knn_vjp(&es, lambda, k, &cotangent)?.1,
        _ => unreachable!(),
    };
    Ok((t, distance_grad_to_points(&es, data.points(), &grad_d)))
}

fn draw_noise(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n * dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Run the training loop; aborts with the step index if the objective
/// leaves the finite range.
pub fn learn_toy(cfg: &LearnConfig) -> Result<LearnOutcome> {
    if !cfg.test.is_smooth() {
        return Err(Error::InvalidParameter(
            "learning needs a smoothed test".into(),
        ));
    }
    if cfg.batch < 2 {
        return Err(Error::InvalidParameter("batch must be at least 2".into()));
    }
    let mut params = GeneratorParams::init(cfg.arch, cfg.noise_dim, 2, cfg.seed);
    let mut adam = Adam::new(
        params.param_count(),
        cfg.lr,
        cfg.beta1,
        cfg.beta2,
        cfg.adam_eps,
    );
    let mut trace = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let t = training_step(cfg, &mut params, &mut adam, step as u64)?;
        if !t.is_finite() {
            return Err(Error::Numerical(format!(
                "objective diverged at step {step}"
            )));
        }
        trace.push(t);
    }
    // Final sample from a held-out stream.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::MAX);
    let z = draw_noise(cfg.batch, cfg.noise_dim, &mut rng);
    let (x, _) = params.forward(&z, cfg.batch);
    let samples = PointSample::new(x, 2)?;
    Ok(LearnOutcome {
        params,
        trace,
        samples,
    })
}

fn training_step(
    cfg: &LearnConfig,
    params: &mut GeneratorParams,
    adam: &mut Adam,
    step: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(step);
    let moons = two_moons(cfg.batch, cfg.moons_noise, &mut rng);
    let z = draw_noise(cfg.batch, cfg.noise_dim, &mut rng);
    let (x, hidden) = params.forward(&z, cfg.batch);
    // A diverging generator shows up as non-finite coordinates first.
    let generated = PointSample::new(x, 2)
        .map_err(|e| Error::Numerical(format!("objective diverged at step {step}: {e}")))?;
    let data = pool_samples(&moons, &generated)?;

    let (t, grad_points) = smooth_t_with_point_grad(cfg.test, &data, cfg.lambda, cfg.k)?;

    // Only the generated block feeds back into the parameters.
    let n1 = moons.len();
    let mut grad_x = vec![0.0; cfg.batch * 2];
    for r in 0..cfg.batch {
        for c in 0..2 {
            grad_x[r * 2 + c] = grad_points.get(n1 + r, c);
        }
    }
    let grad_theta = params.backward(&z, cfg.batch, &hidden, &grad_x);
    adam.step(&mut params.theta, &grad_theta);
    Ok(t)
}

/// Mean smoothed t-statistic of the generator against fresh two-moons
/// batches; used to compare initialization and trained parameters.
pub fn mean_t_over_batches(
    params: &GeneratorParams,
    cfg: &LearnConfig,
    batches: usize,
    eval_seed: u64,
) -> Result<f64> {
    let mut total = 0.0;
    for b in 0..batches {
        let mut rng = ChaCha8Rng::seed_from_u64(eval_seed);
        rng.set_stream(b as u64);
        let moons = two_moons(cfg.batch, cfg.moons_noise, &mut rng);
        let z = draw_noise(cfg.batch, cfg.noise_dim, &mut rng);
        let (x, _) = params.forward(&z, cfg.batch);
        let generated = PointSample::new(x, 2)?;
        let data = pool_samples(&moons, &generated)?;
        let (t, _) = smooth_t_with_point_grad(cfg.test, &data, cfg.lambda, cfg.k)?;
        total += t;
    }
    Ok(total / batches as f64)
}
