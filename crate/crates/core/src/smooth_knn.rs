//! The smoothed k-NN test: exact marginal inference in the per-node
//! k-subset cardinality model, the smoothed statistic, and its gradients.
//!
//! For each target vertex the model picks a k-subset of the remaining
//! vertices with probability proportional to `exp(-sum d / lambda)`.
//! Marginals come from a forward-backward recursion over (position,
//! count-so-far) states, run in the log domain so small temperatures do not
//! underflow. Gradients are an exact adjoint of that recursion, not the
//! approximate Jacobian sometimes used for cardinality potentials.

use crate::error::{Error, Result};
use crate::geometry::{crosses, distance_grad_to_points, EdgeMode, EdgeSystem, PooledData};
use crate::linalg::Matrix;
use crate::marginals::MarginalVector;
use crate::stats::log_add_exp;

/// Beyond this many log-units the excluded subsets carry no f64 mass and the
/// model degenerates to hard selection.
pub(crate) const HARD_LOG_LIMIT: f64 = 700.0;

/// The k-subset Gibbs model at a single node: one logit per candidate
/// source, `logit = -d / lambda`.
#[derive(Debug, Clone)]
pub struct CardinalityModel {
    logits: Vec<f64>,
    k: usize,
}

impl CardinalityModel {
    pub fn new(logits: Vec<f64>, k: usize) -> Result<Self> {
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("logits must be finite".into()));
        }
        if k == 0 || k > logits.len() {
            return Err(Error::InvalidParameter(format!(
                "subset size k = {k} out of range 1..={}",
                logits.len()
            )));
        }
        Ok(CardinalityModel { logits, k })
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// Exact inclusion marginals `P(candidate in subset)` of the k-subset model.
/// Entries lie in [0, 1] and sum to `k`.
pub fn cardinality_marginals(model: &CardinalityModel) -> Result<Vec<f64>> {
    let shifted = shift_logits(&model.logits);
    Ok(chain_marginals(&shifted, model.k, None).0)
}

/// Marginals together with the adjoint of the recursion: given
/// `upstream_i = d(objective)/d(mu_i)`, returns `d(objective)/d(logit_i)`.
pub fn cardinality_marginal_gradients(
    model: &CardinalityModel,
    upstream: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if upstream.len() != model.logits.len() {
        return Err(Error::InvalidInput(format!(
            "upstream length {} does not match {} candidates",
            upstream.len(),
            model.logits.len()
        )));
    }
    let shifted = shift_logits(&model.logits);
    let (mu, grad) = chain_marginals(&shifted, model.k, Some(upstream));
    Ok((mu, grad.expect("adjoint requested")))
}

fn shift_logits(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    logits.iter().map(|&v| v - max).collect()
}

/// Forward-backward over the chain of candidates.
///
/// `lw` are per-candidate log-weights, `k` the subset size. When `upstream`
/// carries d(objective)/d(marginal) per candidate, the adjoint pass also
/// returns d(objective)/d(log-weight).
fn chain_marginals(lw: &[f64], k: usize, upstream: Option<&[f64]>) -> (Vec<f64>, Option<Vec<f64>>) {
    let m = lw.len();
    debug_assert!(k >= 1 && k <= m);
    if k == m {
        // Saturated: the only valid subset takes everything.
        let grad = upstream.map(|_| vec![0.0; m]);
        return (vec![1.0; m], grad);
    }
    if k == 1 {
        // The recursion collapses to a softmax over the candidates. The
        // logits arrive max-shifted, so the partition sum is at least one.
        let mut mu: Vec<f64> = lw.iter().map(|&w| w.exp()).collect();
        let z: f64 = mu.iter().sum();
        mu.iter_mut().for_each(|v| *v = (*v / z).min(1.0));
        let grad = upstream.map(|up| {
            let dot: f64 = mu.iter().zip(up).map(|(m, u)| m * u).sum();
            mu.iter().zip(up).map(|(m, u)| m * (u - dot)).collect()
        });
        return (mu, grad);
    }
    let width = k + 1;
    let neg = f64::NEG_INFINITY;

    // lf[t][c]: log-mass of picking c among the first t candidates.
    let mut lf = vec![neg; (m + 1) * width];
    lf[0] = 0.0;
    for t in 1..=m {
        let w = lw[t - 1];
        for c in 0..width {
            let skip = lf[(t - 1) * width + c];
            let take = if c > 0 {
                lf[(t - 1) * width + c - 1] + w
            } else {
                neg
            };
            lf[t * width + c] = log_add_exp(skip, take);
        }
    }
    // rb[t][c]: log-mass of picking c among candidates t..m.
    let mut rb = vec![neg; (m + 1) * width];
    rb[m * width] = 0.0;
    for t in (0..m).rev() {
        let w = lw[t];
        for c in 0..width {
            let skip = rb[(t + 1) * width + c];
            let take = if c > 0 {
                rb[(t + 1) * width + c - 1] + w
            } else {
                neg
            };
            rb[t * width + c] = log_add_exp(skip, take);
        }
    }
    let log_z = lf[m * width + k];
    debug_assert!(log_z.is_finite());

    // Marginal of candidate t: it is taken, the prefix contributes c picks
    // and the suffix the remaining k-1-c.
    let mut mu = vec![0.0; m];
    let mut log_inner = vec![neg; m];
    for t in 0..m {
        let mut s = neg;
        for c in 0..k {
            s = log_add_exp(s, lf[t * width + c] + rb[(t + 1) * width + (k - 1 - c)]);
        }
        log_inner[t] = s;
        mu[t] = (lw[t] + s - log_z).exp().min(1.0);
    }

    let Some(up) = upstream else {
        return (mu, None);
    };

    // Adjoint pass, mirroring every log-add-exp above.
    let mut g_lw = vec![0.0; m];
    let mut g_lf = vec![0.0; (m + 1) * width];
    let mut g_rb = vec![0.0; (m + 1) * width];
    let mut g_log_z = 0.0;
    for t in 0..m {
        let ga = up[t] * mu[t];
        if ga == 0.0 {
            continue;
        }
        g_lw[t] += ga;
        g_log_z -= ga;
        let s = log_inner[t];
        if s == neg {
            continue;
        }
        for c in 0..k {
            let term = lf[t * width + c] + rb[(t + 1) * width + (k - 1 - c)];
            if term == neg {
                continue;
            }
            let weight = (term - s).exp();
            g_lf[t * width + c] += ga * weight;
            g_rb[(t + 1) * width + (k - 1 - c)] += ga * weight;
        }
    }
    g_lf[m * width + k] += g_log_z;

    // Reverse of the forward recursion.
    for t in (1..=m).rev() {
        let w = lw[t - 1];
        for c in 0..width {
            let g = g_lf[t * width + c];
            if g == 0.0 {
                continue;
            }
            let v = lf[t * width + c];
            if v == neg {
                continue;
            }
            let skip = lf[(t - 1) * width + c];
            if skip != neg {
                g_lf[(t - 1) * width + c] += g * (skip - v).exp();
            }
            if c > 0 {
                let take = lf[(t - 1) * width + c - 1] + w;
                if take != neg {
                    let gw = g * (take - v).exp();
                    g_lf[(t - 1) * width + c - 1] += gw;
                    g_lw[t - 1] += gw;
                }
            }
        }
    }
    // Reverse of the backward recursion (which was built from the far end).
    for t in 0..m {
        let w = lw[t];
        for c in 0..width {
            let g = g_rb[t * width + c];
            if g == 0.0 {
                continue;
            }
            let v = rb[t * width + c];
            if v == neg {
                continue;
            }
            let skip = rb[(t + 1) * width + c];
            if skip != neg {
                g_rb[(t + 1) * width + c] += g * (skip - v).exp();
            }
            if c > 0 {
                let take = rb[(t + 1) * width + c - 1] + w;
                if take != neg {
                    let gw = g * (take - v).exp();
                    g_rb[(t + 1) * width + c - 1] += gw;
                    g_lw[t] += gw;
                }
            }
        }
    }
    (mu, Some(g_lw))
}

fn validate_smooth_args(es: &EdgeSystem, data: &PooledData, lambda: f64, k: usize) -> Result<()> {
    es.expect_mode(EdgeMode::Directed)?;
    if es.vertex_count() != data.n() {
        return Err(Error::InvalidInput(format!(
            "edge system over {} vertices does not match pooled n = {}",
            es.vertex_count(),
            data.n()
        )));
    }
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "temperature lambda = {lambda} must be positive and finite"
        )));
    }
    let n = es.vertex_count();
    if k == 0 || k > n - 1 {
        return Err(Error::InvalidParameter(format!(
            "k = {k} out of range 1..={}",
            n - 1
        )));
    }
    Ok(())
}

/// Per-node inference shared by the statistic and its gradients. For every
/// target vertex this computes candidate marginals and, when a cotangent is
/// supplied, the gradient with respect to the per-edge distances.
fn knn_marginals_impl(
    es: &EdgeSystem,
    lambda: f64,
    k: usize,
    cotangent: Option<&[f64]>,
) -> (Vec<f64>, Option<Vec<f64>>) {
    let n = es.vertex_count();
    let mut mu = vec![0.0; es.edge_count()];
    let mut grad = cotangent.map(|_| vec![0.0; es.edge_count()]);

    let m = n - 1;
    let mut dist = vec![0.0; m];
    let mut edge_ids = vec![0usize; m];
    let mut order: Vec<usize> = Vec::with_capacity(m);
    for target in 0..n {
        for p in 0..m {
            let source = if p < target { p } else { p + 1 };
            let e = es.index_of(source, target);
            edge_ids[p] = e;
            dist[p] = es.distance(e);
        }
        // Low-temperature regime: when the gap between the k-th and (k+1)-th
        // nearest candidate dwarfs lambda, every f64 bit of mass sits on the
        // hard top-k selection; take it directly (classical tie-break) and
        // define the gradient as zero.
        let hard = if k == m {
            true
        } else if k == 1 {
            // Margin check without a sort: the two smallest distances.
            let mut best = 0usize;
            for p in 1..m {
                if dist[p] < dist[best] {
                    best = p;
                }
            }
            let mut runner_up = f64::INFINITY;
            for p in 0..m {
                if p != best && dist[p] < runner_up {
                    runner_up = dist[p];
                }
            }
            order.clear();
            order.push(best);
            (runner_up - dist[best]) / lambda > HARD_LOG_LIMIT + (m as f64).ln()
        } else {
            order.clear();
            order.extend(0..m);
            order.sort_unstable_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
            let gap = (dist[order[k]] - dist[order[k - 1]]) / lambda;
            // A non-representable logit among the selected k also forces the
            // hard route; the log-domain recursion needs finite mass.
            let spread = (dist[order[k - 1]] - dist[order[0]]) / lambda;
            !spread.is_finite() || gap > HARD_LOG_LIMIT + k as f64 * (m as f64).ln()
        };
        if hard {
            if k == m {
                for p in 0..m {
                    mu[edge_ids[p]] = 1.0;
                }
            } else {
                for &p in order.iter().take(k) {
                    mu[edge_ids[p]] = 1.0;
                }
            }
            continue;
        }
        // Shift by the node's nearest distance; marginals are invariant and
        // the largest logit becomes exactly zero.
        let dmin = dist.iter().cloned().fold(f64::INFINITY, f64::min);
        let lw: Vec<f64> = dist.iter().map(|&d| -(d - dmin) / lambda).collect();
        let up: Option<Vec<f64>> = cotangent.map(|c| (0..m).map(|p| c[edge_ids[p]]).collect());
        let (node_mu, node_grad) = chain_marginals(&lw, k, up.as_deref());
        for p in 0..m {
            mu[edge_ids[p]] = node_mu[p];
        }
        if let (Some(g), Some(ng)) = (grad.as_mut(), node_grad) {
            for p in 0..m {
                g[edge_ids[p]] = -ng[p] / lambda;
            }
        }
    }
    (mu, grad)
}

/// Edge marginals of the smoothed k-NN model over a directed edge system.
pub fn knn_marginals(es: &EdgeSystem, lambda: f64, k: usize) -> Result<MarginalVector> {
    es.expect_mode(EdgeMode::Directed)?;
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "temperature lambda = {lambda} must be positive and finite"
        )));
    }
    let n = es.vertex_count();
    if k == 0 || k > n - 1 {
        return Err(Error::InvalidParameter(format!(
            "k = {k} out of range 1..={}",
            n - 1
        )));
    }
    let (mu, _) = knn_marginals_impl(es, lambda, k, None);
    Ok(MarginalVector::new(mu, lambda))
}

/// The smoothed k-NN statistic `T = sum_e Delta(e) mu_e` and the marginals
/// it was computed from.
pub fn smooth_knn_statistic(
    es: &EdgeSystem,
    data: &PooledData,
    lambda: f64,
    k: usize,
) -> Result<(f64, MarginalVector)> {
    validate_smooth_args(es, data, lambda, k)?;
    let mu = knn_marginals(es, lambda, k)?;
    let labels = data.labels();
    let t = es
        .iter()
        .filter(|&(_, (i, j), _)| crosses(labels, i, j))
        .map(|(e, _, _)| mu.values()[e])
        .sum();
    Ok((t, mu))
}

/// Gradient of `sum_e cotangent_e mu_e` with respect to each directed
/// distance slot. The two slots of a vertex pair are treated as independent
/// coordinates; the gradient of the shared geometric distance is their sum.
pub fn smooth_knn_vjp(
    es: &EdgeSystem,
    lambda: f64,
    k: usize,
    cotangent: &[f64],
) -> Result<(MarginalVector, Vec<f64>)> {
    es.expect_mode(EdgeMode::Directed)?;
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "temperature lambda = {lambda} must be positive and finite"
        )));
    }
    let n = es.vertex_count();
    if k == 0 || k > n - 1 {
        return Err(Error::InvalidParameter(format!(
            "k = {k} out of range 1..={}",
            n - 1
        )));
    }
    if cotangent.len() != es.edge_count() {
        return Err(Error::InvalidInput(format!(
            "cotangent length {} does not match edge count {}",
            cotangent.len(),
            es.edge_count()
        )));
    }
    let (mu, grad) = knn_marginals_impl(es, lambda, k, Some(cotangent));
    Ok((MarginalVector::new(mu, lambda), grad.unwrap()))
}

/// Gradients of the smoothed statistic with respect to distances and input
/// points. `upstream` scales the whole result (the cotangent of `T`).
pub fn smooth_knn_backward(
    es: &EdgeSystem,
    data: &PooledData,
    lambda: f64,
    k: usize,
    upstream: f64,
) -> Result<(Vec<f64>, Matrix)> {
    validate_smooth_args(es, data, lambda, k)?;
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
    let (_, grad_d) = smooth_knn_vjp(es, lambda, k, &cotangent)?;
    let grad_points = distance_grad_to_points(es, data.points(), &grad_d);
    Ok((grad_d, grad_points))
}
