//! Diagonal-covariance Gaussian mixtures fitted by expectation-maximization.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Lower bound on every per-dimension variance.
pub const COV_FLOOR: f64 = 1e-3;
pub const MAX_ITERATIONS: usize = 50;
pub const TOLERANCE: f64 = 1e-4;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Diagonals of the component covariances.
    pub variances: Vec<Vec<f64>>,
    /// Log-likelihood of the samples before the first and after every EM iteration.
    pub log_likelihood_trace: Vec<f64>,
}

impl GaussianMixture {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn iterations(&self) -> usize {
        self.log_likelihood_trace.len().saturating_sub(1)
    }

    /// Squared Mahalanobis distance from `z` to component `k`.
    pub fn mahalanobis_sq(&self, k: usize, z: &[f64]) -> f64 {
        z.iter()
            .zip(&self.means[k])
            .zip(&self.variances[k])
            .map(|((x, m), v)| (x - m) * (x - m) / v)
            .sum()
    }

    /// Peak-normalized mixture kernel `sum_k pi_k exp(-D_k^2 / (2 d))`, in `[0, 1]`.
    ///
    /// Dividing by the dimension `d` keeps a typical in-distribution sample
    /// (expected `D^2` about `d`) near `exp(-1/2)` whatever the feature count.
    pub fn match_probability(&self, z: &[f64]) -> f64 {
        let d = self.dim().max(1) as f64;
        let p: f64 = (0..self.k())
            .map(|k| self.weights[k] * (-0.5 * self.mahalanobis_sq(k, z) / d).exp())
            .sum();
        p.clamp(0.0, 1.0)
    }

    /// Copy with every component variance raised to at least `floor` (per dimension).
    pub fn widened(&self, floor: &[f64]) -> GaussianMixture {
        let mut g = self.clone();
        for var in &mut g.variances {
            for (v, f) in var.iter_mut().zip(floor) {
                *v = v.max(*f);
            }
        }
        g
    }

    fn log_component(&self, k: usize, x: &[f64]) -> f64 {
        let log_det: f64 = self.variances[k].iter().map(|v| v.ln()).sum();
        self.weights[k].ln() - 0.5 * (x.len() as f64 * LN_2PI + log_det + self.mahalanobis_sq(k, x))
    }

    /// Raw mixture density at `x`; may exceed 1.
    pub fn density(&self, x: &[f64]) -> f64 {
        (0..self.k())
            .filter(|&k| self.weights[k] > 0.0)
            .map(|k| self.log_component(k, x).exp())
            .sum()
    }

    pub fn log_likelihood<S: AsRef<[f64]>>(&self, samples: &[S]) -> f64 {
        samples
            .iter()
            .map(|s| log_sum_exp(&self.log_terms(s.as_ref())))
            .sum()
    }

    fn log_terms(&self, x: &[f64]) -> Vec<f64> {
        (0..self.k())
            .map(|k| {
                if self.weights[k] > 0.0 {
                    self.log_component(k, x)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect()
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Per-dimension variance of all samples (floored at [`COV_FLOOR`]).
pub fn pooled_variance<S: AsRef<[f64]>>(samples: &[S]) -> Result<Vec<f64>> {
    let dim = samples
        .first()
        .ok_or(Error::Empty("samples"))?
        .as_ref()
        .len();
    if samples.iter().any(|s| s.as_ref().len() != dim) {
        return Err(Error::Shape("samples must share a dimension".into()));
    }
    let all: Vec<usize> = (0..samples.len()).collect();
    Ok(moments(samples, &all, dim).1)
}

fn moments<S: AsRef<[f64]>>(samples: &[S], idx: &[usize], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = idx.len() as f64;
    let mut mean = vec![0.0; dim];
    for &i in idx {
        for (m, x) in mean.iter_mut().zip(samples[i].as_ref()) {
            *m += x / n;
        }
    }
    let mut var = vec![0.0; dim];
    for &i in idx {
        for ((v, x), m) in var.iter_mut().zip(samples[i].as_ref()).zip(&mean) {
            *v += (x - m) * (x - m) / n;
        }
    }
    var.iter_mut().for_each(|v| *v = v.max(COV_FLOOR));
    (mean, var)
}

/// Leading eigenvector of the sample covariance by power iteration from a seeded start.
fn principal_axis<S: AsRef<[f64]>>(samples: &[S], dim: usize, seed: u64) -> Vec<f64> {
    let n = samples.len();
    let data = DMatrix::from_fn(n, dim, |i, j| samples[i].as_ref()[j]);
    let mean = data.row_mean();
    let centered = DMatrix::from_fn(n, dim, |i, j| data[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    for _ in 0..100 {
        let next: Vec<f64> = (0..dim)
            .map(|i| (0..dim).map(|j| cov[(i, j)] * v[j]).sum())
            .collect();
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-300 {
            break;
        }
        v = next.into_iter().map(|x| x / norm).collect();
    }
    v
}

/// Fit a `k`-component diagonal mixture.
///
/// One component starts from the sample moments; two components start from
/// a median split along the first principal axis. EM stops when the
/// log-likelihood gain drops below [`TOLERANCE`] or after [`MAX_ITERATIONS`].
pub fn fit_gmm<S: AsRef<[f64]>>(samples: &[S], k: usize, seed: u64) -> Result<GaussianMixture> {
    if k == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if samples.len() < k {
        return Err(Error::TooFewSamples {
            needed: k,
            got: samples.len(),
        });
    }
    let dim = samples[0].as_ref().len();
    if dim == 0 || samples.iter().any(|s| s.as_ref().len() != dim) {
        return Err(Error::Shape(
            "samples must share a non-zero dimension".into(),
        ));
    }
    let n = samples.len();

    let groups: Vec<Vec<usize>> = if k == 1 {
        vec![(0..n).collect()]
    } else {
        let axis = principal_axis(samples, dim, seed);
        let mut order: Vec<(f64, usize)> = samples
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_ref().iter().zip(&axis).map(|(x, a)| x * a).sum(), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let per = n / k;
        (0..k)
            .map(|c| {
                let end = if c + 1 == k { n } else { (c + 1) * per };
                order[c * per..end].iter().map(|&(_, i)| i).collect()
            })
            .collect()
    };

    let mut g = GaussianMixture {
        weights: Vec::with_capacity(k),
        means: Vec::with_capacity(k),
        variances: Vec::with_capacity(k),
        log_likelihood_trace: Vec::new(),
    };
    // every component starts with the pooled variance so the first E-step
    // assigns by distance to the split means
    let all: Vec<usize> = (0..n).collect();
    let (_, pooled) = moments(samples, &all, dim);
    for idx in &groups {
        let (m, _) = moments(samples, idx, dim);
        g.weights.push(idx.len() as f64 / n as f64);
        g.means.push(m);
        g.variances.push(pooled.clone());
    }

    let (mut resp, mut ll) = e_step(&g, samples);
    g.log_likelihood_trace.push(ll);
    for _ in 0..MAX_ITERATIONS {
        m_step(&mut g, samples, &resp);
        let (r, new_ll) = e_step(&g, samples);
        g.log_likelihood_trace.push(new_ll);
        resp = r;
        let gain = new_ll - ll;
        ll = new_ll;
        if gain < TOLERANCE {
            break;
        }
    }
    Ok(g)
}

fn e_step<S: AsRef<[f64]>>(g: &GaussianMixture, samples: &[S]) -> (Vec<Vec<f64>>, f64) {
    let mut ll = 0.0;
    let resp = samples
        .iter()
        .map(|s| {
            let terms = g.log_terms(s.as_ref());
            let total = log_sum_exp(&terms);
            ll += total;
            terms.iter().map(|t| (t - total).exp()).collect()
        })
        .collect();
    (resp, ll)
}

fn m_step<S: AsRef<[f64]>>(g: &mut GaussianMixture, samples: &[S], resp: &[Vec<f64>]) {
    let n = samples.len() as f64;
    for k in 0..g.k() {
        let nk: f64 = resp.iter().map(|r| r[k]).sum();
        if nk < 1e-12 {
            // collapsed component: drop its weight, keep its shape
            g.weights[k] = 0.0;
            continue;
        }
        g.weights[k] = nk / n;
        let dim = g.dim();
        let mut mean = vec![0.0; dim];
        for (s, r) in samples.iter().zip(resp) {
            for (m, x) in mean.iter_mut().zip(s.as_ref()) {
                *m += r[k] * x / nk;
            }
        }
        let mut var = vec![0.0; dim];
        for (s, r) in samples.iter().zip(resp) {
            for ((v, x), m) in var.iter_mut().zip(s.as_ref()).zip(&mean) {
                *v += r[k] * (x - m) * (x - m) / nk;
            }
        }
        var.iter_mut().for_each(|v| *v = v.max(COV_FLOOR));
        g.means[k] = mean;
        g.variances[k] = var;
    }
    let total: f64 = g.weights.iter().sum();
    g.weights.iter_mut().for_each(|w| *w /= total);
}
