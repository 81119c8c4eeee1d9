use rand::Rng;

use super::kmeans::{kmeans, KMeansOptions};
use super::{log_sum_exp, Component, MixtureModel};
use crate::error::{QcpError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Ridge added to every covariance, relative to the mean per-feature variance.
    pub reg_relative: f64,
    /// Stop once the mean log-likelihood changes by less than this.
    pub tol: f64,
    pub max_iter: usize,
    pub kmeans: KMeansOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            reg_relative: 1e-6,
            tol: 1e-6,
            max_iter: 200,
            kmeans: KMeansOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: MixtureModel,
    /// Mean log-likelihood of the data before each M-step and after the last one.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
    /// Absolute ridge that was added to the covariances.
    pub reg: f64,
}

/// Fits a `k`-component full-covariance mixture by EM, initialized from k-means.
///
/// Components whose total responsibility vanishes are dropped, so the returned
/// model can have fewer than `k` components.
pub fn fit_em<R: Rng + ?Sized>(
    data: &[Vec<f64>],
    k: usize,
    options: &FitOptions,
    rng: &mut R,
) -> Result<FitReport> {
    if options.reg_relative <= 0.0 {
        return Err(QcpError::InvalidConfig("covariance regularizer must be positive".into()));
    }
    if k == 0 {
        return Err(QcpError::InvalidConfig("mixture needs k >= 1".into()));
    }
    if data.len() < k {
        return Err(QcpError::InsufficientData {
            needed: k,
            got: data.len(),
        });
    }
    let n = data.len();
    let dim = data[0].len();
    if let Some(bad) = data.iter().find(|x| x.len() != dim) {
        return Err(QcpError::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }
    if data.iter().flatten().any(|v| !v.is_finite()) {
        return Err(QcpError::NonFinite("training data".into()));
    }

    let global_mean = mean(data.iter().map(|x| x.as_slice()), dim);
    let variances: Vec<f64> = (0..dim)
        .map(|d| data.iter().map(|x| (x[d] - global_mean[d]).powi(2)).sum::<f64>() / n as f64)
        .collect();
    let scale = variances.iter().sum::<f64>() / dim as f64;
    let reg = options.reg_relative * if scale > 0.0 { scale } else { 1.0 };

    if variances.iter().all(|v| *v == 0.0) {
        let model = MixtureModel::new(vec![Component {
            prior: 1.0,
            mean: global_mean,
            covariance: scaled_identity(dim, reg),
        }])?;
        let ll = model.mean_log_likelihood(data)?;
        return Ok(FitReport {
            model,
            log_likelihood: vec![ll],
            converged: true,
            reg,
        });
    }

    let km = kmeans(data, k, options.kmeans, rng)?;
    let mut components = Vec::with_capacity(k);
    for c in 0..k {
        let members: Vec<&[f64]> = data
            .iter()
            .zip(&km.assignments)
            .filter(|(_, a)| **a == c)
            .map(|(x, _)| x.as_slice())
            .collect();
        if members.is_empty() {
            continue;
        }
        let mu = km.centroids[c].clone();
        let mut cov = if members.len() > 1 {
            let w = vec![1.0; members.len()];
            scatter(&members, &w, &mu)
        } else {
            let mut diag = vec![0.0; dim * dim];
            for d in 0..dim {
                diag[d * dim + d] = variances[d];
            }
            diag
        };
        for d in 0..dim {
            cov[d * dim + d] += reg;
        }
        components.push(Component {
            prior: members.len() as f64 / n as f64,
            mean: mu,
            covariance: cov,
        });
    }
    let mut model = MixtureModel::new(components)?;

    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut resp = vec![0.0; n * model.n_components()];
    let mut buf = Vec::new();
    let points: Vec<&[f64]> = data.iter().map(|x| x.as_slice()).collect();
    for iter in 0..=options.max_iter {
        // E-step
        let kk = model.n_components();
        resp.resize(n * kk, 0.0);
        let mut total = 0.0;
        for (i, x) in data.iter().enumerate() {
            model.component_log_densities(x, &mut buf);
            let lse = log_sum_exp(&buf);
            total += lse;
            for (r, l) in resp[i * kk..(i + 1) * kk].iter_mut().zip(&buf) {
                *r = (l - lse).exp();
            }
        }
        let ll = total / n as f64;
        if let Some(prev) = trace.last() {
            if (ll - prev).abs() < options.tol {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
        if iter == options.max_iter {
            break;
        }

        // M-step
        let mut next = Vec::with_capacity(kk);
        for c in 0..kk {
            let w: Vec<f64> = (0..n).map(|i| resp[i * kk + c]).collect();
            let nk: f64 = w.iter().sum();
            if nk <= 1e-10 * n as f64 {
                continue;
            }
            let mu: Vec<f64> = (0..dim)
                .map(|d| w.iter().zip(data).map(|(wi, x)| wi * x[d]).sum::<f64>() / nk)
                .collect();
            let mut cov = scatter(&points, &w, &mu);
            for d in 0..dim {
                cov[d * dim + d] += reg;
            }
            next.push(Component {
                prior: nk,
                mean: mu,
                covariance: cov,
            });
        }
        let mass: f64 = next.iter().map(|c| c.prior).sum();
        for c in &mut next {
            c.prior /= mass;
        }
        model = MixtureModel::new(next)?;
    }

    Ok(FitReport {
        model,
        log_likelihood: trace,
        converged,
        reg,
    })
}

fn mean<'a>(points: impl Iterator<Item = &'a [f64]>, dim: usize) -> Vec<f64> {
    let mut sum = vec![0.0; dim];
    let mut count = 0usize;
    for x in points {
        count += 1;
        for (s, v) in sum.iter_mut().zip(x) {
            *s += v;
        }
    }
    sum.iter().map(|s| s / count.max(1) as f64).collect()
}

/// Weighted scatter `sum w (x - mu)(x - mu)^T / sum w`, row-major.
fn scatter(points: &[&[f64]], weights: &[f64], mu: &[f64]) -> Vec<f64> {
    let dim = mu.len();
    let mut cov = vec![0.0; dim * dim];
    let mut diff = vec![0.0; dim];
    let mut total = 0.0;
    for (x, &w) in points.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        total += w;
        for (d, (xv, m)) in diff.iter_mut().zip(x.iter().zip(mu)) {
            *d = xv - m;
        }
        for r in 0..dim {
            let wr = w * diff[r];
            let row = &mut cov[r * dim..r * dim + r + 1];
            for (c, slot) in row.iter_mut().enumerate() {
                *slot += wr * diff[c];
            }
        }
    }
    for r in 0..dim {
        for c in 0..=r {
            let v = cov[r * dim + c] / total;
            cov[r * dim + c] = v;
            cov[c * dim + r] = v;
        }
    }
    cov
}

fn scaled_identity(dim: usize, v: f64) -> Vec<f64> {
    let mut m = vec![0.0; dim * dim];
    for d in 0..dim {
        m[d * dim + d] = v;
    }
    m
}
