//! Gaussian mixtures over joint `(state, action, Q)` vectors.
//!
//! The last coordinate of every vector is the regression output; the leading
//! `G - 1` coordinates are the inputs. [`MixtureModel`] precomputes everything a
//! query needs (Cholesky factors, input precisions and regression weights) so
//! that prediction is a handful of dot products per component.

mod em;
mod io;
mod kmeans;
mod regression;
mod select;

pub use em::{fit_em, FitOptions, FitReport};
pub use kmeans::{kmeans, KMeans, KMeansOptions};
pub use regression::Prediction;
pub use select::{bic_parameter_count, select_k, Selection};

use nalgebra::DMatrix;

use crate::error::{QcpError, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// One weighted Gaussian of the mixture. `covariance` is row-major `G x G`.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub prior: f64,
    pub mean: Vec<f64>,
    pub covariance: Vec<f64>,
}

/// Block view of a component split into inputs (leading `G - 1` coordinates) and output (last).
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub mean_in: Vec<f64>,
    pub mean_out: f64,
    /// Row-major `(G-1) x (G-1)`.
    pub cov_in_in: Vec<f64>,
    pub cov_in_out: Vec<f64>,
    pub cov_out_in: Vec<f64>,
    pub cov_out_out: f64,
}

impl Component {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn partition(&self) -> Partition {
        let g = self.dim();
        let m = g - 1;
        let at = |r: usize, c: usize| self.covariance[r * g + c];
        let mut cov_in_in = Vec::with_capacity(m * m);
        for r in 0..m {
            for c in 0..m {
                cov_in_in.push(at(r, c));
            }
        }
        Partition {
            mean_in: self.mean[..m].to_vec(),
            mean_out: self.mean[m],
            cov_in_in,
            cov_in_out: (0..m).map(|r| at(r, m)).collect(),
            cov_out_in: (0..m).map(|c| at(m, c)).collect(),
            cov_out_out: at(m, m),
        }
    }
}

#[derive(Debug, Clone)]
struct DensityCache {
    /// Row-major lower Cholesky factor of the covariance.
    chol: Vec<f64>,
    /// `ln prior - (G ln 2pi + ln|cov|) / 2`.
    log_norm: f64,
}

#[derive(Debug, Clone)]
struct RegressionCache {
    mean_in: Vec<f64>,
    /// Row-major inverse of the input covariance block.
    precision: Vec<f64>,
    /// `ln prior - ((G-1) ln 2pi + ln|cov_in_in|) / 2`.
    log_norm: f64,
    /// `cov_out_in * cov_in_in^-1`.
    weights: Vec<f64>,
    mean_out: f64,
    cond_var: f64,
}

/// Validated mixture `{prior_k, mean_k, cov_k}` with cached factorizations.
#[derive(Debug, Clone)]
pub struct MixtureModel {
    dim: usize,
    components: Vec<Component>,
    density: Vec<DensityCache>,
    regression: Vec<RegressionCache>,
}

impl PartialEq for MixtureModel {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.components == other.components
    }
}

impl MixtureModel {
    /// Builds a model, symmetrizing covariances and checking every invariant.
    pub fn new(mut components: Vec<Component>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| QcpError::InvalidModel("mixture needs at least one component".into()))?;
        let dim = first.dim();
        if dim == 0 {
            return Err(QcpError::InvalidModel("zero-dimensional component".into()));
        }
        let mut total = 0.0;
        for (k, c) in components.iter_mut().enumerate() {
            if c.mean.len() != dim || c.covariance.len() != dim * dim {
                return Err(QcpError::InvalidModel(format!(
                    "component {k} has inconsistent dimensions"
                )));
            }
            if !(c.prior > 0.0 && c.prior <= 1.0) {
                return Err(QcpError::InvalidModel(format!(
                    "component {k} prior {} outside (0, 1]",
                    c.prior
                )));
            }
            if c.mean.iter().chain(&c.covariance).any(|v| !v.is_finite()) {
                return Err(QcpError::InvalidModel(format!("component {k} is not finite")));
            }
            for r in 0..dim {
                for col in r + 1..dim {
                    let avg = 0.5 * (c.covariance[r * dim + col] + c.covariance[col * dim + r]);
                    c.covariance[r * dim + col] = avg;
                    c.covariance[col * dim + r] = avg;
                }
            }
            total += c.prior;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(QcpError::InvalidModel(format!("priors sum to {total}")));
        }

        let mut density = Vec::with_capacity(components.len());
        let mut regression = Vec::with_capacity(components.len());
        for (k, c) in components.iter().enumerate() {
            let (chol, log_det) = cholesky(&c.covariance, dim).ok_or_else(|| {
                QcpError::InvalidModel(format!("component {k} covariance is not positive definite"))
            })?;
            density.push(DensityCache {
                chol,
                log_norm: c.prior.ln() - 0.5 * (dim as f64 * LN_2PI + log_det),
            });
            if dim >= 2 {
                regression.push(regression_cache(c).ok_or_else(|| {
                    QcpError::InvalidModel(format!("component {k} input block is singular"))
                })?);
            }
        }
        Ok(Self {
            dim,
            components,
            density,
            regression,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// `ln(prior_k * N(x; mean_k, cov_k))` for every component.
    pub fn component_log_densities(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let g = self.dim;
        let mut y = vec![0.0; g];
        for (c, d) in self.components.iter().zip(&self.density) {
            // forward substitution L y = x - mean
            let mut q = 0.0;
            for r in 0..g {
                let mut s = x[r] - c.mean[r];
                let row = &d.chol[r * g..r * g + r];
                for (l, yv) in row.iter().zip(&y[..r]) {
                    s -= l * yv;
                }
                let v = s / d.chol[r * g + r];
                y[r] = v;
                q += v * v;
            }
            out.push(d.log_norm - 0.5 * q);
        }
    }

    /// `ln p(x)` under the mixture.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(QcpError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let mut buf = Vec::with_capacity(self.components.len());
        self.component_log_densities(x, &mut buf);
        Ok(log_sum_exp(&buf))
    }

    /// Mean log-density over a dataset.
    pub fn mean_log_likelihood(&self, data: &[Vec<f64>]) -> Result<f64> {
        let mut total = 0.0;
        for x in data {
            total += self.log_density(x)?;
        }
        Ok(total / data.len().max(1) as f64)
    }
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Lower Cholesky factor (row-major) and log-determinant.
pub(crate) fn cholesky(cov: &[f64], dim: usize) -> Option<(Vec<f64>, f64)> {
    let m = DMatrix::from_row_slice(dim, dim, cov);
    let chol = m.cholesky()?;
    let l = chol.l();
    let mut flat = Vec::with_capacity(dim * dim);
    let mut log_det = 0.0;
    for r in 0..dim {
        for c in 0..dim {
            flat.push(l[(r, c)]);
        }
        log_det += 2.0 * l[(r, r)].ln();
    }
    log_det.is_finite().then_some((flat, log_det))
}

fn regression_cache(c: &Component) -> Option<RegressionCache> {
    let p = c.partition();
    let m = p.mean_in.len();
    let block = DMatrix::from_row_slice(m, m, &p.cov_in_in);
    let chol = block.cholesky()?;
    let l = chol.l();
    let log_det: f64 = (0..m).map(|i| 2.0 * l[(i, i)].ln()).sum();
    let inv = chol.inverse();
    let mut precision = Vec::with_capacity(m * m);
    for r in 0..m {
        for col in 0..m {
            precision.push(inv[(r, col)]);
        }
    }
    let weights: Vec<f64> = (0..m)
        .map(|col| (0..m).map(|r| p.cov_out_in[r] * inv[(r, col)]).sum())
        .collect();
    let explained: f64 = weights.iter().zip(&p.cov_in_out).map(|(w, s)| w * s).sum();
    Some(RegressionCache {
        mean_in: p.mean_in,
        precision,
        log_norm: c.prior.ln() - 0.5 * (m as f64 * LN_2PI + log_det),
        weights,
        mean_out: p.mean_out,
        cond_var: (p.cov_out_out - explained).max(0.0),
    })
}
