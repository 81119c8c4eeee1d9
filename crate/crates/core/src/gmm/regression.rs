//! Gaussian mixture regression of the last coordinate on the leading ones.

use super::{log_sum_exp, MixtureModel};
use crate::error::{QcpError, Result};

/// Conditional mean and variance of the output given the inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

impl MixtureModel {
    fn check_query(&self, len: usize) -> Result<()> {
        if self.dim < 2 {
            return Err(QcpError::InvalidModel(
                "regression needs at least one input and one output coordinate".into(),
            ));
        }
        if len != self.dim - 1 {
            return Err(QcpError::DimensionMismatch {
                expected: self.dim - 1,
                found: len,
            });
        }
        Ok(())
    }

    /// Normalized input-marginal responsibilities `beta_k(x)`.
    pub fn responsibilities(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_query(input.len())?;
        let (logs, _) = self.component_terms(input);
        Ok(normalize(&logs))
    }

    /// Predicts `E[out | input]` and `Var[out | input]`.
    pub fn predict(&self, input: &[f64]) -> Result<Prediction> {
        self.check_query(input.len())?;
        let (logs, means) = self.component_terms(input);
        Ok(combine(&normalize(&logs), &means, self))
    }

    /// Predictions for several values of the last input coordinate with the others fixed.
    ///
    /// Equivalent to calling [`predict`](Self::predict) once per value, but the
    /// quadratic form and regression term are expanded in the varying coordinate
    /// so each extra value costs O(K).
    pub fn predict_varying_last(&self, prefix: &[f64], last: &[f64]) -> Result<Vec<Prediction>> {
        self.check_query(prefix.len() + 1)?;
        let m = self.dim - 1;
        let p = m - 1;
        // Per component: (quadratic in prefix, cross term, last-last precision,
        // regression from prefix, last weight, last mean).
        let mut parts = Vec::with_capacity(self.regression.len());
        let mut diff = vec![0.0; p];
        for rc in &self.regression {
            for (d, (x, mu)) in diff.iter_mut().zip(prefix.iter().zip(&rc.mean_in)) {
                *d = x - mu;
            }
            let mut quad = 0.0;
            let mut cross = 0.0;
            for r in 0..p {
                let row = &rc.precision[r * m..r * m + p];
                let dot: f64 = row.iter().zip(&diff).map(|(a, b)| a * b).sum();
                quad += diff[r] * dot;
                cross += rc.precision[r * m + p] * diff[r];
            }
            let reg: f64 = rc.weights[..p].iter().zip(&diff).map(|(w, d)| w * d).sum();
            parts.push((
                quad,
                cross,
                rc.precision[p * m + p],
                rc.mean_out + reg,
                rc.weights[p],
                rc.mean_in[p],
            ));
        }
        let mut logs = Vec::with_capacity(parts.len());
        let mut means = Vec::with_capacity(parts.len());
        Ok(last
            .iter()
            .map(|&v| {
                logs.clear();
                means.clear();
                for (rc, &(quad, cross, pll, base, wl, mu_l)) in self.regression.iter().zip(&parts) {
                    let dl = v - mu_l;
                    let q = quad + 2.0 * dl * cross + pll * dl * dl;
                    logs.push(rc.log_norm - 0.5 * q);
                    means.push(base + wl * dl);
                }
                combine(&normalize(&logs), &means, self)
            })
            .collect())
    }

    fn component_terms(&self, input: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = input.len();
        let mut diff = vec![0.0; m];
        let mut logs = Vec::with_capacity(self.regression.len());
        let mut means = Vec::with_capacity(self.regression.len());
        for rc in &self.regression {
            for (d, (x, mu)) in diff.iter_mut().zip(input.iter().zip(&rc.mean_in)) {
                *d = x - mu;
            }
            let mut q = 0.0;
            for r in 0..m {
                let row = &rc.precision[r * m..(r + 1) * m];
                q += diff[r] * row.iter().zip(&diff).map(|(a, b)| a * b).sum::<f64>();
            }
            logs.push(rc.log_norm - 0.5 * q);
            means.push(rc.mean_out + rc.weights.iter().zip(&diff).map(|(w, d)| w * d).sum::<f64>());
        }
        (logs, means)
    }
}

fn normalize(logs: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logs);
    logs.iter().map(|l| (l - lse).exp()).collect()
}

/// Mixes per-component conditionals. The variance `sum beta (var_k + m_k^2) - mean^2`
/// is evaluated in its centered form, which is never negative.
fn combine(beta: &[f64], means: &[f64], model: &MixtureModel) -> Prediction {
    let mean: f64 = beta.iter().zip(means).map(|(b, m)| b * m).sum();
    let variance: f64 = beta
        .iter()
        .zip(means)
        .zip(&model.regression)
        .map(|((b, m), rc)| b * (rc.cond_var + (m - mean) * (m - mean)))
        .sum();
    Prediction {
        mean,
        variance: variance.max(0.0),
    }
}
