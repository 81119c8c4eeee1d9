use rand::seq::SliceRandom;
use rand::Rng;

use super::em::{fit_em, FitOptions};
use super::MixtureModel;
use crate::error::{QcpError, Result};

/// Free parameters of a `k`-component full-covariance mixture in `dim` dimensions.
pub fn bic_parameter_count(k: usize, dim: usize) -> usize {
    (k - 1) + k * dim + k * dim * (dim + 1) / 2
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub model: MixtureModel,
    pub k: usize,
    /// `(candidate, BIC on the held-out split)`; `None` when the candidate was skipped.
    pub scores: Vec<(usize, Option<f64>)>,
}

/// Picks the component count minimizing BIC on a held-out split.
///
/// Each candidate is fitted on the training split. Candidates with fewer
/// training points than free parameters, or whose fit fails, are skipped.
pub fn select_k<R: Rng + ?Sized>(
    data: &[Vec<f64>],
    candidates: &[usize],
    test_fraction: f64,
    options: &FitOptions,
    rng: &mut R,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(QcpError::InvalidConfig("no candidate component counts".into()));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(QcpError::InvalidConfig(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    if data.len() < 2 {
        return Err(QcpError::InsufficientData {
            needed: 2,
            got: data.len(),
        });
    }
    let dim = data[0].len();
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    let n_test = ((data.len() as f64 * test_fraction).round() as usize).clamp(1, data.len() - 1);
    let test: Vec<Vec<f64>> = order[..n_test].iter().map(|&i| data[i].clone()).collect();
    let train: Vec<Vec<f64>> = order[n_test..].iter().map(|&i| data[i].clone()).collect();

    let mut scores = Vec::with_capacity(candidates.len());
    let mut best: Option<(f64, usize, MixtureModel)> = None;
    for &k in candidates {
        if k == 0 || train.len() < bic_parameter_count(k, dim) {
            scores.push((k, None));
            continue;
        }
        let fit = match fit_em(&train, k, options, rng) {
            Ok(fit) => fit,
            Err(e) => {
                log::debug!("skipping k={k}: {e}");
                scores.push((k, None));
                continue;
            }
        };
        let params = bic_parameter_count(fit.model.n_components(), dim) as f64;
        let ll = fit.model.mean_log_likelihood(&test)? * test.len() as f64;
        let bic = -2.0 * ll + params * (test.len() as f64).ln();
        scores.push((k, Some(bic)));
        if best.as_ref().is_none_or(|(b, _, _)| bic < *b) {
            best = Some((bic, k, fit.model));
        }
    }
    let (_, k, model) = best.ok_or(QcpError::NoCandidateFitted)?;
    Ok(Selection { model, k, scores })
}
