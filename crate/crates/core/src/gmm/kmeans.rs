use rand::Rng;

use crate::error::{QcpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansOptions {
    pub max_iter: usize,
    /// Independent seedings; the lowest-distortion result is kept.
    pub restarts: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            restarts: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances to the assigned centroid.
    pub distortion: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm with k-means++ seeding.
pub fn kmeans<R: Rng + ?Sized>(
    data: &[Vec<f64>],
    k: usize,
    options: KMeansOptions,
    rng: &mut R,
) -> Result<KMeans> {
    if k == 0 {
        return Err(QcpError::InvalidConfig("k-means needs k >= 1".into()));
    }
    if data.len() < k {
        return Err(QcpError::InsufficientData {
            needed: k,
            got: data.len(),
        });
    }
    let dim = data[0].len();
    if let Some(bad) = data.iter().find(|x| x.len() != dim) {
        return Err(QcpError::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }
    let mut best: Option<KMeans> = None;
    for _ in 0..options.restarts.max(1) {
        let run = lloyd(data, seed_plus_plus(data, k, rng), options.max_iter);
        if best.as_ref().is_none_or(|b| run.distortion < b.distortion) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn seed_plus_plus<R: Rng + ?Sized>(data: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = data.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![data[first].clone()];
    let mut d2: Vec<f64> = data.iter().map(|x| sq_dist(x, &data[first])).collect();
    while centroids.len() < k {
        let total: f64 = d2
            .iter()
            .zip(&chosen)
            .filter(|(_, c)| !**c)
            .map(|(d, _)| d)
            .sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, (d, c)) in d2.iter().zip(&chosen).enumerate() {
                if *c {
                    continue;
                }
                pick = Some(i);
                if u < *d {
                    break;
                }
                u -= d;
            }
            pick.expect("unchosen point exists")
        } else {
            // every remaining point coincides with a centroid
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        for (d, x) in d2.iter_mut().zip(data) {
            *d = d.min(sq_dist(x, &data[pick]));
        }
        centroids.push(data[pick].clone());
    }
    centroids
}

fn lloyd(data: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> KMeans {
    let k = centroids.len();
    let dim = data[0].len();
    let mut assignments = vec![usize::MAX; data.len()];
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for (a, x) in assignments.iter_mut().zip(data) {
            let nearest = nearest(&centroids, x).0;
            if *a != nearest {
                *a = nearest;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, x) in assignments.iter().zip(data) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(x) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        for c in empty {
            // reseed with the point farthest from its centroid
            let (far, dist) = data
                .iter()
                .enumerate()
                .map(|(i, x)| (i, sq_dist(x, &centroids[assignments[i]])))
                .fold((0, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            if dist > 0.0 {
                centroids[c] = data[far].clone();
                assignments[far] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let distortion = assignments
        .iter()
        .zip(data)
        .map(|(&a, x)| sq_dist(x, &centroids[a]))
        .sum();
    KMeans {
        centroids,
        assignments,
        distortion,
    }
}

fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    centroids
        .iter()
        .enumerate()
        .map(|(i, c)| (i, sq_dist(x, c)))
        .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc })
}
