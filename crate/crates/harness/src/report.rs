//! Cross-algorithm comparison of finished runs.

use std::fmt::Write as _;

use qcp_core::driver::{mean_curve, normalize_rewards, RunMetrics};
use qcp_core::search::Algorithm;

/// Number of trailing iterations averaged into the final reward.
pub const FINAL_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmReport {
    pub algorithm: Algorithm,
    pub seeds: usize,
    /// Seed-averaged reward per iteration.
    pub curve: Vec<f64>,
    /// `curve` divided by the largest value of any algorithm's curve.
    pub normalized: Vec<f64>,
    /// Mean of the last `FINAL_WINDOW` entries of `normalized`.
    pub final_reward: f64,
    /// Seed mean of the cumulative explored states after the last iteration.
    pub final_states: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    reports: Vec<AlgorithmReport>,
}

impl Comparison {
    pub fn from_runs(runs: &[RunMetrics]) -> Self {
        let mut groups: Vec<(Algorithm, Vec<&RunMetrics>)> = Vec::new();
        for alg in Algorithm::ALL {
            let mine: Vec<&RunMetrics> = runs.iter().filter(|r| r.algorithm == alg).collect();
            if !mine.is_empty() {
                groups.push((alg, mine));
            }
        }
        let curves: Vec<Vec<f64>> = groups
            .iter()
            .map(|(_, mine)| {
                let per_seed: Vec<Vec<f64>> = mine
                    .iter()
                    .map(|r| r.iterations.iter().map(|m| m.mean_reward).collect())
                    .collect();
                mean_curve(&per_seed)
            })
            .collect();
        let normalized = normalize_rewards(&curves);
        let reports = groups
            .into_iter()
            .zip(curves)
            .zip(normalized)
            .map(|(((algorithm, mine), curve), normalized)| {
                let window = &normalized[normalized.len().saturating_sub(FINAL_WINDOW)..];
                let final_reward = if window.is_empty() {
                    0.0
                } else {
                    window.iter().sum::<f64>() / window.len() as f64
                };
                let final_states = mine
                    .iter()
                    .map(|r| r.iterations.last().map_or(0, |m| m.cum_states) as f64)
                    .sum::<f64>()
                    / mine.len() as f64;
                AlgorithmReport {
                    algorithm,
                    seeds: mine.len(),
                    curve,
                    normalized,
                    final_reward,
                    final_states,
                }
            })
            .collect();
        Self { reports }
    }

    pub fn reports(&self) -> &[AlgorithmReport] {
        &self.reports
    }

    pub fn get(&self, algorithm: Algorithm) -> Option<&AlgorithmReport> {
        self.reports.iter().find(|r| r.algorithm == algorithm)
    }

    /// Final normalized reward of Q-CP over that of vanilla UCT.
    pub fn reward_parity(&self) -> Option<f64> {
        Some(self.get(Algorithm::Qcp)?.final_reward / self.get(Algorithm::Vanilla)?.final_reward)
    }

    /// Final explored states of Q-CP over those of vanilla UCT.
    pub fn state_ratio(&self) -> Option<f64> {
        Some(self.get(Algorithm::Qcp)?.final_states / self.get(Algorithm::Vanilla)?.final_states)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>6} {:>12} {:>14}", "algorithm", "seeds", "final_reward", "final_states");
        for r in &self.reports {
            let _ = writeln!(
                out,
                "{:<10} {:>6} {:>12.4} {:>14.1}",
                r.algorithm.to_string(),
                r.seeds,
                r.final_reward,
                r.final_states
            );
        }
        let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(out, "reward_parity {}", fmt(self.reward_parity()));
        let _ = writeln!(out, "state_ratio {}", fmt(self.state_ratio()));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qcp_core::driver::IterationMetrics;

    fn run(algorithm: Algorithm, seed: u64, rewards: &[f64], states: usize) -> RunMetrics {
        RunMetrics {
            algorithm,
            seed,
            iterations: rewards
                .iter()
                .enumerate()
                .map(|(i, &r)| IterationMetrics {
                    iteration: i + 1,
                    mean_reward: r,
                    cum_states: states,
                    new_states: if i == 0 { states } else { 0 },
                    sim_steps: 0,
                    wall_ms: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn identical_runs_give_unit_ratios() {
        let a = run(Algorithm::Qcp, 0, &[0.1, 0.2, 0.3], 40);
        let mut b = a.clone();
        b.algorithm = Algorithm::Vanilla;
        let c = Comparison::from_runs(&[a, b]);
        assert_eq!(c.reward_parity(), Some(1.0));
        assert_eq!(c.state_ratio(), Some(1.0));
    }

    #[test]
    fn doubled_states_halve_the_ratio() {
        let c = Comparison::from_runs(&[
            run(Algorithm::Qcp, 0, &[0.5], 30),
            run(Algorithm::Vanilla, 0, &[0.5], 60),
        ]);
        assert_eq!(c.state_ratio(), Some(0.5));
    }

    #[test]
    fn final_reward_averages_the_trailing_window() {
        let rewards: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let c = Comparison::from_runs(&[run(Algorithm::Random, 0, &rewards, 1)]);
        let r = c.get(Algorithm::Random).unwrap();
        assert!((r.final_reward - 0.8).abs() < 1e-12);
        assert_eq!(c.reward_parity(), None);
        assert!(c.to_table().contains("n/a"));
    }

    #[test]
    fn normalization_uses_the_best_algorithm() {
        let c = Comparison::from_runs(&[
            run(Algorithm::Qcp, 0, &[1.0, 2.0], 1),
            run(Algorithm::Qcp, 1, &[1.0, 4.0], 1),
            run(Algorithm::Vanilla, 0, &[6.0, 1.5], 1),
        ]);
        assert_eq!(c.get(Algorithm::Qcp).unwrap().normalized, vec![1.0 / 6.0, 0.5]);
        assert_eq!(c.get(Algorithm::Vanilla).unwrap().normalized, vec![1.0, 0.25]);
    }
}
