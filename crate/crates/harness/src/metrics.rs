//! Per-run metric tables and the aggregated summary, as comma-separated text.

use std::path::Path;

use qcp_core::driver::{IterationMetrics, RunMetrics};
use qcp_core::search::Algorithm;

use crate::error::HarnessError;
use crate::report::Comparison;

pub const RUN_HEADER: &str = "algorithm,seed,iteration,mean_reward,cum_states,new_states,sim_steps,wall_ms";
pub const SUMMARY_HEADER: &str =
    "algorithm,iteration,seeds,mean_reward,std_reward,normalized_reward,mean_cum_states,std_cum_states,mean_new_states";

pub fn run_to_csv(metrics: &RunMetrics) -> String {
    let mut out = String::with_capacity(64 * (metrics.iterations.len() + 1));
    out.push_str(RUN_HEADER);
    out.push('\n');
    for m in &metrics.iterations {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            metrics.algorithm, metrics.seed, m.iteration, m.mean_reward, m.cum_states, m.new_states, m.sim_steps, m.wall_ms
        ));
    }
    out
}

/// Parses one run table. `path` is only used in diagnostics.
pub fn run_from_csv(text: &str, path: &Path) -> Result<RunMetrics, HarnessError> {
    let schema = |message: String| HarnessError::Schema {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == RUN_HEADER => {}
        Some(h) => return Err(schema(format!("unknown header `{h}`, expected `{RUN_HEADER}`"))),
        None => return Err(schema("empty file".into())),
    }
    let mut run: Option<RunMetrics> = None;
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 8 {
            return Err(schema(format!("line {line_no}: expected 8 fields, got {}", fields.len())));
        }
        let bad = |what: &str| schema(format!("line {line_no}: invalid {what}"));
        let algorithm: Algorithm = fields[0].parse().map_err(|_| bad("algorithm"))?;
        let seed: u64 = fields[1].parse().map_err(|_| bad("seed"))?;
        let m = IterationMetrics {
            iteration: fields[2].parse().map_err(|_| bad("iteration"))?,
            mean_reward: fields[3].parse().map_err(|_| bad("mean_reward"))?,
            cum_states: fields[4].parse().map_err(|_| bad("cum_states"))?,
            new_states: fields[5].parse().map_err(|_| bad("new_states"))?,
            sim_steps: fields[6].parse().map_err(|_| bad("sim_steps"))?,
            wall_ms: fields[7].parse().map_err(|_| bad("wall_ms"))?,
        };
        let run = run.get_or_insert_with(|| RunMetrics {
            algorithm,
            seed,
            iterations: Vec::new(),
        });
        if run.algorithm != algorithm || run.seed != seed {
            return Err(schema(format!("line {line_no}: one file must hold a single run")));
        }
        if let Some(prev) = run.iterations.last() {
            if m.cum_states < prev.cum_states {
                return Err(schema(format!("line {line_no}: cum_states decreased")));
            }
        }
        run.iterations.push(m);
    }
    run.ok_or_else(|| schema("no data rows".into()))
}

pub fn read_run(path: &Path) -> Result<RunMetrics, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    run_from_csv(&text, path)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per algorithm and iteration: mean and population std across seeds, plus the
/// mean reward normalized by the best seed-averaged value of any algorithm.
pub fn summary_to_csv(runs: &[RunMetrics]) -> String {
    let comparison = Comparison::from_runs(runs);
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for report in comparison.reports() {
        let mine: Vec<&RunMetrics> = runs.iter().filter(|r| r.algorithm == report.algorithm).collect();
        for (k, normalized) in report.normalized.iter().enumerate() {
            let column = |f: &dyn Fn(&IterationMetrics) -> f64| -> Vec<f64> { mine.iter().map(|r| f(&r.iterations[k])).collect() };
            let (reward, reward_std) = mean_std(&column(&|m| m.mean_reward));
            let (cum, cum_std) = mean_std(&column(&|m| m.cum_states as f64));
            let (new, _) = mean_std(&column(&|m| m.new_states as f64));
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                report.algorithm,
                mine[0].iterations[k].iteration,
                mine.len(),
                reward,
                reward_std,
                normalized,
                cum,
                cum_std,
                new
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_run(algorithm: Algorithm, seed: u64, rewards: &[f64], states: &[usize]) -> RunMetrics {
        let mut prev = 0;
        RunMetrics {
            algorithm,
            seed,
            iterations: rewards
                .iter()
                .zip(states)
                .enumerate()
                .map(|(i, (&r, &s))| {
                    let m = IterationMetrics {
                        iteration: i + 1,
                        mean_reward: r,
                        cum_states: s,
                        new_states: s - prev,
                        sim_steps: 10,
                        wall_ms: 0,
                    };
                    prev = s;
                    m
                })
                .collect(),
        }
    }

    #[test]
    fn run_round_trip_is_exact() {
        let run = sample_run(Algorithm::Qcp, 3, &[0.1, 1.0 / 3.0, 0.123456789012345], &[5, 9, 9]);
        let text = run_to_csv(&run);
        assert_eq!(run_from_csv(&text, Path::new("x.csv")).unwrap(), run);
    }

    #[test]
    fn unknown_schema_is_rejected() {
        let text = "algorithm,seed,iteration,reward\nqcp,0,1,0.5\n";
        assert!(matches!(run_from_csv(text, Path::new("x")), Err(HarnessError::Schema { .. })));
        assert!(run_from_csv("", Path::new("x")).is_err());
        assert!(run_from_csv(&format!("{RUN_HEADER}\n"), Path::new("x")).is_err());
        let mixed = format!("{RUN_HEADER}\nqcp,0,1,0.5,1,1,1,0\nqcp,1,2,0.5,2,1,1,0\n");
        assert!(run_from_csv(&mixed, Path::new("x")).is_err());
        let shrinking = format!("{RUN_HEADER}\nqcp,0,1,0.5,3,3,1,0\nqcp,0,2,0.5,2,0,1,0\n");
        assert!(run_from_csv(&shrinking, Path::new("x")).is_err());
    }

    #[test]
    fn summary_has_one_row_per_iteration() {
        let runs = vec![
            sample_run(Algorithm::Qcp, 0, &[0.2, 0.4], &[3, 5]),
            sample_run(Algorithm::Qcp, 1, &[0.4, 0.8], &[5, 7]),
        ];
        let text = summary_to_csv(&runs);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SUMMARY_HEADER);
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "qcp,1,2,0.30000000000000004,0.1,0.5,4,1,4");
        assert_eq!(lines[2], "qcp,2,2,0.6000000000000001,0.2,1,6,1,2");
    }
}
