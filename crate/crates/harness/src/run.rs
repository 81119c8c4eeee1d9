//! Runs every (algorithm, seed) pair of an experiment and writes the results.
//!
//! Layout of the output directory:
//! `config.txt`, `summary.csv`, one `<algorithm>_seed<seed>.csv` per run and,
//! on request, `<algorithm>_seed<seed>.trace.csv` and `.render.txt`.

use std::fs;
use std::path::{Path, PathBuf};

use qcp_core::driver::{train, RunMetrics, TrainConfig, TrainOutput};
use qcp_core::game::{step, JointAction};
use qcp_core::qfunction::greedy_policy;
use qcp_core::search::{Algorithm, TraceRecord};
use qcp_core::{seeded_rng, Game};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::metrics::{run_to_csv, summary_to_csv};

const STREAM_RENDER: u64 = 4;

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; 0 lets rayon decide.
    pub workers: usize,
    pub trace: bool,
    pub render: bool,
}

pub fn run_file_name(algorithm: Algorithm, seed: u64) -> String {
    format!("{algorithm}_seed{seed}.csv")
}

fn write(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

fn trace_csv(out: &TrainOutput) -> String {
    let mut text = format!("algorithm,seed,iteration_outer,timestep,agent,{}\n", TraceRecord::header());
    for e in &out.trace {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            out.metrics.algorithm,
            out.metrics.seed,
            e.iteration,
            e.timestep,
            e.agent,
            e.record.to_line()
        ));
    }
    text
}

/// One noise-free greedy episode with the final approximators.
fn render_episode(game: &dyn Game, out: &TrainOutput, max_steps: usize) -> Result<String, HarnessError> {
    let mut rng = seeded_rng(out.metrics.seed, STREAM_RENDER);
    let mut state = game.sample_initial(&mut rng);
    let frame = |s: &qcp_core::GameState| game.render(s).unwrap_or_else(|| format!("{:?}\n", s.features));
    let mut text = format!("step 0\n{}\n", frame(&state));
    for t in 1..=max_steps {
        if state.terminal {
            break;
        }
        let actions: Vec<usize> = (0..game.n_agents())
            .map(|j| greedy_policy(&out.approximators[j], &state, game.action_count(j), &mut rng))
            .collect();
        let joint = JointAction::new(actions.clone());
        let next = step(game, &state, &joint, 0.0, &mut rng)?;
        text.push_str(&format!("step {t} actions {actions:?} reward {:.4}\n{}\n", next.reward, frame(&next.next_state)));
        state = next.next_state;
    }
    Ok(text)
}

fn single_run(
    config: &ExperimentConfig,
    algorithm: Algorithm,
    seed: u64,
    options: RunOptions,
) -> Result<RunMetrics, HarnessError> {
    let game = config.scenario.build();
    let train_config = TrainConfig {
        algorithm,
        seed,
        trace: options.trace,
        ..config.train.clone()
    };
    log::info!("{} {algorithm} seed {seed}: starting", game.name());
    let out = train(game.as_ref(), &train_config)?;
    let stem = format!("{algorithm}_seed{seed}");
    write(&config.output.join(run_file_name(algorithm, seed)), &run_to_csv(&out.metrics))?;
    if options.trace {
        write(&config.output.join(format!("{stem}.trace.csv")), &trace_csv(&out))?;
    }
    if options.render {
        let text = render_episode(game.as_ref(), &out, config.train.search.rollout_cap)?;
        write(&config.output.join(format!("{stem}.render.txt")), &text)?;
    }
    log::info!(
        "{} {algorithm} seed {seed}: done, {} states",
        game.name(),
        out.metrics.iterations.last().map_or(0, |m| m.cum_states)
    );
    Ok(out.metrics)
}

/// Runs the experiment. Outputs of successful runs are kept when others fail.
pub fn run_experiment(config: &ExperimentConfig, options: RunOptions) -> Result<Vec<RunMetrics>, HarnessError> {
    config.validate()?;
    fs::create_dir_all(&config.output).map_err(|e| HarnessError::io(&config.output, e))?;
    write(&config.output.join("config.txt"), &config.to_text())?;

    let jobs: Vec<(Algorithm, u64)> = config
        .algorithms
        .iter()
        .flat_map(|&a| config.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .build()
        .map_err(|e| HarnessError::config(0, format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<RunMetrics, HarnessError>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(a, s)| single_run(config, a, s, options))
            .collect()
    });

    let mut runs = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    for ((a, s), r) in jobs.iter().zip(results) {
        match r {
            Ok(m) => runs.push(m),
            Err(e) => {
                log::error!("{a} seed {s}: {e}");
                failed.push(format!("{a} seed {s}: {e}"));
            }
        }
    }
    if !runs.is_empty() {
        write(&config.output.join("summary.csv"), &summary_to_csv(&runs))?;
    }
    if failed.is_empty() {
        Ok(runs)
    } else {
        Err(HarnessError::Runs { failed })
    }
}

/// Paths of the per-run tables an experiment writes, in run order.
pub fn run_files(config: &ExperimentConfig) -> Vec<PathBuf> {
    config
        .algorithms
        .iter()
        .flat_map(|&a| config.seeds.iter().map(move |&s| config.output.join(run_file_name(a, s))))
        .collect()
}
