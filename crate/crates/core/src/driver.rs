//! Outer training loop: execute the current greedy policies, search at every
//! visited state, aggregate the emitted samples and refit each agent's
//! approximator once per iteration.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::RngCore;

use crate::error::{QcpError, Result};
use crate::game::{step, Game, GameState, JointAction, StateKey};
use crate::qfunction::{greedy_policy, refit, AggregatedDataset, FitConfig, QApproximator, QLearning};
use crate::search::{search, Algorithm, SearchConfig, SearchContext, TraceRecord};
use crate::seeded_rng;

/// Random streams of one run. The initial-state stream does not depend on the
/// algorithm, so runs sharing a seed start every iteration from the same state.
const STREAM_INITIAL: u64 = 0;
const STREAM_EXECUTE: u64 = 1;
const STREAM_SEARCH: u64 = 2;
const STREAM_FIT: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    /// Executed policy steps per iteration.
    pub timesteps: usize,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub search: SearchConfig,
    pub learning: QLearning,
    pub fit: FitConfig,
    /// Admissibility multiplier schedule `min(lambda_max, lambda0 + lambda_ramp * i / I)`.
    pub lambda0: f64,
    pub lambda_ramp: f64,
    pub lambda_max: f64,
    /// Record per-search traces.
    pub trace: bool,
    /// Record wall-clock time per iteration (breaks byte-identical reruns).
    pub wall_clock: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 10,
            timesteps: 4,
            algorithm: Algorithm::Qcp,
            seed: 0,
            search: SearchConfig::default(),
            learning: QLearning::default(),
            fit: FitConfig::default(),
            lambda0: 0.5,
            lambda_ramp: 0.4,
            lambda_max: 0.95,
            trace: false,
            wall_clock: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.timesteps == 0 {
            return Err(QcpError::InvalidConfig("iterations and timesteps must be >= 1".into()));
        }
        for (name, v) in [
            ("lambda0", self.lambda0),
            ("lambda_max", self.lambda_max),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(QcpError::InvalidConfig(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.lambda_ramp >= 0.0 && self.lambda_ramp.is_finite()) {
            return Err(QcpError::InvalidConfig("lambda_ramp must be finite and >= 0".into()));
        }
        if self.fit.components == 0 {
            return Err(QcpError::InvalidConfig("mixture needs at least one component".into()));
        }
        if !(self.fit.test_fraction > 0.0 && self.fit.test_fraction < 1.0) {
            return Err(QcpError::InvalidConfig("test_fraction must lie in (0, 1)".into()));
        }
        self.learning.validate()?;
        self.search.validate()
    }

    /// Admissibility multiplier of 0-based iteration `i`.
    pub fn lambda_at(&self, i: usize) -> f64 {
        (self.lambda0 + self.lambda_ramp * i as f64 / self.iterations as f64).min(self.lambda_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationMetrics {
    /// 1-based.
    pub iteration: usize,
    /// Mean reward of the executed steps.
    pub mean_reward: f64,
    pub cum_states: usize,
    pub new_states: usize,
    pub sim_steps: usize,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub iterations: Vec<IterationMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub timestep: usize,
    pub agent: usize,
    pub record: TraceRecord,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub approximators: Vec<QApproximator>,
    pub datasets: Vec<AggregatedDataset>,
    pub metrics: RunMetrics,
    pub trace: Vec<TraceEntry>,
}

/// Runs the full learning loop on `game`.
pub fn train(game: &dyn Game, config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    let n = game.n_agents();
    let mut init_rng = seeded_rng(config.seed, STREAM_INITIAL);
    let mut exec_rng = seeded_rng(config.seed, STREAM_EXECUTE);
    let mut search_rng = seeded_rng(config.seed, STREAM_SEARCH);
    let mut fit_rng = seeded_rng(config.seed, STREAM_FIT);

    let empty = QApproximator::Empty {
        variance: config.fit.empty_variance,
    };
    let mut approximators = vec![empty; n];
    let mut datasets = vec![AggregatedDataset::new(); n];
    let mut explored: BTreeSet<StateKey> = BTreeSet::new();
    let mut history = Vec::with_capacity(config.iterations);
    let mut trace = Vec::new();

    for i in 0..config.iterations {
        let started = Instant::now();
        let search_config = SearchConfig {
            lambda: config.lambda_at(i),
            ..config.search.clone()
        };
        let ctx = SearchContext {
            game,
            approximators: &approximators,
            learning: config.learning,
            config: &search_config,
        };
        let before = explored.len();
        let mut new_samples = vec![Vec::new(); n];
        let mut reward_sum = 0.0;
        let mut sim_steps = 0;

        let mut state = sample_initial(game, &mut init_rng)?;
        for t in 0..config.timesteps {
            // pi^{i-1}: greedy on the previous approximators, uniform while empty
            let joint = JointAction::new(
                (0..n)
                    .map(|j| greedy_policy(&approximators[j], &state, game.action_count(j), &mut exec_rng))
                    .collect(),
            );
            let out = step(game, &state, &joint, config.search.noise, &mut exec_rng)?;
            reward_sum += out.reward;
            state = if out.next_state.terminal {
                sample_initial(game, &mut init_rng)?
            } else {
                out.next_state
            };
            for (agent, samples) in new_samples.iter_mut().enumerate() {
                let result = search(config.algorithm, &ctx, agent, &state, config.trace, &mut search_rng)?;
                samples.extend(result.samples);
                explored.extend(result.explored);
                sim_steps += result.sim_steps;
                if let Some(records) = result.trace {
                    trace.extend(records.into_iter().map(|record| TraceEntry {
                        iteration: i + 1,
                        timestep: t,
                        agent,
                        record,
                    }));
                }
            }
        }

        for (j, samples) in new_samples.into_iter().enumerate() {
            datasets[j].extend(i + 1, samples);
            approximators[j] = refit(&datasets[j], &config.fit, &mut fit_rng);
        }

        let cum = explored.len();
        history.push(IterationMetrics {
            iteration: i + 1,
            mean_reward: reward_sum / config.timesteps as f64,
            cum_states: cum,
            new_states: cum - before,
            sim_steps,
            wall_ms: if config.wall_clock {
                started.elapsed().as_millis() as u64
            } else {
                0
            },
        });
        log::debug!(
            "{} seed {} iteration {}: reward {:.4}, states {}",
            config.algorithm,
            config.seed,
            i + 1,
            reward_sum / config.timesteps as f64,
            cum
        );
    }

    Ok(TrainOutput {
        approximators,
        datasets,
        metrics: RunMetrics {
            algorithm: config.algorithm,
            seed: config.seed,
            iterations: history,
        },
        trace,
    })
}

fn sample_initial(game: &dyn Game, rng: &mut dyn RngCore) -> Result<GameState> {
    let s = game.sample_initial(rng);
    if s.terminal || s.len() != game.feature_len() {
        return Err(QcpError::InvalidModel(format!(
            "{} produced an invalid initial state",
            game.name()
        )));
    }
    Ok(s)
}

/// Mean and population standard deviation of the undiscounted episode reward
/// of the frozen greedy policies.
pub fn evaluate_policy(
    game: &dyn Game,
    approximators: &[QApproximator],
    episodes: usize,
    max_steps: usize,
    noise: f64,
    rng: &mut dyn RngCore,
) -> Result<(f64, f64)> {
    if episodes == 0 {
        return Err(QcpError::InvalidConfig("episodes must be >= 1".into()));
    }
    let mut totals = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut state = game.sample_initial(rng);
        let mut total = 0.0;
        for _ in 0..max_steps {
            if state.terminal {
                break;
            }
            let joint = JointAction::new(
                (0..game.n_agents())
                    .map(|j| greedy_policy(&approximators[j], &state, game.action_count(j), rng))
                    .collect(),
            );
            let out = step(game, &state, &joint, noise, rng)?;
            total += out.reward;
            state = out.next_state;
        }
        totals.push(total);
    }
    let mean = totals.iter().sum::<f64>() / episodes as f64;
    let var = totals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / episodes as f64;
    Ok((mean, var.sqrt()))
}

/// Divides every curve by the largest value over all curves.
pub fn normalize_rewards(curves: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let max = curves
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return curves.to_vec();
    }
    curves
        .iter()
        .map(|c| c.iter().map(|v| v / max).collect())
        .collect()
}

/// Element-wise mean of equally long curves.
pub fn mean_curve(curves: &[Vec<f64>]) -> Vec<f64> {
    let Some(len) = curves.iter().map(Vec::len).min() else {
        return Vec::new();
    };
    (0..len)
        .map(|k| curves.iter().map(|c| c[k]).sum::<f64>() / curves.len() as f64)
        .collect()
}
