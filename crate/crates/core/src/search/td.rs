//! TD(0) search: epsilon-greedy simulated episodes of length `horizon` from the
//! root, bootstrapping a local action-value table seeded from the approximator.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;

use super::{SearchContext, SearchResult, TraceRecord};
use crate::error::Result;
use crate::game::{step, GameState, StateKey};
use crate::SimRng;

struct Table<'c, 'a> {
    ctx: &'c SearchContext<'a>,
    agent: usize,
    values: HashMap<StateKey, Vec<f64>>,
}

impl Table<'_, '_> {
    fn row(&mut self, state: &GameState) -> &mut Vec<f64> {
        let key = StateKey::new(state, self.ctx.game.tolerance());
        let n = self.ctx.game.action_count(self.agent);
        let q = &self.ctx.approximators[self.agent];
        self.values
            .entry(key)
            .or_insert_with(|| q.predict_all(&state.features, n).iter().map(|p| p.mean).collect())
    }

    /// Greedy action, lowest id on ties.
    fn best(&mut self, state: &GameState) -> (usize, f64) {
        self.row(state)
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (a, &v)| if v > acc.1 { (a, v) } else { acc })
    }
}

pub fn td_search(
    ctx: &SearchContext<'_>,
    agent: usize,
    state: &GameState,
    trace: bool,
    rng: &mut SimRng,
) -> Result<SearchResult> {
    ctx.check(agent, state)?;
    let cfg = ctx.config;
    let learning = ctx.learning;
    let n_actions = ctx.game.action_count(agent);
    let tol = ctx.game.tolerance();
    let mut table = Table {
        ctx,
        agent,
        values: HashMap::new(),
    };
    let mut explored = BTreeSet::new();
    let mut sim_steps = 0;
    let mut records = trace.then(Vec::new);

    for iteration in 0..cfg.budget {
        let mut s = state.clone();
        let mut depth = 0;
        let mut last = (0, 0.0);
        while depth < cfg.horizon && !s.terminal {
            explored.insert(StateKey::new(&s, tol));
            let action = if rng.random::<f64>() < cfg.td_epsilon {
                rng.random_range(0..n_actions)
            } else {
                table.best(&s).0
            };
            let joint = ctx.joint_with(agent, action, &s, rng);
            let out = step(ctx.game, &s, &joint, cfg.noise, rng)?;
            sim_steps += 1;
            let future = if out.next_state.terminal {
                0.0
            } else {
                table.best(&out.next_state).1
            };
            let q = &mut table.row(&s)[action];
            *q += learning.alpha * (out.reward + learning.gamma * future - *q);
            last = (action, *q);
            s = out.next_state;
            depth += 1;
        }
        if let Some(records) = records.as_mut() {
            records.push(TraceRecord {
                iteration,
                depth,
                state_hash: StateKey::new(&s, tol).fingerprint(),
                admissible: (0..n_actions).collect(),
                action: (depth > 0).then_some(last.0),
                value: last.1,
            });
        }
    }

    let mut samples = Vec::with_capacity(cfg.horizon);
    let mut s = state.clone();
    while samples.len() < cfg.horizon && !s.terminal {
        let action = table.best(&s).0;
        let joint = ctx.joint_with(agent, action, &s, rng);
        let out = step(ctx.game, &s, &joint, cfg.noise, rng)?;
        sim_steps += 1;
        samples.push(ctx.sample(agent, &s, action, out.reward, &out.next_state));
        s = out.next_state;
    }

    Ok(SearchResult {
        samples,
        explored,
        sim_steps,
        trace: records,
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_games::Corridor;
    use super::super::SearchConfig;
    use super::*;
    use crate::qfunction::{QApproximator, QLearning};
    use crate::seeded_rng;

    #[test]
    fn greedy_trajectory_is_optimal_on_a_short_corridor() {
        // exhaustive optimum from cell 0 of a 3-cell corridor: right, right
        let game = Corridor::new(3, 3);
        let q = vec![QApproximator::default()];
        let cfg = SearchConfig {
            horizon: 4,
            budget: 400,
            noise: 0.0,
            td_epsilon: 0.3,
            ..Default::default()
        };
        let ctx = SearchContext {
            game: &game,
            approximators: &q,
            learning: QLearning::default(),
            config: &cfg,
        };
        let res = td_search(&ctx, 0, &game.at(0), false, &mut seeded_rng(0, 0)).unwrap();
        let actions: Vec<usize> = res.samples.iter().map(|s| s.action_id).collect();
        assert_eq!(actions, vec![1, 1]);
        assert!(res.samples.last().unwrap().next_state.terminal);
    }

    #[test]
    fn zero_reward_gives_zero_targets() {
        let game = Corridor::new(100, 3);
        let q = vec![QApproximator::default()];
        let cfg = SearchConfig::default();
        let ctx = SearchContext {
            game: &game,
            approximators: &q,
            learning: QLearning::default(),
            config: &cfg,
        };
        let res = td_search(&ctx, 0, &game.at(0), true, &mut seeded_rng(1, 0)).unwrap();
        assert_eq!(res.samples.len(), cfg.horizon);
        assert!(res.samples.iter().all(|s| s.q_target == 0.0));
        assert_eq!(res.trace.unwrap().len(), cfg.budget);
        let again = td_search(&ctx, 0, &game.at(0), true, &mut seeded_rng(1, 0)).unwrap();
        assert_eq!(res.samples, again.samples);
    }
}
