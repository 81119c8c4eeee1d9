//! Depth-limited UCT over the searching agent's actions.
//!
//! Nodes live in an arena. A node is expanded the first time a descent reaches
//! it: its action set is fixed once and one successor per allowed action is
//! simulated and stored. Later descents through an edge resample the
//! transition and either match a stored outcome (under the game's tolerance)
//! or add a sibling outcome.

use rand::Rng;

use super::{admissible_actions, rollout, select_action_ucb, SearchContext, SearchResult, TraceRecord};
use crate::error::Result;
use crate::game::{states_equal, step, GameState, StateKey};
use crate::qfunction::argmax_random_tie;
use crate::SimRng;

/// Which actions a node may expand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expansion {
    /// Value-gated subset.
    Admissible,
    /// Every action.
    All,
    /// One uniformly random action.
    RandomSingle,
}

#[derive(Debug)]
struct Outcome {
    child: usize,
    reward: f64,
    count: u64,
}

#[derive(Debug)]
struct Edge {
    action: usize,
    visits: u64,
    value: f64,
    outcomes: Vec<Outcome>,
}

#[derive(Debug)]
struct Node {
    state: GameState,
    depth: usize,
    visits: u64,
    edges: Option<Vec<Edge>>,
    /// Approximator means per action, filled on expansion.
    prior: Vec<f64>,
}

struct Tree<'c, 'a> {
    ctx: &'c SearchContext<'a>,
    agent: usize,
    expansion: Expansion,
    nodes: Vec<Node>,
    sim_steps: usize,
    rollout_states: Vec<GameState>,
}

impl<'c, 'a> Tree<'c, 'a> {
    fn add_node(&mut self, state: GameState, depth: usize) -> usize {
        self.nodes.push(Node {
            state,
            depth,
            visits: 0,
            edges: None,
            prior: Vec::new(),
        });
        self.nodes.len() - 1
    }

    fn allowed(&self, state: &GameState, admit_rng: &mut SimRng) -> Vec<usize> {
        let n = self.ctx.game.action_count(self.agent);
        let cfg = self.ctx.config;
        match self.expansion {
            Expansion::All => (0..n).collect(),
            Expansion::RandomSingle => vec![admit_rng.random_range(0..n)],
            Expansion::Admissible => admissible_actions(
                &self.ctx.approximators[self.agent],
                state,
                n,
                cfg.lambda,
                cfg.admit_epsilon,
                cfg.delta,
                admit_rng,
            ),
        }
    }

    fn simulate(&mut self, state: &GameState, action: usize, rng: &mut SimRng) -> Result<(GameState, f64)> {
        let joint = self.ctx.joint_with(self.agent, action, state, rng);
        let out = step(self.ctx.game, state, &joint, self.ctx.config.noise, rng)?;
        self.sim_steps += 1;
        Ok((out.next_state, out.reward))
    }

    fn expand(&mut self, id: usize, rng: &mut SimRng, admit_rng: &mut SimRng) -> Result<()> {
        let state = self.nodes[id].state.clone();
        let depth = self.nodes[id].depth;
        let actions = self.allowed(&state, admit_rng);
        let mut edges = Vec::with_capacity(actions.len());
        for action in actions {
            let (next, reward) = self.simulate(&state, action, rng)?;
            let child = self.add_node(next, depth + 1);
            edges.push(Edge {
                action,
                visits: 0,
                value: 0.0,
                outcomes: vec![Outcome {
                    child,
                    reward,
                    count: 0,
                }],
            });
        }
        let n = self.ctx.game.action_count(self.agent);
        self.nodes[id].prior = self.ctx.approximators[self.agent]
            .predict_all(&state.features, n)
            .iter()
            .map(|p| p.mean)
            .collect();
        self.nodes[id].edges = Some(edges);
        Ok(())
    }

    fn leaf_value(&mut self, id: usize, rng: &mut SimRng) -> Result<f64> {
        let cfg = self.ctx.config;
        let state = self.nodes[id].state.clone();
        if state.terminal {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for _ in 0..cfg.rollouts {
            let visited = cfg.count_rollout_states.then_some(&mut self.rollout_states);
            let (ret, steps) = rollout(
                self.ctx.game,
                self.ctx.approximators,
                &state,
                cfg.rollout_epsilon,
                cfg.rollout_cap,
                self.ctx.learning.gamma,
                cfg.noise,
                rng,
                visited,
            )?;
            self.sim_steps += steps;
            total += ret;
        }
        Ok(total / cfg.rollouts as f64)
    }

    /// Follows or adds an outcome of edge `e` at node `id`.
    fn descend(&mut self, id: usize, e: usize, rng: &mut SimRng) -> Result<(usize, f64)> {
        let edge = &self.nodes[id].edges.as_ref().expect("expanded")[e];
        if edge.visits == 0 {
            let o = &edge.outcomes[0];
            return Ok((0, o.reward));
        }
        let action = edge.action;
        let state = self.nodes[id].state.clone();
        let (next, reward) = self.simulate(&state, action, rng)?;
        let tol = self.ctx.game.tolerance();
        let edge = &self.nodes[id].edges.as_ref().expect("expanded")[e];
        for (k, o) in edge.outcomes.iter().enumerate() {
            if states_equal(&self.nodes[o.child].state, &next, tol)? {
                return Ok((k, reward));
            }
        }
        let depth = self.nodes[id].depth + 1;
        let child = self.add_node(next, depth);
        let edges = self.nodes[id].edges.as_mut().expect("expanded");
        edges[e].outcomes.push(Outcome {
            child,
            reward,
            count: 0,
        });
        Ok((edges[e].outcomes.len() - 1, reward))
    }

    /// One descent and backup. Returns the root return, the depth reached and
    /// the last node where a choice was made with its action set and choice.
    fn iterate(&mut self, rng: &mut SimRng, admit_rng: &mut SimRng) -> Result<(f64, usize, (usize, Vec<usize>, Option<usize>))> {
        let horizon = self.ctx.config.horizon;
        let gamma = self.ctx.learning.gamma;
        let mut id = 0;
        let mut path: Vec<(usize, usize, usize, f64)> = Vec::new();
        let leaf = loop {
            let node = &self.nodes[id];
            if node.state.terminal {
                break 0.0;
            }
            if node.depth >= horizon {
                break self.leaf_value(id, rng)?;
            }
            if node.edges.is_none() {
                self.expand(id, rng, admit_rng)?;
                break self.leaf_value(id, rng)?;
            }
            let edges = self.nodes[id].edges.as_ref().expect("expanded");
            let admissible: Vec<usize> = edges.iter().map(|e| e.action).collect();
            let prior = &self.nodes[id].prior;
            let edge_values: Vec<f64> = admissible.iter().map(|&a| prior[a]).collect();
            let visits: Vec<u64> = edges.iter().map(|e| e.visits).collect();
            let action = select_action_ucb(&admissible, &edge_values, &visits, self.ctx.config.exploration);
            let e = admissible.iter().position(|&a| a == action).expect("selected from the set");
            let (o, reward) = self.descend(id, e, rng)?;
            path.push((id, e, o, reward));
            id = self.nodes[id].edges.as_ref().expect("expanded")[e].outcomes[o].child;
        };
        let last = match path.last() {
            Some(&(n, e, _, _)) => {
                let edges = self.nodes[n].edges.as_ref().expect("expanded");
                (n, edges.iter().map(|e| e.action).collect(), Some(edges[e].action))
            }
            None => {
                let actions = self.nodes[id].edges.iter().flatten().map(|e| e.action).collect();
                (id, actions, None)
            }
        };
        let depth = path.len();
        let mut ret = leaf;
        for &(n, e, o, reward) in path.iter().rev() {
            ret = reward + gamma * ret;
            let node = &mut self.nodes[n];
            node.visits += 1;
            let edge = &mut node.edges.as_mut().expect("expanded")[e];
            edge.visits += 1;
            edge.value += (ret - edge.value) / edge.visits as f64;
            edge.outcomes[o].count += 1;
        }
        Ok((ret, depth, last))
    }

    /// Executes the best path: highest backed-up value among visited edges,
    /// then the most frequent outcome. Past the tree it continues with the
    /// agent greedy on its approximator.
    fn executed_path(&mut self, rng: &mut SimRng) -> Result<Vec<(GameState, usize, f64, GameState)>> {
        let horizon = self.ctx.config.horizon;
        let n_actions = self.ctx.game.action_count(self.agent);
        let mut steps = Vec::new();
        let mut id = Some(0usize);
        let mut state = self.nodes[0].state.clone();
        while steps.len() < horizon && !state.terminal {
            let in_tree = id.and_then(|n| {
                let edges = self.nodes[n].edges.as_ref()?;
                let best = edges
                    .iter()
                    .filter(|e| e.visits > 0)
                    .fold(None::<&Edge>, |acc, e| match acc {
                        Some(b) if b.value > e.value || (b.value == e.value && b.action < e.action) => Some(b),
                        _ => Some(e),
                    })?;
                let o = best
                    .outcomes
                    .iter()
                    .fold(&best.outcomes[0], |acc, o| if o.count > acc.count { o } else { acc });
                Some((best.action, o.child, o.reward))
            });
            let (action, next, reward) = match in_tree {
                Some((action, child, reward)) => {
                    id = Some(child);
                    (action, self.nodes[child].state.clone(), reward)
                }
                None => {
                    id = None;
                    let values: Vec<f64> = self.ctx.approximators[self.agent]
                        .predict_all(&state.features, n_actions)
                        .iter()
                        .map(|p| p.mean)
                        .collect();
                    let action = argmax_random_tie(&values, rng);
                    let (next, reward) = self.simulate(&state, action, rng)?;
                    (action, next, reward)
                }
            };
            steps.push((state, action, reward, next.clone()));
            state = next;
        }
        Ok(steps)
    }
}

/// Shared UCT driver for the three tree-based planners.
pub fn uct_search(
    ctx: &SearchContext<'_>,
    agent: usize,
    state: &GameState,
    expansion: Expansion,
    trace: bool,
    rng: &mut SimRng,
) -> Result<SearchResult> {
    ctx.check(agent, state)?;
    let mut admit_rng = super::split_rng(rng);
    let mut tree = Tree {
        ctx,
        agent,
        expansion,
        nodes: Vec::new(),
        sim_steps: 0,
        rollout_states: Vec::new(),
    };
    tree.add_node(state.clone(), 0);
    let mut records = trace.then(Vec::new);
    for iteration in 0..ctx.config.budget {
        let (value, depth, last) = tree.iterate(rng, &mut admit_rng)?;
        if let Some(records) = records.as_mut() {
            let (node, admissible, action) = last;
            let key = StateKey::new(&tree.nodes[node].state, ctx.game.tolerance());
            records.push(TraceRecord {
                iteration,
                depth,
                state_hash: key.fingerprint(),
                admissible,
                action,
                value,
            });
        }
    }
    let path = tree.executed_path(rng)?;
    let tol = ctx.game.tolerance();
    let mut explored: std::collections::BTreeSet<StateKey> =
        tree.nodes.iter().map(|n| StateKey::new(&n.state, tol)).collect();
    explored.extend(tree.rollout_states.iter().map(|s| StateKey::new(s, tol)));
    let samples = path
        .iter()
        .map(|(s, a, r, next)| ctx.sample(agent, s, *a, *r, next))
        .collect();
    Ok(SearchResult {
        samples,
        explored,
        sim_steps: tree.sim_steps,
        trace: records,
    })
}

pub fn qcp_search(ctx: &SearchContext<'_>, agent: usize, state: &GameState, rng: &mut SimRng) -> Result<SearchResult> {
    uct_search(ctx, agent, state, Expansion::Admissible, false, rng)
}

pub fn vanilla_uct_search(ctx: &SearchContext<'_>, agent: usize, state: &GameState, rng: &mut SimRng) -> Result<SearchResult> {
    uct_search(ctx, agent, state, Expansion::All, false, rng)
}

pub fn random_uct_search(ctx: &SearchContext<'_>, agent: usize, state: &GameState, rng: &mut SimRng) -> Result<SearchResult> {
    uct_search(ctx, agent, state, Expansion::RandomSingle, false, rng)
}
