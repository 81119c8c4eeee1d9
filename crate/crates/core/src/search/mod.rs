//! Per-agent planners run at every executed state.
//!
//! All four algorithms share [`SearchConfig`], the teammate model (greedy on
//! each teammate's approximator) and the way emitted samples are scored
//! against the previous approximator.

mod td;
mod uct;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{QcpError, Result};
use crate::game::{step, Game, GameState, JointAction, StateKey};
use crate::qfunction::{epsilon_greedy_policy, greedy_policy, QApproximator, QLearning, Sample};
use crate::SimRng;

pub use td::td_search;
pub use uct::{qcp_search, random_uct_search, uct_search, vanilla_uct_search, Expansion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Qcp,
    Vanilla,
    Random,
    TdSearch,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Self::Qcp, Self::Vanilla, Self::Random, Self::TdSearch];

    pub fn name(self) -> &'static str {
        match self {
            Self::Qcp => "qcp",
            Self::Vanilla => "vanilla",
            Self::Random => "random",
            Self::TdSearch => "td",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = QcpError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| QcpError::InvalidConfig(format!("unknown algorithm `{s}`")))
    }
}

/// How the admissibility slack is derived from the predicted variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaMode {
    /// `|z|` with `z ~ N(0, variance)`.
    Sampled,
    /// The variance itself.
    Variance,
}

impl FromStr for DeltaMode {
    type Err = QcpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sampled" => Ok(Self::Sampled),
            "variance" => Ok(Self::Variance),
            _ => Err(QcpError::InvalidConfig(format!("unknown delta mode `{s}`"))),
        }
    }
}

impl fmt::Display for DeltaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sampled => "sampled",
            Self::Variance => "variance",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub horizon: usize,
    pub rollouts: usize,
    pub exploration: f64,
    pub lambda: f64,
    pub admit_epsilon: f64,
    pub rollout_epsilon: f64,
    pub rollout_cap: usize,
    /// Tree iterations per search call (episodes for TD-search).
    pub budget: usize,
    pub delta: DeltaMode,
    /// Action noise used for simulated steps.
    pub noise: f64,
    /// Also count states visited during roll-outs as explored.
    pub count_rollout_states: bool,
    /// Exploration rate of the searching agent in TD-search.
    pub td_epsilon: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            horizon: 4,
            rollouts: 3,
            exploration: 0.7,
            lambda: 0.5,
            admit_epsilon: 0.3,
            rollout_epsilon: 0.1,
            rollout_cap: 25,
            budget: 64,
            delta: DeltaMode::Sampled,
            noise: crate::game::DEFAULT_ACTION_NOISE,
            count_rollout_states: false,
            td_epsilon: 0.1,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(QcpError::InvalidConfig(what.to_string()));
        if self.horizon == 0 {
            return bad("horizon must be >= 1");
        }
        if self.rollouts == 0 {
            return bad("rollouts must be >= 1");
        }
        if self.rollout_cap == 0 {
            return bad("rollout cap must be >= 1");
        }
        if self.budget == 0 {
            return bad("search budget must be >= 1");
        }
        if !(self.exploration >= 0.0 && self.exploration.is_finite()) {
            return bad("exploration constant must be finite and >= 0");
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("admit_epsilon", self.admit_epsilon),
            ("rollout_epsilon", self.rollout_epsilon),
            ("noise", self.noise),
            ("td_epsilon", self.td_epsilon),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(QcpError::InvalidConfig(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Everything a search needs besides the start state and randomness.
#[derive(Clone, Copy)]
pub struct SearchContext<'a> {
    pub game: &'a dyn Game,
    /// Previous-iteration approximator of every agent.
    pub approximators: &'a [QApproximator],
    pub learning: QLearning,
    pub config: &'a SearchConfig,
}

impl<'a> SearchContext<'a> {
    /// Joint action with `agent` fixed and every teammate greedy.
    pub(crate) fn joint_with(
        &self,
        agent: usize,
        action: usize,
        state: &GameState,
        rng: &mut SimRng,
    ) -> JointAction {
        let actions = (0..self.game.n_agents())
            .map(|j| {
                if j == agent {
                    action
                } else {
                    greedy_policy(&self.approximators[j], state, self.game.action_count(j), rng)
                }
            })
            .collect::<Vec<_>>();
        JointAction::new(actions)
    }

    pub(crate) fn sample(
        &self,
        agent: usize,
        state: &GameState,
        action: usize,
        reward: f64,
        next: &GameState,
    ) -> Sample {
        let q_target = self.learning.target(
            &self.approximators[agent],
            state,
            action,
            reward,
            next,
            self.game.action_count(agent),
        );
        Sample {
            state: state.clone(),
            action_id: action,
            q_target,
            reward,
            next_state: next.clone(),
        }
    }

    fn check(&self, agent: usize, state: &GameState) -> Result<()> {
        if state.terminal {
            return Err(QcpError::TerminalState);
        }
        if self.approximators.len() != self.game.n_agents() {
            return Err(QcpError::DimensionMismatch {
                expected: self.game.n_agents(),
                found: self.approximators.len(),
            });
        }
        if agent >= self.game.n_agents() {
            return Err(QcpError::InvalidConfig(format!("no agent {agent}")));
        }
        self.config.validate()
    }
}

/// One line of the optional search trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub depth: usize,
    pub state_hash: u64,
    pub admissible: Vec<usize>,
    /// `None` when the iteration ended by expanding the root.
    pub action: Option<usize>,
    pub value: f64,
}

impl TraceRecord {
    pub fn header() -> &'static str {
        "iteration,depth,state_hash,admissible,action,value"
    }

    pub fn to_line(&self) -> String {
        let adm: Vec<String> = self.admissible.iter().map(|a| a.to_string()).collect();
        let action = self.action.map_or_else(|| "-".to_string(), |a| a.to_string());
        format!(
            "{},{},{:016x},{},{},{}",
            self.iteration,
            self.depth,
            self.state_hash,
            adm.join(" "),
            action,
            self.value
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchResult {
    /// One sample per step of the executed path, at most `horizon`.
    pub samples: Vec<Sample>,
    /// Distinct states materialized by the search.
    pub explored: BTreeSet<StateKey>,
    /// Number of simulated environment steps.
    pub sim_steps: usize,
    pub trace: Option<Vec<TraceRecord>>,
}

/// Runs the planner selected by `algorithm` for `agent` at `state`.
pub fn search(
    algorithm: Algorithm,
    ctx: &SearchContext<'_>,
    agent: usize,
    state: &GameState,
    trace: bool,
    rng: &mut SimRng,
) -> Result<SearchResult> {
    match algorithm {
        Algorithm::Qcp => uct_search(ctx, agent, state, Expansion::Admissible, trace, rng),
        Algorithm::Vanilla => uct_search(ctx, agent, state, Expansion::All, trace, rng),
        Algorithm::Random => uct_search(ctx, agent, state, Expansion::RandomSingle, trace, rng),
        Algorithm::TdSearch => td_search(ctx, agent, state, trace, rng),
    }
}

/// Actions passing the value gate at `state`.
///
/// An action is admitted when its predicted value is at least `lambda` times
/// the best predicted value minus a slack drawn from its predicted variance.
/// Each rejected action is then admitted anyway with probability
/// `admit_epsilon`. The set is never empty: if nothing passed, the best action
/// is returned alone. The result is sorted.
pub fn admissible_actions<R: Rng + ?Sized>(
    qhat: &QApproximator,
    state: &GameState,
    n_actions: usize,
    lambda: f64,
    admit_epsilon: f64,
    delta: DeltaMode,
    rng: &mut R,
) -> Vec<usize> {
    let predictions = qhat.predict_all(&state.features, n_actions);
    let best = predictions
        .iter()
        .map(|p| p.mean)
        .fold(f64::NEG_INFINITY, f64::max);
    let threshold = lambda * best;
    let mut admitted = Vec::with_capacity(n_actions);
    for (a, p) in predictions.iter().enumerate() {
        let slack = match delta {
            DeltaMode::Sampled => {
                let z: f64 = StandardNormal.sample(rng);
                (z * p.variance.max(0.0).sqrt()).abs()
            }
            DeltaMode::Variance => p.variance.max(0.0),
        };
        let passes = p.mean >= threshold - slack;
        let forced = rng.random::<f64>() < admit_epsilon;
        if passes || forced {
            admitted.push(a);
        }
    }
    if admitted.is_empty() {
        let argmax = predictions
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (a, p)| if p.mean > acc.1 { (a, p.mean) } else { acc })
            .0;
        admitted.push(argmax);
    }
    admitted
}

/// `c * sqrt(ln(total) / visits)`; infinite for an unvisited action.
pub fn exploration_bonus(total: u64, visits: u64, c: f64) -> f64 {
    if visits == 0 {
        return f64::INFINITY;
    }
    c * ((total as f64).ln() / visits as f64).sqrt()
}

/// Upper-confidence choice among `admissible` given their visit counts.
///
/// `values[k]` and `visits[k]` refer to `admissible[k]`. Unvisited actions win
/// outright, the lowest action id first; ties between scores go to the lowest id.
pub fn select_action_ucb(admissible: &[usize], values: &[f64], visits: &[u64], exploration: f64) -> usize {
    assert!(!admissible.is_empty(), "admissible set must not be empty");
    let mut order: Vec<usize> = (0..admissible.len()).collect();
    order.sort_by_key(|&k| admissible[k]);
    if let Some(&k) = order.iter().find(|&&k| visits[k] == 0) {
        return admissible[k];
    }
    let total: u64 = visits.iter().sum();
    let mut best = (admissible[order[0]], f64::NEG_INFINITY);
    for k in order {
        let score = values[k] + exploration_bonus(total, visits[k], exploration);
        if score > best.1 {
            best = (admissible[k], score);
        }
    }
    best.0
}

/// Discounted return of every agent acting epsilon-greedily on its own approximator.
///
/// Stops at a terminal state or after `cap` steps. States passed through are
/// appended to `visited` when given.
#[allow(clippy::too_many_arguments)]
pub fn rollout(
    game: &dyn Game,
    approximators: &[QApproximator],
    start: &GameState,
    epsilon: f64,
    cap: usize,
    gamma: f64,
    noise: f64,
    rng: &mut SimRng,
    mut visited: Option<&mut Vec<GameState>>,
) -> Result<(f64, usize)> {
    let mut state = start.clone();
    let mut ret = 0.0;
    let mut discount = 1.0;
    let mut steps = 0;
    while !state.terminal && steps < cap {
        let actions: Vec<usize> = (0..game.n_agents())
            .map(|j| epsilon_greedy_policy(&approximators[j], &state, game.action_count(j), epsilon, rng))
            .collect();
        let out = step(game, &state, &JointAction::new(actions), noise, rng)?;
        ret += discount * out.reward;
        discount *= gamma;
        steps += 1;
        if let Some(v) = visited.as_deref_mut() {
            v.push(out.next_state.clone());
        }
        state = out.next_state;
    }
    Ok((ret, steps))
}

/// Independent stream for admissibility draws, so gated and ungated searches
/// see the same simulation randomness.
fn split_rng(rng: &mut SimRng) -> SimRng {
    SimRng::seed_from_u64(rng.next_u64())
}

#[cfg(test)]
pub(crate) mod test_games {
    use rand::RngCore;

    use crate::game::{Game, GameState, StepOutcome};

    /// Walk on `0..len` with actions stay/right/left (configurable count);
    /// reward 1 on reaching the last cell, which is terminal.
    pub struct Corridor {
        pub len: i64,
        pub actions: usize,
        pub tolerance: Vec<f64>,
    }

    impl Corridor {
        pub fn new(len: i64, actions: usize) -> Self {
            Self {
                len,
                actions,
                tolerance: vec![0.25],
            }
        }

        pub fn at(&self, x: i64) -> GameState {
            GameState::new(vec![x as f64], x == self.len - 1)
        }
    }

    impl Game for Corridor {
        fn name(&self) -> &str {
            "corridor"
        }
        fn n_agents(&self) -> usize {
            1
        }
        fn action_count(&self, _agent: usize) -> usize {
            self.actions
        }
        fn feature_len(&self) -> usize {
            1
        }
        fn tolerance(&self) -> &[f64] {
            &self.tolerance
        }
        fn sample_initial(&self, _rng: &mut dyn RngCore) -> GameState {
            self.at(0)
        }
        fn transition(&self, state: &GameState, actions: &[usize]) -> StepOutcome {
            let x = state.features[0] as i64;
            let nx = match actions[0] {
                1 => x + 1,
                2 => x - 1,
                _ => x,
            }
            .clamp(0, self.len - 1);
            StepOutcome {
                next_state: self.at(nx),
                reward: if nx == self.len - 1 { 1.0 } else { 0.0 },
            }
        }
    }

    /// Chain with scripted rewards: every action advances by one cell.
    pub struct Chain {
        pub rewards: Vec<f64>,
        pub tolerance: Vec<f64>,
    }

    impl Chain {
        pub fn new(rewards: Vec<f64>) -> Self {
            Self {
                rewards,
                tolerance: vec![0.25],
            }
        }
    }

    impl Game for Chain {
        fn name(&self) -> &str {
            "chain"
        }
        fn n_agents(&self) -> usize {
            1
        }
        fn action_count(&self, _agent: usize) -> usize {
            1
        }
        fn feature_len(&self) -> usize {
            1
        }
        fn tolerance(&self) -> &[f64] {
            &self.tolerance
        }
        fn sample_initial(&self, _rng: &mut dyn RngCore) -> GameState {
            GameState::new(vec![0.0], false)
        }
        fn transition(&self, state: &GameState, _actions: &[usize]) -> StepOutcome {
            let x = state.features[0] as usize;
            StepOutcome {
                next_state: GameState::new(vec![(x + 1) as f64], x + 1 == self.rewards.len()),
                reward: self.rewards[x],
            }
        }
    }
}
