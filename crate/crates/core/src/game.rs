//! The stochastic-game contract shared by every scenario and search algorithm.
//!
//! A game has `n` agents, each with a discrete action set, and a single shared
//! reward. Transitions are a deterministic function of `(state, joint action)`;
//! stochasticity enters through [`step`], which independently replaces each
//! agent's commanded action by a uniformly random one with a fixed probability.

use rand::{Rng, RngCore};

use crate::error::{QcpError, Result};

/// Probability with which each agent's commanded action is replaced by a random one.
pub const DEFAULT_ACTION_NOISE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    pub features: Vec<f64>,
    pub terminal: bool,
}

impl GameState {
    pub fn new(features: Vec<f64>, terminal: bool) -> Self {
        Self { features, terminal }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AgentAction {
    pub agent_id: usize,
    pub action_id: usize,
}

/// One action per agent, indexed by agent id.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JointAction(Vec<usize>);

impl JointAction {
    pub fn new(actions: Vec<usize>) -> Self {
        Self(actions)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn get(&self, agent_id: usize) -> Option<AgentAction> {
        self.0.get(agent_id).map(|&action_id| AgentAction { agent_id, action_id })
    }

    pub fn iter(&self) -> impl Iterator<Item = AgentAction> + '_ {
        self.0
            .iter()
            .enumerate()
            .map(|(agent_id, &action_id)| AgentAction { agent_id, action_id })
    }
}

impl From<Vec<usize>> for JointAction {
    fn from(actions: Vec<usize>) -> Self {
        Self(actions)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: GameState,
    pub reward: f64,
}

/// A fully collaborative stochastic game `(n, S, A_1..A_n, T, R)`.
pub trait Game: Send + Sync {
    fn name(&self) -> &str;

    fn n_agents(&self) -> usize;

    /// Size of the discrete action set of `agent`.
    fn action_count(&self, agent: usize) -> usize;

    /// Length of every state's feature vector.
    fn feature_len(&self) -> usize;

    /// Per-feature state comparison threshold.
    fn tolerance(&self) -> &[f64];

    /// Draws a non-terminal state from the initial state distribution.
    fn sample_initial(&self, rng: &mut dyn RngCore) -> GameState;

    /// Deterministic transition under the given (already noise-resolved) actions.
    fn transition(&self, state: &GameState, actions: &[usize]) -> StepOutcome;

    /// Optional ASCII rendering for debugging.
    fn render(&self, _state: &GameState) -> Option<String> {
        None
    }
}

/// Checks a joint action against the game's action sets.
pub fn validate_joint(game: &dyn Game, joint: &JointAction) -> Result<()> {
    if joint.len() != game.n_agents() {
        return Err(QcpError::InvalidJointAction(format!(
            "expected {} actions, got {}",
            game.n_agents(),
            joint.len()
        )));
    }
    for a in joint.iter() {
        let n = game.action_count(a.agent_id);
        if a.action_id >= n {
            return Err(QcpError::InvalidJointAction(format!(
                "agent {} action {} out of range 0..{}",
                a.agent_id, a.action_id, n
            )));
        }
    }
    Ok(())
}

/// Replaces each agent's action by a uniformly random one with probability `noise`.
///
/// Exactly two draws are consumed per agent whatever the outcome, so the random
/// stream stays aligned across runs that differ only in the commanded actions.
pub fn perturb_actions<R: Rng + ?Sized>(
    game: &dyn Game,
    actions: &[usize],
    noise: f64,
    rng: &mut R,
) -> Vec<usize> {
    actions
        .iter()
        .enumerate()
        .map(|(agent, &a)| {
            let u: f64 = rng.random();
            let replacement = rng.random_range(0..game.action_count(agent));
            if u < noise {
                replacement
            } else {
                a
            }
        })
        .collect()
}

/// Executes one joint action with per-agent action noise.
pub fn step<R: Rng + ?Sized>(
    game: &dyn Game,
    state: &GameState,
    joint: &JointAction,
    noise: f64,
    rng: &mut R,
) -> Result<StepOutcome> {
    if state.terminal {
        return Err(QcpError::TerminalState);
    }
    if state.len() != game.feature_len() {
        return Err(QcpError::DimensionMismatch {
            expected: game.feature_len(),
            found: state.len(),
        });
    }
    validate_joint(game, joint)?;
    let actions = perturb_actions(game, joint.as_slice(), noise, rng);
    let outcome = game.transition(state, &actions);
    if !outcome.reward.is_finite() {
        return Err(QcpError::NonFinite(format!("reward {}", outcome.reward)));
    }
    Ok(outcome)
}

/// True iff every feature differs by at most its tolerance.
pub fn states_equal(a: &GameState, b: &GameState, tolerance: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(QcpError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if tolerance.len() != a.len() {
        return Err(QcpError::DimensionMismatch {
            expected: a.len(),
            found: tolerance.len(),
        });
    }
    Ok(a
        .features
        .iter()
        .zip(&b.features)
        .zip(tolerance)
        .all(|((x, y), t)| (x - y).abs() <= *t))
}

/// Broadcasts a scalar threshold to every feature.
pub fn uniform_tolerance(len: usize, xi: f64) -> Vec<f64> {
    vec![xi; len]
}

/// Hashable cell of a state on a lattice of pitch `2ξ` per feature.
///
/// Used to count distinct explored states across searches. For grid scenarios
/// with `ξ` below the cell size this is exact equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey(Vec<i64>);

impl StateKey {
    pub fn new(state: &GameState, tolerance: &[f64]) -> Self {
        Self(
            state
                .features
                .iter()
                .zip(tolerance)
                .map(|(f, t)| (f / (2.0 * t)).round() as i64)
                .collect(),
        )
    }

    /// Stable 64-bit hash (FNV-1a), used in trace logs.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in &self.0 {
            for b in v.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

/// Maps a state to an action for one agent.
pub trait Policy {
    fn act(&self, state: &GameState, rng: &mut dyn RngCore) -> usize;
}

impl<F> Policy for F
where
    F: Fn(&GameState, &mut dyn RngCore) -> usize,
{
    fn act(&self, state: &GameState, rng: &mut dyn RngCore) -> usize {
        self(state, rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: GameState,
    pub joint: JointAction,
    pub reward: f64,
}

/// Runs the given per-agent policies from `start` for at most `max_steps` transitions.
pub fn run_episode(
    game: &dyn Game,
    policies: &[&dyn Policy],
    start: GameState,
    max_steps: usize,
    noise: f64,
    rng: &mut dyn RngCore,
) -> Result<Vec<Transition>> {
    if max_steps == 0 {
        return Err(QcpError::InvalidConfig("max_steps must be at least 1".into()));
    }
    if policies.len() != game.n_agents() {
        return Err(QcpError::InvalidJointAction(format!(
            "expected {} policies, got {}",
            game.n_agents(),
            policies.len()
        )));
    }
    let mut trajectory = Vec::with_capacity(max_steps);
    let mut state = start;
    for _ in 0..max_steps {
        if state.terminal {
            break;
        }
        let joint = JointAction::new(policies.iter().map(|p| p.act(&state, rng)).collect());
        let outcome = step(game, &state, &joint, noise, rng)?;
        trajectory.push(Transition {
            state,
            joint,
            reward: outcome.reward,
        });
        state = outcome.next_state;
    }
    Ok(trajectory)
}
