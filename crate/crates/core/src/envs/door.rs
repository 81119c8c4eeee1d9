//! Door passing: two robots cross a wall through a single door cell in opposite directions.

use rand::{Rng, RngCore};

use super::grid::{cell_at, manhattan, resolve_moves, Cell, ACTION_NAMES};
use crate::game::{uniform_tolerance, Game, GameState, StepOutcome};

#[derive(Debug, Clone, PartialEq)]
pub struct DoorConfig {
    pub width: i32,
    pub height: i32,
    /// Column of the wall.
    pub wall_x: i32,
    /// Row of the door cell in the wall column.
    pub door_y: i32,
    /// Weights of (target distance, obstacle clearance, robot separation).
    pub weights: [f64; 3],
    /// Mean clearance at which the clearance term saturates.
    pub clearance_saturation: f64,
    /// Robot distance at which the separation term saturates.
    pub separation_saturation: f64,
    pub xi: f64,
}

impl Default for DoorConfig {
    fn default() -> Self {
        Self {
            width: 7,
            height: 5,
            wall_x: 3,
            door_y: 2,
            weights: [0.6, 0.2, 0.2],
            clearance_saturation: 2.0,
            separation_saturation: 3.0,
            xi: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DoorPassing {
    config: DoorConfig,
    tolerance: Vec<f64>,
}

impl Default for DoorPassing {
    fn default() -> Self {
        Self::new(DoorConfig::default())
    }
}

impl DoorPassing {
    pub fn new(config: DoorConfig) -> Self {
        let tolerance = uniform_tolerance(8, config.xi);
        Self { config, tolerance }
    }

    pub fn config(&self) -> &DoorConfig {
        &self.config
    }

    pub fn is_wall(&self, c: Cell) -> bool {
        c.0 == self.config.wall_x && c.1 != self.config.door_y
    }

    fn blocked(&self, c: Cell) -> bool {
        c.0 < 0 || c.1 < 0 || c.0 >= self.config.width || c.1 >= self.config.height || self.is_wall(c)
    }

    /// Manhattan distance to the nearest wall cell.
    pub fn clearance(&self, c: Cell) -> i32 {
        (0..self.config.height)
            .filter(|&y| y != self.config.door_y)
            .map(|y| manhattan(c, (self.config.wall_x, y)))
            .min()
            .unwrap_or(i32::MAX)
    }

    pub fn robots(&self, state: &GameState) -> [Cell; 2] {
        [cell_at(&state.features, 0), cell_at(&state.features, 4)]
    }

    pub fn targets(&self, state: &GameState) -> [Cell; 2] {
        [cell_at(&state.features, 2), cell_at(&state.features, 6)]
    }

    pub fn state(&self, robots: [Cell; 2], targets: [Cell; 2]) -> GameState {
        let mut features = Vec::with_capacity(8);
        for (r, t) in robots.iter().zip(&targets) {
            features.extend([r.0 as f64, r.1 as f64, t.0 as f64, t.1 as f64]);
        }
        GameState::new(features, robots == targets)
    }

    pub fn reward(&self, state: &GameState) -> f64 {
        let cfg = &self.config;
        let robots = self.robots(state);
        let targets = self.targets(state);
        let dist: i32 = robots.iter().zip(&targets).map(|(r, t)| manhattan(*r, *t)).sum();
        let clearance = robots.iter().map(|&r| self.clearance(r) as f64).sum::<f64>() / 2.0;
        let separation = manhattan(robots[0], robots[1]) as f64;
        cfg.weights[0] / (1.0 + dist as f64)
            + cfg.weights[1] * (clearance / cfg.clearance_saturation).min(1.0)
            + cfg.weights[2] * (separation / cfg.separation_saturation).min(1.0)
    }

    fn random_cell(&self, xs: std::ops::Range<i32>, rng: &mut dyn RngCore) -> Cell {
        (rng.random_range(xs), rng.random_range(0..self.config.height))
    }
}

impl Game for DoorPassing {
    fn name(&self) -> &str {
        "door"
    }

    fn n_agents(&self) -> usize {
        2
    }

    fn action_count(&self, _agent: usize) -> usize {
        ACTION_NAMES.len()
    }

    fn feature_len(&self) -> usize {
        8
    }

    fn tolerance(&self) -> &[f64] {
        &self.tolerance
    }

    /// Robot 0 starts left of the wall with a target on the right, robot 1 the
    /// other way round. Targets keep at least the saturating clearance.
    fn sample_initial(&self, rng: &mut dyn RngCore) -> GameState {
        let cfg = &self.config;
        let margin = cfg.clearance_saturation.ceil() as i32;
        let left = 0..cfg.wall_x;
        let right = cfg.wall_x + 1..cfg.width;
        let left_targets = 0..(cfg.wall_x - margin + 1).max(1);
        let right_targets = (cfg.wall_x + margin).min(cfg.width - 1)..cfg.width;
        let r0 = self.random_cell(left, rng);
        let r1 = self.random_cell(right, rng);
        let t0 = self.random_cell(right_targets, rng);
        let t1 = self.random_cell(left_targets, rng);
        self.state([r0, r1], [t0, t1])
    }

    fn transition(&self, state: &GameState, actions: &[usize]) -> StepOutcome {
        let moved = resolve_moves(&self.robots(state), actions, |c| self.blocked(c));
        let next = self.state([moved[0], moved[1]], self.targets(state));
        let reward = self.reward(&next);
        StepOutcome {
            next_state: next,
            reward,
        }
    }

    fn render(&self, state: &GameState) -> Option<String> {
        let robots = self.robots(state);
        let targets = self.targets(state);
        let mut out = String::new();
        for y in (0..self.config.height).rev() {
            for x in 0..self.config.width {
                let c = (x, y);
                let ch = if let Some(j) = robots.iter().position(|&r| r == c) {
                    char::from(b'0' + j as u8)
                } else if let Some(j) = targets.iter().position(|&t| t == c) {
                    char::from(b'a' + j as u8)
                } else if self.is_wall(c) {
                    '#'
                } else {
                    '.'
                };
                out.push(ch);
            }
            out.push('\n');
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use proptest::prelude::*;

    #[test]
    fn goal_far_from_walls_is_maximal() {
        let env = DoorPassing::default();
        let t = [(5, 2), (1, 2)];
        let s = env.state(t, t);
        assert!(s.terminal);
        assert!((env.reward(&s) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adjacent_robots_get_a_third_of_the_separation_weight() {
        let env = DoorPassing::default();
        let s = env.state([(0, 0), (0, 1)], [(0, 0), (0, 1)]);
        let sep = env.config.weights[2] * (1.0 / 3.0);
        // on targets, clearance 3 for both robots saturates
        let expected = env.config.weights[0] + env.config.weights[1] + sep;
        assert!((env.reward(&s) - expected).abs() < 1e-12);
    }

    #[test]
    fn wall_adjacency_reduces_clearance_term() {
        let env = DoorPassing::default();
        assert_eq!(env.clearance((2, 0)), 1);
        let s = env.state([(2, 0), (2, 4)], [(2, 0), (2, 4)]);
        let clearance_term = env.reward(&s) - env.config.weights[0] - env.config.weights[2];
        assert!(clearance_term < env.config.weights[1]);
    }

    #[test]
    fn door_is_passable_and_walls_are_not() {
        let env = DoorPassing::default();
        let s = env.state([(2, 2), (6, 0)], [(5, 2), (1, 2)]);
        let out = env.transition(&s, &[super::super::grid::RIGHT, 0]);
        assert_eq!(env.robots(&out.next_state)[0], (3, 2));
        let s = env.state([(2, 1), (6, 0)], [(5, 2), (1, 2)]);
        let out = env.transition(&s, &[super::super::grid::RIGHT, 0]);
        assert_eq!(env.robots(&out.next_state)[0], (2, 1));
    }

    #[test]
    fn initial_targets_allow_the_maximum() {
        let env = DoorPassing::default();
        let mut rng = seeded_rng(3, 0);
        for _ in 0..200 {
            let s = env.sample_initial(&mut rng);
            assert!(!s.terminal);
            let t = env.targets(&s);
            let at_goal = env.state(t, t);
            assert!((env.reward(&at_goal) - 1.0).abs() < 1e-12);
            assert!(env.robots(&s).iter().all(|&r| !env.is_wall(r)));
        }
    }

    proptest! {
        #[test]
        fn transitions_never_enter_walls(seed in 0u64..500, a in 0usize..5, b in 0usize..5, steps in 1usize..20) {
            let env = DoorPassing::default();
            let mut s = env.sample_initial(&mut seeded_rng(seed, 0));
            for _ in 0..steps {
                let out = env.transition(&s, &[a, b]);
                let r = env.robots(&out.next_state);
                prop_assert!(!env.is_wall(r[0]) && !env.is_wall(r[1]));
                prop_assert!(r[0] != r[1]);
                prop_assert!(out.reward > 0.0 && out.reward <= 1.0 + 1e-12);
                s = out.next_state;
            }
        }
    }
}
