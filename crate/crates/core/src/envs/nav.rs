//! Cooperative navigation: robots on a small grid each walk to their own target cell.
//!
//! State: `(r_x, r_y, t_x, t_y)` per robot. Reward: `1 / (1 + sum of Manhattan
//! distances to targets)`. Terminal once every robot stands on its target.

use rand::{Rng, RngCore};

use super::grid::{cell_at, manhattan, resolve_moves, Cell, ACTION_NAMES};
use crate::game::{uniform_tolerance, Game, GameState, StepOutcome};

#[derive(Debug, Clone, PartialEq)]
pub struct NavConfig {
    pub width: i32,
    pub height: i32,
    pub robots: usize,
    pub xi: f64,
}

impl Default for NavConfig {
    fn default() -> Self {
        Self {
            width: 4,
            height: 4,
            robots: 3,
            xi: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CooperativeNavigation {
    config: NavConfig,
    tolerance: Vec<f64>,
}

impl CooperativeNavigation {
    pub fn new(config: NavConfig) -> Self {
        let tolerance = uniform_tolerance(4 * config.robots, config.xi);
        Self { config, tolerance }
    }

    pub fn config(&self) -> &NavConfig {
        &self.config
    }

    fn inside(&self, c: Cell) -> bool {
        c.0 >= 0 && c.1 >= 0 && c.0 < self.config.width && c.1 < self.config.height
    }

    pub fn robots(&self, state: &GameState) -> Vec<Cell> {
        (0..self.config.robots).map(|j| cell_at(&state.features, 4 * j)).collect()
    }

    pub fn targets(&self, state: &GameState) -> Vec<Cell> {
        (0..self.config.robots).map(|j| cell_at(&state.features, 4 * j + 2)).collect()
    }

    /// Builds a state from robot and target cells.
    pub fn state(&self, robots: &[Cell], targets: &[Cell]) -> GameState {
        let mut features = Vec::with_capacity(4 * robots.len());
        for (r, t) in robots.iter().zip(targets) {
            features.extend([r.0 as f64, r.1 as f64, t.0 as f64, t.1 as f64]);
        }
        let terminal = robots == targets;
        GameState::new(features, terminal)
    }

    pub fn reward(&self, state: &GameState) -> f64 {
        let total: i32 = self
            .robots(state)
            .into_iter()
            .zip(self.targets(state))
            .map(|(r, t)| manhattan(r, t))
            .sum();
        1.0 / (1.0 + total as f64)
    }

    fn random_cells(&self, n: usize, rng: &mut dyn RngCore) -> Vec<Cell> {
        let mut cells: Vec<Cell> = Vec::with_capacity(n);
        while cells.len() < n {
            let c = (
                rng.random_range(0..self.config.width),
                rng.random_range(0..self.config.height),
            );
            if !cells.contains(&c) {
                cells.push(c);
            }
        }
        cells
    }
}

impl Default for CooperativeNavigation {
    fn default() -> Self {
        Self::new(NavConfig::default())
    }
}

impl Game for CooperativeNavigation {
    fn name(&self) -> &str {
        "nav"
    }

    fn n_agents(&self) -> usize {
        self.config.robots
    }

    fn action_count(&self, _agent: usize) -> usize {
        ACTION_NAMES.len()
    }

    fn feature_len(&self) -> usize {
        4 * self.config.robots
    }

    fn tolerance(&self) -> &[f64] {
        &self.tolerance
    }

    fn sample_initial(&self, rng: &mut dyn RngCore) -> GameState {
        loop {
            let robots = self.random_cells(self.config.robots, rng);
            let targets = self.random_cells(self.config.robots, rng);
            if robots != targets {
                return self.state(&robots, &targets);
            }
        }
    }

    fn transition(&self, state: &GameState, actions: &[usize]) -> StepOutcome {
        let robots = resolve_moves(&self.robots(state), actions, |c| !self.inside(c));
        let next = self.state(&robots, &self.targets(state));
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
