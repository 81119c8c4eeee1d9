//! Two mobile manipulators bring their bases to a fixed distance and their end-effectors together.
//!
//! The state only holds relative quantities: base offset `b1 - b0` (2D) and
//! end-effector offset `e1 - e0` (3D). The arm part `e1 - e0 - (b1 - b0, 0)` is
//! clamped to twice the per-arm reach box. Robot 1 faces robot 0, so its
//! forward and left directions are mirrored.

use rand::{Rng, RngCore};

use crate::game::{uniform_tolerance, Game, GameState, StepOutcome};

pub const ACTION_NAMES: [&str; 10] = [
    "arm-up",
    "arm-down",
    "arm-forward",
    "arm-backward",
    "arm-right",
    "arm-left",
    "base-forward",
    "base-backward",
    "base-left",
    "base-right",
];

#[derive(Debug, Clone, PartialEq)]
pub struct HandoverConfig {
    pub base_step: f64,
    pub arm_step: f64,
    /// Half-width of each arm's reach box around its base.
    pub reach: f64,
    /// Bound on each component of the base offset.
    pub base_bound: f64,
    pub desired_distance: f64,
    pub terminal_tolerance: f64,
    /// Initial base separation along x is drawn from this range.
    pub initial_distance: (f64, f64),
    /// Initial lateral base offset and per-axis arm offset bound.
    pub initial_lateral: f64,
    pub initial_arm: f64,
    pub xi: f64,
}

impl Default for HandoverConfig {
    fn default() -> Self {
        Self {
            base_step: 0.1,
            arm_step: 0.05,
            reach: 0.5,
            base_bound: 3.0,
            desired_distance: 1.0,
            terminal_tolerance: 0.05,
            initial_distance: (0.5, 2.0),
            initial_lateral: 0.5,
            initial_arm: 0.5,
            xi: 0.025,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandoverGeometry {
    pub base: [f64; 2],
    pub arm: [f64; 3],
}

impl HandoverGeometry {
    pub fn end_effector(&self) -> [f64; 3] {
        [
            self.base[0] + self.arm[0],
            self.base[1] + self.arm[1],
            self.arm[2],
        ]
    }
}

#[derive(Debug, Clone)]
pub struct Handover {
    config: HandoverConfig,
    tolerance: Vec<f64>,
}

impl Default for Handover {
    fn default() -> Self {
        Self::new(HandoverConfig::default())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn snap(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

impl Handover {
    pub fn new(config: HandoverConfig) -> Self {
        let tolerance = uniform_tolerance(5, config.xi);
        Self { config, tolerance }
    }

    pub fn config(&self) -> &HandoverConfig {
        &self.config
    }

    pub fn geometry(&self, state: &GameState) -> HandoverGeometry {
        let f = &state.features;
        HandoverGeometry {
            base: [f[0], f[1]],
            arm: [f[2] - f[0], f[3] - f[1], f[4]],
        }
    }

    pub fn state(&self, geometry: HandoverGeometry) -> GameState {
        let ee = geometry.end_effector();
        let features: Vec<f64> = [geometry.base[0], geometry.base[1], ee[0], ee[1], ee[2]]
            .into_iter()
            .map(snap)
            .collect();
        let terminal = self.goal_reached(&features);
        GameState::new(features, terminal)
    }

    fn goal_reached(&self, f: &[f64]) -> bool {
        let tol = self.config.terminal_tolerance;
        (norm(&f[0..2]) - self.config.desired_distance).abs() < tol && norm(&f[2..5]) < tol
    }

    pub fn reward(&self, state: &GameState) -> f64 {
        let f = &state.features;
        0.5 / (1.0 + (norm(&f[0..2]) - self.config.desired_distance).abs())
            + 0.5 / (1.0 + norm(&f[2..5]))
    }

    /// World-frame (base, arm) displacement of `agent` under `action`.
    fn displacement(&self, agent: usize, action: usize) -> ([f64; 2], [f64; 3]) {
        let sign = if agent == 0 { 1.0 } else { -1.0 };
        let fwd = [sign, 0.0];
        let left = [0.0, sign];
        let a = self.config.arm_step;
        let b = self.config.base_step;
        match action {
            0 => ([0.0; 2], [0.0, 0.0, a]),
            1 => ([0.0; 2], [0.0, 0.0, -a]),
            2 => ([0.0; 2], [a * fwd[0], a * fwd[1], 0.0]),
            3 => ([0.0; 2], [-a * fwd[0], -a * fwd[1], 0.0]),
            4 => ([0.0; 2], [-a * left[0], -a * left[1], 0.0]),
            5 => ([0.0; 2], [a * left[0], a * left[1], 0.0]),
            6 => ([b * fwd[0], b * fwd[1]], [0.0; 3]),
            7 => ([-b * fwd[0], -b * fwd[1]], [0.0; 3]),
            8 => ([b * left[0], b * left[1]], [0.0; 3]),
            9 => ([-b * left[0], -b * left[1]], [0.0; 3]),
            _ => ([0.0; 2], [0.0; 3]),
        }
    }

    fn lattice(&self, lo: f64, hi: f64, pitch: f64, rng: &mut dyn RngCore) -> f64 {
        let a = (lo / pitch).round() as i64;
        let b = (hi / pitch).round() as i64;
        rng.random_range(a..=b) as f64 * pitch
    }
}

impl Game for Handover {
    fn name(&self) -> &str {
        "handover"
    }

    fn n_agents(&self) -> usize {
        2
    }

    fn action_count(&self, _agent: usize) -> usize {
        ACTION_NAMES.len()
    }

    fn feature_len(&self) -> usize {
        5
    }

    fn tolerance(&self) -> &[f64] {
        &self.tolerance
    }

    fn sample_initial(&self, rng: &mut dyn RngCore) -> GameState {
        let cfg = &self.config;
        loop {
            let (lo, hi) = cfg.initial_distance;
            let base = [
                self.lattice(lo, hi, cfg.base_step, rng),
                self.lattice(-cfg.initial_lateral, cfg.initial_lateral, cfg.base_step, rng),
            ];
            let mut arm = [0.0; 3];
            for v in &mut arm {
                *v = self.lattice(-cfg.initial_arm, cfg.initial_arm, cfg.arm_step, rng);
            }
            let s = self.state(HandoverGeometry { base, arm });
            if !s.terminal {
                return s;
            }
        }
    }

    fn transition(&self, state: &GameState, actions: &[usize]) -> StepOutcome {
        let mut g = self.geometry(state);
        let (b0, a0) = self.displacement(0, actions[0]);
        let (b1, a1) = self.displacement(1, actions[1]);
        let bound = self.config.base_bound;
        let arm_bound = 2.0 * self.config.reach;
        for d in 0..2 {
            g.base[d] = (g.base[d] + b1[d] - b0[d]).clamp(-bound, bound);
        }
        for d in 0..3 {
            g.arm[d] = (g.arm[d] + a1[d] - a0[d]).clamp(-arm_bound, arm_bound);
        }
        let next = self.state(g);
        let reward = self.reward(&next);
        StepOutcome {
            next_state: next,
            reward,
        }
    }

    fn render(&self, state: &GameState) -> Option<String> {
        let f = &state.features;
        Some(format!(
            "base ({:+.2}, {:+.2}) |{:.3}|  ee ({:+.2}, {:+.2}, {:+.2}) |{:.3}|\n",
            f[0],
            f[1],
            norm(&f[0..2]),
            f[2],
            f[3],
            f[4],
            norm(&f[2..5])
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use proptest::prelude::*;

    fn geom(base: [f64; 2], arm: [f64; 3]) -> HandoverGeometry {
        HandoverGeometry { base, arm }
    }

    #[test]
    fn goal_gives_full_reward() {
        let env = Handover::default();
        let s = env.state(geom([1.0, 0.0], [-1.0, 0.0, 0.0]));
        assert!(s.terminal);
        assert_eq!(env.reward(&s), 1.0);
    }

    #[test]
    fn formula_instance() {
        let env = Handover::default();
        // bases 2 m apart, end-effectors 1 m apart
        let s = env.state(geom([2.0, 0.0], [-1.0, 0.0, 0.0]));
        assert!(!s.terminal);
        assert!((env.reward(&s) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mirrored_frames() {
        let env = Handover::default();
        let s = env.state(geom([1.5, 0.0], [0.0, 0.0, 0.0]));
        // both robots drive forward: the gap closes by two base steps
        let out = env.transition(&s, &[6, 6]);
        assert!((out.next_state.features[0] - 1.3).abs() < 1e-12);
        // both reach left: robot 0 towards +y, robot 1 towards -y
        let out = env.transition(&s, &[5, 5]);
        assert!((env.geometry(&out.next_state).arm[1] + 0.1).abs() < 1e-12);
        // base motion carries the end-effector
        let out = env.transition(&s, &[8, 0]);
        let g = env.geometry(&out.next_state);
        assert!((g.base[1] + 0.1).abs() < 1e-12);
        assert!((out.next_state.features[3] + 0.1).abs() < 1e-12);
    }

    #[test]
    fn arm_is_clamped_at_reach() {
        let env = Handover::default();
        let s = env.state(geom([2.0, 0.0], [0.0, 0.0, -1.0]));
        let out = env.transition(&s, &[0, 1]);
        let g = env.geometry(&out.next_state);
        assert!((g.arm[2] + 1.0).abs() < 1e-12);
        let out = env.transition(&s, &[1, 0]);
        assert!((env.geometry(&out.next_state).arm[2] + 0.9).abs() < 1e-12);
    }

    #[test]
    fn initial_states_sit_on_the_comparison_lattice() {
        let env = Handover::default();
        let mut rng = seeded_rng(4, 0);
        for _ in 0..200 {
            let s = env.sample_initial(&mut rng);
            assert!(!s.terminal);
            for f in &s.features {
                let k = f / (2.0 * env.config.xi);
                assert!((k - k.round()).abs() < 1e-6);
            }
        }
    }

    proptest! {
        #[test]
        fn states_stay_in_bounds(seed in 0u64..300, actions in proptest::collection::vec((0usize..10, 0usize..10), 1..40)) {
            let env = Handover::default();
            let mut s = env.sample_initial(&mut seeded_rng(seed, 0));
            for (a, b) in actions {
                let out = env.transition(&s, &[a, b]);
                let g = env.geometry(&out.next_state);
                prop_assert!(g.base.iter().all(|v| v.abs() <= 3.0 + 1e-9));
                prop_assert!(g.arm.iter().all(|v| v.abs() <= 1.0 + 1e-9));
                prop_assert!(out.reward > 0.0 && out.reward <= 1.0);
                s = out.next_state;
            }
        }
    }
}
