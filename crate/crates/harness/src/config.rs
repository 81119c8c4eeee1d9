//! Experiment configuration as flat `dotted.key = value` lines.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! rejected. Keys not given take the scenario's defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use qcp_core::driver::TrainConfig;
use qcp_core::envs::{DoorConfig, HandoverConfig, NavConfig, Scenario, ScenarioKind};
use qcp_core::search::{Algorithm, DeltaMode};

use crate::error::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    /// Algorithm and seed are overwritten per run.
    pub train: TrainConfig,
    pub output: PathBuf,
}

/// Iteration counts used for each scenario unless overridden.
pub fn default_iterations(kind: ScenarioKind) -> usize {
    match kind {
        ScenarioKind::Nav => 49,
        ScenarioKind::Door => 29,
        ScenarioKind::Handover => 5,
    }
}

impl ExperimentConfig {
    pub fn with_defaults(kind: ScenarioKind) -> Self {
        let mut train = TrainConfig {
            iterations: default_iterations(kind),
            ..TrainConfig::default()
        };
        train.fit.components = kind.default_components();
        Self {
            scenario: Scenario::with_defaults(kind),
            algorithms: Algorithm::ALL.to_vec(),
            seeds: (0..10).collect(),
            train,
            output: PathBuf::from(format!("results/{}", kind.name())),
        }
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(HarnessError::config(line_no, format!("expected `key = value`, got `{line}`")));
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(HarnessError::config(line_no, "empty key"));
            }
            if let Some((first, _)) = entries.get(&key) {
                return Err(HarnessError::config(line_no, format!("`{key}` already set on line {first}")));
            }
            entries.insert(key, (line_no, value.trim().to_string()));
        }

        let kind = match entries.remove("scenario.name") {
            Some((line, v)) => v.parse::<ScenarioKind>().map_err(|e| HarnessError::config(line, e.to_string()))?,
            None => return Err(HarnessError::config(0, "missing required key `scenario.name`")),
        };
        let mut config = Self::with_defaults(kind);
        for (key, (line, value)) in entries {
            config
                .apply(&key, &value)
                .map_err(|msg| HarnessError::config(line, format!("`{key}`: {msg}")))?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.algorithms.is_empty() {
            return Err(HarnessError::config(0, "at least one algorithm is required"));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::config(0, "at least one seed is required"));
        }
        let mut seen = self.algorithms.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.algorithms.len() {
            return Err(HarnessError::config(0, "duplicate algorithm"));
        }
        self.train
            .validate()
            .map_err(|e| HarnessError::config(0, e.to_string()))
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        let t = &mut self.train;
        let s = &mut t.search;
        let f = &mut t.fit;
        match key {
            "experiment.algorithms" => {
                self.algorithms = list(value)?;
            }
            "experiment.seeds" => self.seeds = seeds(value)?,
            "experiment.output" => self.output = PathBuf::from(value),
            "output.wall_clock" => t.wall_clock = num(value)?,
            "train.iterations" => t.iterations = num(value)?,
            "train.timesteps" => t.timesteps = num(value)?,
            "train.lambda0" => t.lambda0 = num(value)?,
            "train.lambda_ramp" => t.lambda_ramp = num(value)?,
            "train.lambda_max" => t.lambda_max = num(value)?,
            "learning.alpha" => t.learning.alpha = num(value)?,
            "learning.gamma" => t.learning.gamma = num(value)?,
            "search.H" => s.horizon = num(value)?,
            "search.M" => s.rollouts = num(value)?,
            "search.C" => s.exploration = num(value)?,
            "search.epsilon_admit" => s.admit_epsilon = num(value)?,
            "search.epsilon_rollout" => s.rollout_epsilon = num(value)?,
            "search.epsilon_td" => s.td_epsilon = num(value)?,
            "search.rollout_cap" => s.rollout_cap = num(value)?,
            "search.budget" => s.budget = num(value)?,
            "search.delta" => s.delta = num::<DeltaMode>(value)?,
            "search.noise" => s.noise = num(value)?,
            "search.count_rollout_states" => s.count_rollout_states = num(value)?,
            "gmm.K" => f.components = num(value)?,
            "gmm.bic_candidates" => {
                f.bic_candidates = if value == "none" { None } else { Some(list(value)?) };
            }
            "gmm.test_fraction" => f.test_fraction = num(value)?,
            "gmm.reg" => f.options.reg_relative = num(value)?,
            "gmm.tol" => f.options.tol = num(value)?,
            "gmm.max_iter" => f.options.max_iter = num(value)?,
            "gmm.kmeans_restarts" => f.options.kmeans.restarts = num(value)?,
            "gmm.kmeans_max_iter" => f.options.kmeans.max_iter = num(value)?,
            "gmm.empty_variance" => f.empty_variance = num(value)?,
            _ => match key.strip_prefix("env.") {
                Some(field) => apply_env(&mut self.scenario, field, value)?,
                None => return Err("unknown key".into()),
            },
        }
        Ok(())
    }

    /// Canonical text form; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let s = &t.search;
        let f = &t.fit;
        let join = |v: Vec<String>| v.join(", ");
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("scenario.name", self.scenario.kind().name().to_string());
        kv("experiment.algorithms", join(self.algorithms.iter().map(|a| a.to_string()).collect()));
        kv("experiment.seeds", join(self.seeds.iter().map(|s| s.to_string()).collect()));
        kv("experiment.output", self.output.display().to_string());
        kv("output.wall_clock", t.wall_clock.to_string());
        kv("train.iterations", t.iterations.to_string());
        kv("train.timesteps", t.timesteps.to_string());
        kv("train.lambda0", t.lambda0.to_string());
        kv("train.lambda_ramp", t.lambda_ramp.to_string());
        kv("train.lambda_max", t.lambda_max.to_string());
        kv("learning.alpha", t.learning.alpha.to_string());
        kv("learning.gamma", t.learning.gamma.to_string());
        kv("search.H", s.horizon.to_string());
        kv("search.M", s.rollouts.to_string());
        kv("search.C", s.exploration.to_string());
        kv("search.epsilon_admit", s.admit_epsilon.to_string());
        kv("search.epsilon_rollout", s.rollout_epsilon.to_string());
        kv("search.epsilon_td", s.td_epsilon.to_string());
        kv("search.rollout_cap", s.rollout_cap.to_string());
        kv("search.budget", s.budget.to_string());
        kv("search.delta", s.delta.to_string());
        kv("search.noise", s.noise.to_string());
        kv("search.count_rollout_states", s.count_rollout_states.to_string());
        kv("gmm.K", f.components.to_string());
        kv(
            "gmm.bic_candidates",
            match &f.bic_candidates {
                Some(c) => join(c.iter().map(|k| k.to_string()).collect()),
                None => "none".into(),
            },
        );
        kv("gmm.test_fraction", f.test_fraction.to_string());
        kv("gmm.reg", f.options.reg_relative.to_string());
        kv("gmm.tol", f.options.tol.to_string());
        kv("gmm.max_iter", f.options.max_iter.to_string());
        kv("gmm.kmeans_restarts", f.options.kmeans.restarts.to_string());
        kv("gmm.kmeans_max_iter", f.options.kmeans.max_iter.to_string());
        kv("gmm.empty_variance", f.empty_variance.to_string());
        for (k, v) in env_entries(&self.scenario) {
            kv(&format!("env.{k}"), v);
        }
        out
    }
}

fn num<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("cannot parse `{value}`: {e}"))
}

fn list<T: FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(num)
        .collect()
}

/// Comma-separated seeds; `a..b` expands to the half-open range.
fn seeds(value: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (num(a.trim())?, num(b.trim())?);
                if a >= b {
                    return Err(format!("empty seed range `{part}`"));
                }
                out.extend(a..b);
            }
            None => out.push(num(part)?),
        }
    }
    Ok(out)
}

fn apply_env(scenario: &mut Scenario, field: &str, value: &str) -> Result<(), String> {
    match scenario {
        Scenario::Nav(c) => match field {
            "width" => c.width = num(value)?,
            "height" => c.height = num(value)?,
            "robots" => c.robots = num(value)?,
            "xi" => c.xi = num(value)?,
            _ => return Err("unknown key for nav".into()),
        },
        Scenario::Door(c) => match field {
            "width" => c.width = num(value)?,
            "height" => c.height = num(value)?,
            "wall_x" => c.wall_x = num(value)?,
            "door_y" => c.door_y = num(value)?,
            "weights" => {
                let w: Vec<f64> = list(value)?;
                c.weights = w.try_into().map_err(|_| "expected three weights".to_string())?;
            }
            "clearance_saturation" => c.clearance_saturation = num(value)?,
            "separation_saturation" => c.separation_saturation = num(value)?,
            "xi" => c.xi = num(value)?,
            _ => return Err("unknown key for door".into()),
        },
        Scenario::Handover(c) => match field {
            "base_step" => c.base_step = num(value)?,
            "arm_step" => c.arm_step = num(value)?,
            "reach" => c.reach = num(value)?,
            "base_bound" => c.base_bound = num(value)?,
            "desired_distance" => c.desired_distance = num(value)?,
            "terminal_tolerance" => c.terminal_tolerance = num(value)?,
            "initial_distance" => {
                let v: Vec<f64> = list(value)?;
                let [lo, hi]: [f64; 2] = v.try_into().map_err(|_| "expected `low, high`".to_string())?;
                c.initial_distance = (lo, hi);
            }
            "initial_lateral" => c.initial_lateral = num(value)?,
            "initial_arm" => c.initial_arm = num(value)?,
            "xi" => c.xi = num(value)?,
            _ => return Err("unknown key for handover".into()),
        },
    }
    validate_env(scenario)
}

fn validate_env(scenario: &Scenario) -> Result<(), String> {
    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(format!("{name} must be positive"))
        }
    };
    match scenario {
        Scenario::Nav(NavConfig { width, height, robots, xi }) => {
            positive("xi", *xi)?;
            if *width < 1 || *height < 1 || *robots < 1 || (*width * *height) < *robots as i32 + 1 {
                return Err("grid too small for the robots".into());
            }
        }
        Scenario::Door(DoorConfig { width, height, wall_x, door_y, xi, .. }) => {
            positive("xi", *xi)?;
            if !(0 < *wall_x && *wall_x < *width - 1 && 0 <= *door_y && *door_y < *height) {
                return Err("wall and door must lie inside the grid".into());
            }
        }
        Scenario::Handover(HandoverConfig { base_step, arm_step, reach, base_bound, xi, .. }) => {
            for (n, v) in [("base_step", *base_step), ("arm_step", *arm_step), ("reach", *reach), ("base_bound", *base_bound), ("xi", *xi)] {
                positive(n, v)?;
            }
        }
    }
    Ok(())
}

fn env_entries(scenario: &Scenario) -> Vec<(&'static str, String)> {
    match scenario {
        Scenario::Nav(c) => vec![
            ("width", c.width.to_string()),
            ("height", c.height.to_string()),
            ("robots", c.robots.to_string()),
            ("xi", c.xi.to_string()),
        ],
        Scenario::Door(c) => vec![
            ("width", c.width.to_string()),
            ("height", c.height.to_string()),
            ("wall_x", c.wall_x.to_string()),
            ("door_y", c.door_y.to_string()),
            (
                "weights",
                c.weights.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(", "),
            ),
            ("clearance_saturation", c.clearance_saturation.to_string()),
            ("separation_saturation", c.separation_saturation.to_string()),
            ("xi", c.xi.to_string()),
        ],
        Scenario::Handover(c) => vec![
            ("base_step", c.base_step.to_string()),
            ("arm_step", c.arm_step.to_string()),
            ("reach", c.reach.to_string()),
            ("base_bound", c.base_bound.to_string()),
            ("desired_distance", c.desired_distance.to_string()),
            ("terminal_tolerance", c.terminal_tolerance.to_string()),
            ("initial_distance", format!("{}, {}", c.initial_distance.0, c.initial_distance.1)),
            ("initial_lateral", c.initial_lateral.to_string()),
            ("initial_arm", c.initial_arm.to_string()),
            ("xi", c.xi.to_string()),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_scenario_defaults() {
        let c = ExperimentConfig::parse("scenario.name = door\n").unwrap();
        assert_eq!(c.train.iterations, 29);
        assert_eq!(c.train.fit.components, 6);
        assert_eq!(c.algorithms.len(), 4);
        assert_eq!(c.seeds, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn overrides_and_comments() {
        let text = "# comment\nscenario.name = nav\n\nsearch.H = 3\nexperiment.seeds = 0..3, 7\nexperiment.algorithms = qcp, td\nenv.width = 5\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.train.search.horizon, 3);
        assert_eq!(c.seeds, vec![0, 1, 2, 7]);
        assert_eq!(c.algorithms, vec![Algorithm::Qcp, Algorithm::TdSearch]);
        assert!(matches!(c.scenario, Scenario::Nav(NavConfig { width: 5, .. })));
    }

    #[test]
    fn errors_name_the_line() {
        let cases = [
            ("scenario.name = nav\nsearch.H = four\n", 2),
            ("scenario.name = nav\nbogus.key = 1\n", 2),
            ("scenario.name = nav\nnot a pair\n", 2),
            ("scenario.name = maze\n", 1),
            ("scenario.name = nav\nsearch.H = 2\nsearch.H = 3\n", 3),
            ("scenario.name = nav\nenv.wall_x = 3\n", 2),
        ];
        for (text, line) in cases {
            match ExperimentConfig::parse(text) {
                Err(HarnessError::Config { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("expected config error for {text:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn semantic_errors_are_reported() {
        for text in [
            "search.H = 2\n",
            "scenario.name = nav\nexperiment.algorithms = \n",
            "scenario.name = nav\nsearch.H = 0\n",
            "scenario.name = nav\ntrain.lambda0 = 1.5\n",
        ] {
            assert!(ExperimentConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn text_round_trip_for_every_scenario() {
        for kind in ScenarioKind::ALL {
            let mut c = ExperimentConfig::with_defaults(kind);
            c.train.fit.bic_candidates = Some(vec![2, 3, 4]);
            c.train.search.lambda = 0.5;
            let text = c.to_text();
            let parsed = ExperimentConfig::parse(&text).unwrap();
            assert_eq!(parsed, c);
            assert_eq!(parsed.to_text(), text);
        }
    }
}
