//! Per-agent Q-function: aggregated samples, Q-learning targets, the mixture
//! regression approximator and the policies derived from it.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{QcpError, Result};
use crate::game::GameState;
use crate::gmm::{fit_em, select_k, FitOptions, MixtureModel, Prediction};

/// One experienced transition of agent `j` with its Q-learning target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub state: GameState,
    pub action_id: usize,
    pub q_target: f64,
    pub reward: f64,
    pub next_state: GameState,
}

impl Sample {
    /// Joint `(state features, action, Q)` vector used to fit the mixture.
    pub fn training_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.state.len() + 2);
        v.extend_from_slice(&self.state.features);
        v.push(encode_action(self.action_id));
        v.push(self.q_target);
        v
    }
}

/// Actions enter the joint density as a single real feature.
pub fn encode_action(action_id: usize) -> f64 {
    action_id as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IterationMark {
    pub iteration: usize,
    /// Index of the first sample of that iteration.
    pub start: usize,
}

/// Append-only union of the per-iteration datasets of one agent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AggregatedDataset {
    samples: Vec<Sample>,
    marks: Vec<IterationMark>,
}

impl AggregatedDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn iteration_marks(&self) -> &[IterationMark] {
        &self.marks
    }

    /// Appends the samples collected at `iteration`.
    pub fn aggregate(mut self, iteration: usize, new: impl IntoIterator<Item = Sample>) -> Self {
        self.extend(iteration, new);
        self
    }

    pub fn extend(&mut self, iteration: usize, new: impl IntoIterator<Item = Sample>) {
        let start = self.samples.len();
        self.samples.extend(new);
        if self.samples.len() > start {
            match self.marks.last() {
                Some(m) if m.iteration == iteration => {}
                _ => self.marks.push(IterationMark { iteration, start }),
            }
        }
    }

    /// Samples collected up to and including `iteration`.
    pub fn up_to(&self, iteration: usize) -> &[Sample] {
        let end = self
            .marks
            .iter()
            .find(|m| m.iteration > iteration)
            .map_or(self.samples.len(), |m| m.start);
        &self.samples[..end]
    }

    pub fn training_vectors(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(Sample::training_vector).collect()
    }

    /// Comma-separated dump, one sample per line:
    /// `iteration, state features.., terminal, action, q_target, reward, next features.., next_terminal`.
    pub fn to_text(&self) -> String {
        let width = self.samples.first().map_or(0, |s| s.state.len());
        let mut out = String::new();
        let _ = writeln!(out, "# qcp-dataset v1 features={width}");
        let mut mark = 0;
        let mut iteration = 0;
        for (i, s) in self.samples.iter().enumerate() {
            while mark < self.marks.len() && self.marks[mark].start <= i {
                iteration = self.marks[mark].iteration;
                mark += 1;
            }
            let mut fields = vec![iteration.to_string()];
            fields.extend(s.state.features.iter().map(f64::to_string));
            fields.push(u8::from(s.state.terminal).to_string());
            fields.push(s.action_id.to_string());
            fields.push(s.q_target.to_string());
            fields.push(s.reward.to_string());
            fields.extend(s.next_state.features.iter().map(f64::to_string));
            fields.push(u8::from(s.next_state.terminal).to_string());
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(QcpError::Parse {
            line: 1,
            message: "empty dataset".into(),
        })?;
        let width: usize = header
            .strip_prefix("# qcp-dataset v1 features=")
            .and_then(|w| w.trim().parse().ok())
            .ok_or(QcpError::Parse {
                line: 1,
                message: "expected `# qcp-dataset v1 features=<n>` header".into(),
            })?;
        let mut dataset = Self::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| QcpError::Parse {
                line: line_no,
                message,
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 2 * width + 6 {
                return Err(err(format!(
                    "expected {} fields, found {}",
                    2 * width + 6,
                    fields.len()
                )));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("bad number `{s}`: {e}")));
            let int = |s: &str| s.parse::<usize>().map_err(|e| err(format!("bad integer `{s}`: {e}")));
            let flag = |s: &str| match s {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(err(format!("bad terminal flag `{s}`"))),
            };
            let iteration = int(fields[0])?;
            let state = fields[1..=width].iter().map(|f| num(f)).collect::<Result<Vec<_>>>()?;
            let terminal = flag(fields[width + 1])?;
            let action_id = int(fields[width + 2])?;
            let q_target = num(fields[width + 3])?;
            let reward = num(fields[width + 4])?;
            let next = fields[width + 5..2 * width + 5]
                .iter()
                .map(|f| num(f))
                .collect::<Result<Vec<_>>>()?;
            let next_terminal = flag(fields[2 * width + 5])?;
            dataset.extend(
                iteration,
                [Sample {
                    state: GameState::new(state, terminal),
                    action_id,
                    q_target,
                    reward,
                    next_state: GameState::new(next, next_terminal),
                }],
            );
        }
        Ok(dataset)
    }
}

/// `Q-hat(s, a)`: zero with a broad prior variance until a mixture has been fitted.
#[derive(Debug, Clone, PartialEq)]
pub enum QApproximator {
    Empty { variance: f64 },
    Fitted(MixtureModel),
}

/// Prior variance reported by an unfitted approximator.
pub const DEFAULT_EMPTY_VARIANCE: f64 = 1.0;

impl Default for QApproximator {
    fn default() -> Self {
        Self::Empty {
            variance: DEFAULT_EMPTY_VARIANCE,
        }
    }
}

impl QApproximator {
    pub fn is_fitted(&self) -> bool {
        matches!(self, Self::Fitted(_))
    }

    pub fn predict(&self, features: &[f64], action: usize) -> Prediction {
        match self {
            Self::Empty { variance } => Prediction {
                mean: 0.0,
                variance: *variance,
            },
            Self::Fitted(model) => {
                let mut q = Vec::with_capacity(features.len() + 1);
                q.extend_from_slice(features);
                q.push(encode_action(action));
                model
                    .predict(&q)
                    .expect("state width matches the fitted model")
            }
        }
    }

    /// Predictions for actions `0..n_actions` at one state.
    pub fn predict_all(&self, features: &[f64], n_actions: usize) -> Vec<Prediction> {
        match self {
            Self::Empty { variance } => vec![
                Prediction {
                    mean: 0.0,
                    variance: *variance,
                };
                n_actions
            ],
            Self::Fitted(model) => {
                let actions: Vec<f64> = (0..n_actions).map(encode_action).collect();
                model
                    .predict_varying_last(features, &actions)
                    .expect("state width matches the fitted model")
            }
        }
    }

    pub fn max_value(&self, features: &[f64], n_actions: usize) -> f64 {
        self.predict_all(features, n_actions)
            .iter()
            .map(|p| p.mean)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Learning rate and discount of the Q-learning update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QLearning {
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for QLearning {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            gamma: 0.8,
        }
    }
}

impl QLearning {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(QcpError::InvalidConfig(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(QcpError::InvalidConfig(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        Ok(())
    }

    /// `Q(s,a) + alpha (r + gamma max_a' Q(s',a') - Q(s,a))`; the max term is zero for terminal `s'`.
    pub fn target(
        &self,
        qhat: &QApproximator,
        state: &GameState,
        action: usize,
        reward: f64,
        next: &GameState,
        next_actions: usize,
    ) -> f64 {
        let q = qhat.predict(&state.features, action).mean;
        let future = if next.terminal || next_actions == 0 {
            0.0
        } else {
            qhat.max_value(&next.features, next_actions)
        };
        q + self.alpha * (reward + self.gamma * future - q)
    }
}

/// How the approximator is refit from an aggregated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Fixed component count, used unless `bic_candidates` is set.
    pub components: usize,
    pub bic_candidates: Option<Vec<usize>>,
    pub test_fraction: f64,
    pub options: FitOptions,
    pub empty_variance: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            components: 5,
            bic_candidates: None,
            test_fraction: 0.25,
            options: FitOptions::default(),
            empty_variance: DEFAULT_EMPTY_VARIANCE,
        }
    }
}

impl FitConfig {
    /// Below this many samples the approximator stays empty: `3 K (G + 1)`.
    pub fn min_fit_samples(&self, dim: usize) -> usize {
        let k = self
            .bic_candidates
            .as_ref()
            .and_then(|c| c.iter().copied().max())
            .unwrap_or(self.components);
        3 * k * (dim + 1)
    }
}

/// Fits `Q-hat` on the whole aggregated dataset.
///
/// Fit failures are logged and yield the empty approximator, so learning never aborts.
pub fn refit<R: Rng + ?Sized>(dataset: &AggregatedDataset, config: &FitConfig, rng: &mut R) -> QApproximator {
    let empty = QApproximator::Empty {
        variance: config.empty_variance,
    };
    let Some(first) = dataset.samples().first() else {
        return empty;
    };
    let dim = first.state.len() + 2;
    if dataset.len() < config.min_fit_samples(dim) {
        return empty;
    }
    let data = dataset.training_vectors();
    let fitted = match &config.bic_candidates {
        Some(candidates) => {
            select_k(&data, candidates, config.test_fraction, &config.options, rng).map(|s| s.model)
        }
        None => fit_em(&data, config.components, &config.options, rng).map(|f| f.model),
    };
    match fitted {
        Ok(model) => QApproximator::Fitted(model),
        Err(e) => {
            log::warn!("refit on {} samples failed, keeping empty approximator: {e}", dataset.len());
            empty
        }
    }
}

/// Index of the largest value; exact ties are broken uniformly at random.
pub fn argmax_random_tie<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..values.len()).filter(|&i| values[i] == best).collect();
    match ties.len() {
        0 => 0,
        1 => ties[0],
        n => ties[rng.random_range(0..n)],
    }
}

/// `argmax_a Q-hat(s, a)` with random tie-breaking.
pub fn greedy_policy<R: Rng + ?Sized>(
    qhat: &QApproximator,
    state: &GameState,
    n_actions: usize,
    rng: &mut R,
) -> usize {
    let means: Vec<f64> = qhat
        .predict_all(&state.features, n_actions)
        .iter()
        .map(|p| p.mean)
        .collect();
    argmax_random_tie(&means, rng)
}

pub fn epsilon_greedy_policy<R: Rng + ?Sized>(
    qhat: &QApproximator,
    state: &GameState,
    n_actions: usize,
    epsilon: f64,
    rng: &mut R,
) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..n_actions)
    } else {
        greedy_policy(qhat, state, n_actions, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::Component;
    use crate::seeded_rng;

    fn state(v: &[f64]) -> GameState {
        GameState::new(v.to_vec(), false)
    }

    fn sample(x: f64, a: usize, q: f64) -> Sample {
        Sample {
            state: state(&[x]),
            action_id: a,
            q_target: q,
            reward: 0.5,
            next_state: state(&[x + 1.0]),
        }
    }

    /// Q-hat over (x, a) with Q | x, a linear: one component, Q = 0.5 x + 0.25 a in mean.
    fn linear_model() -> QApproximator {
        // cov of (x, a, Q): x, a independent unit; Q = .5x + .25a + noise(.1)
        let cov = vec![
            1.0, 0.0, 0.5, //
            0.0, 1.0, 0.25, //
            0.5, 0.25, 0.25 + 0.0625 + 0.1,
        ];
        QApproximator::Fitted(
            MixtureModel::new(vec![Component {
                prior: 1.0,
                mean: vec![0.0, 0.0, 0.0],
                covariance: cov,
            }])
            .unwrap(),
        )
    }

    #[test]
    fn cold_start_target_is_alpha_times_reward() {
        let ql = QLearning::default();
        let empty = QApproximator::default();
        let t = ql.target(&empty, &state(&[0.0]), 0, 1.0, &state(&[1.0]), 3);
        assert_eq!(t.to_bits(), 0.2f64.to_bits());
        let terminal = GameState::new(vec![1.0], true);
        let t = ql.target(&empty, &state(&[0.0]), 0, 0.7, &terminal, 3);
        assert_eq!(t.to_bits(), (0.2 * 0.7f64).to_bits());
    }

    #[test]
    fn constant_q_closed_form() {
        // single component with no correlation predicts the output mean everywhere
        let c = 3.0;
        let qhat = QApproximator::Fitted(
            MixtureModel::new(vec![Component {
                prior: 1.0,
                mean: vec![0.0, 0.0, c],
                covariance: vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            }])
            .unwrap(),
        );
        let ql = QLearning::default();
        let t = ql.target(&qhat, &state(&[1.0]), 1, 0.0, &state(&[2.0]), 4);
        assert!((t - c * (1.0 - 0.2 * (1.0 - 0.8))).abs() < 1e-12);
    }

    #[test]
    fn fitted_target_matches_hand_evaluation() {
        let qhat = linear_model();
        let ql = QLearning::default();
        // Q(1, 2) = .5 + .5 = 1.0; max_a' Q(3, a') over a' in 0..3 = 1.5 + .5 = 2.0
        let t = ql.target(&qhat, &state(&[1.0]), 2, 0.3, &state(&[3.0]), 3);
        let expected = 1.0 + 0.2 * (0.3 + 0.8 * 2.0 - 1.0);
        assert!((t - expected).abs() < 1e-12, "{t} vs {expected}");
    }

    #[test]
    fn aggregation_is_append_only() {
        let d = AggregatedDataset::new().aggregate(1, vec![]);
        assert!(d.is_empty());
        assert!(d.iteration_marks().is_empty());
        let d = d.aggregate(1, vec![sample(0.0, 0, 1.0), sample(1.0, 1, 2.0)]);
        let before = d.clone();
        let d = d.aggregate(2, vec![]);
        assert_eq!(d, before);
        let d = d.aggregate(2, vec![sample(2.0, 2, 3.0)]);
        assert_eq!(d.len(), 3);
        assert_eq!(&d.samples()[..2], before.samples());
        assert_eq!(d.up_to(1).len(), 2);
        assert_eq!(d.up_to(2).len(), 3);
        assert_eq!(
            d.iteration_marks(),
            &[
                IterationMark { iteration: 1, start: 0 },
                IterationMark { iteration: 2, start: 2 }
            ]
        );
    }

    #[test]
    fn dataset_text_round_trip() {
        let d = AggregatedDataset::new()
            .aggregate(1, vec![sample(0.1, 0, 1.0 / 3.0), sample(-1.5, 1, 2.0)])
            .aggregate(3, vec![sample(2.25, 2, -0.0001)]);
        let text = d.to_text();
        let back = AggregatedDataset::from_text(&text).unwrap();
        assert_eq!(back, d);
        assert!(AggregatedDataset::from_text("# qcp-dataset v1 features=1\n1,2,3\n").is_err());
    }

    #[test]
    fn refit_below_threshold_stays_empty() {
        let d = AggregatedDataset::new().aggregate(1, (0..10).map(|i| sample(i as f64, 0, 1.0)));
        let q = refit(&d, &FitConfig::default(), &mut seeded_rng(0, 0));
        assert!(!q.is_fitted());
        assert_eq!(q.predict(&[3.0], 1).mean, 0.0);
    }

    #[test]
    fn refit_identical_samples() {
        let cfg = FitConfig::default();
        let n = cfg.min_fit_samples(3);
        let d = AggregatedDataset::new().aggregate(1, (0..n).map(|_| sample(1.0, 2, 5.0)));
        let q = refit(&d, &cfg, &mut seeded_rng(0, 0));
        assert!(q.is_fitted());
        assert!((q.predict(&[1.0], 2).mean - 5.0).abs() < 1e-3);
    }

    #[test]
    fn refit_is_deterministic() {
        let cfg = FitConfig {
            components: 2,
            ..FitConfig::default()
        };
        let d = AggregatedDataset::new().aggregate(
            1,
            (0..60).map(|i| sample((i % 7) as f64, i % 3, ((i * 13) % 11) as f64 / 11.0)),
        );
        let a = refit(&d, &cfg, &mut seeded_rng(4, 0));
        let b = refit(&d, &cfg, &mut seeded_rng(4, 0));
        assert!(a.is_fitted());
        assert_eq!(a, b);
    }

    #[test]
    fn greedy_picks_the_forced_argmax() {
        let mut rng = seeded_rng(0, 0);
        assert_eq!(argmax_random_tie(&[0.1, 0.9, 0.3], &mut rng), 1);
        let q = linear_model();
        // slope in a is positive: the last action is best
        assert_eq!(greedy_policy(&q, &state(&[0.0]), 4, &mut rng), 3);
    }

    #[test]
    fn greedy_on_empty_is_uniform() {
        let mut rng = seeded_rng(1, 0);
        let empty = QApproximator::default();
        let mut counts = [0usize; 4];
        for _ in 0..4000 {
            counts[greedy_policy(&empty, &state(&[0.0]), 4, &mut rng)] += 1;
        }
        assert!(counts.iter().all(|&c| (850..1150).contains(&c)), "{counts:?}");
    }

    #[test]
    fn epsilon_zero_is_greedy() {
        let q = linear_model();
        for seed in 0..20 {
            let mut a = seeded_rng(seed, 0);
            let mut b = seeded_rng(seed, 0);
            assert_eq!(
                epsilon_greedy_policy(&q, &state(&[0.3]), 5, 0.0, &mut a),
                greedy_policy(&q, &state(&[0.3]), 5, &mut b)
            );
        }
    }
}
