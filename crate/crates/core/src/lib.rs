//! Q-value gated Monte-Carlo tree search for fully collaborative stochastic games.
//!
//! Each agent keeps an aggregated dataset of `(state, action, Q)` samples and a
//! Gaussian-mixture regression of `Q` given `(state, action)`. A depth-limited UCT
//! search run from every visited state only expands the actions whose predicted
//! value clears a fraction of the best predicted value (widened by the regression
//! variance), the executed search path is turned into new Q-learning samples, and
//! the mixture is refit on the growing dataset.
//!
//! Module map:
//!
//! - [`game`]: the stochastic-game contract, noisy joint steps and episodes.
//! - [`gmm`]: k-means, EM, BIC selection and mixture regression.
//! - [`qfunction`]: samples, aggregated datasets, Q targets and policies.
//! - [`search`]: the gated UCT search plus vanilla-UCT, random-UCT and TD-search.
//! - [`driver`]: the outer training loop and run metrics.
//! - [`envs`]: cooperative navigation, door passing and hand-over scenarios.

pub mod driver;
pub mod envs;
pub mod error;
pub mod game;
pub mod gmm;
pub mod qfunction;
pub mod search;

pub use error::{QcpError, Result};
pub use game::{Game, GameState, JointAction, StepOutcome};

/// Deterministic random source used throughout the crate.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Builds an independent random stream for `seed`.
///
/// Different `stream` values give statistically independent sequences, which
/// lets one run seed several consumers without them perturbing each other.
pub fn seeded_rng(seed: u64, stream: u64) -> SimRng {
    use rand::SeedableRng;
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
