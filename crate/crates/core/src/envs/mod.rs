//! Benchmark scenarios.

pub mod door;
pub mod grid;
pub mod handover;
pub mod nav;

use std::fmt;
use std::str::FromStr;

use crate::error::QcpError;
use crate::game::Game;

pub use door::{DoorConfig, DoorPassing};
pub use handover::{Handover, HandoverConfig};
pub use nav::{CooperativeNavigation, NavConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    Nav,
    Door,
    Handover,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [Self::Nav, Self::Door, Self::Handover];

    pub fn name(self) -> &'static str {
        match self {
            Self::Nav => "nav",
            Self::Door => "door",
            Self::Handover => "handover",
        }
    }

    /// Mixture size used for the Q approximator by default.
    pub fn default_components(self) -> usize {
        match self {
            Self::Door => 6,
            _ => 5,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = QcpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| QcpError::InvalidConfig(format!("unknown scenario `{s}`")))
    }
}

/// A scenario together with its environment parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Nav(NavConfig),
    Door(DoorConfig),
    Handover(HandoverConfig),
}

impl Scenario {
    pub fn with_defaults(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::Nav => Self::Nav(NavConfig::default()),
            ScenarioKind::Door => Self::Door(DoorConfig::default()),
            ScenarioKind::Handover => Self::Handover(HandoverConfig::default()),
        }
    }

    pub fn kind(&self) -> ScenarioKind {
        match self {
            Self::Nav(_) => ScenarioKind::Nav,
            Self::Door(_) => ScenarioKind::Door,
            Self::Handover(_) => ScenarioKind::Handover,
        }
    }

    pub fn build(&self) -> Box<dyn Game> {
        match self {
            Self::Nav(c) => Box::new(CooperativeNavigation::new(c.clone())),
            Self::Door(c) => Box::new(DoorPassing::new(c.clone())),
            Self::Handover(c) => Box::new(Handover::new(c.clone())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in ScenarioKind::ALL {
            assert_eq!(k.name().parse::<ScenarioKind>().unwrap(), k);
            let game = Scenario::with_defaults(k).build();
            assert_eq!(game.name(), k.name());
            assert_eq!(game.tolerance().len(), game.feature_len());
        }
        assert!("maze".parse::<ScenarioKind>().is_err());
    }
}
