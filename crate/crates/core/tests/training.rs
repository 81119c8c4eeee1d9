use qcp_core::driver::{evaluate_policy, train, TrainConfig};
use qcp_core::envs::{Scenario, ScenarioKind};
use qcp_core::search::{Algorithm, SearchConfig};
use qcp_core::seeded_rng;

fn short(kind: ScenarioKind, algorithm: Algorithm, seed: u64) -> TrainConfig {
    let mut config = TrainConfig {
        iterations: 3,
        algorithm,
        seed,
        search: SearchConfig {
            budget: 12,
            ..SearchConfig::default()
        },
        ..TrainConfig::default()
    };
    config.fit.components = kind.default_components();
    config
}

#[test]
fn every_scenario_and_algorithm_trains() {
    for kind in ScenarioKind::ALL {
        let game = Scenario::with_defaults(kind).build();
        for algorithm in Algorithm::ALL {
            let out = train(game.as_ref(), &short(kind, algorithm, 1)).unwrap();
            let m = &out.metrics.iterations;
            assert_eq!(m.len(), 3, "{kind} {algorithm}");
            assert_eq!(out.approximators.len(), game.n_agents());
            for w in m.windows(2) {
                assert!(w[1].cum_states >= w[0].cum_states);
                assert_eq!(w[1].cum_states - w[0].cum_states, w[1].new_states);
            }
            assert!(m.iter().all(|x| (0.0..=1.0).contains(&x.mean_reward) && x.sim_steps > 0));
            assert!(out.datasets.iter().all(|d| d.len() > 0));
        }
    }
}

#[test]
fn same_seed_same_run() {
    let game = Scenario::with_defaults(ScenarioKind::Door).build();
    let config = short(ScenarioKind::Door, Algorithm::Qcp, 4);
    let a = train(game.as_ref(), &config).unwrap();
    let b = train(game.as_ref(), &config).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.datasets[0].to_text(), b.datasets[0].to_text());
    let c = train(game.as_ref(), &TrainConfig { seed: 5, ..config }).unwrap();
    assert_ne!(a.datasets[0].to_text(), c.datasets[0].to_text());
}

#[test]
fn trained_policy_can_be_evaluated() {
    let game = Scenario::with_defaults(ScenarioKind::Nav).build();
    let out = train(game.as_ref(), &short(ScenarioKind::Nav, Algorithm::Vanilla, 2)).unwrap();
    let (mean, std) = evaluate_policy(game.as_ref(), &out.approximators, 5, 10, 0.05, &mut seeded_rng(2, 9)).unwrap();
    assert!(mean >= 0.0 && mean <= 10.0 && std >= 0.0);
}
