//! Resource formula against simulated photon passes.

use dqsense::model::{pattern_distribution, Channel, EfficiencyBudget, PhaseSetting, SourceParams};
use dqsense::resources::{actual_photons, hl, snl, ResourceAudit};
use dqsense::simulator::{run_experiment, ExperimentConfig, RoutingMode};

/// Formula resources over expected truth passes, from exact expected click counts.
fn analytic_relative_error(mu: f64, eta: f64) -> f64 {
    let source = SourceParams::new(mu, 1.0, 4).unwrap();
    let eff = EfficiencyBudget::uniform(eta).unwrap();
    let d = pattern_distribution(&source, &eff, 0.9).unwrap();
    let n: f64 = Channel::ALL
        .iter()
        .map(|c| f64::from(c.passes()) * actual_photons(d.channel_marginal(*c), eta, mu).unwrap())
        .sum();
    n / (3.0 * source.mean_pairs()) - 1.0
}

fn simulated_relative_error(mu: f64, eta: f64, pulses: u64, seed: u64) -> f64 {
    let cfg = ExperimentConfig {
        source: SourceParams::new(mu, 1.0, 4).unwrap(),
        eff: EfficiencyBudget::uniform(eta).unwrap(),
        settings: vec![PhaseSetting::from_global(0.3)],
        pulses_per_setting: pulses,
        seed,
        chunk_size: 1 << 20,
        routing: RoutingMode::Phase,
    };
    let out = run_experiment(&cfg, None).unwrap();
    let audit = ResourceAudit::from_tally(&out.tallies[0], &cfg.eff, mu).unwrap();
    audit.n / out.truth_photon_passes()[0] as f64 - 1.0
}

#[test]
fn worked_example() {
    // 1e6 clicks, eta = 0.7432, mu = 0.056
    let n = actual_photons(1e6, 0.7432, 0.056).unwrap();
    let by_hand = 1e6 / 0.7432 * (1.0 - 0.056 * 0.7432 / (2.0 * (0.7432 - 2.0) * (0.056 + 2.0)));
    assert!((n - by_hand).abs() < 1e-6);
    assert!((n / 1.356e6 - 1.0).abs() < 1e-3, "{n}");
    assert!((snl(1e6).unwrap() - 1e-3).abs() < 1e-15);
    assert!((hl(3e6).unwrap() * 3e3 - 1.0).abs() < 1e-12);
}

#[test]
fn formula_stays_within_half_a_percent_analytically() {
    for mu in [0.0025, 0.056, 0.072, 0.1] {
        for eta in [0.53, 0.6, 0.74, 1.0] {
            let e = analytic_relative_error(mu, eta);
            assert!(e.abs() < 5e-3, "mu {mu} eta {eta}: {e}");
        }
    }
    // exact when multi-pair emission vanishes
    assert!(analytic_relative_error(1e-6, 0.6).abs() < 1e-5);
}

#[test]
fn simulation_agrees_with_expected_error() {
    for (mu, eta) in [(0.056, 0.74), (0.1, 0.53), (0.072, 1.0)] {
        let sim = simulated_relative_error(mu, eta, 200_000_000, 7);
        let exp = analytic_relative_error(mu, eta);
        assert!((sim - exp).abs() < 1e-3, "mu {mu} eta {eta}: {sim} vs {exp}");
        assert!(sim.abs() < 5e-3);
    }
}
