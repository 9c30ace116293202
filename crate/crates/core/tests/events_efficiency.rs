//! Heralding-efficiency estimators on calibration-mode runs.

use dqsense::events::estimate_efficiencies;
use dqsense::model::{pattern_distribution_routed, Channel, EfficiencyBudget, PairRouting, PhaseSetting, SourceParams};
use dqsense::simulator::{run_experiment, ExperimentConfig, RoutingMode};

const ETA_240M: [f64; 4] = [0.7432, 0.7667, 0.7477, 0.6974];
const ETA_10KM: [f64; 4] = [0.5810, 0.6046, 0.5837, 0.5284];

fn calibration_tally(mu: f64, eta: [f64; 4], pulses: u64, seed: u64) -> dqsense::events::Tally {
    let cfg = ExperimentConfig {
        source: SourceParams::new(mu, 1.0, 4).unwrap(),
        eff: EfficiencyBudget::new(eta).unwrap(),
        settings: vec![PhaseSetting::new(0.0, 0.0)],
        pulses_per_setting: pulses,
        seed,
        chunk_size: 1 << 20,
        routing: RoutingMode::Calibration,
    };
    run_experiment(&cfg, None).unwrap().tallies.remove(0)
}

/// Expected `C11/N_B1, C22/N_B2, C11/N_A1, C22/N_A2` from the exact pattern distribution.
fn analytic_ratios(mu: f64, eta: [f64; 4]) -> [f64; 4] {
    let source = SourceParams::new(mu, 1.0, 4).unwrap();
    let eff = EfficiencyBudget::new(eta).unwrap();
    let d = pattern_distribution_routed(&source, &eff, &PairRouting::calibration());
    let both = |a: u8, b: u8| -> f64 {
        (0..16u8).filter(|m| m & a != 0 && m & b != 0).map(|m| d.probs[m as usize]).sum()
    };
    let (c11, c22) = (both(0b0001, 0b0100), both(0b0010, 0b1000));
    let m = |c: Channel| d.channel_marginal(c);
    [c11 / m(Channel::B1), c22 / m(Channel::B2), c11 / m(Channel::A1), c22 / m(Channel::A2)]
}

#[test]
fn alice_one_recovered_at_low_mu() {
    // the binomial error at 1e7 pulses is 0.0045, so 1e9 are needed for +-0.003
    let est = estimate_efficiencies(&calibration_tally(0.0025, ETA_240M, 1_000_000_000, 1)).unwrap();
    assert!((est.get(Channel::A1) - 0.7432).abs() < 0.003, "{:?}", est.eta);
    for (e, t) in est.eta.iter().zip(ETA_240M) {
        assert!((e - t).abs() < 0.003);
    }
    assert!(!est.overshoot);
}

#[test]
fn lossless_calibration_is_exact() {
    let est = estimate_efficiencies(&calibration_tally(0.056, [1.0; 4], 1_000_000, 2)).unwrap();
    assert_eq!(est.eta, [1.0; 4]);
}

#[test]
fn repeated_runs_are_unbiased_at_low_mu() {
    let runs = 100;
    let est: Vec<[f64; 4]> = (0..runs)
        .map(|i| estimate_efficiencies(&calibration_tally(0.0025, ETA_240M, 10_000_000, 100 + i)).unwrap().eta)
        .collect();
    for ch in 0..4 {
        let xs: Vec<f64> = est.iter().map(|e| e[ch]).collect();
        let mean = xs.iter().sum::<f64>() / runs as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
        let se = (var / runs as f64).sqrt();
        assert!((mean - ETA_240M[ch]).abs() < 2.0 * se, "channel {ch}: {mean} +- {se}");
    }
}

#[test]
fn multi_pair_bias_matches_the_model() {
    let mu = 0.056;
    let model = analytic_ratios(mu, ETA_240M);
    for (m, t) in model.iter().zip(ETA_240M) {
        // accidental coincidences from second pairs push every ratio up, by O(mu)
        let bias = m - t;
        assert!(bias > 0.0 && bias < mu * (1.0 - t), "{bias}");
    }
    let low = analytic_ratios(mu / 10.0, ETA_240M);
    for ch in 0..4 {
        let r = (model[ch] - ETA_240M[ch]) / (low[ch] - ETA_240M[ch]);
        assert!((r - 10.0).abs() < 1.0, "{r}");
    }
    let est = estimate_efficiencies(&calibration_tally(mu, ETA_240M, 100_000_000, 3)).unwrap();
    for ch in 0..4 {
        let sigma = (model[ch] * (1.0 - model[ch]) / (1e8 * mu * 0.5 * ETA_240M[ch])).sqrt();
        assert!((est.eta[ch] - model[ch]).abs() < 4.0 * sigma, "{ch}: {} vs {}", est.eta[ch], model[ch]);
    }
}

#[test]
fn ten_km_efficiencies_within_three_sigma() {
    let tally = calibration_tally(0.0025, ETA_10KM, 200_000_000, 4);
    let est = estimate_efficiencies(&tally).unwrap();
    let model = analytic_ratios(0.0025, ETA_10KM);
    let partner = [Channel::B1, Channel::B2, Channel::A1, Channel::A2];
    for ch in 0..4 {
        let n = tally.channel_clicks(partner[ch]) as f64;
        let sigma = (model[ch] * (1.0 - model[ch]) / n).sqrt();
        assert!((est.eta[ch] - model[ch]).abs() < 3.0 * sigma, "{ch}");
        assert!((est.eta[ch] - ETA_10KM[ch]).abs() < 3.0 * sigma + 2e-3);
    }
}
