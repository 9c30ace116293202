//! Independent oracles for the closed-form model.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use dqsense::model::{
    coincidence_probs, effective_fi, fisher_matrix, global_phase, pattern_distribution,
    ClickPattern, EfficiencyBudget, PhaseSetting, SourceParams, ALPHA,
};
use proptest::prelude::*;

/// Renormalised truncated Poisson weights, computed from scratch.
fn poisson_weights(mu: f64, n_max: u32) -> Vec<f64> {
    let mut w: Vec<f64> = (0..=n_max)
        .map(|m| {
            let fact: f64 = (1..=m).map(f64::from).product();
            (-mu).exp() * mu.powi(m as i32) / fact
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// Enumerate every routing of every pair and every photon survival outcome.
fn brute_force(mu: f64, v: f64, eta: [f64; 4], u: f64, n_max: u32) -> [f64; 16] {
    // (alice channel bit, bob channel bit) for A1B1, A1B2, A2B1, A2B2
    let routes = [(0usize, 2usize), (0, 3), (1, 2), (1, 3)];
    let c = v * u.cos();
    let route_p = [(1.0 - c) / 4.0, (1.0 + c) / 4.0, (1.0 + c) / 4.0, (1.0 - c) / 4.0];
    let w = poisson_weights(mu, n_max);
    let mut out = [0.0; 16];
    for (m, wm) in w.iter().enumerate() {
        // each pair has 4 routes x 4 survival outcomes = 16 elementary fates
        let fates = 16usize.pow(m as u32);
        for code in 0..fates {
            let mut mask = 0u8;
            let mut p = *wm;
            let mut rest = code;
            for _ in 0..m {
                let fate = rest % 16;
                rest /= 16;
                let (r, sa, sb) = (fate / 4, (fate / 2) % 2 == 1, fate % 2 == 1);
                let (a, b) = routes[r];
                p *= route_p[r];
                p *= if sa { eta[a] } else { 1.0 - eta[a] };
                p *= if sb { eta[b] } else { 1.0 - eta[b] };
                if sa {
                    mask |= 1 << a;
                }
                if sb {
                    mask |= 1 << b;
                }
            }
            out[mask as usize] += p;
        }
    }
    out
}

#[test]
fn pattern_distribution_matches_enumeration() {
    let cases = [
        (0.056, 0.98, [0.7432, 0.7667, 0.7477, 0.6974], PI / 2.0),
        (0.072, 0.9586, [0.5810, 0.6046, 0.5837, 0.5284], 0.7),
        (0.1, 0.5, [0.2, 0.9, 1.0, 0.4], 2.9),
        (0.0025, 1.0, [1.0; 4], 0.0),
    ];
    for (mu, v, eta, u) in cases {
        let source = SourceParams::new(mu, v, 4).unwrap();
        let eff = EfficiencyBudget::new(eta).unwrap();
        let model = pattern_distribution(&source, &eff, u).unwrap();
        let oracle = brute_force(mu, v, eta, u, 4);
        for (m, o) in model.probs.iter().zip(oracle) {
            assert!((m - o).abs() < 1e-14, "mu={mu}: {m} vs {o}");
        }
    }
}

#[test]
fn empty_pattern_bounded_by_vacuum_weight() {
    let source = SourceParams::new(0.0025, 0.7, 4).unwrap();
    for eta in [0.1, 0.5, 1.0] {
        for u in [0.0, 1.0, 2.0] {
            let d = pattern_distribution(&source, &EfficiencyBudget::uniform(eta).unwrap(), u).unwrap();
            assert!(d.prob(ClickPattern::EMPTY) >= 0.997503);
        }
    }
}

#[test]
fn fourfold_grows_as_mu_squared() {
    let eff = EfficiencyBudget::new([0.7432, 0.7667, 0.7477, 0.6974]).unwrap();
    let p = |mu: f64| {
        let s = SourceParams::new(mu, 0.98, 4).unwrap();
        pattern_distribution(&s, &eff, PI / 2.0).unwrap().prob(ClickPattern::new(15).unwrap())
    };
    let ratio = p(0.056) / p(0.028);
    assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
}

/// Central differences of the probabilities in `(theta_A, theta_B)`.
fn numeric_fisher(u0: f64, v: f64) -> [[f64; 2]; 2] {
    let h = 1e-6;
    let probs = |ta: f64, tb: f64| coincidence_probs(ta - 2.0 * tb, v).unwrap();
    let (ta, tb) = (u0, 0.0);
    let p0 = probs(ta, tb);
    let da: Vec<f64> = (0..4)
        .map(|i| (probs(ta + h, tb)[i] - probs(ta - h, tb)[i]) / (2.0 * h))
        .collect();
    let db: Vec<f64> = (0..4)
        .map(|i| (probs(ta, tb + h)[i] - probs(ta, tb - h)[i]) / (2.0 * h))
        .collect();
    let mut f = [[0.0; 2]; 2];
    for i in 0..4 {
        let d = [da[i], db[i]];
        for k in 0..2 {
            for l in 0..2 {
                f[k][l] += d[k] * d[l] / p0[i];
            }
        }
    }
    f
}

#[test]
fn fisher_matches_finite_differences() {
    for (u, v) in [(PI / 2.0, 1.0), (PI / 2.0, 0.98), (0.4, 0.9), (2.7, 0.5)] {
        let f = fisher_matrix(u, v).unwrap().0;
        let n = numeric_fisher(u, v);
        for k in 0..2 {
            for l in 0..2 {
                assert!((f[k][l] - n[k][l]).abs() < 1e-6, "{u} {v}: {f:?} vs {n:?}");
            }
        }
    }
    let f = fisher_matrix(PI / 2.0, 0.98).unwrap();
    assert_relative_eq!(effective_fi(&f, ALPHA).unwrap(), 8.6436, epsilon = 1e-10);
}

#[test]
fn singular_point_names_outcome() {
    let err = fisher_matrix(0.0, 1.0).unwrap_err().to_string();
    assert!(err.contains("A1B1"), "{err}");
}

#[test]
fn global_phase_examples() {
    assert_eq!(global_phase(&PhaseSetting::new(0.0, 0.0), false), 0.0);
    assert_relative_eq!(global_phase(&PhaseSetting::new(PI, 0.0), false), PI / 3.0);
    assert_relative_eq!(global_phase(&PhaseSetting::new(0.0, PI / 2.0), false), -PI / 3.0);
    assert_relative_eq!(global_phase(&PhaseSetting::new(0.0, PI / 2.0), true), PI / 3.0, epsilon = 1e-15);
}

proptest! {
    #[test]
    fn probabilities_normalised(u in -10.0f64..10.0, v in 0.0f64..=1.0) {
        let p = coincidence_probs(u, v).unwrap();
        prop_assert!(p.iter().all(|x| *x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let q = coincidence_probs(u + 2.0 * PI, v).unwrap();
        for i in 0..4 {
            prop_assert!((p[i] - q[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn visibility_law(u in 0.01f64..(PI - 0.01), v in 0.01f64..0.999) {
        let f = effective_fi(&fisher_matrix(u, v).unwrap(), ALPHA).unwrap();
        let law = 9.0 * v * v * u.sin().powi(2) / (1.0 - v * v * u.cos().powi(2));
        prop_assert!((f - law).abs() < 1e-9 * law.max(1.0));
        let fd = numeric_fisher(u, v);
        let fd_eff = (ALPHA[0] * ALPHA[0] * fd[0][0] + 2.0 * ALPHA[0] * ALPHA[1] * fd[0][1]
            + ALPHA[1] * ALPHA[1] * fd[1][1]) / (5.0f64 / 9.0).powi(2);
        prop_assert!((fd_eff - law).abs() < 1e-6 * law.max(1.0));
    }

    #[test]
    fn ideal_fisher_is_constant(u in 0.001f64..(PI - 0.001)) {
        let f = effective_fi(&fisher_matrix(u, 1.0).unwrap(), ALPHA).unwrap();
        prop_assert!((f - 9.0).abs() < 1e-9);
    }

    #[test]
    fn global_phase_is_linear_combination(ta in -10.0f64..10.0, tb in -10.0f64..10.0) {
        let g = global_phase(&PhaseSetting::new(ta, tb), false);
        prop_assert!((g - (ALPHA[0] * ta + ALPHA[1] * tb)).abs() < 1e-12);
        let r = global_phase(&PhaseSetting::new(ta, tb), true);
        prop_assert!((0.0..2.0 * PI / 3.0).contains(&r));
    }

    #[test]
    fn distribution_normalised_periodic_and_symmetric(
        mu in 0.0f64..0.3,
        v in 0.0f64..=1.0,
        e in prop::array::uniform4(0.05f64..=1.0),
        u in -7.0f64..7.0,
    ) {
        let source = SourceParams::new(mu, v, 6).unwrap();
        let eff = EfficiencyBudget::new(e).unwrap();
        let d = pattern_distribution(&source, &eff, u).unwrap();
        prop_assert!(d.probs.iter().all(|p| *p >= 0.0));
        prop_assert!((d.total() - 1.0).abs() < 1e-9);
        let shifted = pattern_distribution(&source, &eff, u + 2.0 * PI).unwrap();
        let swapped = pattern_distribution(&source, &eff.swapped(), u).unwrap();
        for m in 0..16usize {
            prop_assert!((d.probs[m] - shifted.probs[m]).abs() < 1e-12);
            // swap A1<->A2 (bits 0,1) and B1<->B2 (bits 2,3)
            let sm = ((m & 0b0101) << 1) | ((m & 0b1010) >> 1);
            prop_assert!((d.probs[m] - swapped.probs[sm]).abs() < 1e-12);
        }
    }

    #[test]
    fn low_mu_lossless_marginals(u in 0.0f64..PI, v in 0.0f64..=1.0) {
        let mu = 1e-4;
        let source = SourceParams::new(mu, v, 4).unwrap();
        let d = pattern_distribution(&source, &EfficiencyBudget::uniform(1.0).unwrap(), u).unwrap();
        let nonempty: f64 = ClickPattern::all().skip(1).map(|p| d.prob(p)).sum();
        let p = coincidence_probs(u, v).unwrap();
        for (i, mask) in [0b0101u8, 0b1001, 0b0110, 0b1010].iter().enumerate() {
            let got = d.prob(ClickPattern::new(*mask).unwrap()) / nonempty;
            prop_assert!((got - p[i]).abs() < 2.0 * mu);
        }
    }
}
