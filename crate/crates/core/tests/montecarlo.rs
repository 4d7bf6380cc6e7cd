use disclosure_core::distributions::{GameSpec, PreferencePrior, SymmetricDensity};
use disclosure_core::equilibrium::{lloyd_solve, Equilibrium, SolverConfig};
use disclosure_core::kernels::{disclosure_prob, kernel_h, loss};
use disclosure_core::montecarlo::{
    empirical_loss_curve, empirical_message_loss, estimator_diagnostics, simulate, stream_rng,
    BATCH_ROUNDS,
};
use disclosure_core::policies::{play_round, MppdPolicy, Source, WqdPolicy};
use disclosure_core::Error;
use rand_distr::Distribution;

fn gaussian_spec(m1: f64, s1: f64, m2: f64, s2: f64, prior: PreferencePrior, n: usize) -> GameSpec {
    GameSpec::new(
        SymmetricDensity::gaussian(m1, s1).unwrap(),
        SymmetricDensity::gaussian(m2, s2).unwrap(),
        prior,
        n,
    )
    .unwrap()
}

fn baseline() -> GameSpec {
    gaussian_spec(0.0, 1.0, 0.0, 2.0, PreferencePrior::uniform(), 2)
}

fn solved(spec: &GameSpec) -> (Equilibrium, WqdPolicy, MppdPolicy) {
    let eq = lloyd_solve(spec, &SolverConfig::default()).unwrap();
    let (wqd, mppd) = (eq.wqd().unwrap(), eq.mppd().unwrap());
    (eq, wqd, mppd)
}

#[test]
fn baseline_loss_matches_planner_loss() {
    let spec = baseline();
    let (eq, wqd, mppd) = solved(&spec);
    let report = simulate(&spec, &wqd, &mppd, 1_000_000, 2024).unwrap();
    assert_eq!(report.n_rounds, 1_000_000);
    assert_eq!(report.per_message_count.iter().sum::<u64>(), 1_000_000);
    assert!(
        report.empirical_loss.within(eq.planner_loss, 3.0),
        "{:?} vs {}",
        report.empirical_loss,
        eq.planner_loss
    );
    for stratum in &report.undisclosed_conditional_means {
        assert!(!stratum.flagged);
        assert!(
            stratum.estimate.within(stratum.prior_mean, 4.0),
            "{stratum:?}"
        );
    }
}

#[test]
fn shifted_means_are_estimated_by_their_own_mean() {
    let spec = gaussian_spec(5.0, 1.0, -3.0, 2.0, PreferencePrior::uniform(), 2);
    let (eq, wqd, mppd) = solved(&spec);
    // centring makes the equilibrium location free
    let (base, _, _) = solved(&baseline());
    for (a, b) in eq.weights.iter().zip(&base.weights) {
        assert!((a - b).abs() <= 1e-12);
    }
    let strata = estimator_diagnostics(&spec, &wqd, &mppd, 1_000_000, 7).unwrap();
    assert_eq!(strata.len(), 4);
    for s in &strata {
        let expected = match s.disclosed {
            Source::One => -3.0,
            Source::Two => 5.0,
        };
        assert_eq!(s.prior_mean, expected);
        assert!(s.estimate.within(expected, 4.0), "{s:?}");
    }
}

#[test]
fn diagnostics_need_enough_rounds() {
    let spec = baseline();
    let (_, wqd, mppd) = solved(&spec);
    assert!(matches!(
        estimator_diagnostics(&spec, &wqd, &mppd, 9_999, 0),
        Err(Error::TooFewRounds { got: 9_999, .. })
    ));
}

#[test]
fn sparse_strata_are_flagged() {
    // a prior piled up near 1 leaves message 1 almost empty
    let spec = gaussian_spec(
        0.0,
        1.0,
        0.0,
        2.0,
        PreferencePrior::beta(40.0, 1.0).unwrap(),
        2,
    );
    let wqd = WqdPolicy::new(vec![0.05, 0.9]).unwrap();
    let mppd = MppdPolicy::new(vec![0.0, 0.1, 1.0]).unwrap();
    let strata = estimator_diagnostics(&spec, &wqd, &mppd, 20_000, 1).unwrap();
    assert!(strata.iter().filter(|s| s.message == 1).all(|s| s.flagged));
    assert!(strata.iter().filter(|s| s.message == 2).all(|s| !s.flagged));
}

#[test]
fn disclosure_rates_match_quadrature() {
    let spec = gaussian_spec(
        1.0,
        1.5,
        -2.0,
        0.7,
        PreferencePrior::beta(2.0, 3.0).unwrap(),
        3,
    );
    let (eq, wqd, mppd) = solved(&spec);
    let report = simulate(&spec, &wqd, &mppd, 600_000, 31).unwrap();
    for (m, &w) in eq.weights.iter().enumerate() {
        let p = disclosure_prob(&spec, w);
        let count = report.per_message_count[m] as f64;
        let se = (p * (1.0 - p) / count).sqrt();
        let rate = report.per_message_disclosure_rate[m];
        assert!(
            (rate - p).abs() <= 3.0 * se,
            "message {}: {rate} vs {p}",
            m + 1
        );
    }
}

#[test]
fn preference_near_one_forwards_the_first_source() {
    // with equal variances and one message the forwarding rate is
    // (2/π)·atan(√(w/(1−w))) at w = E[Θ]
    for (alpha, floor) in [(50.0, 0.9), (5000.0, 0.99)] {
        let spec = gaussian_spec(
            0.0,
            1.0,
            0.0,
            1.0,
            PreferencePrior::beta(alpha, 1.0).unwrap(),
            1,
        );
        let (eq, wqd, mppd) = solved(&spec);
        let report = simulate(&spec, &wqd, &mppd, 200_000, 5).unwrap();
        let p = disclosure_prob(&spec, eq.weights[0]);
        let rate = report.per_message_disclosure_rate[0];
        let se = (p * (1.0 - p) / 200_000.0).sqrt();
        assert!(p > floor && rate > floor, "{rate} {p}");
        assert!((rate - p).abs() <= 3.0 * se, "{rate} vs {p}");
    }
}

#[test]
fn seeds_bracket_the_planner_loss() {
    let spec = baseline();
    let (eq, wqd, mppd) = solved(&spec);
    let above = (0..20u64)
        .filter(|&seed| {
            let report = simulate(&spec, &wqd, &mppd, 100_000, 1000 + seed).unwrap();
            report.empirical_loss.mean > eq.planner_loss
        })
        .count();
    // all twenty on one side has probability 2⁻¹⁹
    assert!(0 < above && above < 20, "{above}");
}

#[test]
fn reports_are_reproducible() {
    let spec = baseline();
    let (_, wqd, mppd) = solved(&spec);
    let a = simulate(&spec, &wqd, &mppd, 50_000, 17).unwrap();
    let b = simulate(&spec, &wqd, &mppd, 50_000, 17).unwrap();
    assert_eq!(a, b);
    let c = simulate(&spec, &wqd, &mppd, 50_000, 18).unwrap();
    assert_ne!(a.empirical_loss, c.empirical_loss);
}

#[test]
fn batched_summation_matches_a_sequential_replay() {
    let spec = baseline();
    let (_, wqd, mppd) = solved(&spec);
    let rounds = 3 * BATCH_ROUNDS + 123;
    let seed = 77;
    let report = simulate(&spec, &wqd, &mppd, rounds, seed).unwrap();

    let mut total = 0.0;
    let mut done = 0;
    let mut batch = 0;
    while done < rounds {
        let mut rng = stream_rng(seed, batch);
        for _ in 0..BATCH_ROUNDS.min(rounds - done) {
            let theta = spec.prior.sample(&mut rng);
            let x1 = spec.density1.sample(&mut rng);
            let x2 = spec.density2.sample(&mut rng);
            total += play_round(&spec, &wqd, &mppd, theta, x1, x2).unwrap().loss;
            done += 1;
        }
        batch += 1;
    }
    let sequential = total / rounds as f64;
    let merged = report.empirical_loss.mean;
    assert!(
        (merged - sequential).abs() <= 1e-12 * sequential,
        "{merged} vs {sequential}"
    );
}

#[test]
fn per_type_loss_matches_the_kernels() {
    let spec = baseline();
    let (eq, wqd, mppd) = solved(&spec);
    let curve = empirical_loss_curve(&spec, &wqd, &mppd, &[0.3], 1_000_000, 9).unwrap();
    let point = curve[0];
    assert_eq!(point.message, 1);
    assert!((point.analytic - loss(&spec, eq.weights[0], 0.3)).abs() <= 1e-15);
    assert!(point.empirical.within(point.analytic, 3.0), "{point:?}");

    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    for p in empirical_loss_curve(&spec, &wqd, &mppd, &grid, 100_000, 10).unwrap() {
        assert_eq!(p.message, mppd.message(p.theta));
        assert!(p.empirical.within(p.analytic, 4.0), "{p:?}");
    }
}

#[test]
fn indifferent_type_sees_equal_losses() {
    let spec = baseline();
    let (eq, wqd, _) = solved(&spec);
    let t = eq.thresholds[1];
    let lo = empirical_message_loss(&spec, &wqd, 1, t, 1_000_000, 12, 0).unwrap();
    let hi = empirical_message_loss(&spec, &wqd, 2, t, 1_000_000, 12, 1).unwrap();
    let se = lo.std_err.hypot(hi.std_err);
    assert!((lo.mean - hi.mean).abs() <= 3.0 * se, "{lo:?} {hi:?}");
}

#[test]
fn zero_preference_only_counts_the_second_source() {
    let spec = baseline();
    let (eq, wqd, _) = solved(&spec);
    let est = empirical_message_loss(&spec, &wqd, 1, 0.0, 500_000, 13, 0).unwrap();
    assert!(est.within(kernel_h(&spec, eq.weights[0]), 3.0), "{est:?}");
}

#[test]
fn invalid_requests_are_rejected() {
    let spec = baseline();
    let (_, wqd, mppd) = solved(&spec);
    assert!(simulate(&spec, &wqd, &mppd, 0, 0).is_err());
    assert!(empirical_message_loss(&spec, &wqd, 3, 0.5, 10, 0, 0).is_err());
    assert!(empirical_message_loss(&spec, &wqd, 1, 1.5, 10, 0, 0).is_err());
    let single = WqdPolicy::new(vec![0.5]).unwrap();
    assert!(simulate(&spec, &single, &mppd, 10, 0).is_err());
}
