use radarsim::coflow::*;

fn base() -> CoflowConfig {
    CoflowConfig::default()
}

fn mean(cfg: CoflowConfig, s: Strategy) -> SweepResult {
    run(&cfg, s).unwrap()
}

/// Standard error of a difference of two sweep means.
fn se2(a: &SweepResult, b: &SweepResult) -> f64 {
    let k = a.trials.len() as f64;
    ((a.stddev.powi(2) + b.stddev.powi(2)) / k).sqrt()
}

#[test]
fn random_drop_matches_binomial_oracle_over_a_million_samples() {
    let cfg = CoflowConfig { trials: 100, ..base() };
    assert!(cfg.n * cfg.trials as u64 >= 1_000_000);
    let s = mean(cfg, Strategy::RandomDrop);
    let p = analytic_random_oracle(500, 1, 1e-4, 1);
    assert!((p - 0.04877).abs() < 5e-6);
    let sigma = (p * (1.0 - p) / (cfg.n as f64 * cfg.trials as f64)).sqrt();
    assert!((s.mean_failed_fraction - p).abs() <= 3.0 * sigma, "{} vs {p} (3σ = {})", s.mean_failed_fraction, 3.0 * sigma);
    // per-trial spread is of the order reported for 10⁴ coflows
    assert!(s.stddev < 0.003, "σ = {}", s.stddev);
}

#[test]
fn oracle_agreement_across_a_grid() {
    for (m, f, r, d) in [(250u64, 1u64, 1u32, 4e-4), (500, 2, 1, 1e-3), (100, 1, 2, 0.05)] {
        let cfg = CoflowConfig { m, f, r, d, trials: 100, ..base() };
        let s = mean(cfg, Strategy::RandomDrop);
        let p = analytic_random_oracle(m, f, d, r);
        let sigma = (p * (1.0 - p) / (cfg.n as f64 * cfg.trials as f64)).sqrt().max(1e-7);
        // exact-B sampling is slightly less dispersed than independent drops, plus a small finite-n bias
        assert!((s.mean_failed_fraction - p).abs() <= 3.0 * sigma + 0.02 * p, "m={m} F={f} r={r} D={d}: {} vs {p}", s.mean_failed_fraction);
    }
}

#[test]
fn endpoint_values() {
    let pk = mean(base(), Strategy::PerfectKnowledge);
    assert_eq!(pk.mean_failed_fraction, 0.05);
    assert_eq!(pk.stddev, 0.0);
    let pk2 = mean(CoflowConfig { r: 2, ..base() }, Strategy::PerfectKnowledge);
    assert_eq!(pk2.mean_failed_fraction, 0.05);

    let hedged_random = mean(CoflowConfig { r: 2, p_mc: 1.0, ..base() }, Strategy::RandomDrop);
    assert!(hedged_random.mean_failed_fraction < 1e-4);
    let hedged_blind = mean(CoflowConfig { r: 2, p_mc: 1.0, ..base() }, Strategy::ClassifierBased);
    assert!(hedged_blind.mean_failed_fraction < 1e-4);

    let mid = mean(CoflowConfig { r: 2, p_mc: 0.45, ..base() }, Strategy::ClassifierBased);
    assert!((mid.mean_failed_fraction - 0.01).abs() <= 0.005, "{}", mid.mean_failed_fraction);

    for s in [Strategy::ClassifierBased, Strategy::ClassifierGreedy] {
        let sharp = mean(CoflowConfig { p_mc: 0.0, ..base() }, s);
        assert_eq!(sharp.mean_failed_fraction, 0.05, "{s:?}");
    }
}

#[test]
fn greedy_classifier_without_hedging_degrades_to_random_drop() {
    let blind = mean(CoflowConfig { p_mc: 1.0, ..base() }, Strategy::ClassifierGreedy);
    let oracle = analytic_random_oracle(500, 1, 1e-4, 1);
    assert!((blind.mean_failed_fraction - oracle).abs() < 0.002, "{} vs {oracle}", blind.mean_failed_fraction);
    let mid = mean(CoflowConfig { r: 2, p_mc: 0.45, ..base() }, Strategy::ClassifierGreedy);
    assert!((mid.mean_failed_fraction - 0.01).abs() <= 0.005, "{}", mid.mean_failed_fraction);
}

#[test]
fn hedging_never_helps_the_attacker() {
    for s in [Strategy::ClassifierBased, Strategy::ClassifierGreedy, Strategy::RandomDrop] {
        for p_mc in [0.1, 0.3, 0.45, 0.7, 1.0] {
            let one = mean(CoflowConfig { p_mc, ..base() }, s);
            let two = mean(CoflowConfig { p_mc, r: 2, ..base() }, s);
            assert!(two.mean_failed_fraction <= one.mean_failed_fraction, "{s:?} p_mc={p_mc}");
        }
    }
}

#[test]
fn damage_non_increasing_in_misclassification() {
    for s in [Strategy::ClassifierBased, Strategy::ClassifierGreedy] {
        let rows: Vec<_> = p_mc_grid(10).into_iter().map(|p_mc| mean(CoflowConfig { p_mc, r: 2, ..base() }, s)).collect();
        for w in rows.windows(2) {
            let slack = 3.0 * se2(&w[0], &w[1]);
            assert!(w[1].mean_failed_fraction <= w[0].mean_failed_fraction + slack, "{s:?}: {} then {}", w[0].mean_failed_fraction, w[1].mean_failed_fraction);
        }
        assert!(rows[10].mean_failed_fraction < rows[0].mean_failed_fraction);
    }
}

#[test]
fn figure_trends() {
    let grids = figure_grids(CoflowConfig { trials: 10, ..base() }, Strategy::ClassifierBased, 5);
    let rows: Vec<(&str, Vec<SweepRow>)> = grids.iter().map(|(name, g)| (*name, sweep(g).unwrap())).collect();
    let pick = |name: &str, f: u64, m: u64| -> Vec<f64> {
        let (_, rs) = rows.iter().find(|(n, _)| *n == name).unwrap();
        rs.iter().filter(|r| r.f == f && r.m == m && r.r == 2).map(|r| r.mean_failed_fraction).collect()
    };
    let (f1, f2, f5, f10) = (pick("required_failures", 1, 500), pick("required_failures", 2, 500), pick("required_failures", 5, 500), pick("required_failures", 10, 500));
    for i in 0..f1.len() {
        assert!(f1[i] >= f2[i] && f2[i] >= f5[i] && f5[i] >= f10[i], "p_mc index {i}");
    }
    let m250 = pick("fan_out", 1, 250);
    let m1000 = pick("fan_out", 1, 1000);
    for i in 0..m250.len() {
        // a linear budget cut hurts the attacker less than requiring a second failure
        assert!(m250[i] >= f2[i], "p_mc index {i}: m=250 {} < F=2 {}", m250[i], f2[i]);
        assert!(m1000[i] + 1e-3 >= m250[i]);
    }
    let header_cols = SWEEP_CSV_HEADER.split(',').count();
    assert!(rows.iter().all(|(_, rs)| rs.iter().all(|r| r.csv().split(',').count() == header_cols)));
}

#[test]
fn identical_seeds_give_identical_sweeps() {
    let g = &figure_grids(CoflowConfig { trials: 4, n: 2000, ..base() }, Strategy::ClassifierBased, 4)[0].1;
    let a: Vec<String> = sweep(g).unwrap().iter().map(SweepRow::csv).collect();
    let b: Vec<String> = sweep(g).unwrap().iter().map(SweepRow::csv).collect();
    assert_eq!(a, b);
}
