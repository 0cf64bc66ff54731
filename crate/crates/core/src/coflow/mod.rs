//! Choke-point model of application-aware attacks on fan-out coflows.
//!
//! `n` coflows each issue `m` single-packet requests, every request sent as
//! `r` replicas (r = 2 is hedging). All `n·r·m` packets cross one compromised
//! switch with a drop budget of `B = n·r·m·D` packets. A request fails when
//! all its replicas are dropped; a coflow fails when at least `F` of its
//! requests fail. The attacker sees packet identities through a noisy
//! classifier that, with probability `p_mc`, reports a uniformly random
//! (coflow, request) pair instead of the true one.

use std::collections::HashMap;

use rand::seq::{index, SliceRandom};
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::simcore::RngStream;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CoflowError {
    #[error("invalid coflow configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoflowConfig {
    pub n: u64,
    pub m: u64,
    pub r: u32,
    #[serde(rename = "F")]
    pub f: u64,
    #[serde(rename = "D")]
    pub d: f64,
    pub p_mc: f64,
    pub trials: u32,
    pub seed: u64,
}

impl Default for CoflowConfig {
    fn default() -> Self {
        CoflowConfig { n: 10_000, m: 500, r: 1, f: 1, d: 1e-4, p_mc: 0.0, trials: 30, seed: 1 }
    }
}

impl CoflowConfig {
    pub fn validate(&self) -> Result<(), CoflowError> {
        let bad = |s: String| Err(CoflowError::Invalid(s));
        if self.n == 0 || self.m == 0 {
            return bad("n and m must be positive".into());
        }
        if !(1..=self.m).contains(&self.f) {
            return bad(format!("F = {} outside 1..={}", self.f, self.m));
        }
        if !(1..=2).contains(&self.r) {
            return bad(format!("r = {} (only 1 or 2 replicas are modeled)", self.r));
        }
        if !(0.0..=1.0).contains(&self.d) {
            return bad(format!("D = {} outside [0, 1]", self.d));
        }
        if !(0.0..=1.0).contains(&self.p_mc) {
            return bad(format!("p_mc = {} outside [0, 1]", self.p_mc));
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        Ok(())
    }

    pub fn packets(&self) -> u64 {
        self.n * self.r as u64 * self.m
    }

    /// Drop budget `⌊n·r·m·D⌋`, with a little slack so that products which
    /// are integral in exact arithmetic (10⁴·500·10⁻⁴) do not lose one to rounding.
    pub fn budget(&self) -> u64 {
        (self.packets() as f64 * self.d + 1e-6).floor() as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Knows every packet's identity and fails coflows one after another.
    PerfectKnowledge,
    /// Classifies packets and chases the replicas of chosen requests.
    ClassifierBased,
    /// As `ClassifierBased`, but keeps dropping packets classified onto a
    /// targeted pair after that pair already has `r` drops.
    ClassifierGreedy,
    /// Drops exactly `B` packets chosen uniformly at random.
    RandomDrop,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::PerfectKnowledge, Strategy::ClassifierBased, Strategy::ClassifierGreedy, Strategy::RandomDrop];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::PerfectKnowledge => "perfect_knowledge",
            Strategy::ClassifierBased => "classifier_based",
            Strategy::ClassifierGreedy => "classifier_greedy",
            Strategy::RandomDrop => "random_drop",
        }
    }
}

/// True identity of a request packet (zero-based ids).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RequestPacket {
    pub coflow: u64,
    pub request: u64,
    pub replica: u32,
}

/// What the attacker's classifier reports for `pkt`.
pub fn classify(pkt: RequestPacket, n: u64, m: u64, p_mc: f64, rng: &mut RngStream) -> (u64, u64) {
    if p_mc > 0.0 && rng.uniform01() < p_mc {
        let pair = rng.index((n * m) as usize) as u64;
        (pair / m, pair % m)
    } else {
        (pkt.coflow, pkt.request)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub failed_coflows: u64,
    pub failed_fraction: f64,
    pub budget_used: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub mean_failed_fraction: f64,
    /// Sample standard deviation across trials (0 for a single trial).
    pub stddev: f64,
    pub mean_budget_used: f64,
    pub max_budget_used: u64,
    pub trials: Vec<TrialResult>,
}

/// Outcome given the set of dropped packets.
fn outcome(cfg: &CoflowConfig, dropped: impl IntoIterator<Item = RequestPacket>, budget_used: u64) -> TrialResult {
    let mut per_request: HashMap<(u64, u64), u32> = HashMap::new();
    for p in dropped {
        *per_request.entry((p.coflow, p.request)).or_default() += 1;
    }
    let mut per_coflow: HashMap<u64, u64> = HashMap::new();
    for ((c, _), k) in per_request {
        if k >= cfg.r {
            *per_coflow.entry(c).or_default() += 1;
        }
    }
    let failed = per_coflow.values().filter(|&&k| k >= cfg.f).count() as u64;
    TrialResult { failed_coflows: failed, failed_fraction: failed as f64 / cfg.n as f64, budget_used }
}

fn packet_at(cfg: &CoflowConfig, idx: u64) -> RequestPacket {
    let r = cfg.r as u64;
    RequestPacket { coflow: idx / (r * cfg.m), request: (idx / r) % cfg.m, replica: (idx % r) as u32 }
}

fn perfect_knowledge(cfg: &CoflowConfig) -> TrialResult {
    let per_coflow = cfg.r as u64 * cfg.f;
    let failed = (cfg.budget() / per_coflow).min(cfg.n);
    TrialResult { failed_coflows: failed, failed_fraction: failed as f64 / cfg.n as f64, budget_used: failed * per_coflow }
}

fn random_drop(cfg: &CoflowConfig, rng: &mut RngStream) -> TrialResult {
    let total = cfg.packets();
    let b = cfg.budget().min(total);
    let picks = index::sample(rng.inner(), total as usize, b as usize);
    outcome(cfg, picks.iter().map(|i| packet_at(cfg, i as u64)), b)
}

/// One packet the classifier maps onto a targeted pair, in stream order.
struct Hit {
    truth: RequestPacket,
    observed: u64,
}

/// The attacker targets the first `⌊B/(r·F)⌋` coflows and, in each, requests
/// `0..F`, and drops packets its classifier maps onto a targeted pair while
/// budget lasts. When `capped`, a pair stops being dropped once it has `r`
/// drops; otherwise every such packet is dropped.
///
/// Packets arrive in uniformly random order; only those the classifier maps
/// onto a targeted pair matter, so they are generated directly instead of
/// streaming all `n·r·m` packets.
fn classifier_based(cfg: &CoflowConfig, rng: &mut RngStream, capped: bool) -> TrialResult {
    let r = cfg.r as u64;
    let budget = cfg.budget();
    let targeted = (budget / (r * cfg.f)).min(cfg.n);
    let pairs = targeted * cfg.f;
    if pairs == 0 {
        return outcome(cfg, [], 0);
    }
    let mut hits = Vec::new();
    for c in 0..targeted {
        for q in 0..cfg.f {
            for k in 0..cfg.r {
                let truth = RequestPacket { coflow: c, request: q, replica: k };
                let (oc, oq) = classify(truth, cfg.n, cfg.m, cfg.p_mc, rng);
                if oc < targeted && oq < cfg.f {
                    hits.push(Hit { truth, observed: oc * cfg.f + oq });
                }
            }
        }
    }
    // everything else, of which a Binomial number lands on a targeted pair
    let others = cfg.packets() - pairs * r;
    let p_hit = cfg.p_mc * pairs as f64 / (cfg.n * cfg.m) as f64;
    let k = if p_hit > 0.0 && others > 0 {
        Binomial::new(others, p_hit.min(1.0)).expect("valid binomial").sample(rng.inner())
    } else {
        0
    };
    if k > 0 {
        for i in index::sample(rng.inner(), others as usize, k as usize).iter() {
            let truth = nth_untargeted(cfg, targeted, i as u64);
            hits.push(Hit { truth, observed: rng.index(pairs as usize) as u64 });
        }
    }
    hits.shuffle(rng.inner());
    let mut tally = vec![0u32; pairs as usize];
    let mut used = 0;
    let mut dropped = Vec::new();
    for h in hits {
        if used == budget {
            break;
        }
        let t = &mut tally[h.observed as usize];
        if capped && *t >= cfg.r {
            continue;
        }
        *t += 1;
        used += 1;
        dropped.push(h.truth);
    }
    outcome(cfg, dropped, used)
}

/// The `i`-th packet (in id order) that is not a replica of a targeted request.
fn nth_untargeted(cfg: &CoflowConfig, targeted_coflows: u64, i: u64) -> RequestPacket {
    let r = cfg.r as u64;
    let spare_per_targeted = (cfg.m - cfg.f) * r;
    let in_targeted = targeted_coflows * spare_per_targeted;
    if i < in_targeted {
        let c = i / spare_per_targeted;
        let j = i % spare_per_targeted + cfg.f * r;
        RequestPacket { coflow: c, request: j / r, replica: (j % r) as u32 }
    } else {
        packet_at(cfg, targeted_coflows * cfg.m * r + (i - in_targeted))
    }
}

pub fn run_trial(cfg: &CoflowConfig, strategy: Strategy, rng: &mut RngStream) -> Result<TrialResult, CoflowError> {
    cfg.validate()?;
    Ok(match strategy {
        Strategy::PerfectKnowledge => perfect_knowledge(cfg),
        Strategy::RandomDrop => random_drop(cfg, rng),
        Strategy::ClassifierBased => classifier_based(cfg, rng, true),
        Strategy::ClassifierGreedy => classifier_based(cfg, rng, false),
    })
}

fn trial_rng(cfg: &CoflowConfig, strategy: Strategy, trial: u32) -> RngStream {
    RngStream::new(cfg.seed, &format!("coflow/{}/{trial}", strategy.as_str()))
}

/// Runs `cfg.trials` independent trials (in parallel) and summarizes them.
pub fn run(cfg: &CoflowConfig, strategy: Strategy) -> Result<SweepResult, CoflowError> {
    cfg.validate()?;
    let trials: Vec<TrialResult> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, strategy, &mut trial_rng(cfg, strategy, t)))
        .collect::<Result<_, _>>()?;
    let k = trials.len() as f64;
    let mean = trials.iter().map(|t| t.failed_coflows).sum::<u64>() as f64 / (cfg.n as f64 * k);
    let var = if trials.len() > 1 {
        trials.iter().map(|t| (t.failed_fraction - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    Ok(SweepResult {
        mean_failed_fraction: mean,
        stddev: var.sqrt(),
        mean_budget_used: trials.iter().map(|t| t.budget_used as f64).sum::<f64>() / k,
        max_budget_used: trials.iter().map(|t| t.budget_used).max().unwrap_or(0),
        trials,
    })
}

/// `P(Binomial(m, q) ≥ F)` with `q = drop_prob^r`: the failure probability of
/// a coflow under independent random drops.
pub fn analytic_random_oracle(m: u64, f: u64, drop_prob: f64, r: u32) -> f64 {
    let q = drop_prob.powi(r as i32);
    if f == 0 {
        return 1.0;
    }
    if q <= 0.0 {
        return 0.0;
    }
    if q >= 1.0 {
        return if f <= m { 1.0 } else { 0.0 };
    }
    if f == 1 {
        // 1 − (1 − q)^m without cancellation
        return -(m as f64 * (-q).ln_1p()).exp_m1();
    }
    // 1 − Σ_{i<F} C(m,i) q^i (1−q)^(m−i), terms built in log space
    let (lq, l1q) = (q.ln(), (-q).ln_1p());
    let mut below = 0.0;
    let mut log_choose = 0.0;
    for i in 0..f.min(m + 1) {
        if i > 0 {
            log_choose += ((m - i + 1) as f64).ln() - (i as f64).ln();
        }
        below += (log_choose + i as f64 * lq + (m - i) as f64 * l1q).exp();
    }
    (1.0 - below).max(0.0)
}

/// One row of a sweep table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p_mc: f64,
    pub r: u32,
    #[serde(rename = "F")]
    pub f: u64,
    pub m: u64,
    #[serde(rename = "D")]
    pub d: f64,
    pub n: u64,
    pub mean_failed_fraction: f64,
    pub stddev: f64,
    pub budget_used: f64,
}

pub const SWEEP_CSV_HEADER: &str = "p_mc,r,F,m,D,n,mean_failed_fraction,stddev,budget_used";

impl SweepRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.6},{:.6},{}",
            self.p_mc, self.r, self.f, self.m, self.d, self.n, self.mean_failed_fraction, self.stddev, self.budget_used
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub base: CoflowConfig,
    pub strategy: Strategy,
    pub p_mc: Vec<f64>,
    pub r: Vec<u32>,
    #[serde(rename = "F")]
    pub f: Vec<u64>,
    pub m: Vec<u64>,
}

/// Evaluates every grid point; rows come back in grid order
/// (m outermost, then F, then r, then p_mc).
pub fn sweep(grid: &SweepGrid) -> Result<Vec<SweepRow>, CoflowError> {
    let mut cells = Vec::new();
    for &m in &grid.m {
        for &f in &grid.f {
            for &r in &grid.r {
                for &p_mc in &grid.p_mc {
                    let cfg = CoflowConfig { m, f, r, p_mc, ..grid.base };
                    cfg.validate()?;
                    cells.push(cfg);
                }
            }
        }
    }
    cells
        .par_iter()
        .map(|cfg| {
            let s = run(cfg, grid.strategy)?;
            Ok(SweepRow {
                p_mc: cfg.p_mc,
                r: cfg.r,
                f: cfg.f,
                m: cfg.m,
                d: cfg.d,
                n: cfg.n,
                mean_failed_fraction: s.mean_failed_fraction,
                stddev: s.stddev,
                budget_used: s.mean_budget_used,
            })
        })
        .collect()
}

pub fn p_mc_grid(steps: u32) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

/// The three figure datasets: hedging vs. none over p_mc, the effect of F
/// under hedging, and the effect of the fan-out m under hedging.
pub fn figure_grids(base: CoflowConfig, strategy: Strategy, steps: u32) -> Vec<(&'static str, SweepGrid)> {
    let p = p_mc_grid(steps);
    let g = |r: Vec<u32>, f: Vec<u64>, m: Vec<u64>| SweepGrid { base, strategy, p_mc: p.clone(), r, f, m };
    vec![
        ("hedging", g(vec![1, 2], vec![1], vec![base.m])),
        ("required_failures", g(vec![2], vec![1, 2, 5, 10], vec![base.m])),
        ("fan_out", g(vec![2], vec![1], vec![250, 500, 1000, 2000])),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, prop_oneof, proptest, Just, ProptestConfig};
    use super::Strategy;

    fn cfg() -> CoflowConfig {
        CoflowConfig::default()
    }

    #[test]
    fn budget_is_exact_product() {
        assert_eq!(cfg().budget(), 500);
        assert_eq!(CoflowConfig { r: 2, ..cfg() }.budget(), 1000);
        assert_eq!(CoflowConfig { d: 0.0, ..cfg() }.budget(), 0);
    }

    #[test]
    fn perfect_knowledge_fails_five_percent_exactly() {
        let s = run(&CoflowConfig { trials: 5, ..cfg() }, Strategy::PerfectKnowledge).unwrap();
        assert_eq!(s.mean_failed_fraction, 0.05);
        assert_eq!(s.stddev, 0.0);
        assert!(s.trials.iter().all(|t| t.budget_used == 500));
    }

    #[test]
    fn perfect_knowledge_below_one_coflow_of_budget_fails_nothing() {
        let c = CoflowConfig { n: 10, m: 10, f: 3, r: 2, d: 0.025, ..cfg() };
        assert_eq!(c.budget(), 5);
        let t = run_trial(&c, Strategy::PerfectKnowledge, &mut RngStream::new(1, "t")).unwrap();
        assert_eq!(t.failed_fraction, 0.0);
    }

    #[test]
    fn oracle_closed_forms() {
        let p = analytic_random_oracle(500, 1, 1e-4, 1);
        assert!((p - (1.0 - (1.0f64 - 1e-4).powi(500))).abs() < 1e-12);
        assert!((p - 0.04877).abs() < 5e-6);
        assert!(analytic_random_oracle(500, 1, 1e-4, 2) < 1e-5);
        assert_eq!(analytic_random_oracle(500, 1, 0.0, 1), 0.0);
        // F > 1 against a direct binomial sum
        let (m, q) = (20u64, 0.1f64);
        let choose = |n: u64, k: u64| (0..k).fold(1.0, |a, i| a * (n - i) as f64 / (i + 1) as f64);
        let direct: f64 = (3..=m).map(|i| choose(m, i) * q.powi(i as i32) * (1.0 - q).powi((m - i) as i32)).sum();
        assert!((analytic_random_oracle(m, 3, q, 1) - direct).abs() < 1e-12);
    }

    #[test]
    fn classifier_extremes() {
        let mut rng = RngStream::new(3, "c");
        let p = RequestPacket { coflow: 7, request: 9, replica: 0 };
        for _ in 0..1000 {
            assert_eq!(classify(p, 100, 50, 0.0, &mut rng), (7, 9));
        }
    }

    #[test]
    fn classifier_mixture_frequency() {
        // exact-id frequency is 1 − p + p/(n·m)
        let (n, m, p_mc) = (20u64, 10u64, 0.45);
        let mut rng = RngStream::new(5, "mix");
        let pkt = RequestPacket { coflow: 3, request: 4, replica: 0 };
        let draws = 200_000;
        let exact = (0..draws).filter(|_| classify(pkt, n, m, p_mc, &mut rng) == (3, 4)).count() as f64 / draws as f64;
        let expect = 1.0 - p_mc + p_mc / (n * m) as f64;
        let sd = (expect * (1.0 - expect) / draws as f64).sqrt();
        assert!((exact - expect).abs() < 4.0 * sd, "{exact} vs {expect}");
    }

    #[test]
    fn fully_random_classifier_is_uniform() {
        // χ² over 100 cells with 10⁶ draws; 1% critical value for 99 dof is 134.6
        let (n, m) = (10u64, 10u64);
        let mut rng = RngStream::new(11, "chi");
        let pkt = RequestPacket { coflow: 0, request: 0, replica: 0 };
        let mut counts = vec![0u64; 100];
        let draws = 1_000_000u64;
        for _ in 0..draws {
            let (c, q) = classify(pkt, n, m, 1.0, &mut rng);
            counts[(c * m + q) as usize] += 1;
        }
        let e = draws as f64 / 100.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        assert!(chi2 < 134.6, "chi2 = {chi2}");
    }

    #[test]
    fn untargeted_enumeration_skips_exactly_the_targeted_block() {
        let c = CoflowConfig { n: 4, m: 5, r: 2, f: 2, ..cfg() };
        let targeted = 2;
        let all: Vec<_> = (0..c.packets()).map(|i| packet_at(&c, i)).filter(|p| !(p.coflow < targeted && p.request < c.f)).collect();
        let listed: Vec<_> = (0..all.len() as u64).map(|i| nth_untargeted(&c, targeted, i)).collect();
        assert_eq!(all, listed);
    }

    #[test]
    fn random_drop_agrees_with_oracle() {
        let c = CoflowConfig { trials: 10, ..cfg() };
        let s = run(&c, Strategy::RandomDrop).unwrap();
        let oracle = analytic_random_oracle(500, 1, 1e-4, 1);
        let se = s.stddev / (c.trials as f64).sqrt();
        assert!((s.mean_failed_fraction - oracle).abs() < 3.0 * se.max(1e-4), "{} vs {oracle}", s.mean_failed_fraction);
    }

    #[test]
    fn sweep_rows_follow_grid_order() {
        let grid = SweepGrid {
            base: CoflowConfig { n: 200, m: 20, d: 0.01, trials: 2, ..cfg() },
            strategy: Strategy::ClassifierBased,
            p_mc: vec![0.0, 1.0],
            r: vec![1, 2],
            f: vec![1],
            m: vec![20],
        };
        let rows = sweep(&grid).unwrap();
        let keys: Vec<_> = rows.iter().map(|r| (r.r, r.p_mc)).collect();
        assert_eq!(keys, vec![(1, 0.0), (1, 1.0), (2, 0.0), (2, 1.0)]);
        assert!(rows[0].csv().starts_with("0,1,1,20,0.01,200,"));
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(CoflowConfig { f: 0, ..cfg() }.validate().is_err());
        assert!(CoflowConfig { f: 501, ..cfg() }.validate().is_err());
        assert!(CoflowConfig { r: 3, ..cfg() }.validate().is_err());
        assert!(CoflowConfig { p_mc: 1.5, ..cfg() }.validate().is_err());
        assert!(CoflowConfig { d: -0.1, ..cfg() }.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn budget_never_exceeded(
            n in 1u64..300, m in 1u64..40, r in 1u32..=2, f_frac in 0.0f64..1.0,
            d in 0.0f64..0.2, p_mc in 0.0f64..=1.0, seed in any::<u64>(),
            strat in prop_oneof![Just(Strategy::PerfectKnowledge), Just(Strategy::ClassifierBased), Just(Strategy::ClassifierGreedy), Just(Strategy::RandomDrop)],
        ) {
            let f = 1 + ((m - 1) as f64 * f_frac) as u64;
            let c = CoflowConfig { n, m, r, f, d, p_mc, trials: 1, seed };
            let t = run_trial(&c, strat, &mut RngStream::new(seed, "p")).unwrap();
            prop_assert!(t.budget_used <= c.budget());
            prop_assert!((0.0..=1.0).contains(&t.failed_fraction));
        }

        #[test]
        fn perfect_knowledge_spends_r_per_failed_coflow(n in 1u64..2000, m in 1u64..100, r in 1u32..=2, d in 0.0f64..0.05) {
            let c = CoflowConfig { n, m, r, f: 1, d, p_mc: 0.0, trials: 1, seed: 0 };
            let t = run_trial(&c, Strategy::PerfectKnowledge, &mut RngStream::new(0, "p")).unwrap();
            let failed = (t.failed_fraction * n as f64).round() as u64;
            prop_assert_eq!(t.budget_used, failed * r as u64);
        }
    }
}
