//! Acceptance criteria 1–9, each reported as one PASS/FAIL line.
//! Run with `cargo test -p radarsim --test acceptance -- --nocapture`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use radarsim::coflow::{self, analytic_random_oracle, CoflowConfig, Strategy, SweepGrid};
use radarsim::dataplane::{AttackConfig, AttackKind, BloomFilter, BudgetConfig, BudgetWindow, TargetSelector};
use radarsim::harness::{run_incast_sweep, run_matrix, run_scenario, IncastSweep, PoissonWorkload, Scenario, SizeDist, TopologySpec, WorkloadPart};
use radarsim::monitors::MonitorConfig;
use radarsim::simcore::SimTime;
use radarsim::topology::{build_single_path, LinkParams, NodeId, Topology};
use radarsim::transport::{measure_flow, FlowResult, FlowStatus};
use radarsim::world::{FlowSpec, Observation, Observer, ObserverCtx, World, WorldConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn testbed() -> Arc<Topology> {
    Arc::new(build_single_path(2, LinkParams::testbed_bottleneck(), LinkParams::testbed_access()).unwrap())
}

fn attack(switch: &str, kind: AttackKind) -> AttackConfig {
    AttackConfig { switch: switch.into(), kind, target: TargetSelector::default(), budget: None }
}

fn testbed_flow(topo: &Topology, bytes: u64) -> FlowSpec {
    FlowSpec { src: topo.by_name("h0").unwrap(), dst: topo.by_name("h1").unwrap(), bytes, start: SimTime::ZERO }
}

fn on_testbed(seed: u64, attacks: &[AttackConfig], bytes: u64, horizon_s: u64) -> FlowResult {
    let topo = testbed();
    let flow = testbed_flow(&topo, bytes);
    measure_flow(topo, WorldConfig { seed, ..WorldConfig::default() }, attacks, flow, SimTime::from_secs(horizon_s)).unwrap()
}

fn fct(r: &FlowResult) -> f64 {
    r.fct.unwrap_or(r.elapsed).as_secs_f64()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn syn_backoff() -> Outcome {
    let base = on_testbed(1, &[], 100_000, 200);
    let est0 = base.establishment_time.unwrap();
    let mut notes = Vec::new();
    let mut pass = true;
    for k in 1..=6u32 {
        let r = on_testbed(1, &[attack("s0", AttackKind::SynDrop { max_drops: Some(k) })], 100_000, 200);
        let delay = r.establishment_time.unwrap() - est0;
        let want = SimTime::from_millis(200 * ((1u64 << k) - 1));
        if delay != want {
            pass = false;
            notes.push(format!("k={k}: {delay:?} != {want:?}"));
        }
        if k == 6 {
            let ratio = r.establishment_time.unwrap().as_secs_f64() / est0.as_secs_f64();
            pass &= ratio >= 60.0;
            notes.push(format!("k=6 delay {:.3} s, establishment {ratio:.0}x", delay.as_secs_f64()));
        }
    }
    outcome(pass, notes.join("; "))
}

fn coflow_oracle() -> Outcome {
    let cfg = CoflowConfig { n: 10_000, m: 500, r: 1, f: 1, d: 1e-4, p_mc: 0.0, trials: 30, seed: 11 };
    let samples = cfg.n * cfg.m * cfg.trials as u64;
    let res = coflow::run(&cfg, Strategy::RandomDrop).unwrap();
    let oracle = analytic_random_oracle(500, 1, 1e-4, 1);
    let se = res.stddev / (cfg.trials as f64).sqrt();
    let dev = (res.mean_failed_fraction - oracle).abs();
    let closed = 1.0 - (1.0 - 1e-4f64).powi(500);
    outcome(
        samples >= 1_000_000 && dev <= 3.0 * se && (oracle - closed).abs() < 1e-12,
        format!("{samples} request samples: mean {:.5} vs oracle {oracle:.5} (|Δ| {dev:.6}, 3σ {:.6}), trial σ {:.4}", res.mean_failed_fraction, 3.0 * se, res.stddev),
    )
}

fn coflow_endpoints() -> Outcome {
    let base = CoflowConfig::default();
    let pk = coflow::run(&base, Strategy::PerfectKnowledge).unwrap();
    let hedged_random = coflow::run(&CoflowConfig { r: 2, p_mc: 1.0, ..base }, Strategy::RandomDrop).unwrap();
    let hedged_classifier = coflow::run(&CoflowConfig { r: 2, p_mc: 0.45, ..base }, Strategy::ClassifierBased).unwrap();
    let pass = pk.mean_failed_fraction == 0.05
        && pk.stddev == 0.0
        && hedged_random.mean_failed_fraction < 1e-4
        && (hedged_classifier.mean_failed_fraction - 0.01).abs() <= 0.005;
    outcome(
        pass,
        format!(
            "perfect knowledge {:.4} (σ {}), hedged random {:.6}, hedged classifier at p_mc 0.45 {:.4}",
            pk.mean_failed_fraction, pk.stddev, hedged_random.mean_failed_fraction, hedged_classifier.mean_failed_fraction
        ),
    )
}

const ECN_GRID: [f64; 8] = [0.0, 0.01, 0.03, 0.05, 0.1, 0.2, 0.5, 1.0];
const MB: u64 = 1_000_000;

fn ecn_tinker() -> Outcome {
    let seeds: Vec<u64> = (1..=5).collect();
    let med = |f: f64| {
        let attacks = if f > 0.0 { vec![attack("s0", AttackKind::EcnTinker { fraction: f })] } else { Vec::new() };
        median(seeds.par_iter().map(|&s| fct(&on_testbed(s, &attacks, MB, 600))).collect())
    };
    let curve: Vec<f64> = ECN_GRID.iter().map(|&f| med(f)).collect();
    let ratios: Vec<f64> = curve.iter().map(|c| c / curve[0]).collect();
    let at3 = ratios[2];
    let monotone = ratios.windows(2).all(|w| w[1] >= w[0]);
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    let shown: Vec<String> = ECN_GRID.iter().zip(&ratios).map(|(f, r)| format!("{f}:{r:.2}x")).collect();
    outcome(at3 >= 2.0 && monotone && max >= 4.0, format!("median FCT ratio by f [{}]; monotone {monotone}", shown.join(" ")))
}

fn cwnd_tinker() -> Outcome {
    let base = fct(&on_testbed(1, &[], MB, 2000));
    let w = |window: u16| fct(&on_testbed(1, &[attack("s0", AttackKind::CwndTinker { window })], MB, 2000));
    let (w1, w8) = (w(1), w(8));
    let (r1, r8) = (w1 / base, w8 / base);
    outcome(
        w1 > w8 && w8 > base && r1 >= 100.0 && (10.0..=50.0).contains(&r8),
        format!("baseline {base:.3} s, W=1 {w1:.2} s ({r1:.1}x), W=8 {w8:.3} s ({r8:.2}x)"),
    )
}

/// Counts data segments entering the network from the client and those
/// reaching the server.
#[derive(Default)]
struct HoleWatch {
    client: Option<NodeId>,
    server: Option<NodeId>,
    sent: BTreeMap<u32, u32>,
    arrived: BTreeSet<u32>,
}

impl Observer for HoleWatch {
    fn observe(&mut self, obs: &Observation, ctx: &mut ObserverCtx) {
        match obs {
            Observation::SwitchIngress { from, pkt, .. } if *from == self.client && pkt.payload_len > 0 => {
                *self.sent.entry(pkt.seq).or_default() += 1;
            }
            Observation::LinkDeliver { link, pkt } if Some(ctx.topo.link(*link).to) == self.server && pkt.payload_len > 0 => {
                self.arrived.insert(pkt.seq);
            }
            _ => {}
        }
    }
}

fn ack_and_drop() -> Outcome {
    let topo = testbed();
    let run = |horizon: u64| {
        let flow = testbed_flow(&topo, MB);
        let watch = HoleWatch { client: Some(flow.src), server: Some(flow.dst), ..HoleWatch::default() };
        let mut w = World::with_observer(topo.clone(), WorldConfig::default(), watch).unwrap();
        w.install_attack(attack("s0", AttackKind::AckAndDrop { nth: 10 })).unwrap();
        w.add_flow(flow).unwrap();
        let (out, watch) = w.run(SimTime::from_secs(horizon));
        (out.flows[0].clone(), watch)
    };
    let (early, _) = run(20);
    let (late, watch) = run(200);
    let hole = watch.sent.keys().copied().find(|s| !watch.arrived.contains(s));
    let resent = hole.map(|h| watch.sent[&h]).unwrap_or(0);
    let frozen = early.delivered == late.delivered && late.delivered < MB;
    let alive = late.status == FlowStatus::Incomplete;
    outcome(
        hole.is_some() && resent == 1 && frozen && alive,
        format!(
            "hole sent {resent} time(s); delivered {} B at 20 s and {} B at 200 s (stall ≥ 180 s); status at 200 s {:?}",
            early.delivered, late.delivered, late.status
        ),
    )
}

fn matrix() -> Outcome {
    let report = run_matrix(1, None).unwrap();
    let bad = report.mismatches();
    println!("{}", report.render());
    outcome(bad.is_empty(), if bad.is_empty() { "zero mismatches".into() } else { bad.join(" | ") })
}

fn incast() -> Outcome {
    let sweep = IncastSweep::default();
    let rows = run_incast_sweep(&sweep).unwrap();
    print!("{}", IncastSweep::csv(&rows));
    let low_ok = rows.iter().filter(|r| r.load <= 0.2).all(|r| (r.ratio - 1.0).abs() <= 0.1);
    let top = sweep.loads.iter().cloned().fold(f64::MIN, f64::max);
    let high: Vec<_> = rows.iter().filter(|r| r.load == top).collect();
    let strong = high.iter().filter(|r| r.pp >= 0.06).all(|r| r.ratio >= 1.2);
    let monotone = high.windows(2).all(|w| w[1].ratio >= w[0].ratio);
    let shown: Vec<String> = high.iter().map(|r| format!("pp {}: {:.3}x", r.pp, r.ratio)).collect();
    outcome(
        low_ok && strong && monotone,
        format!("≤20% load within 10%: {low_ok}; load {top}: [{}]; ≥1.2 at pp ≥ 0.06: {strong}; monotone: {monotone}", shown.join(", ")),
    )
}

fn rest_scenario(seed: u64, load: f64) -> Scenario {
    let mut s = Scenario::new("rest", TopologySpec::FatTree { k: 4, link: LinkParams::datacenter() }, 10.0);
    s.seed = seed;
    s.workload.push(WorkloadPart::Poisson(PoissonWorkload { load, sizes: SizeDist::Websearch, duration_s: 1.0, start_s: 0.0, dst_pod: None, dst_pod_share: 1.0 }));
    s
}

fn flow_rows(topo: &Topology, flows: &[FlowResult]) -> Vec<String> {
    flows.iter().map(|f| f.csv_row(|n| topo.node(n).name.clone())).collect()
}

fn properties() -> Outcome {
    let mut failed = Vec::new();

    let mut s = rest_scenario(5, 0.2);
    s.attacks.push(attack("core0_0", AttackKind::EcnTinker { fraction: 0.1 }));
    s.monitors = MonitorConfig::matrix_columns();
    let once = || {
        let r = run_scenario(&s, false).unwrap();
        let verdicts: Vec<String> = r.attacked.verdicts.iter().map(|v| v.csv.clone()).collect();
        (flow_rows(&r.topology, &r.attacked.flows), verdicts)
    };
    let grid = SweepGrid {
        base: CoflowConfig { trials: 5, ..CoflowConfig::default() },
        strategy: Strategy::ClassifierBased,
        p_mc: vec![0.0, 0.5, 1.0],
        r: vec![1, 2],
        f: vec![1],
        m: vec![500],
    };
    let small_incast = IncastSweep { k: 4, loads: vec![0.2], pps: vec![0.1], ..IncastSweep::default() };
    let incast_csv = || IncastSweep::csv(&run_incast_sweep(&small_incast).unwrap());
    if once() != once() || coflow::sweep(&grid).unwrap() != coflow::sweep(&grid).unwrap() || incast_csv() != incast_csv() {
        failed.push("determinism");
    }

    let topo = testbed();
    let plain = on_testbed(1, &[], 200_000, 60);
    let elsewhere = TargetSelector { src: Some("h1".into()), ..TargetSelector::default() };
    let kinds = [
        AttackKind::SynDrop { max_drops: None },
        AttackKind::SameSeqDrop { nth: 1, max_drops: None },
        AttackKind::RstTinker { nth: 1 },
        AttackKind::AckAndDrop { nth: 1 },
        AttackKind::EcnTinker { fraction: 1.0 },
        AttackKind::CwndTinker { window: 1 },
    ];
    for kind in kinds {
        let cfg = AttackConfig { target: elsewhere.clone(), ..attack("s0", kind) };
        let r = on_testbed(1, &[cfg], 200_000, 60);
        if flow_rows(&topo, std::slice::from_ref(&r)) != flow_rows(&topo, std::slice::from_ref(&plain)) || r.retransmissions != plain.retransmissions {
            failed.push("non-target transparency");
            break;
        }
    }

    for window in [BudgetWindow::Cumulative, BudgetWindow::Packets(1000)] {
        let d = 0.01;
        let mut s = rest_scenario(2, 0.2);
        s.attacks.push(AttackConfig { budget: Some(BudgetConfig { fraction: d, window }), ..attack("core0_0", AttackKind::EcnTinker { fraction: 1.0 }) });
        let r = run_scenario(&s, false).unwrap();
        let c = &r.attacked.attacks[0].counters;
        if c.tampered() == 0 || c.tampered() as f64 > d * c.transited as f64 {
            failed.push("tamper budget ceiling");
        }
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for (m, h) in [(1 << 12, 3), (1 << 16, 5), (64, 1)] {
        let mut b = BloomFilter::new(m, h);
        let keys: Vec<u64> = (0..5000).map(|_| rng.random()).collect();
        keys.iter().for_each(|&k| b.insert(k));
        if !keys.iter().all(|&k| b.contains(k)) {
            failed.push("bloom no false negatives");
        }
    }

    let cells: Vec<(u64, f64)> = [0.1, 0.3].iter().flat_map(|&l| (1..=10u64).map(move |s| (s, l))).collect();
    let alarms: Vec<String> = cells
        .par_iter()
        .flat_map(|&(seed, load)| {
            let mut s = rest_scenario(seed, load);
            s.monitors = MonitorConfig::matrix_columns();
            let r = run_scenario(&s, false).unwrap();
            r.baseline.verdicts.iter().filter(|v| v.alarm).map(|v| format!("{} at seed {seed} load {load}", v.monitor)).collect::<Vec<_>>()
        })
        .collect();
    if !alarms.is_empty() {
        failed.push("no false alarms at rest");
    }

    let detail = if failed.is_empty() {
        "determinism, non-target transparency, tamper budget, bloom, 20 quiet runs at rest (10 seeds x 2 loads)".to_string()
    } else {
        format!("failed: {}; {}", failed.join(", "), alarms.join(", "))
    };
    outcome(failed.is_empty(), detail)
}

#[test]
fn acceptance() {
    let criteria: [(&str, Duration, fn() -> Outcome); 9] = [
        ("1 SYN backoff closed form", Duration::from_secs(1), syn_backoff),
        ("2 coflow oracle agreement", Duration::from_secs(10), coflow_oracle),
        ("3 coflow endpoints", Duration::from_secs(60), coflow_endpoints),
        ("4 ECN tinker", Duration::from_secs(30), ecn_tinker),
        ("5 CWND tinker", Duration::from_secs(60), cwnd_tinker),
        ("6 ACK-and-drop stall", Duration::from_secs(10), ack_and_drop),
        ("7 evasion matrix", Duration::from_secs(600), matrix),
        ("8 coordinated incast", Duration::from_secs(900), incast),
        ("9 property suites", Duration::from_secs(600), properties),
    ];
    let mut failed = Vec::new();
    let mut lines = Vec::new();
    for (name, budget, check) in criteria {
        let t = Instant::now();
        let o = check();
        let took = t.elapsed();
        let in_time = took <= budget;
        let pass = o.pass && in_time;
        let line = format!(
            "criterion {name}: {} ({:.1} s of {} s) {}",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs(),
            o.detail
        );
        println!("{line}");
        lines.push(line);
        if !pass {
            failed.push(name);
        }
    }
    println!("\n{}", lines.join("\n"));
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
