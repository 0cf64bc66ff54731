use std::sync::Arc;

use radarsim::dataplane::{AttackConfig, AttackKind, TargetSelector};
use radarsim::simcore::SimTime;
use radarsim::topology::{build_fat_tree, build_single_path, LinkParams, Topology};
use radarsim::transport::{measure_flow, FlowStatus, ListenerConfig};
use radarsim::world::{FlowSpec, World, WorldConfig};

fn testbed() -> Arc<Topology> {
    Arc::new(build_single_path(2, LinkParams::testbed_bottleneck(), LinkParams::testbed_access()).unwrap())
}

fn flow(topo: &Topology, src: &str, dst: &str, bytes: u64) -> FlowSpec {
    FlowSpec { src: topo.by_name(src).unwrap(), dst: topo.by_name(dst).unwrap(), bytes, start: SimTime::ZERO }
}

fn attack(switch: &str, kind: AttackKind) -> AttackConfig {
    AttackConfig { switch: switch.into(), kind, target: TargetSelector::default(), budget: None }
}

#[test]
fn unattacked_transfer_matches_bandwidth_delay_estimate() {
    let topo = testbed();
    let r = measure_flow(topo.clone(), WorldConfig::default(), &[], flow(&topo, "h0", "h1", 100_000), SimTime::from_secs(10)).unwrap();
    assert_eq!(r.status, FlowStatus::Completed);
    // handshake RTT, then every segment serialized once at 5 Mbps, then one RTT for the last ACK
    let rtt = 0.002;
    let segs = (100_000f64 / 1460.0).ceil();
    let estimate = rtt + segs * 1500.0 * 8.0 / 5e6 + rtt;
    let fct = r.fct.unwrap().as_secs_f64();
    assert!((fct - estimate).abs() <= 0.2 * estimate, "fct {fct} vs estimate {estimate}");
    assert_eq!(r.retransmissions, 0);
}

#[test]
fn syn_drops_delay_establishment_by_geometric_backoff() {
    let topo = testbed();
    let run = |k: Option<u32>| {
        let attacks: Vec<_> = k.into_iter().map(|k| attack("s0", AttackKind::SynDrop { max_drops: Some(k) })).collect();
        measure_flow(topo.clone(), WorldConfig::default(), &attacks, flow(&topo, "h0", "h1", 10_000), SimTime::from_secs(60)).unwrap()
    };
    let base = run(None).establishment_time.unwrap();
    for k in 1..=6u32 {
        let est = run(Some(k)).establishment_time.unwrap();
        let expected = SimTime::from_millis(200 * ((1u64 << k) - 1));
        assert_eq!(est - base, expected, "k = {k}");
    }
}

#[test]
fn syn_flood_exhausts_victim_slots() {
    let topo = Arc::new(build_fat_tree(4, LinkParams::datacenter()).unwrap());
    let mut w = World::new(topo.clone(), WorldConfig::default()).unwrap();
    w.install_attack(attack(
        "tor0_0",
        AttackKind::SynFlood { victim: "h0_0_0".into(), rate_pps: 1000.0, start_s: 0.0, count: None, cookie_ack: false },
    ))
    .unwrap();
    let mut f = flow(&topo, "h1_0_0", "h0_0_0", 10_000);
    f.start = SimTime::from_secs(1);
    w.add_flow(f).unwrap();
    let (out, _) = w.run(SimTime::from_secs(40));
    assert_eq!(out.flows[0].status, FlowStatus::Failed);
    assert!(out.flows[0].establishment_time.is_none());
}

#[test]
fn cookies_resist_plain_flood_but_not_forged_acks() {
    let topo = Arc::new(build_fat_tree(4, LinkParams::datacenter()).unwrap());
    let victim = topo.by_name("h0_0_0").unwrap();
    let run = |cookie_ack: bool| {
        let cfg = WorldConfig {
            listener_overrides: vec![(victim, ListenerConfig { syn_cookies: true, ..ListenerConfig::default() })],
            ..WorldConfig::default()
        };
        let mut w = World::new(topo.clone(), cfg).unwrap();
        w.install_attack(attack(
            "tor0_0",
            AttackKind::SynFlood { victim: "h0_0_0".into(), rate_pps: 1000.0, start_s: 0.0, count: None, cookie_ack },
        ))
        .unwrap();
        let mut f = flow(&topo, "h1_0_0", "h0_0_0", 10_000);
        f.start = SimTime::from_secs(1);
        w.add_flow(f).unwrap();
        let (out, _) = w.run(SimTime::from_secs(40));
        out.flows[0].status
    };
    assert_eq!(run(false), FlowStatus::Completed);
    assert_eq!(run(true), FlowStatus::Failed);
}

#[test]
fn identical_seeds_give_identical_results() {
    let topo = Arc::new(build_fat_tree(4, LinkParams::datacenter()).unwrap());
    let run = || {
        let mut w = World::new(topo.clone(), WorldConfig { seed: 9, ..WorldConfig::default() }).unwrap();
        w.install_attack(attack("core0_0", AttackKind::EcnTinker { fraction: 0.05 })).unwrap();
        let hosts: Vec<_> = topo.hosts().collect();
        for i in 0..12 {
            let (s, d) = (hosts[i], hosts[(i * 7 + 5) % hosts.len()]);
            if s != d {
                w.add_flow(FlowSpec { src: s, dst: d, bytes: 200_000, start: SimTime::from_micros(100 * i as u64) }).unwrap();
            }
        }
        let (out, _) = w.run(SimTime::from_secs(30));
        out.flows.iter().map(|f| f.csv_row(|n| topo.node(n).name.clone())).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}
