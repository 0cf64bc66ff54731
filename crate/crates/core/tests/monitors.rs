use radarsim::dataplane::{AttackConfig, AttackKind, TargetSelector, TracerouteMode};
use radarsim::harness::{run_scenario, PoissonWorkload, RunReport, Scenario, SizeDist, TopologySpec, WorkloadPart};
use radarsim::monitors::{FbMonConfig, MirrorConfig, MonitorConfig, O07Config, SamplerConfig, VerdictClass};
use radarsim::topology::LinkParams;
use radarsim::world::LinkFault;

fn attack(switch: &str, kind: AttackKind) -> AttackConfig {
    AttackConfig { switch: switch.into(), kind, target: TargetSelector::default(), budget: None }
}

fn fat_tree(name: &str, seed: u64, load: f64, horizon_s: f64, monitors: Vec<MonitorConfig>) -> Scenario {
    let mut s = Scenario::new(name, TopologySpec::FatTree { k: 4, link: LinkParams::datacenter() }, horizon_s);
    s.seed = seed;
    s.workload.push(WorkloadPart::Poisson(PoissonWorkload {
        load,
        sizes: SizeDist::Websearch,
        duration_s: 1.0,
        start_s: 0.0,
        dst_pod: None,
        dst_pod_share: 1.0,
    }));
    s.monitors = monitors;
    s
}

fn class(r: &RunReport, monitor: &str) -> (VerdictClass, Vec<String>) {
    let v = r.attacked.verdict(monitor).unwrap();
    (v.class, v.blamed.clone())
}

#[test]
fn healthy_network_raises_no_alarm() {
    let r = run_scenario(&fat_tree("rest", 2, 0.2, 10.0, MonitorConfig::matrix_columns()), false).unwrap();
    for v in &r.baseline.verdicts {
        assert!(!v.alarm, "{} alarmed on {:?}", v.monitor, v.blamed);
        assert_eq!(v.class, VerdictClass::Undetected);
    }
}

#[test]
fn samplers_flag_a_blunt_lossy_link() {
    let cfg = SamplerConfig { one_in: 10, ..SamplerConfig::default() };
    let mut s = fat_tree("lossy", 1, 0.1, 10.0, vec![MonitorConfig::Sflow(cfg.clone()), MonitorConfig::Netflow(cfg)]);
    s.faults.push(LinkFault { from: "agg0_0".into(), to: "core0_0".into(), drop_prob: 0.2 });
    let r = run_scenario(&s, false).unwrap();
    for m in ["sFlow", "NetFlow"] {
        let v = r.attacked.verdict(m).unwrap();
        assert!(v.alarm, "{m} missed the lossy link");
        assert!(v.blamed.iter().any(|b| b == "agg0_0->core0_0"), "{m} blamed {:?}", v.blamed);
    }
}

#[test]
fn mirroring_control_packets_localizes_syn_drop() {
    let mut s = fat_tree("syn", 1, 0.1, 20.0, vec![MonitorConfig::Everflow(MirrorConfig::default())]);
    s.attacks.push(attack("core0_0", AttackKind::SynDrop { max_drops: Some(6) }));
    let r = run_scenario(&s, false).unwrap();
    let (c, blamed) = class(&r, "Everflow");
    assert_eq!(c, VerdictClass::Localized, "blamed {blamed:?}");
    assert!(blamed.iter().any(|b| b.contains("core0_0")));
}

#[test]
fn forged_traceroute_answers_misdirect_tomography() {
    let run = |spoof: bool| {
        let mut s = fat_tree("seq", 1, 0.1, 15.0, vec![MonitorConfig::O07(O07Config::default())]);
        s.attacks.push(attack("core0_0", AttackKind::SameSeqDrop { nth: 1, max_drops: Some(5) }));
        if spoof {
            s.attacks.push(attack("core0_0", AttackKind::MisdirectTraceroute { mode: TracerouteMode::Knowledge }));
        }
        class(&run_scenario(&s, false).unwrap(), "007")
    };
    let (honest, blamed) = run(false);
    assert_eq!(honest, VerdictClass::Localized, "blamed {blamed:?}");
    let (spoofed, blamed) = run(true);
    assert!(spoofed.evaded(), "spoofed traceroute still localized: {blamed:?}");
}

#[test]
fn rewritten_core_tags_misdirect_path_outliers() {
    let run = |rewrite: bool| {
        let mut s = fat_tree("cwnd", 1, 0.1, 10.0, vec![MonitorConfig::FbMon(FbMonConfig::default())]);
        s.attacks.push(attack("core0_0", AttackKind::CwndTinker { window: 1 }));
        if rewrite {
            s.attacks.push(attack("core0_0", AttackKind::MisdirectCoreId { fake_core: "core1_1".into() }));
        }
        class(&run_scenario(&s, false).unwrap(), "FB-mon")
    };
    let (honest, blamed) = run(false);
    assert_eq!(honest, VerdictClass::Localized, "blamed {blamed:?}");
    let (rewritten, blamed) = run(true);
    assert_eq!(rewritten, VerdictClass::Misdirected, "blamed {blamed:?}");
    assert!(blamed.iter().all(|b| b.contains("core1_1")));
}

#[test]
fn passive_monitors_do_not_change_traffic() {
    let passive = vec![
        MonitorConfig::Sflow(SamplerConfig::default()),
        MonitorConfig::Netflow(SamplerConfig::default()),
        MonitorConfig::FbMon(FbMonConfig::default()),
        MonitorConfig::Everflow(MirrorConfig::default()),
    ];
    let rows = |monitors: Vec<MonitorConfig>| {
        let mut s = fat_tree("obs", 3, 0.2, 10.0, monitors);
        s.attacks.push(attack("core0_0", AttackKind::EcnTinker { fraction: 0.2 }));
        let r = run_scenario(&s, false).unwrap();
        let name = |n| r.topology.node(n).name.clone();
        (r.attacked.flows.iter().map(|f| f.csv_row(name)).collect::<Vec<_>>(), r.attacked.network.clone())
    };
    assert_eq!(rows(Vec::new()), rows(passive));
}
