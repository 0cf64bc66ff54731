//! Models of deployed monitoring systems and the verdict engine that decides
//! whether a monitor missed an attack, blamed the wrong devices, or found it.
//!
//! Monitors are observers: they see packets through [`Observation`]s and may
//! inject their own probes, but never touch anyone else's traffic.

mod fbmon;
mod mirror;
mod o07;
mod prober;
mod sampler;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::simcore::SimTime;
use crate::topology::{LinkId, NodeId, Topology};
use crate::transport::FlowResult;
use crate::world::{Observation, Observer, ObserverCtx};

pub use fbmon::{FbMon, FbMonConfig};
pub use mirror::{Mirror, MirrorConfig};
pub use o07::{O07Config, O07};
pub use prober::{NetBouncer, NetBouncerConfig, Pingmesh, PingmeshConfig};
pub use sampler::{SampleMode, Sampler, SamplerConfig};

/// Something a monitor can point at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Blamed {
    Node(NodeId),
    Link(LinkId),
}

impl Blamed {
    pub fn describe(&self, topo: &Topology) -> String {
        match *self {
            Blamed::Node(n) => topo.node(n).name.clone(),
            Blamed::Link(l) => {
                let link = topo.link(l);
                format!("{}->{}", topo.node(link.from).name, topo.node(link.to).name)
            }
        }
    }

    /// A link is implicated when either end is.
    pub fn touches(&self, topo: &Topology, nodes: &BTreeSet<NodeId>) -> bool {
        match *self {
            Blamed::Node(n) => nodes.contains(&n),
            Blamed::Link(l) => {
                let link = topo.link(l);
                nodes.contains(&link.from) || nodes.contains(&link.to)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub monitor: String,
    pub alarm: bool,
    /// Blamed entities with a monitor-specific confidence score.
    pub blamed: Vec<(Blamed, f64)>,
}

impl Verdict {
    pub fn quiet(monitor: &str) -> Self {
        Verdict { monitor: monitor.to_string(), alarm: false, blamed: Vec::new() }
    }

    /// Alarm iff something is blamed.
    pub fn blaming(monitor: &str, mut blamed: Vec<(Blamed, f64)>) -> Self {
        blamed.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Verdict { monitor: monitor.to_string(), alarm: !blamed.is_empty(), blamed }
    }

    pub fn blamed_names(&self, topo: &Topology) -> Vec<String> {
        self.blamed.iter().map(|(b, _)| b.describe(topo)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerdictClass {
    Undetected,
    Misdirected,
    Localized,
}

impl VerdictClass {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictClass::Undetected => "Undetected",
            VerdictClass::Misdirected => "Misdirected",
            VerdictClass::Localized => "Localized",
        }
    }

    /// Whether the attack got past the monitor (a check mark in the matrix).
    pub fn evaded(self) -> bool {
        self != VerdictClass::Localized
    }
}

impl fmt::Display for VerdictClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn classify_verdict(v: &Verdict, compromised: &BTreeSet<NodeId>, topo: &Topology) -> VerdictClass {
    if !v.alarm {
        VerdictClass::Undetected
    } else if v.blamed.iter().any(|(b, _)| b.touches(topo, compromised)) {
        VerdictClass::Localized
    } else {
        VerdictClass::Misdirected
    }
}

pub const VERDICT_CSV_HEADER: &str = "scenario,monitor,alarm,blamed,verdict";

pub fn verdict_csv_row(scenario: &str, v: &Verdict, class: VerdictClass, topo: &Topology) -> String {
    format!("{scenario},{},{},{},{}", v.monitor, v.alarm, v.blamed_names(topo).join(";"), class)
}

/// Everything a monitor may consult when it renders its verdict.
pub struct VerdictInput<'a> {
    pub topo: &'a Topology,
    pub flows: &'a [FlowResult],
    pub end: SimTime,
}

pub trait Monitor: Observer + Send {
    fn name(&self) -> &str;
    fn verdict(&self, input: &VerdictInput) -> Verdict;
}

/// Serializable monitor choice; `build` instantiates it for a topology.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MonitorConfig {
    /// Packet sampling with per-link loss estimation (sFlow-like).
    Sflow(SamplerConfig),
    /// Flow sampling with per-link loss estimation (NetFlow-like).
    Netflow(SamplerConfig),
    #[serde(rename = "007")]
    O07(O07Config),
    Netbouncer(NetBouncerConfig),
    Pingmesh(PingmeshConfig),
    FbMon(FbMonConfig),
    Everflow(MirrorConfig),
}

impl MonitorConfig {
    /// The seven monitors of the evasion matrix, in column order.
    pub fn matrix_columns() -> Vec<MonitorConfig> {
        vec![
            MonitorConfig::Sflow(SamplerConfig::default()),
            MonitorConfig::Netflow(SamplerConfig::default()),
            MonitorConfig::O07(O07Config::default()),
            MonitorConfig::Netbouncer(NetBouncerConfig::default()),
            MonitorConfig::Pingmesh(PingmeshConfig::default()),
            MonitorConfig::FbMon(FbMonConfig::default()),
            MonitorConfig::Everflow(MirrorConfig::default()),
        ]
    }

    pub fn label(&self) -> &'static str {
        match self {
            MonitorConfig::Sflow(_) => "sFlow",
            MonitorConfig::Netflow(_) => "NetFlow",
            MonitorConfig::O07(_) => "007",
            MonitorConfig::Netbouncer(_) => "NetBouncer",
            MonitorConfig::Pingmesh(_) => "Pingmesh",
            MonitorConfig::FbMon(_) => "FB-mon",
            MonitorConfig::Everflow(_) => "Everflow",
        }
    }

    pub fn build(&self, topo: &Topology) -> Box<dyn Monitor> {
        let label = self.label();
        match self {
            MonitorConfig::Sflow(c) => Box::new(Sampler::new(label, SampleMode::Packet, c.clone(), topo)),
            MonitorConfig::Netflow(c) => Box::new(Sampler::new(label, SampleMode::Flow, c.clone(), topo)),
            MonitorConfig::O07(c) => Box::new(O07::new(label, c.clone())),
            MonitorConfig::Netbouncer(c) => Box::new(NetBouncer::new(label, c.clone(), topo)),
            MonitorConfig::Pingmesh(c) => Box::new(Pingmesh::new(label, c.clone(), topo)),
            MonitorConfig::FbMon(c) => Box::new(FbMon::new(label, c.clone())),
            MonitorConfig::Everflow(c) => Box::new(Mirror::new(label, c.clone())),
        }
    }
}

/// Several monitors sharing one simulation. Timer tags are multiplexed by
/// putting the monitor's index in the top 16 bits.
#[derive(Default)]
pub struct MonitorSet {
    monitors: Vec<Box<dyn Monitor>>,
    wants: bool,
}

const TAG_SHIFT: u32 = 48;

impl MonitorSet {
    pub fn new(monitors: Vec<Box<dyn Monitor>>) -> Self {
        let wants = monitors.iter().any(|m| m.wants_packets());
        MonitorSet { monitors, wants }
    }

    pub fn from_configs(configs: &[MonitorConfig], topo: &Topology) -> Self {
        MonitorSet::new(configs.iter().map(|c| c.build(topo)).collect())
    }

    pub fn is_empty(&self) -> bool {
        self.monitors.is_empty()
    }

    pub fn verdicts(&self, input: &VerdictInput) -> Vec<Verdict> {
        self.monitors.iter().map(|m| m.verdict(input)).collect()
    }

    fn tagged(ctx: &mut ObserverCtx, idx: usize, f: impl FnOnce(&mut ObserverCtx)) {
        let before = ctx.ticks.len();
        f(ctx);
        for t in &mut ctx.ticks[before..] {
            debug_assert!(t.1 >> TAG_SHIFT == 0);
            t.1 |= (idx as u64) << TAG_SHIFT;
        }
    }
}

impl Observer for MonitorSet {
    fn wants_packets(&self) -> bool {
        self.wants
    }

    fn start(&mut self, ctx: &mut ObserverCtx) {
        for (i, m) in self.monitors.iter_mut().enumerate() {
            MonitorSet::tagged(ctx, i, |ctx| m.start(ctx));
        }
    }

    fn observe(&mut self, obs: &Observation, ctx: &mut ObserverCtx) {
        for (i, m) in self.monitors.iter_mut().enumerate() {
            if m.wants_packets() {
                MonitorSet::tagged(ctx, i, |ctx| m.observe(obs, ctx));
            }
        }
    }

    fn on_tick(&mut self, tag: u64, ctx: &mut ObserverCtx) {
        let idx = (tag >> TAG_SHIFT) as usize;
        let inner = tag & ((1 << TAG_SHIFT) - 1);
        if let Some(m) = self.monitors.get_mut(idx) {
            MonitorSet::tagged(ctx, idx, |ctx| m.on_tick(inner, ctx));
        }
    }
}

/// Median of a slice (NaN-free); `None` when empty.
pub(crate) fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

/// Linear-interpolation quantile.
pub(crate) fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_fat_tree, LinkParams};

    fn topo() -> Topology {
        build_fat_tree(4, LinkParams::datacenter()).unwrap()
    }

    #[test]
    fn classification_follows_definitions() {
        let t = topo();
        let core = t.by_name("core0_0").unwrap();
        let agg = t.by_name("agg1_0").unwrap();
        let compromised: BTreeSet<_> = [core].into();
        assert_eq!(classify_verdict(&Verdict::quiet("m"), &compromised, &t), VerdictClass::Undetected);
        let v = Verdict::blaming("m", vec![(Blamed::Node(agg), 1.0)]);
        assert_eq!(classify_verdict(&v, &compromised, &t), VerdictClass::Misdirected);
        let v = Verdict::blaming("m", vec![(Blamed::Node(agg), 1.0), (Blamed::Node(core), 0.5)]);
        assert_eq!(classify_verdict(&v, &compromised, &t), VerdictClass::Localized);
        let l = t.link_between(agg, core).unwrap();
        let v = Verdict::blaming("m", vec![(Blamed::Link(l), 1.0)]);
        assert_eq!(classify_verdict(&v, &compromised, &t), VerdictClass::Localized);
    }

    #[test]
    fn alarm_iff_blamed() {
        assert!(!Verdict::blaming("m", vec![]).alarm);
        assert!(Verdict::blaming("m", vec![(Blamed::Node(NodeId(3)), 0.1)]).alarm);
    }

    #[test]
    fn quantiles_interpolate() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), Some(2.5));
        assert_eq!(quantile(&[1.0, 1.0, 1.0, 10.0], 0.75), Some(3.25));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn matrix_columns_are_seven_distinct_monitors() {
        let cols = MonitorConfig::matrix_columns();
        let labels: BTreeSet<_> = cols.iter().map(|c| c.label()).collect();
        assert_eq!(labels.len(), 7);
    }

    #[test]
    fn monitor_config_round_trips_through_json() {
        for c in MonitorConfig::matrix_columns() {
            let s = serde_json::to_string(&c).unwrap();
            let back: MonitorConfig = serde_json::from_str(&s).unwrap();
            assert_eq!(back, c, "{s}");
        }
        let c: MonitorConfig = serde_json::from_str(r#"{"kind": "007"}"#).unwrap();
        assert_eq!(c.label(), "007");
    }
}
