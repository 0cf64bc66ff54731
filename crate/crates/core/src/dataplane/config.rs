use serde::{Deserialize, Serialize};

use super::budget::BudgetConfig;
use super::DataplaneError;
use crate::simcore::SimTime;
use crate::topology::{NodeId, Role, Topology};
use crate::transport::{Packet, Protocol, SERVER_PORT};

/// How a compromised switch fakes traceroute answers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TracerouteMode {
    /// The attacker knows the addressing plan and fabricates replies directly.
    Knowledge,
    /// The attacker re-sources probes to itself, bounces them along another
    /// path and relays the genuine replies.
    Relay,
}

fn one() -> u32 {
    1
}
fn five() -> u32 {
    5
}
fn ten() -> u32 {
    10
}
fn flood_rate() -> f64 {
    1000.0
}
fn second() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackKind {
    SynDrop {
        /// SYNs dropped per flow before the attack lets the flow through.
        #[serde(default)]
        max_drops: Option<u32>,
    },
    SameSeqDrop {
        /// Which data segment of the flow picks the doomed sequence number.
        #[serde(default = "one")]
        nth: u32,
        #[serde(default)]
        max_drops: Option<u32>,
    },
    SynFlood {
        victim: String,
        #[serde(default = "flood_rate")]
        rate_pps: f64,
        #[serde(default)]
        start_s: f64,
        #[serde(default)]
        count: Option<u64>,
        /// Answer SYN-ACKs sent to spoofed sources with the matching ACK.
        #[serde(default)]
        cookie_ack: bool,
    },
    RstTinker {
        #[serde(default = "five")]
        nth: u32,
    },
    AckAndDrop {
        #[serde(default = "ten")]
        nth: u32,
    },
    EcnTinker {
        fraction: f64,
    },
    CwndTinker {
        window: u16,
    },
    Incast {
        victim_pod: u32,
        core: String,
        pp: f64,
        #[serde(default = "second")]
        period_s: f64,
        #[serde(default)]
        epoch_s: f64,
    },
    MisdirectCoreId {
        fake_core: String,
    },
    MisdirectTraceroute {
        mode: TracerouteMode,
    },
}

impl AttackKind {
    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::SynDrop { .. } => "syn_drop",
            AttackKind::SameSeqDrop { .. } => "same_seq_drop",
            AttackKind::SynFlood { .. } => "syn_flood",
            AttackKind::RstTinker { .. } => "rst_tinker",
            AttackKind::AckAndDrop { .. } => "ack_and_drop",
            AttackKind::EcnTinker { .. } => "ecn_tinker",
            AttackKind::CwndTinker { .. } => "cwnd_tinker",
            AttackKind::Incast { .. } => "incast",
            AttackKind::MisdirectCoreId { .. } => "misdirect_core_id",
            AttackKind::MisdirectTraceroute { .. } => "misdirect_traceroute",
        }
    }
}

/// Which application flows an attack goes after. Flows are matched in their
/// client-to-server orientation, so replies of a targeted flow match too.
/// Unset fields match anything.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSelector {
    pub src: Option<String>,
    pub dst: Option<String>,
    pub src_pod: Option<u32>,
    pub dst_pod: Option<u32>,
    pub sport: Option<u16>,
    pub dport: Option<u16>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Name of the compromised switch running this program.
    pub switch: String,
    #[serde(flatten)]
    pub kind: AttackKind,
    #[serde(default)]
    pub target: TargetSelector,
    #[serde(default)]
    pub budget: Option<BudgetConfig>,
}

/// Target selector with names resolved to node ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ResolvedSelector {
    pub src: Option<NodeId>,
    pub dst: Option<NodeId>,
    pub src_pod: Option<u32>,
    pub dst_pod: Option<u32>,
    pub sport: Option<u16>,
    pub dport: Option<u16>,
}

pub(crate) fn resolve_node(topo: &Topology, name: &str) -> Result<NodeId, DataplaneError> {
    topo.by_name(name).ok_or_else(|| DataplaneError::UnknownNode(name.to_string()))
}

/// Pod of a host or pod switch; `None` for cores and foreign addresses.
pub fn pod_of(topo: &Topology, id: NodeId) -> Option<u32> {
    if !topo.contains(id) {
        return None;
    }
    let n = topo.node(id);
    (n.role != Role::Core).then_some(n.pod)
}

impl TargetSelector {
    pub fn resolve(&self, topo: &Topology) -> Result<ResolvedSelector, DataplaneError> {
        Ok(ResolvedSelector {
            src: self.src.as_deref().map(|n| resolve_node(topo, n)).transpose()?,
            dst: self.dst.as_deref().map(|n| resolve_node(topo, n)).transpose()?,
            src_pod: self.src_pod,
            dst_pod: self.dst_pod,
            sport: self.sport,
            dport: self.dport,
        })
    }
}

impl ResolvedSelector {
    /// True for TCP application packets of a targeted flow, in either direction.
    pub fn matches(&self, topo: &Topology, pkt: &Packet) -> bool {
        if pkt.proto != Protocol::Tcp || pkt.is_probe() {
            return false;
        }
        let t = pkt.tuple();
        let t = if t.sport == SERVER_PORT && t.dport != SERVER_PORT { t.reversed() } else { t };
        self.src.is_none_or(|s| s == t.src)
            && self.dst.is_none_or(|d| d == t.dst)
            && self.sport.is_none_or(|p| p == t.sport)
            && self.dport.is_none_or(|p| p == t.dport)
            && self.src_pod.is_none_or(|p| pod_of(topo, t.src) == Some(p))
            && self.dst_pod.is_none_or(|p| pod_of(topo, t.dst) == Some(p))
    }
}

/// Shared on/off schedule of a coordinated attack: on for the first `pp`
/// fraction of every period, counted from `epoch`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseSchedule {
    pub epoch: SimTime,
    pub period: SimTime,
    pub pp: f64,
}

impl PulseSchedule {
    pub fn is_on(&self, now: SimTime) -> bool {
        if self.pp <= 0.0 || now < self.epoch || self.period == SimTime::ZERO {
            return false;
        }
        if self.pp >= 1.0 {
            return true;
        }
        let phase = (now - self.epoch).0 % self.period.0;
        (phase as f64) < self.pp * self.period.0 as f64
    }
}
