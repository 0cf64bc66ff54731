use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::workload::WorkloadPart;
use super::HarnessError;
use crate::dataplane::{AttackConfig, AttackKind};
use crate::monitors::MonitorConfig;
use crate::topology::{build_fat_tree, build_single_path, LinkParams, NodeId, Role, Shape, Topology};
use crate::transport::{ListenerConfig, TcpConfig};
use crate::world::{LinkFault, WorldConfig};

pub const SCHEMA_VERSION: u32 = 1;

fn two() -> u32 {
    2
}
fn one() -> u64 {
    1
}
fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    FatTree {
        k: u32,
        #[serde(default = "LinkParams::datacenter")]
        link: LinkParams,
    },
    /// Two hosts joined by a chain of switches; the defaults give the 5 Mbps,
    /// 2 ms RTT testbed.
    SinglePath {
        #[serde(default = "two")]
        switches: u32,
        #[serde(default = "LinkParams::testbed_bottleneck")]
        bottleneck: LinkParams,
        #[serde(default = "LinkParams::testbed_access")]
        access: LinkParams,
    },
}

impl TopologySpec {
    pub fn build(&self) -> Result<Topology, HarnessError> {
        Ok(match self {
            TopologySpec::FatTree { k, link } => build_fat_tree(*k, *link)?,
            TopologySpec::SinglePath { switches, bottleneck, access } => build_single_path(*switches, *bottleneck, *access)?,
        })
    }
}

/// One experiment: a network, a workload, compromised switches and monitors.
/// The attacked run and its baseline share every seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub topology: TopologySpec,
    #[serde(default)]
    pub workload: Vec<WorkloadPart>,
    #[serde(default)]
    pub attacks: Vec<AttackConfig>,
    #[serde(default)]
    pub monitors: Vec<MonitorConfig>,
    /// Simulated horizon in seconds.
    pub duration_s: f64,
    #[serde(default = "one")]
    pub seed: u64,
    #[serde(default)]
    pub ecmp_salt: Option<u64>,
    #[serde(default)]
    pub tcp: TcpConfig,
    #[serde(default)]
    pub listener: ListenerConfig,
    /// Hosts whose listener answers with SYN cookies.
    #[serde(default)]
    pub syn_cookie_hosts: Vec<String>,
    #[serde(default)]
    pub faults: Vec<LinkFault>,
    #[serde(default = "yes")]
    pub stop_when_done: bool,
    /// Only flows into this pod count towards the damage multipliers.
    #[serde(default)]
    pub report_dst_pod: Option<u32>,
}

impl Scenario {
    pub fn new(name: &str, topology: TopologySpec, duration_s: f64) -> Self {
        Scenario {
            schema_version: SCHEMA_VERSION,
            name: name.to_string(),
            topology,
            workload: Vec::new(),
            attacks: Vec::new(),
            monitors: Vec::new(),
            duration_s,
            seed: 1,
            ecmp_salt: None,
            tcp: TcpConfig::default(),
            listener: ListenerConfig::default(),
            syn_cookie_hosts: Vec::new(),
            faults: Vec::new(),
            stop_when_done: true,
            report_dst_pod: None,
        }
    }

    /// Parses JSON; errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            HarnessError::invalid(if path.is_empty() || path == "." { "<root>" } else { &path }, &e.into_inner().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Read { file: path.display().to_string(), source })?;
        Scenario::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Checks everything that can be checked without running, and returns
    /// the built topology.
    pub fn validate(&self) -> Result<Topology, HarnessError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::invalid("schema_version", &format!("expected {SCHEMA_VERSION}, found {}", self.schema_version)));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(HarnessError::invalid("duration_s", "must be positive"));
        }
        let topo = self.topology.build().map_err(|e| HarnessError::invalid("topology", &e.to_string()))?;
        let pods = match topo.shape() {
            Shape::FatTree { k } => Some(k),
            Shape::SinglePath { .. } => None,
        };
        let node = |name: &str, path: String, want_switch: Option<bool>| -> Result<NodeId, HarnessError> {
            let id = topo.by_name(name).ok_or_else(|| HarnessError::invalid(&path, &format!("no node named '{name}'")))?;
            match want_switch {
                Some(true) if !topo.node(id).role.is_switch() => Err(HarnessError::invalid(&path, &format!("'{name}' is not a switch"))),
                Some(false) if topo.node(id).role != Role::Host => Err(HarnessError::invalid(&path, &format!("'{name}' is not a host"))),
                _ => Ok(id),
            }
        };
        let pod_ok = |p: u32, path: String| -> Result<(), HarnessError> {
            if pods.is_none_or(|n| p >= n) {
                return Err(HarnessError::invalid(&path, &format!("pod {p} does not exist")));
            }
            Ok(())
        };
        for (i, a) in self.attacks.iter().enumerate() {
            let path = format!("attacks[{i}]");
            node(&a.switch, format!("{path}.switch"), Some(true))?;
            match &a.kind {
                AttackKind::SynFlood { victim, .. } => {
                    node(victim, format!("{path}.victim"), Some(false))?;
                }
                AttackKind::Incast { victim_pod, core, .. } => {
                    pod_ok(*victim_pod, format!("{path}.victim_pod"))?;
                    let c = node(core, format!("{path}.core"), Some(true))?;
                    if topo.node(c).role != Role::Core {
                        return Err(HarnessError::invalid(&format!("{path}.core"), &format!("'{core}' is not a core switch")));
                    }
                }
                AttackKind::MisdirectCoreId { fake_core } => {
                    node(fake_core, format!("{path}.fake_core"), Some(true))?;
                }
                _ => {}
            }
            for (field, v) in [("src_pod", a.target.src_pod), ("dst_pod", a.target.dst_pod)] {
                if let Some(p) = v {
                    pod_ok(p, format!("{path}.target.{field}"))?;
                }
            }
            for (field, v) in [("src", &a.target.src), ("dst", &a.target.dst)] {
                if let Some(n) = v {
                    node(n, format!("{path}.target.{field}"), Some(false))?;
                }
            }
        }
        for (i, h) in self.syn_cookie_hosts.iter().enumerate() {
            node(h, format!("syn_cookie_hosts[{i}]"), Some(false))?;
        }
        for (i, f) in self.faults.iter().enumerate() {
            let path = format!("faults[{i}]");
            let (a, b) = (node(&f.from, format!("{path}.from"), None)?, node(&f.to, format!("{path}.to"), None)?);
            if topo.link_between(a, b).is_none() {
                return Err(HarnessError::invalid(&path, "no such link"));
            }
            if !(0.0..=1.0).contains(&f.drop_prob) {
                return Err(HarnessError::invalid(&format!("{path}.drop_prob"), "must be in [0, 1]"));
            }
        }
        if let Some(p) = self.report_dst_pod {
            pod_ok(p, "report_dst_pod".into())?;
        }
        for (i, w) in self.workload.iter().enumerate() {
            if let WorkloadPart::Poisson(p) = w {
                p.validate(&format!("workload[{i}]"), pods)?;
            }
        }
        Ok(topo)
    }

    /// Switches running attack programs.
    pub fn compromised(&self, topo: &Topology) -> BTreeSet<NodeId> {
        self.attacks.iter().filter_map(|a| topo.by_name(&a.switch)).collect()
    }

    pub fn world_config(&self, topo: &Topology, trace: bool) -> WorldConfig {
        let mut cfg = WorldConfig {
            tcp: self.tcp,
            listener: self.listener,
            seed: self.seed,
            trace,
            stop_when_done: self.stop_when_done,
            faults: self.faults.clone(),
            ..WorldConfig::default()
        };
        if let Some(s) = self.ecmp_salt {
            cfg.ecmp_salt = s;
        }
        cfg.listener_overrides = self
            .syn_cookie_hosts
            .iter()
            .filter_map(|h| topo.by_name(h))
            .map(|h| (h, ListenerConfig { syn_cookies: true, ..self.listener }))
            .collect();
        cfg
    }
}
