use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{Blamed, Monitor, Verdict, VerdictInput};
use crate::topology::{FiveTuple, LinkId, NodeId, Topology};
use crate::transport::{Packet, Probe, TcpFlags};
use crate::world::{Observation, Observer, ObserverCtx};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct O07Config {
    /// Probes with TTL 1..=max_ttl are sent per traceroute.
    pub max_ttl: u8,
    /// No alarm is raised on fewer usable traceroutes than this.
    pub min_traces: usize,
}

impl Default for O07Config {
    fn default() -> Self {
        O07Config { max_ttl: 8, min_traces: 3 }
    }
}

struct Trace {
    src: NodeId,
    dst: NodeId,
    hops: BTreeMap<u8, NodeId>,
}

/// Reconstructed path `src → … → dst`, or `None` when replies are missing or
/// the hops do not form a walk in the topology.
fn reconstruct(t: &Trace, topo: &Topology) -> Option<Vec<NodeId>> {
    let mut path = vec![t.src];
    for ttl in 1..=u8::MAX {
        let hop = *t.hops.get(&ttl)?;
        path.push(hop);
        if hop == t.dst {
            break;
        }
    }
    path.windows(2).all(|w| topo.link_between(w[0], w[1]).is_some()).then_some(path)
}

/// Retransmission-triggered traceroutes plus link voting. Each flow that
/// retransmits data is traced once with its own five-tuple, so the probes
/// follow the flow's ECMP path; every link on a reconstructed path receives
/// a vote of 1/(path length).
pub struct O07 {
    name: String,
    cfg: O07Config,
    traced: HashSet<u32>,
    traces: Vec<Trace>,
}

impl O07 {
    pub fn new(name: &str, cfg: O07Config) -> Self {
        O07 { name: name.to_string(), cfg, traced: HashSet::new(), traces: Vec::new() }
    }

    pub fn traces_started(&self) -> usize {
        self.traces.len()
    }

    /// Reported paths, one per usable traceroute.
    pub fn paths(&self, topo: &Topology) -> Vec<Vec<NodeId>> {
        self.traces.iter().filter_map(|t| reconstruct(t, topo)).collect()
    }

    pub fn votes(&self, topo: &Topology) -> (usize, BTreeMap<LinkId, f64>) {
        let paths = self.paths(topo);
        let mut votes: BTreeMap<LinkId, f64> = BTreeMap::new();
        for p in &paths {
            let share = 1.0 / (p.len() - 1) as f64;
            for w in p.windows(2) {
                if let Some(l) = topo.link_between(w[0], w[1]) {
                    *votes.entry(l).or_default() += share;
                }
            }
        }
        (paths.len(), votes)
    }

    fn launch(&mut self, tuple: FiveTuple, ctx: &mut ObserverCtx) {
        let idx = self.traces.len() as u64;
        self.traces.push(Trace { src: tuple.src, dst: tuple.dst, hops: BTreeMap::new() });
        for ttl in 1..=self.cfg.max_ttl {
            let mut pkt = Packet::tcp(tuple, 0, 0, TcpFlags::empty());
            pkt.ttl = ttl;
            pkt.probe = Some(Probe::Traceroute { id: idx << 8 | ttl as u64, initial_ttl: ttl });
            ctx.send(tuple.src, pkt);
        }
    }
}

impl Observer for O07 {
    fn observe(&mut self, obs: &Observation, ctx: &mut ObserverCtx) {
        match obs {
            Observation::Retransmission { flow, tuple, .. } => {
                if self.traced.insert(*flow) {
                    self.launch(*tuple, ctx);
                }
            }
            Observation::HostDeliver { pkt, .. } => {
                if let Some(Probe::TimeExceeded { probe_id, initial_ttl, responder }) = pkt.probe {
                    if let Some(t) = self.traces.get_mut((probe_id >> 8) as usize) {
                        t.hops.entry(initial_ttl).or_insert(responder);
                    }
                }
            }
            _ => {}
        }
    }
}

impl Monitor for O07 {
    fn name(&self) -> &str {
        &self.name
    }

    fn verdict(&self, input: &VerdictInput) -> Verdict {
        let (usable, votes) = self.votes(input.topo);
        if usable < self.cfg.min_traces {
            return Verdict::quiet(&self.name);
        }
        let top = votes.values().copied().fold(0.0, f64::max);
        let blamed = votes.into_iter().filter(|&(_, v)| v >= top - 1e-9).map(|(l, v)| (Blamed::Link(l), v)).collect();
        Verdict::blaming(&self.name, blamed)
    }
}
