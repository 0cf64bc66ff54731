use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{Blamed, Monitor, Verdict, VerdictInput};
use crate::simcore::SimTime;
use crate::topology::{LinkId, NodeId, Role};
use crate::transport::{Packet, Protocol, TcpFlags};
use crate::world::{Observation, Observer, ObserverCtx};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MirrorConfig {
    pub mirror_syn: bool,
    pub mirror_rst: bool,
    pub mirror_fin: bool,
    /// Also mirror data segments and pure ACKs, up to `data_capacity` packets.
    pub mirror_data: bool,
    pub data_capacity: u64,
    /// Packets put on a link this close to the end may still be in flight.
    pub grace_ms: f64,
}

impl Default for MirrorConfig {
    fn default() -> Self {
        MirrorConfig {
            mirror_syn: true,
            mirror_rst: true,
            mirror_fin: true,
            mirror_data: false,
            data_capacity: 200_000,
            grace_ms: 50.0,
        }
    }
}

#[derive(Default)]
struct LinkTally {
    balance: i64,
    last_put: SimTime,
}

/// Everflow-style match-and-mirror of TCP control packets. Every switch
/// mirrors matching packets at ingress and egress and reports its own benign
/// discards (queue overflow, no route). The collector then looks for packets
/// that vanish inside a switch, appear out of nowhere, or vanish on a wire.
pub struct Mirror {
    name: String,
    cfg: MirrorConfig,
    /// (switch, digest) → ingress − egress − reported discards.
    at_switch: HashMap<(NodeId, u64), i64>,
    /// (link, digest) → egress at the near end − ingress at the far end.
    on_link: HashMap<(LinkId, u64), LinkTally>,
    admitted: HashSet<u64>,
    data_mirrored: u64,
    /// Set once the data rule had to be cut for lack of collector capacity.
    pub truncated: bool,
}

impl Mirror {
    pub fn new(name: &str, cfg: MirrorConfig) -> Self {
        Mirror {
            name: name.to_string(),
            cfg,
            at_switch: HashMap::new(),
            on_link: HashMap::new(),
            admitted: HashSet::new(),
            data_mirrored: 0,
            truncated: false,
        }
    }

    fn matches(&mut self, pkt: &Packet) -> bool {
        if pkt.proto != Protocol::Tcp || pkt.is_probe() {
            return false;
        }
        let c = &self.cfg;
        if (c.mirror_syn && pkt.has(TcpFlags::SYN)) || (c.mirror_rst && pkt.has(TcpFlags::RST)) || (c.mirror_fin && pkt.has(TcpFlags::FIN)) {
            return true;
        }
        if !c.mirror_data {
            return false;
        }
        if self.admitted.contains(&pkt.uid) {
            return true;
        }
        if self.data_mirrored < c.data_capacity {
            self.data_mirrored += 1;
            self.admitted.insert(pkt.uid);
            true
        } else {
            self.truncated = true;
            false
        }
    }

    pub fn data_mirrored(&self) -> u64 {
        self.data_mirrored
    }
}

impl Observer for Mirror {
    fn observe(&mut self, obs: &Observation, ctx: &mut ObserverCtx) {
        match *obs {
            Observation::SwitchIngress { node, pkt, .. } if self.matches(pkt) => {
                *self.at_switch.entry((node, pkt.digest())).or_default() += 1;
            }
            Observation::SwitchEgress { node, link, pkt } if self.matches(pkt) => {
                let d = pkt.digest();
                *self.at_switch.entry((node, d)).or_default() -= 1;
                if ctx.topo.node(ctx.topo.link(link).to).role != Role::Host {
                    let t = self.on_link.entry((link, d)).or_default();
                    t.balance += 1;
                    t.last_put = ctx.now;
                }
            }
            Observation::QueueDrop { link, pkt } if self.matches(pkt) => {
                let d = pkt.digest();
                let node = ctx.topo.link(link).from;
                if ctx.topo.node(node).role != Role::Host {
                    *self.at_switch.entry((node, d)).or_default() -= 1;
                    // egress was already counted; the far end will never see it
                    if let Some(t) = self.on_link.get_mut(&(link, d)) {
                        t.balance -= 1;
                    }
                }
            }
            Observation::Discard { node, pkt } if self.matches(pkt) => {
                *self.at_switch.entry((node, pkt.digest())).or_default() -= 1;
            }
            Observation::LinkDeliver { link, pkt } if self.matches(pkt) => {
                let to = ctx.topo.link(link).to;
                if ctx.topo.node(ctx.topo.link(link).from).role != Role::Host && ctx.topo.node(to).role != Role::Host {
                    self.on_link.entry((link, pkt.digest())).or_default().balance -= 1;
                }
            }
            _ => {}
        }
    }
}

impl Monitor for Mirror {
    fn name(&self) -> &str {
        &self.name
    }

    fn verdict(&self, input: &VerdictInput) -> Verdict {
        let cutoff = input.end.saturating_sub(SimTime::from_secs_f64(self.cfg.grace_ms / 1000.0));
        let mut score: BTreeMap<Blamed, f64> = BTreeMap::new();
        for (&(node, _), &bal) in &self.at_switch {
            if bal != 0 {
                *score.entry(Blamed::Node(node)).or_default() += bal.unsigned_abs() as f64;
            }
        }
        for (&(link, _), t) in &self.on_link {
            if t.balance != 0 && t.last_put <= cutoff {
                *score.entry(Blamed::Link(link)).or_default() += t.balance.unsigned_abs() as f64;
            }
        }
        Verdict::blaming(&self.name, score.into_iter().collect())
    }
}
