//! k-ary fat-trees and single-path test networks, ECMP forwarding, and
//! drop-tail link queues with threshold ECN marking.

mod build;
mod queue;

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::simcore::{mix64, SimTime};

pub use build::{build_fat_tree, build_single_path};
pub use queue::{EcnMarkable, EnqueueOutcome, LinkQueue};

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Host,
    Tor,
    Agg,
    Core,
}

impl Role {
    pub fn is_switch(self) -> bool {
        !matches!(self, Role::Host)
    }
}

#[derive(Clone, Debug)]
pub struct Node {
    pub id: NodeId,
    pub role: Role,
    pub name: String,
    /// Pod index for hosts, ToRs and aggregation switches; core group for cores.
    pub pod: u32,
    /// Position within the pod (or within the core group).
    pub index: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub bandwidth_bps: u64,
    pub prop_delay: SimTime,
    /// Queue capacity in packets, including the one being serialized.
    pub queue_capacity: usize,
    /// Queue depth at which ECN-capable packets get CE on enqueue.
    pub ecn_threshold: usize,
}

impl LinkParams {
    /// ECN threshold defaults to a third of the queue.
    pub fn new(bandwidth_bps: u64, prop_delay: SimTime, queue_capacity: usize) -> Self {
        LinkParams {
            bandwidth_bps,
            prop_delay,
            queue_capacity,
            ecn_threshold: (queue_capacity / 3).max(1),
        }
    }

    /// 5 Mbps, 1 ms one way: the single-switch testbed path (2 ms RTT).
    pub fn testbed_bottleneck() -> Self {
        LinkParams::new(5_000_000, SimTime::from_millis(1), 100)
    }

    /// Fast host attachment for the testbed path, so the bottleneck dominates.
    pub fn testbed_access() -> Self {
        LinkParams::new(1_000_000_000, SimTime::ZERO, 100)
    }

    /// Homogeneous data-center link: 1 Gbps, 5 µs.
    pub fn datacenter() -> Self {
        LinkParams::new(1_000_000_000, SimTime::from_micros(5), 100)
    }

    /// Serialization time of `bytes` on this link, rounded up to the nanosecond.
    pub fn tx_time(&self, bytes: u32) -> SimTime {
        let bits = bytes as u128 * 8 * 1_000_000_000;
        let bw = self.bandwidth_bps as u128;
        SimTime(bits.div_ceil(bw) as u64)
    }
}

#[derive(Clone, Debug)]
pub struct Link {
    pub id: LinkId,
    pub from: NodeId,
    pub to: NodeId,
    pub params: LinkParams,
}

/// Fields hashed for ECMP.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FiveTuple {
    pub src: NodeId,
    pub dst: NodeId,
    pub sport: u16,
    pub dport: u16,
    pub proto: u8,
}

impl FiveTuple {
    pub fn reversed(&self) -> FiveTuple {
        FiveTuple {
            src: self.dst,
            dst: self.src,
            sport: self.dport,
            dport: self.sport,
            proto: self.proto,
        }
    }

    pub fn hash_with(&self, salt: u64) -> u64 {
        let mut h = mix64(salt);
        h = mix64(h ^ ((self.src.0 as u64) << 32 | self.dst.0 as u64));
        h = mix64(h ^ ((self.sport as u64) << 24 | (self.dport as u64) << 8 | self.proto as u64));
        h
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    FatTree { k: u32 },
    SinglePath { switches: u32 },
}

/// Ordered node sequence from a source host to a destination host.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Route(pub Vec<NodeId>);

impl Route {
    pub fn nodes(&self) -> &[NodeId] {
        &self.0
    }

    pub fn links(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.0.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn is_loop_free(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.0.iter().all(|n| seen.insert(*n))
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TopologyError {
    #[error("fat-tree arity k={0} must be even and at least 4")]
    BadArity(u32),
    #[error("single-path network needs at least one switch")]
    NoSwitches,
}

#[derive(Clone, Debug)]
pub struct Topology {
    shape: Shape,
    nodes: Vec<Node>,
    links: Vec<Link>,
    out_links: Vec<Vec<LinkId>>,
    link_by_ends: HashMap<(NodeId, NodeId), LinkId>,
    /// `dist[dst][node]`: hop distance from `node` to `dst`, routing only through switches.
    dist: Vec<Vec<u32>>,
    /// `next[node][dst]`: equal-cost egress links from `node` toward `dst`.
    next: Vec<Vec<Vec<LinkId>>>,
}

const UNREACHABLE: u32 = u32::MAX;

impl Topology {
    pub(crate) fn assemble(shape: Shape, nodes: Vec<Node>, links: Vec<Link>) -> Topology {
        let n = nodes.len();
        let mut out_links = vec![Vec::new(); n];
        let mut link_by_ends = HashMap::new();
        for l in &links {
            out_links[l.from.0 as usize].push(l.id);
            link_by_ends.insert((l.from, l.to), l.id);
        }
        let mut topo = Topology {
            shape,
            nodes,
            links,
            out_links,
            link_by_ends,
            dist: Vec::new(),
            next: Vec::new(),
        };
        topo.compute_routes();
        topo
    }

    fn compute_routes(&mut self) {
        let n = self.nodes.len();
        let mut dist = vec![vec![UNREACHABLE; n]; n];
        for (dst, row) in dist.iter_mut().enumerate() {
            // BFS backwards over incoming links; hosts never act as transit.
            row[dst] = 0;
            let mut frontier = std::collections::VecDeque::from([dst]);
            while let Some(v) = frontier.pop_front() {
                if v != dst && self.nodes[v].role == Role::Host {
                    continue;
                }
                for l in &self.links {
                    if l.to.0 as usize == v && row[l.from.0 as usize] == UNREACHABLE {
                        row[l.from.0 as usize] = row[v] + 1;
                        frontier.push_back(l.from.0 as usize);
                    }
                }
            }
        }
        let mut next = vec![vec![Vec::new(); n]; n];
        for node in 0..n {
            for dst in 0..n {
                let d = dist[dst][node];
                if d == UNREACHABLE || d == 0 {
                    continue;
                }
                for &lid in &self.out_links[node] {
                    let nb = self.links[lid.0 as usize].to;
                    let transit_ok = nb.0 as usize == dst || self.nodes[nb.0 as usize].role.is_switch();
                    if transit_ok && dist[dst][nb.0 as usize] == d - 1 {
                        next[node][dst].push(lid);
                    }
                }
            }
        }
        self.dist = dist;
        self.next = next;
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0 as usize]
    }

    /// Whether `id` names a node of this network (spoofed addresses do not).
    pub fn contains(&self, id: NodeId) -> bool {
        (id.0 as usize) < self.nodes.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0 as usize]
    }

    pub fn link_between(&self, from: NodeId, to: NodeId) -> Option<LinkId> {
        self.link_by_ends.get(&(from, to)).copied()
    }

    pub fn out_links(&self, node: NodeId) -> &[LinkId] {
        &self.out_links[node.0 as usize]
    }

    pub fn neighbors(&self, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.out_links(node).iter().map(|l| self.link(*l).to)
    }

    pub fn hosts(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().filter(|n| n.role == Role::Host).map(|n| n.id)
    }

    pub fn switches(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .filter(|n| n.role.is_switch())
            .map(|n| n.id)
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().filter(move |n| n.role == role).map(|n| n.id)
    }

    pub fn by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().find(|n| n.name == name).map(|n| n.id)
    }

    /// The switch a host hangs off.
    pub fn edge_switch(&self, host: NodeId) -> Option<NodeId> {
        self.neighbors(host).next()
    }

    pub fn distance(&self, from: NodeId, to: NodeId) -> Option<u32> {
        if !self.contains(from) || !self.contains(to) {
            return None;
        }
        let d = self.dist[to.0 as usize][from.0 as usize];
        (d != UNREACHABLE).then_some(d)
    }

    /// Equal-cost egress links from `node` toward `dst`; empty when unroutable.
    pub fn next_hops(&self, node: NodeId, dst: NodeId) -> &[LinkId] {
        if !self.contains(node) || !self.contains(dst) {
            return &[];
        }
        &self.next[node.0 as usize][dst.0 as usize]
    }

    /// ECMP egress at `node` for a packet with this five-tuple. The choice is a
    /// pure function of (tuple, node, salt); `None` means no route.
    pub fn ecmp_next_hop(&self, tuple: &FiveTuple, node: NodeId, salt: u64) -> Option<LinkId> {
        let cands = self.next_hops(node, tuple.dst);
        match cands.len() {
            0 => None,
            1 => Some(cands[0]),
            n => {
                let h = tuple.hash_with(salt ^ mix64(node.0 as u64 + 1));
                Some(cands[(h % n as u64) as usize])
            }
        }
    }

    /// Path a packet with `tuple` takes from `tuple.src` under ECMP.
    pub fn route(&self, tuple: &FiveTuple, salt: u64) -> Option<Route> {
        let mut at = tuple.src;
        let mut path = vec![at];
        while at != tuple.dst {
            let lid = self.ecmp_next_hop(tuple, at, salt)?;
            at = self.link(lid).to;
            path.push(at);
            if path.len() > self.nodes.len() {
                return None;
            }
        }
        Some(Route(path))
    }

    /// Every shortest path from `src` to `dst`, in deterministic order.
    pub fn shortest_paths(&self, src: NodeId, dst: NodeId) -> Vec<Route> {
        let mut out = Vec::new();
        let mut stack = vec![vec![src]];
        while let Some(path) = stack.pop() {
            let last = *path.last().unwrap();
            if last == dst {
                out.push(Route(path));
                continue;
            }
            for lid in self.next_hops(last, dst).iter().rev() {
                let mut p = path.clone();
                p.push(self.link(*lid).to);
                stack.push(p);
            }
        }
        out
    }

    /// Structured text listing of nodes, adjacency and link parameters.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let shape = match self.shape {
            Shape::FatTree { k } => format!("fat-tree k={k}"),
            Shape::SinglePath { switches } => format!("single-path switches={switches}"),
        };
        let _ = writeln!(s, "# topology {shape}");
        let _ = writeln!(s, "nodes {}", self.nodes.len());
        for n in &self.nodes {
            let role = match n.role {
                Role::Host => "host",
                Role::Tor => "tor",
                Role::Agg => "agg",
                Role::Core => "core",
            };
            let _ = writeln!(
                s,
                "node {}\t{}\t{}\tpod={}\tindex={}",
                n.id.0, role, n.name, n.pod, n.index
            );
        }
        let _ = writeln!(s, "links {}", self.links.len());
        for l in &self.links {
            let _ = writeln!(
                s,
                "link {}\t{} -> {}\tbw_bps={}\tdelay_ns={}\tqueue_pkts={}\tecn_pkts={}",
                l.id.0,
                self.node(l.from).name,
                self.node(l.to).name,
                l.params.bandwidth_bps,
                l.params.prop_delay.as_nanos(),
                l.params.queue_capacity,
                l.params.ecn_threshold
            );
        }
        s
    }
}
