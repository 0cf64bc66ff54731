use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Blamed, Monitor, Verdict, VerdictInput};
use crate::simcore::SimTime;
use crate::topology::{FiveTuple, LinkId, NodeId, Role, Topology};
use crate::transport::{Packet, Probe, Protocol, TcpFlags};
use crate::world::{Observation, Observer, ObserverCtx};

/// Per-target probe outcome tally.
#[derive(Clone, Copy, Debug, Default)]
struct Tally {
    sent: u64,
    slow: u64,
    answered: u64,
}

/// Outstanding probes: id → (target index, send time).
#[derive(Default)]
struct Outstanding {
    pending: HashMap<u64, (usize, SimTime)>,
    next_id: u64,
}

impl Outstanding {
    fn issue(&mut self, target: usize, now: SimTime) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.pending.insert(id, (target, now));
        id
    }

    /// Marks `id` answered; returns its target if it was outstanding.
    fn answer(&mut self, id: u64) -> Option<(usize, SimTime)> {
        self.pending.remove(&id)
    }

    /// Probes sent before `cutoff` and never answered, per target.
    fn lost_before(&self, cutoff: SimTime, n: usize) -> Vec<u64> {
        let mut lost = vec![0; n];
        for &(t, sent) in self.pending.values() {
            if sent <= cutoff {
                lost[t] += 1;
            }
        }
        lost
    }

    fn young_since(&self, cutoff: SimTime, n: usize) -> Vec<u64> {
        let mut young = vec![0; n];
        for &(t, sent) in self.pending.values() {
            if sent > cutoff {
                young[t] += 1;
            }
        }
        young
    }
}

/// (judged probes, failed probes) per target, leaving out probes that might
/// still be answered.
fn judge(tallies: &[Tally], out: &Outstanding, end: SimTime, timeout: SimTime) -> Vec<(u64, u64)> {
    let cutoff = end.saturating_sub(timeout);
    let lost = out.lost_before(cutoff, tallies.len());
    let young = out.young_since(cutoff, tallies.len());
    tallies
        .iter()
        .enumerate()
        .map(|(i, t)| (t.sent - young[i], lost[i] + t.slow))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PingmeshConfig {
    pub interval_ms: f64,
    pub start_s: f64,
    pub duration_s: f64,
    /// A probe slower than this counts as a failure.
    pub rtt_threshold_us: f64,
    pub timeout_ms: f64,
    /// A pair is bad when its failed-probe fraction exceeds this.
    pub loss_threshold: f64,
    pub min_probes: u64,
}

impl Default for PingmeshConfig {
    fn default() -> Self {
        PingmeshConfig {
            interval_ms: 100.0,
            start_s: 0.0,
            duration_s: 2.0,
            rtt_threshold_us: 5000.0,
            timeout_ms: 100.0,
            loss_threshold: 0.05,
            min_probes: 10,
        }
    }
}

const PING_PORT: u16 = 7;

/// All-pairs TCP pings between hosts, with rotating source ports so that
/// successive probes of a pair explore different ECMP paths. Bad pairs are
/// aggregated per ToR, the level at which the real system localizes.
pub struct Pingmesh {
    name: String,
    cfg: PingmeshConfig,
    pairs: Vec<(NodeId, NodeId)>,
    tallies: Vec<Tally>,
    out: Outstanding,
    round: u64,
}

impl Pingmesh {
    pub fn new(name: &str, cfg: PingmeshConfig, topo: &Topology) -> Self {
        let hosts: Vec<NodeId> = topo.hosts().collect();
        let pairs: Vec<_> = hosts.iter().flat_map(|&a| hosts.iter().filter(move |&&b| b != a).map(move |&b| (a, b))).collect();
        Pingmesh { name: name.to_string(), cfg, tallies: vec![Tally::default(); pairs.len()], pairs, out: Outstanding::default(), round: 0 }
    }

    fn interval(&self) -> SimTime {
        SimTime::from_secs_f64(self.cfg.interval_ms / 1000.0)
    }
}

impl Observer for Pingmesh {
    fn start(&mut self, ctx: &mut ObserverCtx) {
        ctx.schedule(SimTime::from_secs_f64(self.cfg.start_s), 0);
    }

    fn on_tick(&mut self, _tag: u64, ctx: &mut ObserverCtx) {
        let now = ctx.now;
        for (i, &(src, dst)) in self.pairs.iter().enumerate() {
            let id = self.out.issue(i, now);
            self.tallies[i].sent += 1;
            let sport = 20_000 + ((self.round * 7919 + i as u64 * 31) % 40_000) as u16;
            let tuple = FiveTuple { src, dst, sport, dport: PING_PORT, proto: Protocol::Tcp.number() };
            let mut pkt = Packet::tcp(tuple, 0, 0, TcpFlags::SYN);
            pkt.probe = Some(Probe::Ping { id, sent: now, echo: false });
            ctx.send(src, pkt);
        }
        self.round += 1;
        let next = now + self.interval();
        if next.as_secs_f64() < self.cfg.start_s + self.cfg.duration_s {
            ctx.schedule(next, 0);
        }
    }

    fn observe(&mut self, obs: &Observation, ctx: &mut ObserverCtx) {
        if let Observation::HostDeliver { pkt, .. } = obs {
            if let Some(Probe::Ping { id, sent, echo: true }) = pkt.probe {
                if let Some((i, _)) = self.out.answer(id) {
                    let t = &mut self.tallies[i];
                    t.answered += 1;
                    if (ctx.now - sent).as_secs_f64() * 1e6 > self.cfg.rtt_threshold_us {
                        t.slow += 1;
                    }
                }
            }
        }
    }
}

impl Monitor for Pingmesh {
    fn name(&self) -> &str {
        &self.name
    }

    fn verdict(&self, input: &VerdictInput) -> Verdict {
        let timeout = SimTime::from_secs_f64(self.cfg.timeout_ms / 1000.0);
        let judged = judge(&self.tallies, &self.out, input.end, timeout);
        let mut per_tor: BTreeMap<NodeId, f64> = BTreeMap::new();
        for (i, &(n, failed)) in judged.iter().enumerate() {
            if n >= self.cfg.min_probes && failed as f64 / n as f64 > self.cfg.loss_threshold {
                let (a, b) = self.pairs[i];
                for h in [a, b] {
                    if let Some(tor) = input.topo.edge_switch(h) {
                        *per_tor.entry(tor).or_default() += 1.0;
                    }
                }
            }
        }
        let top = per_tor.values().copied().fold(0.0, f64::max);
        let blamed = per_tor.into_iter().filter(|&(_, c)| c >= top && top > 0.0).map(|(t, c)| (Blamed::Node(t), c)).collect();
        Verdict::blaming(&self.name, blamed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetBouncerConfig {
    pub interval_ms: f64,
    pub start_s: f64,
    pub duration_s: f64,
    pub rtt_threshold_us: f64,
    pub timeout_ms: f64,
    /// A link is bad when its inferred failure ratio exceeds this ...
    pub loss_threshold: f64,
    /// ... and is within this fraction of the worst link's ratio.
    pub top_fraction: f64,
    pub min_probes: u64,
}

impl Default for NetBouncerConfig {
    fn default() -> Self {
        NetBouncerConfig {
            interval_ms: 50.0,
            start_s: 0.0,
            duration_s: 2.0,
            rtt_threshold_us: 5000.0,
            timeout_ms: 100.0,
            loss_threshold: 0.01,
            top_fraction: 0.75,
            min_probes: 10,
        }
    }
}

/// Source-routed probes from every host up to every core and back, so each
/// probe exercises one known path. Link health is inferred from the paths
/// that cross it.
pub struct NetBouncer {
    name: String,
    cfg: NetBouncerConfig,
    /// (origin host, route) per probe path.
    paths: Vec<(NodeId, Arc<[NodeId]>)>,
    path_links: Vec<Vec<LinkId>>,
    tallies: Vec<Tally>,
    out: Outstanding,
    round: u64,
}

impl NetBouncer {
    pub fn new(name: &str, cfg: NetBouncerConfig, topo: &Topology) -> Self {
        let mut paths = Vec::new();
        for h in topo.hosts() {
            let Some(tor) = topo.edge_switch(h) else { continue };
            let pod = topo.node(tor).pod;
            for core in topo.with_role(Role::Core) {
                let group = topo.node(core).pod;
                let agg = topo
                    .with_role(Role::Agg)
                    .find(|&a| topo.node(a).pod == pod && topo.node(a).index == group && topo.link_between(a, core).is_some());
                if let Some(agg) = agg {
                    let route: Arc<[NodeId]> = Arc::from(vec![h, tor, agg, core, agg, tor, h]);
                    paths.push((h, route));
                }
            }
        }
        let path_links = paths
            .iter()
            .map(|(_, r)| r.windows(2).filter_map(|w| topo.link_between(w[0], w[1])).collect())
            .collect();
        NetBouncer {
            name: name.to_string(),
            cfg,
            tallies: vec![Tally::default(); paths.len()],
            paths,
            path_links,
            out: Outstanding::default(),
            round: 0,
        }
    }

    pub fn path_count(&self) -> usize {
        self.paths.len()
    }
}

impl Observer for NetBouncer {
    fn start(&mut self, ctx: &mut ObserverCtx) {
        ctx.schedule(SimTime::from_secs_f64(self.cfg.start_s), 0);
    }

    fn on_tick(&mut self, _tag: u64, ctx: &mut ObserverCtx) {
        let now = ctx.now;
        for (i, (h, route)) in self.paths.iter().enumerate() {
            let id = self.out.issue(i, now);
            self.tallies[i].sent += 1;
            let sport = 40_000 + (self.round % 20_000) as u16;
            let tuple = FiveTuple { src: *h, dst: *h, sport, dport: 0, proto: Protocol::Udp.number() };
            let mut pkt = Packet::tcp(tuple, 0, 0, TcpFlags::empty());
            pkt.proto = Protocol::Udp;
            pkt.probe = Some(Probe::Bounce { id, sent: now, route: Arc::clone(route), pos: 0 });
            ctx.send(*h, pkt);
        }
        self.round += 1;
        let next = now + SimTime::from_secs_f64(self.cfg.interval_ms / 1000.0);
        if next.as_secs_f64() < self.cfg.start_s + self.cfg.duration_s {
            ctx.schedule(next, 0);
        }
    }

    fn observe(&mut self, obs: &Observation, ctx: &mut ObserverCtx) {
        if let Observation::HostDeliver { pkt, .. } = obs {
            if let Some(Probe::Bounce { id, sent, .. }) = pkt.probe {
                if let Some((i, _)) = self.out.answer(id) {
                    let t = &mut self.tallies[i];
                    t.answered += 1;
                    if (ctx.now - sent).as_secs_f64() * 1e6 > self.cfg.rtt_threshold_us {
                        t.slow += 1;
                    }
                }
            }
        }
    }
}

impl Monitor for NetBouncer {
    fn name(&self) -> &str {
        &self.name
    }

    fn verdict(&self, input: &VerdictInput) -> Verdict {
        let timeout = SimTime::from_secs_f64(self.cfg.timeout_ms / 1000.0);
        let judged = judge(&self.tallies, &self.out, input.end, timeout);
        let mut through: BTreeMap<LinkId, (u64, u64)> = BTreeMap::new();
        for (i, &(n, failed)) in judged.iter().enumerate() {
            for &l in &self.path_links[i] {
                let e = through.entry(l).or_default();
                e.0 += n;
                e.1 += failed;
            }
        }
        let ratios: Vec<(LinkId, f64)> = through
            .into_iter()
            .filter(|&(_, (n, _))| n >= self.cfg.min_probes)
            .map(|(l, (n, f))| (l, f as f64 / n as f64))
            .collect();
        let worst = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
        let blamed = ratios
            .into_iter()
            .filter(|&(_, r)| r > self.cfg.loss_threshold && r >= self.cfg.top_fraction * worst)
            .map(|(l, r)| (Blamed::Link(l), r))
            .collect();
        Verdict::blaming(&self.name, blamed)
    }
}
