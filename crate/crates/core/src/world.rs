//! Packet-level network simulation: links with drop-tail queues, switches
//! running ECMP (plus any installed attack programs), hosts running the TCP
//! endpoints, and a passive observer hook for monitors.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataplane::{time_exceeded, AttackConfig, AttackCounters, AttackProgram, DataplaneError, Emitted, SwitchView, Verdict};
use crate::simcore::{EventId, EventQueue, RngStream, SimTime, TraceAction, TraceLog, TraceRecord};
use crate::topology::{EnqueueOutcome, FiveTuple, LinkId, LinkQueue, NodeId, Role, Topology};
use crate::transport::{
    FlowResult, FlowStatus, Listener, ListenerConfig, Packet, Probe, Protocol, Sender, TcpConfig, TcpFlags, SERVER_PORT,
};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum WorldError {
    #[error(transparent)]
    Dataplane(#[from] DataplaneError),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("flow {0}: {1}")]
    BadFlow(u32, String),
    #[error("no link between `{0}` and `{1}`")]
    NoLink(String, String),
}

/// Random loss injected on one link direction (a blunt, non-attacker fault).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkFault {
    pub from: String,
    pub to: String,
    pub drop_prob: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldConfig {
    pub tcp: TcpConfig,
    pub listener: ListenerConfig,
    /// Hosts whose listener uses a different configuration (e.g. SYN cookies).
    pub listener_overrides: Vec<(NodeId, ListenerConfig)>,
    pub seed: u64,
    pub ecmp_salt: u64,
    pub trace: bool,
    /// End the run as soon as every flow has finished.
    pub stop_when_done: bool,
    pub faults: Vec<LinkFault>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            tcp: TcpConfig::default(),
            listener: ListenerConfig::default(),
            listener_overrides: Vec::new(),
            seed: 1,
            ecmp_salt: 0x0ec3_5a17,
            trace: false,
            stop_when_done: true,
            faults: Vec::new(),
        }
    }
}

/// One application transfer from `src` (client) to `dst` (server, port 80).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub src: NodeId,
    pub dst: NodeId,
    pub bytes: u64,
    pub start: SimTime,
}

/// Something a monitor can see. Packets are shown as they are at that point.
#[derive(Clone, Copy, Debug)]
pub enum Observation<'a> {
    /// Packet entering a switch, before any processing.
    SwitchIngress { node: NodeId, from: Option<NodeId>, pkt: &'a Packet },
    /// Packet leaving a switch towards `link`, before queueing.
    SwitchEgress { node: NodeId, link: LinkId, pkt: &'a Packet },
    /// Drop-tail loss at the queue of `link`; switches report these.
    QueueDrop { link: LinkId, pkt: &'a Packet },
    /// Honest switch discarding a packet it cannot route or whose TTL ran out.
    Discard { node: NodeId, pkt: &'a Packet },
    /// Packet arriving at the far end of `link`.
    LinkDeliver { link: LinkId, pkt: &'a Packet },
    /// Monitor traffic (probe replies) reaching its final host.
    HostDeliver { host: NodeId, pkt: &'a Packet },
    /// A client retransmitted a data segment.
    Retransmission { flow: u32, tuple: FiveTuple, seq: u32 },
}

/// Handle through which an observer injects its own probe traffic.
pub struct ObserverCtx<'a> {
    pub now: SimTime,
    pub topo: &'a Topology,
    pub(crate) sends: Vec<(NodeId, Packet)>,
    pub(crate) ticks: Vec<(SimTime, u64)>,
}

impl ObserverCtx<'_> {
    /// Sends `pkt` from host `host`.
    pub fn send(&mut self, host: NodeId, pkt: Packet) {
        self.sends.push((host, pkt));
    }

    /// Requests a call to [`Observer::on_tick`] with `tag` at `at`.
    pub fn schedule(&mut self, at: SimTime, tag: u64) {
        self.ticks.push((at.max(self.now), tag));
    }
}

/// Passive hook into the simulation. Observers never modify foreign packets;
/// they only inject their own through [`ObserverCtx::send`].
pub trait Observer {
    /// False skips per-packet notifications entirely.
    fn wants_packets(&self) -> bool {
        true
    }
    fn start(&mut self, _ctx: &mut ObserverCtx) {}
    fn observe(&mut self, _obs: &Observation, _ctx: &mut ObserverCtx) {}
    fn on_tick(&mut self, _tag: u64, _ctx: &mut ObserverCtx) {}
}

/// Observer that sees nothing.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoObserver;

impl Observer for NoObserver {
    fn wants_packets(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug)]
enum Ev {
    FlowStart(u32),
    Arrive { node: NodeId, link: LinkId, pkt: Packet },
    SenderTimer(u32),
    AttackTick { node: NodeId, idx: usize },
    ObserverTick(u64),
}

struct FlowSlot {
    spec: FlowSpec,
    sender: Sender,
    timer: Option<(SimTime, EventId)>,
    fwd_tag: Option<NodeId>,
    rev_tag: Option<NodeId>,
    started: bool,
    done: bool,
    retx_seen: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkCounters {
    pub packets_injected: u64,
    pub queue_drops: u64,
    pub fault_drops: u64,
    pub unroutable: u64,
    pub ttl_expired: u64,
    pub ce_marks: u64,
}

/// Per-program counters at the end of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub switch: String,
    pub kind: String,
    pub counters: AttackCounters,
}

pub struct RunOutput {
    pub flows: Vec<FlowResult>,
    pub attacks: Vec<AttackReport>,
    pub network: NetworkCounters,
    pub trace: TraceLog,
    pub end_time: SimTime,
    pub events: u64,
}

pub struct World<O: Observer = NoObserver> {
    topo: Arc<Topology>,
    cfg: WorldConfig,
    queue: EventQueue<Ev>,
    links: Vec<LinkQueue>,
    fault_prob: Vec<f64>,
    fault_rng: RngStream,
    programs: Vec<Vec<AttackProgram>>,
    flows: Vec<FlowSlot>,
    by_tuple: HashMap<FiveTuple, u32>,
    listeners: Vec<Option<Listener>>,
    observer: O,
    trace: TraceLog,
    next_uid: u64,
    done_flows: usize,
    counters: NetworkCounters,
    scratch: Vec<Packet>,
}

fn stop_after(t: SimTime, horizon: SimTime) -> bool {
    t > horizon
}

impl World<NoObserver> {
    pub fn new(topo: Arc<Topology>, cfg: WorldConfig) -> Result<Self, WorldError> {
        World::with_observer(topo, cfg, NoObserver)
    }
}

impl<O: Observer> World<O> {
    pub fn with_observer(topo: Arc<Topology>, cfg: WorldConfig, observer: O) -> Result<Self, WorldError> {
        let n_links = topo.links().len();
        let mut fault_prob = vec![0.0; n_links];
        for f in &cfg.faults {
            let a = topo.by_name(&f.from).ok_or_else(|| WorldError::UnknownNode(f.from.clone()))?;
            let b = topo.by_name(&f.to).ok_or_else(|| WorldError::UnknownNode(f.to.clone()))?;
            let l = topo.link_between(a, b).ok_or_else(|| WorldError::NoLink(f.from.clone(), f.to.clone()))?;
            fault_prob[l.0 as usize] = f.drop_prob.clamp(0.0, 1.0);
        }
        let n = topo.nodes().len();
        let mut listeners: Vec<Option<Listener>> = vec![None; n];
        for h in topo.hosts() {
            let lc = cfg
                .listener_overrides
                .iter()
                .find(|(id, _)| *id == h)
                .map(|(_, c)| *c)
                .unwrap_or(cfg.listener);
            listeners[h.0 as usize] = Some(Listener::new(lc, cfg.tcp));
        }
        Ok(World {
            fault_rng: RngStream::new(cfg.seed, "faults"),
            trace: TraceLog::new(cfg.trace),
            queue: EventQueue::new(),
            links: vec![LinkQueue::default(); n_links],
            fault_prob,
            programs: vec![Vec::new(); n],
            flows: Vec::new(),
            by_tuple: HashMap::new(),
            listeners,
            observer,
            next_uid: 1,
            done_flows: 0,
            counters: NetworkCounters::default(),
            scratch: Vec::new(),
            topo,
            cfg,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn observer(&self) -> &O {
        &self.observer
    }

    pub fn into_observer(self) -> O {
        self.observer
    }

    pub fn listener(&self, host: NodeId) -> Option<&Listener> {
        self.listeners.get(host.0 as usize).and_then(Option::as_ref)
    }

    pub fn install_attack(&mut self, cfg: AttackConfig) -> Result<(), WorldError> {
        let seed = self.cfg.seed;
        let prog = AttackProgram::new(cfg, &self.topo, seed)?;
        let node = prog.node();
        let idx = self.programs[node.0 as usize].len();
        if let Some((start, _)) = prog.tick_schedule() {
            self.queue.schedule(start, Ev::AttackTick { node, idx });
        }
        self.programs[node.0 as usize].push(prog);
        Ok(())
    }

    /// Registers a flow and returns its id. Client ports are assigned per source
    /// host so that concurrent flows never share a five-tuple.
    pub fn add_flow(&mut self, spec: FlowSpec) -> Result<u32, WorldError> {
        let id = self.flows.len() as u32;
        let host = |n: NodeId| self.topo.contains(n) && self.topo.node(n).role == Role::Host;
        if !host(spec.src) || !host(spec.dst) || spec.src == spec.dst {
            return Err(WorldError::BadFlow(id, "endpoints must be two distinct hosts".into()));
        }
        let base = 1024 + (id % 60_000) as u16;
        let mut sport = base;
        let tuple = loop {
            let t = FiveTuple { src: spec.src, dst: spec.dst, sport, dport: SERVER_PORT, proto: Protocol::Tcp.number() };
            if !self.by_tuple.contains_key(&t) {
                break t;
            }
            sport = if sport >= 61_000 { 1024 } else { sport + 1 };
            if sport == base {
                return Err(WorldError::BadFlow(id, "out of client ports".into()));
            }
        };
        self.by_tuple.insert(tuple, id);
        self.flows.push(FlowSlot {
            spec,
            sender: Sender::new(self.cfg.tcp, tuple, spec.bytes),
            timer: None,
            fwd_tag: None,
            rev_tag: None,
            started: false,
            done: false,
            retx_seen: 0,
        });
        self.queue.schedule(spec.start, Ev::FlowStart(id));
        Ok(id)
    }

    fn with_ctx(&mut self, f: impl FnOnce(&mut O, &mut ObserverCtx)) {
        let mut ctx = ObserverCtx { now: self.queue.now(), topo: &self.topo, sends: Vec::new(), ticks: Vec::new() };
        f(&mut self.observer, &mut ctx);
        let ObserverCtx { sends, ticks, .. } = ctx;
        for (at, tag) in ticks {
            self.queue.schedule(at, Ev::ObserverTick(tag));
        }
        for (host, pkt) in sends {
            self.send_from_host(host, pkt);
        }
    }

    fn observe(&mut self, obs: Observation) {
        if !self.observer.wants_packets() {
            return;
        }
        let mut ctx = ObserverCtx { now: self.queue.now(), topo: &self.topo, sends: Vec::new(), ticks: Vec::new() };
        self.observer.observe(&obs, &mut ctx);
        let ObserverCtx { sends, ticks, .. } = ctx;
        for (at, tag) in ticks {
            self.queue.schedule(at, Ev::ObserverTick(tag));
        }
        for (host, pkt) in sends {
            self.send_from_host(host, pkt);
        }
    }

    fn record(&mut self, node: NodeId, action: TraceAction, pkt: &Packet, by_attacker: bool) {
        if self.trace.enabled() {
            self.trace.record(TraceRecord { time: self.queue.now(), node: node.0, action, digest: pkt.digest(), by_attacker });
        }
    }

    /// Runs until `horizon` (or until every flow is done, if so configured).
    pub fn run(mut self, horizon: SimTime) -> (RunOutput, O) {
        self.with_ctx(|o, ctx| o.start(ctx));
        let mut events = 0u64;
        while let Some((t, ev)) = self.queue.pop_until(horizon) {
            debug_assert!(!stop_after(t, horizon));
            events += 1;
            self.handle(ev);
            if self.cfg.stop_when_done && self.done_flows == self.flows.len() && !self.flows.is_empty() {
                break;
            }
        }
        let end = self.queue.now();
        let flows = self
            .flows
            .iter()
            .enumerate()
            .map(|(i, f)| {
                // the listener forgets a connection once it sees the FIN
                let delivered = if f.sender.status() == Some(FlowStatus::Completed) {
                    f.spec.bytes
                } else {
                    self.listener(f.spec.dst).and_then(|l| l.connection(&f.sender.tuple())).map_or(0, |r| r.delivered())
                };
                flow_result(i as u32, f, end, delivered)
            })
            .collect();
        let attacks = self
            .programs
            .iter()
            .flatten()
            .map(|p| AttackReport {
                switch: p.config().switch.clone(),
                kind: p.config().kind.name().to_string(),
                counters: p.counters().clone(),
            })
            .collect();
        let out = RunOutput {
            flows,
            attacks,
            network: self.counters.clone(),
            trace: std::mem::take(&mut self.trace),
            end_time: end,
            events,
        };
        (out, self.observer)
    }

    fn handle(&mut self, ev: Ev) {
        match ev {
            Ev::FlowStart(id) => {
                let now = self.queue.now();
                let mut out = std::mem::take(&mut self.scratch);
                let slot = &mut self.flows[id as usize];
                slot.started = true;
                slot.sender.connect(now, &mut out);
                self.after_sender(id, out);
            }
            Ev::SenderTimer(id) => {
                let now = self.queue.now();
                let slot = &mut self.flows[id as usize];
                slot.timer = None;
                let mut out = std::mem::take(&mut self.scratch);
                slot.sender.on_timer(now, &mut out);
                self.after_sender(id, out);
            }
            Ev::Arrive { node, link, pkt } => self.arrive(node, link, pkt),
            Ev::AttackTick { node, idx } => {
                let now = self.queue.now();
                let topo = Arc::clone(&self.topo);
                let view = SwitchView { now, node, topo: &topo, from: None };
                let prog = &mut self.programs[node.0 as usize][idx];
                let (emits, more) = prog.on_tick(&view);
                let next = prog.tick_schedule().map(|(_, iv)| now + iv);
                for e in emits {
                    self.inject_at_switch(node, e);
                }
                if let (true, Some(at)) = (more, next) {
                    self.queue.schedule(at, Ev::AttackTick { node, idx });
                }
            }
            Ev::ObserverTick(tag) => self.with_ctx(|o, ctx| o.on_tick(tag, ctx)),
        }
    }

    fn after_sender(&mut self, id: u32, mut out: Vec<Packet>) {
        let src = self.flows[id as usize].spec.src;
        for pkt in out.drain(..) {
            self.send_from_host(src, pkt);
        }
        self.scratch = out;
        let now = self.queue.now();
        let slot = &mut self.flows[id as usize];
        let retx = slot.sender.stats().retransmissions;
        let new_retx = retx > slot.retx_seen;
        slot.retx_seen = retx;
        if !slot.done && slot.sender.is_finished() {
            slot.done = true;
            self.done_flows += 1;
        }
        let want = slot.sender.next_deadline();
        if want != slot.timer.map(|(t, _)| t) {
            if let Some((_, eid)) = slot.timer.take() {
                self.queue.cancel(eid);
            }
            if let Some(at) = want {
                let eid = self.queue.schedule(at.max(now), Ev::SenderTimer(id));
                self.flows[id as usize].timer = Some((at, eid));
            }
        }
        if new_retx {
            let slot = &self.flows[id as usize];
            let tuple = slot.sender.tuple();
            let seq = slot.sender.stats().retransmitted.last().map(|r| r.1).unwrap_or(0);
            self.observe(Observation::Retransmission { flow: id, tuple, seq });
        }
    }

    fn send_from_host(&mut self, host: NodeId, mut pkt: Packet) {
        if pkt.uid == 0 {
            pkt.uid = self.next_uid;
            self.next_uid += 1;
        }
        self.counters.packets_injected += 1;
        let Some(&link) = self.topo.out_links(host).first() else {
            self.counters.unroutable += 1;
            return;
        };
        self.transmit(link, pkt);
    }

    fn transmit(&mut self, link: LinkId, mut pkt: Packet) {
        let now = self.queue.now();
        let l = self.topo.link(link);
        let (to, params) = (l.to, l.params);
        match self.links[link.0 as usize].enqueue(&params, &mut pkt, now) {
            EnqueueOutcome::Dropped => {
                self.counters.queue_drops += 1;
                let from = self.topo.link(link).from;
                self.record(from, TraceAction::Drop, &pkt, false);
                self.observe(Observation::QueueDrop { link, pkt: &pkt });
            }
            EnqueueOutcome::Accepted { depart, ce } => {
                if ce {
                    self.counters.ce_marks += 1;
                    let from = self.topo.link(link).from;
                    self.record(from, TraceAction::Mark, &pkt, false);
                }
                self.queue.schedule(depart + params.prop_delay, Ev::Arrive { node: to, link, pkt });
            }
        }
    }

    fn arrive(&mut self, node: NodeId, link: LinkId, pkt: Packet) {
        let p = self.fault_prob[link.0 as usize];
        if p > 0.0 && self.fault_rng.uniform01() < p {
            self.counters.fault_drops += 1;
            return;
        }
        self.observe(Observation::LinkDeliver { link, pkt: &pkt });
        let from = self.topo.link(link).from;
        if self.topo.node(node).role == Role::Host {
            self.host_receive(node, pkt);
        } else {
            self.switch_receive(node, Some(from), pkt);
        }
    }

    fn switch_receive(&mut self, node: NodeId, from: Option<NodeId>, mut pkt: Packet) {
        self.observe(Observation::SwitchIngress { node, from, pkt: &pkt });
        let topo = Arc::clone(&self.topo);
        if topo.node(node).role == Role::Core && pkt.proto == Protocol::Tcp && !pkt.is_probe() {
            pkt.core_id_tag = Some(node);
        }
        let mut steer = None;
        let n_progs = self.programs[node.0 as usize].len();
        for i in 0..n_progs {
            let view = SwitchView { now: self.queue.now(), node, topo: &topo, from };
            let out = self.programs[node.0 as usize][i].process(&view, &mut pkt);
            if out.modified {
                self.record(node, TraceAction::Modify, &pkt, true);
            }
            for e in out.emit {
                self.record(node, TraceAction::Clone, &e.pkt, true);
                self.inject_at_switch(node, e);
            }
            if out.verdict == Verdict::Drop {
                self.record(node, TraceAction::Drop, &pkt, true);
                return;
            }
            steer = out.steer.or(steer);
        }
        if pkt.dst == node {
            return;
        }
        pkt.ttl = pkt.ttl.saturating_sub(1);
        if pkt.ttl == 0 {
            self.counters.ttl_expired += 1;
            self.observe(Observation::Discard { node, pkt: &pkt });
            if let Some(Probe::Traceroute { id, initial_ttl }) = pkt.probe {
                let reply = time_exceeded(node, pkt.src, id, initial_ttl);
                self.inject_at_switch(node, Emitted { pkt: reply, via: None });
            }
            return;
        }
        let link = match &mut pkt.probe {
            Some(Probe::Bounce { route, pos, .. }) => {
                *pos += 1;
                route.get(*pos + 1).and_then(|&n| topo.link_between(node, n))
            }
            _ => match steer {
                Some(n) => topo.link_between(node, n),
                None => topo.ecmp_next_hop(&pkt.tuple(), node, self.cfg.ecmp_salt),
            },
        };
        let Some(link) = link else {
            self.counters.unroutable += 1;
            self.observe(Observation::Discard { node, pkt: &pkt });
            return;
        };
        self.egress(node, link, pkt);
    }

    fn egress(&mut self, node: NodeId, link: LinkId, pkt: Packet) {
        self.observe(Observation::SwitchEgress { node, link, pkt: &pkt });
        self.record(node, TraceAction::Forward, &pkt, false);
        self.transmit(link, pkt);
    }

    fn inject_at_switch(&mut self, node: NodeId, e: Emitted) {
        let Emitted { mut pkt, via } = e;
        if pkt.uid == 0 {
            pkt.uid = self.next_uid;
            self.next_uid += 1;
        }
        self.counters.packets_injected += 1;
        let link = match via {
            Some(n) => self.topo.link_between(node, n),
            None => self.topo.ecmp_next_hop(&pkt.tuple(), node, self.cfg.ecmp_salt),
        };
        match link {
            Some(l) => self.egress(node, l, pkt),
            None => self.counters.unroutable += 1,
        }
    }

    fn host_receive(&mut self, host: NodeId, pkt: Packet) {
        if pkt.dst != host {
            self.counters.unroutable += 1;
            return;
        }
        if let Some(probe) = &pkt.probe {
            match probe {
                Probe::Ping { id, sent, echo: false } => {
                    let mut reply = pkt.clone();
                    reply.uid = 0;
                    reply.src = pkt.dst;
                    reply.dst = pkt.src;
                    reply.sport = pkt.dport;
                    reply.dport = pkt.sport;
                    reply.ttl = crate::transport::DEFAULT_TTL;
                    reply.probe = Some(Probe::Ping { id: *id, sent: *sent, echo: true });
                    self.send_from_host(host, reply);
                }
                Probe::Traceroute { id, initial_ttl } => {
                    let reply = time_exceeded(host, pkt.src, *id, *initial_ttl);
                    self.send_from_host(host, reply);
                }
                _ => self.observe(Observation::HostDeliver { host, pkt: &pkt }),
            }
            return;
        }
        if pkt.proto != Protocol::Tcp {
            return;
        }
        let now = self.queue.now();
        let mut out = std::mem::take(&mut self.scratch);
        if pkt.dport == SERVER_PORT {
            if let Some(&id) = self.by_tuple.get(&pkt.tuple()) {
                if pkt.core_id_tag.is_some() {
                    self.flows[id as usize].fwd_tag = pkt.core_id_tag;
                }
            }
            if let Some(l) = self.listeners[host.0 as usize].as_mut() {
                l.on_packet(now, &pkt, &mut out);
            }
            for p in out.drain(..) {
                self.send_from_host(host, p);
            }
            self.scratch = out;
            return;
        }
        let Some(&id) = self.by_tuple.get(&pkt.tuple().reversed()) else {
            self.scratch = out;
            return;
        };
        let slot = &mut self.flows[id as usize];
        if pkt.core_id_tag.is_some() {
            slot.rev_tag = pkt.core_id_tag;
        }
        match slot.sender.status() {
            Some(FlowStatus::Failed | FlowStatus::Disconnected | FlowStatus::TimedOut) => {
                if !pkt.has(TcpFlags::RST) {
                    let mut rst = Packet::tcp(pkt.tuple().reversed(), pkt.ack, pkt.end_seq(), TcpFlags::RST | TcpFlags::ACK);
                    rst.rwnd = 0;
                    out.push(rst);
                }
            }
            _ => slot.sender.on_packet(now, &pkt, &mut out),
        }
        self.after_sender(id, out);
    }
}

fn flow_result(id: u32, f: &FlowSlot, end: SimTime, delivered: u64) -> FlowResult {
    let s = &f.sender;
    let status = s.status().unwrap_or(FlowStatus::Incomplete);
    let start = f.spec.start;
    let ended = s.ended_at().unwrap_or(end);
    let fct = (status == FlowStatus::Completed).then(|| ended - start);
    FlowResult {
        flow_id: id,
        src: f.spec.src,
        dst: f.spec.dst,
        bytes: f.spec.bytes,
        start,
        establishment_time: s.established_at().map(|t| t - start),
        fct,
        status,
        elapsed: if f.started { ended.saturating_sub(start) } else { SimTime::ZERO },
        retransmissions: s.stats().retransmissions,
        timeouts: s.stats().timeouts,
        segments_sent: s.stats().segments_sent,
        srtt: s.srtt(),
        fwd_core_tag: f.fwd_tag,
        rev_core_tag: f.rev_tag,
        delivered,
    }
}

/// Runs one flow on `topo` with the given attacks installed and reports its outcome.
/// A flow still running at `horizon` comes back `Incomplete` with `elapsed` as
/// a lower bound on its completion time.
pub fn measure_flow(
    topo: Arc<Topology>,
    cfg: WorldConfig,
    attacks: &[AttackConfig],
    flow: FlowSpec,
    horizon: SimTime,
) -> Result<FlowResult, WorldError> {
    let mut world = World::new(topo, cfg)?;
    for a in attacks {
        world.install_attack(a.clone())?;
    }
    world.add_flow(flow)?;
    let (out, _) = world.run(horizon);
    Ok(out.flows.into_iter().next().expect("one flow"))
}
