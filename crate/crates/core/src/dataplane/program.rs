use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::bloom::BloomFilter;
use super::budget::TamperBudget;
use super::config::{pod_of, resolve_node, AttackConfig, AttackKind, PulseSchedule, ResolvedSelector, TracerouteMode};
use super::registers::{RegisterArray, DEFAULT_REGISTER_SLOTS};
use super::DataplaneError;
use crate::simcore::{mix64, RngStream, SimTime};
use crate::topology::{NodeId, Role, Topology};
use crate::transport::{Ecn, Packet, Probe, Protocol, TcpFlags, SERVER_PORT};

/// First node id used for spoofed flood sources; never part of a topology.
pub const SPOOF_BASE: u32 = 1_000_000;

/// Probe ids minted by attackers carry this bit so they never collide with monitor ids.
pub const ATTACKER_PROBE_BIT: u64 = 1 << 63;

const RELAY_SPORT_TRIES: u16 = 16;

/// What the switch around a program looks like for one packet.
#[derive(Clone, Copy)]
pub struct SwitchView<'a> {
    pub now: SimTime,
    pub node: NodeId,
    pub topo: &'a Topology,
    /// Neighbor the packet arrived from, if any.
    pub from: Option<NodeId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Forward,
    /// Discard (or absorb) the packet.
    Drop,
}

/// A packet injected by the program. `via` forces the first hop; otherwise the
/// switch routes it normally.
#[derive(Clone, Debug, PartialEq)]
pub struct Emitted {
    pub pkt: Packet,
    pub via: Option<NodeId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProgramOutput {
    pub verdict: Verdict,
    /// Next hop overriding ECMP.
    pub steer: Option<NodeId>,
    pub emit: Vec<Emitted>,
    pub modified: bool,
}

impl ProgramOutput {
    fn forward() -> ProgramOutput {
        ProgramOutput { verdict: Verdict::Forward, steer: None, emit: Vec::new(), modified: false }
    }

    fn drop() -> ProgramOutput {
        ProgramOutput { verdict: Verdict::Drop, ..ProgramOutput::forward() }
    }

    /// True when the packet left the program exactly as it entered.
    pub fn is_transparent(&self) -> bool {
        self.verdict == Verdict::Forward && self.steer.is_none() && self.emit.is_empty() && !self.modified
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackCounters {
    pub transited: u64,
    pub matched: u64,
    pub dropped: u64,
    pub modified: u64,
    pub cloned: u64,
    pub generated: u64,
    pub steered: u64,
    pub refused: u64,
    pub probes_spoofed: u64,
}

impl AttackCounters {
    /// Actions counted against a tamper budget.
    pub fn tampered(&self) -> u64 {
        self.dropped + self.modified + self.cloned
    }
}

#[derive(Clone, Debug, Default)]
struct FlowRegs {
    data_seen: u32,
    target_seq: Option<u32>,
    drops: u32,
    fired: bool,
    server_seq: u32,
    server_rwnd: u16,
}

#[derive(Clone, Debug)]
enum Kind {
    SynDrop { max_drops: Option<u32> },
    SameSeqDrop { nth: u32, max_drops: Option<u32> },
    SynFlood { victim: NodeId, interval: SimTime, start: SimTime, count: Option<u64>, cookie_ack: bool, sent: u64 },
    RstTinker { nth: u32 },
    AckAndDrop { nth: u32 },
    EcnTinker { fraction: f64 },
    CwndTinker { window: u16 },
    Incast { victim_pod: u32, core: NodeId, pulse: PulseSchedule },
    MisdirectCoreId { fake: NodeId },
    MisdirectTraceroute { mode: TracerouteMode },
}

#[derive(Clone, Debug)]
struct RelayPending {
    orig_src: NodeId,
    orig_id: u64,
    orig_initial_ttl: u8,
    probe: Packet,
    via: NodeId,
    tries: u16,
}

/// One attack instance installed on one compromised switch.
#[derive(Clone, Debug)]
pub struct AttackProgram {
    cfg: AttackConfig,
    node: NodeId,
    kind: Kind,
    selector: ResolvedSelector,
    bloom: BloomFilter,
    budget: TamperBudget,
    regs: RegisterArray<FlowRegs>,
    rng: RngStream,
    counters: AttackCounters,
    relay: BTreeMap<u64, RelayPending>,
    relay_sport: BTreeMap<NodeId, u16>,
    next_probe_id: u64,
}

fn flow_key(pkt: &Packet) -> u64 {
    let t = pkt.tuple();
    let t = if t.sport == SERVER_PORT && t.dport != SERVER_PORT { t.reversed() } else { t };
    t.hash_with(0xf10e)
}

fn is_client_to_server(pkt: &Packet) -> bool {
    pkt.dport == SERVER_PORT
}

impl AttackProgram {
    pub fn new(cfg: AttackConfig, topo: &Topology, seed: u64) -> Result<AttackProgram, DataplaneError> {
        let node = resolve_node(topo, &cfg.switch)?;
        if !topo.node(node).role.is_switch() {
            return Err(DataplaneError::NotASwitch(cfg.switch.clone()));
        }
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(v)
            } else {
                Err(DataplaneError::InvalidParameter(format!("{name} must be in [0, 1], got {v}")))
            }
        };
        let kind = match &cfg.kind {
            AttackKind::SynDrop { max_drops } => Kind::SynDrop { max_drops: *max_drops },
            AttackKind::SameSeqDrop { nth, max_drops } => Kind::SameSeqDrop { nth: (*nth).max(1), max_drops: *max_drops },
            AttackKind::SynFlood { victim, rate_pps, start_s, count, cookie_ack } => {
                if !(*rate_pps > 0.0) {
                    return Err(DataplaneError::InvalidParameter(format!("flood rate must be positive, got {rate_pps}")));
                }
                let victim = resolve_node(topo, victim)?;
                if topo.edge_switch(victim) != Some(node) {
                    return Err(DataplaneError::InvalidParameter(format!(
                        "syn flood must run on the victim's edge switch, not {}",
                        cfg.switch
                    )));
                }
                Kind::SynFlood {
                    victim,
                    interval: SimTime::from_secs_f64(1.0 / rate_pps),
                    start: SimTime::from_secs_f64(start_s.max(0.0)),
                    count: *count,
                    cookie_ack: *cookie_ack,
                    sent: 0,
                }
            }
            AttackKind::RstTinker { nth } => Kind::RstTinker { nth: (*nth).max(1) },
            AttackKind::AckAndDrop { nth } => Kind::AckAndDrop { nth: (*nth).max(1) },
            AttackKind::EcnTinker { fraction } => Kind::EcnTinker { fraction: prob("ecn fraction", *fraction)? },
            AttackKind::CwndTinker { window } => Kind::CwndTinker { window: *window },
            AttackKind::Incast { victim_pod, core, pp, period_s, epoch_s } => {
                let core = resolve_node(topo, core)?;
                if topo.node(core).role != Role::Core {
                    return Err(DataplaneError::InvalidParameter(format!("{} is not a core switch", topo.node(core).name)));
                }
                if !topo.hosts().any(|h| pod_of(topo, h) == Some(*victim_pod)) {
                    return Err(DataplaneError::InvalidParameter(format!("victim pod {victim_pod} does not exist")));
                }
                if !(*period_s > 0.0) {
                    return Err(DataplaneError::InvalidParameter("pulse period must be positive".into()));
                }
                Kind::Incast {
                    victim_pod: *victim_pod,
                    core,
                    pulse: PulseSchedule {
                        epoch: SimTime::from_secs_f64(epoch_s.max(0.0)),
                        period: SimTime::from_secs_f64(*period_s),
                        pp: prob("pp", *pp)?,
                    },
                }
            }
            AttackKind::MisdirectCoreId { fake_core } => {
                let fake = resolve_node(topo, fake_core)?;
                if topo.node(fake).role != Role::Core {
                    return Err(DataplaneError::InvalidParameter(format!("{fake_core} is not a core switch")));
                }
                Kind::MisdirectCoreId { fake }
            }
            AttackKind::MisdirectTraceroute { mode } => Kind::MisdirectTraceroute { mode: *mode },
        };
        let selector = cfg.target.resolve(topo)?;
        let label = format!("attack/{}/{}", cfg.switch, cfg.kind.name());
        Ok(AttackProgram {
            node,
            kind,
            selector,
            bloom: BloomFilter::default(),
            budget: TamperBudget::new(cfg.budget),
            regs: RegisterArray::new(DEFAULT_REGISTER_SLOTS),
            rng: RngStream::new(seed, &label),
            counters: AttackCounters::default(),
            relay: BTreeMap::new(),
            relay_sport: BTreeMap::new(),
            next_probe_id: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &AttackConfig {
        &self.cfg
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn counters(&self) -> &AttackCounters {
        &self.counters
    }

    pub fn bloom(&self) -> &BloomFilter {
        &self.bloom
    }

    pub fn register_evictions(&self) -> u64 {
        self.regs.evictions()
    }

    /// Tamper actions are capped by a budget for this instance.
    pub fn budget_governed(&self) -> bool {
        self.budget.is_limited()
    }

    /// First time and spacing of generator ticks, for attacks that originate traffic.
    pub fn tick_schedule(&self) -> Option<(SimTime, SimTime)> {
        match self.kind {
            Kind::SynFlood { start, interval, .. } => Some((start, interval)),
            _ => None,
        }
    }

    /// Generator tick; returns injected packets and whether more ticks follow.
    pub fn on_tick(&mut self, _view: &SwitchView) -> (Vec<Emitted>, bool) {
        let Kind::SynFlood { victim, count, ref mut sent, .. } = self.kind else {
            return (Vec::new(), false);
        };
        if count.is_some_and(|c| *sent >= c) {
            return (Vec::new(), false);
        }
        let i = *sent;
        *sent += 1;
        let src = NodeId(SPOOF_BASE + (i % 1_000_000) as u32);
        let sport = 1024 + (i % 60_000) as u16;
        let tuple = crate::topology::FiveTuple { src, dst: victim, sport, dport: SERVER_PORT, proto: Protocol::Tcp.number() };
        let mut syn = Packet::tcp(tuple, 0, 0, TcpFlags::SYN);
        syn.rwnd = 128;
        self.counters.generated += 1;
        let more = count.is_none_or(|c| *sent < c);
        (vec![Emitted { pkt: syn, via: None }], more)
    }

    fn consume(&mut self, n: u64) -> bool {
        if self.budget.try_consume_n(n) {
            true
        } else {
            self.counters.refused += 1;
            false
        }
    }

    /// Runs the program on a packet at this switch. The packet may be rewritten in place.
    pub fn process(&mut self, view: &SwitchView, pkt: &mut Packet) -> ProgramOutput {
        self.counters.transited += 1;
        self.budget.observe();
        if let Kind::MisdirectTraceroute { mode } = self.kind {
            return self.traceroute(view, pkt, mode);
        }
        if let Kind::SynFlood { cookie_ack, .. } = self.kind {
            return self.flood_intercept(pkt, cookie_ack);
        }
        if let Kind::Incast { victim_pod, core, pulse } = self.kind {
            return self.incast(view, pkt, victim_pod, core, pulse);
        }
        if !self.selector.matches(view.topo, pkt) {
            return ProgramOutput::forward();
        }
        self.counters.matched += 1;
        match self.kind.clone() {
            Kind::SynDrop { max_drops } => self.syn_drop(pkt, max_drops),
            Kind::SameSeqDrop { nth, max_drops } => self.same_seq_drop(pkt, nth, max_drops),
            Kind::RstTinker { nth } => self.rst_tinker(pkt, nth),
            Kind::AckAndDrop { nth } => self.ack_and_drop(pkt, nth),
            Kind::EcnTinker { fraction } => self.ecn_tinker(pkt, fraction),
            Kind::CwndTinker { window } => self.cwnd_tinker(pkt, window),
            Kind::MisdirectCoreId { fake } => self.misdirect_core_id(pkt, fake),
            Kind::SynFlood { .. } | Kind::Incast { .. } | Kind::MisdirectTraceroute { .. } => unreachable!(),
        }
    }

    fn syn_drop(&mut self, pkt: &Packet, max_drops: Option<u32>) -> ProgramOutput {
        if !pkt.is_syn() {
            return ProgramOutput::forward();
        }
        let key = flow_key(pkt);
        if !self.bloom.contains(key) {
            self.bloom.insert(key);
        }
        let regs = self.regs.entry(key, FlowRegs::default);
        if max_drops.is_some_and(|m| regs.drops >= m) {
            return ProgramOutput::forward();
        }
        if !self.consume(1) {
            return ProgramOutput::forward();
        }
        self.regs.entry(key, FlowRegs::default).drops += 1;
        self.counters.dropped += 1;
        ProgramOutput::drop()
    }

    fn same_seq_drop(&mut self, pkt: &Packet, nth: u32, max_drops: Option<u32>) -> ProgramOutput {
        if !is_client_to_server(pkt) || !pkt.is_data() {
            return ProgramOutput::forward();
        }
        let regs = self.regs.entry(flow_key(pkt), FlowRegs::default);
        if regs.target_seq.is_none() {
            regs.data_seen += 1;
            if regs.data_seen == nth {
                regs.target_seq = Some(pkt.seq);
            }
        }
        if regs.target_seq != Some(pkt.seq) || max_drops.is_some_and(|m| regs.drops >= m) {
            return ProgramOutput::forward();
        }
        if !self.consume(1) {
            return ProgramOutput::forward();
        }
        self.regs.entry(flow_key(pkt), FlowRegs::default).drops += 1;
        self.counters.dropped += 1;
        ProgramOutput::drop()
    }

    fn rst_tinker(&mut self, pkt: &mut Packet, nth: u32) -> ProgramOutput {
        if !is_client_to_server(pkt) || !pkt.is_data() {
            return ProgramOutput::forward();
        }
        let regs = self.regs.entry(flow_key(pkt), FlowRegs::default);
        if regs.fired {
            return ProgramOutput::forward();
        }
        regs.data_seen += 1;
        if regs.data_seen < nth {
            return ProgramOutput::forward();
        }
        if !self.consume(1) {
            return ProgramOutput::forward();
        }
        self.regs.entry(flow_key(pkt), FlowRegs::default).fired = true;
        pkt.flags |= TcpFlags::RST;
        pkt.valid = true;
        self.counters.modified += 1;
        ProgramOutput { modified: true, ..ProgramOutput::forward() }
    }

    fn ack_and_drop(&mut self, pkt: &Packet, nth: u32) -> ProgramOutput {
        let key = flow_key(pkt);
        if !is_client_to_server(pkt) {
            // learn the server's sequence number and window from genuine replies
            if pkt.has(TcpFlags::ACK) && !pkt.has(TcpFlags::RST) {
                let regs = self.regs.entry(key, FlowRegs::default);
                regs.server_seq = if pkt.is_syn_ack() { pkt.seq.wrapping_add(1) } else { pkt.seq };
                regs.server_rwnd = pkt.rwnd;
            }
            return ProgramOutput::forward();
        }
        if !pkt.is_data() {
            return ProgramOutput::forward();
        }
        let regs = self.regs.entry(key, FlowRegs::default);
        if regs.fired {
            return ProgramOutput::forward();
        }
        regs.data_seen += 1;
        if regs.data_seen < nth {
            return ProgramOutput::forward();
        }
        let (seq, rwnd) = (regs.server_seq, regs.server_rwnd);
        if !self.consume(2) {
            return ProgramOutput::forward();
        }
        self.regs.entry(key, FlowRegs::default).fired = true;
        let mut ack = Packet::tcp(pkt.tuple().reversed(), seq, pkt.end_seq(), TcpFlags::ACK);
        ack.rwnd = rwnd;
        self.counters.dropped += 1;
        self.counters.cloned += 1;
        ProgramOutput { emit: vec![Emitted { pkt: ack, via: None }], ..ProgramOutput::drop() }
    }

    fn ecn_tinker(&mut self, pkt: &mut Packet, fraction: f64) -> ProgramOutput {
        if !is_client_to_server(pkt) || !pkt.is_data() || pkt.ecn != Ecn::Capable || fraction <= 0.0 {
            return ProgramOutput::forward();
        }
        if self.rng.uniform01() >= fraction || !self.consume(1) {
            return ProgramOutput::forward();
        }
        pkt.ecn = Ecn::Ce;
        self.counters.modified += 1;
        ProgramOutput { modified: true, ..ProgramOutput::forward() }
    }

    fn cwnd_tinker(&mut self, pkt: &mut Packet, window: u16) -> ProgramOutput {
        if is_client_to_server(pkt) || !pkt.has(TcpFlags::ACK) || pkt.has(TcpFlags::SYN) || pkt.has(TcpFlags::RST) {
            return ProgramOutput::forward();
        }
        if pkt.rwnd == window || !self.consume(1) {
            return ProgramOutput::forward();
        }
        pkt.rwnd = window;
        pkt.valid = true;
        self.counters.modified += 1;
        ProgramOutput { modified: true, ..ProgramOutput::forward() }
    }

    fn misdirect_core_id(&mut self, pkt: &mut Packet, fake: NodeId) -> ProgramOutput {
        match pkt.core_id_tag {
            Some(tag) if tag != fake => {
                if !self.consume(1) {
                    return ProgramOutput::forward();
                }
                pkt.core_id_tag = Some(fake);
                self.counters.modified += 1;
                ProgramOutput { modified: true, ..ProgramOutput::forward() }
            }
            _ => ProgramOutput::forward(),
        }
    }

    fn flood_intercept(&mut self, pkt: &Packet, cookie_ack: bool) -> ProgramOutput {
        if !(pkt.is_syn_ack() && pkt.dst.0 >= SPOOF_BASE) {
            return ProgramOutput::forward();
        }
        let mut out = ProgramOutput::drop();
        if cookie_ack {
            let ack = Packet::tcp(pkt.tuple().reversed(), 1, pkt.seq.wrapping_add(1), TcpFlags::ACK);
            self.counters.generated += 1;
            out.emit.push(Emitted { pkt: Packet { rwnd: 128, ..ack }, via: None });
        }
        out
    }

    fn incast(&mut self, view: &SwitchView, pkt: &Packet, victim_pod: u32, core: NodeId, pulse: PulseSchedule) -> ProgramOutput {
        if pkt.is_probe() || pod_of(view.topo, pkt.dst) != Some(victim_pod) || !pulse.is_on(view.now) {
            return ProgramOutput::forward();
        }
        let via_core = view
            .topo
            .next_hops(view.node, pkt.dst)
            .iter()
            .any(|&l| view.topo.link(l).to == core);
        if !via_core {
            return ProgramOutput::forward();
        }
        self.counters.steered += 1;
        ProgramOutput { steer: Some(core), ..ProgramOutput::forward() }
    }

    fn mint_probe_id(&mut self) -> u64 {
        self.next_probe_id += 1;
        ATTACKER_PROBE_BIT | (self.node.0 as u64) << 32 | self.next_probe_id
    }

    fn traceroute(&mut self, view: &SwitchView, pkt: &Packet, mode: TracerouteMode) -> ProgramOutput {
        match (&pkt.probe, mode) {
            (Some(Probe::Traceroute { id, .. }), _) if pkt.src == view.node => {
                // our own relay probe came back through us: that source port hashes onto us
                let id = *id;
                self.retry_relay(id, pkt.dst)
            }
            (Some(Probe::Traceroute { id, initial_ttl }), _) => {
                let (id, initial_ttl) = (*id, *initial_ttl);
                let Some(from) = view.from else {
                    return ProgramOutput::forward();
                };
                let Some(remaining) = view.topo.distance(view.node, pkt.dst) else {
                    return ProgramOutput::forward();
                };
                // expires at this hop or further on, before reaching the destination
                if pkt.ttl == 0 || pkt.ttl as u32 > remaining {
                    return ProgramOutput::forward();
                }
                match mode {
                    TracerouteMode::Knowledge => self.fabricate(view, pkt, from, id, initial_ttl),
                    TracerouteMode::Relay => self.start_relay(view, pkt, from, id, initial_ttl),
                }
            }
            (Some(Probe::TimeExceeded { probe_id, responder, .. }), TracerouteMode::Relay)
                if pkt.dst == view.node =>
            {
                let (probe_id, responder) = (*probe_id, *responder);
                self.finish_relay(view, probe_id, responder)
            }
            _ => ProgramOutput::forward(),
        }
    }

    /// Knowledge mode: answer as the switch at the same depth on another
    /// shortest path that leaves the true path right before this switch.
    fn fabricate(&mut self, view: &SwitchView, pkt: &Packet, from: NodeId, id: u64, initial_ttl: u8) -> ProgramOutput {
        let alternates: Vec<_> = view
            .topo
            .shortest_paths(from, pkt.dst)
            .into_iter()
            .filter(|r| !r.nodes().contains(&view.node))
            .collect();
        if alternates.is_empty() {
            return ProgramOutput::forward();
        }
        let pick = (pkt.tuple().hash_with(mix64(view.node.0 as u64)) % alternates.len() as u64) as usize;
        // hop index along the alternate path, counted from `from`
        let hop = pkt.ttl as usize;
        let Some(&responder) = alternates[pick].nodes().get(hop) else {
            return ProgramOutput::forward();
        };
        self.counters.probes_spoofed += 1;
        let reply = time_exceeded(responder, pkt.src, id, initial_ttl);
        ProgramOutput { emit: vec![Emitted { pkt: reply, via: None }], ..ProgramOutput::drop() }
    }

    /// Relay mode: re-source the probe to ourselves and send it back towards
    /// the previous hop, which forwards it along some other path; the real
    /// answer comes back to us and is passed on to the prober.
    fn start_relay(&mut self, view: &SwitchView, pkt: &Packet, from: NodeId, id: u64, initial_ttl: u8) -> ProgramOutput {
        let sport = *self.relay_sport.entry(pkt.dst).or_insert(pkt.sport);
        let relay_id = self.mint_probe_id();
        let mut probe = pkt.clone();
        probe.uid = 0;
        probe.src = view.node;
        probe.sport = sport;
        probe.ttl = pkt.ttl.saturating_add(1);
        probe.probe = Some(Probe::Traceroute { id: relay_id, initial_ttl: probe.ttl });
        self.relay.insert(
            relay_id,
            RelayPending { orig_src: pkt.src, orig_id: id, orig_initial_ttl: initial_ttl, probe: probe.clone(), via: from, tries: 1 },
        );
        self.counters.probes_spoofed += 1;
        ProgramOutput { emit: vec![Emitted { pkt: probe, via: Some(from) }], ..ProgramOutput::drop() }
    }

    fn retry_relay(&mut self, relay_id: u64, dst: NodeId) -> ProgramOutput {
        let Some(mut pending) = self.relay.remove(&relay_id) else {
            return ProgramOutput::drop();
        };
        if pending.tries >= RELAY_SPORT_TRIES {
            return ProgramOutput::drop();
        }
        let sport = pending.probe.sport.wrapping_add(1).max(1);
        self.relay_sport.insert(dst, sport);
        let new_id = self.mint_probe_id();
        let mut probe = pending.probe.clone();
        probe.sport = sport;
        let ttl = match probe.probe {
            Some(Probe::Traceroute { initial_ttl, .. }) => initial_ttl,
            _ => probe.ttl,
        };
        probe.ttl = ttl;
        probe.probe = Some(Probe::Traceroute { id: new_id, initial_ttl: ttl });
        pending.probe = probe.clone();
        pending.tries += 1;
        let via = pending.via;
        self.relay.insert(new_id, pending);
        ProgramOutput { emit: vec![Emitted { pkt: probe, via: Some(via) }], ..ProgramOutput::drop() }
    }

    fn finish_relay(&mut self, view: &SwitchView, relay_id: u64, responder: NodeId) -> ProgramOutput {
        let Some(p) = self.relay.remove(&relay_id) else {
            return ProgramOutput::forward();
        };
        if responder == view.node {
            return ProgramOutput::drop();
        }
        let reply = time_exceeded(responder, p.orig_src, p.orig_id, p.orig_initial_ttl);
        ProgramOutput { emit: vec![Emitted { pkt: reply, via: None }], ..ProgramOutput::drop() }
    }
}

/// ICMP time-exceeded style answer from `responder` to the prober.
pub fn time_exceeded(responder: NodeId, prober: NodeId, probe_id: u64, initial_ttl: u8) -> Packet {
    let tuple = crate::topology::FiveTuple { src: responder, dst: prober, sport: 0, dport: 0, proto: Protocol::Icmp.number() };
    let mut p = Packet::tcp(tuple, 0, 0, TcpFlags::empty());
    p.proto = Protocol::Icmp;
    p.probe = Some(Probe::TimeExceeded { probe_id, initial_ttl, responder });
    p
}
