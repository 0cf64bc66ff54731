use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::packet::Ecn;
use super::{ConnState, Packet, Receiver, TcpConfig, TcpFlags};
use crate::simcore::SimTime;
use crate::topology::FiveTuple;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ListenerConfig {
    /// Capacity of the half-open (SYN) queue and of the established table.
    pub max_slots: usize,
    pub half_open_timeout: SimTime,
    pub syn_cookies: bool,
    pub cookie_secret: u64,
}

impl Default for ListenerConfig {
    fn default() -> Self {
        ListenerConfig {
            max_slots: 128,
            half_open_timeout: SimTime::from_secs(30),
            syn_cookies: false,
            cookie_secret: 0x5eed_c00c_1e5,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListenerStats {
    pub syns_received: u64,
    pub syns_dropped: u64,
    pub syn_acks_sent: u64,
    pub half_open_expired: u64,
    pub established: u64,
    pub cookie_rejects: u64,
    pub rsts_sent: u64,
    pub closed: u64,
    pub reset: u64,
}

/// Passive endpoint of one host. Owns the half-open queue and every
/// established server-side connection.
#[derive(Clone, Debug)]
pub struct Listener {
    cfg: ListenerConfig,
    tcp: TcpConfig,
    half_open: BTreeMap<FiveTuple, SimTime>,
    conns: BTreeMap<FiveTuple, Receiver>,
    active: usize,
    stats: ListenerStats,
}

impl Listener {
    pub fn new(cfg: ListenerConfig, tcp: TcpConfig) -> Listener {
        Listener {
            cfg,
            tcp,
            half_open: BTreeMap::new(),
            conns: BTreeMap::new(),
            active: 0,
            stats: ListenerStats::default(),
        }
    }

    pub fn config(&self) -> &ListenerConfig {
        &self.cfg
    }

    pub fn stats(&self) -> &ListenerStats {
        &self.stats
    }

    pub fn half_open_len(&self) -> usize {
        self.half_open.len()
    }

    /// Connections currently holding an established slot.
    pub fn active_len(&self) -> usize {
        self.active
    }

    /// Server-side connection keyed by the client's tuple.
    pub fn connection(&self, client_tuple: &FiveTuple) -> Option<&Receiver> {
        self.conns.get(client_tuple)
    }

    pub fn connections(&self) -> impl Iterator<Item = &Receiver> {
        self.conns.values()
    }

    pub fn cookie(&self, client_tuple: &FiveTuple) -> u32 {
        // keep the cookie below 2^31 so cookie + 1 never wraps
        (client_tuple.hash_with(self.cfg.cookie_secret) >> 33) as u32
    }

    fn expire(&mut self, now: SimTime) {
        let timeout = self.cfg.half_open_timeout;
        let before = self.half_open.len();
        self.half_open.retain(|_, t| now.saturating_sub(*t) < timeout);
        self.stats.half_open_expired += (before - self.half_open.len()) as u64;
    }

    fn syn_ack(&self, client_tuple: &FiveTuple, isn: u32) -> Packet {
        let mut p = Packet::tcp(client_tuple.reversed(), isn, 1, TcpFlags::SYN | TcpFlags::ACK);
        p.rwnd = self.tcp.advertised_window();
        p.ecn = Ecn::NotCapable;
        p
    }

    fn rst_for(&mut self, pkt: &Packet) -> Packet {
        self.stats.rsts_sent += 1;
        let mut p = Packet::tcp(pkt.tuple().reversed(), pkt.ack, pkt.end_seq(), TcpFlags::RST | TcpFlags::ACK);
        p.ecn = Ecn::NotCapable;
        p
    }

    /// Processes one segment addressed to the listening port and appends any
    /// replies to `out`.
    pub fn on_packet(&mut self, now: SimTime, pkt: &Packet, out: &mut Vec<Packet>) {
        let key = pkt.tuple();
        if pkt.has(TcpFlags::RST) {
            if let Some(r) = self.conns.get_mut(&key) {
                if r.on_rst(pkt) {
                    self.stats.reset += 1;
                    self.active -= 1;
                }
            } else {
                self.half_open.remove(&key);
            }
            return;
        }
        if pkt.is_syn() {
            self.on_syn(now, key, out);
            return;
        }
        if let Some(state) = self.conns.get(&key).map(Receiver::state) {
            if state != ConnState::Established {
                if state == ConnState::Terminated && !pkt.has(TcpFlags::FIN) {
                    out.push(self.rst_for(pkt));
                }
                return;
            }
            let r = self.conns.get_mut(&key).expect("present");
            if pkt.has(TcpFlags::FIN) {
                r.on_fin();
                self.conns.remove(&key);
                self.active -= 1;
                self.stats.closed += 1;
                return;
            }
            if pkt.payload_len > 0 {
                if let Some(ack) = r.on_receive_data(pkt) {
                    out.push(ack);
                }
            }
            return;
        }
        if pkt.has(TcpFlags::ACK) && self.try_establish(now, key, pkt) {
            if pkt.payload_len > 0 {
                let r = self.conns.get_mut(&key).expect("just established");
                if let Some(ack) = r.on_receive_data(pkt) {
                    out.push(ack);
                }
            }
            return;
        }
        if pkt.has(TcpFlags::FIN) {
            return;
        }
        out.push(self.rst_for(pkt));
    }

    fn on_syn(&mut self, now: SimTime, key: FiveTuple, out: &mut Vec<Packet>) {
        self.stats.syns_received += 1;
        self.expire(now);
        if self.conns.contains_key(&key) {
            return;
        }
        if self.cfg.syn_cookies {
            if self.active_len() >= self.cfg.max_slots {
                self.stats.syns_dropped += 1;
                return;
            }
            let cookie = self.cookie(&key);
            out.push(self.syn_ack(&key, cookie));
            self.stats.syn_acks_sent += 1;
            return;
        }
        if !self.half_open.contains_key(&key)
            && (self.half_open.len() >= self.cfg.max_slots || self.active_len() >= self.cfg.max_slots)
        {
            self.stats.syns_dropped += 1;
            return;
        }
        // a retransmitted SYN refreshes nothing but gets a fresh SYN-ACK
        self.half_open.entry(key).or_insert(now);
        out.push(self.syn_ack(&key, 0));
        self.stats.syn_acks_sent += 1;
    }

    fn try_establish(&mut self, now: SimTime, key: FiveTuple, pkt: &Packet) -> bool {
        let isn = if self.cfg.syn_cookies {
            let cookie = self.cookie(&key);
            if pkt.ack != cookie.wrapping_add(1) {
                self.stats.cookie_rejects += 1;
                return false;
            }
            if self.active_len() >= self.cfg.max_slots {
                return false;
            }
            cookie
        } else {
            self.expire(now);
            if self.half_open.remove(&key).is_none() || pkt.ack != 1 {
                return false;
            }
            0
        };
        self.conns.insert(key, Receiver::new(self.tcp, key, isn));
        self.active += 1;
        self.stats.established += 1;
        true
    }
}
