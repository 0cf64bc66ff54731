use std::collections::BTreeMap;

use super::packet::Ecn;
use super::{ConnState, Packet, TcpConfig, TcpFlags};
use crate::topology::FiveTuple;

/// Server side of one connection: cumulative ACKs, out-of-order buffering and
/// ECE echo.
#[derive(Clone, Debug)]
pub struct Receiver {
    cfg: TcpConfig,
    /// Tuple as seen on packets arriving from the client.
    tuple: FiveTuple,
    state: ConnState,
    isn: u32,
    rcv_nxt: u32,
    ooo: BTreeMap<u32, u32>,
    ece_pending: bool,
    delivered: u64,
    duplicate_bytes: u64,
    peer_core_tag: Option<crate::topology::NodeId>,
}

impl Receiver {
    pub fn new(cfg: TcpConfig, tuple: FiveTuple, isn: u32) -> Receiver {
        Receiver {
            cfg,
            tuple,
            state: ConnState::Established,
            isn,
            rcv_nxt: 0,
            ooo: BTreeMap::new(),
            ece_pending: false,
            delivered: 0,
            duplicate_bytes: 0,
            peer_core_tag: None,
        }
    }

    pub fn tuple(&self) -> FiveTuple {
        self.tuple
    }

    pub fn state(&self) -> ConnState {
        self.state
    }

    pub fn rcv_nxt(&self) -> u32 {
        self.rcv_nxt
    }

    pub fn isn(&self) -> u32 {
        self.isn
    }

    /// Bytes handed to the application, each exactly once.
    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    /// Bytes that arrived again after already being received.
    pub fn duplicate_bytes(&self) -> u64 {
        self.duplicate_bytes
    }

    pub fn ece_pending(&self) -> bool {
        self.ece_pending
    }

    /// Core tag carried by the most recent packet from the client.
    pub fn last_core_tag(&self) -> Option<crate::topology::NodeId> {
        self.peer_core_tag
    }

    fn ack_packet(&self) -> Packet {
        let mut flags = TcpFlags::ACK;
        if self.ece_pending {
            flags |= TcpFlags::ECE;
        }
        let mut p = Packet::tcp(self.tuple.reversed(), self.isn.wrapping_add(1), self.rcv_nxt, flags);
        p.rwnd = self.cfg.advertised_window();
        p.ecn = Ecn::NotCapable;
        p
    }

    /// Handles a data segment and returns the cumulative ACK.
    pub fn on_receive_data(&mut self, pkt: &Packet) -> Option<Packet> {
        if self.state != ConnState::Established {
            return None;
        }
        if pkt.core_id_tag.is_some() {
            self.peer_core_tag = pkt.core_id_tag;
        }
        if pkt.has(TcpFlags::CWR) {
            self.ece_pending = false;
        }
        if pkt.ecn == Ecn::Ce {
            self.ece_pending = true;
        }
        if pkt.payload_len > 0 {
            self.absorb(pkt.seq, pkt.end_seq());
        }
        Some(self.ack_packet())
    }

    fn absorb(&mut self, seq: u32, end: u32) {
        if end <= self.rcv_nxt {
            self.duplicate_bytes += (end - seq) as u64;
            return;
        }
        if seq > self.rcv_nxt {
            let e = self.ooo.entry(seq).or_insert(end);
            *e = (*e).max(end);
            return;
        }
        self.duplicate_bytes += (self.rcv_nxt - seq) as u64;
        self.advance_to(end);
        while let Some((&s, &e)) = self.ooo.first_key_value() {
            if s > self.rcv_nxt {
                break;
            }
            self.ooo.pop_first();
            if e > self.rcv_nxt {
                self.advance_to(e);
            }
        }
    }

    fn advance_to(&mut self, end: u32) {
        self.delivered += (end - self.rcv_nxt) as u64;
        self.rcv_nxt = end;
    }

    /// FIN from the client closes the connection.
    pub fn on_fin(&mut self) {
        if self.state == ConnState::Established {
            self.state = ConnState::Closed;
        }
    }

    /// RST with an in-window sequence number terminates the connection.
    pub fn on_rst(&mut self, pkt: &Packet) -> bool {
        if self.state != ConnState::Established {
            return false;
        }
        let lo = self.rcv_nxt.saturating_sub(1);
        if pkt.seq >= lo && pkt.seq - lo <= self.cfg.rcv_buffer {
            self.state = ConnState::Terminated;
            true
        } else {
            false
        }
    }
}
