use std::sync::Arc;

use bitflags::bitflags;
use serde::{Deserialize, Serialize};

use crate::simcore::{mix64, SimTime};
use crate::topology::{EcnMarkable, FiveTuple, NodeId};

/// Bytes of IP + TCP header charged to every packet on the wire.
pub const HEADER_BYTES: u32 = 40;

bitflags! {
    #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
    pub struct TcpFlags: u8 {
        const SYN = 0x01;
        const ACK = 0x02;
        const RST = 0x04;
        const FIN = 0x08;
        const ECE = 0x10;
        const CWR = 0x20;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    Tcp,
    Udp,
    Icmp,
}

impl Protocol {
    pub fn number(self) -> u8 {
        match self {
            Protocol::Tcp => 6,
            Protocol::Udp => 17,
            Protocol::Icmp => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ecn {
    NotCapable,
    Capable,
    Ce,
}

/// Monitor and attacker control traffic riding alongside application packets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Probe {
    /// Pingmesh-style round trip; the destination host echoes it back.
    Ping { id: u64, sent: SimTime, echo: bool },
    /// NetBouncer-style probe following an explicit source route. `pos` is the
    /// index in `route` of the node that last forwarded it.
    Bounce {
        id: u64,
        sent: SimTime,
        route: Arc<[NodeId]>,
        pos: usize,
    },
    /// TTL-limited traceroute probe carrying the flow's own five-tuple.
    Traceroute { id: u64, initial_ttl: u8 },
    /// ICMP time-exceeded (or destination-reached) answer to a traceroute probe.
    TimeExceeded {
        probe_id: u64,
        initial_ttl: u8,
        responder: NodeId,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Packet {
    /// Simulation-unique id; clones and forged packets get fresh ones.
    pub uid: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub sport: u16,
    pub dport: u16,
    pub proto: Protocol,
    pub seq: u32,
    pub ack: u32,
    pub flags: TcpFlags,
    pub ecn: Ecn,
    /// Advertised receive window in units of the window scale.
    pub rwnd: u16,
    pub ttl: u8,
    pub core_id_tag: Option<NodeId>,
    pub payload_len: u32,
    /// Stands in for checksum consistency.
    pub valid: bool,
    pub probe: Option<Probe>,
}

pub const DEFAULT_TTL: u8 = 64;

impl Packet {
    pub fn tcp(tuple: FiveTuple, seq: u32, ack: u32, flags: TcpFlags) -> Packet {
        Packet {
            uid: 0,
            src: tuple.src,
            dst: tuple.dst,
            sport: tuple.sport,
            dport: tuple.dport,
            proto: Protocol::Tcp,
            seq,
            ack,
            flags,
            ecn: Ecn::NotCapable,
            rwnd: 0,
            ttl: DEFAULT_TTL,
            core_id_tag: None,
            payload_len: 0,
            valid: true,
            probe: None,
        }
    }

    pub fn tuple(&self) -> FiveTuple {
        FiveTuple {
            src: self.src,
            dst: self.dst,
            sport: self.sport,
            dport: self.dport,
            proto: self.proto.number(),
        }
    }

    pub fn has(&self, f: TcpFlags) -> bool {
        self.flags.contains(f)
    }

    pub fn is_syn(&self) -> bool {
        self.has(TcpFlags::SYN) && !self.has(TcpFlags::ACK)
    }

    pub fn is_syn_ack(&self) -> bool {
        self.has(TcpFlags::SYN | TcpFlags::ACK)
    }

    pub fn is_data(&self) -> bool {
        self.proto == Protocol::Tcp && self.payload_len > 0 && self.probe.is_none()
    }

    pub fn is_pure_ack(&self) -> bool {
        self.proto == Protocol::Tcp
            && self.probe.is_none()
            && self.payload_len == 0
            && self.flags == (self.flags & (TcpFlags::ACK | TcpFlags::ECE | TcpFlags::CWR))
            && self.has(TcpFlags::ACK)
    }

    pub fn is_probe(&self) -> bool {
        self.probe.is_some()
    }

    pub fn end_seq(&self) -> u32 {
        self.seq.wrapping_add(self.payload_len)
    }

    /// Header digest over the fields that stay constant hop to hop (TTL, ECN
    /// codepoint and the core-ID tag are excluded). Two copies of a packet
    /// that differ only in those fields share a digest.
    pub fn digest(&self) -> u64 {
        let mut h = mix64(self.tuple().hash_with(0x5eed));
        h = mix64(h ^ ((self.seq as u64) << 32 | self.ack as u64));
        h = mix64(h ^ ((self.flags.bits() as u64) << 40 | self.payload_len as u64));
        h
    }
}

impl EcnMarkable for Packet {
    fn ecn_capable(&self) -> bool {
        !matches!(self.ecn, Ecn::NotCapable)
    }

    fn mark_ce(&mut self) {
        self.ecn = Ecn::Ce;
    }

    fn wire_bytes(&self) -> u32 {
        HEADER_BYTES + self.payload_len
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tuple() -> FiveTuple {
        FiveTuple {
            src: NodeId(1),
            dst: NodeId(2),
            sport: 4000,
            dport: 80,
            proto: 6,
        }
    }

    #[test]
    fn digest_ignores_mutable_fields() {
        let mut a = Packet::tcp(tuple(), 10, 0, TcpFlags::ACK);
        let d = a.digest();
        a.ttl = 3;
        a.ecn = Ecn::Ce;
        a.core_id_tag = Some(NodeId(9));
        assert_eq!(a.digest(), d);
        a.flags |= TcpFlags::RST;
        assert_ne!(a.digest(), d);
    }

    #[test]
    fn classification_helpers() {
        let syn = Packet::tcp(tuple(), 0, 0, TcpFlags::SYN);
        assert!(syn.is_syn() && !syn.is_syn_ack());
        let mut ack = Packet::tcp(tuple(), 0, 5, TcpFlags::ACK | TcpFlags::ECE);
        assert!(ack.is_pure_ack());
        ack.payload_len = 10;
        assert!(!ack.is_pure_ack() && ack.is_data());
        assert_eq!(ack.wire_bytes(), 50);
    }
}
