use super::{ConnState, FlowStatus, Packet, TcpConfig, TcpFlags};
use crate::simcore::SimTime;
use crate::topology::FiveTuple;

use super::packet::Ecn;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SenderStats {
    pub segments_sent: u64,
    pub retransmissions: u64,
    pub timeouts: u64,
    pub fast_retransmits: u64,
    pub ece_reductions: u64,
    pub persist_probes: u64,
    pub syn_sent: u32,
    /// Every retransmitted data segment as (time, seq).
    pub retransmitted: Vec<(SimTime, u32)>,
    /// Largest amount by which in-flight bytes exceeded the effective window
    /// right after a transmission. Stays zero when the clamp holds.
    pub window_overshoot: u64,
    pub ignored_acks: u64,
}

/// Client side of a flow: opens the connection, then pushes `total_bytes`.
#[derive(Clone, Debug)]
pub struct Sender {
    cfg: TcpConfig,
    tuple: FiveTuple,
    state: ConnState,
    status: Option<FlowStatus>,
    total: u32,
    snd_una: u32,
    snd_nxt: u32,
    snd_max: u32,
    cwnd: f64,
    ssthresh: f64,
    srtt: Option<SimTime>,
    rttvar: SimTime,
    backoff: u32,
    timed: Option<(u32, SimTime)>,
    dup_acks: u32,
    recover: Option<u32>,
    ecn_recover: u32,
    cwr_pending: bool,
    peer_rwnd: u32,
    last_rwnd_field: u16,
    syn_retries_done: u32,
    consecutive_timeouts: u32,
    peer_isn: u32,
    rto_deadline: Option<SimTime>,
    persist_deadline: Option<SimTime>,
    start: SimTime,
    established_at: Option<SimTime>,
    ended_at: Option<SimTime>,
    stats: SenderStats,
}

impl Sender {
    pub fn new(cfg: TcpConfig, tuple: FiveTuple, total_bytes: u64) -> Sender {
        assert!(total_bytes < u32::MAX as u64, "flow too large for 32-bit sequence space");
        Sender {
            cfg,
            tuple,
            state: ConnState::Closed,
            status: None,
            total: total_bytes as u32,
            snd_una: 0,
            snd_nxt: 0,
            snd_max: 0,
            cwnd: cfg.init_cwnd.max(1) as f64,
            ssthresh: f64::INFINITY,
            srtt: None,
            rttvar: SimTime::ZERO,
            backoff: 0,
            timed: None,
            dup_acks: 0,
            recover: None,
            ecn_recover: 0,
            cwr_pending: false,
            peer_rwnd: cfg.rcv_buffer,
            last_rwnd_field: cfg.advertised_window(),
            syn_retries_done: 0,
            consecutive_timeouts: 0,
            peer_isn: 0,
            rto_deadline: None,
            persist_deadline: None,
            start: SimTime::ZERO,
            established_at: None,
            ended_at: None,
            stats: SenderStats::default(),
        }
    }

    pub fn tuple(&self) -> FiveTuple {
        self.tuple
    }

    pub fn state(&self) -> ConnState {
        self.state
    }

    pub fn status(&self) -> Option<FlowStatus> {
        self.status
    }

    pub fn stats(&self) -> &SenderStats {
        &self.stats
    }

    pub fn cwnd(&self) -> f64 {
        self.cwnd
    }

    pub fn ssthresh(&self) -> f64 {
        self.ssthresh
    }

    pub fn snd_una(&self) -> u32 {
        self.snd_una
    }

    pub fn snd_nxt(&self) -> u32 {
        self.snd_nxt
    }

    pub fn peer_rwnd(&self) -> u32 {
        self.peer_rwnd
    }

    pub fn srtt(&self) -> Option<SimTime> {
        self.srtt
    }

    pub fn dup_acks(&self) -> u32 {
        self.dup_acks
    }

    pub fn start_time(&self) -> SimTime {
        self.start
    }

    pub fn established_at(&self) -> Option<SimTime> {
        self.established_at
    }

    pub fn ended_at(&self) -> Option<SimTime> {
        self.ended_at
    }

    pub fn total_bytes(&self) -> u32 {
        self.total
    }

    pub fn is_finished(&self) -> bool {
        self.status.is_some()
    }

    /// Retransmission timeout currently in force, backoff included.
    pub fn rto(&self) -> SimTime {
        let base = match self.srtt {
            Some(srtt) => (srtt + self.rttvar.saturating_mul(4)).max(self.cfg.rto_min),
            None => self.cfg.rto_min,
        };
        let shift = self.backoff.min(40);
        base.saturating_mul(1u64 << shift).min(self.cfg.rto_max)
    }

    /// Effective send window in bytes: min(cwnd × MSS, peer receive window).
    pub fn effective_window(&self) -> u32 {
        let cw = (self.cwnd.max(1.0) * self.cfg.mss as f64).floor() as u64;
        cw.min(self.peer_rwnd as u64) as u32
    }

    pub fn in_flight(&self) -> u32 {
        self.snd_nxt - self.snd_una
    }

    /// Earliest pending timer, if any.
    pub fn next_deadline(&self) -> Option<SimTime> {
        match (self.rto_deadline, self.persist_deadline) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    fn segment(&self, flags: TcpFlags) -> Packet {
        let mut p = Packet::tcp(self.tuple, 0, 0, flags);
        p.rwnd = self.cfg.advertised_window();
        if self.cfg.ecn {
            p.ecn = Ecn::Capable;
        }
        p
    }

    fn syn(&self) -> Packet {
        let mut p = self.segment(TcpFlags::SYN);
        // SYNs are not ECT; ECN capability is negotiated, not marked.
        p.ecn = Ecn::NotCapable;
        p
    }

    pub fn connect(&mut self, now: SimTime, out: &mut Vec<Packet>) {
        assert_eq!(self.state, ConnState::Closed, "connect on a used sender");
        self.start = now;
        self.state = ConnState::SynSent;
        self.stats.syn_sent += 1;
        out.push(self.syn());
        self.rto_deadline = Some(now + self.rto());
    }

    fn finish(&mut self, now: SimTime, status: FlowStatus) {
        self.status = Some(status);
        self.ended_at = Some(now);
        self.rto_deadline = None;
        self.persist_deadline = None;
        self.state = match status {
            FlowStatus::Completed => ConnState::Closing,
            _ => ConnState::Terminated,
        };
    }

    pub fn on_packet(&mut self, now: SimTime, pkt: &Packet, out: &mut Vec<Packet>) {
        if self.status.is_some() {
            return;
        }
        if pkt.has(TcpFlags::RST) {
            self.on_rst(now, pkt);
            return;
        }
        match self.state {
            ConnState::SynSent if pkt.is_syn_ack() => self.on_syn_ack(now, pkt, out),
            ConnState::Established if pkt.has(TcpFlags::ACK) => self.on_ack(now, pkt, out),
            _ => {}
        }
    }

    fn on_syn_ack(&mut self, now: SimTime, pkt: &Packet, out: &mut Vec<Packet>) {
        if pkt.ack != 1 {
            self.stats.ignored_acks += 1;
            return;
        }
        self.peer_isn = pkt.seq;
        self.state = ConnState::Established;
        self.established_at = Some(now);
        self.backoff = 0;
        self.rto_deadline = None;
        self.update_window(pkt.rwnd);
        let mut ack = self.segment(TcpFlags::ACK);
        ack.seq = 1;
        ack.ack = self.peer_isn.wrapping_add(1);
        ack.ecn = super::packet::Ecn::NotCapable;
        out.push(ack);
        if self.total == 0 {
            self.complete(now, out);
        } else {
            self.try_send(now, out);
        }
    }

    fn update_window(&mut self, field: u16) {
        self.last_rwnd_field = field;
        self.peer_rwnd = field as u32 * self.cfg.wscale;
    }

    /// Raw 16-bit window most recently advertised by the peer.
    pub fn last_rwnd_field(&self) -> u16 {
        self.last_rwnd_field
    }

    fn complete(&mut self, now: SimTime, out: &mut Vec<Packet>) {
        let mut fin = self.segment(TcpFlags::FIN | TcpFlags::ACK);
        fin.seq = self.total;
        fin.ack = self.peer_isn.wrapping_add(1);
        fin.ecn = Ecn::NotCapable;
        out.push(fin);
        self.finish(now, FlowStatus::Completed);
    }

    /// Cumulative ACK processing, dup-ACK counting, ECE reaction and window update.
    pub fn on_ack(&mut self, now: SimTime, pkt: &Packet, out: &mut Vec<Packet>) {
        if self.state != ConnState::Established {
            return;
        }
        let ack = pkt.ack;
        if ack > self.snd_max {
            // acknowledges data never sent
            self.stats.ignored_acks += 1;
            return;
        }
        let window_before = self.peer_rwnd;
        self.update_window(pkt.rwnd);
        let ece_react =
            pkt.has(TcpFlags::ECE) && self.snd_una >= self.ecn_recover && self.recover.is_none();

        if ack > self.snd_una {
            self.on_new_ack(now, ack, !ece_react, out);
            if self.status.is_some() {
                return;
            }
        } else if ack == self.snd_una
            && self.snd_max > self.snd_una
            && pkt.payload_len == 0
            && self.peer_rwnd == window_before
        {
            self.dup_acks += 1;
            if self.dup_acks == 3 && self.recover.is_none() {
                self.fast_retransmit(now, out);
            }
        } else if ack < self.snd_una {
            self.stats.ignored_acks += 1;
        }

        if ece_react && self.recover.is_none() {
            self.cwnd = (self.cwnd / 2.0).max(1.0);
            self.ssthresh = self.cwnd.max(2.0);
            self.ecn_recover = self.snd_nxt.max(self.snd_una + 1);
            self.cwr_pending = true;
            self.stats.ece_reductions += 1;
        }
        self.try_send(now, out);
    }

    fn on_new_ack(&mut self, now: SimTime, ack: u32, grow: bool, out: &mut Vec<Packet>) {
        if let Some((end, sent)) = self.timed {
            if ack >= end {
                self.rtt_sample(now - sent);
                self.timed = None;
            }
        }
        self.consecutive_timeouts = 0;
        self.backoff = 0;
        self.dup_acks = 0;
        self.snd_una = ack;
        if self.snd_nxt < self.snd_una {
            self.snd_nxt = self.snd_una;
        }
        match self.recover {
            Some(r) if ack < r => {
                // partial ACK: the next hole is lost as well
                self.retransmit_head(now, out);
            }
            Some(_) => {
                self.recover = None;
                self.cwnd = self.ssthresh.max(1.0);
            }
            None if !grow => {}
            None => {
                if self.cwnd < self.ssthresh {
                    self.cwnd += 1.0;
                } else {
                    self.cwnd += 1.0 / self.cwnd;
                }
            }
        }
        if self.snd_una >= self.total {
            self.complete(now, out);
            return;
        }
        self.rto_deadline = (self.snd_max > self.snd_una).then(|| now + self.rto());
        self.persist_deadline = None;
    }

    fn rtt_sample(&mut self, rtt: SimTime) {
        match self.srtt {
            None => {
                self.srtt = Some(rtt);
                self.rttvar = SimTime(rtt.0 / 2);
            }
            Some(srtt) => {
                let err = srtt.0.abs_diff(rtt.0);
                self.rttvar = SimTime((3 * self.rttvar.0 + err) / 4);
                self.srtt = Some(SimTime((7 * srtt.0 + rtt.0) / 8));
            }
        }
    }

    fn fast_retransmit(&mut self, now: SimTime, out: &mut Vec<Packet>) {
        let flight_segs = (self.in_flight() as f64 / self.cfg.mss as f64).ceil();
        self.ssthresh = (flight_segs / 2.0).max(2.0);
        self.cwnd = self.ssthresh;
        self.recover = Some(self.snd_max);
        self.stats.fast_retransmits += 1;
        self.retransmit_head(now, out);
    }

    fn retransmit_head(&mut self, now: SimTime, out: &mut Vec<Packet>) {
        let len = self.cfg.mss.min(self.total - self.snd_una);
        let seq = self.snd_una;
        self.emit_data(now, seq, len, out);
        self.stats.retransmissions += 1;
        self.stats.retransmitted.push((now, seq));
        self.timed = None;
        if self.snd_nxt < seq + len {
            self.snd_nxt = seq + len;
        }
        self.rto_deadline = Some(now + self.rto());
    }

    fn emit_data(&mut self, _now: SimTime, seq: u32, len: u32, out: &mut Vec<Packet>) {
        let mut p = self.segment(TcpFlags::ACK);
        p.seq = seq;
        p.ack = self.peer_isn.wrapping_add(1);
        p.payload_len = len;
        if self.cwr_pending {
            p.flags |= TcpFlags::CWR;
            self.cwr_pending = false;
        }
        self.stats.segments_sent += 1;
        out.push(p);
    }

    /// Sends as much new (or go-back-N) data as the effective window allows.
    /// Only whole segments are sent while data is in flight; a window smaller
    /// than the next segment with nothing in flight waits for the persist timer.
    pub fn try_send(&mut self, now: SimTime, out: &mut Vec<Packet>) {
        if self.state != ConnState::Established || self.status.is_some() {
            return;
        }
        while self.snd_nxt < self.total {
            let window = self.effective_window();
            let inflight = self.in_flight();
            let seg = self.cfg.mss.min(self.total - self.snd_nxt);
            if inflight + seg > window {
                if inflight == 0 && self.persist_deadline.is_none() {
                    self.persist_deadline = Some(now + self.rto());
                }
                break;
            }
            self.send_segment(now, seg, out);
        }
    }

    fn send_segment(&mut self, now: SimTime, len: u32, out: &mut Vec<Packet>) {
        let seq = self.snd_nxt;
        let is_retx = seq < self.snd_max;
        self.emit_data(now, seq, len, out);
        if is_retx {
            self.stats.retransmissions += 1;
            self.stats.retransmitted.push((now, seq));
        } else if self.timed.is_none() {
            self.timed = Some((seq + len, now));
        }
        self.snd_nxt += len;
        self.snd_max = self.snd_max.max(self.snd_nxt);
        let over = self.in_flight().saturating_sub(self.effective_window()) as u64;
        self.stats.window_overshoot = self.stats.window_overshoot.max(over);
        if self.rto_deadline.is_none() {
            self.rto_deadline = Some(now + self.rto());
        }
    }

    /// Fires whichever timers are due at `now`.
    pub fn on_timer(&mut self, now: SimTime, out: &mut Vec<Packet>) {
        if self.status.is_some() {
            return;
        }
        if self.rto_deadline.is_some_and(|d| d <= now) {
            self.rto_deadline = None;
            self.on_rto_expiry(now, out);
        }
        if self.persist_deadline.is_some_and(|d| d <= now) {
            self.persist_deadline = None;
            self.on_persist(now, out);
        }
    }

    /// Timeout: retransmit the SYN or the oldest unacknowledged segment, double
    /// the RTO and collapse cwnd to one segment.
    pub fn on_rto_expiry(&mut self, now: SimTime, out: &mut Vec<Packet>) {
        self.stats.timeouts += 1;
        match self.state {
            ConnState::SynSent => {
                if self.syn_retries_done >= self.cfg.syn_retries {
                    self.finish(now, FlowStatus::Failed);
                    return;
                }
                self.syn_retries_done += 1;
                self.backoff += 1;
                self.stats.syn_sent += 1;
                out.push(self.syn());
                self.rto_deadline = Some(now + self.rto());
            }
            ConnState::Established => {
                self.consecutive_timeouts += 1;
                if self.consecutive_timeouts > self.cfg.data_retries {
                    self.finish(now, FlowStatus::TimedOut);
                    return;
                }
                let flight_segs = (self.in_flight() as f64 / self.cfg.mss as f64).ceil();
                self.ssthresh = (flight_segs / 2.0).max(2.0);
                self.cwnd = 1.0;
                self.recover = None;
                self.dup_acks = 0;
                self.backoff += 1;
                self.snd_nxt = self.snd_una;
                self.timed = None;
                let len = self.cfg.mss.min(self.total - self.snd_una);
                self.send_segment(now, len, out);
                self.rto_deadline = Some(now + self.rto());
            }
            _ => {}
        }
    }

    fn on_persist(&mut self, now: SimTime, out: &mut Vec<Packet>) {
        if self.state != ConnState::Established || self.in_flight() > 0 {
            return;
        }
        let len = self
            .effective_window()
            .min(self.cfg.mss)
            .min(self.total - self.snd_nxt);
        if len > 0 {
            self.stats.persist_probes += 1;
            self.send_segment(now, len, out);
        } else {
            self.persist_deadline = Some(now + self.rto());
        }
    }

    /// RST handling: accepted only while connected and only when its sequence
    /// number is the one expected from the peer.
    pub fn on_rst(&mut self, now: SimTime, pkt: &Packet) -> bool {
        let expected = match self.state {
            ConnState::Established => self.peer_isn.wrapping_add(1),
            ConnState::SynSent => {
                // a RST answering our SYN must acknowledge it
                if pkt.has(TcpFlags::ACK) && pkt.ack == 1 {
                    self.finish(now, FlowStatus::Failed);
                    return true;
                }
                return false;
            }
            _ => return false,
        };
        let window = self.cfg.rcv_buffer;
        if pkt.seq >= expected && pkt.seq - expected < window.max(1) {
            self.finish(now, FlowStatus::Disconnected);
            true
        } else {
            false
        }
    }
}
