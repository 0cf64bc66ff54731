use std::collections::VecDeque;

use super::LinkParams;
use crate::simcore::SimTime;

/// What a link queue needs to know about the packets it carries.
pub trait EcnMarkable {
    fn ecn_capable(&self) -> bool;
    fn mark_ce(&mut self);
    fn wire_bytes(&self) -> u32;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnqueueOutcome {
    /// The packet finishes serializing at `depart`; `ce` reports a fresh CE mark.
    Accepted { depart: SimTime, ce: bool },
    Dropped,
}

/// FIFO drop-tail queue in front of one direction of a link.
///
/// Departure times are fixed at enqueue (work-conserving FIFO), so the queue
/// only remembers when each resident packet leaves; the caller carries the
/// packet itself to its arrival event.
#[derive(Clone, Debug, Default)]
pub struct LinkQueue {
    departures: VecDeque<SimTime>,
    busy_until: SimTime,
    pub enqueued: u64,
    pub dropped: u64,
    pub ce_marked: u64,
    pub bytes_enqueued: u64,
}

impl LinkQueue {
    fn expire(&mut self, now: SimTime) {
        while self.departures.front().is_some_and(|&d| d <= now) {
            self.departures.pop_front();
        }
    }

    /// Packets queued or being serialized at `now`.
    pub fn depth(&mut self, now: SimTime) -> usize {
        self.expire(now);
        self.departures.len()
    }

    /// Packets that have finished serializing by `now`.
    pub fn departed(&mut self, now: SimTime) -> u64 {
        self.enqueued - self.depth(now) as u64
    }

    pub fn enqueue<P: EcnMarkable>(&mut self, params: &LinkParams, pkt: &mut P, now: SimTime) -> EnqueueOutcome {
        let depth = self.depth(now);
        if depth >= params.queue_capacity {
            self.dropped += 1;
            return EnqueueOutcome::Dropped;
        }
        let mut ce = false;
        if depth >= params.ecn_threshold && pkt.ecn_capable() {
            pkt.mark_ce();
            self.ce_marked += 1;
            ce = true;
        }
        let bytes = pkt.wire_bytes();
        let depart = self.busy_until.max(now) + params.tx_time(bytes);
        self.busy_until = depart;
        self.departures.push_back(depart);
        self.enqueued += 1;
        self.bytes_enqueued += bytes as u64;
        EnqueueOutcome::Accepted { depart, ce }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Clone, PartialEq)]
    struct P {
        ect: bool,
        ce: bool,
    }

    impl EcnMarkable for P {
        fn ecn_capable(&self) -> bool {
            self.ect
        }
        fn mark_ce(&mut self) {
            self.ce = true;
        }
        fn wire_bytes(&self) -> u32 {
            1500
        }
    }

    fn params() -> LinkParams {
        LinkParams {
            bandwidth_bps: 12_000_000,
            prop_delay: SimTime::from_micros(10),
            queue_capacity: 4,
            ecn_threshold: 2,
        }
    }

    fn p(ect: bool) -> P {
        P { ect, ce: false }
    }

    #[test]
    fn empty_queue_accepts_without_mark() {
        let mut q = LinkQueue::default();
        let o = q.enqueue(&params(), &mut p(true), SimTime::ZERO);
        // 1500 B at 12 Mbps = 1 ms
        assert_eq!(o, EnqueueOutcome::Accepted { depart: SimTime::from_millis(1), ce: false });
    }

    #[test]
    fn full_queue_drops() {
        let mut q = LinkQueue::default();
        for _ in 0..4 {
            q.enqueue(&params(), &mut p(false), SimTime::ZERO);
        }
        assert_eq!(q.enqueue(&params(), &mut p(false), SimTime::ZERO), EnqueueOutcome::Dropped);
        assert_eq!(q.enqueued, 4);
        assert_eq!(q.dropped, 1);
        // one slot frees once the head has left
        let o = q.enqueue(&params(), &mut p(false), SimTime::from_millis(1));
        assert_eq!(o, EnqueueOutcome::Accepted { depart: SimTime::from_millis(5), ce: false });
    }

    #[test]
    fn threshold_marks_only_capable_packets() {
        let mut q = LinkQueue::default();
        q.enqueue(&params(), &mut p(true), SimTime::ZERO);
        q.enqueue(&params(), &mut p(true), SimTime::ZERO);
        let mut third = p(true);
        assert!(matches!(q.enqueue(&params(), &mut third, SimTime::ZERO), EnqueueOutcome::Accepted { ce: true, .. }));
        assert!(third.ce);
        let mut fourth = p(false);
        assert!(matches!(q.enqueue(&params(), &mut fourth, SimTime::ZERO), EnqueueOutcome::Accepted { ce: false, .. }));
    }

    #[test]
    fn fifo_departures_and_conservation() {
        let mut q = LinkQueue::default();
        let pr = params();
        let departs: Vec<_> = (0..6)
            .filter_map(|_| match q.enqueue(&pr, &mut p(false), SimTime::ZERO) {
                EnqueueOutcome::Accepted { depart, .. } => Some(depart),
                EnqueueOutcome::Dropped => None,
            })
            .collect();
        assert_eq!(departs, (1..=4).map(SimTime::from_millis).collect::<Vec<_>>());
        let t = SimTime::from_micros(2500);
        let (departed, depth) = (q.departed(t), q.depth(t) as u64);
        assert_eq!(q.enqueued, departed + depth);
        assert_eq!(q.enqueued + q.dropped, 6);
    }
}
