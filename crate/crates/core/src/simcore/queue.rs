use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::SimTime;

/// Handle returned by [`EventQueue::schedule`], usable for cancellation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EventId(u64);

struct Entry<E> {
    time: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // BinaryHeap is a max-heap; invert so the earliest (time, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueueStats {
    pub scheduled: u64,
    pub processed: u64,
    pub cancelled: u64,
}

/// Time-ordered event queue with FIFO tie-break at equal timestamps.
pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    now: SimTime,
    next_seq: u64,
    // one bit per sequence number: set once the event was delivered or cancelled
    done: Vec<u64>,
    stats: QueueStats,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            now: SimTime::ZERO,
            next_seq: 0,
            done: Vec::new(),
            stats: QueueStats::default(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Enqueue `event` to fire at `at`.
    ///
    /// Scheduling in the past is a programming error and aborts the run.
    pub fn schedule(&mut self, at: SimTime, event: E) -> EventId {
        assert!(
            at >= self.now,
            "event scheduled in the past: at={} now={}",
            at,
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        if (seq / 64) as usize >= self.done.len() {
            self.done.push(0);
        }
        self.heap.push(Entry {
            time: at,
            seq,
            event,
        });
        self.stats.scheduled += 1;
        EventId(seq)
    }

    pub fn schedule_in(&mut self, delay: SimTime, event: E) -> EventId {
        let at = self.now + delay;
        self.schedule(at, event)
    }

    /// Cancels a pending event. Returns false if it already fired or was cancelled.
    pub fn cancel(&mut self, id: EventId) -> bool {
        if id.0 >= self.next_seq || self.is_done(id.0) {
            return false;
        }
        self.mark_done(id.0);
        self.stats.cancelled += 1;
        true
    }

    fn is_done(&self, seq: u64) -> bool {
        self.done[(seq / 64) as usize] & (1 << (seq % 64)) != 0
    }

    fn mark_done(&mut self, seq: u64) {
        self.done[(seq / 64) as usize] |= 1 << (seq % 64);
    }

    fn drop_cancelled_head(&mut self) {
        while let Some(top) = self.heap.peek() {
            if self.is_done(top.seq) {
                self.heap.pop();
            } else {
                break;
            }
        }
    }

    /// Time of the next live event, if any.
    pub fn peek_time(&mut self) -> Option<SimTime> {
        self.drop_cancelled_head();
        self.heap.peek().map(|e| e.time)
    }

    /// Pops the next live event with `fire_time <= t_end`, advancing the clock.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<(SimTime, E)> {
        self.drop_cancelled_head();
        if self.heap.peek()?.time > t_end {
            return None;
        }
        let entry = self.heap.pop()?;
        self.mark_done(entry.seq);
        self.now = entry.time;
        self.stats.processed += 1;
        Some((entry.time, entry.event))
    }

    /// Live events still waiting to fire.
    pub fn pending(&self) -> u64 {
        self.stats.scheduled - self.stats.processed - self.stats.cancelled
    }

    pub fn stats(&self) -> QueueStats {
        self.stats
    }

    pub(crate) fn advance_clock(&mut self, t: SimTime) {
        if t > self.now {
            self.now = t;
        }
    }
}

/// A simulation model driven by an [`EventQueue`].
pub trait Model {
    type Event;

    fn queue(&mut self) -> &mut EventQueue<Self::Event>;

    fn handle(&mut self, now: SimTime, event: Self::Event);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunSummary {
    pub processed: u64,
    pub pending: u64,
    pub clock: SimTime,
}

/// Delivers every event with `fire_time <= t_end`.
///
/// Afterwards the clock sits at `t_end` if later events remain queued,
/// otherwise at the time of the last delivered event.
pub fn run_until<M: Model>(model: &mut M, t_end: SimTime) -> RunSummary {
    let before = model.queue().stats().processed;
    while let Some((now, ev)) = model.queue().pop_until(t_end) {
        model.handle(now, ev);
    }
    let q = model.queue();
    if q.peek_time().is_some() {
        q.advance_clock(t_end);
    }
    RunSummary {
        processed: q.stats().processed - before,
        pending: q.pending(),
        clock: q.now(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Recorder {
        q: EventQueue<u32>,
        seen: Vec<(SimTime, u32)>,
        period: Option<SimTime>,
    }

    impl Recorder {
        fn new() -> Self {
            Recorder {
                q: EventQueue::new(),
                seen: Vec::new(),
                period: None,
            }
        }
    }

    impl Model for Recorder {
        type Event = u32;
        fn queue(&mut self) -> &mut EventQueue<u32> {
            &mut self.q
        }
        fn handle(&mut self, now: SimTime, ev: u32) {
            self.seen.push((now, ev));
            if let Some(p) = self.period {
                self.q.schedule_in(p, ev + 1);
            }
        }
    }

    #[test]
    fn event_at_zero_is_delivered_first() {
        let mut r = Recorder::new();
        r.q.schedule(SimTime::from_millis(5), 2);
        r.q.schedule(SimTime::ZERO, 1);
        run_until(&mut r, SimTime::from_secs(1));
        assert_eq!(r.seen[0], (SimTime::ZERO, 1));
    }

    #[test]
    fn equal_times_keep_insertion_order() {
        let mut r = Recorder::new();
        for i in 0..10 {
            r.q.schedule(SimTime::from_millis(7), i);
        }
        run_until(&mut r, SimTime::from_secs(1));
        let order: Vec<u32> = r.seen.iter().map(|&(_, e)| e).collect();
        assert_eq!(order, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn clock_follows_event_time() {
        let mut r = Recorder::new();
        r.q.schedule(SimTime::from_millis(200), 0);
        run_until(&mut r, SimTime::from_secs(1));
        assert_eq!(r.seen[0].0, SimTime::from_millis(200));
        assert_eq!(r.q.now(), SimTime::from_millis(200));
    }

    #[test]
    fn empty_queue_returns_immediately() {
        let mut r = Recorder::new();
        let s = run_until(&mut r, SimTime::from_secs(1));
        assert_eq!(s.processed, 0);
        assert_eq!(s.clock, SimTime::ZERO);
    }

    #[test]
    fn end_time_is_inclusive() {
        let mut r = Recorder::new();
        for ms in 1..=3 {
            r.q.schedule(SimTime::from_millis(ms), ms as u32);
        }
        let s = run_until(&mut r, SimTime::from_millis(2));
        assert_eq!(s.processed, 2);
        assert_eq!(s.pending, 1);
        assert_eq!(s.clock, SimTime::from_millis(2));
    }

    #[test]
    fn periodic_timer_fires_ten_times_in_a_second() {
        let mut r = Recorder::new();
        r.period = Some(SimTime::from_millis(100));
        r.q.schedule(SimTime::from_millis(100), 0);
        let s = run_until(&mut r, SimTime::from_secs(1));
        assert_eq!(s.processed, 10);
        assert_eq!(s.clock, SimTime::from_secs(1));
    }

    #[test]
    fn cancelled_events_are_not_delivered() {
        let mut r = Recorder::new();
        let a = r.q.schedule(SimTime::from_millis(1), 1);
        r.q.schedule(SimTime::from_millis(2), 2);
        assert!(r.q.cancel(a));
        assert!(!r.q.cancel(a));
        run_until(&mut r, SimTime::from_secs(1));
        assert_eq!(r.seen, vec![(SimTime::from_millis(2), 2)]);
        let st = r.q.stats();
        assert_eq!(st.scheduled, st.processed + r.q.pending() + st.cancelled);
    }

    #[test]
    #[should_panic(expected = "in the past")]
    fn scheduling_in_the_past_aborts() {
        let mut r = Recorder::new();
        r.q.schedule(SimTime::from_millis(5), 0);
        run_until(&mut r, SimTime::from_secs(1));
        r.q.schedule(SimTime::from_millis(1), 1);
    }
}
