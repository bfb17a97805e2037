use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::model::SimTime;

/// An entry popped from the queue.
#[derive(Debug, Clone, PartialEq)]
pub struct Scheduled<E> {
    pub time: SimTime,
    pub seq: u64,
    pub event: E,
}

struct Entry<E>(Scheduled<E>);

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.0.seq == other.0.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.0.time, self.0.seq).cmp(&(other.0.time, other.0.seq))
    }
}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-queue over `(time, seq)`. Sequence numbers are handed out at
/// scheduling time, so equal-time events run in scheduling order.
pub struct EventQueue<E> {
    heap: BinaryHeap<Reverse<Entry<E>>>,
    next_seq: u64,
    now: SimTime,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self {
            heap: BinaryHeap::new(),
            next_seq: 0,
            now: SimTime::ZERO,
        }
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Fails if `time` precedes the current clock.
    pub fn schedule(&mut self, time: SimTime, event: E) -> Result<u64, SimTime> {
        if time < self.now {
            return Err(self.now);
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Entry(Scheduled { time, seq, event })));
        Ok(seq)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|Reverse(e)| e.0.time)
    }

    /// Pops the earliest event and advances the clock to it.
    pub fn pop(&mut self) -> Option<Scheduled<E>> {
        let Reverse(Entry(s)) = self.heap.pop()?;
        debug_assert!(s.time >= self.now);
        self.now = s.time;
        Some(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ties_break_by_schedule_order() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_secs(5.0), "b").unwrap();
        q.schedule(SimTime::from_secs(1.0), "a").unwrap();
        q.schedule(SimTime::from_secs(5.0), "c").unwrap();
        let order: Vec<_> = std::iter::from_fn(|| q.pop().map(|s| s.event)).collect();
        assert_eq!(order, vec!["a", "b", "c"]);
    }

    #[test]
    fn rejects_the_past() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_secs(10.0), ()).unwrap();
        q.pop();
        assert_eq!(q.schedule(SimTime::from_secs(9.0), ()), Err(SimTime::from_secs(10.0)));
        assert!(q.schedule(SimTime::from_secs(10.0), ()).is_ok());
    }

    proptest! {
        #[test]
        fn pops_in_time_then_seq_order(times in prop::collection::vec(0u32..50, 1..100)) {
            let mut q = EventQueue::new();
            for t in &times {
                q.schedule(SimTime::from_secs(*t as f64), ()).unwrap();
            }
            let mut last = (SimTime::ZERO, 0u64);
            let mut first = true;
            while let Some(s) = q.pop() {
                if !first {
                    prop_assert!((s.time, s.seq) > last);
                }
                first = false;
                last = (s.time, s.seq);
            }
        }
    }
}
