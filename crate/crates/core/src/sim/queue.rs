use std::collections::BTreeMap;

use crate::model::SimTime;

use super::SimError;

/// Discrete-event queue. Events run in `(at_ms, seq)` order, where `seq` is the insertion
/// counter, so events sharing a timestamp run first-in first-out.
#[derive(Debug, Clone)]
pub struct EventQueue<E> {
    now: SimTime,
    next_seq: u64,
    pending: BTreeMap<(SimTime, u64), E>,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        EventQueue { now: 0, next_seq: 0, pending: BTreeMap::new() }
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn schedule(&mut self, at_ms: SimTime, event: E) -> Result<(), SimError> {
        if at_ms < self.now {
            return Err(SimError::InThePast { at: at_ms, now: self.now });
        }
        self.pending.insert((at_ms, self.next_seq), event);
        self.next_seq += 1;
        Ok(())
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.pending.keys().next().map(|(t, _)| *t)
    }

    /// Pops the next event and advances the clock to its timestamp.
    pub fn pop(&mut self) -> Option<(SimTime, E)> {
        let ((at, _), ev) = self.pending.pop_first()?;
        self.now = at;
        Some((at, ev))
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fires_at_requested_time() {
        let mut q = EventQueue::new();
        q.schedule(0, "timer").unwrap();
        assert_eq!(q.pop(), Some((0, "timer")));
    }

    #[test]
    fn equal_timestamps_fire_in_insertion_order() {
        let mut q = EventQueue::new();
        q.schedule(5, 'b').unwrap();
        q.schedule(5, 'a').unwrap();
        q.schedule(3, 'z').unwrap();
        let order: Vec<_> = std::iter::from_fn(|| q.pop()).collect();
        assert_eq!(order, vec![(3, 'z'), (5, 'b'), (5, 'a')]);
    }

    #[test]
    fn rejects_the_past() {
        let mut q = EventQueue::new();
        q.schedule(5, ()).unwrap();
        q.pop();
        assert_eq!(q.schedule(4, ()), Err(SimError::InThePast { at: 4, now: 5 }));
        assert!(q.schedule(5, ()).is_ok());
    }
}
