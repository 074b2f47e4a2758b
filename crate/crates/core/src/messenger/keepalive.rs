use crate::model::SimTime;

pub const KEEPALIVE_INTERVAL_MS: SimTime = 500;
pub const MAX_MISSES: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeepAliveAction {
    Send { seq: u64 },
    PeerDown,
}

/// Per-peer keep-alive bookkeeping. A probe left unanswered by the next interval is a miss;
/// the third consecutive miss declares the peer down.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeepAlive {
    outstanding: Option<u64>,
    next_seq: u64,
    misses: u8,
    last_reply_at: Option<SimTime>,
}

impl KeepAlive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn misses(&self) -> u8 {
        self.misses
    }

    pub fn last_reply_at(&self) -> Option<SimTime> {
        self.last_reply_at
    }

    pub fn tick(&mut self) -> KeepAliveAction {
        if self.outstanding.is_some() {
            self.misses += 1;
            if self.misses >= MAX_MISSES {
                self.outstanding = None;
                return KeepAliveAction::PeerDown;
            }
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.outstanding = Some(seq);
        KeepAliveAction::Send { seq }
    }

    /// Only a reply to the probe currently outstanding counts.
    pub fn on_reply(&mut self, seq: u64, now: SimTime) -> bool {
        if self.outstanding == Some(seq) {
            self.outstanding = None;
            self.misses = 0;
            self.last_reply_at = Some(now);
            true
        } else {
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Drives a peer that answers every probe sent at a time in `answered` within `rtt` ms.
    /// Returns the time at which the peer was declared down, if ever.
    fn drive(until: SimTime, rtt: SimTime, answers: impl Fn(SimTime) -> bool) -> (Option<SimTime>, KeepAlive) {
        let mut ka = KeepAlive::new();
        let mut t = 0;
        while t <= until {
            match ka.tick() {
                KeepAliveAction::PeerDown => return (Some(t), ka),
                KeepAliveAction::Send { seq } => {
                    if answers(t) {
                        ka.on_reply(seq, t + rtt);
                    }
                }
            }
            t += KEEPALIVE_INTERVAL_MS;
        }
        (None, ka)
    }

    #[test]
    fn healthy_peer_never_misses() {
        let (down, ka) = drive(10_000, 20, |_| true);
        assert_eq!(down, None);
        assert_eq!(ka.misses(), 0);
    }

    #[test]
    fn silenced_peer_goes_down_after_three_intervals() {
        // hand trace: probes at t, t+500, t+1000 unanswered; third miss counted at t+1500
        for t in [500, 2000, 33_000] {
            let (down, _) = drive(60_000, 20, |s| s < t);
            assert_eq!(down, Some(t + 1500));
        }
    }

    #[test]
    fn two_missed_intervals_then_reply_resets() {
        let (down, ka) = drive(10_000, 20, |s| !(1000..2000).contains(&s));
        assert_eq!(down, None);
        assert_eq!(ka.misses(), 0);
    }

    #[test]
    fn stale_reply_is_ignored() {
        let mut ka = KeepAlive::new();
        let KeepAliveAction::Send { seq } = ka.tick() else { panic!() };
        ka.tick();
        assert!(!ka.on_reply(seq, 600));
        assert_eq!(ka.misses(), 1);
    }
}
