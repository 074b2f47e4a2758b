use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::model::{DirLink, SimTime};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMode {
    /// Fires when the counter exceeds the ceiling.
    Absolute,
    /// Fires when the counter grew by more than the ceiling over the last `window_ms`.
    Relative { window_ms: SimTime },
}

/// Ceiling on the drop counter of one link direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdEvent {
    pub id: String,
    pub subject: DirLink,
    pub mode: ThresholdMode,
    pub ceiling: f64,
    pub fired_at: Option<SimTime>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EventError {
    #[error("relative event {0} needs a positive window")]
    ZeroWindow(String),
    #[error("event {0} watches unknown link {1}")]
    UnknownSubject(String, DirLink),
    #[error("event {0} already registered")]
    Duplicate(String),
}

#[derive(Debug, Clone)]
struct Watch {
    event: ThresholdEvent,
    armed: bool,
    history: VecDeque<(SimTime, u64)>,
}

/// Registered threshold events. Each fires once per excursion above its ceiling and re-arms
/// when the watched value falls back to or below it.
#[derive(Debug, Clone, Default)]
pub struct EventRegistry {
    watches: BTreeMap<String, Watch>,
}

impl EventRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, event: ThresholdEvent, subject_exists: bool) -> Result<(), EventError> {
        if let ThresholdMode::Relative { window_ms: 0 } = event.mode {
            return Err(EventError::ZeroWindow(event.id));
        }
        if !subject_exists {
            return Err(EventError::UnknownSubject(event.id, event.subject));
        }
        if self.watches.contains_key(&event.id) {
            return Err(EventError::Duplicate(event.id));
        }
        self.watches.insert(event.id.clone(), Watch { event, armed: true, history: VecDeque::new() });
        Ok(())
    }

    pub fn events(&self) -> impl Iterator<Item = &ThresholdEvent> {
        self.watches.values().map(|w| &w.event)
    }

    pub fn is_empty(&self) -> bool {
        self.watches.is_empty()
    }

    /// Samples every watched counter at `now` and returns the events that fired.
    pub fn evaluate(&mut self, now: SimTime, counter: impl Fn(&DirLink) -> u64) -> Vec<ThresholdEvent> {
        let mut fired = Vec::new();
        for w in self.watches.values_mut() {
            let value = counter(&w.event.subject);
            let measured = match w.event.mode {
                ThresholdMode::Absolute => value as f64,
                ThresholdMode::Relative { window_ms } => {
                    let horizon = now.saturating_sub(window_ms);
                    while w.history.len() > 1 && w.history[1].0 <= horizon {
                        w.history.pop_front();
                    }
                    let base = w.history.front().filter(|(t, _)| *t <= horizon).map(|(_, v)| *v).unwrap_or(0);
                    w.history.push_back((now, value));
                    value.saturating_sub(base) as f64
                }
            };
            if measured > w.event.ceiling {
                if w.armed {
                    w.armed = false;
                    w.event.fired_at = Some(now);
                    fired.push(w.event.clone());
                }
            } else {
                w.armed = true;
            }
        }
        fired
    }
}
