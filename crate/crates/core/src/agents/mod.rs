//! The four inter-domain agents. Each one bridges a topic family on the bus and the extended
//! database; they are implemented as handler blocks on [`Controller`](crate::controller::Controller).
//!
//! | agent        | topics                                     | trigger                   |
//! |--------------|--------------------------------------------|---------------------------|
//! | connectivity | `connectivity.<ID>.update`                 | peering change, new peer  |
//! | monitoring   | `monitoring.<ID>.2s`, `monitoring.<ID>.10s`| monitoring period         |
//! | reachability | `reachability.<ID>.update`                 | host appears or leaves    |
//! | reservation  | `<ID>.reserve.<verb>`                      | admission, reroute        |

pub mod connectivity;
pub mod monitoring;
pub mod preempt;
pub mod reachability;
pub mod reservation;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::messenger::Topic;
use crate::model::{DirLink, DomainAdjacency, DomainId, FlowSpec, HostAddr, HostId, MonitoringSample};

pub use monitoring::{classify_links, monitoring_plan, LinkClass, LinkQuality, MonitoringPlan, WEAK_LATENCY_MS};
pub use preempt::{PreemptionPlan, VictimPlan};

pub const MONITOR_PERIOD_MS: u64 = 2000;
pub const SLOW_MONITOR_PERIOD_MS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityAdvert {
    pub origin: DomainId,
    pub peering: Vec<DomainAdjacency>,
}

/// Latest measurement of one direction of the reporter's peering links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeeringEntry {
    pub link: DirLink,
    pub latency_ms: Option<f64>,
    pub available_mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitoringAdvert {
    pub origin: DomainId,
    pub period_ms: u64,
    pub samples: Vec<MonitoringSample>,
    pub peering: Vec<PeeringEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachabilityAdvert {
    pub origin: DomainId,
    pub added: Vec<HostId>,
    pub removed: Vec<HostAddr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReservationKind {
    Setup,
    Update,
    Accept,
    Reject,
    Teardown,
}

impl ReservationKind {
    pub fn verb(&self) -> &'static str {
        match self {
            ReservationKind::Setup => "setup",
            ReservationKind::Update => "update",
            ReservationKind::Accept => "accept",
            ReservationKind::Reject => "reject",
            ReservationKind::Teardown => "teardown",
        }
    }
}

/// Hop-by-hop reservation signalling. `hop_index` is the position of the receiving domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservationMsg {
    pub kind: ReservationKind,
    pub flow: FlowSpec,
    pub domain_path: Vec<DomainId>,
    pub peering: Vec<DirLink>,
    pub hop_index: usize,
    /// Accept and reject answer either a setup or an update.
    #[serde(default)]
    pub update: bool,
    /// Teardown travels on to the next hop when set.
    #[serde(default)]
    pub cascade: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Accounting class of a control-plane frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Bus,
    Monitoring,
    Reachability,
    Connectivity,
    Reservation,
}

impl Category {
    pub const ALL: [Category; 5] =
        [Category::Bus, Category::Monitoring, Category::Reachability, Category::Connectivity, Category::Reservation];

    /// Classifies by topic: agent families by first segment, reservations by a second
    /// segment of `reserve`, everything else (federation housekeeping, discovery) as bus.
    pub fn of_topic(topic: &str) -> Category {
        let mut seg = topic.split('.');
        let first = seg.next().unwrap_or("");
        let second = seg.next().unwrap_or("");
        match (first, second) {
            ("monitoring", _) => Category::Monitoring,
            ("reachability", _) => Category::Reachability,
            ("connectivity", _) => Category::Connectivity,
            (_, "reserve") => Category::Reservation,
            _ => Category::Bus,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Bus => "bus",
            Category::Monitoring => "monitoring",
            Category::Reachability => "reachability",
            Category::Connectivity => "connectivity",
            Category::Reservation => "reservation",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn connectivity_topic(id: &DomainId) -> Topic {
    Topic::new("connectivity", id.as_str(), "update").expect("valid topic")
}

pub fn reachability_topic(id: &DomainId) -> Topic {
    Topic::new("reachability", id.as_str(), "update").expect("valid topic")
}

pub fn monitoring_topic(id: &DomainId, period_ms: u64) -> Topic {
    Topic::new("monitoring", id.as_str(), format!("{}s", period_ms / 1000)).expect("valid topic")
}

pub fn reservation_topic(to: &DomainId, kind: ReservationKind) -> Topic {
    Topic::new(to.as_str(), "reserve", kind.verb()).expect("valid topic")
}

/// Patterns every controller subscribes to at boot.
pub fn default_subscriptions(id: &DomainId) -> Vec<Topic> {
    ["connectivity.*.*", "monitoring.*.*", "reachability.*.*", "general.*.*"]
        .iter()
        .map(|p| p.parse().expect("valid pattern"))
        .chain(std::iter::once(Topic::new(id.as_str(), "*", "*").expect("valid pattern")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categories_follow_topic_families() {
        assert_eq!(Category::of_topic("monitoring.A.2s"), Category::Monitoring);
        assert_eq!(Category::of_topic("connectivity.B.update"), Category::Connectivity);
        assert_eq!(Category::of_topic("reachability.C.update"), Category::Reachability);
        assert_eq!(Category::of_topic("C.reserve.setup"), Category::Reservation);
        assert_eq!(Category::of_topic("fed.keepalive.A"), Category::Bus);
        assert_eq!(Category::of_topic("general.leave.A"), Category::Bus);
        assert_eq!(Category::of_topic("mlldp"), Category::Bus);
    }

    #[test]
    fn topics_are_three_segments() {
        let a = DomainId::new("A").unwrap();
        assert_eq!(monitoring_topic(&a, 2000).to_string(), "monitoring.A.2s");
        assert_eq!(monitoring_topic(&a, 10_000).to_string(), "monitoring.A.10s");
        assert_eq!(reservation_topic(&a, ReservationKind::Accept).to_string(), "A.reserve.accept");
    }
}
