//! Domain types and the per-controller extended database.

mod db;
mod ids;

pub use db::{
    DomainAdjacency, ExtendedDatabase, HostRecord, LinkMetric, PeeringMetric, PeeringStatus,
};
pub use ids::{
    DirLink, DomainId, Endpoint, FlowId, HostAddr, HostId, LinkKey, NodeId, MAX_DOMAIN_ID_LEN,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Simulated time in milliseconds.
pub type SimTime = u64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid domain identifier {0:?}")]
    InvalidDomainId(String),
    #[error("malformed identifier {0:?}")]
    Syntax(String),
    #[error("unknown link {0}")]
    UnknownLink(DirLink),
    #[error("invalid flow {0}: {1}")]
    InvalidFlow(FlowId, &'static str),
    #[error("link {link} over-subscribed: {held} Mbps held on {capacity} Mbps")]
    OverSubscribed { link: DirLink, held: f64, capacity: f64 },
    #[error("host {0} mapped more than once")]
    DuplicateHost(HostAddr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Intra,
    Peering,
}

/// Static description of one direction of a link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub link: DirLink,
    pub latency_ms: f64,
    pub capacity_mbps: f64,
    pub loss_rate: f64,
    pub kind: LinkKind,
    /// Operator flag for low-quality interconnections (satellite and the like).
    pub weak: bool,
}

impl LinkSpec {
    pub fn new(link: DirLink, latency_ms: f64, capacity_mbps: f64) -> Self {
        let kind = if link.is_peering() { LinkKind::Peering } else { LinkKind::Intra };
        LinkSpec { link, latency_ms, capacity_mbps, loss_rate: 0.0, kind, weak: false }
    }

    pub fn reversed(&self) -> LinkSpec {
        LinkSpec { link: self.link.reverse(), ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub id: FlowId,
    pub src: HostAddr,
    pub dst: HostAddr,
    /// Larger is more important.
    pub priority: i32,
    pub bandwidth_mbps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_latency_ms: Option<f64>,
}

impl FlowSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.src == self.dst {
            return Err(ModelError::InvalidFlow(self.id.clone(), "source equals destination"));
        }
        if !(self.bandwidth_mbps > 0.0) {
            return Err(ModelError::InvalidFlow(self.id.clone(), "bandwidth must be positive"));
        }
        if let Some(l) = self.max_latency_ms {
            if !(l > 0.0) {
                return Err(ModelError::InvalidFlow(self.id.clone(), "latency ceiling must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReservationState {
    Pending,
    Committed,
    Released,
}

/// A domain's share of an end-to-end reservation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reservation {
    pub flow: FlowSpec,
    pub domain_path: Vec<DomainId>,
    /// Inter-domain links in path order; `peering[i]` joins `domain_path[i]` and `domain_path[i + 1]`.
    pub peering: Vec<DirLink>,
    /// Position of the owning domain in `domain_path`.
    pub hop_index: usize,
    pub per_link_holds: BTreeMap<DirLink, f64>,
    pub state: ReservationState,
    /// Links this domain forwards the flow over, in order (ingress peering, intra links, egress peering).
    pub segment: Vec<DirLink>,
}

impl Reservation {
    pub fn is_origin(&self) -> bool {
        self.hop_index == 0
    }

    pub fn is_terminal(&self) -> bool {
        self.hop_index + 1 == self.domain_path.len()
    }

    pub fn uses(&self, link: &DirLink) -> bool {
        self.per_link_holds.contains_key(link)
    }

    /// Whether the flow crosses `link` anywhere this domain knows of.
    pub fn traverses(&self, link: &DirLink) -> bool {
        self.uses(link) || self.peering.contains(link) || self.segment.contains(link)
    }
}

/// Ordered pair of a domain's attachment switches (peering points or host edges).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TransitPair {
    pub ingress: NodeId,
    pub egress: NodeId,
}

impl std::fmt::Display for TransitPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}~{}", self.ingress, self.egress)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitoringSample {
    pub reporter: DomainId,
    pub pair: TransitPair,
    pub available_mbps: f64,
    /// `None` when the pair is currently unreachable inside the domain.
    pub latency_ms: Option<f64>,
    pub timestamp: SimTime,
}
