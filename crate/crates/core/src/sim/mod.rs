//! Deterministic discrete-event data plane: switches, links, forwarding rules, fluid flows and
//! probe frames. Everything runs inside a single-threaded event loop; no operation blocks.

mod network;
mod queue;
mod trace;
mod traffic;

pub use network::{ForwardingRule, Network, Walk, WalkOutcome};
pub use queue::EventQueue;
pub use trace::{Trace, TraceRecord};
pub use traffic::{FlowSample, FlowTraffic, PacketIn, TrafficEngine, TICK_MS};

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{DirLink, DomainId, Endpoint, HostAddr, LinkKey, LinkSpec, NodeId, SimTime};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("cannot schedule at {at} ms, clock is already at {now} ms")]
    InThePast { at: SimTime, now: SimTime },
    #[error("unknown switch {0}")]
    UnknownSwitch(NodeId),
    #[error("unknown link {0}")]
    UnknownLink(String),
    #[error("unknown host {0}")]
    UnknownHost(HostAddr),
    #[error("host {0} is not attached")]
    DetachedHost(HostAddr),
    #[error("port {0} is already in use")]
    PortInUse(Endpoint),
}

/// Static network description: the input the data plane and the controllers are built from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Topology {
    pub domains: Vec<DomainId>,
    pub switches: Vec<NodeId>,
    pub hosts: Vec<(HostAddr, Endpoint)>,
    /// Both directions of every declared link.
    pub links: Vec<LinkSpec>,
}

impl Topology {
    pub fn switches_of<'a>(&'a self, domain: &'a DomainId) -> impl Iterator<Item = &'a NodeId> + 'a {
        self.switches.iter().filter(move |s| &s.domain == domain)
    }

    pub fn hosts_of<'a>(&'a self, domain: &'a DomainId) -> impl Iterator<Item = &'a (HostAddr, Endpoint)> + 'a {
        self.hosts.iter().filter(move |(_, e)| e.domain() == domain)
    }

    /// Links with at least one end inside `domain`.
    pub fn links_touching<'a>(&'a self, domain: &'a DomainId) -> impl Iterator<Item = &'a LinkSpec> + 'a {
        self.links
            .iter()
            .filter(move |l| l.link.from.domain() == domain || l.link.to.domain() == domain)
    }

    pub fn peering_keys(&self) -> BTreeSet<LinkKey> {
        self.links.iter().filter(|l| l.link.is_peering()).map(|l| l.link.key()).collect()
    }

    pub fn link(&self, link: &DirLink) -> Option<&LinkSpec> {
        self.links.iter().find(|l| &l.link == link)
    }

    /// Ordered pairs of domains joined by at least one peering link.
    pub fn domain_pairs(&self) -> BTreeSet<(DomainId, DomainId)> {
        self.links
            .iter()
            .filter(|l| l.link.is_peering())
            .map(|l| (l.link.from.domain().clone(), l.link.to.domain().clone()))
            .collect()
    }
}
