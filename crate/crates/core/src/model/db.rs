//! The extended database: everything a controller knows about its own domain and the rest of
//! the federation. All controller modules and agents read and write through this type.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{
    DirLink, DomainId, Endpoint, FlowId, HostAddr, HostId, LinkKey, LinkSpec, ModelError,
    MonitoringSample, NodeId, Reservation, ReservationState, SimTime, TransitPair,
};

const HOLD_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostRecord {
    pub domain: DomainId,
    pub attach: Option<Endpoint>,
}

/// State of one of the owner's own peering links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeeringStatus {
    pub neighbor: DomainId,
    pub up: bool,
}

/// One peering link as advertised by a connectivity advert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainAdjacency {
    pub link: LinkKey,
    pub neighbor: DomainId,
    pub latency_ms: f64,
    pub capacity_mbps: f64,
    pub weak: bool,
    pub up: bool,
}

/// Latest metrics for one direction of a peering link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeeringMetric {
    pub reporter: DomainId,
    pub latency_ms: Option<f64>,
    pub available_mbps: f64,
    pub timestamp: SimTime,
}

/// Latest probe result for one of the owner's links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkMetric {
    pub latency_ms: Option<f64>,
    pub timestamp: SimTime,
}

#[derive(Debug, Clone)]
pub struct ExtendedDatabase {
    owner: DomainId,
    switches: BTreeSet<NodeId>,
    links: BTreeMap<DirLink, LinkSpec>,
    peering_status: BTreeMap<LinkKey, PeeringStatus>,
    domain_graph: BTreeMap<DomainId, Vec<DomainAdjacency>>,
    hosts: BTreeMap<HostAddr, HostRecord>,
    monitoring: BTreeMap<(DomainId, TransitPair), MonitoringSample>,
    advert_period: BTreeMap<DomainId, u64>,
    peering_metrics: BTreeMap<DirLink, PeeringMetric>,
    link_metrics: BTreeMap<DirLink, LinkMetric>,
    reservations: BTreeMap<FlowId, Reservation>,
    updates: BTreeMap<FlowId, Reservation>,
}

impl ExtendedDatabase {
    pub fn new(owner: DomainId) -> Self {
        ExtendedDatabase {
            owner,
            switches: BTreeSet::new(),
            links: BTreeMap::new(),
            peering_status: BTreeMap::new(),
            domain_graph: BTreeMap::new(),
            hosts: BTreeMap::new(),
            monitoring: BTreeMap::new(),
            advert_period: BTreeMap::new(),
            peering_metrics: BTreeMap::new(),
            link_metrics: BTreeMap::new(),
            reservations: BTreeMap::new(),
            updates: BTreeMap::new(),
        }
    }

    pub fn owner(&self) -> &DomainId {
        &self.owner
    }

    // ---- local topology -------------------------------------------------------------------

    pub fn add_switch(&mut self, node: NodeId) {
        self.switches.insert(node);
    }

    pub fn switches(&self) -> impl Iterator<Item = &NodeId> {
        self.switches.iter()
    }

    /// Registers one direction of an intra link or of one of the owner's peering links.
    pub fn add_link(&mut self, spec: LinkSpec) {
        if spec.link.is_peering() {
            let neighbor = if spec.link.from.domain() == &self.owner {
                spec.link.to.domain().clone()
            } else {
                spec.link.from.domain().clone()
            };
            self.peering_status
                .entry(spec.link.key())
                .or_insert(PeeringStatus { neighbor, up: false });
        }
        self.links.insert(spec.link.clone(), spec);
    }

    pub fn link(&self, link: &DirLink) -> Option<&LinkSpec> {
        self.links.get(link)
    }

    pub fn links(&self) -> impl Iterator<Item = &LinkSpec> {
        self.links.values()
    }

    pub fn intra_links(&self) -> impl Iterator<Item = &LinkSpec> {
        self.links.values().filter(|l| !l.link.is_peering())
    }

    /// Own peering links, outgoing direction only.
    pub fn own_peering_out(&self) -> impl Iterator<Item = &LinkSpec> + '_ {
        self.links
            .values()
            .filter(move |l| l.link.is_peering() && l.link.from.domain() == &self.owner)
    }

    pub fn peering_status(&self) -> &BTreeMap<LinkKey, PeeringStatus> {
        &self.peering_status
    }

    /// Marks an own peering link up or down. Returns true when the status changed.
    pub fn set_peering_up(&mut self, key: &LinkKey, up: bool) -> bool {
        match self.peering_status.get_mut(key) {
            Some(st) if st.up != up => {
                st.up = up;
                true
            }
            _ => false,
        }
    }

    pub fn is_peering_up(&self, key: &LinkKey) -> bool {
        self.peering_status.get(key).map(|s| s.up).unwrap_or(false)
    }

    // ---- inter-domain graph ---------------------------------------------------------------

    pub fn set_adjacency(&mut self, origin: DomainId, entries: Vec<DomainAdjacency>) {
        self.domain_graph.insert(origin, entries);
    }

    pub fn adjacency(&self, domain: &DomainId) -> Option<&[DomainAdjacency]> {
        self.domain_graph.get(domain).map(|v| v.as_slice())
    }

    pub fn domain_graph(&self) -> &BTreeMap<DomainId, Vec<DomainAdjacency>> {
        &self.domain_graph
    }

    /// Every domain this controller has heard of, itself included.
    pub fn known_domains(&self) -> BTreeSet<DomainId> {
        let mut out = BTreeSet::new();
        out.insert(self.owner.clone());
        for st in self.peering_status.values().filter(|s| s.up) {
            out.insert(st.neighbor.clone());
        }
        for (d, adj) in &self.domain_graph {
            out.insert(d.clone());
            for a in adj.iter().filter(|a| a.up) {
                out.insert(a.neighbor.clone());
            }
        }
        out
    }

    /// Up inter-domain edges as the owner currently sees them.
    ///
    /// The owner is authoritative for its own links. A remote link is up only if every
    /// endpoint domain that advertised it reports it up.
    pub fn domain_edges(&self) -> BTreeMap<LinkKey, (DomainId, DomainId)> {
        let mut verdict: BTreeMap<LinkKey, bool> = BTreeMap::new();
        let mut ends: BTreeMap<LinkKey, (DomainId, DomainId)> = BTreeMap::new();
        for (origin, adj) in &self.domain_graph {
            if origin == &self.owner {
                continue;
            }
            for a in adj {
                if a.link.touches(&self.owner) {
                    continue;
                }
                let v = verdict.entry(a.link.clone()).or_insert(true);
                *v &= a.up;
                ends.insert(a.link.clone(), (origin.clone(), a.neighbor.clone()));
            }
        }
        for (key, st) in &self.peering_status {
            verdict.insert(key.clone(), st.up);
            ends.insert(key.clone(), (self.owner.clone(), st.neighbor.clone()));
        }
        ends.into_iter().filter(|(k, _)| verdict.get(k).copied().unwrap_or(false)).collect()
    }

    /// Static description of any peering link known locally or through adverts.
    pub fn peering_spec(&self, key: &LinkKey) -> Option<DomainAdjacency> {
        if let Some(st) = self.peering_status.get(key) {
            let spec = self.links.get(key.forward())?;
            return Some(DomainAdjacency {
                link: key.clone(),
                neighbor: st.neighbor.clone(),
                latency_ms: spec.latency_ms,
                capacity_mbps: spec.capacity_mbps,
                weak: spec.weak,
                up: st.up,
            });
        }
        self.domain_graph.values().flatten().find(|a| &a.link == key).cloned()
    }

    /// Drops everything learned from `domain`. Returns true if anything was removed.
    pub fn purge_domain(&mut self, domain: &DomainId) -> bool {
        let mut removed = self.domain_graph.remove(domain).is_some();
        let before = self.hosts.len();
        self.hosts.retain(|_, h| &h.domain != domain);
        removed |= before != self.hosts.len();
        let before = self.monitoring.len();
        self.monitoring.retain(|(r, _), _| r != domain);
        removed |= before != self.monitoring.len();
        self.peering_metrics.retain(|_, m| &m.reporter != domain);
        self.advert_period.remove(domain);
        removed
    }

    // ---- hosts ----------------------------------------------------------------------------

    /// Maps `host` to `domain`, returning the previous domain if there was one.
    pub fn upsert_host(&mut self, host: HostId, domain: DomainId) -> Option<DomainId> {
        self.hosts.insert(host.address, HostRecord { domain, attach: host.attach }).map(|r| r.domain)
    }

    /// Removes the mapping for `host` if it currently points at `domain`.
    pub fn remove_host_if(&mut self, host: &HostAddr, domain: &DomainId) -> bool {
        if self.hosts.get(host).map(|r| &r.domain == domain).unwrap_or(false) {
            self.hosts.remove(host);
            true
        } else {
            false
        }
    }

    pub fn host(&self, host: &HostAddr) -> Option<&HostRecord> {
        self.hosts.get(host)
    }

    pub fn hosts(&self) -> &BTreeMap<HostAddr, HostRecord> {
        &self.hosts
    }

    pub fn local_hosts(&self) -> impl Iterator<Item = (&HostAddr, &HostRecord)> + '_ {
        self.hosts.iter().filter(move |(_, r)| r.domain == self.owner)
    }

    // ---- monitoring -----------------------------------------------------------------------

    /// Stores `sample` unless a newer one for the same key is already present.
    pub fn record_monitoring(&mut self, sample: MonitoringSample) -> bool {
        let key = (sample.reporter.clone(), sample.pair.clone());
        match self.monitoring.get(&key) {
            Some(old) if old.timestamp > sample.timestamp => false,
            _ => {
                self.monitoring.insert(key, sample);
                true
            }
        }
    }

    /// Replaces all of `reporter`'s transit samples with a fresh advert's contents.
    pub fn replace_monitoring(&mut self, reporter: &DomainId, samples: Vec<MonitoringSample>, period_ms: u64) {
        let newest = samples.iter().map(|s| s.timestamp).max();
        let stale = self
            .monitoring
            .iter()
            .any(|((r, _), s)| r == reporter && Some(s.timestamp) > newest);
        if stale {
            return;
        }
        self.monitoring.retain(|(r, _), _| r != reporter);
        for s in samples {
            self.record_monitoring(s);
        }
        self.advert_period.insert(reporter.clone(), period_ms);
    }

    pub fn latest_monitoring(&self, reporter: &DomainId, pair: &TransitPair) -> Option<&MonitoringSample> {
        self.monitoring.get(&(reporter.clone(), pair.clone()))
    }

    pub fn monitoring_of<'a>(&'a self, reporter: &'a DomainId) -> impl Iterator<Item = &'a MonitoringSample> + 'a {
        self.monitoring.values().filter(move |s| &s.reporter == reporter)
    }

    pub fn advert_period(&self, reporter: &DomainId) -> Option<u64> {
        self.advert_period.get(reporter).copied()
    }

    pub fn record_peering_metric(&mut self, link: DirLink, metric: PeeringMetric) {
        match self.peering_metrics.get(&link) {
            Some(old) if old.timestamp > metric.timestamp => {}
            _ => {
                self.peering_metrics.insert(link, metric);
            }
        }
    }

    pub fn peering_metric(&self, link: &DirLink) -> Option<&PeeringMetric> {
        self.peering_metrics.get(link)
    }

    pub fn record_link_metric(&mut self, link: DirLink, metric: LinkMetric) {
        self.link_metrics.insert(link, metric);
    }

    pub fn link_metric(&self, link: &DirLink) -> Option<&LinkMetric> {
        self.link_metrics.get(link)
    }

    // ---- reservations ---------------------------------------------------------------------

    pub fn capacity(&self, link: &DirLink) -> Result<f64, ModelError> {
        self.links
            .get(link)
            .map(|l| l.capacity_mbps)
            .ok_or_else(|| ModelError::UnknownLink(link.clone()))
    }

    pub fn committed_holds(&self, link: &DirLink) -> f64 {
        self.reservations
            .values()
            .filter(|r| r.state == ReservationState::Committed)
            .filter_map(|r| r.per_link_holds.get(link))
            .sum()
    }

    pub fn pending_holds(&self, link: &DirLink) -> f64 {
        let fresh: f64 = self
            .reservations
            .values()
            .filter(|r| r.state == ReservationState::Pending)
            .filter_map(|r| r.per_link_holds.get(link))
            .sum();
        let upd: f64 = self.updates.values().filter_map(|r| r.per_link_holds.get(link)).sum();
        fresh + upd
    }

    /// Capacity minus committed holds, clamped at zero.
    pub fn residual_bandwidth(&self, link: &DirLink) -> Result<f64, ModelError> {
        let cap = self.capacity(link)?;
        Ok((cap - self.committed_holds(link)).max(0.0))
    }

    /// Capacity minus committed and pending holds; what a new request may still take.
    pub fn admissible_bandwidth(&self, link: &DirLink) -> Result<f64, ModelError> {
        let cap = self.capacity(link)?;
        Ok((cap - self.committed_holds(link) - self.pending_holds(link)).max(0.0))
    }

    pub fn reservation(&self, flow: &FlowId) -> Option<&Reservation> {
        self.reservations.get(flow)
    }

    pub fn reservation_mut(&mut self, flow: &FlowId) -> Option<&mut Reservation> {
        self.reservations.get_mut(flow)
    }

    pub fn reservations(&self) -> impl Iterator<Item = &Reservation> {
        self.reservations.values()
    }

    pub fn insert_reservation(&mut self, r: Reservation) {
        self.reservations.insert(r.flow.id.clone(), r);
    }

    pub fn remove_reservation(&mut self, flow: &FlowId) -> Option<Reservation> {
        self.reservations.remove(flow)
    }

    pub fn pending_update(&self, flow: &FlowId) -> Option<&Reservation> {
        self.updates.get(flow)
    }

    pub fn updates(&self) -> impl Iterator<Item = &Reservation> {
        self.updates.values()
    }

    pub fn insert_update(&mut self, r: Reservation) {
        self.updates.insert(r.flow.id.clone(), r);
    }

    pub fn remove_update(&mut self, flow: &FlowId) -> Option<Reservation> {
        self.updates.remove(flow)
    }

    /// Promotes a pending update to the committed reservation for its flow.
    pub fn commit_update(&mut self, flow: &FlowId) -> Option<Reservation> {
        let mut upd = self.updates.remove(flow)?;
        upd.state = ReservationState::Committed;
        self.reservations.insert(flow.clone(), upd)
    }

    /// Checks the database-level invariants: no over-subscribed link, holds equal to flow
    /// demand, and committed holds only on known links.
    pub fn check_invariants(&self) -> Result<(), ModelError> {
        for r in self.reservations.values().chain(self.updates.values()) {
            for (link, held) in &r.per_link_holds {
                if (held - r.flow.bandwidth_mbps).abs() > HOLD_EPSILON {
                    return Err(ModelError::InvalidFlow(r.flow.id.clone(), "hold differs from demand"));
                }
                if !self.links.contains_key(link) {
                    return Err(ModelError::UnknownLink(link.clone()));
                }
            }
        }
        for spec in self.links.values() {
            let held = self.committed_holds(&spec.link);
            if held > spec.capacity_mbps + HOLD_EPSILON {
                return Err(ModelError::OverSubscribed {
                    link: spec.link.clone(),
                    held,
                    capacity: spec.capacity_mbps,
                });
            }
        }
        Ok(())
    }

    /// Canonical, key-sorted JSON rendering of the whole database.
    pub fn snapshot(&self) -> String {
        fn keyed<K: ToString, V: Serialize>(m: impl IntoIterator<Item = (K, V)>) -> Value {
            let mut out = Map::new();
            for (k, v) in m {
                out.insert(k.to_string(), serde_json::to_value(v).expect("serializable"));
            }
            Value::Object(out)
        }
        let doc = json!({
            "owner": self.owner,
            "switches": self.switches,
            "links": keyed(self.links.iter()),
            "peering_status": keyed(self.peering_status.iter()),
            "domain_graph": keyed(self.domain_graph.iter()),
            "hosts": keyed(self.hosts.iter()),
            "monitoring": keyed(self.monitoring.iter().map(|((r, p), s)| (format!("{r}/{p}"), s))),
            "advert_period": keyed(self.advert_period.iter()),
            "peering_metrics": keyed(self.peering_metrics.iter()),
            "link_metrics": keyed(self.link_metrics.iter()),
            "reservations": keyed(self.reservations.iter()),
            "updates": keyed(self.updates.iter()),
        });
        // serde_json's default map is a BTreeMap, so key order is already canonical.
        serde_json::to_string_pretty(&doc).expect("serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FlowSpec, LinkKind};

    fn d(s: &str) -> DomainId {
        DomainId::new(s).unwrap()
    }

    fn link(s: &str) -> DirLink {
        s.parse().unwrap()
    }

    fn db_with_link(cap: f64) -> (ExtendedDatabase, DirLink) {
        let mut db = ExtendedDatabase::new(d("A"));
        let l = link("A.0:1>A.1:1");
        db.add_link(LinkSpec::new(l.clone(), 1.0, cap));
        (db, l)
    }

    fn hold(id: &str, l: &DirLink, mbps: f64, state: ReservationState) -> Reservation {
        Reservation {
            flow: FlowSpec {
                id: FlowId::new(id),
                src: HostAddr::new("x"),
                dst: HostAddr::new("y"),
                priority: 0,
                bandwidth_mbps: mbps,
                max_latency_ms: None,
            },
            domain_path: vec![d("A")],
            peering: vec![],
            hop_index: 0,
            per_link_holds: [(l.clone(), mbps)].into_iter().collect(),
            state,
            segment: vec![l.clone()],
        }
    }

    #[test]
    fn upsert_host_reports_previous_domain() {
        let mut db = ExtendedDatabase::new(d("A"));
        let h = HostId::detached(HostAddr::new("h2"));
        assert_eq!(db.upsert_host(h.clone(), d("C")), None);
        assert_eq!(db.upsert_host(h.clone(), d("B")), Some(d("C")));
        assert_eq!(db.upsert_host(h.clone(), d("B")), Some(d("B")));
        assert_eq!(db.host(&h.address).unwrap().domain, d("B"));
    }

    #[test]
    fn residual_subtracts_committed_holds() {
        let (mut db, l) = db_with_link(10.0);
        assert_eq!(db.residual_bandwidth(&l).unwrap(), 10.0);
        db.insert_reservation(hold("f1", &l, 8.0, ReservationState::Committed));
        assert_eq!(db.residual_bandwidth(&l).unwrap(), 2.0);
        db.insert_reservation(hold("f2", &l, 2.0, ReservationState::Committed));
        // oracle: direct subtraction over the enumerated reservation set
        let held: f64 = db.reservations().map(|r| r.per_link_holds[&l]).sum();
        assert_eq!(db.residual_bandwidth(&l).unwrap(), 10.0 - held);
        assert_eq!(db.residual_bandwidth(&l).unwrap(), 0.0);
    }

    #[test]
    fn pending_holds_count_for_admission_only() {
        let (mut db, l) = db_with_link(10.0);
        db.insert_reservation(hold("f1", &l, 4.0, ReservationState::Pending));
        assert_eq!(db.residual_bandwidth(&l).unwrap(), 10.0);
        assert_eq!(db.admissible_bandwidth(&l).unwrap(), 6.0);
    }

    #[test]
    fn residual_of_unknown_link_is_an_error() {
        let (db, _) = db_with_link(10.0);
        assert!(matches!(db.residual_bandwidth(&link("A.9:1>A.1:1")), Err(ModelError::UnknownLink(_))));
    }

    #[test]
    fn latest_monitoring_keeps_newest() {
        let mut db = ExtendedDatabase::new(d("A"));
        let pair = TransitPair { ingress: "B.0".parse().unwrap(), egress: "B.1".parse().unwrap() };
        assert!(db.latest_monitoring(&d("B"), &pair).is_none());
        let s = |t| MonitoringSample {
            reporter: d("B"),
            pair: pair.clone(),
            available_mbps: t as f64,
            latency_ms: Some(2.0),
            timestamp: t,
        };
        db.record_monitoring(s(4000));
        db.record_monitoring(s(2000));
        assert_eq!(db.latest_monitoring(&d("B"), &pair).unwrap().timestamp, 4000);
        db.record_monitoring(s(6000));
        assert_eq!(db.latest_monitoring(&d("B"), &pair).unwrap().timestamp, 6000);
    }

    #[test]
    fn over_subscription_is_detected() {
        let (mut db, l) = db_with_link(10.0);
        db.insert_reservation(hold("f1", &l, 8.0, ReservationState::Committed));
        assert!(db.check_invariants().is_ok());
        db.insert_reservation(hold("f2", &l, 8.0, ReservationState::Committed));
        assert!(matches!(db.check_invariants(), Err(ModelError::OverSubscribed { .. })));
        assert_eq!(db.residual_bandwidth(&l).unwrap(), 0.0);
    }

    #[test]
    fn snapshot_is_stable_and_sorted() {
        let (mut db, l) = db_with_link(10.0);
        db.insert_reservation(hold("f1", &l, 8.0, ReservationState::Committed));
        db.upsert_host(HostId::detached(HostAddr::new("z")), d("A"));
        db.upsert_host(HostId::detached(HostAddr::new("a")), d("A"));
        let a = db.snapshot();
        assert_eq!(a, db.clone().snapshot());
        assert!(a.find("\"a\"").unwrap() < a.find("\"z\"").unwrap());
        assert_eq!(db.link(&l).unwrap().kind, LinkKind::Intra);
    }

    #[test]
    fn own_links_decide_domain_edges() {
        let mut db = ExtendedDatabase::new(d("A"));
        let ab = link("A.1:2>B.0:2");
        db.add_link(LinkSpec::new(ab.clone(), 5.0, 20.0));
        db.add_link(LinkSpec::new(ab.reverse(), 5.0, 20.0));
        assert!(db.domain_edges().is_empty());
        db.set_peering_up(&ab.key(), true);
        assert_eq!(db.domain_edges().len(), 1);
        let bc = link("B.1:2>C.1:2").key();
        let adj = |up| DomainAdjacency {
            link: bc.clone(),
            neighbor: d("C"),
            latency_ms: 5.0,
            capacity_mbps: 20.0,
            weak: false,
            up,
        };
        db.set_adjacency(d("B"), vec![adj(true)]);
        assert_eq!(db.domain_edges().len(), 2);
        db.set_adjacency(d("C"), vec![DomainAdjacency { neighbor: d("B"), ..adj(false) }]);
        assert_eq!(db.domain_edges().len(), 1, "either side reporting down wins");
    }
}
