//! QoS path computation: least-latency Dijkstra over switches with bandwidth pruning.
//!
//! The graph mixes three kinds of edges: the owner's own links (measured latency, residual
//! after reservations), peering links of other domains (as advertised), and transit edges
//! that summarise a remote domain as `(ingress, egress)` pairs from its monitoring adverts.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use thiserror::Error;

use crate::model::{DirLink, DomainId, ExtendedDatabase, FlowSpec, HostAddr, NodeId, SimTime};

/// Bandwidth comparisons tolerate this much floating-point slack.
pub const BW_EPSILON: f64 = 1e-9;

/// Remote monitoring data older than this many advertised periods is ignored.
pub const STALE_PERIODS: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub latency_ms: f64,
    pub residual_mbps: f64,
    /// The physical link, or `None` for a transit edge across a remote domain.
    pub link: Option<DirLink>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<Edge>,
    pub total_latency_ms: f64,
    pub bottleneck_residual_mbps: f64,
    pub domain_sequence: Vec<DomainId>,
}

impl PathResult {
    /// Physical links on the path, transit edges omitted.
    pub fn links(&self) -> impl Iterator<Item = &DirLink> {
        self.edges.iter().filter_map(|e| e.link.as_ref())
    }

    /// Inter-domain links in path order.
    pub fn peering(&self) -> Vec<DirLink> {
        self.links().filter(|l| l.is_peering()).cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("host {0} has no known attachment point")]
    UnknownHost(HostAddr),
    #[error("no path with {0} Mbps available")]
    NoPath(f64),
    #[error("best path takes {latency} ms, ceiling is {ceiling} ms")]
    TooSlow { latency: f64, ceiling: f64 },
    #[error("best path revisits a domain")]
    DomainLoop,
}

#[derive(Debug, Clone, Default)]
pub struct QosGraph {
    adj: BTreeMap<NodeId, Vec<Edge>>,
}

/// Dijkstra label, compared by latency, then hop count, then the node/link sequence.
#[derive(Debug, Clone)]
struct Label {
    latency: f64,
    steps: Vec<(NodeId, Option<DirLink>)>,
    edges: Vec<Edge>,
}

impl Label {
    fn key(&self) -> (usize, &[(NodeId, Option<DirLink>)]) {
        (self.steps.len(), &self.steps)
    }
}

impl PartialEq for Label {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Label {}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        self.latency.total_cmp(&other.latency).then_with(|| self.key().cmp(&other.key()))
    }
}

impl QosGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_edge(&mut self, e: Edge) {
        self.adj.entry(e.from.clone()).or_default().push(e);
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.adj.values().flatten()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.values().map(|v| v.len()).sum()
    }

    /// Least-latency path from `src` to `dst` using only edges with at least `demand` Mbps of
    /// residual. Ties go to fewer hops, then to the lexicographically smaller node sequence.
    pub fn shortest_path(&self, src: &NodeId, dst: &NodeId, demand: f64, max_latency: Option<f64>) -> Result<PathResult, PathError> {
        let mut settled: BTreeSet<NodeId> = BTreeSet::new();
        let mut heap = BinaryHeap::new();
        heap.push(Reverse(Label { latency: 0.0, steps: vec![(src.clone(), None)], edges: Vec::new() }));
        let mut found = None;
        while let Some(Reverse(label)) = heap.pop() {
            let at = label.steps.last().expect("non-empty").0.clone();
            if !settled.insert(at.clone()) {
                continue;
            }
            if &at == dst {
                found = Some(label);
                break;
            }
            for e in self.adj.get(&at).into_iter().flatten() {
                if settled.contains(&e.to) || e.residual_mbps + BW_EPSILON < demand {
                    continue;
                }
                let mut next = label.clone();
                next.latency += e.latency_ms;
                next.steps.push((e.to.clone(), e.link.clone()));
                next.edges.push(e.clone());
                heap.push(Reverse(next));
            }
        }
        let label = found.ok_or(PathError::NoPath(demand))?;
        if let Some(ceiling) = max_latency {
            if label.latency > ceiling {
                return Err(PathError::TooSlow { latency: label.latency, ceiling });
            }
        }
        let nodes: Vec<NodeId> = label.steps.iter().map(|(n, _)| n.clone()).collect();
        let mut domain_sequence: Vec<DomainId> = Vec::new();
        for n in &nodes {
            if domain_sequence.last() != Some(&n.domain) {
                if domain_sequence.contains(&n.domain) {
                    return Err(PathError::DomainLoop);
                }
                domain_sequence.push(n.domain.clone());
            }
        }
        let bottleneck = label.edges.iter().map(|e| e.residual_mbps).fold(f64::INFINITY, f64::min);
        Ok(PathResult {
            nodes,
            edges: label.edges,
            total_latency_ms: label.latency,
            bottleneck_residual_mbps: bottleneck,
            domain_sequence,
        })
    }
}

/// Tweaks applied on top of the database when building a graph.
#[derive(Debug, Clone, Default)]
pub struct GraphOptions {
    /// Added to the residual of the listed links (positive frees, negative consumes).
    pub adjust: BTreeMap<DirLink, f64>,
    pub exclude: BTreeSet<DirLink>,
}

impl GraphOptions {
    pub fn credit(&mut self, link: &DirLink, mbps: f64) {
        *self.adjust.entry(link.clone()).or_default() += mbps;
    }
}

pub fn is_fresh(db: &ExtendedDatabase, reporter: &DomainId, timestamp: SimTime, now: SimTime) -> bool {
    let period = db.advert_period(reporter).unwrap_or(crate::agents::MONITOR_PERIOD_MS);
    now.saturating_sub(timestamp) <= STALE_PERIODS * period
}

/// Latency of one of the owner's links: the latest probe if any, the configured value
/// otherwise. `None` when the latest probe was lost.
pub fn own_link_latency(db: &ExtendedDatabase, link: &DirLink) -> Option<f64> {
    let spec = db.link(link)?;
    if link.is_peering() {
        match db.peering_metric(link) {
            Some(m) if &m.reporter == db.owner() => m.latency_ms,
            _ => Some(spec.latency_ms),
        }
    } else {
        match db.link_metric(link) {
            Some(m) => m.latency_ms,
            None => Some(spec.latency_ms),
        }
    }
}

fn adjusted(opts: &GraphOptions, link: &DirLink, residual: f64) -> f64 {
    residual + opts.adjust.get(link).copied().unwrap_or(0.0)
}

/// Graph of the owner's own intra links only.
pub fn intra_graph(db: &ExtendedDatabase, opts: &GraphOptions) -> QosGraph {
    let mut g = QosGraph::new();
    for spec in db.intra_links() {
        if opts.exclude.contains(&spec.link) {
            continue;
        }
        let Some(latency) = own_link_latency(db, &spec.link) else { continue };
        let residual = db.admissible_bandwidth(&spec.link).expect("own link");
        g.add_edge(Edge {
            from: spec.link.from.node.clone(),
            to: spec.link.to.node.clone(),
            latency_ms: latency,
            residual_mbps: adjusted(opts, &spec.link, residual),
            link: Some(spec.link.clone()),
        });
    }
    g
}

/// The owner's view of the whole federation.
pub fn build_graph(db: &ExtendedDatabase, now: SimTime, opts: &GraphOptions) -> QosGraph {
    let owner = db.owner().clone();
    let mut g = intra_graph(db, opts);

    for spec in db.own_peering_out() {
        if opts.exclude.contains(&spec.link) || !db.is_peering_up(&spec.link.key()) {
            continue;
        }
        let Some(latency) = own_link_latency(db, &spec.link) else { continue };
        let residual = db.admissible_bandwidth(&spec.link).expect("own link");
        g.add_edge(Edge {
            from: spec.link.from.node.clone(),
            to: spec.link.to.node.clone(),
            latency_ms: latency,
            residual_mbps: adjusted(opts, &spec.link, residual),
            link: Some(spec.link.clone()),
        });
    }

    for key in db.domain_edges().into_keys().filter(|k| !k.touches(&owner)) {
        let Some(adj) = db.peering_spec(&key) else { continue };
        for dir in key.directions() {
            if opts.exclude.contains(&dir) {
                continue;
            }
            let metric = db
                .peering_metric(&dir)
                .filter(|m| is_fresh(db, &m.reporter, m.timestamp, now));
            let (latency, residual) = match metric {
                Some(m) => match m.latency_ms {
                    Some(l) => (l, m.available_mbps),
                    None => continue,
                },
                None => (adj.latency_ms, adj.capacity_mbps),
            };
            g.add_edge(Edge {
                from: dir.from.node.clone(),
                to: dir.to.node.clone(),
                latency_ms: latency,
                residual_mbps: adjusted(opts, &dir, residual),
                link: Some(dir.clone()),
            });
        }
    }

    for reporter in db.known_domains().into_iter().filter(|d| d != &owner) {
        for s in db.monitoring_of(&reporter) {
            let Some(latency) = s.latency_ms else { continue };
            if !is_fresh(db, &reporter, s.timestamp, now) {
                continue;
            }
            g.add_edge(Edge {
                from: s.pair.ingress.clone(),
                to: s.pair.egress.clone(),
                latency_ms: latency,
                residual_mbps: s.available_mbps,
                link: None,
            });
        }
    }
    g
}

pub fn host_node(db: &ExtendedDatabase, host: &HostAddr) -> Result<NodeId, PathError> {
    db.host(host)
        .and_then(|r| r.attach.as_ref())
        .map(|e| e.node.clone())
        .ok_or_else(|| PathError::UnknownHost(host.clone()))
}

pub fn compute_path(db: &ExtendedDatabase, flow: &FlowSpec, now: SimTime, opts: &GraphOptions) -> Result<PathResult, PathError> {
    let src = host_node(db, &flow.src)?;
    let dst = host_node(db, &flow.dst)?;
    build_graph(db, now, opts).shortest_path(&src, &dst, flow.bandwidth_mbps, flow.max_latency_ms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinkSpec, Reservation, ReservationState};

    fn n(s: &str) -> NodeId {
        s.parse().unwrap()
    }

    fn edge(a: &str, b: &str, lat: f64, res: f64) -> Edge {
        Edge { from: n(a), to: n(b), latency_ms: lat, residual_mbps: res, link: None }
    }

    #[test]
    fn prefers_lower_latency_then_fewer_hops() {
        let mut g = QosGraph::new();
        g.add_edge(edge("A.0", "A.1", 1.0, 10.0));
        g.add_edge(edge("A.1", "A.3", 1.0, 10.0));
        g.add_edge(edge("A.0", "A.3", 2.0, 10.0));
        let p = g.shortest_path(&n("A.0"), &n("A.3"), 1.0, None).unwrap();
        assert_eq!(p.nodes, vec![n("A.0"), n("A.3")]);
        assert_eq!(p.total_latency_ms, 2.0);
    }

    #[test]
    fn equal_paths_break_ties_by_node_id() {
        let mut g = QosGraph::new();
        g.add_edge(edge("A.0", "A.2", 1.0, 10.0));
        g.add_edge(edge("A.0", "A.1", 1.0, 10.0));
        g.add_edge(edge("A.2", "A.3", 1.0, 10.0));
        g.add_edge(edge("A.1", "A.3", 1.0, 10.0));
        let p = g.shortest_path(&n("A.0"), &n("A.3"), 1.0, None).unwrap();
        assert_eq!(p.nodes, vec![n("A.0"), n("A.1"), n("A.3")]);
    }

    #[test]
    fn prunes_by_bandwidth_and_checks_ceiling() {
        let mut g = QosGraph::new();
        g.add_edge(edge("A.0", "C.0", 10.0, 2.0));
        g.add_edge(edge("A.0", "B.0", 7.0, 20.0));
        g.add_edge(edge("B.0", "C.0", 9.0, 20.0));
        let p = g.shortest_path(&n("A.0"), &n("C.0"), 8.0, None).unwrap();
        assert_eq!(p.domain_sequence.len(), 3);
        assert_eq!(p.total_latency_ms, 16.0);
        assert!(p.bottleneck_residual_mbps >= 8.0);
        assert_eq!(
            g.shortest_path(&n("A.0"), &n("C.0"), 8.0, Some(15.0)),
            Err(PathError::TooSlow { latency: 16.0, ceiling: 15.0 })
        );
        assert_eq!(g.shortest_path(&n("A.0"), &n("C.0"), 30.0, None), Err(PathError::NoPath(30.0)));
    }

    #[test]
    fn own_graph_reflects_committed_holds() {
        let a = DomainId::new("A").unwrap();
        let mut db = ExtendedDatabase::new(a.clone());
        let l: DirLink = "A.0:1>A.1:1".parse().unwrap();
        db.add_switch(n("A.0"));
        db.add_switch(n("A.1"));
        db.add_link(LinkSpec::new(l.clone(), 2.0, 10.0));
        db.insert_reservation(Reservation {
            flow: FlowSpec {
                id: crate::model::FlowId::new("f"),
                src: HostAddr::new("x"),
                dst: HostAddr::new("y"),
                priority: 0,
                bandwidth_mbps: 8.0,
                max_latency_ms: None,
            },
            domain_path: vec![a],
            peering: vec![],
            hop_index: 0,
            per_link_holds: BTreeMap::from([(l.clone(), 8.0)]),
            state: ReservationState::Committed,
            segment: vec![l.clone()],
        });
        let g = intra_graph(&db, &GraphOptions::default());
        assert_eq!(g.edges().next().unwrap().residual_mbps, 2.0);
        let mut opts = GraphOptions::default();
        opts.credit(&l, 8.0);
        assert_eq!(intra_graph(&db, &opts).edges().next().unwrap().residual_mbps, 10.0);
    }
}
