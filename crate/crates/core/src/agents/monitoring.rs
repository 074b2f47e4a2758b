//! Link classification, the adaptive publication plan, and the monitoring agent.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::controller::routing::{intra_graph, own_link_latency, GraphOptions};
use crate::controller::{Controller, Ctx};
use crate::messenger::BusMessage;
use crate::model::{DomainId, ExtendedDatabase, LinkKey, LinkMetric, MonitoringSample, NodeId, PeeringMetric, TransitPair};

use super::{monitoring_topic, MonitoringAdvert, PeeringEntry, MONITOR_PERIOD_MS, SLOW_MONITOR_PERIOD_MS};

/// One-way latency at or above which a peering link is weak.
pub const WEAK_LATENCY_MS: f64 = 50.0;

/// Every this many monitoring periods the weak direct links carry an advert.
const SLOW_EVERY: u64 = SLOW_MONITOR_PERIOD_MS / MONITOR_PERIOD_MS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LinkQuality {
    Nominal,
    Weak,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkClass {
    pub link: LinkKey,
    pub latency_ms: f64,
    pub flagged: bool,
    pub quality: LinkQuality,
}

fn latency_of(db: &ExtendedDatabase, key: &LinkKey) -> Option<(f64, bool)> {
    let owner = db.owner();
    if key.touches(owner) {
        let out = key.directions().into_iter().find(|d| d.from.domain() == owner)?;
        let spec = db.link(&out)?;
        let latency = own_link_latency(db, &out).unwrap_or(spec.latency_ms);
        return Some((latency, spec.weak));
    }
    let adj = db.peering_spec(key)?;
    let measured = key
        .directions()
        .iter()
        .filter_map(|d| db.peering_metric(d))
        .filter_map(|m| m.latency_ms)
        .fold(None, |acc: Option<f64>, l| Some(acc.map_or(l, |a| a.max(l))));
    Some((measured.unwrap_or(adj.latency_ms), adj.weak))
}

/// Classifies every up peering link the owner knows of.
pub fn classify_links(db: &ExtendedDatabase) -> Vec<LinkClass> {
    db.domain_edges()
        .into_keys()
        .filter_map(|key| {
            let (latency_ms, flagged) = latency_of(db, &key)?;
            let quality =
                if flagged || latency_ms >= WEAK_LATENCY_MS { LinkQuality::Weak } else { LinkQuality::Nominal };
            Some(LinkClass { link: key, latency_ms, flagged, quality })
        })
        .collect()
}

/// Where monitoring adverts may go.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MonitoringPlan {
    pub classes: Vec<LinkClass>,
    /// Weak links with an all-nominal relay: never used for publications.
    pub avoid: BTreeSet<LinkKey>,
    /// Weak links without a relay: used at the slow period only.
    pub weak_direct: BTreeSet<LinkKey>,
    /// Relay domains for each avoided link.
    pub relays: BTreeMap<LinkKey, Vec<DomainId>>,
}

impl MonitoringPlan {
    pub fn is_slow_tick(now: u64) -> bool {
        (now / MONITOR_PERIOD_MS).is_multiple_of(SLOW_EVERY)
    }

    /// Links blocked for the monitoring advert of this tick and the period to advertise.
    pub fn schedule(&self, now: u64) -> (BTreeSet<LinkKey>, u64) {
        if Self::is_slow_tick(now) {
            let period = if self.weak_direct.is_empty() { MONITOR_PERIOD_MS } else { SLOW_MONITOR_PERIOD_MS };
            (self.avoid.clone(), period)
        } else {
            (self.avoid.union(&self.weak_direct).cloned().collect(), MONITOR_PERIOD_MS)
        }
    }
}

impl fmt::Display for MonitoringPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |s: &BTreeSet<LinkKey>| s.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "avoid=[{}] weak_direct=[{}]", join(&self.avoid), join(&self.weak_direct))
    }
}

/// Intermediate domains of the shortest all-nominal path between `a` and `b`.
fn nominal_relay(
    edges: &BTreeMap<LinkKey, (DomainId, DomainId)>,
    nominal: &BTreeSet<LinkKey>,
    a: &DomainId,
    b: &DomainId,
) -> Option<Vec<DomainId>> {
    let mut adj: BTreeMap<&DomainId, BTreeSet<&DomainId>> = BTreeMap::new();
    for (k, (x, y)) in edges {
        if nominal.contains(k) {
            adj.entry(x).or_default().insert(y);
            adj.entry(y).or_default().insert(x);
        }
    }
    let mut prev: BTreeMap<&DomainId, &DomainId> = BTreeMap::new();
    let mut queue = VecDeque::from([a]);
    while let Some(d) = queue.pop_front() {
        if d == b {
            let mut relay = Vec::new();
            let mut cur = prev.get(b).copied();
            while let Some(c) = cur.filter(|c| *c != a) {
                relay.push(c.clone());
                cur = prev.get(c).copied();
            }
            relay.reverse();
            return Some(relay);
        }
        for n in adj.get(d).into_iter().flatten() {
            if *n != a && !prev.contains_key(n) {
                prev.insert(n, d);
                queue.push_back(n);
            }
        }
    }
    None
}

pub fn monitoring_plan(db: &ExtendedDatabase) -> MonitoringPlan {
    let classes = classify_links(db);
    let edges = db.domain_edges();
    let nominal: BTreeSet<LinkKey> =
        classes.iter().filter(|c| c.quality == LinkQuality::Nominal).map(|c| c.link.clone()).collect();
    let mut plan = MonitoringPlan { classes: classes.clone(), ..Default::default() };
    for c in classes.iter().filter(|c| c.quality == LinkQuality::Weak) {
        let (a, b) = &edges[&c.link];
        match nominal_relay(&edges, &nominal, a, b) {
            Some(relay) if !relay.is_empty() => {
                plan.avoid.insert(c.link.clone());
                plan.relays.insert(c.link.clone(), relay);
            }
            _ => {
                plan.weak_direct.insert(c.link.clone());
            }
        }
    }
    plan
}

/// Ordered pairs of distinct attachment switches: up peering points and host edges.
fn attachment_switches(db: &ExtendedDatabase) -> BTreeSet<NodeId> {
    let mut s: BTreeSet<NodeId> = db
        .own_peering_out()
        .filter(|l| db.is_peering_up(&l.link.key()))
        .map(|l| l.link.from.node.clone())
        .collect();
    s.extend(db.local_hosts().filter_map(|(_, r)| r.attach.as_ref().map(|a| a.node.clone())));
    s
}

/// Transit metrics for every ordered pair of attachment switches: least-latency intra path,
/// its latency and bottleneck admissible bandwidth.
pub fn transit_samples(db: &ExtendedDatabase, now: u64) -> Vec<MonitoringSample> {
    let sw = attachment_switches(db);
    let g = intra_graph(db, &GraphOptions::default());
    let mut out = Vec::new();
    for i in &sw {
        for e in sw.iter().filter(|e| *e != i) {
            let (latency_ms, available_mbps) = match g.shortest_path(i, e, 0.0, None) {
                Ok(p) => (Some(p.total_latency_ms), p.bottleneck_residual_mbps.max(0.0)),
                Err(_) => (None, 0.0),
            };
            out.push(MonitoringSample {
                reporter: db.owner().clone(),
                pair: TransitPair { ingress: i.clone(), egress: e.clone() },
                available_mbps,
                latency_ms,
                timestamp: now,
            });
        }
    }
    out
}

impl Controller {
    /// Probes own links, publishes the monitoring advert under the current plan, and
    /// evaluates threshold events.
    pub fn monitor_tick(&mut self, ctx: &mut Ctx) {
        if self.messenger.has_departed() {
            return;
        }
        let now = ctx.now;
        let intra: Vec<_> = self.db.intra_links().map(|l| l.link.clone()).collect();
        for l in intra {
            let latency_ms = ctx.net.send_probe(std::slice::from_ref(&l)).ok().flatten();
            self.db.record_link_metric(l, LinkMetric { latency_ms, timestamp: now });
        }
        let peering: Vec<_> = self
            .db
            .own_peering_out()
            .filter(|l| self.db.is_peering_up(&l.link.key()))
            .map(|l| l.link.clone())
            .collect();
        let mut entries = Vec::new();
        for l in peering {
            let latency_ms = ctx.net.ping_peer(&l).ok().flatten().map(|rtt| rtt / 2.0);
            let available_mbps = self.db.residual_bandwidth(&l).unwrap_or(0.0).max(0.0);
            let metric = PeeringMetric { reporter: self.id.clone(), latency_ms, available_mbps, timestamp: now };
            self.db.record_peering_metric(l.clone(), metric);
            entries.push(PeeringEntry { link: l, latency_ms, available_mbps });
        }
        let samples = transit_samples(&self.db, now);

        let plan = self.refresh_plan(ctx);
        let (blocked, period_ms) = plan.schedule(now);
        let advert = MonitoringAdvert { origin: self.id.clone(), period_ms, samples, peering: entries };
        self.publish(ctx, monitoring_topic(&self.id, period_ms), &advert, blocked);

        let fired = self.events.evaluate(now, |l| ctx.net.drop_counter(l));
        for ev in fired {
            self.log(ctx, "event", format!("{} {}", ev.id, ev.subject));
            self.handle_event_reroute(&[ev.subject], ctx);
        }
        self.pump(ctx);
    }

    pub(crate) fn on_monitoring(&mut self, msg: BusMessage, ctx: &mut Ctx) {
        let Ok(advert) = serde_json::from_value::<MonitoringAdvert>(msg.payload) else {
            self.log(ctx, "bad-advert", &msg.topic);
            return;
        };
        for e in advert.peering {
            let metric = PeeringMetric {
                reporter: advert.origin.clone(),
                latency_ms: e.latency_ms,
                available_mbps: e.available_mbps,
                timestamp: msg.sent_at,
            };
            self.db.record_peering_metric(e.link, metric);
        }
        self.db.replace_monitoring(&advert.origin, advert.samples, advert.period_ms);
    }
}
