//! Per-domain controller: owns the extended database and the messenger, runs the agents, and
//! turns monitoring, threshold events and service requests into forwarding rules.
//!
//! A controller never touches the event queue. Every entry point receives a [`Ctx`] with the
//! current time, the data plane, and the trace, and leaves frames to transmit in `ctx.out`.

pub mod events;
pub mod routing;
pub mod service;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Display;
use std::net::Ipv4Addr;

use serde::Serialize;

use crate::agents::{self, MonitoringPlan};
use crate::messenger::{BusMessage, ControlFrame, Messenger, MessengerEvent, ServerIdentity, Topic};
use crate::model::{
    DirLink, DomainAdjacency, DomainId, ExtendedDatabase, FlowId, FlowSpec, HostAddr, HostId, LinkKey, NodeId,
    SimTime,
};
use crate::sim::{ForwardingRule, Network, Topology, Trace};

pub use events::{EventError, EventRegistry, ThresholdEvent, ThresholdMode};
pub use routing::{compute_path, Edge, GraphOptions, PathError, PathResult, QosGraph};
pub use service::{AdmitOutcome, FlowStatus};

pub const AMQP_PORT: u16 = 5672;
pub const HOLD_DOWN_MS: SimTime = 1000;

/// A frame to put on the wire of `via`.
#[derive(Debug, Clone, PartialEq)]
pub struct Outgoing {
    pub via: DirLink,
    pub frame: ControlFrame,
}

/// Execution context handed to every controller entry point.
pub struct Ctx<'a> {
    pub now: SimTime,
    pub net: &'a mut Network,
    pub trace: &'a mut Trace,
    pub out: Vec<Outgoing>,
}

impl<'a> Ctx<'a> {
    pub fn new(now: SimTime, net: &'a mut Network, trace: &'a mut Trace) -> Self {
        Ctx { now, net, trace, out: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    /// Whether preemption may tear down a victim that has no alternate path.
    pub allow_drop: bool,
    pub hold_down_ms: SimTime,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig { allow_drop: true, hold_down_ms: HOLD_DOWN_MS }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Purpose {
    Admit,
    /// Moving a flow out of the way of `for_flow`.
    Victim { for_flow: FlowId },
    Reroute,
}

/// A reservation this domain originated and is waiting on.
#[derive(Debug, Clone)]
pub(crate) struct Pending {
    pub update: bool,
    pub purpose: Purpose,
    pub started_at: SimTime,
    pub path: Vec<DomainId>,
    pub latency_ms: f64,
    pub old_path: Vec<DomainId>,
}

#[derive(Debug, Clone)]
pub(crate) struct PreemptionJob {
    pub flow: FlowSpec,
    pub waiting: BTreeSet<FlowId>,
}

#[derive(Debug, Clone)]
pub struct Controller {
    pub(crate) id: DomainId,
    pub db: ExtendedDatabase,
    pub messenger: Messenger,
    pub events: EventRegistry,
    pub(crate) config: ControllerConfig,
    pub(crate) pending: BTreeMap<FlowId, Pending>,
    pub(crate) preemptions: BTreeMap<FlowId, PreemptionJob>,
    pub(crate) status: BTreeMap<FlowId, FlowStatus>,
    pub(crate) hold_down: BTreeMap<FlowId, SimTime>,
    pub(crate) plan: Option<MonitoringPlan>,
    pub(crate) last_advertised: Option<Vec<DomainAdjacency>>,
    mq: VecDeque<MessengerEvent>,
}

impl Controller {
    /// Builds the controller of `id` from the static topology. `index` picks its server address.
    pub fn new(id: DomainId, index: usize, topo: &Topology, config: ControllerConfig) -> Self {
        let mut db = ExtendedDatabase::new(id.clone());
        for s in topo.switches_of(&id) {
            db.add_switch(s.clone());
        }
        for l in topo.links_touching(&id) {
            db.add_link(l.clone());
        }
        for (h, at) in topo.hosts_of(&id) {
            db.upsert_host(HostId::attached(h.clone(), at.clone()), id.clone());
        }
        let identity = ServerIdentity {
            ip: Ipv4Addr::new(10, 0, (index / 250) as u8, (index % 250 + 1) as u8),
            port: AMQP_PORT,
            name: format!("ctl-{id}"),
        };
        let border: Vec<_> = db.own_peering_out().cloned().collect();
        let messenger = Messenger::new(id.clone(), identity, border);
        Controller {
            id,
            db,
            messenger,
            events: EventRegistry::new(),
            config,
            pending: BTreeMap::new(),
            preemptions: BTreeMap::new(),
            status: BTreeMap::new(),
            hold_down: BTreeMap::new(),
            plan: None,
            last_advertised: None,
            mq: VecDeque::new(),
        }
    }

    pub fn id(&self) -> &DomainId {
        &self.id
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn monitoring_plan(&self) -> Option<&MonitoringPlan> {
        self.plan.as_ref()
    }

    /// Subscribes the agents and programs delivery rules for the hosts already attached.
    pub fn boot(&mut self, ctx: &mut Ctx) {
        self.log(ctx, "boot", format!("switches={}", self.db.switches().count()));
        for p in agents::default_subscriptions(&self.id) {
            self.with_messenger(|m, out| m.subscribe(p, out));
        }
        let local: Vec<(HostAddr, crate::model::Endpoint)> = self
            .db
            .local_hosts()
            .filter_map(|(h, r)| r.attach.clone().map(|a| (h.clone(), a)))
            .collect();
        for (h, at) in local {
            self.install(ctx, &at.node, &h, at.port);
        }
        self.pump(ctx);
    }

    pub fn discovery_tick(&mut self, ctx: &mut Ctx) {
        self.with_messenger(|m, out| m.discovery_tick(out));
        self.pump(ctx);
    }

    pub fn keepalive_tick(&mut self, ctx: &mut Ctx) {
        self.with_messenger(|m, out| m.keepalive_tick(out));
        self.pump(ctx);
    }

    /// A control frame arrived over `via`.
    pub fn receive(&mut self, via: &DirLink, frame: ControlFrame, ctx: &mut Ctx) {
        let now = ctx.now;
        self.with_messenger(|m, out| m.receive(via, frame, now, out));
        self.pump(ctx);
    }

    /// Announces departure and severs every session.
    pub fn leave(&mut self, ctx: &mut Ctx) {
        self.log(ctx, "leave", "general.leave");
        let now = ctx.now;
        self.with_messenger(|m, out| m.leave(now, out));
        self.pump(ctx);
    }

    // ---- plumbing -------------------------------------------------------------------------

    pub(crate) fn with_messenger<R>(&mut self, f: impl FnOnce(&mut Messenger, &mut Vec<MessengerEvent>) -> R) -> R {
        let mut out = Vec::new();
        let r = f(&mut self.messenger, &mut out);
        self.mq.extend(out);
        r
    }

    pub(crate) fn publish(&mut self, ctx: &mut Ctx, topic: Topic, payload: &impl Serialize, blocked: BTreeSet<LinkKey>) {
        let payload = serde_json::to_value(payload).expect("serializable payload");
        let now = ctx.now;
        self.with_messenger(|m, out| m.publish(topic, payload, now, blocked, out))
            .expect("agent topics are concrete");
    }

    /// Links every publication avoids: weak links that have a nominal relay.
    pub(crate) fn avoid_set(&self) -> BTreeSet<LinkKey> {
        agents::monitoring_plan(&self.db).avoid
    }

    pub(crate) fn log(&self, ctx: &mut Ctx, action: &str, detail: impl Display) {
        ctx.trace.record(ctx.now, "CTRL", &self.id, format!("{action} {detail}"));
    }

    pub(crate) fn install(&self, ctx: &mut Ctx, switch: &NodeId, dst: &HostAddr, port: u16) {
        let rule = ForwardingRule { switch: switch.clone(), match_dst: dst.clone(), out_port: port, installed_at: ctx.now };
        ctx.net.install_rule(rule).expect("controller only programs its own switches");
    }

    /// Handles queued messenger events until none are left.
    pub(crate) fn pump(&mut self, ctx: &mut Ctx) {
        while let Some(ev) = self.mq.pop_front() {
            match ev {
                MessengerEvent::Send { via, frame } => ctx.out.push(Outgoing { via, frame }),
                MessengerEvent::Deliver(msg) => self.on_message(msg, ctx),
                MessengerEvent::PeerUp { link, peer } => self.on_peer_up(link, peer, ctx),
                MessengerEvent::PeerDown { link, peer, reason, unreachable } => {
                    self.log(ctx, "peer-down", format!("{peer} {link} {}", reason.as_str()));
                    self.on_peer_down(link, peer, unreachable, ctx)
                }
                MessengerEvent::DomainJoined(d) => self.on_domain_joined(d, ctx),
                MessengerEvent::DomainsLost(ds) => {
                    for d in ds {
                        self.purge(d, ctx);
                    }
                }
                MessengerEvent::Rejected { via, error } => self.log(ctx, "mlldp-reject", format!("{via} {error}")),
            }
        }
    }

    fn on_message(&mut self, msg: BusMessage, ctx: &mut Ctx) {
        if msg.origin == self.id {
            return;
        }
        let [first, second, third] = msg.topic.segments().clone();
        match (first.as_str(), second.as_str()) {
            ("connectivity", _) => self.on_connectivity(msg, ctx),
            ("monitoring", _) => self.on_monitoring(msg, ctx),
            ("reachability", _) => self.on_reachability(msg, ctx),
            ("general", "leave") => {
                if let Ok(d) = DomainId::new(third) {
                    self.on_leave(d, ctx);
                }
            }
            (to, "reserve") if to == self.id.as_str() => self.on_reservation(msg, ctx),
            _ => {}
        }
    }

    fn on_leave(&mut self, peer: DomainId, ctx: &mut Ctx) {
        let keys: Vec<LinkKey> = self
            .messenger
            .sessions()
            .filter(|(_, s)| s.up && s.peer.as_ref() == Some(&peer))
            .map(|(k, _)| k.clone())
            .collect();
        for k in keys {
            self.with_messenger(|m, out| m.unpair(&k, crate::messenger::DownReason::Leave, out));
        }
        self.purge(peer, ctx);
    }

    pub(crate) fn purge(&mut self, domain: DomainId, ctx: &mut Ctx) {
        if self.db.purge_domain(&domain) {
            self.log(ctx, "purge", &domain);
        }
    }

    fn on_peer_up(&mut self, link: LinkKey, peer: DomainId, ctx: &mut Ctx) {
        self.log(ctx, "peer-up", format!("{peer} {link}"));
        self.db.set_peering_up(&link, true);
        self.publish_connectivity(ctx, false);
    }

    fn on_peer_down(&mut self, link: LinkKey, peer: DomainId, unreachable: Vec<DomainId>, ctx: &mut Ctx) {
        self.db.set_peering_up(&link, false);
        self.log(ctx, "unpair", format!("{peer} {link}"));
        for d in unreachable {
            self.purge(d, ctx);
        }
        self.publish_connectivity(ctx, false);
        self.refresh_plan(ctx);
        self.handle_event_reroute(&link.directions(), ctx);
    }

    fn on_domain_joined(&mut self, d: DomainId, ctx: &mut Ctx) {
        self.log(ctx, "domain-joined", &d);
        self.publish_connectivity(ctx, true);
        self.publish_reachability_full(ctx);
    }

    /// Re-evaluates the monitoring plan and logs it when it changed.
    pub(crate) fn refresh_plan(&mut self, ctx: &mut Ctx) -> MonitoringPlan {
        let plan = agents::monitoring_plan(&self.db);
        let changed = self.plan.as_ref().map(|p| p.avoid != plan.avoid || p.weak_direct != plan.weak_direct).unwrap_or(true);
        if changed {
            self.log(ctx, "plan", &plan);
        }
        self.plan = Some(plan.clone());
        plan
    }
}
