//! Scenario execution: one event loop driving the data plane, the traffic engine and every
//! controller.

use std::collections::{BTreeMap, BTreeSet};

use crate::agents::Category;
use crate::controller::{Controller, ControllerConfig, Ctx, Outgoing};
use crate::messenger::ControlFrame;
use crate::model::{DirLink, DomainId, SimTime};
use crate::sim::{EventQueue, FlowTraffic, Network, SimError, Trace, TrafficEngine, TICK_MS};

use super::report::MetricsReport;
use super::scenario::{Action, Scenario};

pub const DISCOVERY_PERIOD_MS: SimTime = 1000;
pub const KEEPALIVE_PERIOD_MS: SimTime = crate::messenger::KEEPALIVE_INTERVAL_MS;
pub const MONITOR_PERIOD_MS: SimTime = crate::agents::MONITOR_PERIOD_MS;

#[derive(Debug, Clone)]
enum Event {
    Action(Action),
    Deliver { via: DirLink, frame: ControlFrame },
    DiscoveryTick,
    KeepAliveTick,
    MonitorTick,
    TrafficTick,
}

/// Transit time of a control frame over a link: the latency rounded up to whole milliseconds.
pub fn frame_delay(latency_ms: f64) -> SimTime {
    (latency_ms.ceil() as SimTime).max(1)
}

pub struct World {
    scenario: Scenario,
    net: Network,
    trace: Trace,
    queue: EventQueue<Event>,
    controllers: BTreeMap<DomainId, Controller>,
    dead: BTreeSet<DomainId>,
    traffic: TrafficEngine,
    report: MetricsReport,
    violations: Vec<String>,
}

impl World {
    pub fn new(scenario: &Scenario) -> Result<Self, SimError> {
        Self::with_config(scenario, ControllerConfig::default())
    }

    /// Builds the network and boots every controller at time 0.
    pub fn with_config(scenario: &Scenario, config: ControllerConfig) -> Result<Self, SimError> {
        let topo = &scenario.topology;
        let net = Network::new(topo);
        let mut queue = EventQueue::new();
        for a in &scenario.actions {
            queue.schedule(a.at_ms, Event::Action(a.action.clone()))?;
        }
        for ev in [Event::DiscoveryTick, Event::KeepAliveTick, Event::MonitorTick] {
            queue.schedule(0, ev)?;
        }
        if !scenario.flows.is_empty() {
            queue.schedule(0, Event::TrafficTick)?;
        }
        let controllers = topo
            .domains
            .iter()
            .enumerate()
            .map(|(i, d)| (d.clone(), Controller::new(d.clone(), i, topo, config.clone())))
            .collect();
        let mut w = World {
            scenario: scenario.clone(),
            net,
            trace: Trace::new(),
            queue,
            controllers,
            dead: BTreeSet::new(),
            traffic: TrafficEngine::new(),
            report: MetricsReport::new(topo, scenario.duration_ms),
            violations: Vec::new(),
        };
        let ids: Vec<DomainId> = w.controllers.keys().cloned().collect();
        for d in ids {
            w.with_controller(&d, |c, ctx| c.boot(ctx));
        }
        Ok(w)
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn net(&self) -> &Network {
        &self.net
    }

    pub fn traffic(&self) -> &TrafficEngine {
        &self.traffic
    }

    pub fn controller(&self, d: &DomainId) -> Option<&Controller> {
        self.controllers.get(d)
    }

    pub fn controllers(&self) -> impl Iterator<Item = &Controller> {
        self.controllers.values()
    }

    pub fn is_dead(&self, d: &DomainId) -> bool {
        self.dead.contains(d)
    }

    /// Invariant violations seen so far, one line each.
    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    /// Runs `f` against a live controller at the current time and sends what it emitted.
    pub fn with_controller<R>(&mut self, d: &DomainId, f: impl FnOnce(&mut Controller, &mut Ctx) -> R) -> Option<R> {
        if self.dead.contains(d) {
            return None;
        }
        let now = self.queue.now();
        let ctrl = self.controllers.get_mut(d)?;
        let mut ctx = Ctx::new(now, &mut self.net, &mut self.trace);
        let r = f(ctrl, &mut ctx);
        let out = std::mem::take(&mut ctx.out);
        self.transmit(d, out);
        Some(r)
    }

    fn transmit(&mut self, from: &DomainId, out: Vec<Outgoing>) {
        if self.dead.contains(from) {
            return;
        }
        let now = self.queue.now();
        for o in out {
            if self.net.is_cut(&o.via) {
                continue;
            }
            let Some(spec) = self.net.link_spec(&o.via) else { continue };
            let at = now + frame_delay(spec.latency_ms);
            self.queue.schedule(at, Event::Deliver { via: o.via, frame: o.frame }).expect("future event");
        }
    }

    /// Processes every event strictly before `t`.
    pub fn run_until(&mut self, t: SimTime) {
        while self.queue.peek_time().is_some_and(|at| at < t) {
            let (at, ev) = self.queue.pop().expect("peeked");
            self.handle(at, ev);
        }
    }

    /// Runs to the scenario's end and returns the metrics.
    pub fn run(&mut self) -> &MetricsReport {
        self.run_until(self.scenario.duration_ms);
        self.finish()
    }

    fn finish(&mut self) -> &MetricsReport {
        self.report.flows = self.traffic.flows().cloned().map(|f| (f.flow.id.clone(), f)).collect::<BTreeMap<_, FlowTraffic>>();
        self.report.status = self
            .controllers
            .values()
            .flat_map(|c| c.statuses().iter().map(|(id, s)| (id.clone(), s.to_string())))
            .collect();
        &self.report
    }

    pub fn report(&self) -> &MetricsReport {
        &self.report
    }

    fn reschedule(&mut self, at: SimTime, period: SimTime, ev: Event) {
        if at + period < self.scenario.duration_ms {
            self.queue.schedule(at + period, ev).expect("future event");
        }
    }

    fn live(&self) -> Vec<DomainId> {
        self.controllers.keys().filter(|d| !self.dead.contains(*d)).cloned().collect()
    }

    fn handle(&mut self, at: SimTime, ev: Event) {
        match ev {
            Event::Action(a) => self.apply(a),
            Event::Deliver { via, frame } => self.deliver(via, frame),
            Event::DiscoveryTick => {
                for d in self.live() {
                    self.with_controller(&d, |c, ctx| c.discovery_tick(ctx));
                }
                self.reschedule(at, DISCOVERY_PERIOD_MS, Event::DiscoveryTick);
            }
            Event::KeepAliveTick => {
                for d in self.live() {
                    self.with_controller(&d, |c, ctx| c.keepalive_tick(ctx));
                }
                self.reschedule(at, KEEPALIVE_PERIOD_MS, Event::KeepAliveTick);
            }
            Event::MonitorTick => {
                for d in self.live() {
                    self.with_controller(&d, |c, ctx| c.monitor_tick(ctx));
                }
                self.reschedule(at, MONITOR_PERIOD_MS, Event::MonitorTick);
            }
            Event::TrafficTick => {
                for pi in self.traffic.tick(&mut self.net, at) {
                    let d = pi.switch.domain.clone();
                    self.with_controller(&d, |c, ctx| c.packet_in(pi.flow, ctx));
                }
                self.reschedule(at, TICK_MS, Event::TrafficTick);
            }
        }
        self.check_invariants(at);
    }

    fn check_invariants(&mut self, at: SimTime) {
        for c in self.controllers.values() {
            if let Err(e) = c.db.check_invariants() {
                self.violations.push(format!("{at} {}: {e}", c.id()));
            }
        }
    }

    fn deliver(&mut self, via: DirLink, frame: ControlFrame) {
        let to = via.to.domain().clone();
        if self.net.is_cut(&via) || self.dead.contains(&to) {
            return;
        }
        let from = via.from.domain().clone();
        let origin = match &frame {
            ControlFrame::Mlldp(_) => from.clone(),
            f => f.origin().clone(),
        };
        let label = frame.label();
        let bytes = frame.size();
        let now = self.queue.now();
        self.trace.record(now, "BUS", &origin, format!("{label} {bytes} {from}>{to}"));
        self.report.record_control(&from, &to, now, Category::of_topic(&label), bytes as u64);
        self.with_controller(&to, |c, ctx| c.receive(&via, frame, ctx));
    }

    fn apply(&mut self, action: Action) {
        let now = self.queue.now();
        self.trace.record(now, "ACT", action.verb(), &action);
        let result = match &action {
            Action::CutLink(k) => self.net.cut_link(k),
            Action::RestoreLink(k) => self.net.restore_link(k),
            Action::StartFlow(id) => {
                let spec = self.scenario.flows[id].clone();
                let rate = spec.bandwidth_mbps;
                let end = self.scenario.duration_ms;
                self.traffic.inject(&self.net, FlowTraffic::new(spec, rate, now, end)).map(|_| ())
            }
            Action::StopFlow(id) => {
                self.traffic.stop(id, now);
                let src = &self.scenario.flows[id].src;
                if let Some(d) = self.scenario.topology.hosts.iter().find(|(h, _)| h == src).map(|(_, e)| e.domain().clone()) {
                    self.with_controller(&d, |c, ctx| c.teardown(id, ctx));
                }
                Ok(())
            }
            Action::RequestService(id) => {
                let spec = self.scenario.flows[id].clone();
                match self.net.host_attachment(&spec.src) {
                    Ok(Some(at)) => {
                        let d = at.domain().clone();
                        self.with_controller(&d, |c, ctx| c.admit_service(spec, ctx));
                        Ok(())
                    }
                    Ok(None) => Err(SimError::DetachedHost(spec.src.clone())),
                    Err(e) => Err(e),
                }
            }
            Action::MigrateHost { host, to } => match self.net.detach_host(host) {
                Ok(old) => {
                    if let Some(old) = old {
                        let d = old.domain().clone();
                        self.with_controller(&d, |c, ctx| c.host_event(host, None, ctx));
                    }
                    match self.net.attach_host(host, to.clone()) {
                        Ok(()) => {
                            let d = to.domain().clone();
                            self.with_controller(&d, |c, ctx| c.host_event(host, Some(to.clone()), ctx));
                            Ok(())
                        }
                        Err(e) => Err(e),
                    }
                }
                Err(e) => Err(e),
            },
            Action::KillController(d) => {
                self.dead.insert(d.clone());
                Ok(())
            }
            Action::GracefulLeave(d) => {
                self.with_controller(d, |c, ctx| c.leave(ctx));
                self.dead.insert(d.clone());
                Ok(())
            }
        };
        if let Err(e) = result {
            self.trace.record(now, "ERR", action.verb(), e);
        }
    }
}
