//! Service manager: admission, northbound requests and event-driven rerouting.

use std::collections::{BTreeMap, BTreeSet};

use crate::agents::preempt::capacity_bound;
use crate::model::{DirLink, DomainId, FlowId, FlowSpec, Reservation, ReservationState};

use super::routing::{compute_path, GraphOptions};
use super::{Controller, Ctx, Purpose};

#[derive(Debug, Clone, PartialEq)]
pub enum FlowStatus {
    Pending,
    Admitted { path: Vec<DomainId>, latency_ms: f64 },
    Rejected(String),
    Stopped,
}

impl std::fmt::Display for FlowStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FlowStatus::Pending => f.write_str("pending"),
            FlowStatus::Admitted { path, latency_ms } => {
                let seq = path.iter().map(|d| d.as_str()).collect::<Vec<_>>().join(">");
                write!(f, "admitted {seq} {latency_ms:.3}")
            }
            FlowStatus::Rejected(reason) => write!(f, "rejected {reason}"),
            FlowStatus::Stopped => f.write_str("stopped"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AdmitOutcome {
    /// Reservation signalling started (or completed, for a local flow).
    Started,
    /// Lower-priority flows are being moved first.
    Preempting(Vec<FlowId>),
    /// The flow is already admitted or being admitted.
    InProgress,
    Rejected(String),
}

impl Controller {
    pub fn status(&self, id: &FlowId) -> Option<&FlowStatus> {
        self.status.get(id)
    }

    pub fn statuses(&self) -> &BTreeMap<FlowId, FlowStatus> {
        &self.status
    }

    /// Whether any reservation this domain originated is still in flight.
    pub fn is_busy(&self) -> bool {
        !self.pending.is_empty() || !self.preemptions.is_empty()
    }

    fn is_local_source(&self, flow: &FlowSpec) -> bool {
        self.db.host(&flow.src).is_some_and(|h| h.domain == self.id)
    }

    /// Admits `flow` from this domain: direct reservation if a path exists, preemption of
    /// strictly lower-priority flows otherwise.
    pub fn admit_service(&mut self, flow: FlowSpec, ctx: &mut Ctx) -> AdmitOutcome {
        self.log(ctx, "request", format!("{} {}>{} p={} {}Mbps", flow.id, flow.src, flow.dst, flow.priority, flow.bandwidth_mbps));
        if let Err(e) = flow.validate() {
            self.reject_request(&flow.id, &e.to_string(), ctx);
            return AdmitOutcome::Rejected(e.to_string());
        }
        if !self.is_local_source(&flow) {
            let reason = format!("{} is not attached here", flow.src);
            self.reject_request(&flow.id, &reason, ctx);
            return AdmitOutcome::Rejected(reason);
        }
        if self.pending.contains_key(&flow.id)
            || self.preemptions.contains_key(&flow.id)
            || self.db.reservation(&flow.id).is_some()
        {
            return AdmitOutcome::InProgress;
        }
        let outcome = match compute_path(&self.db, &flow, ctx.now, &GraphOptions::default()) {
            Ok(path) => {
                self.start_reservation(flow, path, false, Purpose::Admit, ctx);
                AdmitOutcome::Started
            }
            Err(e) => match capacity_bound(&e).then(|| self.plan_preemption(&flow, ctx.now)).flatten() {
                Some(plan) => {
                    let ids = plan.victims.iter().map(|v| v.flow.id.clone()).collect();
                    self.execute_preemption(flow, plan, ctx);
                    AdmitOutcome::Preempting(ids)
                }
                None => {
                    self.reject_request(&flow.id, &e.to_string(), ctx);
                    AdmitOutcome::Rejected(e.to_string())
                }
            },
        };
        self.pump(ctx);
        outcome
    }

    /// First packet of an unmatched flow seen at one of this domain's switches.
    pub fn packet_in(&mut self, flow: FlowSpec, ctx: &mut Ctx) {
        if !self.is_local_source(&flow)
            || self.pending.contains_key(&flow.id)
            || self.preemptions.contains_key(&flow.id)
            || self.db.reservation(&flow.id).is_some()
        {
            return;
        }
        if let Some(at) = self.hold_down.get(&flow.id) {
            if ctx.now < at + self.config.hold_down_ms {
                return;
            }
        }
        self.admit_service(flow, ctx);
    }

    /// Northbound teardown of a flow originated here.
    pub fn teardown(&mut self, id: &FlowId, ctx: &mut Ctx) -> bool {
        let owned = self.db.reservation(id).is_some_and(|r| r.is_origin());
        if owned {
            self.teardown_flow(id, "northbound", ctx);
            self.pump(ctx);
        }
        owned
    }

    /// Moves committed flows originated here off `links`. Flows are handled by descending
    /// priority; those without a feasible path are stopped.
    pub fn handle_event_reroute(&mut self, links: &[DirLink], ctx: &mut Ctx) {
        let failed: BTreeSet<DirLink> = links.iter().flat_map(|l| [l.clone(), l.reverse()]).collect();
        let mut affected: Vec<Reservation> = self
            .db
            .reservations()
            .filter(|r| {
                r.is_origin()
                    && r.state == ReservationState::Committed
                    && !self.pending.contains_key(&r.flow.id)
                    && failed.iter().any(|l| r.traverses(l))
            })
            .cloned()
            .collect();
        if affected.is_empty() {
            return;
        }
        affected.sort_by(|a, b| b.flow.priority.cmp(&a.flow.priority).then_with(|| a.flow.id.cmp(&b.flow.id)));
        let mut opts = GraphOptions { exclude: failed, ..Default::default() };
        for r in &affected {
            for (l, mbps) in &r.per_link_holds {
                opts.credit(l, *mbps);
            }
        }
        for r in affected {
            let id = r.flow.id.clone();
            match compute_path(&self.db, &r.flow, ctx.now, &opts) {
                Ok(path) => {
                    self.install_path_rules(&path, &r.flow.dst, ctx);
                    let seq = path.domain_sequence.iter().map(|d| d.as_str()).collect::<Vec<_>>().join(">");
                    self.log(ctx, "reroute", format!("{id} {seq}"));
                    self.start_reservation(r.flow, path, true, Purpose::Reroute, ctx);
                }
                Err(e) => self.teardown_flow(&id, &format!("no-path {e}"), ctx),
            }
        }
        self.pump(ctx);
    }
}
