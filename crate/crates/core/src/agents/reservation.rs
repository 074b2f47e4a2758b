//! Reservation agent: hop-by-hop setup, update and teardown along a source-routed domain path.
//!
//! Each domain on the path holds its intra links and its egress peering link. A setup holds
//! resources as pending and travels forward; the last domain commits and answers with an
//! accept that every domain commits on its way back. A reject releases pending holds upstream.
//! Updates run make-before-break: the new holds sit beside the committed ones until accepted.

use std::collections::BTreeMap;

use crate::controller::routing::{host_node, intra_graph, GraphOptions, PathResult, BW_EPSILON};
use crate::controller::{Controller, Ctx, FlowStatus, Pending, Purpose};
use crate::messenger::BusMessage;
use crate::model::{DirLink, FlowId, FlowSpec, HostAddr, NodeId, Reservation, ReservationState};

use super::{reservation_topic, ReservationKind, ReservationMsg};

struct Segment {
    holds: BTreeMap<DirLink, f64>,
    links: Vec<DirLink>,
}

impl Controller {
    /// Programs this domain's part of `path` for traffic toward `dst`.
    pub(crate) fn install_path_rules(&self, path: &PathResult, dst: &HostAddr, ctx: &mut Ctx) {
        for l in path.links().filter(|l| l.from.domain() == &self.id) {
            self.install(ctx, &l.from.node, dst, l.from.port);
        }
    }

    /// Rules implementing `r` here. The terminal domain's host edge rule comes last.
    fn reservation_rules(&self, r: &Reservation) -> Vec<(NodeId, u16)> {
        let mut rules: Vec<(NodeId, u16)> = r
            .segment
            .iter()
            .filter(|l| l.from.domain() == &self.id)
            .map(|l| (l.from.node.clone(), l.from.port))
            .collect();
        if r.is_terminal() {
            if let Some(a) = self.db.host(&r.flow.dst).filter(|h| h.domain == self.id).and_then(|h| h.attach.as_ref()) {
                rules.push((a.node.clone(), a.port));
            }
        }
        rules
    }

    fn local_segment(&self, msg: &ReservationMsg) -> Result<Segment, String> {
        let i = msg.hop_index;
        let n = msg.domain_path.len();
        if msg.peering.len() + 1 != n {
            return Err("malformed path".into());
        }
        let flow = &msg.flow;
        let terminal = i + 1 == n;
        let ingress = if i == 0 {
            host_node(&self.db, &flow.src).map_err(|e| e.to_string())?
        } else {
            msg.peering[i - 1].to.node.clone()
        };
        let egress = if terminal {
            match self.db.host(&flow.dst) {
                Some(h) if h.domain == self.id && h.attach.is_some() => h.attach.as_ref().unwrap().node.clone(),
                _ => return Err(format!("{} not attached here", flow.dst)),
            }
        } else {
            msg.peering[i].from.node.clone()
        };
        if ingress.domain != self.id || egress.domain != self.id {
            return Err("segment leaves the domain".into());
        }

        let mut opts = GraphOptions::default();
        if msg.kind == ReservationKind::Update {
            if let Some(r) = self.db.reservation(&flow.id) {
                for (l, mbps) in &r.per_link_holds {
                    opts.credit(l, *mbps);
                }
            }
        }
        let demand = flow.bandwidth_mbps;
        let mut seg = Segment { holds: BTreeMap::new(), links: Vec::new() };
        if i > 0 {
            seg.links.push(msg.peering[i - 1].clone());
        }
        if ingress != egress {
            let p = intra_graph(&self.db, &opts)
                .shortest_path(&ingress, &egress, demand, None)
                .map_err(|e| format!("intra {e}"))?;
            for l in p.links() {
                seg.holds.insert(l.clone(), demand);
                seg.links.push(l.clone());
            }
        }
        if !terminal {
            let out = &msg.peering[i];
            let admissible = self.db.admissible_bandwidth(out).map_err(|e| e.to_string())?;
            if !self.db.is_peering_up(&out.key()) {
                return Err(format!("peering {out} down"));
            }
            let credit = opts.adjust.get(out).copied().unwrap_or(0.0);
            if admissible + credit + BW_EPSILON < demand {
                return Err(format!("peering {out} has {:.3} Mbps", admissible + credit));
            }
            seg.holds.insert(out.clone(), demand);
            seg.links.push(out.clone());
        }
        Ok(seg)
    }

    /// Starts a setup (or an update of an admitted flow) as the first domain of `path`.
    pub(crate) fn start_reservation(&mut self, flow: FlowSpec, path: PathResult, update: bool, purpose: Purpose, ctx: &mut Ctx) {
        let old_path = if update {
            self.db.reservation(&flow.id).map(|r| r.domain_path.clone()).unwrap_or_default()
        } else {
            Vec::new()
        };
        let domain_path = path.domain_sequence.clone();
        let seq = domain_path.iter().map(|d| d.as_str()).collect::<Vec<_>>().join(">");
        let kind = if update { ReservationKind::Update } else { ReservationKind::Setup };
        self.log(ctx, "reserve", format!("{} {} {seq} {:.3}", flow.id, kind.verb(), path.total_latency_ms));
        if !update {
            self.status.insert(flow.id.clone(), FlowStatus::Pending);
        }
        self.pending.insert(
            flow.id.clone(),
            Pending {
                update,
                purpose,
                started_at: ctx.now,
                path: domain_path.clone(),
                latency_ms: path.total_latency_ms,
                old_path,
            },
        );
        let msg = ReservationMsg {
            kind,
            flow,
            domain_path,
            peering: path.peering(),
            hop_index: 0,
            update,
            cascade: false,
            reason: None,
        };
        self.handle_request(msg, ctx);
    }

    fn send_reservation(&mut self, mut msg: ReservationMsg, hop: usize, kind: ReservationKind, ctx: &mut Ctx) {
        msg.kind = kind;
        msg.hop_index = hop;
        let to = msg.domain_path[hop].clone();
        let blocked = self.avoid_set();
        self.publish(ctx, reservation_topic(&to, kind), &msg, blocked);
    }

    pub(crate) fn on_reservation(&mut self, msg: BusMessage, ctx: &mut Ctx) {
        let Ok(msg) = serde_json::from_value::<ReservationMsg>(msg.payload) else {
            self.log(ctx, "bad-reservation", &msg.topic);
            return;
        };
        if msg.domain_path.get(msg.hop_index) != Some(&self.id) {
            self.log(ctx, "misrouted", format!("{} hop={}", msg.flow.id, msg.hop_index));
            return;
        }
        match msg.kind {
            ReservationKind::Setup | ReservationKind::Update => self.handle_request(msg, ctx),
            ReservationKind::Accept => {
                self.commit_local(&msg.flow.id, msg.update, ctx);
                self.answer_upstream(msg, ReservationKind::Accept, ctx);
            }
            ReservationKind::Reject => {
                self.release_pending(&msg.flow.id, msg.update);
                self.answer_upstream(msg, ReservationKind::Reject, ctx);
            }
            ReservationKind::Teardown => self.on_teardown(msg, ctx),
        }
    }

    fn handle_request(&mut self, mut msg: ReservationMsg, ctx: &mut Ctx) {
        let id = msg.flow.id.clone();
        let update = msg.kind == ReservationKind::Update;
        msg.update = update;
        let seg = if !update && self.db.reservation(&id).is_some() {
            Err("already reserved".to_string())
        } else if update && self.db.pending_update(&id).is_some() {
            Err("update in progress".to_string())
        } else {
            self.local_segment(&msg)
        };
        match seg {
            Err(reason) => {
                msg.reason = Some(format!("{}: {reason}", self.id));
                self.answer_upstream(msg, ReservationKind::Reject, ctx);
            }
            Ok(seg) => {
                let r = Reservation {
                    flow: msg.flow.clone(),
                    domain_path: msg.domain_path.clone(),
                    peering: msg.peering.clone(),
                    hop_index: msg.hop_index,
                    per_link_holds: seg.holds,
                    state: ReservationState::Pending,
                    segment: seg.links,
                };
                let terminal = r.is_terminal();
                if update {
                    self.db.insert_update(r);
                } else {
                    self.db.insert_reservation(r);
                }
                if terminal {
                    self.commit_local(&id, update, ctx);
                    self.answer_upstream(msg, ReservationKind::Accept, ctx);
                } else {
                    let next = msg.hop_index + 1;
                    let kind = msg.kind;
                    self.send_reservation(msg, next, kind, ctx);
                }
            }
        }
    }

    /// Accept or reject travels one hop back; at the first domain it completes the request.
    fn answer_upstream(&mut self, msg: ReservationMsg, kind: ReservationKind, ctx: &mut Ctx) {
        if msg.hop_index == 0 {
            let ok = kind == ReservationKind::Accept;
            self.finish_origin(&msg.flow.id, ok, msg.reason.clone(), ctx);
        } else {
            let prev = msg.hop_index - 1;
            self.send_reservation(msg, prev, kind, ctx);
        }
    }

    fn commit_local(&mut self, id: &FlowId, update: bool, ctx: &mut Ctx) {
        if update {
            self.db.commit_update(id);
        } else if let Some(r) = self.db.reservation_mut(id) {
            r.state = ReservationState::Committed;
        }
        let Some(r) = self.db.reservation(id).cloned() else { return };
        for (node, port) in self.reservation_rules(&r) {
            self.install(ctx, &node, &r.flow.dst, port);
        }
        self.log(ctx, "commit", format!("{id} hop={}", r.hop_index));
    }

    fn release_pending(&mut self, id: &FlowId, update: bool) {
        if update {
            self.db.remove_update(id);
        } else if self.db.reservation(id).is_some_and(|r| r.state == ReservationState::Pending) {
            self.db.remove_reservation(id);
        }
    }

    fn remove_rules(&self, r: &Reservation, ctx: &mut Ctx) {
        let mut rules = self.reservation_rules(r);
        if r.is_terminal() {
            rules.retain(|(n, _)| self.db.host(&r.flow.dst).and_then(|h| h.attach.as_ref()).map(|a| &a.node) != Some(n));
        }
        for (node, _) in rules {
            ctx.net.remove_rule(&node, &r.flow.dst);
        }
    }

    fn on_teardown(&mut self, msg: ReservationMsg, ctx: &mut Ctx) {
        let id = &msg.flow.id;
        self.db.remove_update(id);
        if let Some(r) = self.db.remove_reservation(id) {
            self.remove_rules(&r, ctx);
            self.log(ctx, "release", format!("{id} hop={}", r.hop_index));
        }
        if msg.cascade && msg.hop_index + 1 < msg.domain_path.len() {
            let next = msg.hop_index + 1;
            self.send_reservation(msg, next, ReservationKind::Teardown, ctx);
        }
    }

    /// Tears down a flow originated here along its whole path.
    pub(crate) fn teardown_flow(&mut self, id: &FlowId, reason: &str, ctx: &mut Ctx) {
        self.pending.remove(id);
        self.db.remove_update(id);
        let Some(r) = self.db.remove_reservation(id) else { return };
        self.remove_rules(&r, ctx);
        self.status.insert(id.clone(), FlowStatus::Stopped);
        self.log(ctx, "stop", format!("{id} {reason}"));
        if r.domain_path.len() > 1 {
            let msg = ReservationMsg {
                kind: ReservationKind::Teardown,
                flow: r.flow.clone(),
                domain_path: r.domain_path.clone(),
                peering: r.peering.clone(),
                hop_index: 0,
                update: false,
                cascade: true,
                reason: Some(reason.to_string()),
            };
            self.send_reservation(msg, 1, ReservationKind::Teardown, ctx);
        }
    }

    /// Completes a request this domain originated.
    fn finish_origin(&mut self, id: &FlowId, ok: bool, reason: Option<String>, ctx: &mut Ctx) {
        let Some(p) = self.pending.remove(id) else { return };
        let reason = reason.unwrap_or_default();
        if ok {
            let seq = p.path.iter().map(|d| d.as_str()).collect::<Vec<_>>().join(">");
            let elapsed = ctx.now - p.started_at;
            let action = if p.update { "updated" } else { "admitted" };
            self.log(ctx, action, format!("{id} {seq} {:.3} {elapsed}ms", p.latency_ms));
            self.status.insert(id.clone(), FlowStatus::Admitted { path: p.path.clone(), latency_ms: p.latency_ms });
            if p.update {
                let r = self.db.reservation(id).cloned().expect("just committed");
                for (hop, _) in p.old_path.iter().enumerate().filter(|(_, d)| !p.path.contains(d)) {
                    let msg = ReservationMsg {
                        kind: ReservationKind::Teardown,
                        flow: r.flow.clone(),
                        domain_path: p.old_path.clone(),
                        peering: Vec::new(),
                        hop_index: hop,
                        update: false,
                        cascade: false,
                        reason: Some("rerouted".into()),
                    };
                    self.send_reservation(msg, hop, ReservationKind::Teardown, ctx);
                }
            }
        } else if !p.update {
            self.log(ctx, "reject", format!("{id} {reason}"));
            self.status.insert(id.clone(), FlowStatus::Rejected(reason.clone()));
            self.hold_down.insert(id.clone(), ctx.now);
        } else {
            self.log(ctx, "update-failed", format!("{id} {reason}"));
            if p.purpose == Purpose::Reroute {
                self.teardown_flow(id, "no-path", ctx);
            }
        }
        if let Purpose::Victim { for_flow } = &p.purpose {
            self.victim_done(for_flow.clone(), id.clone(), ok, ctx);
        }
        if !ok && !p.update {
            self.preemptions.remove(id);
        }
    }
}
