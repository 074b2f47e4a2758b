//! Preemption planning: which lower-priority flows to move out of the way, and where to.

use crate::controller::routing::{compute_path, GraphOptions, PathError, PathResult};
use crate::controller::{Controller, Ctx, FlowStatus, PreemptionJob, Purpose};
use crate::model::{FlowId, FlowSpec, Reservation, ReservationState, SimTime};

/// Candidate victims beyond this many (lowest priority first) are not considered.
pub const MAX_CANDIDATES: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct VictimPlan {
    pub flow: FlowSpec,
    /// `None` when the victim is dropped.
    pub alternate: Option<PathResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreemptionPlan {
    pub victims: Vec<VictimPlan>,
    pub path: PathResult,
}

fn credit_reservation(opts: &mut GraphOptions, r: &Reservation) {
    for (l, mbps) in &r.per_link_holds {
        opts.credit(l, *mbps);
    }
    for l in r.peering.iter().filter(|l| !r.per_link_holds.contains_key(l)) {
        opts.credit(l, r.flow.bandwidth_mbps);
    }
}

fn debit(opts: &mut GraphOptions, path: &PathResult, mbps: f64) {
    for l in path.links() {
        opts.credit(l, -mbps);
    }
}

/// Index subsets of `0..n` ordered by size, then by the sorted priorities of their members,
/// then by the sorted flow ids.
fn ordered_subsets(cands: &[Reservation]) -> Vec<Vec<usize>> {
    let n = cands.len();
    let mut subsets: Vec<Vec<usize>> =
        (1u32..(1 << n)).map(|bits| (0..n).filter(|i| bits & (1 << i) != 0).collect()).collect();
    subsets.sort_by_cached_key(|s| {
        let mut prio: Vec<i32> = s.iter().map(|&i| cands[i].flow.priority).collect();
        prio.sort();
        let mut ids: Vec<FlowId> = s.iter().map(|&i| cands[i].flow.id.clone()).collect();
        ids.sort();
        (s.len(), prio, ids)
    });
    subsets
}

impl Controller {
    /// The first victim set, in preference order, that lets `flow` in while every victim
    /// either finds an alternate path or may be dropped.
    pub fn plan_preemption(&self, flow: &FlowSpec, now: SimTime) -> Option<PreemptionPlan> {
        let mut cands: Vec<Reservation> = self
            .db
            .reservations()
            .filter(|r| {
                r.is_origin()
                    && r.state == ReservationState::Committed
                    && r.flow.priority < flow.priority
                    && !self.pending.contains_key(&r.flow.id)
                    && self.db.pending_update(&r.flow.id).is_none()
            })
            .cloned()
            .collect();
        cands.sort_by(|a, b| a.flow.priority.cmp(&b.flow.priority).then_with(|| a.flow.id.cmp(&b.flow.id)));
        cands.truncate(MAX_CANDIDATES);

        'subsets: for s in ordered_subsets(&cands) {
            let mut opts = GraphOptions::default();
            for &i in &s {
                credit_reservation(&mut opts, &cands[i]);
            }
            let Ok(path) = compute_path(&self.db, flow, now, &opts) else { continue };
            debit(&mut opts, &path, flow.bandwidth_mbps);
            let mut victims = Vec::new();
            for &i in &s {
                let v = &cands[i].flow;
                let relaxed = FlowSpec { max_latency_ms: None, ..v.clone() };
                match compute_path(&self.db, &relaxed, now, &opts) {
                    Ok(alt) => {
                        debit(&mut opts, &alt, v.bandwidth_mbps);
                        victims.push(VictimPlan { flow: v.clone(), alternate: Some(alt) });
                    }
                    Err(_) if self.config.allow_drop => victims.push(VictimPlan { flow: v.clone(), alternate: None }),
                    Err(_) => continue 'subsets,
                }
            }
            return Some(PreemptionPlan { victims, path });
        }
        None
    }

    pub(crate) fn execute_preemption(&mut self, flow: FlowSpec, plan: PreemptionPlan, ctx: &mut Ctx) {
        let ids: Vec<String> = plan.victims.iter().map(|v| v.flow.id.to_string()).collect();
        self.log(ctx, "preempt", format!("{} victims={}", flow.id, ids.join(",")));
        self.status.insert(flow.id.clone(), FlowStatus::Pending);
        let waiting = plan.victims.iter().filter(|v| v.alternate.is_some()).map(|v| v.flow.id.clone()).collect();
        let id = flow.id.clone();
        self.preemptions.insert(id.clone(), PreemptionJob { flow, waiting });
        for v in plan.victims {
            match v.alternate {
                Some(alt) => self.start_reservation(v.flow, alt, true, Purpose::Victim { for_flow: id.clone() }, ctx),
                None => self.teardown_flow(&v.flow.id, "preempted", ctx),
            }
        }
        self.maybe_finish_preemption(&id, ctx);
    }

    pub(crate) fn victim_done(&mut self, for_flow: FlowId, victim: FlowId, ok: bool, ctx: &mut Ctx) {
        let Some(job) = self.preemptions.get_mut(&for_flow) else { return };
        job.waiting.remove(&victim);
        if !ok {
            if self.config.allow_drop {
                self.teardown_flow(&victim, "preempted", ctx);
            } else {
                self.preemptions.remove(&for_flow);
                self.reject_request(&for_flow, "preemption failed", ctx);
                return;
            }
        }
        self.maybe_finish_preemption(&for_flow, ctx);
    }

    fn maybe_finish_preemption(&mut self, id: &FlowId, ctx: &mut Ctx) {
        if !self.preemptions.get(id).is_some_and(|j| j.waiting.is_empty()) {
            return;
        }
        let job = self.preemptions.remove(id).expect("checked");
        match compute_path(&self.db, &job.flow, ctx.now, &GraphOptions::default()) {
            Ok(path) => self.start_reservation(job.flow, path, false, Purpose::Admit, ctx),
            Err(e) => self.reject_request(id, &e.to_string(), ctx),
        }
    }

    pub(crate) fn reject_request(&mut self, id: &FlowId, reason: &str, ctx: &mut Ctx) {
        self.log(ctx, "reject", format!("{id} {reason}"));
        self.status.insert(id.clone(), FlowStatus::Rejected(reason.to_string()));
        self.hold_down.insert(id.clone(), ctx.now);
    }
}

/// Whether a path error may be cured by freeing bandwidth.
pub(crate) fn capacity_bound(e: &PathError) -> bool {
    matches!(e, PathError::NoPath(_) | PathError::TooSlow { .. })
}
