//! Reachability agent: host appearance and departure, and redirection of flows toward hosts
//! that moved.

use crate::controller::routing::{compute_path, GraphOptions};
use crate::controller::{Controller, Ctx, Purpose};
use crate::messenger::BusMessage;
use crate::model::{DomainId, Endpoint, FlowId, HostAddr, HostId, ReservationState};

use super::{reachability_topic, ReachabilityAdvert};

impl Controller {
    pub(crate) fn publish_reachability_full(&mut self, ctx: &mut Ctx) {
        let added: Vec<HostId> = self
            .db
            .local_hosts()
            .filter_map(|(h, r)| r.attach.clone().map(|a| HostId::attached(h.clone(), a)))
            .collect();
        if added.is_empty() {
            return;
        }
        let advert = ReachabilityAdvert { origin: self.id.clone(), added, removed: Vec::new() };
        let blocked = self.avoid_set();
        self.publish(ctx, reachability_topic(&self.id), &advert, blocked);
    }

    /// A host was detected at `at` in this domain, or left it when `at` is `None`.
    pub fn host_event(&mut self, host: &HostAddr, at: Option<Endpoint>, ctx: &mut Ctx) {
        let advert = match at {
            Some(at) => {
                self.db.upsert_host(HostId::attached(host.clone(), at.clone()), self.id.clone());
                self.install(ctx, &at.node, host, at.port);
                self.log(ctx, "host-up", format!("{host} {at}"));
                ReachabilityAdvert {
                    origin: self.id.clone(),
                    added: vec![HostId::attached(host.clone(), at)],
                    removed: Vec::new(),
                }
            }
            None => {
                let Some(old) = self.db.host(host).filter(|r| r.domain == self.id).cloned() else { return };
                self.db.remove_host_if(host, &self.id);
                if let Some(a) = &old.attach {
                    ctx.net.remove_rule(&a.node, host);
                }
                self.log(ctx, "host-down", host);
                ReachabilityAdvert { origin: self.id.clone(), added: Vec::new(), removed: vec![host.clone()] }
            }
        };
        let blocked = self.avoid_set();
        self.publish(ctx, reachability_topic(&self.id), &advert, blocked);
        self.pump(ctx);
    }

    pub(crate) fn on_reachability(&mut self, msg: BusMessage, ctx: &mut Ctx) {
        let Ok(advert) = serde_json::from_value::<ReachabilityAdvert>(msg.payload) else {
            self.log(ctx, "bad-advert", &msg.topic);
            return;
        };
        for h in &advert.removed {
            self.db.remove_host_if(h, &advert.origin);
        }
        for h in advert.added {
            let addr = h.address.clone();
            self.db.upsert_host(h, advert.origin.clone());
            self.redirect_toward(&addr, &advert.origin, ctx);
        }
    }

    /// Moves committed flows originated here toward `host` if they end in another domain.
    fn redirect_toward(&mut self, host: &HostAddr, now_in: &DomainId, ctx: &mut Ctx) {
        let moved: Vec<FlowId> = self
            .db
            .reservations()
            .filter(|r| {
                r.is_origin()
                    && r.state == ReservationState::Committed
                    && &r.flow.dst == host
                    && r.domain_path.last() != Some(now_in)
            })
            .map(|r| r.flow.id.clone())
            .collect();
        for id in moved {
            if self.pending.contains_key(&id) {
                continue;
            }
            let r = self.db.reservation(&id).expect("listed above").clone();
            let mut opts = GraphOptions::default();
            for (l, mbps) in &r.per_link_holds {
                opts.credit(l, *mbps);
            }
            match compute_path(&self.db, &r.flow, ctx.now, &opts) {
                Ok(path) => {
                    self.install_path_rules(&path, &r.flow.dst, ctx);
                    let seq = path.domain_sequence.iter().map(|d| d.as_str()).collect::<Vec<_>>().join(">");
                    self.log(ctx, "rewrite", format!("{id} {seq}"));
                    self.start_reservation(r.flow.clone(), path, true, Purpose::Reroute, ctx);
                }
                Err(e) => self.log(ctx, "rewrite-failed", format!("{id} {e}")),
            }
        }
    }
}
