//! Connectivity agent: advertises the state of the owner's peering links on change.

use crate::controller::{Controller, Ctx};
use crate::messenger::BusMessage;
use crate::model::{DirLink, DomainAdjacency};

use super::{connectivity_topic, ConnectivityAdvert};

impl Controller {
    pub(crate) fn own_adjacency(&self) -> Vec<DomainAdjacency> {
        self.db
            .peering_status()
            .iter()
            .filter_map(|(key, st)| {
                let out = key.directions().into_iter().find(|d| d.from.domain() == &self.id)?;
                let spec = self.db.link(&out)?;
                Some(DomainAdjacency {
                    link: key.clone(),
                    neighbor: st.neighbor.clone(),
                    latency_ms: spec.latency_ms,
                    capacity_mbps: spec.capacity_mbps,
                    weak: spec.weak,
                    up: st.up,
                })
            })
            .collect()
    }

    /// Publishes the peering state if it differs from the last advert, or unconditionally
    /// when `force` is set.
    pub(crate) fn publish_connectivity(&mut self, ctx: &mut Ctx, force: bool) {
        let peering = self.own_adjacency();
        if !force && self.last_advertised.as_ref() == Some(&peering) {
            return;
        }
        self.last_advertised = Some(peering.clone());
        let advert = ConnectivityAdvert { origin: self.id.clone(), peering };
        let blocked = self.avoid_set();
        self.publish(ctx, connectivity_topic(&self.id), &advert, blocked);
    }

    pub(crate) fn on_connectivity(&mut self, msg: BusMessage, ctx: &mut Ctx) {
        let Ok(advert) = serde_json::from_value::<ConnectivityAdvert>(msg.payload) else {
            self.log(ctx, "bad-advert", &msg.topic);
            return;
        };
        let down: Vec<DirLink> = advert
            .peering
            .iter()
            .filter(|a| !a.up)
            .flat_map(|a| a.link.directions())
            .collect();
        self.db.set_adjacency(advert.origin, advert.peering);
        let edges = self.db.domain_edges();
        self.with_messenger(|m, out| m.set_remote_edges(edges, out));
        self.pump(ctx);
        let broken: Vec<DirLink> = down
            .into_iter()
            .filter(|l| self.db.reservations().any(|r| r.is_origin() && r.traverses(l)))
            .collect();
        if !broken.is_empty() {
            self.handle_event_reroute(&broken, ctx);
        }
    }
}
