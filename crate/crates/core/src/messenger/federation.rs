use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::net::Ipv4Addr;

use serde_json::Value;

use crate::model::{DirLink, DomainId, LinkKey, LinkSpec, SimTime};

use super::keepalive::{KeepAlive, KeepAliveAction};
use super::message::{BusMessage, ControlFrame, Interest, InterestTable};
use super::mlldp::{self, DecodeError, MlldpFrame};
use super::topic::{Topic, TopicError};

/// Contact details a controller advertises in its M-LLDP frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerIdentity {
    pub ip: Ipv4Addr,
    pub port: u16,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DownReason {
    KeepAlive,
    Leave,
}

impl DownReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            DownReason::KeepAlive => "keepalive",
            DownReason::Leave => "leave",
        }
    }
}

/// Something the owning controller has to act on.
#[derive(Debug, Clone, PartialEq)]
pub enum MessengerEvent {
    /// Put `frame` on the wire of `via` (an outgoing direction of one of our peering links).
    Send { via: DirLink, frame: ControlFrame },
    Deliver(BusMessage),
    PeerUp { link: LinkKey, peer: DomainId },
    PeerDown { link: LinkKey, peer: DomainId, reason: DownReason, unreachable: Vec<DomainId> },
    /// A domain entered the federation view (first sighting or after a partition).
    DomainJoined(DomainId),
    /// Domains that can no longer be reached over the federation.
    DomainsLost(Vec<DomainId>),
    Rejected { via: DirLink, error: DecodeError },
}

/// Control channel over one of our peering links.
#[derive(Debug, Clone)]
pub struct Session {
    pub link: DirLink,
    pub latency_ms: f64,
    pub peer: Option<DomainId>,
    pub up: bool,
    pub keepalive: KeepAlive,
}

/// The federation broker of one controller: discovery, pairing, subscription exchange,
/// keep-alive and relaying of publications toward interested domains.
#[derive(Debug, Clone)]
pub struct Messenger {
    id: DomainId,
    identity: ServerIdentity,
    sessions: BTreeMap<LinkKey, Session>,
    local: BTreeSet<Topic>,
    table: InterestTable,
    remote_edges: BTreeMap<LinkKey, (DomainId, DomainId)>,
    seen: BTreeSet<(DomainId, u64)>,
    next_seq: u64,
    departed: bool,
}

impl Messenger {
    /// `border` lists the outgoing direction of every peering link leaving this domain.
    pub fn new(id: DomainId, identity: ServerIdentity, border: impl IntoIterator<Item = LinkSpec>) -> Self {
        let sessions = border
            .into_iter()
            .map(|spec| {
                let s = Session {
                    link: spec.link.clone(),
                    latency_ms: spec.latency_ms,
                    peer: None,
                    up: false,
                    keepalive: KeepAlive::new(),
                };
                (spec.link.key(), s)
            })
            .collect();
        let mut table = InterestTable::new();
        table.insert(id.clone(), Interest::default());
        Messenger {
            id,
            identity,
            sessions,
            local: BTreeSet::new(),
            table,
            remote_edges: BTreeMap::new(),
            seen: BTreeSet::new(),
            next_seq: 0,
            departed: false,
        }
    }

    pub fn id(&self) -> &DomainId {
        &self.id
    }

    pub fn sessions(&self) -> impl Iterator<Item = (&LinkKey, &Session)> {
        self.sessions.iter()
    }

    pub fn session(&self, key: &LinkKey) -> Option<&Session> {
        self.sessions.get(key)
    }

    /// Domains with at least one healthy session.
    pub fn peers(&self) -> BTreeSet<DomainId> {
        self.sessions.values().filter(|s| s.up).filter_map(|s| s.peer.clone()).collect()
    }

    pub fn is_paired(&self, peer: &DomainId) -> bool {
        self.sessions.values().any(|s| s.up && s.peer.as_ref() == Some(peer))
    }

    pub fn interests(&self) -> &InterestTable {
        &self.table
    }

    pub fn subscriptions(&self) -> &BTreeSet<Topic> {
        &self.local
    }

    pub fn has_departed(&self) -> bool {
        self.departed
    }

    pub fn frame_for(&self, link: &DirLink) -> MlldpFrame {
        MlldpFrame {
            controller_id: self.id.clone(),
            switch_id: link.from.node.local,
            switch_port: link.from.port,
            server_ip: self.identity.ip,
            server_port: self.identity.port,
            server_name: self.identity.name.clone(),
        }
    }

    // ---- driver contract ------------------------------------------------------------------

    pub fn subscribe(&mut self, pattern: Topic, out: &mut Vec<MessengerEvent>) {
        if self.local.insert(pattern) {
            self.sync_local(out);
        }
    }

    pub fn unsubscribe(&mut self, pattern: &Topic, out: &mut Vec<MessengerEvent>) {
        if self.local.remove(pattern) {
            self.sync_local(out);
        }
    }

    fn sync_local(&mut self, out: &mut Vec<MessengerEvent>) {
        let own = self.table.entry(self.id.clone()).or_default();
        own.version += 1;
        own.patterns = self.local.clone();
        self.flood_interests(None, out);
    }

    fn flood_interests(&self, except: Option<&LinkKey>, out: &mut Vec<MessengerEvent>) {
        for (key, s) in self.sessions.iter().filter(|(_, s)| s.up) {
            if Some(key) == except {
                continue;
            }
            out.push(MessengerEvent::Send {
                via: s.link.clone(),
                frame: ControlFrame::SubSync { from: self.id.clone(), interests: self.table.clone() },
            });
        }
    }

    /// Publishes `payload` on `topic`. Links in `blocked` are never used by any hop.
    pub fn publish(
        &mut self,
        topic: Topic,
        payload: Value,
        now: SimTime,
        blocked: BTreeSet<LinkKey>,
        out: &mut Vec<MessengerEvent>,
    ) -> Result<u64, TopicError> {
        topic.ensure_concrete()?;
        let seq = self.next_seq;
        self.next_seq += 1;
        let msg = BusMessage { topic, origin: self.id.clone(), seq, sent_at: now, payload };
        self.seen.insert((msg.origin.clone(), seq));
        if self.local.iter().any(|p| p.matches(&msg.topic)) {
            out.push(MessengerEvent::Deliver(msg.clone()));
        }
        self.route(msg, None, blocked, out);
        Ok(seq)
    }

    /// Establishes the control channel over `key` with `peer`. Pairing twice is a no-op.
    pub fn pair(&mut self, key: &LinkKey, peer: DomainId, out: &mut Vec<MessengerEvent>) -> bool {
        let Some(s) = self.sessions.get_mut(key) else { return false };
        if s.up && s.peer.as_ref() == Some(&peer) {
            return false;
        }
        s.up = true;
        s.peer = Some(peer.clone());
        s.keepalive = KeepAlive::new();
        let via = s.link.clone();
        out.push(MessengerEvent::PeerUp { link: key.clone(), peer });
        out.push(MessengerEvent::Send {
            via,
            frame: ControlFrame::Hello { from: self.id.clone(), interests: self.table.clone() },
        });
        true
    }

    /// Severs the control channel over `key` and forgets the interests of every domain that
    /// is no longer reachable.
    pub fn unpair(&mut self, key: &LinkKey, reason: DownReason, out: &mut Vec<MessengerEvent>) -> bool {
        let Some(s) = self.sessions.get_mut(key) else { return false };
        if !s.up {
            return false;
        }
        s.up = false;
        s.keepalive = KeepAlive::new();
        let peer = s.peer.clone().expect("up session has a peer");
        let unreachable = self.purge_unreachable();
        out.push(MessengerEvent::PeerDown { link: key.clone(), peer, reason, unreachable });
        true
    }

    /// Announces departure on `general.leave.<ID>` and unpairs every session.
    pub fn leave(&mut self, now: SimTime, out: &mut Vec<MessengerEvent>) {
        let topic = Topic::new("general", "leave", self.id.as_str()).expect("valid topic");
        let payload = serde_json::json!({ "domain": self.id });
        self.publish(topic, payload, now, BTreeSet::new(), out).expect("concrete topic");
        let keys: Vec<LinkKey> = self.sessions.keys().cloned().collect();
        for k in keys {
            self.unpair(&k, DownReason::Leave, out);
        }
        self.departed = true;
    }

    /// Federation view of inter-domain links not attached to this domain, as learned from
    /// connectivity adverts. Returns the domains that became unreachable.
    pub fn set_remote_edges(&mut self, edges: BTreeMap<LinkKey, (DomainId, DomainId)>, out: &mut Vec<MessengerEvent>) {
        let edges = edges.into_iter().filter(|(k, _)| !k.touches(&self.id)).collect();
        if edges == self.remote_edges {
            return;
        }
        self.remote_edges = edges;
        let lost = self.purge_unreachable();
        if !lost.is_empty() {
            out.push(MessengerEvent::DomainsLost(lost));
        }
    }

    fn purge_unreachable(&mut self) -> Vec<DomainId> {
        let reach = self.reachable(&BTreeSet::new());
        let lost: Vec<DomainId> = self.table.keys().filter(|d| !reach.contains(*d)).cloned().collect();
        for d in &lost {
            self.table.remove(d);
        }
        lost
    }

    // ---- timers ---------------------------------------------------------------------------

    /// Announces ourselves on every border port that has no established peer.
    pub fn discovery_tick(&mut self, out: &mut Vec<MessengerEvent>) {
        if self.departed {
            return;
        }
        for s in self.sessions.values().filter(|s| !s.up) {
            let bytes = mlldp::encode(&self.frame_for(&s.link)).expect("identity fits the frame");
            out.push(MessengerEvent::Send { via: s.link.clone(), frame: ControlFrame::Mlldp(bytes.to_vec()) });
        }
    }

    pub fn keepalive_tick(&mut self, out: &mut Vec<MessengerEvent>) {
        let keys: Vec<LinkKey> = self.sessions.iter().filter(|(_, s)| s.up).map(|(k, _)| k.clone()).collect();
        for key in keys {
            let s = self.sessions.get_mut(&key).expect("listed session");
            match s.keepalive.tick() {
                KeepAliveAction::Send { seq } => {
                    out.push(MessengerEvent::Send {
                        via: s.link.clone(),
                        frame: ControlFrame::KeepAlive { from: self.id.clone(), seq },
                    });
                }
                KeepAliveAction::PeerDown => {
                    self.unpair(&key, DownReason::KeepAlive, out);
                }
            }
        }
    }

    // ---- receive path ---------------------------------------------------------------------

    /// Handles a frame that arrived over `via` (a direction ending in this domain).
    pub fn receive(&mut self, via: &DirLink, frame: ControlFrame, now: SimTime, out: &mut Vec<MessengerEvent>) {
        if self.departed {
            return;
        }
        let key = via.key();
        match frame {
            ControlFrame::Mlldp(bytes) => match mlldp::decode(&bytes) {
                Err(error) => out.push(MessengerEvent::Rejected { via: via.clone(), error }),
                Ok(f) if f.controller_id == self.id => {}
                Ok(f) => {
                    if !self.pair(&key, f.controller_id, out) {
                        if let Some(s) = self.sessions.get(&key) {
                            out.push(MessengerEvent::Send {
                                via: s.link.clone(),
                                frame: ControlFrame::Hello { from: self.id.clone(), interests: self.table.clone() },
                            });
                        }
                    }
                }
            },
            ControlFrame::Hello { from, interests } => {
                self.pair(&key, from, out);
                self.merge_interests(interests, Some(&key), out);
            }
            ControlFrame::SubSync { interests, .. } => {
                if self.sessions.get(&key).map(|s| s.up).unwrap_or(false) {
                    self.merge_interests(interests, Some(&key), out);
                }
            }
            ControlFrame::KeepAlive { seq, .. } => {
                if let Some(s) = self.sessions.get(&key) {
                    out.push(MessengerEvent::Send {
                        via: s.link.clone(),
                        frame: ControlFrame::KeepAliveReply { from: self.id.clone(), seq },
                    });
                }
            }
            ControlFrame::KeepAliveReply { seq, .. } => {
                if let Some(s) = self.sessions.get_mut(&key) {
                    s.keepalive.on_reply(seq, now);
                }
            }
            ControlFrame::Bus { msg, blocked } => {
                if !self.sessions.get(&key).map(|s| s.up).unwrap_or(false) {
                    return;
                }
                if !self.seen.insert((msg.origin.clone(), msg.seq)) {
                    return;
                }
                if self.local.iter().any(|p| p.matches(&msg.topic)) {
                    out.push(MessengerEvent::Deliver(msg.clone()));
                }
                let from = via.from.domain().clone();
                self.route(msg, Some(from), blocked, out);
            }
        }
    }

    fn merge_interests(&mut self, incoming: InterestTable, from: Option<&LinkKey>, out: &mut Vec<MessengerEvent>) {
        let mut changed = false;
        for (d, i) in incoming {
            if d == self.id {
                continue;
            }
            match self.table.get(&d) {
                Some(cur) if cur.version >= i.version => {}
                prev => {
                    if prev.is_none() {
                        out.push(MessengerEvent::DomainJoined(d.clone()));
                    }
                    self.table.insert(d, i);
                    changed = true;
                }
            }
        }
        if changed {
            self.flood_interests(from, out);
        }
    }

    // ---- routing --------------------------------------------------------------------------

    fn graph(&self, blocked: &BTreeSet<LinkKey>) -> BTreeMap<DomainId, BTreeSet<DomainId>> {
        let mut g: BTreeMap<DomainId, BTreeSet<DomainId>> = BTreeMap::new();
        let mut edge = |a: &DomainId, b: &DomainId| {
            g.entry(a.clone()).or_default().insert(b.clone());
            g.entry(b.clone()).or_default().insert(a.clone());
        };
        for (k, s) in &self.sessions {
            if s.up && !blocked.contains(k) {
                edge(&self.id, s.peer.as_ref().expect("up session has a peer"));
            }
        }
        for (k, (a, b)) in &self.remote_edges {
            if !blocked.contains(k) {
                edge(a, b);
            }
        }
        g
    }

    /// Breadth-first tree from this domain: for every reachable domain, the neighbor through
    /// which it is reached. Neighbors are visited in identifier order.
    fn first_hops(&self, blocked: &BTreeSet<LinkKey>) -> BTreeMap<DomainId, DomainId> {
        let g = self.graph(blocked);
        let mut hop: BTreeMap<DomainId, DomainId> = BTreeMap::new();
        let mut seen = BTreeSet::from([self.id.clone()]);
        let mut queue = VecDeque::from([self.id.clone()]);
        while let Some(u) = queue.pop_front() {
            for v in g.get(&u).into_iter().flatten() {
                if seen.insert(v.clone()) {
                    let first = if u == self.id { v.clone() } else { hop[&u].clone() };
                    hop.insert(v.clone(), first);
                    queue.push_back(v.clone());
                }
            }
        }
        hop
    }

    fn reachable(&self, blocked: &BTreeSet<LinkKey>) -> BTreeSet<DomainId> {
        let mut r: BTreeSet<DomainId> = self.first_hops(blocked).into_keys().collect();
        r.insert(self.id.clone());
        r
    }

    /// Next-hop neighbors toward every domain interested in `topic`.
    pub fn next_hops(&self, topic: &Topic, origin: &DomainId, from: Option<&DomainId>, blocked: &BTreeSet<LinkKey>) -> BTreeSet<DomainId> {
        let hops = self.first_hops(blocked);
        self.table
            .iter()
            .filter(|(d, _)| *d != &self.id && *d != origin)
            .filter(|(_, i)| i.patterns.iter().any(|p| p.matches(topic)))
            .filter_map(|(d, _)| hops.get(d).cloned())
            .filter(|h| Some(h) != from)
            .collect()
    }

    fn route(&mut self, msg: BusMessage, from: Option<DomainId>, blocked: BTreeSet<LinkKey>, out: &mut Vec<MessengerEvent>) {
        for hop in self.next_hops(&msg.topic, &msg.origin, from.as_ref(), &blocked) {
            let best = self
                .sessions
                .iter()
                .filter(|(k, s)| s.up && s.peer.as_ref() == Some(&hop) && !blocked.contains(*k))
                .min_by(|(ka, a), (kb, b)| a.latency_ms.total_cmp(&b.latency_ms).then(ka.cmp(kb)));
            if let Some((_, s)) = best {
                out.push(MessengerEvent::Send {
                    via: s.link.clone(),
                    frame: ControlFrame::Bus { msg: msg.clone(), blocked: blocked.clone() },
                });
            }
        }
    }
}
