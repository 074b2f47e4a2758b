use std::collections::{BTreeMap, BTreeSet};

use crate::model::{DirLink, Endpoint, HostAddr, LinkKey, LinkSpec, NodeId, SimTime};

use super::{SimError, Topology};

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardingRule {
    pub switch: NodeId,
    pub match_dst: HostAddr,
    pub out_port: u16,
    pub installed_at: SimTime,
}

/// A rule only governs frames processed strictly after its install time, so a slot keeps the
/// rule it replaced until then.
#[derive(Debug, Clone)]
struct RuleSlot {
    current: ForwardingRule,
    previous: Option<ForwardingRule>,
}

#[derive(Debug, Clone)]
struct LinkState {
    spec: LinkSpec,
    cut: bool,
    drops: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WalkOutcome {
    Delivered { latency_ms: f64 },
    /// No rule for the destination at `switch`; a packet-in candidate.
    Miss { switch: NodeId },
    Cut { link: DirLink },
    /// Forwarded out of a port with nothing (or the wrong host) behind it.
    NoHost { at: Endpoint },
    Loop { switch: NodeId },
}

/// Result of pushing one frame through the current rule tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Walk {
    pub links: Vec<DirLink>,
    pub outcome: WalkOutcome,
}

#[derive(Debug, Clone)]
pub struct Network {
    switches: BTreeSet<NodeId>,
    links: BTreeMap<DirLink, LinkState>,
    out_links: BTreeMap<Endpoint, DirLink>,
    hosts: BTreeMap<HostAddr, Option<Endpoint>>,
    host_ports: BTreeMap<Endpoint, HostAddr>,
    rules: BTreeMap<(NodeId, HostAddr), RuleSlot>,
}

impl Network {
    pub fn new(topo: &Topology) -> Self {
        let mut net = Network {
            switches: topo.switches.iter().cloned().collect(),
            links: BTreeMap::new(),
            out_links: BTreeMap::new(),
            hosts: BTreeMap::new(),
            host_ports: BTreeMap::new(),
            rules: BTreeMap::new(),
        };
        for spec in &topo.links {
            net.out_links.insert(spec.link.from.clone(), spec.link.clone());
            net.links.insert(spec.link.clone(), LinkState { spec: spec.clone(), cut: false, drops: 0 });
        }
        for (h, at) in &topo.hosts {
            net.hosts.insert(h.clone(), Some(at.clone()));
            net.host_ports.insert(at.clone(), h.clone());
        }
        net
    }

    pub fn has_switch(&self, node: &NodeId) -> bool {
        self.switches.contains(node)
    }

    pub fn link_spec(&self, link: &DirLink) -> Option<&LinkSpec> {
        self.links.get(link).map(|s| &s.spec)
    }

    pub fn link_from(&self, port: &Endpoint) -> Option<&DirLink> {
        self.out_links.get(port)
    }

    pub fn is_cut(&self, link: &DirLink) -> bool {
        self.links.get(link).map(|s| s.cut).unwrap_or(true)
    }

    pub fn drop_counter(&self, link: &DirLink) -> u64 {
        self.links.get(link).map(|s| s.drops).unwrap_or(0)
    }

    pub(crate) fn count_drop(&mut self, link: &DirLink) {
        if let Some(s) = self.links.get_mut(link) {
            s.drops += 1;
        }
    }

    // ---- rules ----------------------------------------------------------------------------

    pub fn install_rule(&mut self, rule: ForwardingRule) -> Result<(), SimError> {
        if !self.switches.contains(&rule.switch) {
            return Err(SimError::UnknownSwitch(rule.switch));
        }
        let key = (rule.switch.clone(), rule.match_dst.clone());
        match self.rules.get_mut(&key) {
            Some(slot) => {
                if slot.current.out_port == rule.out_port {
                    return Ok(());
                }
                let old = std::mem::replace(&mut slot.current, rule);
                if old.installed_at < slot.current.installed_at {
                    slot.previous = Some(old);
                }
            }
            None => {
                self.rules.insert(key, RuleSlot { current: rule, previous: None });
            }
        }
        Ok(())
    }

    pub fn remove_rule(&mut self, switch: &NodeId, dst: &HostAddr) -> Option<ForwardingRule> {
        self.rules.remove(&(switch.clone(), dst.clone())).map(|s| s.current)
    }

    /// The rule governing a frame for `dst` processed at `switch` at time `now`.
    pub fn lookup(&self, switch: &NodeId, dst: &HostAddr, now: SimTime) -> Option<&ForwardingRule> {
        let slot = self.rules.get(&(switch.clone(), dst.clone()))?;
        if slot.current.installed_at < now {
            Some(&slot.current)
        } else {
            slot.previous.as_ref().filter(|r| r.installed_at < now)
        }
    }

    pub fn rule(&self, switch: &NodeId, dst: &HostAddr) -> Option<&ForwardingRule> {
        self.rules.get(&(switch.clone(), dst.clone())).map(|s| &s.current)
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    // ---- hosts ----------------------------------------------------------------------------

    pub fn host_attachment(&self, host: &HostAddr) -> Result<Option<&Endpoint>, SimError> {
        self.hosts.get(host).map(|a| a.as_ref()).ok_or_else(|| SimError::UnknownHost(host.clone()))
    }

    pub fn detach_host(&mut self, host: &HostAddr) -> Result<Option<Endpoint>, SimError> {
        let slot = self.hosts.get_mut(host).ok_or_else(|| SimError::UnknownHost(host.clone()))?;
        let old = slot.take();
        if let Some(at) = &old {
            self.host_ports.remove(at);
        }
        Ok(old)
    }

    pub fn attach_host(&mut self, host: &HostAddr, at: Endpoint) -> Result<(), SimError> {
        if !self.switches.contains(&at.node) {
            return Err(SimError::UnknownSwitch(at.node));
        }
        if self.out_links.contains_key(&at) || self.host_ports.contains_key(&at) {
            return Err(SimError::PortInUse(at));
        }
        self.detach_host(host)?;
        self.hosts.insert(host.clone(), Some(at.clone()));
        self.host_ports.insert(at, host.clone());
        Ok(())
    }

    // ---- link state -----------------------------------------------------------------------

    pub fn cut_link(&mut self, key: &LinkKey) -> Result<(), SimError> {
        self.set_cut(key, true)
    }

    pub fn restore_link(&mut self, key: &LinkKey) -> Result<(), SimError> {
        self.set_cut(key, false)
    }

    fn set_cut(&mut self, key: &LinkKey, cut: bool) -> Result<(), SimError> {
        for dir in key.directions() {
            let st = self.links.get_mut(&dir).ok_or_else(|| SimError::UnknownLink(key.to_string()))?;
            st.cut = cut;
        }
        Ok(())
    }

    // ---- measurement ----------------------------------------------------------------------

    /// One-way latency of a timestamped probe sent along `path`, or `None` if it was lost.
    /// Probes are not subject to capacity limits.
    pub fn send_probe(&self, path: &[DirLink]) -> Result<Option<f64>, SimError> {
        let mut total = 0.0;
        let mut lost = false;
        for l in path {
            let st = self.links.get(l).ok_or_else(|| SimError::UnknownLink(l.to_string()))?;
            lost |= st.cut;
            total += st.spec.latency_ms;
        }
        Ok(if lost { None } else { Some(total) })
    }

    /// Round-trip time of a ping across a peering link.
    pub fn ping_peer(&self, link: &DirLink) -> Result<Option<f64>, SimError> {
        self.send_probe(&[link.clone(), link.reverse()])
    }

    /// Walks a frame addressed to `dst` from `start` through the rules in force at `now`.
    pub fn walk(&self, start: &NodeId, dst: &HostAddr, now: SimTime) -> Walk {
        let mut links = Vec::new();
        let mut latency = 0.0;
        let mut visited = BTreeSet::new();
        let mut at = start.clone();
        loop {
            if !visited.insert(at.clone()) {
                return Walk { links, outcome: WalkOutcome::Loop { switch: at } };
            }
            let Some(rule) = self.lookup(&at, dst, now) else {
                return Walk { links, outcome: WalkOutcome::Miss { switch: at } };
            };
            let port = at.port(rule.out_port);
            if let Some(h) = self.host_ports.get(&port) {
                let outcome = if h == dst {
                    WalkOutcome::Delivered { latency_ms: latency }
                } else {
                    WalkOutcome::NoHost { at: port }
                };
                return Walk { links, outcome };
            }
            let Some(link) = self.out_links.get(&port) else {
                return Walk { links, outcome: WalkOutcome::NoHost { at: port } };
            };
            let st = &self.links[link];
            links.push(link.clone());
            if st.cut {
                return Walk { links, outcome: WalkOutcome::Cut { link: link.clone() } };
            }
            latency += st.spec.latency_ms;
            at = link.to.node.clone();
        }
    }
}
