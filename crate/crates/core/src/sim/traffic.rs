//! Fluid flow sampling. Every active flow emits one sample per 10 ms tick; the sample walks the
//! rules in force at the tick and is either delivered with the summed link latency or dropped.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::model::{DirLink, FlowId, FlowSpec, NodeId, SimTime};

use super::{Network, SimError, WalkOutcome};

pub const TICK_MS: SimTime = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSample {
    pub at: SimTime,
    /// `None` when the sample was dropped.
    pub latency_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTraffic {
    pub flow: FlowSpec,
    pub rate_mbps: f64,
    pub start_ms: SimTime,
    pub end_ms: SimTime,
    pub samples: Vec<FlowSample>,
}

impl FlowTraffic {
    pub fn new(flow: FlowSpec, rate_mbps: f64, start_ms: SimTime, end_ms: SimTime) -> Self {
        FlowTraffic { flow, rate_mbps, start_ms, end_ms, samples: Vec::new() }
    }

    pub fn offered(&self) -> usize {
        self.samples.len()
    }

    pub fn delivered(&self) -> usize {
        self.samples.iter().filter(|s| s.latency_ms.is_some()).count()
    }

    pub fn dropped(&self) -> usize {
        self.offered() - self.delivered()
    }

    pub fn loss_rate(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.dropped() as f64 / self.offered() as f64
        }
    }

    fn active_at(&self, t: SimTime) -> bool {
        self.start_ms <= t && t < self.end_ms
    }
}

/// A sample found no rule at `switch`.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketIn {
    pub flow: FlowSpec,
    pub switch: NodeId,
}

#[derive(Debug, Clone, Default)]
pub struct TrafficEngine {
    flows: BTreeMap<FlowId, FlowTraffic>,
    /// Deterministic thinning credits per (flow, link): overload and random-loss emulation.
    overload_credit: BTreeMap<(FlowId, DirLink), f64>,
    loss_credit: BTreeMap<(FlowId, DirLink), f64>,
}

impl TrafficEngine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn inject(&mut self, net: &Network, traffic: FlowTraffic) -> Result<FlowId, SimError> {
        for h in [&traffic.flow.src, &traffic.flow.dst] {
            if net.host_attachment(h)?.is_none() {
                return Err(SimError::DetachedHost(h.clone()));
            }
        }
        let id = traffic.flow.id.clone();
        self.flows.insert(id.clone(), traffic);
        Ok(id)
    }

    pub fn stop(&mut self, flow: &FlowId, at: SimTime) {
        if let Some(f) = self.flows.get_mut(flow) {
            f.end_ms = f.end_ms.min(at);
        }
    }

    pub fn flow(&self, id: &FlowId) -> Option<&FlowTraffic> {
        self.flows.get(id)
    }

    pub fn flows(&self) -> impl Iterator<Item = &FlowTraffic> {
        self.flows.values()
    }

    /// First tick time at or after `t` at which some flow is active, if any.
    pub fn next_tick(&self, t: SimTime) -> Option<SimTime> {
        let aligned = t.div_ceil(TICK_MS) * TICK_MS;
        self.flows
            .values()
            .filter(|f| f.end_ms > aligned)
            .map(|f| f.start_ms.div_ceil(TICK_MS) * TICK_MS)
            .map(|s| s.max(aligned))
            .filter(|s| self.flows.values().any(|f| f.active_at(*s)))
            .min()
    }

    /// Emits one sample for every flow active at `now`.
    pub fn tick(&mut self, net: &mut Network, now: SimTime) -> Vec<PacketIn> {
        let mut walks = Vec::new();
        let mut load: BTreeMap<DirLink, f64> = BTreeMap::new();
        for f in self.flows.values().filter(|f| f.active_at(now)) {
            let start = match net.host_attachment(&f.flow.src) {
                Ok(Some(at)) => at.node.clone(),
                _ => {
                    walks.push((f.flow.id.clone(), None));
                    continue;
                }
            };
            let walk = net.walk(&start, &f.flow.dst, now);
            for l in &walk.links {
                *load.entry(l.clone()).or_default() += f.rate_mbps;
            }
            walks.push((f.flow.id.clone(), Some(walk)));
        }

        let mut packet_ins = Vec::new();
        for (id, walk) in walks {
            let mut latency = None;
            if let Some(walk) = walk {
                match walk.outcome {
                    WalkOutcome::Delivered { latency_ms } => {
                        latency = Some(latency_ms);
                        for l in &walk.links {
                            if !self.survives(&id, l, load[l], net) {
                                net.count_drop(l);
                                latency = None;
                                break;
                            }
                        }
                    }
                    WalkOutcome::Miss { switch } => {
                        packet_ins.push(PacketIn { flow: self.flows[&id].flow.clone(), switch });
                    }
                    WalkOutcome::Cut { link } => net.count_drop(&link),
                    WalkOutcome::NoHost { .. } | WalkOutcome::Loop { .. } => {}
                }
            }
            let f = self.flows.get_mut(&id).expect("walked flow exists");
            f.samples.push(FlowSample { at: now, latency_ms: latency });
        }
        packet_ins
    }

    /// Proportional thinning: on a link offered `load` against capacity `cap`, a flow keeps
    /// `cap / load` of its samples; a link with loss rate `p` keeps `1 - p` of them.
    fn survives(&mut self, flow: &FlowId, link: &DirLink, load: f64, net: &Network) -> bool {
        let spec = net.link_spec(link).expect("walked link exists");
        let key = (flow.clone(), link.clone());
        if load > spec.capacity_mbps {
            let credit = self.overload_credit.entry(key.clone()).or_default();
            *credit += spec.capacity_mbps;
            if *credit >= load {
                *credit -= load;
            } else {
                return false;
            }
        }
        if spec.loss_rate > 0.0 {
            let credit = self.loss_credit.entry(key).or_default();
            *credit += 1.0 - spec.loss_rate;
            if *credit >= 1.0 - 1e-12 {
                *credit -= 1.0;
            } else {
                return false;
            }
        }
        true
    }
}
