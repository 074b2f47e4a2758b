//! Scenario scripts.
//!
//! ```text
//! topology <name-or-path>
//! duration <ms>
//! flow <id> <src> <dst> priority=<p> rate=<mbps> [max_latency=<ms>]
//! at <ms> <verb> <args...>
//! ```
//!
//! Verbs: `cut_link <endpoint> <endpoint>`, `restore_link <endpoint> <endpoint>`,
//! `start_flow <id>`, `stop_flow <id>`, `migrate_host <addr> <switch>:<port>`,
//! `request_service <id>`, `kill_controller <domain>`, `graceful_leave <domain>`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::model::{DirLink, DomainId, Endpoint, FlowId, FlowSpec, HostAddr, LinkKey, SimTime};
use crate::sim::Topology;

use super::topology::{parse_topology, words, Diagnostic, Diagnostics};

/// Built-in topologies by name.
pub const BUILTIN_TOPOLOGIES: [(&str, &str); 3] = [
    ("reference", include_str!("../../scenarios/reference.topo")),
    ("uc1", include_str!("../../scenarios/uc1.topo")),
    ("pair", include_str!("../../scenarios/pair.topo")),
];

/// Built-in scenarios by name, with a one-line description.
pub const BUILTIN_SCENARIOS: [(&str, &str, &str); 4] = [
    ("uc1", "adaptive monitoring over a weak link, B-C cut at 33 s", include_str!("../../scenarios/uc1.scn")),
    ("uc2", "priority reservation preempting a low-priority flow", include_str!("../../scenarios/uc2.scn")),
    ("uc3", "host migration from C to B under a running flow", include_str!("../../scenarios/uc3.scn")),
    ("keepalive", "two domains, B silenced at 5 s", include_str!("../../scenarios/keepalive.scn")),
];

pub fn builtin_topology(name: &str) -> Option<&'static str> {
    BUILTIN_TOPOLOGIES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn builtin_scenario(name: &str) -> Option<&'static str> {
    BUILTIN_SCENARIOS.iter().find(|(n, ..)| *n == name).map(|(.., t)| *t)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    CutLink(LinkKey),
    RestoreLink(LinkKey),
    StartFlow(FlowId),
    StopFlow(FlowId),
    MigrateHost { host: HostAddr, to: Endpoint },
    RequestService(FlowId),
    KillController(DomainId),
    GracefulLeave(DomainId),
}

impl Action {
    pub fn verb(&self) -> &'static str {
        match self {
            Action::CutLink(_) => "cut_link",
            Action::RestoreLink(_) => "restore_link",
            Action::StartFlow(_) => "start_flow",
            Action::StopFlow(_) => "stop_flow",
            Action::MigrateHost { .. } => "migrate_host",
            Action::RequestService(_) => "request_service",
            Action::KillController(_) => "kill_controller",
            Action::GracefulLeave(_) => "graceful_leave",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::CutLink(k) | Action::RestoreLink(k) => {
                let l = k.forward();
                write!(f, "{} {}", l.from, l.to)
            }
            Action::StartFlow(id) | Action::StopFlow(id) | Action::RequestService(id) => write!(f, "{id}"),
            Action::MigrateHost { host, to } => write!(f, "{host} {to}"),
            Action::KillController(d) | Action::GracefulLeave(d) => write!(f, "{d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedAction {
    pub at_ms: SimTime,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology_ref: String,
    pub topology: Topology,
    pub duration_ms: SimTime,
    pub flows: BTreeMap<FlowId, FlowSpec>,
    /// Sorted by time; actions at the same time keep their file order.
    pub actions: Vec<TimedAction>,
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Invalid(#[from] Diagnostics),
}

/// Reads a scenario from a file, or a built-in one when `arg` names one and no such file exists.
pub fn load_scenario(arg: &str) -> Result<Scenario, LoadError> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(text) = builtin_scenario(arg) {
            return Ok(parse_scenario(text, |r| resolve_topology(r, None))?);
        }
    }
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: arg.to_string(), source })?;
    let dir = path.parent().map(Path::to_path_buf);
    Ok(parse_scenario(&text, |r| resolve_topology(r, dir.as_deref()))?)
}

/// Built-in topology names win; anything else is a path relative to `dir`.
pub fn resolve_topology(reference: &str, dir: Option<&Path>) -> Result<String, String> {
    if let Some(t) = builtin_topology(reference) {
        return Ok(t.to_string());
    }
    let p = dir.map(|d| d.join(reference)).unwrap_or_else(|| reference.into());
    std::fs::read_to_string(&p).map_err(|e| format!("cannot read topology {}: {e}", p.display()))
}

fn link_key(topo: &Topology, a: &str, b: &str) -> Result<LinkKey, String> {
    let a: Endpoint = a.parse().map_err(|_| format!("invalid endpoint {a:?}"))?;
    let b: Endpoint = b.parse().map_err(|_| format!("invalid endpoint {b:?}"))?;
    let dir = DirLink::new(a, b);
    topo.link(&dir).map(|_| dir.key()).ok_or_else(|| format!("no link {dir}"))
}

pub fn parse_scenario(text: &str, resolve: impl Fn(&str) -> Result<String, String>) -> Result<Scenario, Diagnostics> {
    let mut errs = Vec::new();
    let mut topology: Option<(String, Topology)> = None;
    let mut duration = None;
    let mut flows: BTreeMap<FlowId, FlowSpec> = BTreeMap::new();
    let mut actions = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let w = words(raw);
        let Some(&head) = w.first() else { continue };
        let mut err = |m: String| errs.push(Diagnostic { line, message: m });
        match (head, &w[1..]) {
            ("topology", [r]) => match resolve(r).map(|t| parse_topology(&t)) {
                Ok(Ok(t)) => topology = Some((r.to_string(), t)),
                Ok(Err(d)) => err(format!("topology {r} is invalid: {}", d.to_string().replace('\n', "; "))),
                Err(e) => err(e),
            },
            ("duration", [ms]) => match ms.parse::<SimTime>() {
                Ok(ms) => duration = Some(ms),
                Err(_) => err(format!("invalid duration {ms:?}")),
            },
            ("flow", [id, src, dst, attrs @ ..]) => {
                let Some((_, topo)) = &topology else {
                    err("flow declared before topology".into());
                    continue;
                };
                let (mut priority, mut rate, mut max_latency) = (None, None, None);
                for a in attrs {
                    match a.split_once('=') {
                        Some(("priority", v)) => priority = v.parse::<i32>().ok(),
                        Some(("rate", v)) => rate = v.parse::<f64>().ok(),
                        Some(("max_latency", v)) => match v.parse::<f64>() {
                            Ok(x) => max_latency = Some(x),
                            Err(_) => err(format!("invalid max_latency {v:?}")),
                        },
                        _ => err(format!("unknown flow attribute {a:?}")),
                    }
                }
                let (Some(priority), Some(rate)) = (priority, rate) else {
                    err("flow needs priority=<int> and rate=<mbps>".into());
                    continue;
                };
                let spec = FlowSpec {
                    id: FlowId::new(*id),
                    src: HostAddr::new(*src),
                    dst: HostAddr::new(*dst),
                    priority,
                    bandwidth_mbps: rate,
                    max_latency_ms: max_latency,
                };
                for h in [&spec.src, &spec.dst] {
                    if !topo.hosts.iter().any(|(x, _)| x == h) {
                        err(format!("flow {id} references unknown host {h}"));
                    }
                }
                if let Err(e) = spec.validate() {
                    err(e.to_string());
                } else if flows.insert(spec.id.clone(), spec).is_some() {
                    err(format!("duplicate flow {id}"));
                }
            }
            ("at", [ms, verb, args @ ..]) => {
                let Ok(at_ms) = ms.parse::<SimTime>() else {
                    err(format!("invalid time {ms:?}"));
                    continue;
                };
                let Some((_, topo)) = &topology else {
                    err("action before topology".into());
                    continue;
                };
                let flow = |id: &str| {
                    let id = FlowId::new(id);
                    if flows.contains_key(&id) { Ok(id) } else { Err(format!("unknown flow {id}")) }
                };
                let domain = |d: &str| match DomainId::new(d) {
                    Ok(d) if topo.domains.contains(&d) => Ok(d),
                    _ => Err(format!("unknown domain {d}")),
                };
                let action = match (*verb, args) {
                    ("cut_link", [a, b]) => link_key(topo, a, b).map(Action::CutLink),
                    ("restore_link", [a, b]) => link_key(topo, a, b).map(Action::RestoreLink),
                    ("start_flow", [id]) => flow(id).map(Action::StartFlow),
                    ("stop_flow", [id]) => flow(id).map(Action::StopFlow),
                    ("request_service", [id]) => flow(id).map(Action::RequestService),
                    ("migrate_host", [h, to]) => {
                        let host = HostAddr::new(*h);
                        match to.parse::<Endpoint>() {
                            _ if !topo.hosts.iter().any(|(x, _)| x == &host) => Err(format!("unknown host {host}")),
                            Ok(to) if topo.switches.contains(&to.node) => Ok(Action::MigrateHost { host, to }),
                            _ => Err(format!("invalid attachment point {to:?}")),
                        }
                    }
                    ("kill_controller", [d]) => domain(d).map(Action::KillController),
                    ("graceful_leave", [d]) => domain(d).map(Action::GracefulLeave),
                    (v, _) => Err(format!("unknown verb or wrong arguments: {v}")),
                };
                match action {
                    Ok(action) => actions.push(TimedAction { at_ms, action }),
                    Err(e) => err(e),
                }
            }
            _ => err(format!("unrecognized line {:?}", w.join(" "))),
        }
    }

    let Some((topology_ref, topology)) = topology else {
        errs.push(Diagnostic { line: 0, message: "missing `topology` line".into() });
        return Err(Diagnostics(errs));
    };
    let Some(duration_ms) = duration else {
        errs.push(Diagnostic { line: 0, message: "missing `duration` line".into() });
        return Err(Diagnostics(errs));
    };
    for a in actions.iter().filter(|a| a.at_ms > duration_ms) {
        errs.push(Diagnostic { line: 0, message: format!("{} at {} is after the end", a.action.verb(), a.at_ms) });
    }
    if !errs.is_empty() {
        return Err(Diagnostics(errs));
    }
    actions.sort_by_key(|a| a.at_ms);
    Ok(Scenario { topology_ref, topology, duration_ms, flows, actions })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Scenario, Diagnostics> {
        parse_scenario(text, |r| resolve_topology(r, None))
    }

    #[test]
    fn builtins_parse() {
        for (name, _, text) in BUILTIN_SCENARIOS {
            parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        let uc2 = parse(builtin_scenario("uc2").unwrap()).unwrap();
        assert_eq!(uc2.flows[&FlowId::new("f2")].max_latency_ms, Some(15.0));
        assert_eq!(uc2.actions.len(), 2);
    }

    #[test]
    fn actions_are_sorted_stably() {
        let s = parse("topology pair\nduration 100\nat 50 kill_controller B\nat 10 graceful_leave A\nat 50 kill_controller A\n").unwrap();
        let order: Vec<String> = s.actions.iter().map(|a| format!("{} {}", a.at_ms, a.action)).collect();
        assert_eq!(order, vec!["10 A", "50 B", "50 A"]);
    }

    #[test]
    fn dangling_references_are_diagnosed() {
        let e = parse("topology pair\nduration 100\nat 5 cut_link A.0:1 A.0:2\nat 6 start_flow nope\nat 7 kill_controller Z\n")
            .unwrap_err();
        let lines: Vec<usize> = e.0.iter().map(|d| d.line).collect();
        assert_eq!(lines, vec![3, 4, 5]);
    }

    #[test]
    fn action_after_end_is_rejected() {
        assert!(parse("topology pair\nduration 100\nat 500 kill_controller B\n").is_err());
    }

    #[test]
    fn missing_topology_is_rejected() {
        assert!(parse("duration 10\n").is_err());
    }
}
