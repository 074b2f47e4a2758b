//! Topology documents.
//!
//! ```text
//! domain <ID>
//! switch <domain> <n>
//! host <addr> at <switch>:<port>
//! link <endpoint> <endpoint> latency=<ms> capacity=<mbps> [loss=<f>] [weak]
//! ```
//!
//! Blank lines and `#` comments are ignored. Every problem is reported with its line number.

use std::collections::BTreeSet;
use std::fmt;

use crate::model::{DirLink, DomainId, Endpoint, HostAddr, LinkSpec, NodeId};
use crate::sim::Topology;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for Diagnostics {}

/// Strips a trailing comment and splits into words.
pub(crate) fn words(line: &str) -> Vec<&str> {
    line.split('#').next().unwrap_or("").split_whitespace().collect()
}

pub fn parse_topology(text: &str) -> Result<Topology, Diagnostics> {
    let mut topo = Topology::default();
    let mut errs = Vec::new();
    let mut used_ports: BTreeSet<Endpoint> = BTreeSet::new();
    let mut link_keys = BTreeSet::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let w = words(raw);
        let Some(&head) = w.first() else { continue };
        let mut err = |m: String| errs.push(Diagnostic { line, message: m });
        match head {
            "domain" => {
                let [_, id] = w[..] else {
                    err("expected `domain <ID>`".into());
                    continue;
                };
                match DomainId::new(id) {
                    Ok(d) if topo.domains.contains(&d) => err(format!("duplicate domain {d}")),
                    Ok(d) => topo.domains.push(d),
                    Err(e) => err(e.to_string()),
                }
            }
            "switch" => {
                let [_, dom, n] = w[..] else {
                    err("expected `switch <domain> <n>`".into());
                    continue;
                };
                let Ok(d) = DomainId::new(dom) else {
                    err(format!("invalid domain {dom:?}"));
                    continue;
                };
                if !topo.domains.contains(&d) {
                    err(format!("switch in unknown domain {d}"));
                    continue;
                }
                let Ok(n) = n.parse::<u16>() else {
                    err(format!("invalid switch number {n:?}"));
                    continue;
                };
                let node = NodeId::new(d, n);
                if topo.switches.contains(&node) {
                    err(format!("duplicate switch {node}"));
                } else {
                    topo.switches.push(node);
                }
            }
            "host" => {
                let [_, addr, "at", at] = w[..] else {
                    err("expected `host <addr> at <switch>:<port>`".into());
                    continue;
                };
                let Ok(at) = at.parse::<Endpoint>() else {
                    err(format!("invalid attachment point {at:?}"));
                    continue;
                };
                let addr = HostAddr::new(addr);
                if !topo.switches.contains(&at.node) {
                    err(format!("host {addr} on unknown switch {}", at.node));
                } else if topo.hosts.iter().any(|(h, _)| h == &addr) {
                    err(format!("duplicate host {addr}"));
                } else if !used_ports.insert(at.clone()) {
                    err(format!("port {at} already in use"));
                } else {
                    topo.hosts.push((addr, at));
                }
            }
            "link" => {
                if w.len() < 5 {
                    err("expected `link <endpoint> <endpoint> latency=<ms> capacity=<mbps> [loss=<f>] [weak]`".into());
                    continue;
                }
                let ends: Result<Vec<Endpoint>, _> = w[1..3].iter().map(|s| s.parse::<Endpoint>()).collect();
                let Ok(ends) = ends else {
                    err(format!("invalid endpoints {} {}", w[1], w[2]));
                    continue;
                };
                let (mut latency, mut capacity, mut loss, mut weak) = (None, None, 0.0, false);
                let mut bad = false;
                for attr in &w[3..] {
                    let num = |v: &str| v.parse::<f64>().ok().filter(|x| x.is_finite());
                    match attr.split_once('=') {
                        Some(("latency", v)) => latency = num(v).filter(|x| *x >= 0.0),
                        Some(("capacity", v)) => capacity = num(v).filter(|x| *x > 0.0),
                        Some(("loss", v)) => match num(v).filter(|x| (0.0..1.0).contains(x)) {
                            Some(x) => loss = x,
                            None => {
                                err(format!("loss must be in [0, 1), got {v:?}"));
                                bad = true;
                            }
                        },
                        None if *attr == "weak" => weak = true,
                        _ => {
                            err(format!("unknown link attribute {attr:?}"));
                            bad = true;
                        }
                    }
                }
                let (Some(latency), Some(capacity)) = (latency, capacity) else {
                    err("link needs latency=<ms ≥ 0> and capacity=<mbps > 0>".into());
                    continue;
                };
                if bad {
                    continue;
                }
                let mut dangling = false;
                for e in &ends {
                    if !topo.switches.contains(&e.node) {
                        err(format!("link references unknown switch {}", e.node));
                        dangling = true;
                    }
                }
                if dangling {
                    continue;
                }
                if ends[0].node == ends[1].node {
                    err("link joins a switch to itself".into());
                    continue;
                }
                let dir = DirLink::new(ends[0].clone(), ends[1].clone());
                if !link_keys.insert(dir.key()) {
                    err(format!("duplicate link {dir}"));
                    continue;
                }
                if let Some(e) = ends.iter().find(|e| !used_ports.insert((*e).clone())) {
                    err(format!("port {e} already in use"));
                    continue;
                }
                let mut spec = LinkSpec::new(dir, latency, capacity);
                spec.loss_rate = loss;
                spec.weak = weak;
                topo.links.push(spec.clone());
                topo.links.push(spec.reversed());
            }
            other => err(format!("unknown directive {other:?}")),
        }
    }
    if errs.is_empty() {
        Ok(topo)
    } else {
        Err(Diagnostics(errs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_triangle_parses() {
        let t = parse_topology(include_str!("../../scenarios/reference.topo")).unwrap();
        assert_eq!(t.domains.len(), 3);
        assert_eq!(t.switches.len(), 6);
        assert_eq!(t.hosts.len(), 7);
        assert_eq!(t.links.len(), 12);
        assert_eq!(t.peering_keys().len(), 3);
    }

    #[test]
    fn weak_flag_and_loss_are_read() {
        let t = parse_topology("domain A\ndomain C\nswitch A 0\nswitch C 0\nlink A.0:3 C.0:3 latency=50 capacity=10 loss=0.1 weak\n")
            .unwrap();
        assert!(t.links.iter().all(|l| l.weak && l.loss_rate == 0.1 && l.latency_ms == 50.0));
    }

    #[test]
    fn unknown_switch_is_reported_with_line() {
        let err = parse_topology("domain A\nswitch A 0\n\nlink A.0:1 A.7:1 latency=1 capacity=1\n").unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert_eq!(err.0[0].line, 4);
        assert!(err.0[0].message.contains("A.7"));
    }

    #[test]
    fn duplicate_host_is_reported() {
        let err = parse_topology("domain A\nswitch A 0\nhost x at A.0:1\nhost x at A.0:2\n").unwrap_err();
        assert_eq!(err.to_string(), "line 4: duplicate host x");
    }

    #[test]
    fn all_problems_are_collected() {
        let err = parse_topology("domain A\nfrobnicate\nswitch B 0\nlink A.0:1 A.1:1 capacity=3\n").unwrap_err();
        let lines: Vec<usize> = err.0.iter().map(|d| d.line).collect();
        assert_eq!(lines, vec![2, 3, 4]);
    }
}
