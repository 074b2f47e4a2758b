//! Topic patterns, and how publications spread across the federated bus in the
//! reference triangle.

use std::collections::BTreeMap;

use mdsdn::harness::run_builtin;
use mdsdn::messenger::Topic;
use mdsdn::sim::TraceRecord;

fn main() {
    let pattern: Topic = "monitoring.*.2s".parse().unwrap();
    for t in ["monitoring.B.2s", "monitoring.B.10s", "connectivity.B.update"] {
        println!("{pattern} matches {t}: {}", pattern.matches(&t.parse().unwrap()));
    }

    let world = run_builtin("uc2").expect("built-in");
    let mut hops: BTreeMap<(String, String), usize> = BTreeMap::new();
    for line in world.trace().lines() {
        let r = TraceRecord::parse(line).unwrap();
        if r.kind != "BUS" {
            continue;
        }
        let mut it = r.detail.split(' ');
        let label = it.next().unwrap().to_string();
        let dir = it.nth(1).unwrap().to_string();
        if !label.starts_with("fed.") && label != "mlldp" {
            *hops.entry((label, dir)).or_default() += 1;
        }
    }
    println!("\nreceipts per topic and hop in uc2:");
    for ((label, dir), n) in hops {
        println!("{n:>5}  {label:<28} {dir}");
    }
}
