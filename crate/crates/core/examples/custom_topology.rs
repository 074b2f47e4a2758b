//! Build a scenario from text, run it, and write the reports to a directory.

use mdsdn::harness::{emit_report, parse_scenario, parse_topology, World};

const TOPOLOGY: &str = "\
domain X
domain Y
domain Z
switch X 0
switch Y 0
switch Z 0
host x at X.0:9
host z at Z.0:9
link X.0:1 Y.0:1 latency=3 capacity=50
link Y.0:2 Z.0:2 latency=3 capacity=50
link X.0:2 Z.0:1 latency=20 capacity=10
";

const SCENARIO: &str = "\
topology line
duration 10000
flow bulk x z priority=1 rate=8
at 0 start_flow bulk
at 6000 cut_link X.0:1 Y.0:1
";

fn main() {
    let topo = parse_topology(TOPOLOGY).expect("valid topology");
    println!("{} domains, {} links", topo.domains.len(), topo.links.len() / 2);

    let scenario = parse_scenario(SCENARIO, |name| match name {
        "line" => Ok(TOPOLOGY.to_string()),
        other => Err(format!("unknown topology {other}")),
    })
    .expect("valid scenario");
    let mut world = World::new(&scenario).unwrap();
    world.run();

    let dir = std::env::temp_dir().join("mdsdn-custom-topology");
    for f in emit_report(world.report(), Some(world.trace()), &dir).unwrap() {
        println!("wrote {}", f.display());
    }
    println!("{}", std::fs::read_to_string(dir.join("flows.csv")).unwrap());
}
