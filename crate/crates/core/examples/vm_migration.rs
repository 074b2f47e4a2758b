//! A destination host moves from C to B; the source domain rewrites its rules on the
//! reachability update and moves the reservation.

use mdsdn::harness::run_builtin;

fn main() {
    let world = run_builtin("uc3").expect("built-in");
    for line in world.trace().lines().iter().filter(|l| {
        let t: u64 = l.split(' ').next().unwrap().parse().unwrap();
        (19_990..20_100).contains(&t) && !l.contains("keepalive") && !l.contains("monitoring")
    }) {
        println!("{line}");
    }
    let f = &world.report().flows[&mdsdn::model::FlowId::new("f1")];
    for s in f.samples.iter().filter(|s| (19_980..=20_030).contains(&s.at)) {
        println!("t={} latency={:?}", s.at, s.latency_ms);
    }
}
