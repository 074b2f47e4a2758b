//! A high-priority flow with a latency ceiling displaces a low-priority flow from the
//! direct link; the victim is moved to the longer path instead of being dropped.

use mdsdn::harness::run_builtin;

fn main() {
    let world = run_builtin("uc2").expect("built-in");
    for line in world.trace().lines().iter().filter(|l| l.contains(" CTRL ") && !l.contains(" plan ")) {
        if ["request", "preempt", "reserve", "admitted", "updated", "reject"].iter().any(|k| line.contains(k)) {
            println!("{line}");
        }
    }
    for (id, f) in &world.report().flows {
        let last = f.samples.iter().rev().find_map(|s| s.latency_ms);
        println!("{id}: delivered {}/{} samples, final latency {last:?} ms", f.delivered(), f.offered());
    }
}
