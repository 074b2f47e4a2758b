//! Monitoring avoids a weak interconnection while a relay exists and falls back to a
//! slow 10 s cadence over it once the relay is cut.

use mdsdn::agents::Category;
use mdsdn::harness::run_builtin;

fn main() {
    let world = run_builtin("uc1").expect("built-in");
    for line in world.trace().lines().iter().filter(|l| l.contains(" plan ") || l.contains(" ACT ") || l.contains("peer-down")) {
        println!("{line}");
    }
    let r = world.report();
    println!("\nmonitoring bytes per second");
    println!("second   A>C   C>A   B>A");
    for sec in (0..60).step_by(2) {
        let m = |f, t| r.bytes_between(f, t, Category::Monitoring, sec, sec + 2);
        println!("{sec:>6} {:>5} {:>5} {:>5}", m("A", "C"), m("C", "A"), m("B", "A"));
    }
}
