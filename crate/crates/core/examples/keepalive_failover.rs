//! A peer controller goes silent; its neighbour declares it down after three missed
//! keep-alives and purges everything it advertised.

use mdsdn::harness::run_builtin;

fn main() {
    let world = run_builtin("keepalive").expect("built-in");
    for line in world.trace().lines() {
        if line.contains(" CTRL ") || line.contains(" ACT ") {
            println!("{line}");
        }
    }
    let a = world.controller(&"A".parse().unwrap()).unwrap();
    println!("A knows domains: {:?}", a.db.known_domains());
}
