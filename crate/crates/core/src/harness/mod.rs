//! Scenario definition and execution, metrics, and the built-in reference scenarios.

pub mod report;
pub mod scenario;
pub mod topology;
pub mod world;

pub use report::{emit_report, MetricsReport};
pub use scenario::{builtin_scenario, load_scenario, parse_scenario, Action, Scenario, BUILTIN_SCENARIOS};
pub use topology::{parse_topology, Diagnostic, Diagnostics};
pub use world::World;

/// Loads and runs a built-in scenario to completion.
pub fn run_builtin(name: &str) -> Option<World> {
    let s = scenario::parse_scenario(builtin_scenario(name)?, |r| scenario::resolve_topology(r, None)).ok()?;
    let mut w = World::new(&s).ok()?;
    w.run();
    Some(w)
}
