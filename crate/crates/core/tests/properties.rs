use proptest::prelude::*;

use mdsdn::agents::MonitoringPlan;
use mdsdn::controller::{Edge, QosGraph};
use mdsdn::harness::{parse_scenario, scenario::resolve_topology, World};
use mdsdn::model::{DomainId, NodeId};
use mdsdn::sim::EventQueue;

fn node(i: u16) -> NodeId {
    NodeId::new(DomainId::new("A").unwrap(), i)
}

proptest! {
    #[test]
    fn queue_pops_in_time_then_insertion_order(times in prop::collection::vec(0u64..50, 1..60)) {
        let mut q = EventQueue::new();
        for (i, t) in times.iter().enumerate() {
            q.schedule(*t, i).unwrap();
        }
        let mut last: Option<(u64, usize)> = None;
        while let Some((t, i)) = q.pop() {
            prop_assert_eq!(times[i], t);
            if let Some((lt, li)) = last {
                prop_assert!(lt < t || (lt == t && li < i));
            }
            last = Some((t, i));
        }
    }

    #[test]
    fn shortest_path_is_feasible_and_consistent(
        edges in prop::collection::vec((0u16..6, 0u16..6, 1u32..20, 0u32..15), 0..20),
        demand in 1u32..10,
    ) {
        let mut g = QosGraph::new();
        for (a, b, lat, cap) in &edges {
            if a != b {
                g.add_edge(Edge { from: node(*a), to: node(*b), latency_ms: *lat as f64, residual_mbps: *cap as f64, link: None });
            }
        }
        if let Ok(p) = g.shortest_path(&node(0), &node(5), demand as f64, None) {
            prop_assert_eq!(p.nodes.first(), Some(&node(0)));
            prop_assert_eq!(p.nodes.last(), Some(&node(5)));
            prop_assert_eq!(p.edges.len() + 1, p.nodes.len());
            let sum: f64 = p.edges.iter().map(|e| e.latency_ms).sum();
            prop_assert!((sum - p.total_latency_ms).abs() < 1e-9);
            prop_assert!(p.edges.iter().all(|e| e.residual_mbps >= demand as f64));
            let bottleneck = p.edges.iter().map(|e| e.residual_mbps).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(bottleneck, p.bottleneck_residual_mbps);
        }
    }

    #[test]
    fn slow_period_covers_every_fifth_tick(k in 0u64..1000) {
        prop_assert_eq!(MonitoringPlan::is_slow_tick(k * 2000), k % 5 == 0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_faults_keep_invariants_and_determinism(
        cut_at in 3_000u64..15_000,
        restore_after in prop::option::of(1_000u64..5_000),
        kill in prop::option::of((prop_oneof![Just("A"), Just("B"), Just("C")], 3_000u64..15_000)),
        rate in 1u32..12,
    ) {
        let mut text = format!(
            "topology reference\nduration 20000\nflow f1 A1 C1 priority=1 rate={rate}\nflow f2 h1 h2 priority=3 rate=8\n\
             at 0 start_flow f1\nat 500 start_flow f2\nat {cut_at} cut_link A.0:3 C.0:3\n"
        );
        if let Some(r) = restore_after {
            text.push_str(&format!("at {} restore_link A.0:3 C.0:3\n", cut_at + r));
        }
        if let Some((d, t)) = kill {
            text.push_str(&format!("at {t} kill_controller {d}\n"));
        }
        let s = parse_scenario(&text, |r| resolve_topology(r, None)).unwrap();
        let mut a = World::new(&s).unwrap();
        a.run();
        prop_assert!(a.violations().is_empty(), "{:?}", a.violations());
        let mut b = World::new(&s).unwrap();
        b.run();
        prop_assert_eq!(a.trace().lines(), b.trace().lines());
        prop_assert_eq!(a.report(), b.report());
    }
}
