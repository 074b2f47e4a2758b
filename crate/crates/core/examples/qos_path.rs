//! Least-latency path search with bandwidth pruning and a latency ceiling.

use mdsdn::controller::{Edge, PathError, QosGraph};
use mdsdn::model::NodeId;

fn n(s: &str) -> NodeId {
    s.parse().unwrap()
}

fn main() {
    let mut g = QosGraph::new();
    for (a, b, lat, free) in [
        ("A.0", "C.0", 10.0, 2.0),
        ("A.0", "A.1", 2.0, 100.0),
        ("A.1", "B.0", 5.0, 20.0),
        ("B.0", "B.1", 2.0, 100.0),
        ("B.1", "C.1", 5.0, 20.0),
        ("C.1", "C.0", 2.0, 100.0),
    ] {
        g.add_edge(Edge { from: n(a), to: n(b), latency_ms: lat, residual_mbps: free, link: None });
    }
    for (demand, ceiling) in [(1.0, None), (8.0, None), (8.0, Some(15.0)), (50.0, None)] {
        match g.shortest_path(&n("A.0"), &n("C.0"), demand, ceiling) {
            Ok(p) => {
                let hops: Vec<String> = p.nodes.iter().map(|x| x.to_string()).collect();
                println!("{demand:>4} Mbps: {} ({} ms, bottleneck {} Mbps)", hops.join(" > "), p.total_latency_ms, p.bottleneck_residual_mbps);
            }
            Err(e @ (PathError::NoPath(_) | PathError::TooSlow { .. })) => println!("{demand:>4} Mbps: {e}"),
            Err(e) => println!("{demand:>4} Mbps: unexpected {e}"),
        }
    }
}
