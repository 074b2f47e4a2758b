//! Metrics collected during a run and their delimited-text rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use crate::agents::Category;
use crate::model::{DomainId, FlowId, SimTime};
use crate::sim::{FlowTraffic, Topology, Trace};

pub const CONTROL_HEADER: &str = "second,bus,monitoring,reachability,connectivity,reservation,total";
pub const FLOW_HEADER: &str = "time_ms,latency_ms,delivered";
pub const SUMMARY_HEADER: &str = "flow,offered,delivered,loss_rate,status";

/// Received control bytes per second and category.
pub type Buckets = Vec<[u64; 5]>;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub duration_ms: SimTime,
    /// One series per direction of every domain pair joined by a peering link.
    pub control: BTreeMap<(DomainId, DomainId), Buckets>,
    pub flows: BTreeMap<FlowId, FlowTraffic>,
    pub status: BTreeMap<FlowId, String>,
}

fn category_index(c: Category) -> usize {
    Category::ALL.iter().position(|x| *x == c).expect("listed")
}

impl MetricsReport {
    pub fn new(topo: &Topology, duration_ms: SimTime) -> Self {
        let rows = duration_ms.div_ceil(1000) as usize;
        let control = topo.domain_pairs().into_iter().map(|p| (p, vec![[0; 5]; rows])).collect();
        MetricsReport { duration_ms, control, flows: BTreeMap::new(), status: BTreeMap::new() }
    }

    pub fn record_control(&mut self, from: &DomainId, to: &DomainId, at: SimTime, cat: Category, bytes: u64) {
        if let Some(series) = self.control.get_mut(&(from.clone(), to.clone())) {
            if let Some(row) = series.get_mut((at / 1000) as usize) {
                row[category_index(cat)] += bytes;
            }
        }
    }

    pub fn series(&self, from: &str, to: &str) -> Option<&Buckets> {
        let k = (DomainId::new(from).ok()?, DomainId::new(to).ok()?);
        self.control.get(&k)
    }

    /// Bytes of one category over seconds `[from_s, to_s)`.
    pub fn bytes_between(&self, from: &str, to: &str, cat: Category, from_s: usize, to_s: usize) -> u64 {
        self.series(from, to)
            .map(|s| s.iter().take(to_s).skip(from_s).map(|r| r[category_index(cat)]).sum())
            .unwrap_or(0)
    }
}

pub fn control_table(buckets: &Buckets) -> String {
    let mut out = String::from(CONTROL_HEADER);
    out.push('\n');
    for (sec, row) in buckets.iter().enumerate() {
        let total: u64 = row.iter().sum();
        let cells: Vec<String> = row.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "{sec},{},{total}", cells.join(","));
    }
    out
}

pub fn flow_table(flow: &FlowTraffic) -> String {
    let mut out = String::from(FLOW_HEADER);
    out.push('\n');
    for s in &flow.samples {
        match s.latency_ms {
            Some(l) => {
                let _ = writeln!(out, "{},{l:.3},1", s.at);
            }
            None => {
                let _ = writeln!(out, "{},,0", s.at);
            }
        }
    }
    out
}

pub fn summary_table(report: &MetricsReport) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for (id, f) in &report.flows {
        let status = report.status.get(id).map(String::as_str).unwrap_or("");
        let _ = writeln!(out, "{id},{},{},{:.6},\"{}\"", f.offered(), f.delivered(), f.loss_rate(), status.replace('"', "'"));
    }
    out
}

/// Writes every table (and the trace, when given) into `dir`; returns the files written.
pub fn emit_report(report: &MetricsReport, trace: Option<&Trace>, dir: &Path) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut write = |name: String, body: String| -> io::Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, body)?;
        files.push(p);
        Ok(())
    };
    for ((from, to), buckets) in &report.control {
        write(format!("control_{from}_{to}.csv"), control_table(buckets))?;
    }
    for (id, f) in &report.flows {
        write(format!("flow_{id}.csv"), flow_table(f))?;
    }
    write("flows.csv".into(), summary_table(report))?;
    if let Some(t) = trace {
        write("trace.log".into(), t.render())?;
    }
    Ok(files)
}
