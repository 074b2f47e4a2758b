use std::fmt::Write as _;

use crate::model::SimTime;

/// Append-only event log. One record per line: `time_ms kind subject detail`.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    lines: Vec<String>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, at: SimTime, kind: &str, subject: impl std::fmt::Display, detail: impl std::fmt::Display) {
        let mut line = String::new();
        let _ = write!(line, "{at} {kind} {subject} {detail}");
        self.lines.push(line.trim_end().to_string());
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// Records of one kind, parsed into (time, subject, detail).
    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = TraceRecord<'a>> + 'a {
        self.lines.iter().filter_map(|l| TraceRecord::parse(l)).filter(move |r| r.kind == kind)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord<'a> {
    pub at: SimTime,
    pub kind: &'a str,
    pub subject: &'a str,
    pub detail: &'a str,
}

impl<'a> TraceRecord<'a> {
    pub fn parse(line: &'a str) -> Option<Self> {
        let mut it = line.splitn(4, ' ');
        let at = it.next()?.parse().ok()?;
        let kind = it.next()?;
        let subject = it.next()?;
        let detail = it.next().unwrap_or("");
        Some(TraceRecord { at, kind, subject, detail })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_round_trip_through_the_line_format() {
        let mut t = Trace::new();
        t.record(33000, "NET", "cut", "B.1:2-C.1:2");
        t.record(40050, "BUS", "A", "monitoring.A.10s 311 A>C");
        let r: Vec<_> = t.of_kind("BUS").collect();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].at, 40050);
        assert_eq!(r[0].subject, "A");
        assert_eq!(r[0].detail, "monitoring.A.10s 311 A>C");
        assert_eq!(t.render().lines().count(), 2);
    }
}
