use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceAction {
    Forward,
    Drop,
    Modify,
    Clone,
    Mark,
}

impl fmt::Display for TraceAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TraceAction::Forward => "forward",
            TraceAction::Drop => "drop",
            TraceAction::Modify => "modify",
            TraceAction::Clone => "clone",
            TraceAction::Mark => "mark",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub time: SimTime,
    pub node: u32,
    pub action: TraceAction,
    pub digest: u64,
    /// True when the action was taken by an attack program rather than normal forwarding.
    pub by_attacker: bool,
}

/// Append-only dataplane action log. Records arrive in emission order, which
/// is also (time, sequence) order because the event loop never goes back in time.
#[derive(Clone, Debug, Default)]
pub struct TraceLog {
    enabled: bool,
    records: Vec<TraceRecord>,
}

impl TraceLog {
    pub fn new(enabled: bool) -> Self {
        TraceLog {
            enabled,
            records: Vec::new(),
        }
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    pub fn record(&mut self, rec: TraceRecord) {
        if self.enabled {
            debug_assert!(self.records.last().is_none_or(|r| r.time <= rec.time));
            self.records.push(rec);
        }
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    /// One tab-separated line per record: time (ns), node, action, digest (hex).
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in &self.records {
            writeln!(
                w,
                "{}\t{}\t{}\t{:016x}",
                r.time.as_nanos(),
                r.node,
                r.action,
                r.digest
            )?;
        }
        Ok(())
    }
}
