use std::io::Write;

use serde::{Deserialize, Serialize};

/// One clustering decision. Serialized as one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Quarantine {
        image: usize,
        reason: String,
    },
    Seed {
        iteration: usize,
        group: usize,
        images: [usize; 2],
        correlation: f64,
    },
    Merge {
        iteration: usize,
        group: usize,
        absorbed: usize,
        correlation: f64,
        size: usize,
    },
    Assign {
        iteration: usize,
        image: usize,
        group: usize,
        correlation: f64,
        size: usize,
    },
    Reject {
        iteration: usize,
        image: usize,
        best_correlation: Option<f64>,
    },
    Filter {
        group: usize,
        size: usize,
        kept: bool,
    },
}

pub fn write_trace_jsonl<W: Write>(events: &[TraceEvent], mut out: W) -> std::io::Result<()> {
    for event in events {
        serde_json::to_writer(&mut out, event)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
