//! Per-decision run traces and their JSONL form.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One decision, as written to a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub stage: usize,
    pub i: usize,
    pub t: usize,
    pub context: Vec<f64>,
    pub arm_features: Vec<Vec<f64>>,
    #[serde(rename = "A_bar")]
    pub a_bar: usize,
    #[serde(rename = "A")]
    pub action: usize,
    pub pi0: f64,
    pub reward: f64,
    pub pseudo_reward: Option<f64>,
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub policy: String,
    pub records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn new(policy: impl Into<String>) -> Self {
        Self {
            policy: policy.into(),
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_jsonl(&self, w: impl Write) -> Result<()> {
        write_jsonl(&self.records, w)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = BufWriter::new(f);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// Writes one JSON object per line.
pub fn write_jsonl<T: Serialize>(items: &[T], mut w: impl Write) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads one JSON object per non-blank line; errors carry the line number.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(r: impl BufRead) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?);
    }
    Ok(out)
}

pub fn load_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    read_jsonl(BufReader::new(std::fs::File::open(path)?))
}
