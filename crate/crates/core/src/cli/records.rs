use std::io::Write;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// One output record. Keys are emitted in sorted order.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub kind: String,
    pub mode: String,
    pub stderr: Option<f64>,
    pub body: Map<String, Value>,
}

impl Record {
    pub fn new<S: Serialize>(kind: &str, mode: &str, body: &S) -> Self {
        let body = match serde_json::to_value(body).expect("record body serializes") {
            Value::Object(m) => m,
            other => {
                let mut m = Map::new();
                m.insert("value".into(), other);
                m
            }
        };
        Self {
            kind: kind.to_string(),
            mode: mode.to_string(),
            stderr: None,
            body,
        }
    }

    pub fn with_stderr(mut self, se: f64) -> Self {
        self.stderr = Some(se);
        self
    }

    fn number(&self, keys: &[&str]) -> String {
        keys.iter()
            .find_map(|k| self.body.get(*k))
            .map(|v| match v {
                Value::Null => String::new(),
                Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .unwrap_or_default()
    }
}

/// Collects records and writes them in emission order.
pub struct Emitter {
    pub config_hash: String,
    pub seed: u64,
    pub records: Vec<Record>,
}

pub const CSV_COLUMNS: [&str; 9] = ["kind", "config_hash", "seed", "mode", "n", "eps", "value", "stderr", "detail"];

impl Emitter {
    pub fn new(config_hash: String, seed: u64) -> Self {
        Self {
            config_hash,
            seed,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, r: Record) {
        self.records.push(r);
    }

    fn full(&self, r: &Record) -> Map<String, Value> {
        let mut m = r.body.clone();
        m.insert("kind".into(), Value::String(r.kind.clone()));
        m.insert("config_hash".into(), Value::String(self.config_hash.clone()));
        m.insert("seed".into(), Value::from(self.seed));
        m.insert("mode".into(), Value::String(r.mode.clone()));
        m.insert("stderr".into(), r.stderr.map_or(Value::Null, Value::from));
        m
    }

    pub fn write<W: Write>(&self, format: Format, mut w: W) -> Result<()> {
        match format {
            Format::Json => {
                for r in &self.records {
                    serde_json::to_writer(&mut w, &self.full(r))?;
                    w.write_all(b"\n")?;
                }
                w.flush()?;
            }
            Format::Csv => {
                let mut wtr = csv::Writer::from_writer(w);
                wtr.write_record(CSV_COLUMNS)?;
                for r in &self.records {
                    let detail = serde_json::to_string(&r.body)?;
                    wtr.write_record([
                        r.kind.clone(),
                        self.config_hash.clone(),
                        self.seed.to_string(),
                        r.mode.clone(),
                        r.number(&["n"]),
                        r.number(&["eps"]),
                        r.number(&["value", "log_value", "bound", "partial_sum"]),
                        r.stderr.map_or(String::new(), |s| s.to_string()),
                        detail,
                    ])?;
                }
                wtr.flush()?;
            }
        }
        Ok(())
    }
}
