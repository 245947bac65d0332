//! Result serialization.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::QueryResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            _ => Err(format!("unknown format {s:?}; expected json or csv")),
        }
    }
}

pub fn write_json(r: &QueryResult, out: impl Write) -> std::io::Result<()> {
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, r)?;
    out.write_all(b"\n")
}

/// Header line from the kind's columns, then one record per row.
pub fn write_csv(r: &QueryResult, out: impl Write) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(r.kind.columns())?;
    for row in &r.rows {
        w.write_record(row.fields().into_iter().map(|(_, v)| v))?;
    }
    w.flush()
}
