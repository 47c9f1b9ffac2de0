//! Sensor logs, peripheries and the polled per-round observation stream.

mod periphery;
mod rates;
pub mod synthetic;

use std::collections::BTreeSet;
use std::io::{Read, Write};

use thiserror::Error;

pub use periphery::{poll_all, Kind, Manifest, Periphery, PollConfig, SensorLog, Tokens};
pub use rates::{rate_analysis, RateReport, RateRow};

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{source_name} line {line}: {message}")]
    Format { source_name: String, line: usize, message: String },
    #[error("{source_name} line {line}: timestamp {t} does not increase")]
    NotIncreasing { source_name: String, line: usize, t: u64 },
    #[error("sensor {ap}: unrecognized token `{value}`")]
    Token { ap: String, value: String },
    #[error("sensor {ap}: `{value}` is not a number")]
    NotNumeric { ap: String, value: String },
    #[error("invalid poll window: {0}")]
    PollConfig(String),
}

pub(crate) fn io_err(path: &std::path::Path, e: impl std::fmt::Display) -> TraceError {
    TraceError::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Per-round truth values of a set of propositions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ObservationTrace {
    names: Vec<String>,
    rows: Vec<Vec<bool>>,
}

impl ObservationTrace {
    pub fn new(names: Vec<String>) -> Self {
        ObservationTrace { names, rows: Vec::new() }
    }

    /// Builds a trace over `names` from letters (sets of true propositions).
    pub fn from_letters(names: Vec<String>, letters: &[BTreeSet<String>]) -> Self {
        let rows = letters.iter().map(|l| names.iter().map(|n| l.contains(n)).collect()).collect();
        ObservationTrace { names, rows }
    }

    pub fn push(&mut self, row: Vec<bool>) {
        assert_eq!(row.len(), self.names.len(), "row width");
        self.rows.push(row);
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn value(&self, round: usize, col: usize) -> bool {
        self.rows[round][col]
    }

    pub fn row(&self, round: usize) -> &[bool] {
        &self.rows[round]
    }

    pub fn letters(&self) -> Vec<BTreeSet<String>> {
        self.rows
            .iter()
            .map(|r| self.names.iter().zip(r).filter(|(_, v)| **v).map(|(n, _)| n.clone()).collect())
            .collect()
    }

    /// CSV with a header of proposition names and one 0/1 row per round.
    pub fn write_csv(&self, w: impl Write) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.names)?;
        for r in &self.rows {
            out.write_record(r.iter().map(|&v| if v { "1" } else { "0" }))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(r: impl Read, source_name: &str) -> Result<Self, TraceError> {
        let fmt = |line: usize, message: String| TraceError::Format { source_name: source_name.into(), line, message };
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r);
        let names: Vec<String> =
            rdr.headers().map_err(|e| fmt(1, e.to_string()))?.iter().map(str::to_string).collect();
        let mut trace = ObservationTrace::new(names);
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| fmt(i + 2, e.to_string()))?;
            let row = rec
                .iter()
                .map(|v| match v {
                    "1" | "true" | "TRUE" => Ok(true),
                    "0" | "false" | "FALSE" => Ok(false),
                    other => Err(fmt(i + 2, format!("expected 0 or 1, got `{other}`"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            trace.push(row);
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut t = ObservationTrace::new(vec!["a".into(), "b".into()]);
        t.push(vec![true, false]);
        t.push(vec![false, false]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "a,b\n1,0\n0,0\n");
        assert_eq!(ObservationTrace::read_csv(&buf[..], "mem").unwrap(), t);
        assert_eq!(t.letters()[0], BTreeSet::from(["a".to_string()]));
        assert!(ObservationTrace::read_csv(&b"a\n2\n"[..], "mem").is_err());
    }
}
