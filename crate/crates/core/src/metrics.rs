//! Per-run metrics and their CSV form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of benchmark output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub instance: String,
    pub n: usize,
    pub e: usize,
    pub agents: usize,
    pub verdict: String,
    pub iterations: usize,
    pub checks: u64,
    pub nccc: u64,
    pub messages: u64,
    pub wall_ms: f64,
}

pub const CSV_HEADER: &str = "instance,n,e,agents,verdict,iterations,checks,nccc,messages,wall_ms";

fn csv_error(e: csv::Error) -> Error {
    Error::Contract(format!("csv: {e}"))
}

/// Writes the header and one row per run, in order.
pub fn emit_csv<W: Write>(rows: &[RunMetrics], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(',')).map_err(csv_error)?;
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Contract(format!("csv: {e}")))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<RunMetrics>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Contract(format!("unexpected csv header `{}`", header.join(","))));
    }
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(instance: &str, n: usize) -> RunMetrics {
        RunMetrics {
            instance: instance.into(),
            n,
            e: 3,
            agents: 1,
            verdict: "consistent".into(),
            iterations: 2,
            checks: 10,
            nccc: 10,
            messages: 0,
            wall_ms: 0.25,
        }
    }

    #[test]
    fn empty_is_header_only() {
        let mut buf = Vec::new();
        emit_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn round_trip_with_quoting() {
        let rows = vec![row("plain", 4), row("has,comma \"and quote\"", 8)];
        let mut buf = Vec::new();
        emit_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"has,comma \"\"and quote\"\"\""));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
