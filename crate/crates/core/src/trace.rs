//! Per-iteration records of a hybrid run.

use std::io;

use serde::{Deserialize, Serialize};

/// One outer iteration. Fields a given algorithm does not track stay `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub best_energy: Option<f64>,
    pub incumbent_energy: Option<f64>,
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    pub lambda: Option<f64>,
    pub objective: Option<f64>,
    pub cuts_added: Option<usize>,
    pub qubo_vars: Option<usize>,
    pub classical_s: f64,
    pub backend_s: f64,
    pub note: String,
}

impl TraceRow {
    pub fn new(iteration: usize) -> Self {
        TraceRow {
            iteration,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HybridTrace {
    pub rows: Vec<TraceRow>,
}

impl HybridTrace {
    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn classical_seconds(&self) -> f64 {
        self.rows.iter().map(|r| r.classical_s).sum()
    }

    pub fn backend_seconds(&self) -> f64 {
        self.rows.iter().map(|r| r.backend_s).sum()
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            w.write_record(Self::header())?;
        }
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn header() -> [&'static str; 12] {
        [
            "iteration",
            "best_energy",
            "incumbent_energy",
            "lower_bound",
            "upper_bound",
            "lambda",
            "objective",
            "cuts_added",
            "qubo_vars",
            "classical_s",
            "backend_s",
            "note",
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_blank_optionals() {
        let mut t = HybridTrace::default();
        let mut row = TraceRow::new(1);
        row.best_energy = Some(-2.5);
        row.note = "initial".into();
        t.push(row);
        let text = t.to_csv_string();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), HybridTrace::header().join(","));
        assert_eq!(lines.next().unwrap(), "1,-2.5,,,,,,,,0.0,0.0,initial");
    }

    #[test]
    fn empty_trace_still_writes_header() {
        let text = HybridTrace::default().to_csv_string();
        assert_eq!(text.trim_end(), HybridTrace::header().join(","));
    }
}
