use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One sample of a closed-loop run. Field names are the CSV header.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub ph_sp: f64,
    pub ph: f64,
    pub f1_cmd: f64,
    pub f2_cmd: f64,
    pub f1: f64,
    pub f2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
}

pub const CSV_HEADER: &str = "t,ph_sp,ph,f1_cmd,f2_cmd,f1,f2,alpha,beta,delta";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimTrace {
    pub rows: Vec<TraceRow>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Sample spacing, taken from the first two rows.
    pub fn dt(&self) -> Option<f64> {
        match self.rows.as_slice() {
            [a, b, ..] => Some(b.t - a.t),
            _ => None,
        }
    }

    /// End of the covered interval: one spacing past the last sample.
    pub fn t_end(&self) -> f64 {
        match self.rows.first() {
            None => 0.0,
            Some(first) => first.t + self.len() as f64 * self.dt().unwrap_or(0.0),
        }
    }

    /// Times strictly increasing with uniform spacing (to rounding).
    pub fn check_uniform(&self) -> Result<()> {
        let Some(dt) = self.dt() else { return Ok(()) };
        if !(dt > 0.0) {
            return Err(Error::Config(format!("trace spacing {dt} is not positive")));
        }
        let t0 = self.rows[0].t;
        for (k, r) in self.rows.iter().enumerate() {
            let expect = t0 + k as f64 * dt;
            if (r.t - expect).abs() > 1e-9 * expect.abs().max(1.0) {
                return Err(Error::Config(format!("trace row {k}: t = {} off the uniform grid", r.t)));
            }
        }
        Ok(())
    }

    pub fn write_csv_to(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        let csv_err = |e: csv::Error| Error::Csv { line: None, message: e.to_string() };
        wr.write_record(CSV_HEADER.split(',')).map_err(csv_err)?;
        for r in &self.rows {
            wr.serialize(r).map_err(csv_err)?;
        }
        wr.flush().map_err(|e| Error::Csv { line: None, message: e.to_string() })
    }

    pub fn read_csv_from(r: impl Read) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().from_reader(r);
        let header = rd.headers().map_err(|e| Error::Csv { line: Some(1), message: e.to_string() })?;
        if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
            return Err(Error::Csv { line: Some(1), message: format!("expected header `{CSV_HEADER}`") });
        }
        let rows = rd
            .deserialize()
            .map(|row| row.map_err(|e| Error::Csv { line: e.position().map(|p| p.line()), message: e.to_string() }))
            .collect::<Result<Vec<TraceRow>>>()?;
        Ok(Self { rows })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(std::io::BufWriter::new(f))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv_from(std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64) -> TraceRow {
        TraceRow {
            t,
            ph_sp: 7.0,
            ph: 7.0 + 0.1 * t.sin(),
            f1_cmd: 1.0 / 3.0,
            f2_cmd: 2.0e-17,
            f1: 0.016666666666666666,
            f2: 0.03333333333333333,
            alpha: 0.017333333333333333,
            beta: std::f64::consts::PI * 1e-3,
            delta: -12.345678901234567,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let tr = SimTrace { rows: (0..50).map(|k| row(k as f64 * 0.1)).collect() };
        let mut buf = Vec::new();
        tr.write_csv_to(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with(CSV_HEADER));
        assert_eq!(SimTrace::read_csv_from(buf.as_slice()).unwrap(), tr);
    }

    #[test]
    fn empty_trace_is_header_only() {
        let mut buf = Vec::new();
        SimTrace::default().write_csv_to(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap().trim_end(), CSV_HEADER);
        assert!(SimTrace::read_csv_from(buf.as_slice()).unwrap().is_empty());
    }

    #[test]
    fn malformed_row_names_its_line() {
        let text = format!("{CSV_HEADER}\n0,7,7,0,0,0,0,0,0,0\n0.1,7,seven,0,0,0,0,0,0,0\n");
        match SimTrace::read_csv_from(text.as_bytes()) {
            Err(Error::Csv { line: Some(3), .. }) => {}
            other => panic!("{other:?}"),
        }
        let short = format!("{CSV_HEADER}\n0,7,7\n");
        assert!(matches!(SimTrace::read_csv_from(short.as_bytes()), Err(Error::Csv { line: Some(2), .. })));
    }

    #[test]
    fn uniform_spacing_check() {
        let tr = SimTrace { rows: (0..100).map(|k| row(k as f64 * 0.1)).collect() };
        assert!(tr.check_uniform().is_ok());
        assert_eq!(tr.t_end(), 99.0 * 0.1 + 0.1);
        let mut bad = tr.clone();
        bad.rows[50].t += 0.03;
        assert!(bad.check_uniform().is_err());
    }
}
