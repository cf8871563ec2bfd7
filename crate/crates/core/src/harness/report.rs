//! Study reports: JSON for machines, CSV rows for the plotting side.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::numeric::{linear_fit, LinearFit};

/// Bumped whenever the report layout changes.
pub const SCHEMA_VERSION: u32 = 1;

/// SHA-256 of the canonical JSON form of `config`, hex encoded.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// One measurement of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    /// Probe time for time-resolved studies.
    pub probe_time: Option<f64>,
    pub measured: f64,
    /// Scale the measurement is compared against (e.g. `eps^2 |ln eps| / mu`).
    pub reference: f64,
    pub ratio: f64,
}

impl SweepRow {
    pub fn new(epsilon: f64, probe_time: Option<f64>, measured: f64, reference: f64) -> Self {
        Self { epsilon, probe_time, measured, reference, ratio: measured / reference }
    }
}

/// Log-log fit of one group of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFit {
    pub label: String,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

impl NamedFit {
    /// Fits `ln y` against `ln x`; `None` below three points or with
    /// nonpositive data.
    pub fn loglog(label: impl Into<String>, xs: &[f64], ys: &[f64]) -> Option<Self> {
        if xs.len() < 3 || xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
            return None;
        }
        let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
        let LinearFit { slope, intercept, r2 } = linear_fit(&lx, &ly)?;
        Some(Self { label: label.into(), slope, intercept, r2 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Criterion {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub kind: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    /// Sorted by epsilon, largest first.
    pub sweep: Vec<SweepRow>,
    pub fits: Vec<NamedFit>,
    pub criteria: Vec<Criterion>,
    /// Extra named numbers (fitted constants, diagnostics).
    pub diagnostics: BTreeMap<String, f64>,
    pub passed: bool,
}

impl ExperimentReport {
    pub fn new<C: Serialize>(kind: &str, config: &C) -> Result<Self> {
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            kind: kind.to_string(),
            config_hash: config_hash(config)?,
            config: serde_json::to_value(config)?,
            sweep: Vec::new(),
            fits: Vec::new(),
            criteria: Vec::new(),
            diagnostics: BTreeMap::new(),
            passed: true,
        })
    }

    pub fn push_rows(&mut self, rows: impl IntoIterator<Item = SweepRow>) {
        self.sweep.extend(rows);
        self.sweep.sort_by(|a, b| {
            b.epsilon
                .total_cmp(&a.epsilon)
                .then(a.probe_time.unwrap_or(0.0).total_cmp(&b.probe_time.unwrap_or(0.0)))
        });
    }

    pub fn criterion(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.passed &= passed;
        self.criteria.push(Criterion::new(name, passed, detail));
    }

    pub fn diagnostic(&mut self, name: impl Into<String>, value: f64) {
        self.diagnostics.insert(name.into(), value);
    }

    /// Rows matching a probe time (exactly, as stored).
    pub fn rows_at(&self, probe_time: Option<f64>) -> Vec<&SweepRow> {
        self.sweep.iter().filter(|r| r.probe_time == probe_time).collect()
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Sweep rows as CSV with a `# schema_version=` comment line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# schema_version={}", self.schema_version)?;
        writeln!(out, "# kind={}", self.kind)?;
        writeln!(out, "# config_hash={}", self.config_hash)?;
        for f in &self.fits {
            writeln!(out, "# fit {}: slope={} intercept={} r2={}", f.label, f.slope, f.intercept, f.r2)?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epsilon", "probe_time", "measured", "reference", "ratio"])?;
        for r in &self.sweep {
            w.write_record([
                r.epsilon.to_string(),
                r.probe_time.map(|t| t.to_string()).unwrap_or_default(),
                r.measured.to_string(),
                r.reference.to_string(),
                r.ratio.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Cfg {
        a: f64,
        b: Vec<u32>,
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let h1 = config_hash(&Cfg { a: 1.0, b: vec![1, 2] }).unwrap();
        let h2 = config_hash(&Cfg { a: 1.0, b: vec![1, 2] }).unwrap();
        let h3 = config_hash(&Cfg { a: 1.0 + 1e-15, b: vec![1, 2] }).unwrap();
        assert_eq!(h1, h2);
        assert_ne!(h1, h3);
        assert_eq!(h1.len(), 64);
    }

    #[test]
    fn rows_sorted_descending() {
        let mut r = ExperimentReport::new("test", &Cfg { a: 0.0, b: vec![] }).unwrap();
        r.push_rows([
            SweepRow::new(0.02, None, 1.0, 1.0),
            SweepRow::new(0.08, None, 1.0, 1.0),
            SweepRow::new(0.04, None, 1.0, 1.0),
        ]);
        let eps: Vec<f64> = r.sweep.iter().map(|s| s.epsilon).collect();
        assert_eq!(eps, vec![0.08, 0.04, 0.02]);
    }

    #[test]
    fn loglog_needs_three_points() {
        assert!(NamedFit::loglog("x", &[1.0, 2.0], &[1.0, 2.0]).is_none());
        let f = NamedFit::loglog("x", &[1.0, 2.0, 4.0], &[3.0, 6.0, 12.0]).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let mut r = ExperimentReport::new("thickness", &Cfg { a: 0.0, b: vec![] }).unwrap();
        r.push_rows([SweepRow::new(0.04, Some(0.1), 2.0, 1.0)]);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("# schema_version=1\n# kind=thickness\n"));
        assert!(s.contains("epsilon,probe_time,measured,reference,ratio\n0.04,0.1,2,1,2\n"));
    }
}
