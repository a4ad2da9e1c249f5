//! CSV energy tables and JSON reports.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a table
//! read back reproduces every value bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::diagnostics::EnergyRecord;
use crate::error::{Error, Result};

pub const ENERGY_COLUMNS: [&str; 9] = [
    "t",
    "u_l2_sq",
    "u_h1_sq",
    "u_h2_sq",
    "eta_mu1_sq",
    "eta_mu2_sq",
    "E1",
    "E2",
    "lyapunov",
];

pub fn energy_header(cutoffs: &[usize]) -> Vec<String> {
    ENERGY_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(cutoffs.iter().map(|m| format!("tail_E_m{m}")))
        .collect()
}

pub fn energy_csv(records: &[EnergyRecord]) -> String {
    let cutoffs: Vec<usize> = records
        .first()
        .map(|r| r.tails.iter().map(|(m, _)| *m).collect())
        .unwrap_or_default();
    let mut out = energy_header(&cutoffs).join(",");
    out.push('\n');
    for r in records {
        let fixed = [
            r.t,
            r.u_l2_sq,
            r.u_h1_sq,
            r.u_h2_sq,
            r.eta_mu1_sq,
            r.eta_mu2_sq,
            r.e1,
            r.e2,
            r.lyapunov,
        ];
        let row: Vec<String> = fixed
            .iter()
            .chain(r.tails.iter().map(|(_, v)| v))
            .map(|v| v.to_string())
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_energy_csv(path: &Path, records: &[EnergyRecord]) -> Result<()> {
    std::fs::write(path, energy_csv(records))?;
    Ok(())
}

/// A numeric table: header names and rows of equal width.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Csv(format!("no column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn parse_csv(text: &str) -> Result<Table> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Csv("empty file".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut table = Table::new(header);
    for (i, line) in lines.enumerate() {
        let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| Error::Csv(format!("row {}: {e}", i + 1)))?;
        if row.len() != table.header.len() {
            return Err(Error::Csv(format!(
                "row {} has {} fields, header has {}",
                i + 1,
                row.len(),
                table.header.len()
            )));
        }
        table.rows.push(row);
    }
    Ok(table)
}

pub fn read_csv(path: &Path) -> Result<Table> {
    parse_csv(&std::fs::read_to_string(path)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: f64) -> EnergyRecord {
        EnergyRecord {
            t,
            u_l2_sq: 0.1 + t,
            u_h1_sq: 1.0 / 3.0,
            u_h2_sq: 2.0,
            eta_mu1_sq: 1e-300,
            eta_mu2_sq: 0.0,
            e1: 0.7,
            e2: 1.25,
            lyapunov: -0.5,
            pairing_mu1: 0.0,
            tails: vec![(4, 0.125), (8, 3e-20)],
        }
    }

    #[test]
    fn header_names_tail_columns() {
        assert_eq!(
            energy_header(&[4, 16]).join(","),
            "t,u_l2_sq,u_h1_sq,u_h2_sq,eta_mu1_sq,eta_mu2_sq,E1,E2,lyapunov,tail_E_m4,tail_E_m16"
        );
    }

    #[test]
    fn values_round_trip_exactly() {
        let records = vec![record(0.0), record(0.1)];
        let table = parse_csv(&energy_csv(&records)).unwrap();
        assert_eq!(table.header.len(), 11);
        assert_eq!(table.column("u_h1_sq").unwrap(), vec![1.0 / 3.0; 2]);
        assert_eq!(table.column("eta_mu1_sq").unwrap()[0], 1e-300);
        assert_eq!(table.column("tail_E_m8").unwrap()[1], 3e-20);
        assert_eq!(table.column("u_l2_sq").unwrap()[1], 0.1 + 0.1);
    }

    #[test]
    fn malformed_rows_are_rejected() {
        assert!(matches!(parse_csv("a,b\n1,2\n3\n"), Err(Error::Csv(_))));
        assert!(matches!(parse_csv("a,b\n1,x\n"), Err(Error::Csv(_))));
        assert!(matches!(parse_csv(""), Err(Error::Csv(_))));
        assert!(matches!(parse_csv("a\n1\n").unwrap().column("b"), Err(Error::Csv(_))));
    }
}
