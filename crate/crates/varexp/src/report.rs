//! CSV tables and the `report.txt` summary.
//!
//! CSV files never carry timestamps so that reruns with the same
//! configuration and seed are byte-identical; provenance lives in
//! `report.txt`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};
use varexp_core::record::{EstimateRecord, Flag};

use crate::error::{CliError, Result};

pub const RECORD_COLUMNS: &[&str] = &[
    "record",
    "cube_lo",
    "cube_hi",
    "resolution",
    "lhs",
    "rhs_total",
    "empirical_constant",
    "flags",
    "rhs_components",
    "extras",
];

/// One CSV table held in memory until the run finishes.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    pub fn records(name: &str) -> Self {
        Table::new(name, RECORD_COLUMNS)
    }

    pub fn push_record(&mut self, rec: &EstimateRecord) {
        self.push(record_row(rec));
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| CliError::Invalid(e.to_string()))
    }
}

pub fn num(v: f64) -> String {
    format!("{v}")
}

fn join_nums(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" ")
}

fn flag_name(f: Flag) -> &'static str {
    match f {
        Flag::Clipped => "clipped",
        Flag::Truncated => "truncated",
        Flag::DecayTermDropped => "decay_term_dropped",
        Flag::SubgridMismatch => "subgrid_mismatch",
    }
}

fn named(pairs: &[(&str, f64)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={}", num(*v))).collect::<Vec<_>>().join(";")
}

pub fn record_row(rec: &EstimateRecord) -> Vec<String> {
    let dim = rec.cube.dim();
    vec![
        rec.name.to_string(),
        join_nums(&rec.cube.lo()[..dim]),
        join_nums(&rec.cube.hi()[..dim]),
        rec.resolution.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" "),
        num(rec.lhs),
        num(rec.rhs_sum()),
        num(rec.empirical_constant),
        rec.flags.iter().map(|f| flag_name(*f)).collect::<Vec<_>>().join(";"),
        named(&rec.rhs_components),
        named(&rec.extras),
    ]
}

/// Everything a pipeline produces besides field and image files.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub summary: Vec<(String, String)>,
    /// Field and image files written directly by the pipeline.
    pub files: Vec<PathBuf>,
    pub converged: bool,
}

impl Outcome {
    pub fn new() -> Self {
        Outcome {
            converged: true,
            ..Default::default()
        }
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }
}

pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub struct Provenance<'a> {
    pub command: &'a str,
    pub config_text: &'a str,
    pub seed: u64,
    pub threads: usize,
    pub started: u64,
}

/// Write every table as `<name>.csv` and the summary as `report.txt`.
pub fn write_outputs(dir: &Path, outcome: &Outcome, prov: &Provenance) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for t in &outcome.tables {
        let path = dir.join(format!("{}.csv", t.name));
        std::fs::write(&path, t.to_csv()?).map_err(|e| CliError::io(&path, e))?;
    }
    let path = dir.join("report.txt");
    std::fs::write(&path, render_report(outcome, prov)).map_err(|e| CliError::io(&path, e))
}

pub fn render_report(outcome: &Outcome, prov: &Provenance) -> String {
    let mut s = String::new();
    writeln!(s, "[run]").unwrap();
    writeln!(s, "command = {}", prov.command).unwrap();
    writeln!(s, "config_sha256 = {}", config_hash(prov.config_text)).unwrap();
    writeln!(s, "varexp_version = {}", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(s, "seed = {}", prov.seed).unwrap();
    writeln!(s, "threads = {}", prov.threads).unwrap();
    writeln!(s, "started_unix = {}", prov.started).unwrap();
    writeln!(s, "finished_unix = {}", unix_now()).unwrap();
    writeln!(s, "converged = {}", outcome.converged).unwrap();
    writeln!(s, "\n[summary]").unwrap();
    for (k, v) in &outcome.summary {
        writeln!(s, "{k} = {v}").unwrap();
    }
    writeln!(s, "\n[tables]").unwrap();
    for t in &outcome.tables {
        writeln!(s, "{}.csv = {} rows; columns: {}", t.name, t.rows.len(), t.columns.join(",")).unwrap();
    }
    if !outcome.files.is_empty() {
        writeln!(s, "\n[files]").unwrap();
        for f in &outcome.files {
            writeln!(s, "{}", f.display()).unwrap();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use varexp_core::{Grid, Region};

    #[test]
    fn record_rows_are_flat() {
        let g = Grid::new(2, &[0.0, 0.0], &[1.0, 1.0], &[4, 4]).unwrap();
        let cube = Region::cube(&[0.5, 0.5], 0.5).unwrap();
        let mut rec = EstimateRecord::new("demo", 2.0, vec![("a", 1.0), ("b", 3.0)], cube, &g);
        rec.flag(Flag::Clipped);
        let row = record_row(&rec);
        assert_eq!(row.len(), RECORD_COLUMNS.len());
        assert_eq!(row[1], "0.25 0.25");
        assert_eq!(row[3], "4 4");
        assert_eq!(row[6], "0.5");
        assert_eq!(row[7], "clipped");
        assert_eq!(row[8], "a=1;b=3");
    }

    #[test]
    fn csv_quotes_nothing_it_does_not_need_to() {
        let mut t = Table::new("t", &["x", "y"]);
        t.push(vec!["1".into(), "a;b".into()]);
        assert_eq!(String::from_utf8(t.to_csv().unwrap()).unwrap(), "x,y\n1,a;b\n");
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(
            config_hash(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
