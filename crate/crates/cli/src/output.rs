//! CSV artifacts: `#` header lines echoing the configuration and build, one
//! line of column names, then data rows with 17 significant digits.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;

/// Version and `git describe` of this build.
pub fn build_id() -> String {
    format!("{} {} ({})", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"), env!("CARBON_FBSDE_BUILD"))
}

/// A table of floats destined for one CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.to_owned(), columns: columns.iter().map(|c| (*c).to_owned()).collect(), rows: Vec::new() }
    }

    pub fn with_columns(name: &str, columns: Vec<String>) -> Self {
        Self { name: name.to_owned(), columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }
}

#[inline]
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Header lines, column names and rows.
pub fn render(table: &Table, cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!("# {}\n", build_id()));
    out.push_str(&format!("# table: {}\n", table.name));
    for (k, v) in cfg.pairs() {
        out.push_str(&format!("# {k} = {v}\n"));
    }
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|&x| format_float(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Writes `table` into `dir`, creating the directory if needed.
pub fn write_table(dir: &Path, table: &Table, cfg: &ExperimentConfig) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(table.file_name());
    let mut w = BufWriter::new(fs::File::create(&path)?);
    w.write_all(render(table, cfg).as_bytes())?;
    w.flush()?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Experiment;

    #[test]
    fn floats_keep_seventeen_digits() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 123456.789] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17, "{s}");
        }
    }

    #[test]
    fn header_parses_back_into_the_config() {
        let mut cfg = ExperimentConfig::new(Experiment::ToyInvariants);
        cfg.seed = 9;
        cfg.toy_dx = 0.004;
        let mut t = Table::new("x", &["a", "b"]);
        t.push(vec![1.0, 2.0]);
        let text = render(&t, &cfg);
        assert_eq!(ExperimentConfig::from_header(&text).unwrap(), cfg);
        assert!(text.lines().any(|l| l == "a,b"));
    }
}
