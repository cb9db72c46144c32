//! CSV and JSON emitters. Rows are written in a fixed order so that equal
//! inputs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use num_traits::ToPrimitive;
use serde::Serialize;
use sewcx_core::series::MultiSeries;
use sewcx_core::{C64, Q};

/// Coefficient column layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Columns {
    Rational,
    Numeric,
}

impl Columns {
    fn header(self) -> &'static str {
        match self {
            Columns::Rational => "numerator,denominator",
            Columns::Numeric => "re,im",
        }
    }

    fn cells(self, c: &Q) -> String {
        match self {
            Columns::Rational => format!("{},{}", c.numer(), c.denom()),
            Columns::Numeric => format!("{},0", c.to_f64().unwrap_or(f64::NAN)),
        }
    }
}

#[derive(Debug, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[String]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, &self.text).with_context(|| format!("writing {}", path.display()))
    }
}

/// One row per retained coefficient: exponents, then the coefficient.
/// `prefix` columns (e.g. the sewing weight) come first.
pub fn series_csv(prefix: &[&str], vars: &[String], cols: Columns) -> Csv {
    let mut header: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    header.extend(vars.iter().map(|v| format!("e_{v}")));
    header.push(cols.header().to_string());
    Csv::new(&header)
}

pub fn push_series(csv: &mut Csv, prefix: &[String], s: &MultiSeries, cols: Columns) {
    for (e, c) in s.terms() {
        let mut cells = prefix.to_vec();
        cells.extend(e.iter().map(i64::to_string));
        cells.push(cols.cells(c));
        csv.row(&cells);
    }
}

pub fn complex_cell(z: C64) -> String {
    format!("{},{}", z.re, z.im)
}

/// Exact rational as numerator/denominator strings.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct Exact {
    pub numerator: String,
    pub denominator: String,
}

impl From<&Q> for Exact {
    fn from(q: &Q) -> Self {
        Self { numerator: q.numer().to_string(), denominator: q.denom().to_string() }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `"a|b|c"` rendering of a list of partitions for CSV cells.
pub fn partitions_cell(parts: &[Vec<u32>]) -> String {
    let mut s = String::new();
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            s.push('|');
        }
        let inner: Vec<String> = p.iter().map(u32::to_string).collect();
        let _ = write!(s, "({})", inner.join(" "));
    }
    s
}
