//! CSV tables with a fixed number format.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), so a value read
//! back parses to the same `f64`. Non-finite values are `inf`, `-inf`, `nan`;
//! missing values are empty fields.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Render a float for a CSV field.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:.16e}")
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Points as `x1 x2 …; y1 y2 …` inside one field.
pub fn points(coords: &[f64], dim: usize) -> String {
    coords
        .chunks_exact(dim)
        .map(|p| p.iter().map(|v| num(*v)).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|h| h.as_ref().to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    /// # Panics
    ///
    /// If the row width differs from the header.
    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(
            row.len(),
            self.header.len(),
            "row width must match header {:?}",
            self.header
        );
        self.rows.push(row);
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        }
        fs::write(path, self.to_csv_bytes()?)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, std::f64::consts::PI] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::NEG_INFINITY), "-inf");
        assert_eq!(num(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn table_bytes() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![num(0.5), "x, y".into()]);
        let s = String::from_utf8(t.to_csv_bytes().unwrap()).unwrap();
        assert_eq!(s, "a,b\n5.0000000000000000e-1,\"x, y\"\n");
    }

    #[test]
    #[should_panic]
    fn ragged_rows_are_rejected() {
        Table::new(&["a"]).push(vec![]);
    }
}
