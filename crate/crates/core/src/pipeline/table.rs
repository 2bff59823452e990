//! Small helpers for the delimited files the pipeline reads and writes.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::format::{fmt_real, parse_real};

/// Rows buffered in memory and written in one go.
pub(crate) struct TableWriter {
    inner: csv::Writer<Vec<u8>>,
}

impl TableWriter {
    pub fn new(header: &[&str]) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(Vec::new());
        inner.write_record(header)?;
        Ok(Self { inner })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields)?;
        Ok(())
    }

    pub fn finish(self, path: &Path) -> Result<()> {
        let bytes = self
            .inner
            .into_inner()
            .map_err(|e| Error::Io(e.into_error()))?;
        std::fs::write(path, bytes)?;
        Ok(())
    }
}

/// A parsed file with named columns.
pub(crate) struct Table {
    name: String,
    columns: HashMap<String, usize>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.display().to_string()));
        }
        let mut rdr = csv::Reader::from_path(path)?;
        let columns = rdr
            .headers()?
            .iter()
            .enumerate()
            .map(|(i, h)| (h.to_string(), i))
            .collect();
        let rows = rdr.records().collect::<std::result::Result<_, _>>()?;
        Ok(Self {
            name: path.file_name().map_or_else(
                || path.display().to_string(),
                |n| n.to_string_lossy().into(),
            ),
            columns,
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> impl Iterator<Item = Row<'_>> {
        self.rows.iter().enumerate().map(move |(i, r)| Row {
            table: self,
            index: i,
            record: r,
        })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.columns.get(name).copied().ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("{}: missing column `{name}`", self.name),
        })
    }
}

pub(crate) struct Row<'a> {
    table: &'a Table,
    index: usize,
    record: &'a csv::StringRecord,
}

impl Row<'_> {
    pub fn error(&self, message: impl std::fmt::Display) -> Error {
        Error::Parse {
            line: self.index as u64 + 2,
            message: format!("{}: {message}", self.table.name),
        }
    }

    pub fn str(&self, column: &str) -> Result<&str> {
        let i = self.table.column(column)?;
        self.record
            .get(i)
            .ok_or_else(|| self.error(format!("missing field `{column}`")))
    }

    pub fn real(&self, column: &str) -> Result<f64> {
        let raw = self.str(column)?;
        parse_real(raw).ok_or_else(|| self.error(format!("`{raw}` in `{column}` is not a number")))
    }

    pub fn opt_real(&self, column: &str) -> Result<Option<f64>> {
        if self.str(column)?.is_empty() {
            Ok(None)
        } else {
            self.real(column).map(Some)
        }
    }

    pub fn parse<T: std::str::FromStr>(&self, column: &str) -> Result<T> {
        let raw = self.str(column)?;
        raw.parse()
            .map_err(|_| self.error(format!("unexpected value `{raw}` in `{column}`")))
    }
}

pub(crate) fn real(x: f64) -> String {
    fmt_real(x)
}

pub(crate) fn opt_real(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}
