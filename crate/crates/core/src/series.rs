//! Calendar-indexed monthly series, feature tables and CSV ingestion.
//!
//! Everything downstream works on gap-free monthly data: a series stores its
//! first month plus a dense value vector, so the month of index `i` is always
//! `start + i` and no per-row date bookkeeping is needed.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Minimum dataset size accepted by [`parse_dataset`]: two full seasonal cycles.
pub const MIN_DATASET_ROWS: usize = 24;

/// A calendar month, ordered lexicographically by `(year, month)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    /// 1-based month, always in `1..=12`.
    pub month: u8,
}

impl YearMonth {
    pub fn new(year: i32, month: u8) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::config(format!("month {month} out of 1..=12")));
        }
        Ok(YearMonth { year, month })
    }

    /// The month `n` steps ahead (or behind for negative `n`), wrapping years.
    pub fn plus_months(self, n: i64) -> Self {
        let zero_based = i64::from(self.year) * 12 + i64::from(self.month) - 1 + n;
        YearMonth {
            year: zero_based.div_euclid(12) as i32,
            month: (zero_based.rem_euclid(12) + 1) as u8,
        }
    }

    pub fn next(self) -> Self {
        self.plus_months(1)
    }

    pub fn prev(self) -> Self {
        self.plus_months(-1)
    }

    /// Signed number of months from `other` to `self`.
    pub fn months_since(self, other: YearMonth) -> i64 {
        (i64::from(self.year) * 12 + i64::from(self.month))
            - (i64::from(other.year) * 12 + i64::from(other.month))
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    /// Parses the `YYYY-MM` form used throughout the dataset files.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse {
            row: 0,
            column: "date".into(),
            content: s.into(),
        };
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u8 = m.parse().map_err(|_| bad())?;
        if !(1..=12).contains(&month) {
            return Err(bad());
        }
        Ok(YearMonth { year, month })
    }
}

/// A gap-free monthly series: value `i` belongs to month `start + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlySeries {
    start: YearMonth,
    values: Vec<f64>,
}

impl MonthlySeries {
    pub fn new(start: YearMonth, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config("series must not be empty"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                row: i,
                column: "value".into(),
                content: values[i].to_string(),
            });
        }
        Ok(MonthlySeries { start, values })
    }

    pub fn start(&self) -> YearMonth {
        self.start
    }

    /// Month of the last value.
    pub fn end(&self) -> YearMonth {
        self.start.plus_months(self.values.len() as i64 - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // nonempty by construction
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn month_at(&self, index: usize) -> YearMonth {
        self.start.plus_months(index as i64)
    }

    /// Value for a calendar month, if covered.
    pub fn get(&self, month: YearMonth) -> Option<f64> {
        let offset = month.months_since(self.start);
        if offset < 0 {
            return None;
        }
        self.values.get(offset as usize).copied()
    }

    /// Iterate `(month, value)` pairs in order.
    pub fn iter(&self) -> impl Iterator<Item = (YearMonth, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| (self.start.plus_months(i as i64), v))
    }

    /// Sub-series covering `from..=to` (both must lie inside the series).
    pub fn slice(&self, from: YearMonth, to: YearMonth) -> Result<MonthlySeries> {
        let (start, end) = (self.start, self.end());
        if from > to || from < start || to > end {
            return Err(Error::Range {
                from,
                to,
                start,
                end,
            });
        }
        let a = from.months_since(start) as usize;
        let b = to.months_since(start) as usize;
        Ok(MonthlySeries {
            start: from,
            values: self.values[a..=b].to_vec(),
        })
    }

    /// Same start and length as `other`.
    pub fn aligned_with(&self, other: &MonthlySeries) -> bool {
        self.start == other.start && self.values.len() == other.values.len()
    }
}

/// Month-aligned named feature columns (exogenous factors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    start: YearMonth,
    names: Vec<String>,
    /// Column-major storage; every column has `row_count` entries.
    columns: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn new(start: YearMonth, names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.is_empty() || names.len() != columns.len() {
            return Err(Error::config(
                "feature names and columns must match and be nonempty",
            ));
        }
        let rows = columns[0].len();
        if rows == 0 {
            return Err(Error::config("feature matrix must have at least one row"));
        }
        let mut seen = BTreeSet::new();
        for name in &names {
            if !seen.insert(name.clone()) {
                return Err(Error::config(format!("duplicate feature column {name:?}")));
            }
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != rows {
                return Err(Error::alignment(format!(
                    "column {name:?} has {} rows, expected {rows}",
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    row: i,
                    column: name.clone(),
                    content: col[i].to_string(),
                });
            }
        }
        Ok(FeatureMatrix {
            start,
            names,
            columns,
        })
    }

    pub fn start(&self) -> YearMonth {
        self.start
    }

    pub fn row_count(&self) -> usize {
        self.columns[0].len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(&self.columns[i])
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column_by_index(&self, index: usize) -> &[f64] {
        &self.columns[index]
    }

    /// Row index for a calendar month, if covered.
    pub fn row_for(&self, month: YearMonth) -> Option<usize> {
        let offset = month.months_since(self.start);
        if offset < 0 || offset as usize >= self.row_count() {
            return None;
        }
        Some(offset as usize)
    }

    /// New matrix restricted to the given columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<FeatureMatrix> {
        let mut columns = Vec::with_capacity(names.len());
        for name in names {
            let col = self
                .column(name)
                .ok_or_else(|| Error::MissingFeature { name: name.clone() })?;
            columns.push(col.to_vec());
        }
        FeatureMatrix::new(self.start, names.to_vec(), columns)
    }

    /// New matrix keeping rows `a..b` (half-open, by row index).
    pub fn slice_rows(&self, a: usize, b: usize) -> Result<FeatureMatrix> {
        if a >= b || b > self.row_count() {
            return Err(Error::config(format!(
                "row slice {a}..{b} outside 0..{}",
                self.row_count()
            )));
        }
        FeatureMatrix::new(
            self.start.plus_months(a as i64),
            self.names.clone(),
            self.columns.iter().map(|c| c[a..b].to_vec()).collect(),
        )
    }
}

/// Parses a dataset file: header `date,load,<feature...>`, one row per month.
///
/// Rows may arrive unordered; they are sorted by date before validation, so
/// the output series and matrix are ascending and gap-free. Fails on missing
/// or duplicated months, non-numeric cells and datasets shorter than
/// [`MIN_DATASET_ROWS`].
pub fn parse_dataset(csv_text: &str) -> Result<(MonthlySeries, FeatureMatrix)> {
    let mut lines = csv_text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::config("empty dataset"))?;
    let header: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    if header.len() < 3 || header[0] != "date" || header[1] != "load" {
        return Err(Error::config(
            "header must be `date,load,<feature...>` with at least one feature",
        ));
    }
    let feature_names: Vec<String> = header[2..].iter().map(|s| s.to_string()).collect();

    // (month, load, features) triples, sorted after parsing.
    let mut rows: Vec<(YearMonth, f64, Vec<f64>)> = Vec::new();
    for (line_no, line) in lines {
        let cells: Vec<&str> = line.trim().split(',').map(str::trim).collect();
        if cells.len() != header.len() {
            return Err(Error::Parse {
                row: line_no,
                column: "<row>".into(),
                content: format!("{} cells, expected {}", cells.len(), header.len()),
            });
        }
        let month: YearMonth = cells[0].parse().map_err(|_| Error::Parse {
            row: line_no,
            column: "date".into(),
            content: cells[0].into(),
        })?;
        let mut nums = Vec::with_capacity(cells.len() - 1);
        for (col, cell) in header[1..].iter().zip(&cells[1..]) {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: line_no,
                column: (*col).into(),
                content: (*cell).into(),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: line_no,
                    column: (*col).into(),
                    content: (*cell).into(),
                });
            }
            nums.push(v);
        }
        rows.push((month, nums[0], nums[1..].to_vec()));
    }

    if rows.len() < MIN_DATASET_ROWS {
        return Err(Error::InsufficientData {
            actual: rows.len(),
            required: MIN_DATASET_ROWS,
        });
    }

    rows.sort_by_key(|(m, _, _)| *m);
    for pair in rows.windows(2) {
        let (a, b) = (pair[0].0, pair[1].0);
        if a == b {
            return Err(Error::Duplicate { date: a });
        }
        if b.months_since(a) > 1 {
            return Err(Error::Gap { missing: a.next() });
        }
    }

    let start = rows[0].0;
    let load: Vec<f64> = rows.iter().map(|(_, l, _)| *l).collect();
    let mut columns = vec![Vec::with_capacity(rows.len()); feature_names.len()];
    for (_, _, feats) in &rows {
        for (col, v) in columns.iter_mut().zip(feats) {
            col.push(*v);
        }
    }

    let series = MonthlySeries::new(start, load)?;
    let features = FeatureMatrix::new(start, feature_names, columns)?;
    Ok((series, features))
}

/// Renders a series and its features back into the dataset CSV format.
pub fn dataset_to_csv(load: &MonthlySeries, features: &FeatureMatrix) -> Result<String> {
    if load.start() != features.start() || load.len() != features.row_count() {
        return Err(Error::alignment(format!(
            "load covers {}..={} ({} rows), features start {} ({} rows)",
            load.start(),
            load.end(),
            load.len(),
            features.start(),
            features.row_count()
        )));
    }
    let mut out = String::from("date,load");
    for name in features.names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, (month, value)) in load.iter().enumerate() {
        out.push_str(&format!("{month},{value}"));
        for c in 0..features.names().len() {
            out.push_str(&format!(",{}", features.column_by_index(c)[i]));
        }
        out.push('\n');
    }
    Ok(out)
}
