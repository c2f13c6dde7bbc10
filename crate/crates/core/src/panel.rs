//! Panel ingestion: CSV loading, validation, demeaning and index rebasing.
//!
//! Files are long-layout CSV: a header row of series names, then one row per
//! time point. A first column named `date` (case-insensitive) is kept as time
//! labels instead of data.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Smallest series length accepted by [`TimeSeriesPanel::new`].
pub const MIN_LEN: usize = 4;

/// `M` series of common length `T`, stored as an `M x T` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    values: DMatrix<f64>,
    names: Vec<String>,
    labels: Option<Vec<String>>,
    means: Option<Vec<f64>>,
}

impl TimeSeriesPanel {
    pub fn new(
        values: DMatrix<f64>,
        names: Vec<String>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let (m, t) = values.shape();
        if m == 0 {
            return Err(Error::InvalidPanel("panel has no series".into()));
        }
        if t < MIN_LEN {
            return Err(Error::InvalidPanel(format!(
                "panel has {t} time points, need at least {MIN_LEN}"
            )));
        }
        if names.len() != m {
            return Err(Error::InvalidPanel(format!(
                "{} series names for {m} series",
                names.len()
            )));
        }
        let mut seen = HashSet::new();
        for (column, name) in names.iter().enumerate() {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateSeries {
                    name: name.clone(),
                    column: column + 1,
                });
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != t {
                return Err(Error::InvalidPanel(format!(
                    "{} time labels for {t} time points",
                    labels.len()
                )));
            }
        }
        for i in 0..m {
            for s in 0..t {
                if !values[(i, s)].is_finite() {
                    return Err(Error::InvalidPanel(format!(
                        "series {:?} has a non-finite value at time {}",
                        names[i],
                        s + 1
                    )));
                }
            }
        }
        Ok(Self {
            values,
            names,
            labels,
            means: None,
        })
    }

    /// Builds a panel from series-major rows, naming series `s1..sM`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t) {
            return Err(Error::InvalidPanel("series have different lengths".into()));
        }
        let values = DMatrix::from_fn(m, t, |i, s| rows[i][s]);
        let names = (1..=m).map(|i| format!("s{i}")).collect();
        Self::new(values, names, None)
    }

    /// Number of series `M`.
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Number of time points `T`.
    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Means removed by [`demean`], if any.
    pub fn means(&self) -> Option<&[f64]> {
        self.means.as_deref()
    }

    pub fn series(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// Replaces the values, keeping names, labels and stored means.
    pub fn with_values(&self, values: DMatrix<f64>) -> Result<Self> {
        if values.shape() != self.values.shape() {
            return Err(Error::InvalidPanel(format!(
                "shape {:?} does not match panel shape {:?}",
                values.shape(),
                self.values.shape()
            )));
        }
        let mut out = Self::new(values, self.names.clone(), self.labels.clone())?;
        out.means = self.means.clone();
        Ok(out)
    }

    /// Single-series panel holding series `i`.
    pub fn select(&self, i: usize) -> Result<Self> {
        if i >= self.dim() {
            return Err(Error::IndexOutOfRange {
                what: "series",
                index: i + 1,
                bound: self.dim(),
            });
        }
        let values = DMatrix::from_fn(1, self.len(), |_, s| self.values[(i, s)]);
        let mut out = Self::new(values, vec![self.names[i].clone()], self.labels.clone())?;
        out.means = self.means.as_ref().map(|m| vec![m[i]]);
        Ok(out)
    }

    /// Reorders series so that output series `j` is input series `order[j]`.
    pub fn permute(&self, order: &[usize]) -> Result<Self> {
        let m = self.dim();
        let mut seen = vec![false; m];
        if order.len() != m
            || order
                .iter()
                .any(|&i| i >= m || std::mem::replace(&mut seen[i], true))
        {
            return Err(Error::Parameter(format!(
                "{order:?} is not a permutation of {m} series"
            )));
        }
        let values = DMatrix::from_fn(m, self.len(), |j, s| self.values[(order[j], s)]);
        let names = order.iter().map(|&i| self.names[i].clone()).collect();
        let mut out = Self::new(values, names, self.labels.clone())?;
        out.means = self
            .means
            .as_ref()
            .map(|means| order.iter().map(|&i| means[i]).collect());
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Name of an optional first column holding time labels (case-insensitive).
    pub label_column: String,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            label_column: "date".to_string(),
        }
    }
}

pub fn load_panel(path: impl AsRef<Path>, options: &IngestOptions) -> Result<TimeSeriesPanel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_panel(std::io::BufReader::new(file), options)
}

/// Parses a panel from CSV text. Row numbers in errors are 1-based file lines
/// counting the header as row 1; column numbers are 1-based file columns.
pub fn read_panel<R: Read>(reader: R, options: &IngestOptions) -> Result<TimeSeriesPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Csv {
            row: 1,
            message: "missing header row".into(),
        });
    }
    let has_labels = headers[0].eq_ignore_ascii_case(&options.label_column);
    let offset = usize::from(has_labels);
    let names: Vec<String> = headers.iter().skip(offset).map(str::to_string).collect();
    if names.is_empty() {
        return Err(Error::Csv {
            row: 1,
            message: "no data columns".into(),
        });
    }
    let mut seen = HashSet::new();
    for (j, name) in names.iter().enumerate() {
        if name.is_empty() {
            return Err(Error::Csv {
                row: 1,
                message: format!("empty series name in column {}", j + offset + 1),
            });
        }
        if !seen.insert(name.as_str()) {
            return Err(Error::DuplicateSeries {
                name: name.clone(),
                column: j + offset + 1,
            });
        }
    }

    let width = headers.len();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut labels = Vec::new();
    for (index, record) in rdr.records().enumerate() {
        let fallback_row = index + 2;
        let record = record.map_err(|e| Error::Csv {
            row: e.position().map_or(fallback_row, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let row = record
            .position()
            .map_or(fallback_row, |p| p.line() as usize);
        if record.len() != width {
            return Err(Error::Csv {
                row,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        if has_labels {
            labels.push(record[0].to_string());
        }
        for (j, column) in columns.iter_mut().enumerate() {
            let cell = &record[j + offset];
            let value: f64 = cell.parse().map_err(|_| Error::Cell {
                row,
                column: j + offset + 1,
                name: names[j].clone(),
                message: format!("not a number: {cell:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::Cell {
                    row,
                    column: j + offset + 1,
                    name: names[j].clone(),
                    message: format!("non-finite value {cell:?}"),
                });
            }
            column.push(value);
        }
    }

    let t = columns[0].len();
    let values = DMatrix::from_fn(names.len(), t, |i, s| columns[i][s]);
    TimeSeriesPanel::new(values, names, has_labels.then_some(labels))
}

/// Formats a value with 17 significant digits, enough for a lossless round trip.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the canonical CSV form read back by [`read_panel`].
pub fn write_panel<W: Write>(panel: &TimeSeriesPanel, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let io_err = |e: csv::Error| Error::Csv {
        row: 0,
        message: format!("write failed: {e}"),
    };
    let mut header: Vec<&str> = Vec::with_capacity(panel.dim() + 1);
    if panel.labels.is_some() {
        header.push("date");
    }
    header.extend(panel.names.iter().map(String::as_str));
    wtr.write_record(&header).map_err(io_err)?;
    for s in 0..panel.len() {
        let mut record: Vec<String> = Vec::with_capacity(panel.dim() + 1);
        if let Some(labels) = &panel.labels {
            record.push(labels[s].clone());
        }
        record.extend((0..panel.dim()).map(|i| format_value(panel.values[(i, s)])));
        wtr.write_record(&record).map_err(io_err)?;
    }
    wtr.flush().map_err(|e| Error::Csv {
        row: 0,
        message: format!("write failed: {e}"),
    })?;
    Ok(())
}

/// Subtracts each series' sample mean. The removed means are added to any
/// means already stored on the panel.
pub fn demean(panel: &TimeSeriesPanel) -> TimeSeriesPanel {
    let (m, t) = panel.values.shape();
    let means: Vec<f64> = (0..m)
        .map(|i| panel.values.row(i).iter().sum::<f64>() / t as f64)
        .collect();
    let values = DMatrix::from_fn(m, t, |i, s| panel.values[(i, s)] - means[i]);
    let stored = match &panel.means {
        Some(prev) => prev.iter().zip(&means).map(|(a, b)| a + b).collect(),
        None => means,
    };
    TimeSeriesPanel {
        values,
        names: panel.names.clone(),
        labels: panel.labels.clone(),
        means: Some(stored),
    }
}

/// Scales every series so that its mean over `base` equals 100.
pub fn rebase_index(panel: &TimeSeriesPanel, base: Range<usize>) -> Result<TimeSeriesPanel> {
    let t = panel.len();
    if base.is_empty() || base.end > t {
        return Err(Error::Parameter(format!(
            "base range {}..{} must be non-empty and within 0..{t}",
            base.start, base.end
        )));
    }
    let m = panel.dim();
    let mut factors = Vec::with_capacity(m);
    for i in 0..m {
        let mean = base.clone().map(|s| panel.values[(i, s)]).sum::<f64>() / base.len() as f64;
        if mean == 0.0 {
            return Err(Error::ZeroBaseMean {
                series: panel.names[i].clone(),
            });
        }
        factors.push(100.0 / mean);
    }
    let values = DMatrix::from_fn(m, t, |i, s| panel.values[(i, s)] * factors[i]);
    Ok(TimeSeriesPanel {
        values,
        names: panel.names.clone(),
        labels: panel.labels.clone(),
        means: panel
            .means
            .as_ref()
            .map(|means| means.iter().zip(&factors).map(|(a, f)| a * f).collect()),
    })
}

/// Index range of the time points whose label starts with `prefix`.
pub fn label_range(panel: &TimeSeriesPanel, prefix: &str) -> Result<Range<usize>> {
    let labels = panel
        .labels()
        .ok_or_else(|| Error::Parameter("panel has no time labels".into()))?;
    let hits: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(_, l)| l.starts_with(prefix))
        .map(|(s, _)| s)
        .collect();
    match (hits.first(), hits.last()) {
        (Some(&a), Some(&b)) if b + 1 - a == hits.len() => Ok(a..b + 1),
        (Some(_), Some(_)) => Err(Error::Parameter(format!(
            "labels starting with {prefix:?} are not contiguous"
        ))),
        _ => Err(Error::Parameter(format!(
            "no time label starts with {prefix:?}"
        ))),
    }
}
