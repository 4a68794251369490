//! Observed panel data, CSV ingestion and half-vectorization helpers.
//!
//! A [`Panel`] always stores its values as an `N x T` matrix: row `i` is
//! series `i`, column `t` is time point `t`. The CSV readers accept either
//! orientation and transpose as needed.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orientation of a panel CSV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// One series per row, one time point per column.
    SeriesInRows,
    /// One time point per row, one series per column (the usual layout for
    /// price or volatility tables).
    #[default]
    SeriesInColumns,
}

/// An `N x T` panel of observations with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    values: DMatrix<f64>,
    series_labels: Vec<String>,
    time_labels: Vec<String>,
    demeaned: bool,
}

/// Panel metadata as exported to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelMeta {
    pub n: usize,
    pub t: usize,
    pub series_labels: Vec<String>,
    pub time_labels: Vec<String>,
    pub demeaned: bool,
}

impl Panel {
    pub fn new(
        values: DMatrix<f64>,
        series_labels: Vec<String>,
        time_labels: Vec<String>,
    ) -> Result<Self> {
        let (n, t) = values.shape();
        if n < 1 || t < 2 {
            return Err(Error::invalid(format!(
                "panel needs N >= 1 and T >= 2, got N={n}, T={t}"
            )));
        }
        if series_labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: series_labels.len(),
            });
        }
        if time_labels.len() != t {
            return Err(Error::DimensionMismatch {
                expected: t,
                actual: time_labels.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            // column-major storage
            let (i, j) = (pos % n, pos / n);
            return Err(Error::Ingestion {
                row: i + 1,
                column: j + 1,
                message: format!("non-finite value {}", values[(i, j)]),
            });
        }
        Ok(Self {
            values,
            series_labels,
            time_labels,
            demeaned: false,
        })
    }

    /// Panel with default labels `s1..sN` and `1..T`.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let (n, t) = values.shape();
        let series = (1..=n).map(|i| format!("s{i}")).collect();
        let times = (1..=t).map(|j| j.to_string()).collect();
        Self::new(values, series, times)
    }

    /// Subtract each series' sample mean.
    pub fn demean(mut self) -> Self {
        let t = self.t() as f64;
        for mut row in self.values.row_iter_mut() {
            let mean = row.sum() / t;
            row.add_scalar_mut(-mean);
        }
        self.demeaned = true;
        self
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn t(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn series_labels(&self) -> &[String] {
        &self.series_labels
    }

    pub fn time_labels(&self) -> &[String] {
        &self.time_labels
    }

    pub fn is_demeaned(&self) -> bool {
        self.demeaned
    }

    pub fn meta(&self) -> PanelMeta {
        PanelMeta {
            n: self.n(),
            t: self.t(),
            series_labels: self.series_labels.clone(),
            time_labels: self.time_labels.clone(),
            demeaned: self.demeaned,
        }
    }

    /// Sub-panel made of the given series over the time window `[start, start + len)`.
    pub fn subpanel(&self, series: &[usize], start: usize, len: usize) -> Result<Panel> {
        if start + len > self.t() {
            return Err(Error::invalid("time window exceeds panel length"));
        }
        if let Some(&bad) = series.iter().find(|&&i| i >= self.n()) {
            return Err(Error::invalid(format!("series index {bad} out of range")));
        }
        let values = DMatrix::from_fn(series.len(), len, |i, j| self.values[(series[i], start + j)]);
        Ok(Panel {
            values,
            series_labels: series.iter().map(|&i| self.series_labels[i].clone()).collect(),
            time_labels: self.time_labels[start..start + len].to_vec(),
            demeaned: false,
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W, layout: Layout) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        match layout {
            Layout::SeriesInRows => {
                w.write_record(
                    std::iter::once("series").chain(self.time_labels.iter().map(String::as_str)),
                )?;
                for (i, label) in self.series_labels.iter().enumerate() {
                    let mut rec = vec![label.clone()];
                    rec.extend(self.values.row(i).iter().map(|v| format_f64(*v)));
                    w.write_record(&rec)?;
                }
            }
            Layout::SeriesInColumns => {
                w.write_record(
                    std::iter::once("time").chain(self.series_labels.iter().map(String::as_str)),
                )?;
                for (j, label) in self.time_labels.iter().enumerate() {
                    let mut rec = vec![label.clone()];
                    rec.extend(self.values.column(j).iter().map(|v| format_f64(*v)));
                    w.write_record(&rec)?;
                }
            }
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path, layout: Layout) -> Result<()> {
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(file, layout)
    }
}

/// Shortest representation that parses back to the same `f64`.
pub(crate) fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Read a panel CSV from disk.
///
/// The file must have one header row and one label column; every other cell
/// must parse as a finite number.
pub fn load_panel(path: &Path, layout: Layout, demean: bool) -> Result<Panel> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_panel(file, layout, demean)
}

pub fn read_panel<R: Read>(reader: R, layout: Layout, demean: bool) -> Result<Panel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut records = rdr.records();
    let header = match records.next() {
        Some(rec) => rec?,
        None => return Err(Error::invalid("empty CSV file")),
    };
    let width = header.len();
    if width < 2 {
        return Err(Error::invalid("CSV needs a label column and at least one data column"));
    }
    let col_labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();

    let mut row_labels = Vec::new();
    let mut body: Vec<f64> = Vec::new();
    for (idx, rec) in records.enumerate() {
        let rec = rec?;
        // 1-based, header is row 1
        let row = idx + 2;
        if rec.len() != width {
            return Err(Error::Ingestion {
                row,
                column: rec.len().min(width) + 1,
                message: format!("ragged row: expected {width} fields, found {}", rec.len()),
            });
        }
        row_labels.push(rec[0].to_string());
        for (c, cell) in rec.iter().enumerate().skip(1) {
            let v: f64 = cell.parse().map_err(|_| Error::Ingestion {
                row,
                column: c + 1,
                message: format!("non-numeric cell {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Ingestion {
                    row,
                    column: c + 1,
                    message: format!("non-finite cell {cell:?}"),
                });
            }
            body.push(v);
        }
    }
    if row_labels.is_empty() {
        return Err(Error::invalid("CSV has a header but no data rows"));
    }

    let nrows = row_labels.len();
    let ncols = col_labels.len();
    let file_matrix = DMatrix::from_row_slice(nrows, ncols, &body);
    let panel = match layout {
        Layout::SeriesInRows => Panel::new(file_matrix, row_labels, col_labels)?,
        Layout::SeriesInColumns => Panel::new(file_matrix.transpose(), col_labels, row_labels)?,
    };
    Ok(if demean { panel.demean() } else { panel })
}

/// Half-vectorized symmetric matrix: the lower triangle stacked column by column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymHalfVec {
    dim: usize,
    entries: Vec<f64>,
}

/// Length of the half-vectorization of an `r x r` matrix.
pub const fn half_dim(r: usize) -> usize {
    r * (r + 1) / 2
}

impl SymHalfVec {
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if entries.len() != half_dim(dim) {
            return Err(Error::DimensionMismatch {
                expected: half_dim(dim),
                actual: entries.len(),
            });
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }
}

/// `(row, col)` pairs in half-vectorization order: `(0,0), (1,0), .., (r-1,0), (1,1), ..`.
pub fn vech_indices(r: usize) -> Vec<(usize, usize)> {
    (0..r).flat_map(|j| (j..r).map(move |i| (i, j))).collect()
}

const SYMMETRY_TOL: f64 = 1e-10;

pub fn vech(s: &DMatrix<f64>) -> Result<SymHalfVec> {
    let (r, c) = s.shape();
    if r != c {
        return Err(Error::DimensionMismatch { expected: r, actual: c });
    }
    let mut max_dev = 0.0f64;
    for j in 0..r {
        for i in (j + 1)..r {
            max_dev = max_dev.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if max_dev > SYMMETRY_TOL || max_dev.is_nan() {
        return Err(Error::Asymmetric { max_deviation: max_dev });
    }
    let entries = vech_indices(r).into_iter().map(|(i, j)| s[(i, j)]).collect();
    SymHalfVec::new(r, entries)
}

pub fn unvech(v: &SymHalfVec) -> DMatrix<f64> {
    let r = v.dim;
    let mut out = DMatrix::zeros(r, r);
    for (&(i, j), &x) in vech_indices(r).iter().zip(&v.entries) {
        out[(i, j)] = x;
        out[(j, i)] = x;
    }
    out
}

/// Write `vech(g g^T)` into `out` without materializing the outer product.
pub(crate) fn vech_outer_into(g: &[f64], out: &mut [f64]) {
    let r = g.len();
    debug_assert_eq!(out.len(), half_dim(r));
    let mut k = 0;
    for j in 0..r {
        for i in j..r {
            out[k] = g[i] * g[j];
            k += 1;
        }
    }
}
