//! Daily high-low range volatility.
//!
//! Input is a long-format CSV with header `date,series,high,low`. Every
//! series must be observed on every date (a balanced panel); dates and
//! series keep the order of their first appearance.

use std::collections::HashMap;
use std::io::Read;

use anyhow::{bail, Context, Result};
use mosum_core::Panel;
use nalgebra::DMatrix;

/// Scale of the range-based variance proxy, `sigma^2 = 0.361 (high - low)^2`.
pub const RANGE_SCALE: f64 = 0.361;

/// High and low prices per series, aligned on common dates.
#[derive(Debug, Clone, PartialEq)]
pub struct OhlcSeries {
    pub series: Vec<String>,
    pub dates: Vec<String>,
    /// `high[i][t]`, series `i` on date `t`.
    pub high: Vec<Vec<f64>>,
    pub low: Vec<Vec<f64>>,
}

impl OhlcSeries {
    pub fn validate(&self) -> Result<()> {
        for (i, name) in self.series.iter().enumerate() {
            for (t, date) in self.dates.iter().enumerate() {
                let (h, l) = (self.high[i][t], self.low[i][t]);
                if !(h.is_finite() && l.is_finite() && l > 0.0) {
                    bail!("series {name} on {date}: prices must be positive and finite (high={h}, low={l})");
                }
                if h < l {
                    bail!("series {name} on {date}: high {h} is below low {l}");
                }
            }
        }
        Ok(())
    }
}

pub fn read_ohlc<R: Read>(reader: R) -> Result<OhlcSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().context("reading the header row")?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .with_context(|| format!("missing column {name:?} (expected date,series,high,low)"))
    };
    let (c_date, c_series, c_high, c_low) = (col("date")?, col("series")?, col("high")?, col("low")?);

    let mut series: Vec<String> = Vec::new();
    let mut dates: Vec<String> = Vec::new();
    let mut s_idx: HashMap<String, usize> = HashMap::new();
    let mut d_idx: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(usize, usize), (f64, f64)> = HashMap::new();
    for (row, rec) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = rec.with_context(|| format!("row {line}"))?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let num = |c: usize, what: &str| -> Result<f64> {
            field(c)
                .parse::<f64>()
                .with_context(|| format!("row {line}: {what} {:?} is not a number", field(c)))
        };
        let (h, l) = (num(c_high, "high")?, num(c_low, "low")?);
        let s = *s_idx.entry(field(c_series).to_string()).or_insert_with(|| {
            series.push(field(c_series).to_string());
            series.len() - 1
        });
        let d = *d_idx.entry(field(c_date).to_string()).or_insert_with(|| {
            dates.push(field(c_date).to_string());
            dates.len() - 1
        });
        if cells.insert((s, d), (h, l)).is_some() {
            bail!("row {line}: duplicate entry for series {} on {}", series[s], dates[d]);
        }
    }
    if series.is_empty() {
        bail!("no observations");
    }
    let mut high = vec![vec![0.0; dates.len()]; series.len()];
    let mut low = high.clone();
    for (i, name) in series.iter().enumerate() {
        for (t, date) in dates.iter().enumerate() {
            let Some(&(h, l)) = cells.get(&(i, t)) else {
                bail!("unbalanced panel: series {name} has no observation on {date}");
            };
            high[i][t] = h;
            low[i][t] = l;
        }
    }
    Ok(OhlcSeries { series, dates, high, low })
}

/// `X_it = log(0.361 (high - low)^2)`, optionally demeaned per series.
pub fn log_range_volatility(ohlc: &OhlcSeries, demean: bool) -> Result<Panel> {
    ohlc.validate()?;
    let (n, t) = (ohlc.series.len(), ohlc.dates.len());
    let mut x = DMatrix::zeros(n, t);
    for i in 0..n {
        for s in 0..t {
            let range = ohlc.high[i][s] - ohlc.low[i][s];
            if range <= 0.0 {
                bail!(
                    "series {} on {}: high equals low, so the log range is undefined",
                    ohlc.series[i],
                    ohlc.dates[s]
                );
            }
            x[(i, s)] = (RANGE_SCALE * range * range).ln();
        }
    }
    let panel = Panel::new(x, ohlc.series.clone(), ohlc.dates.clone())?;
    Ok(if demean { panel.demean() } else { panel })
}
