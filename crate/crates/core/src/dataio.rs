//! Price series, returns and sliding-window datasets.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered, strictly positive prices on a uniform time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    prices: Vec<f64>,
    label: String,
    /// Per-row labels carried from the CSV date column, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dates: Option<Vec<String>>,
}

impl PriceSeries {
    pub fn new(prices: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if prices.len() < 2 {
            return Err(Error::SeriesTooShort {
                len: prices.len(),
                required: 1,
            });
        }
        if let Some(i) = prices.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::NonPositivePrice { row: i + 1 });
        }
        Ok(Self {
            prices,
            label: label.into(),
            dates: None,
        })
    }

    pub fn with_dates(mut self, dates: Vec<String>) -> Result<Self> {
        if dates.len() != self.prices.len() {
            return Err(Error::LengthMismatch {
                left: dates.len(),
                right: self.prices.len(),
            });
        }
        self.dates = Some(dates);
        Ok(self)
    }

    /// Rebuild prices from an initial price and a return series.
    pub fn from_returns(s0: f64, returns: &ReturnSeries, label: impl Into<String>) -> Result<Self> {
        let mut prices = Vec::with_capacity(returns.len() + 1);
        prices.push(s0);
        let mut s = s0;
        for r in returns.values() {
            s *= 1.0 + r;
            prices.push(s);
        }
        Self::new(prices, label)
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dates(&self) -> Option<&[String]> {
        self.dates.as_deref()
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn returns(&self) -> ReturnSeries {
        compute_returns(self)
    }

    /// Sub-series `[start, end)`; must keep at least two prices.
    pub fn slice(&self, start: usize, end: usize) -> Result<PriceSeries> {
        if end > self.prices.len() || start >= end {
            return Err(Error::SeriesTooShort {
                len: self.prices.len(),
                required: end,
            });
        }
        let mut out = PriceSeries::new(self.prices[start..end].to_vec(), self.label.clone())?;
        if let Some(d) = &self.dates {
            out.dates = Some(d[start..end].to_vec());
        }
        Ok(out)
    }
}

/// One-step price returns `(S[t+1] - S[t]) / S[t]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    returns: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(returns: Vec<f64>) -> Result<Self> {
        if let Some(i) = returns.iter().position(|r| !(r.is_finite() && *r > -1.0)) {
            return Err(Error::InvalidParameter(format!(
                "return at index {i} is {} (must be finite and > -1)",
                returns[i]
            )));
        }
        Ok(Self { returns })
    }

    pub fn values(&self) -> &[f64] {
        &self.returns
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }
}

pub fn compute_returns(series: &PriceSeries) -> ReturnSeries {
    let returns = series
        .prices
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0])
        .collect();
    ReturnSeries { returns }
}

/// Read a price column from a CSV file with a header row.
pub fn load_price_csv(path: impl AsRef<Path>, column: &str) -> Result<PriceSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_price_csv(file, column, label)
}

/// Parse CSV text from any reader. Lines starting with `#` are skipped. The
/// first column, when it is not the price column, is carried as row labels.
pub fn read_price_csv<R: Read>(reader: R, column: &str, label: impl Into<String>) -> Result<PriceSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::MissingColumn(column.to_string()))?;
    let date_col = if col == 0 { None } else { Some(0) };

    let mut prices = Vec::new();
    let mut dates = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::ParseError {
            row,
            message: e.to_string(),
        })?;
        let field = record.get(col).ok_or_else(|| Error::ParseError {
            row,
            message: format!("missing field {column}"),
        })?;
        let value: f64 = field.parse().map_err(|_| Error::ParseError {
            row,
            message: format!("`{field}` is not a number"),
        })?;
        if !value.is_finite() {
            return Err(Error::ParseError {
                row,
                message: format!("`{field}` is not finite"),
            });
        }
        if value <= 0.0 {
            return Err(Error::NonPositivePrice { row });
        }
        prices.push(value);
        if let Some(dc) = date_col {
            dates.push(record.get(dc).unwrap_or_default().to_string());
        }
    }
    let series = PriceSeries::new(prices, label)?;
    match date_col {
        Some(_) => series.with_dates(dates),
        None => Ok(series),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowMode {
    Price,
    Return,
}

/// An input slice and the element immediately after it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub input: Vec<f64>,
    pub target: f64,
    /// Index of `target` in the source series.
    pub target_index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowDataset {
    pub windows: Vec<Window>,
    pub length: usize,
    pub mode: WindowMode,
}

impl WindowDataset {
    pub fn from_prices(series: &PriceSeries, length: usize) -> Result<Self> {
        make_windows(series.prices(), length, WindowMode::Price)
    }

    pub fn from_returns(returns: &ReturnSeries, length: usize) -> Result<Self> {
        make_windows(returns.values(), length, WindowMode::Return)
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

/// All contiguous windows of `length` inputs followed by one target:
/// `values.len() - length` windows, in series order.
pub fn make_windows(values: &[f64], length: usize, mode: WindowMode) -> Result<WindowDataset> {
    if length == 0 {
        return Err(Error::InvalidParameter("window length must be at least 1".into()));
    }
    if values.len() <= length {
        return Err(Error::SeriesTooShort {
            len: values.len(),
            required: length,
        });
    }
    let windows = (length..values.len())
        .map(|t| Window {
            input: values[t - length..t].to_vec(),
            target: values[t],
            target_index: t,
        })
        .collect();
    Ok(WindowDataset {
        windows,
        length,
        mode,
    })
}
