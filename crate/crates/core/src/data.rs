//! Panel ingestion, stationarity transforms, standardization and direct
//! h-step alignment.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lstsq_min_norm, sample_sd, Mat, Vector};

pub const MIN_SERIES: usize = 2;
pub const MIN_PERIODS: usize = 20;

/// Per-series stationarity transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransformCode {
    Level,
    Diff,
    LogDiff,
    Hamilton { h_lag: usize, p_lags: usize },
}

impl TransformCode {
    /// Maps a FRED-style numeric code. Only codes 1, 2 and 5 have an
    /// equivalent here.
    pub fn from_fred(code: u32) -> Result<Self> {
        match code {
            1 => Ok(TransformCode::Level),
            2 => Ok(TransformCode::Diff),
            5 => Ok(TransformCode::LogDiff),
            other => Err(Error::Data(format!("unsupported transform code {other} (supported: 1, 2, 5)"))),
        }
    }

    pub fn fred_code(&self) -> Option<u32> {
        match self {
            TransformCode::Level => Some(1),
            TransformCode::Diff => Some(2),
            TransformCode::LogDiff => Some(5),
            TransformCode::Hamilton { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let TransformCode::Hamilton { h_lag, p_lags } = self {
            if *h_lag == 0 || *p_lags == 0 {
                return Err(Error::Config("Hamilton filter needs h_lag >= 1 and p_lags >= 1".into()));
            }
        }
        Ok(())
    }

    /// Leading observations lost by the transform.
    pub fn lost_rows(&self) -> usize {
        match self {
            TransformCode::Level => 0,
            TransformCode::Diff | TransformCode::LogDiff => 1,
            TransformCode::Hamilton { h_lag, p_lags } => h_lag + p_lags - 1,
        }
    }

    /// Applies the transform to a full-length series. Lost or undefined
    /// observations come back as NaN so the output keeps the input length.
    pub fn apply(&self, series: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        let n = series.len();
        let out = match *self {
            TransformCode::Level => series.to_vec(),
            TransformCode::Diff => (0..n).map(|t| if t == 0 { f64::NAN } else { series[t] - series[t - 1] }).collect(),
            TransformCode::LogDiff => {
                let log = |v: f64| if v > 0.0 { v.ln() } else { f64::NAN };
                (0..n).map(|t| if t == 0 { f64::NAN } else { log(series[t]) - log(series[t - 1]) }).collect()
            }
            TransformCode::Hamilton { h_lag, p_lags } => hamilton_with_gaps(series, h_lag, p_lags),
        };
        Ok(out)
    }
}

/// How a whole panel is made stationary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformMode {
    /// Use the data as given.
    #[default]
    None,
    /// Use the per-series code row of the file.
    Codes,
    /// Hamilton regression filter on every series.
    Hamilton,
}

/// Inclusive range of calendar years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRange {
    pub start_year: i32,
    pub end_year: i32,
}

impl SampleRange {
    pub const PRESETS: [(&'static str, SampleRange); 4] = [
        ("1965-2007", SampleRange { start_year: 1965, end_year: 2007 }),
        ("1965-2019", SampleRange { start_year: 1965, end_year: 2019 }),
        ("1965-2023", SampleRange { start_year: 1965, end_year: 2023 }),
        ("1984-2007", SampleRange { start_year: 1984, end_year: 2007 }),
    ];

    /// Parses `"YYYY-YYYY"`; the four presets are just instances of this form.
    pub fn parse(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| Error::Config(format!("sample range '{s}' is not of the form YYYY-YYYY")))?;
        let parse = |v: &str| v.trim().parse::<i32>().map_err(|_| Error::Config(format!("bad year in sample range '{s}'")));
        let range = SampleRange { start_year: parse(a)?, end_year: parse(b)? };
        if range.start_year > range.end_year {
            return Err(Error::Config(format!("sample range '{s}' is reversed")));
        }
        Ok(range)
    }

    pub fn contains(&self, period: &Period) -> bool {
        (self.start_year..=self.end_year).contains(&period.year)
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.start_year, self.end_year)
    }
}

/// A period label together with its sort key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    pub label: String,
    pub year: i32,
    pub month: u32,
}

impl Period {
    /// Accepts `YYYY-MM-DD`, `YYYY-MM`, `M/D/YYYY`, `YYYYQn`, `YYYY:Qn` and
    /// bare years. Any other label is rejected.
    pub fn parse(label: &str) -> Option<Period> {
        let s = label.trim();
        let num = |v: &str| v.trim().parse::<i64>().ok();
        let (year, month) = if let Some((y, q)) = s.split_once(['Q', 'q']) {
            let y = y.trim_end_matches([':', '-', ' ']);
            let q = num(q)?;
            if !(1..=4).contains(&q) {
                return None;
            }
            (num(y)?, 3 * q - 2)
        } else if s.contains('/') {
            let parts: Vec<&str> = s.split('/').collect();
            if parts.len() != 3 {
                return None;
            }
            (num(parts[2])?, num(parts[0])?)
        } else if s.contains('-') {
            let parts: Vec<&str> = s.split('-').collect();
            if parts.len() < 2 || parts.len() > 3 {
                return None;
            }
            (num(parts[0])?, num(parts[1])?)
        } else {
            (num(s)?, 1)
        };
        if !(1..=12).contains(&month) || !(0..=9999).contains(&year) {
            return None;
        }
        Some(Period { label: s.to_string(), year: year as i32, month: month as u32 })
    }

    fn key(&self) -> (i32, u32) {
        (self.year, self.month)
    }
}

/// A balanced panel of predictors with a designated target column.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    time_index: Vec<Period>,
    x: Mat,
    series_names: Vec<String>,
    y_name: String,
}

impl Panel {
    pub fn new(time_index: Vec<Period>, x: Mat, series_names: Vec<String>, y_name: impl Into<String>) -> Result<Self> {
        let y_name = y_name.into();
        let (t, n) = x.shape();
        if time_index.len() != t {
            return Err(Error::DimensionMismatch { context: "panel time index", expected: t, got: time_index.len() });
        }
        if series_names.len() != n {
            return Err(Error::DimensionMismatch { context: "panel series names", expected: n, got: series_names.len() });
        }
        if n < MIN_SERIES {
            return Err(Error::Data(format!("panel has {n} series, need at least {MIN_SERIES}")));
        }
        if t < MIN_PERIODS {
            return Err(Error::Data(format!("panel has {t} periods, need at least {MIN_PERIODS}")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("panel contains missing or non-finite values".into()));
        }
        for w in time_index.windows(2) {
            if w[1].key() <= w[0].key() {
                return Err(Error::Data(format!("time index not increasing at '{}'", w[1].label)));
            }
        }
        if !series_names.contains(&y_name) {
            return Err(Error::Data(format!("target series '{y_name}' not in panel")));
        }
        Ok(Panel { time_index, x, series_names, y_name })
    }

    pub fn time_index(&self) -> &[Period] {
        &self.time_index
    }

    pub fn x(&self) -> &Mat {
        &self.x
    }

    pub fn series_names(&self) -> &[String] {
        &self.series_names
    }

    pub fn y_name(&self) -> &str {
        &self.y_name
    }

    pub fn num_periods(&self) -> usize {
        self.x.nrows()
    }

    pub fn num_series(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.series_names.iter().position(|s| s == name)
    }

    pub fn column(&self, name: &str) -> Result<Vector> {
        let j = self.column_index(name).ok_or_else(|| Error::Data(format!("series '{name}' not in panel")))?;
        Ok(self.x.column(j).into_owned())
    }

    pub fn y(&self) -> Vector {
        self.column(&self.y_name).expect("target presence is a panel invariant")
    }

    /// Same panel with a different designated target.
    pub fn with_target(&self, name: &str) -> Result<Panel> {
        if self.column_index(name).is_none() {
            return Err(Error::Data(format!("target series '{name}' not in panel")));
        }
        Ok(Panel { y_name: name.to_string(), ..self.clone() })
    }

    /// Predictor block, optionally without the target column.
    pub fn predictors(&self, exclude_target: bool) -> (Mat, Vec<String>) {
        if !exclude_target {
            return (self.x.clone(), self.series_names.clone());
        }
        let keep: Vec<usize> = (0..self.num_series()).filter(|&j| self.series_names[j] != self.y_name).collect();
        let x = self.x.select_columns(&keep);
        (x, keep.iter().map(|&j| self.series_names[j].clone()).collect())
    }

    /// Named-column subset as theory-guided proxy candidates.
    pub fn columns(&self, names: &[String]) -> Result<Mat> {
        let idx = names
            .iter()
            .map(|n| self.column_index(n).ok_or_else(|| Error::Data(format!("proxy series '{n}' not in panel"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.x.select_columns(&idx))
    }
}

/// Options controlling [`load_csv`].
#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    pub target: String,
    pub sample: Option<SampleRange>,
    pub transforms: TransformMode,
    pub hamilton_h: usize,
    pub hamilton_p: usize,
}

impl LoadOptions {
    pub fn new(target: impl Into<String>) -> Self {
        LoadOptions { target: target.into(), sample: None, transforms: TransformMode::None, hamilton_h: 8, hamilton_p: 4 }
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "NaN" | "nan" | "." | "#N/A")
}

/// Raw parsed file: full history, possibly with missing values.
#[derive(Debug, Clone)]
pub struct RawPanel {
    pub periods: Vec<Period>,
    pub names: Vec<String>,
    pub codes: Option<Vec<u32>>,
    /// One column per series, NaN where missing.
    pub columns: Vec<Vec<f64>>,
}

/// Reads a CSV with a header row of series names and the period label in the
/// first column. A second row whose first cell starts with `transform` holds
/// numeric transform codes.
pub fn read_raw_csv(path: &Path) -> Result<RawPanel> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_path(path)?;
    let mut records = reader.records();
    let header = records.next().ok_or_else(|| Error::Data(format!("{}: empty file", path.display())))??;
    let names: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    if names.is_empty() {
        return Err(Error::Data("header row has no series".into()));
    }
    let width = names.len() + 1;
    let mut codes = None;
    let mut periods = Vec::new();
    let mut columns = vec![Vec::new(); names.len()];
    for (i, record) in records.enumerate() {
        let record = record?;
        let line = i + 2;
        if record.len() != width {
            return Err(Error::Data(format!("row {line}: expected {width} fields, found {}", record.len())));
        }
        let first = record[0].trim();
        if i == 0 && first.to_ascii_lowercase().starts_with("transform") {
            let parsed = record
                .iter()
                .skip(1)
                .enumerate()
                .map(|(j, c)| {
                    c.trim().parse::<f64>().ok().filter(|v| v.fract() == 0.0 && *v >= 0.0).map(|v| v as u32).ok_or_else(|| {
                        Error::Data(format!("row {line}, column {} ({}): bad transform code '{c}'", j + 2, names[j]))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            codes = Some(parsed);
            continue;
        }
        let period = Period::parse(first)
            .ok_or_else(|| Error::Data(format!("row {line}, column 1: cannot parse period '{first}'")))?;
        periods.push(period);
        for (j, cell) in record.iter().skip(1).enumerate() {
            let value = if is_missing(cell) {
                f64::NAN
            } else {
                cell.trim().parse::<f64>().map_err(|_| {
                    Error::Data(format!("row {line}, column {} ({}): cannot parse '{}'", j + 2, names[j], cell.trim()))
                })?
            };
            columns[j].push(value);
        }
    }
    for w in periods.windows(2) {
        if w[1].key() <= w[0].key() {
            return Err(Error::Data(format!("time index not increasing at '{}'", w[1].label)));
        }
    }
    Ok(RawPanel { periods, names, codes, columns })
}

/// Loads, transforms, restricts and filters a panel.
///
/// Transforms run on the full history; the sample restriction is applied
/// afterwards, and any series with a missing value inside the restricted
/// sample is dropped.
pub fn load_csv(path: &Path, options: &LoadOptions) -> Result<Panel> {
    let raw = read_raw_csv(path)?;
    panel_from_raw(&raw, options)
}

pub fn panel_from_raw(raw: &RawPanel, options: &LoadOptions) -> Result<Panel> {
    let n = raw.names.len();
    let codes: Vec<TransformCode> = match options.transforms {
        TransformMode::None => vec![TransformCode::Level; n],
        TransformMode::Hamilton => {
            let code = TransformCode::Hamilton { h_lag: options.hamilton_h, p_lags: options.hamilton_p };
            code.validate()?;
            vec![code; n]
        }
        TransformMode::Codes => {
            let raw_codes = raw
                .codes
                .as_ref()
                .ok_or_else(|| Error::Data("transforms = \"codes\" but the file has no transform row".into()))?;
            raw_codes
                .iter()
                .zip(&raw.names)
                .map(|(&c, name)| TransformCode::from_fred(c).map_err(|e| Error::Data(format!("series '{name}': {e}"))))
                .collect::<Result<_>>()?
        }
    };
    let lost = codes.iter().map(TransformCode::lost_rows).max().unwrap_or(0);
    let transformed: Vec<Vec<f64>> = raw.columns.iter().zip(&codes).map(|(c, code)| code.apply(c)).collect::<Result<_>>()?;
    let rows: Vec<usize> = (lost..raw.periods.len())
        .filter(|&t| options.sample.map_or(true, |s| s.contains(&raw.periods[t])))
        .collect();
    if rows.is_empty() {
        return Err(Error::Data("no observations in the configured sample range".into()));
    }
    let mut keep = Vec::new();
    for (j, col) in transformed.iter().enumerate() {
        if rows.iter().all(|&t| col[t].is_finite()) {
            keep.push(j);
        } else {
            log::info!("dropping series '{}' (missing values in sample)", raw.names[j]);
        }
    }
    if !keep.iter().any(|&j| raw.names[j] == options.target) {
        return Err(if raw.names.contains(&options.target) {
            Error::Data(format!("target series '{}' has missing values in sample", options.target))
        } else {
            Error::Data(format!("target series '{}' not in file", options.target))
        });
    }
    if keep.len() < MIN_SERIES {
        return Err(Error::Data(format!("{} series survive the missing-value filter, need at least {MIN_SERIES}", keep.len())));
    }
    let x = Mat::from_fn(rows.len(), keep.len(), |i, j| transformed[keep[j]][rows[i]]);
    let periods = rows.iter().map(|&t| raw.periods[t].clone()).collect();
    let names = keep.iter().map(|&j| raw.names[j].clone()).collect();
    Panel::new(periods, x, names, options.target.clone())
}

/// Writes a panel in the layout read by [`load_csv`]. Values use the
/// shortest representation that round-trips exactly.
pub fn write_csv(path: &Path, panel: &Panel, codes: Option<&[TransformCode]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["period".to_string()];
    header.extend(panel.series_names().iter().cloned());
    w.write_record(&header)?;
    if let Some(codes) = codes {
        let mut row = vec!["transform".to_string()];
        for c in codes {
            let code = c.fred_code().ok_or_else(|| Error::invalid("Hamilton has no numeric transform code"))?;
            row.push(code.to_string());
        }
        w.write_record(&row)?;
    }
    for (t, period) in panel.time_index().iter().enumerate() {
        let mut row = vec![period.label.clone()];
        row.extend(panel.x().row(t).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Hamilton regression filter: residuals of `x_t` on
/// `(1, x_{t-h}, ..., x_{t-h-p+1})`.
///
/// Element `i` of the output is dated `t = i + h_lag + p_lags - 1` of the
/// input, so the output has `T - h_lag - p_lags + 1` elements.
pub fn hamilton_filter(series: &[f64], h_lag: usize, p_lags: usize) -> Result<Vec<f64>> {
    TransformCode::Hamilton { h_lag, p_lags }.validate()?;
    let t = series.len();
    if t <= h_lag + p_lags + 10 {
        return Err(Error::InsufficientData(format!("Hamilton filter needs more than {} observations, got {t}", h_lag + p_lags + 10)));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("Hamilton filter input has missing values".into()));
    }
    let full = hamilton_with_gaps(series, h_lag, p_lags);
    Ok(full[h_lag + p_lags - 1..].to_vec())
}

/// Full-length Hamilton residuals; NaN where the regression row is
/// incomplete.
fn hamilton_with_gaps(series: &[f64], h_lag: usize, p_lags: usize) -> Vec<f64> {
    let t = series.len();
    let first = h_lag + p_lags - 1;
    let mut out = vec![f64::NAN; t];
    let row_ok = |s: usize| series[s].is_finite() && (0..p_lags).all(|k| series[s - h_lag - k].is_finite());
    let rows: Vec<usize> = (first..t).filter(|&s| row_ok(s)).collect();
    if rows.len() < p_lags + 2 {
        return out;
    }
    let design = Mat::from_fn(rows.len(), p_lags + 1, |i, j| if j == 0 { 1.0 } else { series[rows[i] - h_lag - (j - 1)] });
    let target = Vector::from_iterator(rows.len(), rows.iter().map(|&s| series[s]));
    let coef = lstsq_min_norm(&design, &target);
    let resid = &target - &design * coef;
    for (i, &s) in rows.iter().enumerate() {
        out[s] = resid[i];
    }
    out
}

/// Column standardization fitted on one window and reusable on others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardizer {
    /// Fits column means and sample standard deviations. A constant column
    /// is an error naming the series (or its index when no names are given).
    pub fn fit(x: &Mat, names: Option<&[String]>) -> Result<Self> {
        let mut means = Vec::with_capacity(x.ncols());
        let mut sds = Vec::with_capacity(x.ncols());
        for (j, col) in x.column_iter().enumerate() {
            let mean = col.mean();
            let sd = sample_sd(col.iter().copied());
            if !(sd > 1e-12 * mean.abs().max(1.0)) {
                let name = names.and_then(|n| n.get(j)).cloned().unwrap_or_else(|| format!("column {j}"));
                return Err(Error::Data(format!("series '{name}' is constant in the window")));
            }
            means.push(mean);
            sds.push(sd);
        }
        Ok(Standardizer { means, sds })
    }

    pub fn transform(&self, x: &Mat) -> Mat {
        Mat::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.means[j]) / self.sds[j])
    }

    pub fn inverse(&self, z: &Mat) -> Mat {
        Mat::from_fn(z.nrows(), z.ncols(), |i, j| z[(i, j)] * self.sds[j] + self.means[j])
    }

    pub fn fit_transform(x: &Mat, names: Option<&[String]>) -> Result<(Mat, Self)> {
        let s = Self::fit(x, names)?;
        Ok((s.transform(x), s))
    }
}

/// Z-scores each column with the window's own statistics.
pub fn standardize_window(x: &Mat) -> Result<(Mat, Vector, Vector)> {
    let (z, s) = Standardizer::fit_transform(x, None)?;
    Ok((z, Vector::from_vec(s.means), Vector::from_vec(s.sds)))
}

/// Direct-forecast pairs: features dated `t`, target dated `t + h`.
#[derive(Debug, Clone)]
pub struct DirectPairs {
    pub features: Mat,
    pub target: Vector,
    pub horizon: usize,
}

/// Pairs row `t` of `x` with `y[t + h]` for `t = 0..T-h`.
pub fn make_direct_horizon(y: &Vector, x: &Mat, h: usize) -> Result<DirectPairs> {
    let t = y.len();
    if x.nrows() != t {
        return Err(Error::DimensionMismatch { context: "feature rows", expected: t, got: x.nrows() });
    }
    if h == 0 {
        return Err(Error::invalid("forecast horizon must be at least 1"));
    }
    if h >= t {
        return Err(Error::InsufficientData(format!("horizon {h} leaves no pairs from {t} observations")));
    }
    let rows = t - h;
    Ok(DirectPairs {
        features: x.rows(0, rows).into_owned(),
        target: Vector::from_iterator(rows, (h..t).map(|i| y[i])),
        horizon: h,
    })
}
