//! Rolling-window out-of-sample backtests, the OOS R² metric and
//! tolerance-based best-method frequency tables.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autoproxy::auto_proxy_fit;
use crate::baselines::{
    ar_forecast, di_forecast, kpca_ratio_forecast, pc_regression_forecast, pc_sq_forecast, pca_factors,
    select_factor_count, sq_pc_forecast, squared_augmented,
};
use crate::data::{make_direct_horizon, Panel, Standardizer};
use crate::error::{Error, Result};
use crate::estimator::{fit, K3prfFit, ProxyProvenance, ProxySet};
use crate::kernel::KernelSpec;
use crate::linalg::{Mat, Vector};
use crate::tuning::{cv_tune_sigma, cv_tune_sigma_kpca, ProxyMode, DEFAULT_MULTIPLIERS};

pub const SCHEMA_VERSION: u32 = 1;
pub const MIN_WINDOW: usize = 40;
pub const MIN_FORECASTS: usize = 5;
pub const DEFAULT_HORIZONS: [usize; 8] = [1, 2, 3, 4, 6, 8, 10, 12];
pub const DEFAULT_TOLERANCES: [f64; 4] = [0.0, 5.0, 10.0, 20.0];

/// Forecasting methods compared in a backtest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "k3PRF")]
    K3prf,
    #[serde(rename = "3PRF")]
    Tprf,
    #[serde(rename = "PC")]
    Pc,
    #[serde(rename = "DI")]
    Di,
    #[serde(rename = "AR")]
    Ar,
    #[serde(rename = "Sq-PC")]
    SqPc,
    #[serde(rename = "PC-Sq")]
    PcSq,
    #[serde(rename = "kPCA")]
    Kpca,
}

impl Method {
    pub const ALL: [Method; 8] =
        [Method::K3prf, Method::Tprf, Method::Pc, Method::Di, Method::Ar, Method::SqPc, Method::PcSq, Method::Kpca];

    pub fn name(&self) -> &'static str {
        match self {
            Method::K3prf => "k3PRF",
            Method::Tprf => "3PRF",
            Method::Pc => "PC",
            Method::Di => "DI",
            Method::Ar => "AR",
            Method::SqPc => "Sq-PC",
            Method::PcSq => "PC-Sq",
            Method::Kpca => "kPCA",
        }
    }

    fn uses_lags(&self) -> bool {
        matches!(self, Method::Ar | Method::Di)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// Kernel family used by k3PRF and kPCA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Linear,
    Poly2,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaChoice {
    /// Two-fold CV over `multiplier x median heuristic`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelChoice {
    pub family: KernelFamily,
    pub poly_offset: f64,
    pub sigma: SigmaChoice,
}

impl Default for KernelChoice {
    fn default() -> Self {
        KernelChoice { family: KernelFamily::Gaussian, poly_offset: 1.0, sigma: SigmaChoice::Auto }
    }
}

impl KernelChoice {
    /// Whether the bandwidth is chosen by cross-validation.
    pub fn needs_tuning(&self) -> bool {
        self.family == KernelFamily::Gaussian && self.sigma == SigmaChoice::Auto
    }

    /// Kernel for this choice; `tuned` supplies the bandwidth when it is
    /// cross-validated.
    pub fn spec(&self, tuned: Option<f64>) -> KernelSpec {
        match (self.family, self.sigma) {
            (KernelFamily::Linear, _) => KernelSpec::Linear,
            (KernelFamily::Poly2, _) => KernelSpec::poly2(self.poly_offset),
            (KernelFamily::Gaussian, SigmaChoice::Fixed(s)) => KernelSpec::gaussian(s),
            (KernelFamily::Gaussian, SigmaChoice::Auto) => KernelSpec::gaussian(tuned.expect("sigma tuned before use")),
        }
    }
}

/// Proxy source for k3PRF and 3PRF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyChoice {
    Auto(usize),
    Columns(Vec<String>),
}

impl FromStr for ProxyChoice {
    type Err = Error;
    /// `auto:L` or `cols:a,b,c`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').ok_or_else(|| Error::Config(format!("proxies '{s}': expected auto:L or cols:a,b")))?;
        match kind.trim() {
            "auto" => {
                let l = rest.trim().parse::<usize>().map_err(|_| Error::Config(format!("proxies '{s}': bad L")))?;
                if l == 0 {
                    return Err(Error::Config("proxies: L must be at least 1".into()));
                }
                Ok(ProxyChoice::Auto(l))
            }
            "cols" => {
                let names: Vec<String> = rest.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect();
                if names.is_empty() {
                    return Err(Error::Config("proxies: cols needs at least one series".into()));
                }
                Ok(ProxyChoice::Columns(names))
            }
            other => Err(Error::Config(format!("proxies: unknown mode '{other}'"))),
        }
    }
}

impl fmt::Display for ProxyChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProxyChoice::Auto(l) => write!(f, "auto:{l}"),
            ProxyChoice::Columns(c) => write!(f, "cols:{}", c.join(",")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub window_frac: f64,
    pub horizons: Vec<usize>,
    pub methods: Vec<Method>,
    pub proxies: ProxyChoice,
    pub kernel: KernelChoice,
    pub sigma_multipliers: Vec<f64>,
    /// Re-tune sigma at every window position; otherwise tune on the first
    /// window of each horizon and keep it.
    pub tune_per_window: bool,
    pub ar_lags: Vec<usize>,
    pub k_max: usize,
    pub exclude_target: bool,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig {
            window_frac: 0.7,
            horizons: DEFAULT_HORIZONS.to_vec(),
            methods: Method::ALL.to_vec(),
            proxies: ProxyChoice::Auto(1),
            kernel: KernelChoice::default(),
            sigma_multipliers: DEFAULT_MULTIPLIERS.to_vec(),
            tune_per_window: true,
            ar_lags: vec![1, 2, 4, 8],
            k_max: 8,
            exclude_target: true,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_frac > 0.0 && self.window_frac < 1.0) {
            return Err(Error::Config(format!("window_frac must lie in (0, 1), got {}", self.window_frac)));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::Config("horizons must be a non-empty list of positive integers".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods must not be empty".into()));
        }
        if self.ar_lags.is_empty() || self.ar_lags.contains(&0) {
            return Err(Error::Config("ar_lags must be a non-empty list of positive integers".into()));
        }
        if self.k_max == 0 {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        if self.sigma_multipliers.is_empty() || self.sigma_multipliers.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::Config("sigma_multipliers must be positive and non-empty".into()));
        }
        if let ProxyChoice::Auto(0) = self.proxies {
            return Err(Error::Config("proxies: L must be at least 1".into()));
        }
        if let SigmaChoice::Fixed(s) = self.kernel.sigma {
            if !(s > 0.0) {
                return Err(Error::Config("sigma must be positive".into()));
            }
        }
        Ok(())
    }

    /// Window width for a panel of `t` periods.
    pub fn window_len(&self, t: usize) -> Result<usize> {
        self.validate()?;
        let w = (self.window_frac * t as f64).floor() as usize;
        if w < MIN_WINDOW {
            return Err(Error::Config(format!("rolling window of {w} periods is below the minimum of {MIN_WINDOW}")));
        }
        let h_max = *self.horizons.iter().max().expect("validated non-empty");
        if t < w + h_max || t + 1 - w - h_max < MIN_FORECASTS {
            return Err(Error::Config(format!(
                "window of {w} periods leaves fewer than {MIN_FORECASTS} forecasts at horizon {h_max} (T = {t})"
            )));
        }
        Ok(w)
    }
}

/// `1 - SSE / SST` with SST anchored at the training mean.
pub fn oos_r2(actual: &[f64], forecast: &[f64], train_mean: f64) -> Result<f64> {
    pooled_oos_r2(actual, forecast, &vec![train_mean; actual.len()])
}

/// Pooled version with one training mean per forecast.
pub fn pooled_oos_r2(actual: &[f64], forecast: &[f64], train_means: &[f64]) -> Result<f64> {
    if actual.is_empty() || actual.len() != forecast.len() || actual.len() != train_means.len() {
        return Err(Error::invalid(format!(
            "oos_r2 needs equal non-zero lengths, got {}, {}, {}",
            actual.len(),
            forecast.len(),
            train_means.len()
        )));
    }
    let sse: f64 = actual.iter().zip(forecast).map(|(a, f)| (a - f) * (a - f)).sum();
    let sst: f64 = actual.iter().zip(train_means).map(|(a, m)| (a - m) * (a - m)).sum();
    if !(sst > 0.0) {
        return Err(Error::invalid("oos_r2 denominator is zero"));
    }
    Ok(1.0 - sse / sst)
}

mod nonfinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|x| if x.is_finite() { Some(*x) } else { None }))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Ok(Vec::<Option<f64>>::deserialize(d)?.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
        }
    }
}

/// Result for one (target, method, horizon).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub target: String,
    pub method: Method,
    pub horizon: usize,
    /// Pooled OOS R²; `-inf` when any window failed.
    #[serde(with = "nonfinite")]
    pub oos_r2: f64,
    pub periods: Vec<String>,
    #[serde(with = "nonfinite::vec")]
    pub actual: Vec<f64>,
    #[serde(with = "nonfinite::vec")]
    pub forecast: Vec<f64>,
    pub train_means: Vec<f64>,
    /// Bandwidth used at each window position, when tuned.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<Vec<f64>>,
    /// Lag order picked for AR and DI.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lag: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CellResult {
    pub fn num_forecasts(&self) -> usize {
        self.forecast.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub schema_version: u32,
    pub window: usize,
    pub num_periods: usize,
    pub config: BacktestConfig,
    pub cells: Vec<CellResult>,
}

impl BacktestReport {
    pub fn cell(&self, target: &str, method: Method, horizon: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.target == target && c.method == method && c.horizon == horizon)
    }

    pub fn merge(reports: Vec<BacktestReport>) -> Result<BacktestReport> {
        let mut iter = reports.into_iter();
        let mut first = iter.next().ok_or_else(|| Error::invalid("no reports to merge"))?;
        for r in iter {
            first.cells.extend(r.cells);
        }
        Ok(first)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Detail {
    sigma: Option<f64>,
}

type Outcome = std::result::Result<(f64, Detail), String>;

/// Forecasts of every configured method at one window position.
#[derive(Debug, Clone)]
pub struct WindowForecasts {
    pub horizon: usize,
    pub start: usize,
    pub actual: f64,
    pub train_mean: f64,
    /// One entry per method; AR and DI hold one value per lag in
    /// `ar_lags` order. Failed fits are NaN.
    pub values: Vec<(Method, Vec<f64>)>,
}

struct Context<'a> {
    x: Mat,
    y: Vector,
    z: Option<Mat>,
    names: Vec<String>,
    cfg: &'a BacktestConfig,
    w: usize,
}

impl<'a> Context<'a> {
    fn new(panel: &Panel, cfg: &'a BacktestConfig) -> Result<Self> {
        let w = cfg.window_len(panel.num_periods())?;
        let (x, names) = panel.predictors(cfg.exclude_target);
        let z = match &cfg.proxies {
            ProxyChoice::Columns(cols) => Some(panel.columns(cols)?),
            ProxyChoice::Auto(_) => None,
        };
        Ok(Context { x, y: panel.y(), z, names, cfg, w })
    }

    fn num_windows(&self, h: usize) -> usize {
        self.y.len() + 1 - self.w - h
    }

    /// Standardized window predictors; columns constant inside the window
    /// are dropped.
    fn window_x(&self, s: usize) -> Result<Mat> {
        let raw = self.x.rows(s, self.w).into_owned();
        let keep: Vec<usize> = (0..raw.ncols())
            .filter(|&j| Standardizer::fit(&raw.columns(j, 1).into_owned(), None).is_ok())
            .collect();
        if keep.len() < raw.ncols() {
            let dropped: Vec<&str> =
                (0..raw.ncols()).filter(|j| !keep.contains(j)).map(|j| self.names[j].as_str()).collect();
            log::debug!("window {s}: dropping constant series {dropped:?}");
        }
        if keep.is_empty() {
            return Err(Error::Data(format!("window {s}: every predictor is constant")));
        }
        let raw = raw.select_columns(&keep);
        Ok(Standardizer::fit_transform(&raw, None)?.0)
    }

    fn window_y(&self, s: usize) -> Vector {
        self.y.rows(s, self.w).into_owned()
    }

    fn proxy_mode(&self, s: usize) -> ProxyMode {
        match (&self.cfg.proxies, &self.z) {
            (ProxyChoice::Columns(_), Some(z)) => ProxyMode::Columns(z.rows(s, self.w).into_owned()),
            (ProxyChoice::Auto(l), _) => ProxyMode::Auto(*l),
            (ProxyChoice::Columns(_), None) => unreachable!("columns are loaded with the context"),
        }
    }

    fn k_max(&self) -> usize {
        self.cfg.k_max.min(self.w / 10).max(1)
    }

    fn tune_k3prf(&self, s: usize, h: usize) -> Result<f64> {
        let x = self.window_x(s)?;
        Ok(cv_tune_sigma(&x, &self.window_y(s), &self.proxy_mode(s), h, &self.cfg.sigma_multipliers)?.selected)
    }

    fn tune_kpca(&self, s: usize, h: usize) -> Result<f64> {
        let x = self.window_x(s)?;
        Ok(cv_tune_sigma_kpca(&x, &self.window_y(s), self.k_max(), h, &self.cfg.sigma_multipliers)?.selected)
    }

    fn prf_forecast(&self, x: &Mat, y: &Vector, s: usize, h: usize, spec: &KernelSpec) -> Result<f64> {
        let names = match &self.cfg.proxies {
            ProxyChoice::Columns(c) => c.clone(),
            ProxyChoice::Auto(_) => Vec::new(),
        };
        let model = fit_direct(x, y, &self.proxy_mode(s), &names, spec, h)?;
        Ok(model.predict(&x.rows(x.nrows() - 1, 1).into_owned())?[0])
    }

    /// All method forecasts for window start `s` at horizon `h`.
    fn window(&self, h: usize, s: usize, frozen: &Frozen) -> Result<Vec<(Method, Vec<Outcome>)>> {
        let cfg = self.cfg;
        let x = self.window_x(s)?;
        let y = self.window_y(s);
        let k_max = self.k_max();
        let pcs = pca_factors(&x, 0);
        let k_pc = pcs.as_ref().map_err(|e| e.to_string()).and_then(|p| select_factor_count(&p.eigenvalues, k_max).map_err(|e| e.to_string()));
        let wrap = |r: Result<f64>, d: Detail| -> Outcome {
            match r {
                Ok(v) if v.is_finite() => Ok((v, d)),
                Ok(v) => Err(format!("non-finite forecast {v}")),
                Err(e) => Err(e.to_string()),
            }
        };
        let with_k = |f: &dyn Fn(usize) -> Result<f64>| -> Outcome {
            match &k_pc {
                Ok(k) => wrap(f(*k), Detail::default()),
                Err(e) => Err(e.clone()),
            }
        };
        let mut out = Vec::with_capacity(cfg.methods.len());
        for &method in &cfg.methods {
            let outcomes: Vec<Outcome> = match method {
                Method::K3prf => {
                    let sigma = if cfg.kernel.needs_tuning() {
                        match frozen.k3prf.get(&h) {
                            Some(Ok(s)) => Ok(Some(*s)),
                            Some(Err(e)) => Err(e.clone()),
                            None => self.tune_k3prf(s, h).map(Some).map_err(|e| e.to_string()),
                        }
                    } else {
                        Ok(None)
                    };
                    vec![sigma.and_then(|sig| {
                        let spec = cfg.kernel.spec(sig);
                        wrap(self.prf_forecast(&x, &y, s, h, &spec), Detail { sigma: sig })
                    })]
                }
                Method::Tprf => vec![wrap(self.prf_forecast(&x, &y, s, h, &KernelSpec::Linear), Detail::default())],
                Method::Pc => vec![with_k(&|k| Ok(pc_regression_forecast(&x, &y, h, k)?.value))],
                Method::PcSq => vec![with_k(&|k| Ok(pc_sq_forecast(&x, &y, h, k)?.value))],
                Method::SqPc => {
                    let r = (|| {
                        let aug = squared_augmented(&x)?;
                        let eig = pca_factors(&aug, 0)?.eigenvalues;
                        let k = select_factor_count(&eig, k_max)?;
                        Ok(sq_pc_forecast(&x, &y, h, k)?.value)
                    })();
                    vec![wrap(r, Detail::default())]
                }
                Method::Di => cfg.ar_lags.iter().map(|&p| with_k(&|k| Ok(di_forecast(&y, Some(&x), p, k, h)?.value))).collect(),
                Method::Ar => cfg.ar_lags.iter().map(|&p| wrap(ar_forecast(&y, p, h).map(|f| f.value), Detail::default())).collect(),
                Method::Kpca => {
                    let sigma = if cfg.kernel.needs_tuning() {
                        match frozen.kpca.get(&h) {
                            Some(Ok(s)) => Ok(Some(*s)),
                            Some(Err(e)) => Err(e.clone()),
                            None => self.tune_kpca(s, h).map(Some).map_err(|e| e.to_string()),
                        }
                    } else {
                        Ok(None)
                    };
                    vec![sigma.and_then(|sig| {
                        let spec = cfg.kernel.spec(sig);
                        wrap(kpca_ratio_forecast(&x, &y, h, &spec, k_max).map(|f| f.value), Detail { sigma: sig })
                    })]
                }
            };
            out.push((method, outcomes));
        }
        Ok(out)
    }

    fn frozen(&self, h: usize) -> Frozen {
        let mut frozen = Frozen::default();
        if self.cfg.tune_per_window || !self.cfg.kernel.needs_tuning() {
            return frozen;
        }
        if self.cfg.methods.contains(&Method::K3prf) {
            frozen.k3prf.insert(h, self.tune_k3prf(0, h).map_err(|e| e.to_string()));
        }
        if self.cfg.methods.contains(&Method::Kpca) {
            frozen.kpca.insert(h, self.tune_kpca(0, h).map_err(|e| e.to_string()));
        }
        frozen
    }

    fn actual(&self, h: usize, s: usize) -> f64 {
        self.y[s + self.w - 1 + h]
    }

    fn train_mean(&self, h: usize, s: usize) -> f64 {
        self.y.rows(s + h, self.w - h).mean()
    }
}

#[derive(Default)]
struct Frozen {
    k3prf: BTreeMap<usize, std::result::Result<f64, String>>,
    kpca: BTreeMap<usize, std::result::Result<f64, String>>,
}

/// Fits the k3PRF on the direct pairs `(x_t, y_{t+h})`. Theory-guided
/// proxy columns share the dates of `x` and enter aligned with the target
/// lead.
pub fn fit_direct(x: &Mat, y: &Vector, proxies: &ProxyMode, names: &[String], spec: &KernelSpec, h: usize) -> Result<K3prfFit> {
    let pairs = make_direct_horizon(y, x, h)?;
    match proxies {
        ProxyMode::Auto(l) => Ok(auto_proxy_fit(&pairs.features, &pairs.target, spec, *l)?.1),
        ProxyMode::Columns(z) => {
            if z.nrows() != y.len() {
                return Err(Error::DimensionMismatch { context: "proxy rows", expected: y.len(), got: z.nrows() });
            }
            let lead = z.rows(h, pairs.target.len()).into_owned();
            fit(&pairs.features, &pairs.target, &ProxySet::new(lead, ProxyProvenance::TheoryGuided(names.to_vec()))?, spec)
        }
    }
}

/// Runs the rolling-window backtest for the panel's target.
///
/// Window `s` covers periods `s..s + W`; at horizon `h` it forecasts the
/// target at period `s + W - 1 + h`. All standardization, proxy
/// construction and tuning use window rows only.
pub fn rolling_backtest(panel: &Panel, cfg: &BacktestConfig) -> Result<BacktestReport> {
    let ctx = Context::new(panel, cfg)?;
    let frozen: BTreeMap<usize, Frozen> = cfg.horizons.iter().map(|&h| (h, ctx.frozen(h))).collect();
    let units: Vec<(usize, usize)> =
        cfg.horizons.iter().flat_map(|&h| (0..ctx.num_windows(h)).map(move |s| (h, s))).collect();
    let results: Vec<Result<Vec<(Method, Vec<Outcome>)>>> =
        units.par_iter().map(|&(h, s)| ctx.window(h, s, &frozen[&h])).collect();

    let mut cells = Vec::new();
    let target = panel.y_name().to_string();
    for &h in &cfg.horizons {
        let n = ctx.num_windows(h);
        let first = units.iter().position(|&u| u == (h, 0)).expect("unit present");
        let window_results = &results[first..first + n];
        let actual: Vec<f64> = (0..n).map(|s| ctx.actual(h, s)).collect();
        let train_means: Vec<f64> = (0..n).map(|s| ctx.train_mean(h, s)).collect();
        let periods: Vec<String> = (0..n).map(|s| panel.time_index()[s + ctx.w - 1 + h].label.clone()).collect();
        for (mi, &method) in cfg.methods.iter().enumerate() {
            let variants = if method.uses_lags() { cfg.ar_lags.len() } else { 1 };
            let mut best: Option<(f64, CellResult)> = None;
            for v in 0..variants {
                let mut forecast = Vec::with_capacity(n);
                let mut sigmas = Vec::with_capacity(n);
                let mut error = None;
                for r in window_results {
                    let outcome = match r {
                        Ok(list) => list[mi].1[v].clone(),
                        Err(e) => Err(e.to_string()),
                    };
                    match outcome {
                        Ok((value, d)) => {
                            forecast.push(value);
                            if let Some(s) = d.sigma {
                                sigmas.push(s);
                            }
                        }
                        Err(e) => {
                            forecast.push(f64::NAN);
                            error.get_or_insert(e);
                        }
                    }
                }
                let oos = if error.is_none() {
                    pooled_oos_r2(&actual, &forecast, &train_means).unwrap_or_else(|e| {
                        error = Some(e.to_string());
                        f64::NEG_INFINITY
                    })
                } else {
                    f64::NEG_INFINITY
                };
                let cell = CellResult {
                    target: target.clone(),
                    method,
                    horizon: h,
                    oos_r2: oos,
                    periods: periods.clone(),
                    actual: actual.clone(),
                    forecast,
                    train_means: train_means.clone(),
                    sigmas: if sigmas.len() == n { Some(sigmas) } else { None },
                    lag: method.uses_lags().then(|| cfg.ar_lags[v]),
                    error,
                };
                let better = match &best {
                    None => true,
                    Some((b, _)) => oos > *b,
                };
                if better {
                    best = Some((oos, cell));
                }
            }
            cells.push(best.expect("at least one variant").1);
        }
    }
    Ok(BacktestReport { schema_version: SCHEMA_VERSION, window: ctx.w, num_periods: panel.num_periods(), config: cfg.clone(), cells })
}

/// Backtests several targets of one panel and merges the reports.
pub fn backtest_targets(panel: &Panel, targets: &[String], cfg: &BacktestConfig) -> Result<BacktestReport> {
    if targets.is_empty() {
        return Err(Error::Config("no targets given".into()));
    }
    let reports = targets.iter().map(|t| rolling_backtest(&panel.with_target(t)?, cfg)).collect::<Result<Vec<_>>>()?;
    BacktestReport::merge(reports)
}

/// Forecasts of every method made at window position `start`.
pub fn forecasts_at_window(panel: &Panel, cfg: &BacktestConfig, horizon: usize, start: usize) -> Result<WindowForecasts> {
    let ctx = Context::new(panel, cfg)?;
    if !cfg.horizons.contains(&horizon) {
        return Err(Error::Config(format!("horizon {horizon} is not configured")));
    }
    if start >= ctx.num_windows(horizon) {
        return Err(Error::invalid(format!("window {start} out of range")));
    }
    let frozen = ctx.frozen(horizon);
    let list = ctx.window(horizon, start, &frozen)?;
    Ok(WindowForecasts {
        horizon,
        start,
        actual: ctx.actual(horizon, start),
        train_mean: ctx.train_mean(horizon, start),
        values: list
            .into_iter()
            .map(|(m, outs)| (m, outs.into_iter().map(|o| o.map(|(v, _)| v).unwrap_or(f64::NAN)).collect()))
            .collect(),
    })
}

/// Leakage audit: overwrites every period after window `start` with random
/// values and checks that all forecasts made at that window are
/// bit-identical. Returns the methods whose forecasts changed.
pub fn leakage_audit(panel: &Panel, cfg: &BacktestConfig, horizon: usize, start: usize, seed: u64) -> Result<Vec<Method>> {
    let base = forecasts_at_window(panel, cfg, horizon, start)?;
    let w = cfg.window_len(panel.num_periods())?;
    let mut x = panel.x().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in start + w..x.nrows() {
        for j in 0..x.ncols() {
            let noise: f64 = StandardNormal.sample(&mut rng);
            x[(i, j)] = 1e3 * noise;
        }
    }
    let perturbed = Panel::new(panel.time_index().to_vec(), x, panel.series_names().to_vec(), panel.y_name())?;
    let after = forecasts_at_window(&perturbed, cfg, horizon, start)?;
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    Ok(base
        .values
        .iter()
        .zip(&after.values)
        .filter(|((_, a), (_, b))| bits(a) != bits(b))
        .map(|((m, _), _)| *m)
        .collect())
}

/// Horizon groups of the frequency table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scope {
    All,
    ShortRun,
    LongRun,
    ExcludingAr,
}

impl Scope {
    pub const ALL: [Scope; 4] = [Scope::All, Scope::ShortRun, Scope::LongRun, Scope::ExcludingAr];

    pub fn name(&self) -> &'static str {
        match self {
            Scope::All => "All",
            Scope::ShortRun => "Short-run",
            Scope::LongRun => "Long-run",
            Scope::ExcludingAr => "Excluding-AR",
        }
    }

    fn includes_horizon(&self, h: usize) -> bool {
        match self {
            Scope::ShortRun => h <= 4,
            Scope::LongRun => h >= 6,
            Scope::All | Scope::ExcludingAr => true,
        }
    }

    fn includes_method(&self, m: Method) -> bool {
        !(matches!(self, Scope::ExcludingAr) && matches!(m, Method::Ar | Method::Di))
    }
}

impl FromStr for Scope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scope::ALL.iter().find(|x| x.name() == s).copied().ok_or_else(|| Error::Data(format!("unknown scope '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceRow {
    pub scope: Scope,
    pub tolerance: f64,
    pub cells: usize,
    /// Best-frequency percentage per method, in `ToleranceTable::methods`
    /// order; NaN for methods outside the scope.
    pub percent: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceTable {
    pub methods: Vec<Method>,
    pub rows: Vec<ToleranceRow>,
    /// Zero-tolerance ties that were broken by method name.
    pub tie_breaks: Vec<String>,
}

impl ToleranceTable {
    pub fn row(&self, scope: Scope, tolerance: f64) -> Option<&ToleranceRow> {
        self.rows.iter().find(|r| r.scope == scope && r.tolerance == tolerance)
    }

    pub fn percent(&self, scope: Scope, tolerance: f64, method: Method) -> Option<f64> {
        let i = self.methods.iter().position(|&m| m == method)?;
        self.row(scope, tolerance).map(|r| r.percent[i])
    }
}

/// Winners of one cell. At tolerance zero, or when the best score is not
/// positive, only the maximum wins (ties to the lexicographically first
/// method name).
fn winners(scores: &[(Method, f64)], tolerance: f64) -> (Vec<Method>, Option<Vec<Method>>) {
    let finite: Vec<&(Method, f64)> = scores.iter().filter(|(_, r)| r.is_finite()).collect();
    let Some(best) = finite.iter().map(|(_, r)| *r).reduce(f64::max) else {
        return (Vec::new(), None);
    };
    let mut top: Vec<Method> = finite.iter().filter(|(_, r)| *r == best).map(|(m, _)| *m).collect();
    top.sort_by_key(|m| m.name());
    let tie = (top.len() > 1).then(|| top.clone());
    if tolerance > 0.0 && best > 0.0 {
        let threshold = best * (1.0 - tolerance / 100.0);
        (finite.iter().filter(|(_, r)| *r >= threshold).map(|(m, _)| *m).collect(), tie)
    } else {
        (vec![top[0]], tie)
    }
}

pub fn tolerance_table(reports: &[BacktestReport], tolerances: &[f64]) -> Result<ToleranceTable> {
    let scores = reports.iter().flat_map(|r| &r.cells).map(|c| (c.target.as_str(), c.horizon, c.method, c.oos_r2));
    table_from_scores(scores.collect(), tolerances)
}

/// Same as [`tolerance_table`], from summary rows of report CSVs.
pub fn tolerance_table_from_rows(rows: &[ReportRow], tolerances: &[f64]) -> Result<ToleranceTable> {
    table_from_scores(rows.iter().map(|r| (r.target.as_str(), r.horizon, r.method, r.oos_r2)).collect(), tolerances)
}

fn table_from_scores(scores: Vec<(&str, usize, Method, f64)>, tolerances: &[f64]) -> Result<ToleranceTable> {
    if scores.is_empty() {
        return Err(Error::invalid("tolerance table needs at least one report cell"));
    }
    if tolerances.is_empty() || tolerances.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::invalid("tolerances must be non-negative and non-empty"));
    }
    let mut methods: Vec<Method> = scores.iter().map(|c| c.2).collect();
    methods.sort();
    methods.dedup();
    let mut grouped: BTreeMap<(String, usize), Vec<(Method, f64)>> = BTreeMap::new();
    for &(target, h, m, r2) in &scores {
        let cell = grouped.entry((target.to_string(), h)).or_default();
        if cell.iter().any(|(x, _)| *x == m) {
            return Err(Error::Data(format!("duplicate score for {target} {} h={h}", m.name())));
        }
        cell.push((m, r2));
    }
    let mut rows = Vec::new();
    let mut tie_breaks = Vec::new();
    for scope in Scope::ALL {
        for &tol in tolerances {
            let mut counts = vec![0usize; methods.len()];
            let mut n = 0;
            for ((target, h), scores) in &grouped {
                if !scope.includes_horizon(*h) {
                    continue;
                }
                let scoped: Vec<(Method, f64)> = scores.iter().copied().filter(|(m, _)| scope.includes_method(*m)).collect();
                let (win, tie) = winners(&scoped, tol);
                if win.is_empty() {
                    continue;
                }
                n += 1;
                for m in win {
                    counts[methods.iter().position(|&x| x == m).expect("known method")] += 1;
                }
                if tol == 0.0 {
                    if let Some(tied) = tie {
                        let names: Vec<&str> = tied.iter().map(|m| m.name()).collect();
                        tie_breaks.push(format!("{} {target} h={h}: tie between {} -> {}", scope.name(), names.join(", "), names[0]));
                    }
                }
            }
            let percent = methods
                .iter()
                .zip(&counts)
                .map(|(m, &c)| if !scope.includes_method(*m) { f64::NAN } else if n == 0 { 0.0 } else { 100.0 * c as f64 / n as f64 })
                .collect();
            rows.push(ToleranceRow { scope, tolerance: tol, cells: n, percent });
        }
    }
    Ok(ToleranceTable { methods, rows, tie_breaks })
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    if s.trim().is_empty() {
        return Ok(f64::NAN);
    }
    s.trim().parse::<f64>().map_err(|_| Error::Data(format!("cannot parse {what} '{s}'")))
}

/// One row per (target, method, horizon).
pub fn write_report_csv(path: &Path, report: &BacktestReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["schema_version", "target", "method", "horizon", "oos_r2", "n_forecasts", "lag", "mean_sigma", "error"])?;
    for c in &report.cells {
        let mean_sigma = c.sigmas.as_ref().map(|s| s.iter().sum::<f64>() / s.len() as f64);
        w.write_record([
            SCHEMA_VERSION.to_string(),
            c.target.clone(),
            c.method.name().to_string(),
            c.horizon.to_string(),
            c.oos_r2.to_string(),
            c.num_forecasts().to_string(),
            c.lag.map(|l| l.to_string()).unwrap_or_default(),
            mean_sigma.map(|s| s.to_string()).unwrap_or_default(),
            c.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Summary rows read back from a report CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub target: String,
    pub method: Method,
    pub horizon: usize,
    pub oos_r2: f64,
    pub n_forecasts: usize,
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() < 6 {
            return Err(Error::Data("report row has too few fields".into()));
        }
        let version: u32 = rec[0].parse().map_err(|_| Error::Data("bad schema_version".into()))?;
        if version != SCHEMA_VERSION {
            return Err(Error::Data(format!("report schema_version {version}, expected {SCHEMA_VERSION}")));
        }
        rows.push(ReportRow {
            target: rec[1].to_string(),
            method: rec[2].parse().map_err(|_| Error::Data(format!("unknown method '{}'", &rec[2])))?,
            horizon: rec[3].parse().map_err(|_| Error::Data("bad horizon".into()))?,
            oos_r2: parse_f64(&rec[4], "oos_r2")?,
            n_forecasts: rec[5].parse().map_err(|_| Error::Data("bad n_forecasts".into()))?,
        });
    }
    Ok(rows)
}

pub fn write_report_json(path: &Path, report: &BacktestReport) -> Result<()> {
    let f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), report)?;
    Ok(())
}

pub fn read_report_json(path: &Path) -> Result<BacktestReport> {
    let report: BacktestReport = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
    if report.schema_version != SCHEMA_VERSION {
        return Err(Error::Data(format!("report schema_version {}, expected {SCHEMA_VERSION}", report.schema_version)));
    }
    Ok(report)
}

/// Forecast-versus-actual vectors, one row per forecast.
pub fn write_forecasts_csv(path: &Path, report: &BacktestReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["schema_version", "target", "method", "horizon", "period", "actual", "forecast", "train_mean"])?;
    for c in &report.cells {
        for i in 0..c.num_forecasts() {
            w.write_record([
                SCHEMA_VERSION.to_string(),
                c.target.clone(),
                c.method.name().to_string(),
                c.horizon.to_string(),
                c.periods[i].clone(),
                c.actual[i].to_string(),
                fmt_f64(c.forecast[i]),
                c.train_means[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Table layout: one row per (scope, tolerance), one column per method.
pub fn write_tolerance_csv(path: &Path, table: &ToleranceTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["schema_version".to_string(), "scope".into(), "tolerance".into(), "cells".into()];
    header.extend(table.methods.iter().map(|m| m.name().to_string()));
    w.write_record(&header)?;
    for r in &table.rows {
        let mut rec = vec![SCHEMA_VERSION.to_string(), r.scope.name().to_string(), r.tolerance.to_string(), r.cells.to_string()];
        rec.extend(r.percent.iter().map(|p| if p.is_nan() { String::new() } else { format!("{p:.2}") }));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tolerance_csv(path: &Path) -> Result<ToleranceTable> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.len() < 4 {
        return Err(Error::Data("tolerance table header too short".into()));
    }
    let methods = header.iter().skip(4).map(|m| m.parse::<Method>().map_err(|_| Error::Data(format!("unknown method '{m}'")))).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec[0].parse::<u32>().ok() != Some(SCHEMA_VERSION) {
            return Err(Error::Data("tolerance table schema_version mismatch".into()));
        }
        rows.push(ToleranceRow {
            scope: rec[1].parse()?,
            tolerance: parse_f64(&rec[2], "tolerance")?,
            cells: rec[3].parse().map_err(|_| Error::Data("bad cell count".into()))?,
            percent: rec.iter().skip(4).map(|p| parse_f64(p, "percentage")).collect::<Result<_>>()?,
        });
    }
    Ok(ToleranceTable { methods, rows, tie_breaks: Vec::new() })
}
