//! Run configuration: a TOML file merged with command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{LoadOptions, SampleRange, TransformMode};
use crate::error::{Error, Result};
use crate::evaluation::{BacktestConfig, KernelChoice, KernelFamily, Method, SigmaChoice, DEFAULT_HORIZONS, DEFAULT_TOLERANCES};
use crate::simulation::SimConfig;
use crate::tuning::DEFAULT_MULTIPLIERS;

/// `sigma = "auto"` or a positive number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaValue {
    Value(f64),
    Text(String),
}

impl SigmaValue {
    pub fn parse(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("auto") {
            return Ok(SigmaValue::Text("auto".into()));
        }
        s.trim().parse::<f64>().map(SigmaValue::Value).map_err(|_| Error::Config(format!("sigma must be 'auto' or a number, got '{s}'")))
    }

    fn choice(&self) -> Result<SigmaChoice> {
        match self {
            SigmaValue::Value(v) if *v > 0.0 && v.is_finite() => Ok(SigmaChoice::Fixed(*v)),
            SigmaValue::Value(v) => Err(Error::Config(format!("sigma must be positive, got {v}"))),
            SigmaValue::Text(t) if t.eq_ignore_ascii_case("auto") => Ok(SigmaChoice::Auto),
            SigmaValue::Text(t) => Err(Error::Config(format!("sigma must be 'auto' or a number, got '{t}'"))),
        }
    }
}

/// `[simulate]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateSection {
    #[serde(flatten)]
    pub base: SimConfig,
    /// `(M, T)` pairs.
    pub grid: Vec<(usize, usize)>,
    pub reps: usize,
    #[serde(flatten, skip_serializing)]
    unknown: BTreeMap<String, toml::Value>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            base: SimConfig::default(),
            grid: vec![(50, 50), (100, 100), (200, 200), (400, 400)],
            reps: 100,
            unknown: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub target: Option<String>,
    pub targets: Vec<String>,
    pub sample_range: String,
    pub transforms: TransformMode,
    pub hamilton_h: usize,
    pub hamilton_p: usize,
    pub kernel: KernelFamily,
    pub poly_offset: f64,
    pub sigma: SigmaValue,
    pub sigma_multipliers: Vec<f64>,
    pub cv_folds: usize,
    pub tune_per_window: bool,
    pub proxies: String,
    pub horizons: Vec<usize>,
    pub window_frac: f64,
    pub methods: Vec<String>,
    pub ar_lags: Vec<usize>,
    pub k_max: usize,
    pub exclude_target: bool,
    pub tolerances: Vec<f64>,
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
    pub simulate: SimulateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            target: None,
            targets: Vec::new(),
            sample_range: "1965-2007".into(),
            transforms: TransformMode::None,
            hamilton_h: 8,
            hamilton_p: 4,
            kernel: KernelFamily::Gaussian,
            poly_offset: 1.0,
            sigma: SigmaValue::Text("auto".into()),
            sigma_multipliers: DEFAULT_MULTIPLIERS.to_vec(),
            cv_folds: 2,
            tune_per_window: true,
            proxies: "auto:1".into(),
            horizons: DEFAULT_HORIZONS.to_vec(),
            window_frac: 0.7,
            methods: Method::ALL.iter().map(|m| m.name().to_string()).collect(),
            ar_lags: vec![1, 2, 4, 8],
            k_max: 8,
            exclude_target: true,
            tolerances: DEFAULT_TOLERANCES.to_vec(),
            seed: 0,
            threads: 0,
            out: PathBuf::from("out"),
            simulate: SimulateSection::default(),
        }
    }
}

/// Every top-level key of the config file with a one-line description.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("data", "path to the panel CSV (header row of series names, first column = period)"),
    ("target", "name of the series to forecast"),
    ("targets", "list of targets for backtest; overrides target"),
    ("sample_range", "YYYY-YYYY or \"full\"; presets 1965-2007 (default), 1965-2019, 1965-2023, 1984-2007"),
    ("transforms", "none | codes (per-series code row: 1 level, 2 diff, 5 log-diff) | hamilton"),
    ("hamilton_h", "Hamilton filter horizon (default 8)"),
    ("hamilton_p", "Hamilton filter lag count (default 4)"),
    ("kernel", "linear | poly2 | gaussian (default)"),
    ("poly_offset", "offset c of the degree-2 polynomial kernel (default 1)"),
    ("sigma", "\"auto\" (two-fold CV) or a fixed Gaussian bandwidth"),
    ("sigma_multipliers", "CV grid as multiples of the median-distance bandwidth"),
    ("cv_folds", "must be 2"),
    ("tune_per_window", "re-tune sigma in every rolling window (true) or only the first (false)"),
    ("proxies", "auto:L (automatic proxies) or cols:a,b (theory-guided series)"),
    ("horizons", "forecast horizons (default [1,2,3,4,6,8,10,12])"),
    ("window_frac", "rolling window width as a fraction of the sample (default 0.7)"),
    ("methods", "subset of k3PRF, 3PRF, PC, DI, AR, Sq-PC, PC-Sq, kPCA"),
    ("ar_lags", "candidate lag orders for AR and DI (default [1,2,4,8])"),
    ("k_max", "cap for the eigenvalue-ratio factor count (default 8)"),
    ("exclude_target", "drop the target from the predictor panel (default true)"),
    ("tolerances", "tolerance levels in percent for compare (default [0,5,10,20])"),
    ("seed", "master seed for every random draw"),
    ("threads", "worker threads, 0 = all cores"),
    ("out", "output directory"),
    ("simulate", "table with SimConfig fields (t, m, k_f, k_g, l, sigma_eps, ...), grid = [[M,T],...] and reps"),
];

/// Help text listing every config key.
pub fn config_help() -> String {
    let mut s = String::from("Config keys (TOML file given by --config; flags override):\n");
    for (k, d) in CONFIG_KEYS {
        s.push_str(&format!("  {k:<18} {d}\n"));
    }
    s.push_str("Exit codes: 2 config error, 3 data error, 4 numerical failure.\nLog level: K3PRF_LOG (error, warn, info, debug).\n");
    s
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; a relative `data` path is taken relative to the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml_str(&text)?;
        if let (Some(data), Some(dir)) = (&config.data, path.parent()) {
            if data.is_relative() {
                config.data = Some(dir.join(data));
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cv_folds != 2 {
            return Err(Error::Config(format!("cv_folds = {} is not supported; two contiguous folds are used", self.cv_folds)));
        }
        if let Some(key) = self.simulate.unknown.keys().next() {
            return Err(Error::Config(format!("unknown key '{key}' in [simulate]")));
        }
        if self.simulate.base.seed != SimConfig::default().seed {
            return Err(Error::Config("set the simulation seed with the top-level seed key".into()));
        }
        self.sample()?;
        self.backtest_config()?.validate()?;
        Ok(())
    }

    pub fn sample(&self) -> Result<Option<SampleRange>> {
        match self.sample_range.trim() {
            "full" | "all" | "" => Ok(None),
            s => SampleRange::parse(s).map(Some),
        }
    }

    pub fn target_list(&self) -> Result<Vec<String>> {
        if !self.targets.is_empty() {
            return Ok(self.targets.clone());
        }
        self.target.clone().map(|t| vec![t]).ok_or_else(|| Error::Config("no target configured (set target or --target)".into()))
    }

    pub fn load_options(&self, target: &str) -> Result<LoadOptions> {
        Ok(LoadOptions {
            target: target.to_string(),
            sample: self.sample()?,
            transforms: self.transforms,
            hamilton_h: self.hamilton_h,
            hamilton_p: self.hamilton_p,
        })
    }

    pub fn kernel_choice(&self) -> Result<KernelChoice> {
        Ok(KernelChoice { family: self.kernel, poly_offset: self.poly_offset, sigma: self.sigma.choice()? })
    }

    pub fn backtest_config(&self) -> Result<BacktestConfig> {
        let cfg = BacktestConfig {
            window_frac: self.window_frac,
            horizons: self.horizons.clone(),
            methods: self.methods.iter().map(|m| m.parse()).collect::<Result<_>>()?,
            proxies: self.proxies.parse()?,
            kernel: self.kernel_choice()?,
            sigma_multipliers: self.sigma_multipliers.clone(),
            tune_per_window: self.tune_per_window,
            ar_lags: self.ar_lags.clone(),
            k_max: self.k_max,
            exclude_target: self.exclude_target,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The configuration with the output directory cleared; it is what the
    /// manifest records and hashes.
    pub fn canonical(&self) -> RunConfig {
        RunConfig { out: PathBuf::new(), ..self.clone() }
    }

    /// SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.canonical()).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.sample().unwrap(), Some(SampleRange { start_year: 1965, end_year: 2007 }));
    }

    #[test]
    fn parses_file_and_rejects_unknown_keys() {
        let c = RunConfig::from_toml_str(
            r#"
            data = "x.csv"
            target = "GDP"
            kernel = "poly2"
            sigma = 1.5
            horizons = [1, 4]
            proxies = "cols:a,b"
            [simulate]
            t = 40
            m = 30
            grid = [[20, 20], [40, 40]]
            reps = 3
            "#,
        )
        .unwrap();
        assert_eq!(c.kernel, KernelFamily::Poly2);
        assert_eq!(c.sigma, SigmaValue::Value(1.5));
        assert_eq!(c.simulate.base.t, 40);
        assert_eq!(c.simulate.grid, vec![(20, 20), (40, 40)]);
        assert!(RunConfig::from_toml_str("colour = 3").is_err());
        let typo = RunConfig::from_toml_str("[simulate]\nsigma_epsilon = 1.0").unwrap();
        assert!(typo.validate().unwrap_err().to_string().contains("sigma_epsilon"));
    }

    #[test]
    fn cv_folds_other_than_two_rejected() {
        let c = RunConfig { cv_folds: 5, ..Default::default() };
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("cv_folds"), "{err}");
    }

    #[test]
    fn every_field_is_documented() {
        let value = toml::Value::try_from(RunConfig { data: Some("d".into()), target: Some("t".into()), ..Default::default() }).unwrap();
        let table = value.as_table().unwrap();
        for key in table.keys() {
            assert!(CONFIG_KEYS.iter().any(|(k, _)| k == key), "{key} undocumented");
        }
        assert_eq!(table.len(), CONFIG_KEYS.len());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::default();
        assert_eq!(a.hash(), RunConfig::default().hash());
        assert_ne!(a.hash(), RunConfig { seed: 1, ..Default::default() }.hash());
        assert_eq!(a.hash(), RunConfig { out: "elsewhere".into(), ..Default::default() }.hash());
    }
}
