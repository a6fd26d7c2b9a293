//! Command-line front end: `forecast`, `backtest`, `tune`, `simulate` and
//! `compare`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{config_help, RunConfig, SigmaValue};
use crate::data::{load_csv, Panel, Standardizer};
use crate::error::{Error, ErrorKind, Result};
use crate::evaluation::{
    backtest_targets, fit_direct, read_report_csv, read_report_json, tolerance_table, tolerance_table_from_rows,
    write_forecasts_csv, write_report_csv, write_report_json, write_tolerance_csv, KernelFamily, ProxyChoice,
    SCHEMA_VERSION,
};
use crate::simulation::{rate_study, write_rate_curve_csv};
use crate::tuning::{cv_tune_sigma, ProxyMode, TuneResult};

#[derive(Debug, Parser)]
#[command(name = "k3prf", version, about = "Kernel three-pass regression filter forecasting")]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KernelArg {
    Linear,
    Poly2,
    Gaussian,
}

impl From<KernelArg> for KernelFamily {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Linear => KernelFamily::Linear,
            KernelArg::Poly2 => KernelFamily::Poly2,
            KernelArg::Gaussian => KernelFamily::Gaussian,
        }
    }
}

/// Flags that override keys of the config file.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// TOML config file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Panel CSV
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Target series (repeatable for backtest)
    #[arg(long, global = true)]
    pub target: Vec<String>,
    /// Comma-separated forecast horizons
    #[arg(long, global = true, value_delimiter = ',')]
    pub horizons: Vec<usize>,
    #[arg(long, global = true)]
    pub kernel: Option<KernelArg>,
    /// "auto" or a fixed Gaussian bandwidth
    #[arg(long, global = true)]
    pub sigma: Option<String>,
    /// auto:L or cols:a,b
    #[arg(long, global = true)]
    pub proxies: Option<String>,
    #[arg(long, global = true)]
    pub window_frac: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads, 0 = all cores
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit on the full sample; write fitted values and h-step forecasts
    #[command(after_long_help = config_help())]
    Forecast,
    /// Rolling-window out-of-sample comparison of all methods
    #[command(after_long_help = config_help())]
    Backtest,
    /// Two-fold cross-validation of the Gaussian bandwidth
    #[command(after_long_help = config_help())]
    Tune,
    /// Monte Carlo convergence-rate study
    #[command(after_long_help = config_help())]
    Simulate,
    /// Best-method frequency table from backtest reports
    #[command(after_long_help = config_help())]
    Compare {
        /// report.json or report.csv files
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Comma-separated tolerance levels in percent
        #[arg(long, value_delimiter = ',')]
        tolerances: Vec<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Forecast => "forecast",
            Command::Backtest => "backtest",
            Command::Tune => "tune",
            Command::Simulate => "simulate",
            Command::Compare { .. } => "compare",
        }
    }
}

/// A failure tagged with the stage that raised it.
#[derive(Debug)]
pub struct CliError {
    pub stage: &'static str,
    pub source: Error,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self.source.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}", self.stage, self.source)
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, CliError>;
}

impl<T> Stage<T> for Result<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, CliError> {
        self.map_err(|source| CliError { stage, source })
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Merges the config file with flag overrides and validates the result.
pub fn resolve_config(o: &Overrides) -> Result<RunConfig> {
    let mut c = match &o.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &o.data {
        c.data = Some(d.clone());
    }
    match o.target.len() {
        0 => {}
        1 => {
            c.target = Some(o.target[0].clone());
            c.targets.clear();
        }
        _ => c.targets = o.target.clone(),
    }
    if !o.horizons.is_empty() {
        c.horizons = o.horizons.clone();
    }
    if let Some(k) = o.kernel {
        c.kernel = k.into();
    }
    if let Some(s) = &o.sigma {
        c.sigma = SigmaValue::parse(s)?;
    }
    if let Some(p) = &o.proxies {
        c.proxies = p.clone();
    }
    if let Some(w) = o.window_frac {
        c.window_frac = w;
    }
    if let Some(s) = o.seed {
        c.seed = s;
    }
    if let Some(out) = &o.out {
        c.out = out.clone();
    }
    if let Some(t) = o.threads {
        c.threads = t;
    }
    c.validate()?;
    Ok(c)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("K3PRF_LOG", "warn")).try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let config = resolve_config(&cli.overrides).stage("config")?;
    if config.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(config.threads).build_global() {
            log::debug!("thread pool already initialised: {e}");
        }
    }
    fs::create_dir_all(&config.out).map_err(Error::from).stage("output")?;
    let outputs = match &cli.command {
        Command::Forecast => cmd_forecast(&config)?,
        Command::Backtest => cmd_backtest(&config)?,
        Command::Tune => cmd_tune(&config)?,
        Command::Simulate => cmd_simulate(&config)?,
        Command::Compare { reports, tolerances } => {
            let tol = if tolerances.is_empty() { config.tolerances.clone() } else { tolerances.clone() };
            cmd_compare(&config.out, reports, &tol)?
        }
    };
    write_manifest(&config, cli.command.name(), &outputs).stage("output")
}

fn load_panel(config: &RunConfig) -> CliResult<(Panel, Vec<String>)> {
    let path = config.data.as_ref().ok_or_else(|| Error::Config("no data file configured (set data or --data)".into())).stage("config")?;
    let targets = config.target_list().stage("config")?;
    if !path.is_file() {
        return Err(Error::Data(format!("data file {} not found", path.display()))).stage("data");
    }
    let panel = load_csv(path, &config.load_options(&targets[0]).stage("config")?).stage("data")?;
    for t in &targets {
        if panel.column_index(t).is_none() {
            return Err(Error::Data(format!("target '{t}' not found in {}", path.display()))).stage("data");
        }
    }
    Ok((panel, targets))
}

/// Full-sample standardized predictors and the proxy mode for one target.
fn full_sample_inputs(panel: &Panel, config: &RunConfig) -> CliResult<(crate::linalg::Mat, ProxyMode, Vec<String>)> {
    let bt = config.backtest_config().stage("config")?;
    let (raw, names) = panel.predictors(bt.exclude_target);
    let (x, _) = Standardizer::fit_transform(&raw, Some(&names)).stage("data")?;
    let (mode, proxy_names) = match &bt.proxies {
        ProxyChoice::Auto(l) => (ProxyMode::Auto(*l), Vec::new()),
        ProxyChoice::Columns(cols) => (ProxyMode::Columns(panel.columns(cols).stage("data")?), cols.clone()),
    };
    Ok((x, mode, proxy_names))
}

fn cmd_forecast(config: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let (base, targets) = load_panel(config)?;
    let kernel = config.kernel_choice().stage("config")?;
    let path = config.out.join("forecast.csv");
    let mut w = csv::Writer::from_path(&path).map_err(Error::from).stage("output")?;
    w.write_record(["schema_version", "target", "horizon", "kind", "origin", "period", "actual", "value", "sigma"])
        .map_err(Error::from)
        .stage("output")?;
    for target in &targets {
        let panel = base.with_target(target).stage("data")?;
        let (x, mode, names) = full_sample_inputs(&panel, config)?;
        let y = panel.y();
        let labels: Vec<&str> = panel.time_index().iter().map(|p| p.label.as_str()).collect();
        let t = y.len();
        for &h in &config.horizons {
            let tuned = if kernel.needs_tuning() {
                Some(cv_tune_sigma(&x, &y, &mode, h, &config.sigma_multipliers).stage("tuning")?.selected)
            } else {
                None
            };
            let spec = kernel.spec(tuned);
            let model = fit_direct(&x, &y, &mode, &names, &spec, h).stage("estimator")?;
            let fitted = model.fitted_values();
            let forecast = model.predict(&x.rows(t - 1, 1).into_owned()).stage("estimator")?[0];
            let sigma = tuned.map(|s| s.to_string()).unwrap_or_default();
            let mut rows = Vec::with_capacity(t - h + 1);
            for (i, v) in fitted.iter().enumerate() {
                rows.push([
                    "fitted".to_string(),
                    labels[i].to_string(),
                    labels[i + h].to_string(),
                    y[i + h].to_string(),
                    v.to_string(),
                ]);
            }
            rows.push(["forecast".into(), labels[t - 1].to_string(), String::new(), String::new(), forecast.to_string()]);
            for r in rows {
                let rec = [SCHEMA_VERSION.to_string(), target.clone(), h.to_string()]
                    .into_iter()
                    .chain(r)
                    .chain([sigma.clone()]);
                w.write_record(rec).map_err(Error::from).stage("output")?;
            }
        }
    }
    w.flush().map_err(Error::from).stage("output")?;
    Ok(vec![path])
}

fn cmd_backtest(config: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let (panel, targets) = load_panel(config)?;
    let bt = config.backtest_config().stage("config")?;
    let report = backtest_targets(&panel, &targets, &bt).stage("evaluation")?;
    let csv_path = config.out.join("report.csv");
    let json_path = config.out.join("report.json");
    let fc_path = config.out.join("forecasts.csv");
    write_report_csv(&csv_path, &report).stage("output")?;
    write_report_json(&json_path, &report).stage("output")?;
    write_forecasts_csv(&fc_path, &report).stage("output")?;
    Ok(vec![csv_path, json_path, fc_path])
}

#[derive(Serialize)]
struct TuneEntry {
    target: String,
    horizon: usize,
    #[serde(flatten)]
    result: TuneResult,
}

fn cmd_tune(config: &RunConfig) -> CliResult<Vec<PathBuf>> {
    if config.kernel != KernelFamily::Gaussian {
        return Err(Error::Config("tune selects the Gaussian bandwidth; set kernel = \"gaussian\"".into())).stage("config");
    }
    let (base, targets) = load_panel(config)?;
    let mut entries = Vec::new();
    for target in &targets {
        let panel = base.with_target(target).stage("data")?;
        let (x, mode, _) = full_sample_inputs(&panel, config)?;
        for &h in &config.horizons {
            let result = cv_tune_sigma(&x, &panel.y(), &mode, h, &config.sigma_multipliers).stage("tuning")?;
            log::info!("{target} h={h}: sigma {}", result.selected);
            entries.push(TuneEntry { target: target.clone(), horizon: h, result });
        }
    }
    let path = config.out.join("tune.json");
    let body = json!({ "schema_version": SCHEMA_VERSION, "results": entries });
    write_json(&path, &body).stage("output")?;
    Ok(vec![path])
}

fn cmd_simulate(config: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let base = crate::simulation::SimConfig { seed: config.seed, ..config.simulate.base.clone() };
    let curve = rate_study(&base, &config.simulate.grid, config.simulate.reps).stage("simulation")?;
    let path = config.out.join("rate_curve.csv");
    write_rate_curve_csv(&path, &curve).stage("output")?;
    Ok(vec![path])
}

fn cmd_compare(out: &Path, reports: &[PathBuf], tolerances: &[f64]) -> CliResult<Vec<PathBuf>> {
    let mut json_reports = Vec::new();
    let mut rows = Vec::new();
    for p in reports {
        if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            json_reports.push(read_report_json(p).stage("data")?);
        } else {
            rows.extend(read_report_csv(p).stage("data")?);
        }
    }
    let table = match (json_reports.is_empty(), rows.is_empty()) {
        (false, true) => tolerance_table(&json_reports, tolerances),
        (true, false) => tolerance_table_from_rows(&rows, tolerances),
        _ => Err(Error::Config("compare takes either JSON or CSV reports, not both".into())),
    }
    .stage("evaluation")?;
    for note in &table.tie_breaks {
        log::info!("{note}");
    }
    let path = out.join("tolerance.csv");
    write_tolerance_csv(&path, &table).stage("output")?;
    Ok(vec![path])
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// `manifest.json`: command, config hash, seed, versions and a digest of
/// every output file.
fn write_manifest(config: &RunConfig, command: &str, outputs: &[PathBuf]) -> Result<()> {
    let files = outputs
        .iter()
        .map(|p| {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(json!({ "file": name, "sha256": sha256_file(p)? }))
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config_hash": config.hash(),
        "seed": config.seed,
        "versions": { "k3prf": env!("CARGO_PKG_VERSION") },
        "config": config.canonical(),
        "outputs": files,
    });
    write_json(&config.out.join("manifest.json"), &manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_file() {
        let cli = Cli::try_parse_from(["k3prf", "--horizons", "1,4", "--kernel", "linear", "--sigma", "2.5", "--seed", "9", "tune"]).unwrap();
        let c = resolve_config(&cli.overrides).unwrap();
        assert_eq!(c.horizons, vec![1, 4]);
        assert_eq!(c.kernel, KernelFamily::Linear);
        assert_eq!(c.sigma, SigmaValue::Value(2.5));
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn bad_override_is_config_error() {
        let cli = Cli::try_parse_from(["k3prf", "--proxies", "bogus", "forecast"]).unwrap();
        let e = run(&cli).unwrap_err();
        assert_eq!((e.stage, e.exit_code()), ("config", 2));
    }

    #[test]
    fn exit_codes_follow_error_kind() {
        let code = |source| CliError { stage: "t", source }.exit_code();
        assert_eq!(code(Error::Config("x".into())), 2);
        assert_eq!(code(Error::Data("x".into())), 3);
        assert_eq!(code(Error::RankDeficient { stage: "x".into() }), 4);
    }
}
