//! Monte Carlo laboratory for the latent-factor data-generating process.
//!
//! Features are generated explicitly, `φ(X) = F Φ' + ε`, so that the
//! feature dimension `M` is known and convergence rates in
//! `δ_MT = min(√M, √T)` can be measured. Proxies load only on the relevant
//! factors `f`; the target loads only on `f`.
//!
//! Replication `r` of grid point `g` draws from a ChaCha8 generator seeded
//! with the master seed and switched to stream `(g << 32) | r`, so results do
//! not depend on scheduling.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{fit, K3prfFit, ProxyProvenance, ProxySet};
use crate::evaluation::SCHEMA_VERSION;
use crate::kernel::{explicit_poly2_features, KernelSpec};
use crate::linalg::{demean_columns, lstsq_vec, with_intercept, Mat, SymFactor, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub t: usize,
    pub m: usize,
    /// Raw input dimension for the polynomial arm.
    pub n: Option<usize>,
    pub k_f: usize,
    pub k_g: usize,
    pub l: usize,
    pub sigma_eps: f64,
    pub sigma_eta: f64,
    pub sigma_omega: f64,
    pub loading_scale: f64,
    /// Variances of the relevant factors (diagonal of Δ_f).
    pub delta_f: Vec<f64>,
    /// Variances of the irrelevant factors.
    pub delta_g: Vec<f64>,
    pub beta_f: Vec<f64>,
    pub beta0: f64,
    pub lambda0: f64,
    /// Orthonormalize Φ so that Φ'Φ / M = I exactly.
    pub orthonormal_loadings: bool,
    /// Residualize g on (1, f) in sample, making them exactly uncorrelated.
    pub orthogonalize_g: bool,
    /// AR(1) coefficient of the feature noise over time.
    pub eps_ar: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            t: 100,
            m: 100,
            n: None,
            k_f: 1,
            k_g: 1,
            l: 1,
            sigma_eps: 1.0,
            sigma_eta: 1.0,
            sigma_omega: 1.0,
            loading_scale: 1.0,
            delta_f: vec![1.0],
            delta_g: vec![2.0],
            beta_f: vec![1.0],
            beta0: 0.5,
            lambda0: 0.0,
            orthonormal_loadings: true,
            orthogonalize_g: false,
            eps_ar: 0.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn k(&self) -> usize {
        self.k_f + self.k_g
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.t < 5 || self.m == 0 || self.k_f == 0 || self.l == 0 {
            return bad(format!("simulation needs T >= 5, M >= 1, K_f >= 1, L >= 1 (got T={}, M={}, K_f={}, L={})", self.t, self.m, self.k_f, self.l));
        }
        if self.delta_f.len() != self.k_f || self.delta_g.len() != self.k_g || self.beta_f.len() != self.k_f {
            return bad("delta_f, beta_f must have K_f entries and delta_g K_g entries".into());
        }
        if self.delta_f.iter().chain(&self.delta_g).any(|v| !(*v > 0.0)) {
            return bad("factor variances must be positive".into());
        }
        let mut all: Vec<f64> = self.delta_f.iter().chain(&self.delta_g).copied().collect();
        all.sort_by(f64::total_cmp);
        if all.windows(2).any(|w| w[0] == w[1]) {
            return bad("factor variances must be distinct".into());
        }
        if self.beta_f.iter().any(|b| *b == 0.0) {
            return bad("relevant coefficients must be non-zero".into());
        }
        if self.orthonormal_loadings && self.m < self.k() {
            return bad(format!("orthonormal loadings need M >= K, got M={}, K={}", self.m, self.k()));
        }
        if [self.sigma_eps, self.sigma_eta, self.sigma_omega].iter().any(|s| !(*s >= 0.0)) {
            return bad("noise scales must be non-negative".into());
        }
        if !(self.eps_ar.abs() < 1.0) {
            return bad("eps_ar must lie in (-1, 1)".into());
        }
        if self.n == Some(0) {
            return bad("n must be positive when set".into());
        }
        Ok(())
    }

    /// Population R² of the target on the factors.
    pub fn population_r2(&self) -> f64 {
        let signal: f64 = self.beta_f.iter().zip(&self.delta_f).map(|(b, d)| b * b * d).sum();
        signal / (signal + self.sigma_eta * self.sigma_eta)
    }
}

/// One draw from the data-generating process.
#[derive(Debug, Clone)]
pub struct SimDraw {
    pub phi: Mat,
    pub y: Vector,
    pub z: Mat,
    /// Relevant factors, T x K_f.
    pub f: Mat,
    /// Irrelevant factors, T x K_g.
    pub g: Mat,
    /// Feature loadings, M x K (relevant columns first).
    pub loadings: Mat,
    /// Proxy loadings on the relevant factors, L x K_f.
    pub lambda_f: Mat,
    pub beta_f: Vector,
    pub beta0: f64,
    pub lambda0: f64,
    /// `β0 + f_t' β_f`.
    pub conditional_mean: Vector,
    pub config: SimConfig,
}

impl SimDraw {
    /// All factors `[f, g]`.
    pub fn factors(&self) -> Mat {
        crate::baselines::concat_columns(&self.f, &self.g)
    }
}

fn normal_mat(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Mat {
    Mat::from_fn(r, c, |_, _| {
        let v: f64 = StandardNormal.sample(rng);
        scale * v
    })
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn simulate(config: &SimConfig) -> Result<SimDraw> {
    simulate_with(config, &mut rng_for(config.seed, 0))
}

fn simulate_with(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Result<SimDraw> {
    cfg.validate()?;
    let (t, m, k_f, k_g, l) = (cfg.t, cfg.m, cfg.k_f, cfg.k_g, cfg.l);
    let k = k_f + k_g;
    let sd: Vec<f64> = cfg.delta_f.iter().chain(&cfg.delta_g).map(|v| v.sqrt()).collect();
    let factors = Mat::from_fn(t, k, |_, j| {
        let v: f64 = StandardNormal.sample(rng);
        sd[j] * v
    });
    let f = factors.columns(0, k_f).into_owned();
    let mut g = factors.columns(k_f, k_g).into_owned();
    if cfg.orthogonalize_g && k_g > 0 {
        let design = with_intercept(&f);
        for j in 0..k_g {
            let col = g.column(j).into_owned();
            let coef = lstsq_vec(&design, &col, "g orthogonalization")?;
            g.set_column(j, &(col - &design * coef));
        }
    }
    let all = crate::baselines::concat_columns(&f, &g);

    let raw = normal_mat(rng, m, k, 1.0);
    let loadings = if cfg.orthonormal_loadings {
        let q = raw.qr().q();
        q * ((m as f64).sqrt() * cfg.loading_scale)
    } else {
        raw * cfg.loading_scale
    };
    let mut eps = normal_mat(rng, t, m, cfg.sigma_eps);
    if cfg.eps_ar != 0.0 {
        let scale = (1.0 - cfg.eps_ar * cfg.eps_ar).sqrt();
        for i in 1..t {
            for j in 0..m {
                eps[(i, j)] = cfg.eps_ar * eps[(i - 1, j)] + scale * eps[(i, j)];
            }
        }
    }
    let phi = &all * loadings.transpose() + eps;

    let mut lambda_f = normal_mat(rng, l, k_f, 1.0);
    // shift the diagonal so Λ_f stays well away from singular
    for i in 0..l.min(k_f) {
        lambda_f[(i, i)] += 2.0;
    }
    let omega = normal_mat(rng, t, l, cfg.sigma_omega);
    let z = (&f * lambda_f.transpose()).add_scalar(cfg.lambda0) + omega;

    let beta_f = Vector::from_vec(cfg.beta_f.clone());
    let conditional_mean = (&f * &beta_f).add_scalar(cfg.beta0);
    let eta = Vector::from_iterator(t, (0..t).map(|_| {
        let v: f64 = StandardNormal.sample(rng);
        cfg.sigma_eta * v
    }));
    let y = &conditional_mean + eta;
    Ok(SimDraw { phi, y, z, f, g, loadings, lambda_f, beta_f, beta0: cfg.beta0, lambda0: cfg.lambda0, conditional_mean, config: cfg.clone() })
}

/// Linear-kernel fit on the explicit features with the draw's proxies.
pub fn fit_draw(draw: &SimDraw) -> Result<K3prfFit> {
    let proxies = ProxySet::new(draw.z.clone(), ProxyProvenance::TheoryGuided((0..draw.z.ncols()).map(|i| format!("z{i}")).collect()))?;
    fit(&draw.phi, &draw.y, &proxies, &KernelSpec::Linear)
}

/// Rotation matrices linking estimated and true factors and coefficients.
#[derive(Debug, Clone)]
pub struct Rotations {
    /// L x K_f.
    pub h_f: Mat,
    /// L x K_f.
    pub g_beta: Mat,
    pub f_a: Mat,
    pub f_b: Mat,
}

impl Rotations {
    /// `max |H_f' G_β - I|`.
    pub fn identity_error(&self) -> f64 {
        let prod = self.h_f.transpose() * &self.g_beta;
        (prod - Mat::identity(self.h_f.ncols(), self.h_f.ncols())).amax()
    }
}

/// `H_f = F_A F_B^{-1} Λ_f Δ_f` and
/// `G_β = F_A^{-1} F_B [Λ_f Δ_f³ Λ_f']^{-1} Λ_f Δ_f²` with
/// `F_A = Z'JZ / T` and `F_B = Z'J φφ' J Z / (M T²)`.
pub fn compute_rotations(draw: &SimDraw) -> Result<Rotations> {
    let t = draw.phi.nrows() as f64;
    let m = draw.phi.ncols() as f64;
    let zc = demean_columns(&draw.z);
    let f_a = zc.transpose() * &zc / t;
    let pz = draw.phi.transpose() * &zc;
    let f_b = pz.transpose() * &pz / (m * t * t);
    let delta = Mat::from_diagonal(&Vector::from_vec(draw.config.delta_f.clone()));
    let d2 = &delta * &delta;
    let d3 = &d2 * &delta;
    let lf = &draw.lambda_f;
    let fb = SymFactor::new(&f_b, "F_B")?;
    let fa = SymFactor::new(&f_a, "F_A")?;
    let h_f = &f_a * fb.solve(&(lf * &delta));
    let inner = SymFactor::new(&(lf * &d3 * lf.transpose()), "Λ_f Δ_f³ Λ_f'")?;
    let g_beta = fa.solve(&(&f_b * inner.solve(&(lf * &d2))));
    Ok(Rotations { h_f, g_beta, f_a, f_b })
}

/// Error summaries of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrawErrors {
    /// Mean over t of `‖F̂_t - H_f f_t‖`.
    pub factor: f64,
    /// `‖β̂ - G_β β_f‖`.
    pub coefficient: f64,
    /// Mean over t of `|ŷ_t - E_t y|`.
    pub forecast: f64,
    /// `max |H_f' G_β - I|`.
    pub identity: f64,
}

pub fn draw_errors(draw: &SimDraw, fit: &K3prfFit) -> Result<DrawErrors> {
    let rot = compute_rotations(draw)?;
    let f_hat = fit.factors();
    let target = &draw.f * rot.h_f.transpose();
    let t = f_hat.nrows();
    let factor = (0..t).map(|i| (f_hat.row(i) - target.row(i)).norm()).sum::<f64>() / t as f64;
    let coefficient = (fit.beta_hat() - &rot.g_beta * &draw.beta_f).norm();
    let yhat = fit.fitted_values();
    let forecast = (0..t).map(|i| (yhat[i] - draw.conditional_mean[i]).abs()).sum::<f64>() / t as f64;
    Ok(DrawErrors { factor, coefficient, forecast, identity: rot.identity_error() })
}

/// Median errors at one `(M, T)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub m: usize,
    pub t: usize,
    pub delta: f64,
    pub reps: usize,
    pub failures: usize,
    pub factor: f64,
    pub coefficient: f64,
    pub forecast: f64,
    pub identity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub points: Vec<RatePoint>,
    /// Log-log slopes against `δ_MT`; NaN with fewer than four distinct δ.
    pub factor_slope: f64,
    pub coefficient_slope: f64,
    pub forecast_slope: f64,
}

pub fn delta_mt(m: usize, t: usize) -> f64 {
    (m.min(t) as f64).sqrt()
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let mut distinct: Vec<f64> = x.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 || x.len() != y.len() {
        return f64::NAN;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Median errors over `reps` replications at each `(M, T)` grid point.
pub fn rate_study(base: &SimConfig, grid: &[(usize, usize)], reps: usize) -> Result<RateCurve> {
    if grid.is_empty() || reps == 0 {
        return Err(Error::Config("rate study needs a non-empty grid and at least one replication".into()));
    }
    for &(m, t) in grid {
        SimConfig { m, t, ..base.clone() }.validate()?;
    }
    let units: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..reps).map(move |r| (g, r))).collect();
    let results: Vec<Option<DrawErrors>> = units
        .par_iter()
        .map(|&(gi, r)| {
            let (m, t) = grid[gi];
            let cfg = SimConfig { m, t, ..base.clone() };
            let mut rng = rng_for(base.seed, ((gi as u64) << 32) | r as u64);
            let draw = simulate_with(&cfg, &mut rng).ok()?;
            let fit = fit_draw(&draw).ok()?;
            draw_errors(&draw, &fit).ok()
        })
        .collect();
    let mut points = Vec::with_capacity(grid.len());
    for (gi, &(m, t)) in grid.iter().enumerate() {
        let ok: Vec<DrawErrors> = results[gi * reps..(gi + 1) * reps].iter().flatten().copied().collect();
        let pick = |f: fn(&DrawErrors) -> f64| median(ok.iter().map(f).collect());
        points.push(RatePoint {
            m,
            t,
            delta: delta_mt(m, t),
            reps,
            failures: reps - ok.len(),
            factor: pick(|e| e.factor),
            coefficient: pick(|e| e.coefficient),
            forecast: pick(|e| e.forecast),
            identity: pick(|e| e.identity),
        });
    }
    let deltas: Vec<f64> = points.iter().map(|p| p.delta).collect();
    let slope = |f: fn(&RatePoint) -> f64| log_log_slope(&deltas, &points.iter().map(f).collect::<Vec<_>>());
    Ok(RateCurve {
        factor_slope: slope(|p| p.factor),
        coefficient_slope: slope(|p| p.coefficient),
        forecast_slope: slope(|p| p.forecast),
        points,
    })
}

pub fn write_rate_curve_csv(path: &Path, curve: &RateCurve) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["schema_version", "m", "t", "delta_mt", "reps", "failures", "factor_err", "coef_err", "forecast_err", "identity_err"])?;
    for p in &curve.points {
        w.write_record([
            SCHEMA_VERSION.to_string(),
            p.m.to_string(),
            p.t.to_string(),
            p.delta.to_string(),
            p.reps.to_string(),
            p.failures.to_string(),
            p.factor.to_string(),
            p.coefficient.to_string(),
            p.forecast.to_string(),
            p.identity.to_string(),
        ])?;
    }
    let mut slopes = vec![String::new(); 10];
    slopes[0] = SCHEMA_VERSION.to_string();
    slopes[1] = "slope".into();
    slopes[6] = curve.factor_slope.to_string();
    slopes[7] = curve.coefficient_slope.to_string();
    slopes[8] = curve.forecast_slope.to_string();
    w.write_record(&slopes)?;
    w.flush()?;
    Ok(())
}

/// Polynomial arm: raw inputs `X = F Ψ' + noise` with `N` columns. Returns
/// the largest absolute gap between the Polynomial(2) kernel fit and the
/// linear fit on the explicit degree-2 features.
pub fn poly2_arm_gap(config: &SimConfig, offset: f64) -> Result<f64> {
    let n = config.n.ok_or_else(|| Error::Config("the polynomial arm needs n".into()))?;
    let mut rng = rng_for(config.seed, u64::MAX);
    let small = SimConfig { m: n, orthonormal_loadings: n >= config.k(), ..config.clone() };
    let draw = simulate_with(&small, &mut rng)?;
    let spec = KernelSpec::poly2(offset);
    let proxies = ProxySet::new(draw.z.clone(), ProxyProvenance::Auto(draw.z.ncols()))?;
    let kernel = fit(&draw.phi, &draw.y, &proxies, &spec)?;
    let explicit = fit(&explicit_poly2_features(&draw.phi, offset), &draw.y, &proxies, &KernelSpec::Linear)?;
    Ok((kernel.fitted_values() - explicit.fitted_values()).amax())
}

/// Draws a random seed from the master seed, for callers that need an
/// independent sub-stream.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    rng_for(master, stream).random()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ols;

    fn noiseless(k_f: usize, k_g: usize) -> SimConfig {
        SimConfig {
            t: 60,
            m: 40,
            k_f,
            k_g,
            l: k_f,
            sigma_eps: 0.0,
            sigma_eta: 0.0,
            sigma_omega: 0.0,
            delta_f: (0..k_f).map(|i| 1.0 + 0.5 * i as f64).collect(),
            delta_g: (0..k_g).map(|i| 5.0 + i as f64).collect(),
            beta_f: (0..k_f).map(|i| 1.0 - 0.3 * i as f64).collect(),
            orthogonalize_g: k_g > 0,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn zero_noise_is_exact_factor_model() {
        let cfg = noiseless(2, 1);
        let d = simulate(&cfg).unwrap();
        let exact = d.factors() * d.loadings.transpose();
        assert!((&d.phi - exact).amax() < 1e-12);
        assert!((&d.y - &d.conditional_mean).amax() < 1e-12);
        let ptp = d.loadings.transpose() * &d.loadings / cfg.m as f64;
        assert!((ptp - Mat::identity(3, 3)).amax() < 1e-10);
    }

    #[test]
    fn noiseless_fit_recovers_conditional_mean() {
        for (k_f, k_g) in [(1, 0), (2, 0), (1, 2), (2, 1)] {
            let d = simulate(&noiseless(k_f, k_g)).unwrap();
            let fit = fit_draw(&d).unwrap();
            let err = (fit.fitted_values() - &d.conditional_mean).amax();
            assert!(err < 1e-8, "K_f={k_f} K_g={k_g}: {err}");
            assert!(compute_rotations(&d).unwrap().identity_error() < 1e-6);
        }
    }

    #[test]
    fn scalar_rotation_product_is_one() {
        let mut cfg = noiseless(1, 0);
        cfg.sigma_eps = 1.0;
        cfg.sigma_omega = 0.5;
        let d = simulate(&cfg).unwrap();
        let r = compute_rotations(&d).unwrap();
        assert_eq!(r.h_f.shape(), (1, 1));
        assert!((r.h_f[(0, 0)] * r.g_beta[(0, 0)] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn factor_covariance_converges() {
        let cfg = SimConfig { t: 10_000, m: 3, k_f: 2, k_g: 1, l: 2, delta_f: vec![1.0, 0.5], delta_g: vec![2.0], beta_f: vec![1.0, 1.0], seed: 3, ..Default::default() };
        let d = simulate(&cfg).unwrap();
        let fc = demean_columns(&d.factors());
        let cov = fc.transpose() * &fc / cfg.t as f64;
        let target = Mat::from_diagonal(&Vector::from_vec(vec![1.0, 0.5, 2.0]));
        assert!((cov - target).amax() < 5.0 / (cfg.t as f64).sqrt());
    }

    #[test]
    fn fitted_r2_near_population() {
        let cfg = SimConfig { t: 2000, m: 200, k_f: 1, k_g: 0, l: 1, delta_g: vec![], sigma_eta: 0.7, sigma_omega: 0.3, seed: 5, ..Default::default() };
        let d = simulate(&cfg).unwrap();
        let fit = fit_draw(&d).unwrap();
        let r2 = fit.in_sample_r2(&d.y);
        assert!((r2 - cfg.population_r2()).abs() < 0.05, "{r2} vs {}", cfg.population_r2());
    }

    #[test]
    fn irrelevant_factors_do_not_move_noiseless_forecast() {
        let base = simulate(&noiseless(1, 0)).unwrap();
        let mut cfg = noiseless(1, 2);
        cfg.delta_g = vec![50.0, 80.0];
        let with_g = simulate(&cfg).unwrap();
        let a = fit_draw(&base).unwrap().fitted_values() - &base.conditional_mean;
        let b = fit_draw(&with_g).unwrap().fitted_values() - &with_g.conditional_mean;
        assert!(a.amax() < 1e-6 && b.amax() < 1e-6);
    }

    #[test]
    fn pca_misses_dominant_irrelevant_factor() {
        let cfg = SimConfig { t: 100, m: 50, delta_f: vec![1.0], delta_g: vec![10.0], sigma_eta: 0.5, sigma_eps: 0.5, sigma_omega: 0.5, seed: 8, ..Default::default() };
        let d = simulate(&cfg).unwrap();
        let prf = fit_draw(&d).unwrap().in_sample_r2(&d.y);
        let x = crate::data::Standardizer::fit_transform(&d.phi, None).unwrap().0;
        let pc = crate::baselines::pca_factors(&x, 1).unwrap();
        let r2 = ols(&with_intercept(&pc.factors), &d.y, "pc").unwrap().r_squared;
        assert!(prf - r2 >= 0.3, "{prf} {r2}");
    }

    #[test]
    fn poly2_arm_matches_explicit() {
        let cfg = SimConfig { t: 40, n: Some(5), seed: 2, ..Default::default() };
        assert!(poly2_arm_gap(&cfg, 1.0).unwrap() < 1e-8);
    }

    #[test]
    fn rate_study_is_deterministic() {
        let base = SimConfig { seed: 9, ..Default::default() };
        let grid = [(20, 20), (30, 30)];
        let a = rate_study(&base, &grid, 4).unwrap();
        let b = rate_study(&base, &grid, 4).unwrap();
        assert_eq!(a.points, b.points);
        assert!(a.factor_slope.is_nan());
        assert_eq!(a.points[0].failures, 0);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(simulate(&SimConfig { delta_f: vec![2.0], delta_g: vec![2.0], ..Default::default() }).is_err());
        assert!(simulate(&SimConfig { beta_f: vec![0.0], ..Default::default() }).is_err());
        assert!(simulate(&SimConfig { m: 1, ..Default::default() }).is_err());
        assert!(simulate(&SimConfig { k_f: 2, ..Default::default() }).is_err());
    }

    #[test]
    fn log_log_slope_of_power_law() {
        let x = [2.0, 4.0, 8.0, 16.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 / v).collect();
        assert!((log_log_slope(&x, &y) + 1.0).abs() < 1e-12);
    }
}
