//! Competitor forecasting methods: principal-component regression and its
//! squared variants, kernel PCA regression, direct AR(p) and the diffusion
//! index, plus the eigenvalue-ratio factor-count selector.
//!
//! All forecasters share one convention. `x` is a T x N window of
//! standardized predictors and `y` the target observed over the same T
//! periods. For horizon `h` the model regresses `y[t + h]` on features dated
//! `t` for every `t < T - h`, then forecasts `y[T - 1 + h]` from the features
//! of the last row.

use crate::data::Standardizer;
use crate::error::{Error, Result};
use crate::kernel::{center_cross_gram, center_gram, cross_gram, gram, GramMatrix, KernelSpec};
use crate::linalg::{ols, sym_eigen_desc, with_intercept, Mat, Ols, Vector};

/// Eigenvalues below this fraction of the largest one are treated as zero.
pub const EIGEN_FLOOR: f64 = 1e-10;

/// Principal-component factors of a predictor window.
#[derive(Debug, Clone)]
pub struct FactorExtract {
    /// T x k, normalised so that `F'F / T = I`.
    pub factors: Mat,
    /// All eigenvalues of `X X' / (T N)`, descending and clipped at zero.
    pub eigenvalues: Vec<f64>,
    pub k_selected: usize,
}

/// Top-`k` principal components from the T x T dual problem `X X' / (T N)`.
///
/// Each factor is `sqrt(T)` times a unit eigenvector, with its
/// largest-magnitude coordinate made positive.
pub fn pca_factors(x: &Mat, k: usize) -> Result<FactorExtract> {
    let (t, n) = x.shape();
    if k > t.min(n) {
        return Err(Error::invalid(format!("requested {k} factors from a {t}x{n} panel")));
    }
    let s = (x * x.transpose()) / (t * n) as f64;
    let (values, vectors) = sym_eigen_desc(&s);
    let mut factors = Mat::zeros(t, k);
    for j in 0..k {
        let mut v = vectors.column(j).into_owned();
        fix_sign(&mut v);
        factors.set_column(j, &(v * (t as f64).sqrt()));
    }
    Ok(FactorExtract {
        factors,
        eigenvalues: values.into_iter().map(|v| v.max(0.0)).collect(),
        k_selected: k,
    })
}

/// Makes the largest-magnitude coordinate positive (first one on ties).
fn fix_sign(v: &mut Vector) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v.len() > 0 && v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Number of factors maximising `lambda_k / lambda_{k+1}` over `1..=k_max`.
/// Ties go to the smaller `k`.
pub fn eigenvalue_ratio_k(eigenvalues: &[f64], k_max: usize) -> Result<usize> {
    if k_max == 0 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    if eigenvalues.iter().all(|&v| !(v > 0.0)) {
        return Err(Error::invalid("all eigenvalues are zero"));
    }
    if eigenvalues.len() < k_max + 1 || eigenvalues[..=k_max].iter().any(|&v| !(v > 0.0)) {
        return Err(Error::invalid(format!("eigenvalue ratio test needs {} positive eigenvalues", k_max + 1)));
    }
    let mut best_k = 1;
    let mut best_ratio = eigenvalues[0] / eigenvalues[1];
    for k in 2..=k_max {
        let ratio = eigenvalues[k - 1] / eigenvalues[k];
        if ratio > best_ratio {
            best_ratio = ratio;
            best_k = k;
        }
    }
    Ok(best_k)
}

/// Eigenvalue-ratio choice with `k_max` capped by the number of eigenvalues
/// that are numerically positive.
pub fn select_factor_count(eigenvalues: &[f64], k_max: usize) -> Result<usize> {
    let top = eigenvalues.first().copied().unwrap_or(0.0);
    let positive = eigenvalues.iter().take_while(|&&v| v > EIGEN_FLOOR * top).count();
    let cap = k_max.min(positive.saturating_sub(1));
    if cap == 0 {
        return if positive >= 1 { Ok(1) } else { Err(Error::invalid("all eigenvalues are zero")) };
    }
    eigenvalue_ratio_k(&eigenvalues[..positive], cap)
}

/// A direct h-step forecast and the regression behind it.
#[derive(Debug, Clone)]
pub struct Forecast {
    pub value: f64,
    pub regression: Ols,
    /// Number of factors used (zero for pure AR).
    pub factors_used: usize,
}

impl Forecast {
    pub fn in_sample_r2(&self) -> f64 {
        self.regression.r_squared
    }
}

/// Regress `y[t + h]` on `[1, features_t]` for `start <= t < T - h` and
/// forecast from the last row of `features`.
fn direct_forecast(features: &Mat, y: &Vector, h: usize, start: usize, stage: &str, factors_used: usize) -> Result<Forecast> {
    let t = features.nrows();
    if y.len() != t {
        return Err(Error::DimensionMismatch { context: "target length", expected: t, got: y.len() });
    }
    if h == 0 {
        return Err(Error::invalid("forecast horizon must be at least 1"));
    }
    if t < h + start + 2 {
        return Err(Error::InsufficientData(format!("{stage}: {t} rows for horizon {h}")));
    }
    let rows = t - h - start;
    let design = with_intercept(&features.rows(start, rows).into_owned());
    let target = Vector::from_iterator(rows, (start..t - h).map(|i| y[i + h]));
    let regression = ols(&design, &target, stage)?;
    let last = with_intercept(&features.rows(t - 1, 1).into_owned());
    let value = (last * &regression.coefficients)[0];
    Ok(Forecast { value, regression, factors_used })
}

fn squares(m: &Mat) -> Mat {
    m.map(|v| v * v)
}

/// PC regression: `y[t + h]` on the top `k` principal components.
pub fn pc_regression_forecast(x: &Mat, y: &Vector, h: usize, k: usize) -> Result<Forecast> {
    if k == 0 {
        return Err(Error::invalid("PC regression needs at least one factor"));
    }
    let pcs = pca_factors(x, k)?;
    direct_forecast(&pcs.factors, y, h, 0, "PC regression", k)
}

/// PC-Sq: regress on the principal components and their squares.
pub fn pc_sq_forecast(x: &Mat, y: &Vector, h: usize, k: usize) -> Result<Forecast> {
    if k == 0 {
        return Err(Error::invalid("PC-Sq regression needs at least one factor"));
    }
    let pcs = pca_factors(x, k)?;
    let features = concat_columns(&pcs.factors, &squares(&pcs.factors));
    direct_forecast(&features, y, h, 0, "PC-Sq regression", k)
}

/// Squared-PC predictor set: `[X, standardize(X ⊙ X)]`.
pub fn squared_augmented(x: &Mat) -> Result<Mat> {
    let sq = squares(x);
    let (std, _) = Standardizer::fit_transform(&sq, None)?;
    Ok(concat_columns(x, &std))
}

/// Sq-PC: principal components of the predictors augmented with their
/// (re-standardized) squares.
pub fn sq_pc_forecast(x: &Mat, y: &Vector, h: usize, k: usize) -> Result<Forecast> {
    if k == 0 {
        return Err(Error::invalid("Sq-PC regression needs at least one factor"));
    }
    let aug = squared_augmented(x)?;
    let pcs = pca_factors(&aug, k)?;
    direct_forecast(&pcs.factors, y, h, 0, "Sq-PC regression", k)
}

pub(crate) fn concat_columns(a: &Mat, b: &Mat) -> Mat {
    let mut out = Mat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Kernel principal components fitted on a training block.
#[derive(Debug, Clone)]
pub struct KernelPca {
    spec: KernelSpec,
    x_train: Mat,
    gram: GramMatrix,
    /// Eigenvectors scaled by `1 / sqrt(eigenvalue)`, T x k.
    alphas: Mat,
    eigenvalues: Vec<f64>,
    train_factors: Mat,
}

impl KernelPca {
    /// Fits up to `k` components; components with eigenvalue below
    /// `EIGEN_FLOOR` times the largest are dropped.
    pub fn fit(x: &Mat, spec: &KernelSpec, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("kernel PCA needs at least one component"));
        }
        let k_gram = gram(spec, x)?;
        let kc = center_gram(&k_gram);
        let (values, vectors) = sym_eigen_desc(kc.values());
        let top = values.first().copied().unwrap_or(0.0);
        if !(top > 0.0) {
            return Err(Error::invalid("centered gram has no positive eigenvalue"));
        }
        let keep = values.iter().take(k).take_while(|&&v| v > EIGEN_FLOOR * top).count();
        let mut alphas = Mat::zeros(x.nrows(), keep);
        for j in 0..keep {
            let mut v = vectors.column(j).into_owned();
            fix_sign(&mut v);
            alphas.set_column(j, &(v / values[j].sqrt()));
        }
        let train_factors = kc.values() * &alphas;
        Ok(KernelPca {
            spec: *spec,
            x_train: x.clone(),
            gram: k_gram,
            alphas,
            eigenvalues: values.into_iter().map(|v| v.max(0.0)).collect(),
            train_factors,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn num_components(&self) -> usize {
        self.alphas.ncols()
    }

    pub fn train_factors(&self) -> &Mat {
        &self.train_factors
    }

    /// Keeps the first `k` components.
    pub fn truncate(&mut self, k: usize) {
        let k = k.min(self.num_components());
        self.alphas = self.alphas.columns(0, k).into_owned();
        self.train_factors = self.train_factors.columns(0, k).into_owned();
    }

    /// Eigenvalue-ratio choice of the component count, capped at `k_max`.
    pub fn ratio_k(&self, k_max: usize) -> Result<usize> {
        Ok(select_factor_count(&self.eigenvalues, k_max)?.min(self.num_components()))
    }

    /// Projects new rows through the centered cross-Gram.
    pub fn transform(&self, x_new: &Mat) -> Result<Mat> {
        let kappa = cross_gram(&self.spec, &self.x_train, x_new)?;
        Ok(center_cross_gram(&kappa, &self.gram)? * &self.alphas)
    }
}

/// kPCA regression. Components are fitted on the rows that have an observed
/// target (`t < T - h`); the last row is projected out of sample.
pub fn kpca_regression_forecast(x: &Mat, y: &Vector, h: usize, spec: &KernelSpec, k: usize) -> Result<Forecast> {
    let t = x.nrows();
    if y.len() != t {
        return Err(Error::DimensionMismatch { context: "target length", expected: t, got: y.len() });
    }
    if h == 0 || t < h + 3 {
        return Err(Error::InsufficientData(format!("kPCA regression: {t} rows for horizon {h}")));
    }
    let rows = t - h;
    let train = x.rows(0, rows).into_owned();
    let kpca = KernelPca::fit(&train, spec, k)?;
    let target = Vector::from_iterator(rows, (0..rows).map(|i| y[i + h]));
    let regression = ols(&with_intercept(kpca.train_factors()), &target, "kPCA regression")?;
    let last = kpca.transform(&x.rows(t - 1, 1).into_owned())?;
    let value = (with_intercept(&last) * &regression.coefficients)[0];
    Ok(Forecast { value, regression, factors_used: kpca.num_components() })
}

/// kPCA regression with the component count chosen by the eigenvalue-ratio
/// test on the centered Gram spectrum.
pub fn kpca_ratio_forecast(x: &Mat, y: &Vector, h: usize, spec: &KernelSpec, k_max: usize) -> Result<Forecast> {
    let t = x.nrows();
    if y.len() != t {
        return Err(Error::DimensionMismatch { context: "target length", expected: t, got: y.len() });
    }
    if h == 0 || t < h + 3 {
        return Err(Error::InsufficientData(format!("kPCA regression: {t} rows for horizon {h}")));
    }
    let rows = t - h;
    let train = x.rows(0, rows).into_owned();
    let target = Vector::from_iterator(rows, (0..rows).map(|i| y[i + h]));
    let last = x.rows(t - 1, 1).into_owned();
    let mut kpca = KernelPca::fit(&train, spec, k_max)?;
    let k = kpca.ratio_k(k_max)?;
    kpca.truncate(k);
    let regression = ols(&with_intercept(kpca.train_factors()), &target, "kPCA regression")?;
    let value = (with_intercept(&kpca.transform(&last)?) * &regression.coefficients)[0];
    Ok(Forecast { value, regression, factors_used: k })
}

/// Direct AR(p) model: `y[t + h]` on `(1, y_t, ..., y_{t-p+1})`.
#[derive(Debug, Clone)]
pub struct ArModel {
    pub p: usize,
    /// Intercept followed by the `p` lag coefficients.
    pub coefficients: Vector,
}

fn lag_matrix(y: &Vector, p: usize) -> Mat {
    let t = y.len();
    Mat::from_fn(t, p, |i, j| if i >= j { y[i - j] } else { f64::NAN })
}

pub fn fit_ar(y: &Vector, p: usize, h: usize) -> Result<ArModel> {
    let f = ar_forecast(y, p, h)?;
    Ok(ArModel { p, coefficients: f.regression.coefficients })
}

pub fn ar_forecast(y: &Vector, p: usize, h: usize) -> Result<Forecast> {
    if p == 0 {
        return Err(Error::invalid("AR lag order must be at least 1"));
    }
    di_forecast(y, None, p, 0, h)
}

/// Diffusion index: AR lags plus `k` principal components dated `t`.
/// `k = 0` is the AR model and `p = 0` is PC regression.
pub fn di_forecast(y: &Vector, x: Option<&Mat>, p: usize, k: usize, h: usize) -> Result<Forecast> {
    let t = y.len();
    if p + k == 0 {
        return Err(Error::invalid("diffusion index needs lags or factors"));
    }
    if t <= p + h + 1 {
        return Err(Error::InsufficientData(format!("need T > p + h + 1, got T={t}, p={p}, h={h}")));
    }
    let factors = if k > 0 {
        let x = x.ok_or_else(|| Error::invalid("diffusion index with factors needs predictors"))?;
        if x.nrows() != t {
            return Err(Error::DimensionMismatch { context: "predictor rows", expected: t, got: x.nrows() });
        }
        pca_factors(x, k)?.factors
    } else {
        Mat::zeros(t, 0)
    };
    let features = concat_columns(&lag_matrix(y, p), &factors);
    let stage = if k == 0 { "AR regression" } else if p == 0 { "PC regression" } else { "DI regression" };
    direct_forecast(&features, y, h, p.saturating_sub(1), stage, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_principal_angle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
        Mat::from_fn(r, c, |_, _| StandardNormal.sample(rng))
    }

    fn std(x: &Mat) -> Mat {
        Standardizer::fit_transform(x, None).unwrap().0
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(eigenvalue_ratio_k(&[100.0, 50.0, 1.0, 0.9, 0.8], 4).unwrap(), 2);
        let geo: Vec<f64> = (1..=8).map(|k| 2f64.powi(-k)).collect();
        assert_eq!(eigenvalue_ratio_k(&geo, 6).unwrap(), 1);
        assert!(eigenvalue_ratio_k(&[0.0, 0.0, 0.0], 2).is_err());
        assert!(eigenvalue_ratio_k(&[3.0, 2.0], 4).is_err());
    }

    #[test]
    fn first_pc_tracks_exact_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = normal(&mut rng, 60, 1);
        let x = &f * normal(&mut rng, 1, 20);
        let pcs = pca_factors(&x, 1).unwrap();
        let a = pcs.factors.column(0);
        let corr = a.dot(&f.column(0)) / (a.norm() * f.column(0).norm());
        assert!(corr.abs() > 0.9999);
    }

    #[test]
    fn orthonormal_rows_give_equal_eigenvalues() {
        let x = Mat::identity(5, 5);
        let pcs = pca_factors(&x, 3).unwrap();
        for w in pcs.eigenvalues.windows(2) {
            assert!((w[0] - w[1]).abs() < 1e-12);
        }
        let ftf = pcs.factors.transpose() * &pcs.factors / 5.0;
        assert!((ftf - Mat::identity(3, 3)).amax() < 1e-10);
        assert!(pca_factors(&x, 6).is_err());
    }

    #[test]
    fn duplicated_columns_keep_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = normal(&mut rng, 50, 2);
        let x = std(&(&f * normal(&mut rng, 2, 8) + normal(&mut rng, 50, 8) * 0.2));
        let dup = concat_columns(&x, &x);
        let a = pca_factors(&x, 2).unwrap().factors;
        let b = pca_factors(&dup, 2).unwrap().factors;
        assert!(max_principal_angle(&a, &b) < 1e-6);
    }

    #[test]
    fn dual_equals_primal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = std(&normal(&mut rng, 30, 6));
        let dual = pca_factors(&x, 3).unwrap().factors;
        let (_, v) = sym_eigen_desc(&(x.transpose() * &x));
        let primal = &x * v.columns(0, 3);
        assert!(max_principal_angle(&dual, &primal) < 1e-8);
    }

    #[test]
    fn factors_are_orthogonal_and_sorted() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = std(&normal(&mut rng, 40, 10));
        let pcs = pca_factors(&x, 4).unwrap();
        let ftf = pcs.factors.transpose() * &pcs.factors;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(ftf[(i, j)].abs() < 1e-8);
                }
            }
        }
        for w in pcs.eigenvalues.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn zero_factors_rejected() {
        let x = Mat::identity(20, 4);
        let y = Vector::from_element(20, 1.0);
        assert!(pc_regression_forecast(&x, &y, 1, 0).is_err());
        assert!(pc_sq_forecast(&x, &y, 1, 0).is_err());
        assert!(sq_pc_forecast(&x, &y, 1, 0).is_err());
    }

    #[test]
    fn ar1_coefficient_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut y = Vector::zeros(200);
        for t in 1..200 {
            y[t] = 0.8 * y[t - 1] + Distribution::<f64>::sample(&StandardNormal, &mut rng);
        }
        let model = fit_ar(&y, 1, 1).unwrap();
        assert!((model.coefficients[1] - 0.8).abs() < 0.1, "{}", model.coefficients[1]);
    }

    #[test]
    fn di_nests_ar_and_pc() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = std(&normal(&mut rng, 60, 8));
        let y = Vector::from_iterator(60, (0..60).map(|_| StandardNormal.sample(&mut rng)));
        for p in [1, 2, 4] {
            let ar = ar_forecast(&y, p, 2).unwrap();
            let di = di_forecast(&y, Some(&x), p, 0, 2).unwrap();
            assert_eq!(ar.value.to_bits(), di.value.to_bits());
        }
        let pc = pc_regression_forecast(&x, &y, 3, 2).unwrap();
        let di = di_forecast(&y, Some(&x), 0, 2, 3).unwrap();
        assert_eq!(pc.value.to_bits(), di.value.to_bits());
        assert!(ar_forecast(&Vector::zeros(5), 2, 2).is_err());
    }

    #[test]
    fn pc_sq_nests_linear_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = normal(&mut rng, 150, 1);
        let x = std(&(&f * normal(&mut rng, 1, 15) + normal(&mut rng, 150, 15) * 0.5));
        let y = Vector::from_iterator(150, (0..150).map(|i| {
            let lead = if i >= 1 { f[(i - 1, 0)] } else { 0.0 };
            lead + 0.5 * Distribution::<f64>::sample(&StandardNormal, &mut rng)
        }));
        let fc = pc_sq_forecast(&x, &y, 1, 1).unwrap();
        let coef = fc.regression.coefficients[2];
        let se = fc.regression.std_errors[2];
        assert!(coef.abs() < 3.0 * se, "{coef} vs {se}");
        let pc = pc_regression_forecast(&x, &y, 1, 1).unwrap();
        assert!((pc.value - fc.value).abs() < 0.5);
    }

    #[test]
    fn pc_sq_beats_pc_on_quadratic_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = normal(&mut rng, 150, 1);
        let x = std(&(&f * normal(&mut rng, 1, 15) + normal(&mut rng, 150, 15) * 0.3));
        let y = Vector::from_iterator(150, (0..150).map(|i| {
            let lead = if i >= 1 { f[(i - 1, 0)] } else { 0.0 };
            lead * lead + 0.2 * Distribution::<f64>::sample(&StandardNormal, &mut rng)
        }));
        let pc = pc_regression_forecast(&x, &y, 1, 1).unwrap();
        let sq = pc_sq_forecast(&x, &y, 1, 1).unwrap();
        assert!(sq.in_sample_r2() > pc.in_sample_r2() + 0.2, "{} {}", sq.in_sample_r2(), pc.in_sample_r2());
    }

    #[test]
    fn linear_kpca_spans_pca() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = std(&normal(&mut rng, 25, 6));
        let kp = KernelPca::fit(&x, &KernelSpec::Linear, 3).unwrap();
        let pcs = pca_factors(&x, 3).unwrap();
        assert!(max_principal_angle(kp.train_factors(), &pcs.factors) < 1e-6);
        // projecting the training rows reproduces the training factors
        let proj = kp.transform(&x).unwrap();
        assert!((proj - kp.train_factors()).amax() < 1e-9);
    }

    #[test]
    fn saturated_kpca_dominates_pc() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = std(&normal(&mut rng, 10, 12));
        let y = Vector::from_iterator(10, (0..10).map(|_| StandardNormal.sample(&mut rng)));
        let k = 8;
        let kp = kpca_regression_forecast(&x, &y, 1, &KernelSpec::Linear, k).unwrap();
        let pc = pc_regression_forecast(&x, &y, 1, k).unwrap();
        assert!(kp.in_sample_r2() >= pc.in_sample_r2() - 1e-9);
    }

    #[test]
    fn gaussian_kpca_beats_pc_on_quadratic_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = 120;
        let f = normal(&mut rng, t, 1);
        let x = std(&(&f * normal(&mut rng, 1, 10) + normal(&mut rng, t, 10) * 0.3));
        let y = Vector::from_iterator(t, (0..t).map(|i| {
            let lead = if i >= 1 { f[(i - 1, 0)] } else { 0.0 };
            lead * lead + 0.2 * Distribution::<f64>::sample(&StandardNormal, &mut rng)
        }));
        let sigma = crate::tuning::median_heuristic_sigma(&x, 0).unwrap();
        let kp = kpca_regression_forecast(&x, &y, 1, &KernelSpec::gaussian(sigma), 3).unwrap();
        let pc = pc_regression_forecast(&x, &y, 1, 3).unwrap();
        assert!(kp.in_sample_r2() > pc.in_sample_r2(), "{} {}", kp.in_sample_r2(), pc.in_sample_r2());
    }

    #[test]
    fn forecasts_invariant_to_column_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let f = normal(&mut rng, 50, 2);
        let x = std(&(&f * normal(&mut rng, 2, 7) + normal(&mut rng, 50, 7) * 0.4));
        let y = Vector::from_iterator(50, (0..50).map(|i| f[(i, 0)] + 0.3 * Distribution::<f64>::sample(&StandardNormal, &mut rng)));
        let perm = [3usize, 0, 6, 1, 5, 2, 4];
        let xp = Mat::from_fn(50, 7, |i, j| x[(i, perm[j])]);
        let close = |a: f64, b: f64| (a - b).abs() < 1e-8;
        assert!(close(pc_regression_forecast(&x, &y, 2, 2).unwrap().value, pc_regression_forecast(&xp, &y, 2, 2).unwrap().value));
        assert!(close(pc_sq_forecast(&x, &y, 2, 2).unwrap().value, pc_sq_forecast(&xp, &y, 2, 2).unwrap().value));
        assert!(close(sq_pc_forecast(&x, &y, 2, 2).unwrap().value, sq_pc_forecast(&xp, &y, 2, 2).unwrap().value));
        assert!(close(di_forecast(&y, Some(&x), 2, 2, 2).unwrap().value, di_forecast(&y, Some(&xp), 2, 2, 2).unwrap().value));
        let g = KernelSpec::gaussian(3.0);
        assert!(close(kpca_regression_forecast(&x, &y, 2, &g, 2).unwrap().value, kpca_regression_forecast(&xp, &y, 2, &g, 2).unwrap().value));
    }
}
