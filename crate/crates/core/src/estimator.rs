//! Closed-form kernel three-pass regression filter.
//!
//! With `Zc = J Z`, `Kc = J K J`, `P = Kc Zc` the fit stores
//!
//! * `W = Zc' Zc`, `A = Zc' Kc Zc`, `B = P' P`
//! * factors `F = K Zc A^-1 W` (the right-hand Gram is left uncentered)
//! * coefficients `beta = W^-1 A B^-1 P' Jy`
//! * fitted values `y_bar + P B^-1 P' Jy`, which equal `y_bar + J F beta`.
//!
//! The linear three-pass filter is the `Linear` kernel special case.
//! [`fit_explicit_passes`] runs the three regressions literally on explicit
//! features and serves as the reference for the kernel path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{center_cross_gram, center_gram, cross_gram, gram, GramMatrix, KernelSpec};
use crate::linalg::{column_means, demean, demean_columns, lstsq, with_intercept, Mat, SymFactor, Vector};

/// Where a proxy matrix came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProxyProvenance {
    TheoryGuided(Vec<String>),
    Auto(usize),
}

/// A T x L proxy matrix whose demeaned columns are linearly independent.
#[derive(Debug, Clone)]
pub struct ProxySet {
    z: Mat,
    provenance: ProxyProvenance,
}

impl ProxySet {
    pub fn new(z: Mat, provenance: ProxyProvenance) -> Result<Self> {
        if z.ncols() == 0 {
            return Err(Error::invalid("proxy set needs at least one column"));
        }
        check_proxy_rank(&demean_columns(&z))?;
        Ok(ProxySet { z, provenance })
    }

    pub fn theory_guided(z: Mat, names: Vec<String>) -> Result<Self> {
        if names.len() != z.ncols() {
            return Err(Error::DimensionMismatch { context: "proxy names", expected: z.ncols(), got: names.len() });
        }
        Self::new(z, ProxyProvenance::TheoryGuided(names))
    }

    /// The single target proxy `Z = y`.
    pub fn target(y: &Vector) -> Result<Self> {
        Self::new(Mat::from_column_slice(y.len(), 1, y.as_slice()), ProxyProvenance::Auto(1))
    }

    pub fn matrix(&self) -> &Mat {
        &self.z
    }

    pub fn provenance(&self) -> &ProxyProvenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.z.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.z.ncols() == 0
    }
}

fn check_proxy_rank(zc: &Mat) -> Result<()> {
    let sv = zc.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = zc.iter().fold(0.0f64, |m, v| m.max(v.abs())) * (zc.nrows() as f64).sqrt();
    if !(max > 1e-300) || !(max > f64::EPSILON * scale) || min <= 1e-10 * max {
        return Err(Error::IllConditioned {
            matrix: "Z'JZ",
            detail: format!("demeaned proxies are collinear (singular values {min:e}..{max:e})"),
        });
    }
    Ok(())
}

/// Fitted kernel three-pass regression filter. Immutable once built.
#[derive(Debug, Clone)]
pub struct K3prfFit {
    spec: KernelSpec,
    x_train: Mat,
    gram: GramMatrix,
    centered: GramMatrix,
    z: Mat,
    zc: Mat,
    w: Mat,
    a: Mat,
    b: Mat,
    /// `Kc Zc`
    p: Mat,
    /// `B^-1 P' Jy`
    gamma: Vector,
    /// `A^-1 W`
    factor_map: Mat,
    beta_hat: Vector,
    f_hat: Mat,
    y_bar: f64,
    f_bar: Vector,
    ridge_used: bool,
}

/// Fits the estimator on predictors `x` (T x N), aligned target `y` and proxies.
pub fn fit(x: &Mat, y: &Vector, proxies: &ProxySet, spec: &KernelSpec) -> Result<K3prfFit> {
    spec.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch { context: "target length", expected: x.nrows(), got: y.len() });
    }
    let k = gram(spec, x)?;
    fit_with_gram(x, k, y, proxies.matrix(), spec)
}

/// Same as [`fit`] but reuses a precomputed uncentered Gram matrix of `x`.
pub(crate) fn fit_with_gram(x: &Mat, k: GramMatrix, y: &Vector, z: &Mat, spec: &KernelSpec) -> Result<K3prfFit> {
    let t = x.nrows();
    if k.dim() != t || k.is_centered() {
        return Err(Error::invalid("gram matrix must be the uncentered gram of x"));
    }
    if y.len() != t {
        return Err(Error::DimensionMismatch { context: "target length", expected: t, got: y.len() });
    }
    if z.nrows() != t {
        return Err(Error::DimensionMismatch { context: "proxy rows", expected: t, got: z.nrows() });
    }
    let l = z.ncols();
    if l == 0 || t <= l {
        return Err(Error::InsufficientData(format!("need T > L, got T={t}, L={l}")));
    }
    if x.iter().chain(y.iter()).chain(z.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite values in predictors, target or proxies"));
    }
    let zc = demean_columns(z);
    check_proxy_rank(&zc)?;
    let yc = demean(y);
    let kc = center_gram(&k);

    let w = zc.transpose() * &zc;
    let p = kc.values() * &zc;
    let a = symmetrize(&(zc.transpose() * &p));
    let b = symmetrize(&(p.transpose() * &p));

    let w_f = SymFactor::new(&w, "Z'JZ")?;
    let a_f = SymFactor::new(&a, "Z'JKJZ")?;
    let b_f = SymFactor::new(&b, "Z'JKJKJZ")?;
    let ridge_used = w_f.jitter() > 0.0 || a_f.jitter() > 0.0 || b_f.jitter() > 0.0;

    let gamma = b_f.solve_vec(&(p.transpose() * &yc));
    let beta_hat = w_f.solve_vec(&(&a * &gamma));
    let factor_map = a_f.solve(&w);
    let f_hat = k.values() * &zc * &factor_map;
    let f_bar = column_means(&f_hat);
    let y_bar = y.mean();

    Ok(K3prfFit {
        spec: *spec,
        x_train: x.clone(),
        gram: k,
        centered: kc,
        z: z.clone(),
        zc,
        w,
        a,
        b,
        p,
        gamma,
        factor_map,
        beta_hat,
        f_hat,
        y_bar,
        f_bar,
        ridge_used,
    })
}

fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

impl K3prfFit {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn num_obs(&self) -> usize {
        self.x_train.nrows()
    }

    pub fn num_proxies(&self) -> usize {
        self.z.ncols()
    }

    pub fn num_inputs(&self) -> usize {
        self.x_train.ncols()
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    pub fn centered_gram(&self) -> &GramMatrix {
        &self.centered
    }

    pub fn proxies(&self) -> &Mat {
        &self.z
    }

    /// `Z'JZ`
    pub fn w(&self) -> &Mat {
        &self.w
    }

    /// `Z'JKJZ`
    pub fn a(&self) -> &Mat {
        &self.a
    }

    /// `Z'JKJKJZ`
    pub fn b(&self) -> &Mat {
        &self.b
    }

    pub fn beta_hat(&self) -> &Vector {
        &self.beta_hat
    }

    /// Estimated factors, T x L.
    pub fn factors(&self) -> &Mat {
        &self.f_hat
    }

    pub fn y_bar(&self) -> f64 {
        self.y_bar
    }

    pub fn f_bar(&self) -> &Vector {
        &self.f_bar
    }

    /// Intercept of the pass-three regression, `y_bar - f_bar' beta`.
    pub fn intercept(&self) -> f64 {
        self.y_bar - self.f_bar.dot(&self.beta_hat)
    }

    pub fn ridge_used(&self) -> bool {
        self.ridge_used
    }

    /// In-sample fitted values from the single-sandwich closed form.
    pub fn fitted_values(&self) -> Vector {
        (&self.p * &self.gamma).add_scalar(self.y_bar)
    }

    /// In-sample fitted values through the factors, `y_bar + J F beta`.
    pub fn fitted_values_via_factors(&self) -> Vector {
        (demean_columns(&self.f_hat) * &self.beta_hat).add_scalar(self.y_bar)
    }

    pub fn in_sample_r2(&self, y: &Vector) -> f64 {
        let fitted = self.fitted_values();
        let sse = (y - fitted).norm_squared();
        let sst = demean(y).norm_squared();
        if sst > 0.0 {
            1.0 - sse / sst
        } else {
            0.0
        }
    }

    /// Factors for new rows, `F_new = kappa J Zc A^-1 W` on the raw cross-Gram.
    pub fn predict_factors(&self, x_new: &Mat) -> Result<Mat> {
        Ok(self.centered_new_factors(x_new)? + Mat::from_fn(x_new.nrows(), self.f_bar.len(), |_, j| self.f_bar[j]))
    }

    /// Forecasts for new rows. The caller standardizes `x_new` with the
    /// training statistics.
    pub fn predict(&self, x_new: &Mat) -> Result<Vector> {
        let fc = self.centered_new_factors(x_new)?;
        Ok((fc * &self.beta_hat).add_scalar(self.y_bar))
    }

    /// `F_new - f_bar`, computed from the centered cross-Gram.
    fn centered_new_factors(&self, x_new: &Mat) -> Result<Mat> {
        if x_new.ncols() != self.x_train.ncols() {
            return Err(Error::DimensionMismatch { context: "prediction columns", expected: self.x_train.ncols(), got: x_new.ncols() });
        }
        let kappa = cross_gram(&self.spec, &self.x_train, x_new)?;
        let kc_new = center_cross_gram(&kappa, &self.gram)?;
        Ok(kc_new * &self.zc * &self.factor_map)
    }
}

/// Output of the literal three regression passes.
#[derive(Debug, Clone)]
pub struct ExplicitPasses {
    /// Pass-one slopes, M x L.
    pub loadings: Mat,
    /// Pass-two factors, T x L.
    pub factors: Mat,
    pub intercept: f64,
    pub beta_hat: Vector,
    pub fitted: Vector,
}

/// Runs the three regressions on explicit features `phi` (T x M).
///
/// Pass one regresses each feature column on a constant and `Z`; pass two
/// regresses each period's feature vector on the pass-one slopes without an
/// intercept; pass three regresses `y` on a constant and the factors.
pub fn fit_explicit_passes(phi: &Mat, y: &Vector, z: &Mat) -> Result<ExplicitPasses> {
    let t = phi.nrows();
    if y.len() != t {
        return Err(Error::DimensionMismatch { context: "target length", expected: t, got: y.len() });
    }
    if z.nrows() != t {
        return Err(Error::DimensionMismatch { context: "proxy rows", expected: t, got: z.nrows() });
    }
    let l = z.ncols();

    let pass1 = lstsq(&with_intercept(z), phi, "pass 1")?;
    let loadings = pass1.rows(1, l).transpose();

    let pass2 = lstsq(&loadings, &phi.transpose(), "pass 2")?;
    let factors = pass2.transpose();

    let y_mat = Mat::from_column_slice(t, 1, y.as_slice());
    let design = with_intercept(&factors);
    let pass3 = lstsq(&design, &y_mat, "pass 3")?;
    let fitted = Vector::from_column_slice((&design * &pass3).as_slice());
    Ok(ExplicitPasses {
        loadings,
        factors,
        intercept: pass3[(0, 0)],
        beta_hat: Vector::from_iterator(l, (1..=l).map(|i| pass3[(i, 0)])),
        fitted,
    })
}
