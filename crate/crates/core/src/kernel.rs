//! Kernel functions, Gram matrices and temporal centering.
//!
//! A Gram matrix holds `K(x_t, x_s)` over all pairs of time points. Centering
//! applies the demeaning operator `J = I - (1/T) 1 1'` on both sides; it is
//! done with the four-term mean identity and never forms `J` explicitly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen_desc, Mat};

/// Kernel family and hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    Polynomial { degree: u32, offset: f64 },
    Gaussian { sigma: f64 },
}

impl KernelSpec {
    pub fn poly2(offset: f64) -> Self {
        KernelSpec::Polynomial { degree: 2, offset }
    }

    pub fn gaussian(sigma: f64) -> Self {
        KernelSpec::Gaussian { sigma }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Polynomial { degree, offset } => {
                if degree < 1 {
                    Err(Error::invalid("polynomial kernel degree must be at least 1"))
                } else if !(offset >= 0.0) || !offset.is_finite() {
                    Err(Error::invalid(format!("polynomial kernel offset must be nonnegative, got {offset}")))
                } else {
                    Ok(())
                }
            }
            KernelSpec::Gaussian { sigma } => {
                if sigma > 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("gaussian kernel sigma must be positive, got {sigma}")))
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            KernelSpec::Linear => "linear".into(),
            KernelSpec::Polynomial { degree, offset } => format!("poly{degree}(offset={offset})"),
            KernelSpec::Gaussian { sigma } => format!("gaussian(sigma={sigma})"),
        }
    }

    /// Kernel value from the dot product and the two squared norms.
    #[inline]
    fn from_parts(&self, dot: f64, xx: f64, yy: f64) -> f64 {
        match *self {
            KernelSpec::Linear => dot,
            KernelSpec::Polynomial { degree, offset } => (dot + offset).powi(degree as i32),
            KernelSpec::Gaussian { sigma } => {
                let d2 = (xx + yy - 2.0 * dot).max(0.0);
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Evaluates the kernel on two input vectors.
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.validate()?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { context: "kernel arguments", expected: x.len(), got: y.len() });
    }
    Ok(spec.from_parts(dot(x, y), dot(x, x), dot(y, y)))
}

/// A T x T Gram matrix, tagged with whether it has been centered.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    values: Mat,
    centered: bool,
}

impl GramMatrix {
    /// Wraps an existing symmetric matrix as an uncentered Gram matrix.
    pub fn from_uncentered(values: Mat) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::DimensionMismatch { context: "gram matrix", expected: values.nrows(), got: values.ncols() });
        }
        Ok(GramMatrix { values, centered: false })
    }

    pub fn values(&self) -> &Mat {
        &self.values
    }

    pub fn into_values(self) -> Mat {
        self.values
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Checks symmetry and positive semi-definiteness
    /// (smallest eigenvalue at least `-1e-8` times the spectral norm).
    pub fn validate_psd(&self) -> Result<()> {
        let k = &self.values;
        let scale = k.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let asym = (k - k.transpose()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if asym > 1e-10 * scale {
            return Err(Error::invalid(format!("gram matrix asymmetric by {asym:e}")));
        }
        let (eig, _) = sym_eigen_desc(k);
        let norm = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let min = *eig.last().unwrap_or(&0.0);
        if min < -1e-8 * norm {
            return Err(Error::NotPsd { min_eigenvalue: min, norm });
        }
        Ok(())
    }
}

/// Rows of `x` as contiguous slices (nalgebra storage is column-major).
fn rows_of(x: &Mat) -> Mat {
    x.transpose()
}

/// Uncentered Gram matrix of the rows of `x`.
///
/// Rows are computed in parallel; every entry is an independent
/// evaluation, so the result does not depend on the thread count.
pub fn gram(spec: &KernelSpec, x: &Mat) -> Result<GramMatrix> {
    spec.validate()?;
    let t = x.nrows();
    let xt = rows_of(x);
    let norms: Vec<f64> = (0..t).map(|i| xt.column(i).norm_squared()).collect();
    let rows: Vec<Vec<f64>> = (0..t)
        .into_par_iter()
        .map(|i| {
            let xi = xt.column(i);
            let xi = xi.as_slice();
            (i..t)
                .map(|j| {
                    if i == j && matches!(spec, KernelSpec::Gaussian { .. }) {
                        1.0
                    } else {
                        let xj = xt.column(j);
                        spec.from_parts(dot(xi, xj.as_slice()), norms[i], norms[j])
                    }
                })
                .collect()
        })
        .collect();
    let mut values = Mat::zeros(t, t);
    for (i, row) in rows.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            values[(i, i + off)] = v;
            values[(i + off, i)] = v;
        }
    }
    Ok(GramMatrix { values, centered: false })
}

/// Cross-Gram between new rows and training rows: entry `[i, t] = K(x_new_i, x_train_t)`.
pub fn cross_gram(spec: &KernelSpec, x_train: &Mat, x_new: &Mat) -> Result<Mat> {
    spec.validate()?;
    if x_train.ncols() != x_new.ncols() {
        return Err(Error::DimensionMismatch { context: "cross gram columns", expected: x_train.ncols(), got: x_new.ncols() });
    }
    let tr = rows_of(x_train);
    let nw = rows_of(x_new);
    let t = x_train.nrows();
    let tr_norms: Vec<f64> = (0..t).map(|j| tr.column(j).norm_squared()).collect();
    let rows: Vec<Vec<f64>> = (0..x_new.nrows())
        .into_par_iter()
        .map(|i| {
            let xi = nw.column(i);
            let xi = xi.as_slice();
            let ni = dot(xi, xi);
            (0..t).map(|j| spec.from_parts(dot(xi, tr.column(j).as_slice()), ni, tr_norms[j])).collect()
        })
        .collect();
    Ok(Mat::from_fn(x_new.nrows(), t, |i, j| rows[i][j]))
}

/// `J K J` via `K - rowmeans - colmeans + grandmean`.
pub fn center_gram(k: &GramMatrix) -> GramMatrix {
    let v = &k.values;
    let t = v.nrows();
    let tf = t as f64;
    let row_means: Vec<f64> = (0..t).map(|i| v.row(i).sum() / tf).collect();
    let col_means: Vec<f64> = (0..t).map(|j| v.column(j).sum() / tf).collect();
    let grand = col_means.iter().sum::<f64>() / tf;
    let values = Mat::from_fn(t, t, |i, j| v[(i, j)] - row_means[i] - col_means[j] + grand);
    GramMatrix { values, centered: true }
}

/// Centers a cross-Gram against an uncentered training Gram:
/// `(kappa - 1 m') J` where `m` holds the column means of `K`.
///
/// For an explicit feature map this is the cross product of features
/// demeaned with the training mean.
pub fn center_cross_gram(kappa: &Mat, k: &GramMatrix) -> Result<Mat> {
    if k.centered {
        return Err(Error::invalid("center_cross_gram expects the uncentered training gram"));
    }
    let t = k.dim();
    if kappa.ncols() != t {
        return Err(Error::DimensionMismatch { context: "cross gram against training gram", expected: t, got: kappa.ncols() });
    }
    let tf = t as f64;
    let col_means: Vec<f64> = (0..t).map(|j| k.values.column(j).sum() / tf).collect();
    let grand = col_means.iter().sum::<f64>() / tf;
    let mut out = Mat::zeros(kappa.nrows(), t);
    for i in 0..kappa.nrows() {
        let row_mean = kappa.row(i).sum() / tf;
        for j in 0..t {
            // (kappa_ij - m_j) - mean_s(kappa_is - m_s)
            out[(i, j)] = kappa[(i, j)] - col_means[j] - row_mean + grand;
        }
    }
    Ok(out)
}

/// The demeaning operator `J_T`. Mostly useful for tests and small problems;
/// the estimators use the mean-subtraction identities instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CenteringOperator {
    dim: usize,
}

impl CenteringOperator {
    pub fn new(dim: usize) -> Self {
        CenteringOperator { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `J m`, i.e. column-demeaning.
    pub fn apply(&self, m: &Mat) -> Mat {
        crate::linalg::demean_columns(m)
    }

    pub fn matrix(&self) -> Mat {
        let t = self.dim as f64;
        Mat::from_fn(self.dim, self.dim, |i, j| if i == j { 1.0 - 1.0 / t } else { -1.0 / t })
    }
}

/// Number of features produced by [`explicit_poly2_features`] for `n` inputs.
pub fn poly2_feature_count(n: usize) -> usize {
    1 + n + n * (n + 1) / 2
}

/// Explicit degree-2 polynomial feature map.
///
/// Dot products of the rows reproduce `(x.y + offset)^2` exactly: constant
/// `offset`, linear terms `sqrt(2 offset) x_i`, squares `x_i^2`, and cross
/// terms `sqrt(2) x_i x_j` for `i < j`.
pub fn explicit_poly2_features(x: &Mat, offset: f64) -> Mat {
    let (t, n) = x.shape();
    let m = poly2_feature_count(n);
    let lin = (2.0 * offset).sqrt();
    let cross = std::f64::consts::SQRT_2;
    let mut out = Mat::zeros(t, m);
    for r in 0..t {
        let mut c = 0;
        out[(r, c)] = offset;
        c += 1;
        for i in 0..n {
            out[(r, c)] = lin * x[(r, i)];
            c += 1;
        }
        for i in 0..n {
            for j in i..n {
                out[(r, c)] = if i == j { x[(r, i)] * x[(r, i)] } else { cross * x[(r, i)] * x[(r, j)] };
                c += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(t: usize, n: usize, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(t, n, |_, _| rng.random_range(-1.5..1.5))
    }

    #[test]
    fn eval_examples() {
        let g1 = KernelSpec::gaussian(1.0);
        assert_eq!(eval_kernel(&g1, &[0.3, -2.0, 7.0], &[0.3, -2.0, 7.0]).unwrap(), 1.0);
        assert_eq!(eval_kernel(&KernelSpec::Linear, &[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        let g2 = KernelSpec::gaussian(2.0);
        let v = eval_kernel(&g2, &[0.0, 0.0], &[2.0, 0.0]).unwrap();
        // exp(-4 / 8)
        assert_relative_eq!(v, 0.6065306597126334, epsilon = 1e-15);
    }

    #[test]
    fn eval_rejects_mismatch_and_bad_spec() {
        assert!(matches!(
            eval_kernel(&KernelSpec::Linear, &[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(eval_kernel(&KernelSpec::gaussian(0.0), &[1.0], &[1.0]).is_err());
        assert!(eval_kernel(&KernelSpec::Polynomial { degree: 0, offset: 1.0 }, &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn linear_gram_is_xxt() {
        let x = random(7, 4, 1);
        let k = gram(&KernelSpec::Linear, &x).unwrap();
        let xxt = &x * x.transpose();
        assert!((k.values() - xxt).amax() < 1e-12);
    }

    #[test]
    fn gaussian_gram_unit_diagonal_and_bounded() {
        let x = random(9, 3, 2);
        let k = gram(&KernelSpec::gaussian(0.7), &x).unwrap();
        for i in 0..9 {
            assert_eq!(k.values()[(i, i)], 1.0);
        }
        assert!(k.values().iter().all(|&v| v > 0.0 && v <= 1.0));
        k.validate_psd().unwrap();
    }

    #[test]
    fn poly2_gram_matches_feature_map() {
        let x = Mat::from_row_slice(2, 2, &[0.5, -1.0, 2.0, 0.25]);
        let k = gram(&KernelSpec::poly2(1.0), &x).unwrap();
        let phi = explicit_poly2_features(&x, 1.0);
        let oracle = &phi * phi.transpose();
        assert!((k.values() - oracle).amax() < 1e-12);
    }

    #[test]
    fn cross_gram_consistency() {
        let x = random(6, 3, 3);
        for spec in [KernelSpec::Linear, KernelSpec::poly2(0.5), KernelSpec::gaussian(1.3)] {
            let k = gram(&spec, &x).unwrap();
            let c = cross_gram(&spec, &x, &x).unwrap();
            assert!((k.values() - &c).amax() < 1e-12);
            let row = x.rows(2, 1).into_owned();
            let c1 = cross_gram(&spec, &x, &row).unwrap();
            assert!((c1.row(0) - k.values().row(2)).amax() < 1e-12);
        }
        let xn = random(3, 3, 4);
        let c = cross_gram(&KernelSpec::Linear, &x, &xn).unwrap();
        assert!((c - &xn * x.transpose()).amax() < 1e-12);
        assert!(cross_gram(&KernelSpec::Linear, &x, &random(2, 2, 5)).is_err());
    }

    #[test]
    fn centering_examples() {
        let ones = GramMatrix::from_uncentered(Mat::from_element(5, 5, 1.0)).unwrap();
        assert!(center_gram(&ones).values().amax() < 1e-15);

        // random PSD K versus explicit J K J
        let b = random(5, 5, 6);
        let k = GramMatrix::from_uncentered(&b * b.transpose()).unwrap();
        let j = CenteringOperator::new(5).matrix();
        let oracle = &j * k.values() * &j;
        let kc = center_gram(&k);
        assert!((kc.values() - &oracle).amax() < 1e-12);
        assert!(kc.is_centered());

        // idempotence
        let again = center_gram(&GramMatrix::from_uncentered(kc.values().clone()).unwrap());
        assert!((again.values() - kc.values()).amax() < 1e-12);
        for i in 0..5 {
            assert!(kc.values().row(i).sum().abs() < 1e-8);
            assert!(kc.values().column(i).sum().abs() < 1e-8);
        }
    }

    #[test]
    fn centering_operator_is_idempotent_and_kills_constants() {
        let j = CenteringOperator::new(6).matrix();
        assert!((&j * &j - &j).amax() < 1e-14);
        let ones = Mat::from_element(6, 1, 1.0);
        assert!((&j * ones).amax() < 1e-15);
    }

    #[test]
    fn center_cross_gram_examples() {
        let x = random(8, 3, 7);
        let xn = random(4, 3, 8);
        // identical rows reproduce center_gram
        for spec in [KernelSpec::Linear, KernelSpec::poly2(1.0), KernelSpec::gaussian(0.9)] {
            let k = gram(&spec, &x).unwrap();
            let c = center_cross_gram(&cross_gram(&spec, &x, &x).unwrap(), &k).unwrap();
            assert!((c - center_gram(&k).values()).amax() < 1e-12);
        }
        // linear: (Xn - xbar)(X - xbar)'
        let k = gram(&KernelSpec::Linear, &x).unwrap();
        let kappa = cross_gram(&KernelSpec::Linear, &x, &xn).unwrap();
        let xbar = crate::linalg::column_means(&x).transpose();
        let xc = Mat::from_fn(8, 3, |i, j| x[(i, j)] - xbar[j]);
        let xnc = Mat::from_fn(4, 3, |i, j| xn[(i, j)] - xbar[j]);
        let oracle = &xnc * xc.transpose();
        assert!((center_cross_gram(&kappa, &k).unwrap() - oracle).amax() < 1e-12);
        // poly2: explicit demeaned features
        let spec = KernelSpec::poly2(1.0);
        let k = gram(&spec, &x).unwrap();
        let kappa = cross_gram(&spec, &x, &xn).unwrap();
        let phi = explicit_poly2_features(&x, 1.0);
        let phin = explicit_poly2_features(&xn, 1.0);
        let mean = crate::linalg::column_means(&phi);
        let phic = Mat::from_fn(phi.nrows(), phi.ncols(), |i, j| phi[(i, j)] - mean[j]);
        let phinc = Mat::from_fn(phin.nrows(), phin.ncols(), |i, j| phin[(i, j)] - mean[j]);
        let oracle = &phinc * phic.transpose();
        assert!((center_cross_gram(&kappa, &k).unwrap() - oracle).amax() < 1e-10);
    }

    #[test]
    fn poly2_feature_examples() {
        let x = Mat::from_row_slice(1, 1, &[3.0]);
        let f = explicit_poly2_features(&x, 0.0);
        // constant and linear terms vanish at offset 0, leaving x^2
        assert_eq!(f[(0, 2)], 9.0);
        let y = explicit_poly2_features(&Mat::from_row_slice(1, 1, &[2.0]), 0.0);
        assert_eq!(f.row(0).dot(&y.row(0)), 36.0);

        let zero = explicit_poly2_features(&Mat::zeros(1, 4), 1.0);
        assert_eq!(zero.row(0).dot(&zero.row(0)), 1.0);
        assert_eq!(zero.ncols(), poly2_feature_count(4));

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let a: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
            let fa = explicit_poly2_features(&Mat::from_row_slice(1, 2, &a), 1.0);
            let fb = explicit_poly2_features(&Mat::from_row_slice(1, 2, &b), 1.0);
            let scalar = (a[0] * b[0] + a[1] * b[1] + 1.0).powi(2);
            assert_relative_eq!(fa.row(0).dot(&fb.row(0)), scalar, max_relative = 1e-12);
        }
    }

    #[test]
    fn gaussian_entries_grow_with_sigma() {
        let x = random(6, 3, 9);
        let lo = gram(&KernelSpec::gaussian(0.5), &x).unwrap();
        let hi = gram(&KernelSpec::gaussian(0.8), &x).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    assert!(hi.values()[(i, j)] > lo.values()[(i, j)]);
                }
            }
        }
    }
}
