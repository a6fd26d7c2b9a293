//! Dense linear-algebra helpers shared by the estimators.
//!
//! Everything here works on `nalgebra` dynamic matrices. The small symmetric
//! systems that appear in the closed-form estimator (L x L blocks) go through
//! [`SymFactor`], which applies a tiny ridge only when the block is close to
//! singular.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Condition number above which a ridge is added before solving.
pub const RIDGE_CONDITION_LIMIT: f64 = 1e12;
/// Ridge scale, multiplied by trace / dimension.
pub const RIDGE_LAMBDA: f64 = 1e-10;
/// Relative pivot threshold used to flag rank deficiency in least squares.
pub const RANK_TOLERANCE: f64 = 1e-10;

pub fn column_means(m: &Mat) -> Vector {
    let rows = m.nrows().max(1) as f64;
    Vector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / rows))
}

/// Applies the temporal demeaning operator to every column.
pub fn demean_columns(m: &Mat) -> Mat {
    let means = column_means(m);
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    out
}

pub fn demean(v: &Vector) -> Vector {
    let mean = v.mean();
    v.map(|x| x - mean)
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// descending order and eigenvectors permuted to match.
pub fn sym_eigen_desc(m: &Mat) -> (Vec<f64>, Mat) {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Factorisation of a small symmetric positive semi-definite matrix.
///
/// When the condition number exceeds [`RIDGE_CONDITION_LIMIT`] a ridge of
/// `RIDGE_LAMBDA * trace / dim` is added and the event is logged. A matrix
/// with no positive eigenvalue, or one that is clearly indefinite, is
/// rejected as ill-conditioned.
#[derive(Debug, Clone)]
pub struct SymFactor {
    name: &'static str,
    chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    eigen: Option<(Vec<f64>, Mat)>,
    jitter: f64,
    condition: f64,
}

impl SymFactor {
    pub fn new(m: &Mat, name: &'static str) -> Result<Self> {
        let n = m.nrows();
        if n == 0 || n != m.ncols() {
            return Err(Error::IllConditioned {
                matrix: name,
                detail: format!("shape {}x{}", m.nrows(), m.ncols()),
            });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::IllConditioned { matrix: name, detail: "non-finite entries".into() });
        }
        let sym = (m + m.transpose()) * 0.5;
        let (values, _) = sym_eigen_desc(&sym);
        let max = values[0];
        let min = values[n - 1];
        if !(max > 0.0) {
            return Err(Error::IllConditioned {
                matrix: name,
                detail: format!("largest eigenvalue {max:e}"),
            });
        }
        if min < -1e-8 * max {
            return Err(Error::IllConditioned {
                matrix: name,
                detail: format!("indefinite: eigenvalues span [{min:e}, {max:e}]"),
            });
        }
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        let mut work = sym;
        let mut jitter = 0.0;
        if condition > RIDGE_CONDITION_LIMIT {
            jitter = RIDGE_LAMBDA * work.trace() / n as f64;
            for i in 0..n {
                work[(i, i)] += jitter;
            }
            log::warn!("{name}: condition number {condition:e} exceeds limit, ridge {jitter:e} added");
        }
        let chol = work.clone().cholesky();
        let eigen = if chol.is_none() { Some(sym_eigen_desc(&work)) } else { None };
        if let Some((vals, _)) = &eigen {
            if !(vals[n - 1] > 0.0) {
                return Err(Error::IllConditioned {
                    matrix: name,
                    detail: format!("singular after ridge (min eigenvalue {:e})", vals[n - 1]),
                });
            }
        }
        Ok(SymFactor { name, chol, eigen, jitter, condition })
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn solve(&self, rhs: &Mat) -> Mat {
        if let Some(chol) = &self.chol {
            return chol.solve(rhs);
        }
        let (vals, vecs) = self.eigen.as_ref().expect("either cholesky or eigen is present");
        let mut proj = vecs.transpose() * rhs;
        for (i, mut row) in proj.row_iter_mut().enumerate() {
            row /= vals[i];
        }
        vecs * proj
    }

    pub fn solve_vec(&self, rhs: &Vector) -> Vector {
        let m = Mat::from_column_slice(rhs.len(), 1, rhs.as_slice());
        let out = self.solve(&m);
        Vector::from_column_slice(out.as_slice())
    }
}

/// Least squares with a full-column-rank requirement.
///
/// Uses a Householder QR; a diagonal entry of R below
/// `RANK_TOLERANCE * max|R_ii|` is reported as rank deficiency in `stage`.
pub fn lstsq(design: &Mat, rhs: &Mat, stage: &str) -> Result<Mat> {
    let (rows, cols) = design.shape();
    if rows != rhs.nrows() {
        return Err(Error::DimensionMismatch { context: "least squares rows", expected: rows, got: rhs.nrows() });
    }
    if cols == 0 || rows < cols {
        return Err(Error::RankDeficient { stage: format!("{stage} ({rows} rows for {cols} columns)") });
    }
    let qr = design.clone().qr();
    let r = qr.r();
    let max_diag = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let min_diag = (0..cols).map(|i| r[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if !(max_diag > 0.0) || min_diag <= RANK_TOLERANCE * max_diag || !min_diag.is_finite() {
        return Err(Error::RankDeficient { stage: stage.to_string() });
    }
    let qtb = qr.q().transpose() * rhs;
    r.solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::RankDeficient { stage: stage.to_string() })
}

pub fn lstsq_vec(design: &Mat, rhs: &Vector, stage: &str) -> Result<Vector> {
    let m = Mat::from_column_slice(rhs.len(), 1, rhs.as_slice());
    let out = lstsq(design, &m, stage)?;
    Ok(Vector::from_column_slice(out.as_slice()))
}

/// Minimum-norm least squares through the eigen-decomposition of the normal
/// matrix. Directions with eigenvalue below `RANK_TOLERANCE` times the
/// largest are treated as null, so exactly collinear designs are fine.
pub fn lstsq_min_norm(design: &Mat, rhs: &Vector) -> Vector {
    let gram = design.transpose() * design;
    let xty = design.transpose() * rhs;
    let (values, vectors) = sym_eigen_desc(&gram);
    let top = values.first().copied().unwrap_or(0.0);
    let mut out = Vector::zeros(design.ncols());
    for (i, &l) in values.iter().enumerate() {
        if l > RANK_TOLERANCE * top {
            let v = vectors.column(i);
            out += v * (v.dot(&xty) / l);
        }
    }
    out
}

/// Ordinary least squares summary.
#[derive(Debug, Clone)]
pub struct Ols {
    pub coefficients: Vector,
    pub fitted: Vector,
    pub residuals: Vector,
    pub std_errors: Vector,
    pub r_squared: f64,
}

/// OLS of `y` on `design` (the caller includes any intercept column).
pub fn ols(design: &Mat, y: &Vector, stage: &str) -> Result<Ols> {
    let coefficients = lstsq_vec(design, y, stage)?;
    let fitted = design * &coefficients;
    let residuals = y - &fitted;
    let n = y.len();
    let p = design.ncols();
    let sse = residuals.norm_squared();
    let sst = demean(y).norm_squared();
    let r_squared = if sst > 0.0 { 1.0 - sse / sst } else { 0.0 };
    let dof = n.saturating_sub(p);
    let std_errors = if dof > 0 {
        let s2 = sse / dof as f64;
        let xtx = design.transpose() * design;
        match xtx.try_inverse() {
            Some(inv) => Vector::from_iterator(p, (0..p).map(|i| (s2 * inv[(i, i)]).max(0.0).sqrt())),
            None => Vector::from_element(p, f64::NAN),
        }
    } else {
        Vector::from_element(p, f64::NAN)
    };
    Ok(Ols { coefficients, fitted, residuals, std_errors, r_squared })
}

/// Prepends a column of ones.
pub fn with_intercept(m: &Mat) -> Mat {
    m.clone().insert_column(0, 1.0)
}

/// Largest principal angle (radians) between the column spans of `a` and `b`.
///
/// Computed from sines, which keeps small angles accurate.
pub fn max_principal_angle(a: &Mat, b: &Mat) -> f64 {
    let qa = orthonormal_basis(a);
    let qb = orthonormal_basis(b);
    let residual = &qb - &qa * (qa.transpose() * &qb);
    let smax = residual.svd(false, false).singular_values.iter().cloned().fold(0.0, f64::max);
    smax.min(1.0).asin()
}

fn orthonormal_basis(m: &Mat) -> Mat {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-12 * smax)
        .collect();
    let mut q = Mat::zeros(m.nrows(), keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        q.set_column(dst, &u.column(src));
    }
    q
}

/// Sample standard deviation with the n - 1 divisor.
pub fn sample_sd(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lstsq_recovers_exact_coefficients() {
        let x = Mat::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = Vector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let b = lstsq_vec(&x, &y, "test").unwrap();
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lstsq_flags_collinear_design() {
        let x = Mat::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let y = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        let err = lstsq_vec(&x, &y, "pass 9").unwrap_err();
        assert!(err.to_string().contains("pass 9"));
    }

    #[test]
    fn sym_factor_adds_ridge_only_when_needed() {
        let good = Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        assert_eq!(SymFactor::new(&good, "good").unwrap().jitter(), 0.0);
        let near = Mat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-14]);
        let f = SymFactor::new(&near, "near").unwrap();
        assert!(f.jitter() > 0.0);
        let zero = Mat::zeros(2, 2);
        assert!(matches!(SymFactor::new(&zero, "B"), Err(Error::IllConditioned { matrix: "B", .. })));
    }

    #[test]
    fn principal_angle_zero_for_same_span() {
        let a = Mat::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let b = &a * -4.0;
        assert!(max_principal_angle(&a, &b) < 1e-12);
        let c = Mat::from_row_slice(3, 1, &[3.0, -1.0, 0.0]);
        assert!(max_principal_angle(&a, &c) > 1.0);
    }
}
