//! Bandwidth selection for the Gaussian kernel: the median-distance anchor
//! and two-fold, time-contiguous cross-validation over a multiplier grid.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autoproxy::auto_proxy_fit;
use crate::baselines::KernelPca;
use crate::error::{Error, Result};
use crate::estimator::{fit, ProxyProvenance, ProxySet};
use crate::kernel::KernelSpec;
use crate::linalg::{ols, with_intercept, Mat, Vector};

pub const DEFAULT_MULTIPLIERS: [f64; 6] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
/// Rows used by the median heuristic before it switches to a subsample.
pub const MEDIAN_EXACT_LIMIT: usize = 2000;

/// Median pairwise Euclidean distance between rows.
///
/// Exact for up to [`MEDIAN_EXACT_LIMIT`] rows; above that a seeded random
/// subset of that many rows is used. If more than half of the pairs
/// coincide the median of the positive distances is returned instead.
pub fn median_heuristic_sigma(x: &Mat, seed: u64) -> Result<f64> {
    let t = x.nrows();
    if t < 3 {
        return Err(Error::InsufficientData(format!("median heuristic needs at least 3 rows, got {t}")));
    }
    let rows: Vec<usize> = if t <= MEDIAN_EXACT_LIMIT {
        (0..t).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, t, MEDIAN_EXACT_LIMIT).into_vec();
        idx.sort_unstable();
        idx
    };
    let xt = x.transpose();
    let mut dists: Vec<f64> = rows
        .par_iter()
        .enumerate()
        .flat_map_iter(|(a, &i)| {
            let xt = &xt;
            rows[a + 1..].iter().map(move |&j| (xt.column(i) - xt.column(j)).norm())
        })
        .collect();
    let mut med = median(&mut dists);
    if med == 0.0 {
        let mut positive: Vec<f64> = dists.into_iter().filter(|&d| d > 0.0).collect();
        if positive.is_empty() {
            return Err(Error::invalid("all rows are identical; no bandwidth can be derived"));
        }
        med = median(&mut positive);
    }
    Ok(med)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Which proxies the k3PRF fits inside cross-validation use.
#[derive(Debug, Clone)]
pub enum ProxyMode {
    /// `L` automatic proxies.
    Auto(usize),
    /// Theory-guided proxy columns, one row per period of the window,
    /// aligned with the target lead inside each fold.
    Columns(Mat),
}

/// Outcome of a bandwidth search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub anchor: f64,
    pub multipliers: Vec<f64>,
    pub grid: Vec<f64>,
    /// Mean validation OOS R² per grid point; `-inf` when a fit failed.
    pub cv_scores: Vec<f64>,
    pub selected: f64,
    pub fold_spec: String,
}

impl TuneResult {
    pub fn selected_index(&self) -> usize {
        self.grid.iter().position(|&s| s == self.selected).expect("selected value is on the grid")
    }
}

/// Out-of-sample R² of `pred` against `actual` relative to `benchmark`.
fn validation_r2(actual: &Vector, pred: &Vector, benchmark: f64) -> f64 {
    let sse: f64 = actual.iter().zip(pred.iter()).map(|(a, p)| (a - p) * (a - p)).sum();
    let sst: f64 = actual.iter().map(|a| (a - benchmark) * (a - benchmark)).sum();
    if sst > 0.0 {
        1.0 - sse / sst
    } else {
        f64::NEG_INFINITY
    }
}

struct Folds {
    x: Mat,
    y: Vector,
    z: Option<Mat>,
    split: usize,
}

impl Folds {
    fn new(x: &Mat, y: &Vector, z: Option<&Mat>, h: usize) -> Result<Self> {
        let t = x.nrows();
        if y.len() != t {
            return Err(Error::DimensionMismatch { context: "target length", expected: t, got: y.len() });
        }
        if h == 0 {
            return Err(Error::invalid("forecast horizon must be at least 1"));
        }
        if t < h + 8 {
            return Err(Error::InsufficientData(format!("cross-validation needs T >= h + 8, got T={t}, h={h}")));
        }
        let pairs = t - h;
        let xs = x.rows(0, pairs).into_owned();
        let ys = Vector::from_iterator(pairs, (h..t).map(|i| y[i]));
        let zs = match z {
            Some(z) => {
                if z.nrows() != t {
                    return Err(Error::DimensionMismatch { context: "proxy rows", expected: t, got: z.nrows() });
                }
                Some(z.rows(h, pairs).into_owned())
            }
            None => None,
        };
        Ok(Folds { x: xs, y: ys, z: zs, split: pairs / 2 })
    }

    fn spec(&self) -> String {
        let n = self.y.len();
        format!("contiguous halves [0,{}) and [{},{}) of {} direct pairs", self.split, self.split, n, n)
    }

    /// `(train, test)` row ranges for fold `k` in {0, 1}.
    fn ranges(&self, k: usize) -> ((usize, usize), (usize, usize)) {
        let n = self.y.len();
        let a = (0, self.split);
        let b = (self.split, n - self.split);
        if k == 0 { (a, b) } else { (b, a) }
    }

    fn score<F>(&self, predict: F) -> f64
    where
        F: Fn(&Mat, &Vector, Option<&Mat>, &Mat) -> Result<Vector>,
    {
        let mut total = 0.0;
        for k in 0..2 {
            let ((tr0, trn), (te0, ten)) = self.ranges(k);
            let xtr = self.x.rows(tr0, trn).into_owned();
            let ytr = self.y.rows(tr0, trn).into_owned();
            let ztr = self.z.as_ref().map(|z| z.rows(tr0, trn).into_owned());
            let xte = self.x.rows(te0, ten).into_owned();
            let yte = self.y.rows(te0, ten).into_owned();
            match predict(&xtr, &ytr, ztr.as_ref(), &xte) {
                Ok(pred) if pred.iter().all(|v| v.is_finite()) => total += validation_r2(&yte, &pred, ytr.mean()),
                Ok(_) => return f64::NEG_INFINITY,
                Err(e) => {
                    log::debug!("cv fold {k} failed: {e}");
                    return f64::NEG_INFINITY;
                }
            }
        }
        total / 2.0
    }
}

fn select(anchor: f64, multipliers: &[f64], folds: &Folds, eval: impl Fn(f64) -> f64 + Sync) -> Result<TuneResult> {
    if multipliers.is_empty() {
        return Err(Error::Config("sigma_multipliers must not be empty".into()));
    }
    if multipliers.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
        return Err(Error::Config("sigma_multipliers must be positive".into()));
    }
    let mut grid: Vec<f64> = multipliers.iter().map(|m| m * anchor).collect();
    let mut mults = multipliers.to_vec();
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[a].total_cmp(&grid[b]));
    grid = order.iter().map(|&i| grid[i]).collect();
    mults = order.iter().map(|&i| mults[i]).collect();
    let cv_scores: Vec<f64> = grid.par_iter().map(|&s| eval(s)).collect();
    let mut best: Option<usize> = None;
    for (i, &s) in cv_scores.iter().enumerate() {
        if s.is_finite() && best.map_or(true, |b| s > cv_scores[b]) {
            best = Some(i);
        }
    }
    let best = best.ok_or_else(|| Error::IllConditioned {
        matrix: "Z'JKJZ",
        detail: "every bandwidth candidate failed in cross-validation".into(),
    })?;
    debug_assert!(cv_scores.iter().all(|&s| !(s > cv_scores[best])));
    Ok(TuneResult { anchor, multipliers: mults, selected: grid[best], grid, cv_scores, fold_spec: folds.spec() })
}

/// Two-fold CV of the Gaussian bandwidth for the k3PRF.
///
/// `x` and `y` share dates; the folds are built from the direct pairs
/// `(x_t, y_{t+h})`. Ties go to the smaller bandwidth.
pub fn cv_tune_sigma(x: &Mat, y: &Vector, proxies: &ProxyMode, h: usize, multipliers: &[f64]) -> Result<TuneResult> {
    let z = match proxies {
        ProxyMode::Columns(z) => Some(z),
        ProxyMode::Auto(_) => None,
    };
    let folds = Folds::new(x, y, z, h)?;
    let anchor = median_heuristic_sigma(&folds.x, 0)?;
    select(anchor, multipliers, &folds, |sigma| {
        let spec = KernelSpec::gaussian(sigma);
        folds.score(|xtr, ytr, ztr, xte| {
            let model = match proxies {
                ProxyMode::Auto(l) => auto_proxy_fit(xtr, ytr, &spec, *l)?.1,
                ProxyMode::Columns(_) => {
                    let z = ztr.expect("columns mode carries proxies").clone();
                    fit(xtr, ytr, &ProxySet::new(z, ProxyProvenance::Auto(0))?, &spec)?
                }
            };
            model.predict(xte)
        })
    })
}

/// Two-fold CV of the Gaussian bandwidth for kernel PCA regression. The
/// component count is re-chosen by the eigenvalue-ratio test (capped at
/// `k_max`) in every fold.
pub fn cv_tune_sigma_kpca(x: &Mat, y: &Vector, k_max: usize, h: usize, multipliers: &[f64]) -> Result<TuneResult> {
    let folds = Folds::new(x, y, None, h)?;
    let anchor = median_heuristic_sigma(&folds.x, 0)?;
    select(anchor, multipliers, &folds, |sigma| {
        let spec = KernelSpec::gaussian(sigma);
        folds.score(|xtr, ytr, _, xte| {
            let mut kpca = KernelPca::fit(xtr, &spec, k_max)?;
            let k = kpca.ratio_k(k_max)?;
            kpca.truncate(k);
            let reg = ols(&with_intercept(kpca.train_factors()), ytr, "kPCA regression")?;
            Ok(with_intercept(&kpca.transform(xte)?) * reg.coefficients)
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn median_of_three_rows() {
        let x = Mat::from_row_slice(3, 2, &[0.0, 0.0, 0.0, 0.0, 3.0, 4.0]);
        assert_eq!(median_heuristic_sigma(&x, 0).unwrap(), 5.0);
        let scaled = &x * 2.5;
        assert!((median_heuristic_sigma(&scaled, 0).unwrap() - 12.5).abs() < 1e-12);
        assert!(median_heuristic_sigma(&Mat::from_element(4, 2, 1.0), 0).is_err());
        assert!(median_heuristic_sigma(&Mat::zeros(2, 2), 0).is_err());
    }

    #[test]
    fn median_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Mat::from_fn(5, 3, |_, _| Distribution::<f64>::sample(&StandardNormal, &mut rng));
        let mut all = Vec::new();
        for i in 0..5 {
            for j in i + 1..5 {
                all.push((x.row(i) - x.row(j)).norm());
            }
        }
        assert_eq!(all.len(), 10);
        all.sort_by(f64::total_cmp);
        let expected = 0.5 * (all[4] + all[5]);
        assert!((median_heuristic_sigma(&x, 0).unwrap() - expected).abs() < 1e-12);
    }

    fn linear_data(seed: u64, t: usize) -> (Mat, Vector) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut n = || Distribution::<f64>::sample(&StandardNormal, &mut rng);
        let f: Vec<f64> = (0..t).map(|_| n()).collect();
        let load: Vec<f64> = (0..8).map(|_| n()).collect();
        let x = Mat::from_fn(t, 8, |i, j| f[i] * load[j] + 0.5 * n());
        let y = Vector::from_iterator(t, (0..t).map(|i| if i > 0 { f[i - 1] } else { 0.0 } + 0.3 * n()));
        (x, y)
    }

    #[test]
    fn single_candidate_is_selected() {
        let (x, y) = linear_data(1, 60);
        let r = cv_tune_sigma(&x, &y, &ProxyMode::Auto(1), 1, &[2.0]).unwrap();
        assert_eq!(r.grid.len(), 1);
        assert_eq!(r.selected, r.grid[0]);
        assert!((r.selected - 2.0 * r.anchor).abs() < 1e-12);
    }

    #[test]
    fn selected_attains_maximum_and_is_deterministic() {
        let (x, y) = linear_data(2, 80);
        let a = cv_tune_sigma(&x, &y, &ProxyMode::Auto(2), 1, &DEFAULT_MULTIPLIERS).unwrap();
        let b = cv_tune_sigma(&x, &y, &ProxyMode::Auto(2), 1, &DEFAULT_MULTIPLIERS).unwrap();
        assert_eq!(a, b);
        let i = a.selected_index();
        assert!(a.cv_scores.iter().all(|&s| s <= a.cv_scores[i]));
        let k = cv_tune_sigma_kpca(&x, &y, 2, 1, &DEFAULT_MULTIPLIERS).unwrap();
        let j = k.selected_index();
        assert!(k.cv_scores.iter().all(|&s| s <= k.cv_scores[j]));
    }

    #[test]
    fn ties_go_to_smaller_sigma() {
        let (x, y) = linear_data(3, 60);
        // duplicated multipliers produce identical scores
        let r = cv_tune_sigma(&x, &y, &ProxyMode::Auto(1), 2, &[4.0, 4.0]).unwrap();
        assert_eq!(r.selected_index(), 0);
        let folds = Folds::new(&x, &y, None, 1).unwrap();
        let flat = select(1.0, &[8.0, 1.0, 2.0], &folds, |_| 0.5).unwrap();
        assert_eq!(flat.selected, 1.0);
    }

    #[test]
    fn empty_grid_rejected() {
        let (x, y) = linear_data(4, 40);
        assert!(cv_tune_sigma(&x, &y, &ProxyMode::Auto(1), 1, &[]).is_err());
    }
}
