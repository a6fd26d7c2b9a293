use k3prf::baselines::{ar_forecast, di_forecast};
use k3prf::data::{make_direct_horizon, Standardizer};
use k3prf::evaluation::{oos_r2, tolerance_table_from_rows, Method, ReportRow, Scope};
use k3prf::kernel::{center_gram, gram};
use k3prf::linalg::{Mat, Vector};
use k3prf::{fit, KernelSpec, ProxyProvenance, ProxySet};
use proptest::prelude::*;

fn max_abs(a: &Vector, b: &Vector) -> f64 {
    (a - b).amax()
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-3.0..3.0f64, rows * cols).prop_map(move |v| Mat::from_row_slice(rows, cols, &v))
}

fn kernel() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![Just(KernelSpec::Linear), (0.5..2.0f64).prop_map(KernelSpec::poly2), (1.0..6.0f64).prop_map(KernelSpec::gaussian)]
}

/// `(x, y)` with `y` loading on the first column plus noise.
fn instance() -> impl Strategy<Value = (Mat, Vector)> {
    (12usize..30, 2usize..6).prop_flat_map(|(t, n)| {
        (matrix(t, n), prop::collection::vec(-0.5..0.5f64, t)).prop_map(|(x, e)| {
            let y = Vector::from_fn(x.nrows(), |i, _| x[(i, 0)] + e[i]);
            (x, y)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn proxy_affine_maps_leave_forecasts_unchanged(
        (x, y) in instance(),
        spec in kernel(),
        c in 0.2..5.0f64,
        shift in -10.0..10.0f64,
    ) {
        let z = Mat::from_column_slice(y.len(), 1, y.as_slice());
        let base = fit(&x, &y, &ProxySet::new(z.clone(), ProxyProvenance::Auto(1)).unwrap(), &spec).unwrap();
        let moved = z.map(|v| c * v + shift);
        let other = fit(&x, &y, &ProxySet::new(moved, ProxyProvenance::Auto(1)).unwrap(), &spec).unwrap();
        prop_assert!(max_abs(&base.fitted_values(), &other.fitted_values()) < 1e-8);
        let new = x.rows(0, 3).map(|v| v + 0.1);
        prop_assert!(max_abs(&base.predict(&new).unwrap(), &other.predict(&new).unwrap()) < 1e-8);
    }

    #[test]
    fn predict_on_training_rows_is_fitted((x, y) in instance(), spec in kernel()) {
        let model = fit(&x, &y, &ProxySet::target(&y).unwrap(), &spec).unwrap();
        prop_assert!(max_abs(&model.predict(&x).unwrap(), &model.fitted_values()) < 1e-9);
        prop_assert!((model.fitted_values().mean() - y.mean()).abs() < 1e-9);
    }

    #[test]
    fn centered_gram_has_zero_margins(x in (3usize..15, 1usize..5).prop_flat_map(|(t, n)| matrix(t, n)), spec in kernel()) {
        let k = center_gram(&gram(&spec, &x).unwrap());
        let scale = 1.0 + k.values().amax();
        for i in 0..k.dim() {
            prop_assert!(k.values().row(i).sum().abs() < 1e-10 * scale * k.dim() as f64);
        }
    }

    #[test]
    fn oos_r2_anchors(actual in prop::collection::vec(-5.0..5.0f64, 2..30), mean in -1.0..1.0f64) {
        prop_assume!(actual.iter().any(|a| (a - mean).abs() > 1e-6));
        prop_assert_eq!(oos_r2(&actual, &actual, mean).unwrap(), 1.0);
        prop_assert_eq!(oos_r2(&actual, &vec![mean; actual.len()], mean).unwrap(), 0.0);
    }

    #[test]
    fn di_without_factors_is_ar(y in prop::collection::vec(-3.0..3.0f64, 30..60), p in 1usize..4, h in 1usize..4) {
        let y = Vector::from_vec(y);
        let ar = ar_forecast(&y, p, h).unwrap();
        let di = di_forecast(&y, None, p, 0, h).unwrap();
        prop_assert_eq!(ar.value.to_bits(), di.value.to_bits());
    }

    #[test]
    fn standardizer_round_trips(x in (5usize..20, 1usize..5).prop_flat_map(|(t, n)| matrix(t, n))) {
        let Ok((z, s)) = Standardizer::fit_transform(&x, None) else { return Ok(()); };
        prop_assert!((s.inverse(&z) - &x).amax() < 1e-12 * (1.0 + x.amax()));
        for j in 0..z.ncols() {
            prop_assert!(z.column(j).mean().abs() < 1e-12);
        }
    }

    #[test]
    fn direct_pairs_index_identity(y in prop::collection::vec(-3.0..3.0f64, 3..40), h in 1usize..5) {
        let t = y.len();
        prop_assume!(h < t);
        let y = Vector::from_vec(y);
        let x = Mat::from_fn(t, 2, |i, j| (i * 2 + j) as f64);
        let pairs = make_direct_horizon(&y, &x, h).unwrap();
        prop_assert_eq!(pairs.target.len(), t - h);
        for s in 0..t - h {
            prop_assert_eq!(pairs.target[s], y[s + h]);
            prop_assert_eq!(pairs.features[(s, 1)], x[(s, 1)]);
        }
    }

    #[test]
    fn tolerance_frequencies_are_consistent(scores in prop::collection::vec(-0.5..0.9f64, 3 * 4 * 4)) {
        let methods = [Method::K3prf, Method::Tprf, Method::Pc, Method::Ar];
        let mut rows = Vec::new();
        let mut i = 0;
        for target in ["A", "B", "C"] {
            for h in [1, 2, 6, 12] {
                for m in methods {
                    rows.push(ReportRow { target: target.into(), method: m, horizon: h, oos_r2: scores[i], n_forecasts: 10 });
                    i += 1;
                }
            }
        }
        let tols = [0.0, 5.0, 10.0, 20.0];
        let table = tolerance_table_from_rows(&rows, &tols).unwrap();
        for scope in Scope::ALL {
            let zero: f64 = table.row(scope, 0.0).unwrap().percent.iter().filter(|p| !p.is_nan()).sum();
            prop_assert!((zero - 100.0).abs() < 0.01);
            for m in methods {
                let series: Vec<f64> = tols.iter().filter_map(|&t| table.percent(scope, t, m)).collect();
                prop_assert!(series.windows(2).all(|w| w[1] >= w[0] || w[0].is_nan()));
            }
        }
    }
}
