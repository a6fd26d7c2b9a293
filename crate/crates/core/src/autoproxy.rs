//! Automatic proxies built from target residuals.
//!
//! Proxy 1 is the target itself. Each further proxy is the in-sample residual
//! of the fit that used all previous proxies.

use crate::error::{Error, Result};
use crate::estimator::{fit_with_gram, K3prfFit};
use crate::kernel::{gram, KernelSpec};
use crate::linalg::{Mat, Vector};

/// Record of an automatic proxy construction.
#[derive(Debug, Clone)]
pub struct AutoProxyTrace {
    /// T x L, column k is `residuals[k]`.
    pub proxies: Mat,
    /// `r_0 = y, r_1, ..., r_{L-1}`.
    pub residuals: Vec<Vector>,
    /// In-sample fits `y_hat_1, ..., y_hat_L` using proxies `1..=k`.
    pub forecasts: Vec<Vector>,
}

impl AutoProxyTrace {
    pub fn num_proxies(&self) -> usize {
        self.proxies.ncols()
    }

    /// Fitted values of the final fit, `y_hat_L`.
    pub fn final_forecast(&self) -> &Vector {
        self.forecasts.last().expect("trace holds at least one forecast")
    }
}

pub fn build_auto_proxies(x: &Mat, y: &Vector, spec: &KernelSpec, l: usize) -> Result<AutoProxyTrace> {
    auto_proxy_fit(x, y, spec, l).map(|(trace, _)| trace)
}

/// Builds `l` automatic proxies and returns the trace together with the fit
/// that uses all of them.
pub fn auto_proxy_fit(x: &Mat, y: &Vector, spec: &KernelSpec, l: usize) -> Result<(AutoProxyTrace, K3prfFit)> {
    spec.validate()?;
    if l == 0 {
        return Err(Error::invalid("number of automatic proxies must be at least 1"));
    }
    let t = x.nrows();
    if y.len() != t {
        return Err(Error::DimensionMismatch { context: "target length", expected: t, got: y.len() });
    }
    if t <= l {
        return Err(Error::InsufficientData(format!("need T > L, got T={t}, L={l}")));
    }
    let k = gram(spec, x)?;
    let mut proxies = Mat::zeros(t, l);
    let mut residuals = Vec::with_capacity(l);
    let mut forecasts = Vec::with_capacity(l);
    let mut residual = y.clone();
    let mut last = None;
    for step in 1..=l {
        proxies.set_column(step - 1, &residual);
        residuals.push(residual.clone());
        let z = proxies.columns(0, step).into_owned();
        let fit = fit_with_gram(x, k.clone(), y, &z, spec)
            .map_err(|e| Error::AutoProxy { step, source: Box::new(e) })?;
        let y_hat = fit.fitted_values();
        residual = y - &y_hat;
        forecasts.push(y_hat);
        last = Some(fit);
    }
    let fit = last.expect("l >= 1");
    Ok((AutoProxyTrace { proxies, residuals, forecasts }, fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{fit, ProxyProvenance, ProxySet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn data(t: usize, n: usize, seed: u64, noise: f64) -> (Mat, Vector) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = Mat::from_fn(t, 2, |_, _| StandardNormal.sample(&mut rng));
        let load = Mat::from_fn(2, n, |_, _| StandardNormal.sample(&mut rng));
        let x = &f * &load + Mat::from_fn(t, n, |_, _| noise * Distribution::<f64>::sample(&StandardNormal, &mut rng));
        let y = Vector::from_iterator(
            t,
            (0..t).map(|i| f[(i, 0)] - 0.5 * f[(i, 1)] + noise * Distribution::<f64>::sample(&StandardNormal, &mut rng)),
        );
        (x, y)
    }

    #[test]
    fn single_proxy_is_target_fit() {
        let (x, y) = data(30, 6, 1, 0.3);
        let spec = KernelSpec::gaussian(2.0);
        let trace = build_auto_proxies(&x, &y, &spec, 1).unwrap();
        assert_eq!(trace.proxies.column(0), y.column(0));
        let direct = fit(&x, &y, &ProxySet::target(&y).unwrap(), &spec).unwrap();
        assert_eq!(trace.final_forecast(), &direct.fitted_values());
    }

    #[test]
    fn second_proxy_is_replayed_residual() {
        let (x, y) = data(40, 6, 2, 0.3);
        let spec = KernelSpec::poly2(1.0);
        let trace = build_auto_proxies(&x, &y, &spec, 2).unwrap();
        let one = fit(&x, &y, &ProxySet::target(&y).unwrap(), &spec).unwrap();
        let r1 = &y - one.fitted_values();
        assert!((trace.proxies.column(1) - r1).amax() < 1e-12);
        for (k, forecast) in trace.forecasts.iter().enumerate().take(trace.num_proxies() - 1) {
            assert_eq!(&trace.residuals[k + 1], &(&y - forecast));
        }
    }

    #[test]
    fn noiseless_target_leaves_no_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = Mat::from_fn(25, 1, |_, _| StandardNormal.sample(&mut rng));
        let x = &f * Mat::from_fn(1, 5, |_, _| StandardNormal.sample(&mut rng));
        let y = Vector::from_column_slice((&f * 2.0).add_scalar(1.0).as_slice());
        let trace = build_auto_proxies(&x, &y, &KernelSpec::Linear, 1).unwrap();
        let r1 = &y - trace.final_forecast();
        assert!(r1.norm() <= 1e-6 * y.norm());
        // a second proxy would be the zero residual
        let err = build_auto_proxies(&x, &y, &KernelSpec::Linear, 2).unwrap_err();
        assert!(matches!(err, Error::AutoProxy { step: 2, .. }), "{err}");
    }

    #[test]
    fn residual_norm_non_increasing() {
        for seed in 0..10 {
            let (x, y) = data(35, 8, 10 + seed, 0.5);
            let trace = build_auto_proxies(&x, &y, &KernelSpec::gaussian(3.0), 3).unwrap();
            let norms: Vec<f64> = trace.forecasts.iter().map(|f| (&y - f).norm()).collect();
            for w in norms.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{norms:?}");
            }
        }
    }

    #[test]
    fn replay_is_bit_identical() {
        let (x, y) = data(30, 5, 4, 0.4);
        let spec = KernelSpec::gaussian(1.7);
        let trace = build_auto_proxies(&x, &y, &spec, 3).unwrap();
        let replay = ProxySet::theory_guided(trace.proxies.clone(), vec!["r0".into(), "r1".into(), "r2".into()]).unwrap();
        assert!(matches!(replay.provenance(), ProxyProvenance::TheoryGuided(_)));
        let refit = fit(&x, &y, &replay, &spec).unwrap();
        assert_eq!(&refit.fitted_values(), trace.final_forecast());
    }
}
