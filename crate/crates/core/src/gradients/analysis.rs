//! Predictions and statistics for Gaussian coherent parameter noise.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::TAU;
use std::io::Write;

use super::{hessian_trace, ScalarCircuitFunction};
use crate::ansatz::{AnsatzInput, AnsatzSpec, ExecConfig};
use crate::error::{QrlError, Result};
use crate::noise::sample_perturbation;
use crate::qsim::Observable;
use crate::rng::RngStream;

/// Second-order prediction of the mean output under `N(0, σ²)` parameter noise: `f + σ²/2 · Tr H`.
pub fn gaussian_shift_prediction(f_theta: f64, tr_h: f64, sigma: f64) -> f64 {
    f_theta + 0.5 * sigma * sigma * tr_h
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBound {
    pub value: f64,
    /// Set when the bound reaches `2‖O‖∞` and so says nothing beyond `|f| ≤ ‖O‖∞`.
    pub uninformative: bool,
}

/// `‖O‖∞ (e^{σ²M/2} − 1)`.
pub fn gaussian_error_bound(sigma: f64, m: usize, norm_o: f64) -> Result<ErrorBound> {
    if !(sigma >= 0.0) || m == 0 {
        return Err(QrlError::InvalidArgument("bound needs sigma >= 0 and M >= 1".into()));
    }
    let value = norm_o * (0.5 * sigma * sigma * m as f64).exp_m1();
    Ok(ErrorBound {
        value,
        uninformative: value >= 2.0 * norm_o,
    })
}

/// `√(2/M) · ln(1 + ε/‖O‖∞)`.
pub fn sufficient_sigma(epsilon: f64, m: usize, norm_o: f64) -> Result<f64> {
    if !(epsilon > 0.0) || m == 0 || !(norm_o > 0.0) {
        return Err(QrlError::InvalidArgument(
            "sufficient sigma needs epsilon > 0, M >= 1 and a positive norm".into(),
        ));
    }
    Ok((2.0 / m as f64).sqrt() * (epsilon / norm_o).ln_1p())
}

/// Approximate variance of `Tr H` over a 2-design: `M(M+1) / (4(2^n + 1))`.
pub fn trh_variance_approx(m: usize, n_qubits: usize) -> f64 {
    let m = m as f64;
    m * (m + 1.0) / (4.0 * ((1u64 << n_qubits) as f64 + 1.0))
}

/// One sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub sigma: f64,
    /// `|mean f(θ0 + δθ) − f(θ0)|`.
    pub value: f64,
    pub stderr: f64,
}

/// Mean output deviation under fresh perturbations of all circuit parameters, per `σ`.
pub fn perturbation_sweep(
    f: &ScalarCircuitFunction,
    theta0: &[f64],
    sigmas: &[f64],
    n_samples: usize,
    rng: &mut RngStream,
) -> Result<Vec<SweepRow>> {
    if n_samples < 100 {
        return Err(QrlError::InvalidArgument("a sweep needs at least 100 samples per sigma".into()));
    }
    let mut rng = rng.fork();
    let f0 = f.eval(theta0, &mut rng)?;
    let m = theta0.len();
    sigmas
        .iter()
        .enumerate()
        .map(|(si, &sigma)| {
            let base = rng.derive(si as u64);
            let devs: Vec<f64> = (0..n_samples)
                .into_par_iter()
                .map(|k| {
                    let mut r = base.derive(k as u64);
                    let d = sample_perturbation(m, sigma, &mut r);
                    Ok(f.eval(&d.apply_to(theta0), &mut r)? - f0)
                })
                .collect::<Result<_>>()?;
            let (mean, sd) = mean_std(&devs);
            Ok(SweepRow {
                sigma,
                value: mean.abs(),
                stderr: sd / (n_samples as f64).sqrt(),
            })
        })
        .collect()
}

/// `Tr H` at uniformly random parameter points.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceDistribution {
    pub samples: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

pub fn hessian_trace_distribution(
    spec: &AnsatzSpec,
    input: &AnsatzInput,
    obs: &Observable,
    n_samples: usize,
    rng: &mut RngStream,
) -> Result<TraceDistribution> {
    if n_samples < 500 {
        return Err(QrlError::InvalidArgument("a trace distribution needs at least 500 samples".into()));
    }
    let f = ScalarCircuitFunction::new(spec, input.clone(), obs.clone(), ExecConfig::exact())?;
    let base = rng.fork();
    let samples: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let mut r = base.derive(k as u64);
            let theta: Vec<f64> = (0..spec.n_params()).map(|_| r.uniform() * TAU).collect();
            hessian_trace(&f, &theta, &mut r)
        })
        .collect::<Result<_>>()?;
    let (mean, std) = mean_std(&samples);
    Ok(TraceDistribution { samples, mean, std })
}

/// Sample mean and unbiased standard deviation.
pub(crate) fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// CSV with header `sigma,value,stderr`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// CSV with header `sample_id,value,stderr`; exact traces carry zero standard error.
pub fn write_distribution_csv<W: Write>(dist: &TraceDistribution, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["sample_id", "value", "stderr"])?;
    for (k, v) in dist.samples.iter().enumerate() {
        wr.write_record([k.to_string(), format!("{v:.17e}"), "0".into()])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formulas() {
        assert_eq!(gaussian_shift_prediction(0.4, 11.0, 0.0), 0.4);
        assert!((gaussian_shift_prediction(0.3, -8.0, 0.05) - 0.29).abs() < 1e-15);
        assert_eq!(gaussian_error_bound(0.0, 92, 1.0).unwrap().value, 0.0);
        let b = gaussian_error_bound(0.01, 100, 1.0).unwrap();
        assert!((b.value - 0.005012520859401063).abs() < 1e-15);
        assert!(!b.uninformative);
        assert!(gaussian_error_bound(0.5, 92, 1.0).unwrap().uninformative);
        let s = sufficient_sigma(0.1, 100, 1.0).unwrap();
        assert!((s - 0.02f64.sqrt() * 1.1f64.ln()).abs() < 1e-15);
        assert!(sufficient_sigma(0.0, 100, 1.0).is_err());
        assert!((trh_variance_approx(92, 4) - 8556.0 / 68.0).abs() < 1e-12);
        assert!((trh_variance_approx(1, 3) - 2.0 / 36.0).abs() < 1e-15);
    }

    #[test]
    fn variance_below_haar_bound() {
        for n in 1..=8 {
            for m in [1, 5, 20, 92, 200] {
                assert!(trh_variance_approx(m, n) <= (m * m) as f64 / (1u64 << n) as f64);
            }
        }
    }

    #[test]
    fn csv_headers() {
        let mut buf = Vec::new();
        write_sweep_csv(&[SweepRow { sigma: 0.1, value: 0.2, stderr: 0.01 }], &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("sigma,value,stderr\n"));
    }
}
