//! One-shot detection on a measurement read from files.

use num_complex::Complex;
use serde::Serialize;

use crate::debias::{solve_fixed_point, FixedPoint};
use crate::detectors::dwld_from_estimate;
use crate::error::{Error, Result};
use crate::model::{ComplexSignal, DesignMatrix};
use crate::solver::{solve_weighted_lasso_observed, SolverOptions, WeightVector};

/// Row-orthogonality residual above which `detect_once` warns.
pub const ROW_ORTHOGONALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum WeightInput {
    Scalar(f64),
    Values(Vec<f64>),
}

impl WeightInput {
    pub fn build(&self, n: usize) -> Result<WeightVector<f64>> {
        match self {
            WeightInput::Scalar(l) => WeightVector::uniform(n, *l),
            WeightInput::Values(v) if v.len() != n => Err(Error::DimensionMismatch {
                expected: n,
                actual: v.len(),
                context: "weights vs matrix columns",
            }),
            WeightInput::Values(v) => WeightVector::new(v.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectionReport {
    pub x_wl: ComplexSignal<f64>,
    pub x_d: ComplexSignal<f64>,
    pub sigma_w2: f64,
    pub lambda_cro: f64,
    pub rho_ca: f64,
    pub rss_bar: f64,
    pub kappa: f64,
    pub detected: Vec<usize>,
    pub solver_iterations: usize,
    pub kkt_residual: f64,
    pub warnings: Vec<String>,
}

/// Solves, debiases and thresholds a single measurement at a uniform target
/// false-alarm rate `pfa`.
pub fn detect_once(
    y: Vec<Complex<f64>>,
    a: &DesignMatrix<f64>,
    weights: &WeightInput,
    pfa: f64,
    sigma2: f64,
    opts: &SolverOptions<f64>,
) -> Result<DetectionReport> {
    let y = ComplexSignal::new(y)?;
    if y.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            actual: y.len(),
            context: "measurement vs matrix rows",
        });
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma2 must be >= 0, got {sigma2}"
        )));
    }
    let lambda = weights.build(a.cols())?;
    let mut warnings = Vec::new();
    if !a.is_row_orthogonal(ROW_ORTHOGONALITY_TOL) {
        warnings.push(format!(
            "matrix rows are not orthonormal (residual {:.3e}); the error-variance formula assumes a row-orthogonal design",
            a.row_orthogonality_residual()
        ));
    }
    let report = solve_weighted_lasso_observed(&y, a, &lambda, opts, |_| {})?;
    let out = dwld_from_estimate(
        report.x.clone(),
        &y,
        a,
        &lambda,
        &vec![pfa; a.cols()],
        sigma2,
    )?;
    Ok(DetectionReport {
        x_wl: report.x,
        detected: out.decisions.detected(),
        x_d: out.debias.x_d,
        sigma_w2: out.debias.sigma_w2,
        lambda_cro: out.debias.lambda_cro,
        rho_ca: out.debias.rho_ca,
        rss_bar: out.debias.rss_bar,
        kappa: out.kappa.as_slice().first().copied().unwrap_or(0.0),
        solver_iterations: report.iterations,
        kkt_residual: report.kkt_residual,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FixpointReport {
    pub lambda_cro: f64,
    pub rho_ca: f64,
    pub iterations: usize,
    pub residual_lambda: f64,
    pub residual_rho: f64,
}

impl From<FixedPoint<f64>> for FixpointReport {
    fn from(f: FixedPoint<f64>) -> Self {
        Self {
            lambda_cro: f.lambda_cro,
            rho_ca: f.rho_ca,
            iterations: f.iterations,
            residual_lambda: f.residual_lambda,
            residual_rho: f.residual_rho,
        }
    }
}

/// Solves the debiasing fixed point for a given estimate.
pub fn fixpoint_debug(
    x_wl: Vec<Complex<f64>>,
    weights: &WeightInput,
    gamma: f64,
) -> Result<FixpointReport> {
    let x = ComplexSignal::new(x_wl)?;
    let lambda = weights.build(x.len())?;
    solve_fixed_point(&x, &lambda, gamma).map(Into::into)
}
