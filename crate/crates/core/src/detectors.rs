//! Per-entry detectors and their empirical performance metrics.
//!
//! * DWLD thresholds the debiased estimate at `-sigma_w^2 ln(pfa_i)`.
//! * NWLD thresholds the raw weighted LASSO estimate at a user-chosen level.
//! * DLD is DWLD with uniform weights.
//!
//! All tests are strict: `|x_i|^2 > kappa_i` rejects the null, ties do not.

use serde::Serialize;

use crate::debias::{debias, DebiasResult};
use crate::error::{Error, Result};
use crate::model::{ComplexSignal, DesignMatrix};
use crate::scalar::Real;
use crate::solver::{solve_weighted_lasso, SolverOptions, WeightVector};
use crate::stats::wilson_interval;

/// Squared-magnitude thresholds. `+inf` entries never reject.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ThresholdVector<T>(Vec<T>);

impl<T: Real> ThresholdVector<T> {
    pub fn new(kappa: Vec<T>) -> Result<Self> {
        if kappa.iter().any(|k| !(*k >= T::zero())) {
            return Err(Error::InvalidParameter(
                "thresholds must be non-negative".into(),
            ));
        }
        Ok(Self(kappa))
    }

    pub fn uniform(n: usize, kappa: T) -> Result<Self> {
        Self::new(vec![kappa; n])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `true` rejects the null hypothesis for that entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct DecisionVector(Vec<bool>);

impl DecisionVector {
    pub fn new(phi: Vec<bool>) -> Self {
        Self(phi)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn detected(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
            .collect()
    }
}

/// `kappa_i = -sigma_w2 ln(pfa_i)`.
pub fn threshold_from_pfa<T: Real>(sigma_w2: T, pfa: &[T]) -> Result<ThresholdVector<T>> {
    if !(sigma_w2 > T::zero() && sigma_w2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma_w2 must be positive, got {sigma_w2}"
        )));
    }
    let mut kappa = Vec::with_capacity(pfa.len());
    for (i, &p) in pfa.iter().enumerate() {
        if !(p > T::zero() && p <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "false-alarm probability {i} must lie in (0, 1], got {p}"
            )));
        }
        // -0.0 for p = 1 would still compare fine, but keep the vector clean.
        kappa.push((-sigma_w2 * p.ln()).max(T::zero()));
    }
    ThresholdVector::new(kappa)
}

fn detect<T: Real>(x: &ComplexSignal<T>, kappa: &ThresholdVector<T>) -> Result<DecisionVector> {
    if x.len() != kappa.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: kappa.len(),
            context: "thresholds vs estimate",
        });
    }
    Ok(DecisionVector(
        x.iter()
            .zip(kappa.as_slice())
            .map(|(v, &k)| v.norm_sqr() > k)
            .collect(),
    ))
}

/// Rejects where `|x_d_i|^2 > kappa_i`.
pub fn dwld_detect<T: Real>(
    x_d: &ComplexSignal<T>,
    kappa: &ThresholdVector<T>,
) -> Result<DecisionVector> {
    detect(x_d, kappa)
}

/// Rejects where `|x_wl_i|^2 > kappa_wl_i`; `kappa_wl = 0` reports the support.
pub fn nwld_detect<T: Real>(
    x_wl: &ComplexSignal<T>,
    kappa_wl: &ThresholdVector<T>,
) -> Result<DecisionVector> {
    detect(x_wl, kappa_wl)
}

/// Output of one debiased detector run.
#[derive(Debug, Clone)]
pub struct DwldOutput<T: Real> {
    pub x_wl: ComplexSignal<T>,
    pub debias: DebiasResult<T>,
    pub kappa: ThresholdVector<T>,
    pub decisions: DecisionVector,
}

/// Thresholds and decisions for an already-computed weighted LASSO estimate.
pub fn dwld_from_estimate<T: Real>(
    x_wl: ComplexSignal<T>,
    y: &ComplexSignal<T>,
    a: &DesignMatrix<T>,
    lambda: &WeightVector<T>,
    pfa: &[T],
    sigma2: T,
) -> Result<DwldOutput<T>> {
    if pfa.len() != a.cols() {
        return Err(Error::DimensionMismatch {
            expected: a.cols(),
            actual: pfa.len(),
            context: "false-alarm targets vs matrix columns",
        });
    }
    let db = debias(&x_wl, y, a, lambda, sigma2)?;
    let kappa = threshold_from_pfa(db.sigma_w2, pfa)?;
    let decisions = dwld_detect(&db.x_d, &kappa)?;
    Ok(DwldOutput {
        x_wl,
        debias: db,
        kappa,
        decisions,
    })
}

/// Full debiased weighted LASSO detector: solve, debias, threshold, decide.
pub fn dwld_pipeline<T: Real>(
    y: &ComplexSignal<T>,
    a: &DesignMatrix<T>,
    lambda: &WeightVector<T>,
    pfa: &[T],
    sigma2: T,
    opts: &SolverOptions<T>,
) -> Result<DwldOutput<T>> {
    let x_wl = solve_weighted_lasso(y, a, lambda, opts)?;
    dwld_from_estimate(x_wl, y, a, lambda, pfa, sigma2)
}

/// Non-weighted debiased detector: [`dwld_pipeline`] with every weight equal
/// to `lambda_scalar`.
pub fn dld_pipeline<T: Real>(
    y: &ComplexSignal<T>,
    a: &DesignMatrix<T>,
    lambda_scalar: T,
    pfa: &[T],
    sigma2: T,
    opts: &SolverOptions<T>,
) -> Result<DwldOutput<T>> {
    if !(lambda_scalar > T::zero()) {
        return Err(Error::InvalidParameter(
            "DLD regularization must be positive".into(),
        ));
    }
    let lambda = WeightVector::uniform(a.cols(), lambda_scalar)?;
    dwld_pipeline(y, a, &lambda, pfa, sigma2, opts)
}

/// Pooled empirical rate with its 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rate {
    pub hits: u64,
    pub trials: u64,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Rate {
    pub fn from_counts(hits: u64, trials: u64) -> Option<Self> {
        if trials == 0 {
            return None;
        }
        let (lo, hi) = wilson_interval(hits, trials, 1.959_963_984_540_054);
        Some(Rate {
            hits,
            trials,
            value: hits as f64 / trials as f64,
            lo,
            hi,
        })
    }

    /// Binomial standard error `sqrt(p (1-p) / n)`.
    pub fn std_error(&self) -> f64 {
        (self.value * (1.0 - self.value) / self.trials as f64).sqrt()
    }
}

/// Per-entry counters behind the false-alarm and detection rates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MetricsAccumulator {
    false_alarms: Vec<u64>,
    null_occurrences: Vec<u64>,
    detections: Vec<u64>,
    support_occurrences: Vec<u64>,
}

impl MetricsAccumulator {
    pub fn new(n: usize) -> Self {
        Self {
            false_alarms: vec![0; n],
            null_occurrences: vec![0; n],
            detections: vec![0; n],
            support_occurrences: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.false_alarms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.false_alarms.is_empty()
    }

    /// Records one trial. `support` lists the true nonzero indices.
    pub fn accumulate(&mut self, decisions: &DecisionVector, support: &[usize]) -> Result<()> {
        let n = self.len();
        if decisions.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: decisions.len(),
                context: "decisions vs accumulator",
            });
        }
        let mut in_support = vec![false; n];
        for &i in support {
            if i >= n {
                return Err(Error::InvalidParameter(format!(
                    "support index {i} out of range"
                )));
            }
            in_support[i] = true;
        }
        for (i, (&d, &s)) in decisions.0.iter().zip(&in_support).enumerate() {
            let phi = u64::from(d);
            if s {
                self.support_occurrences[i] += 1;
                self.detections[i] += phi;
            } else {
                self.null_occurrences[i] += 1;
                self.false_alarms[i] += phi;
            }
        }
        Ok(())
    }

    /// Adds another accumulator's counts. Associative and commutative.
    pub fn merge(&mut self, other: &MetricsAccumulator) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: other.len(),
                context: "accumulator merge",
            });
        }
        let pairs = [
            (&mut self.false_alarms, &other.false_alarms),
            (&mut self.null_occurrences, &other.null_occurrences),
            (&mut self.detections, &other.detections),
            (&mut self.support_occurrences, &other.support_occurrences),
        ];
        for (a, b) in pairs {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
        Ok(())
    }

    /// Per-entry false-alarm rate; `None` where the entry was never null.
    pub fn pfa_entry(&self, i: usize) -> Option<f64> {
        (self.null_occurrences[i] > 0)
            .then(|| self.false_alarms[i] as f64 / self.null_occurrences[i] as f64)
    }

    /// Per-entry detection rate; `None` where the entry was never in the support.
    pub fn pd_entry(&self, i: usize) -> Option<f64> {
        (self.support_occurrences[i] > 0)
            .then(|| self.detections[i] as f64 / self.support_occurrences[i] as f64)
    }

    /// Pooled false-alarm rate over all entries and trials.
    pub fn total_pfa(&self) -> Option<Rate> {
        Rate::from_counts(
            self.false_alarms.iter().sum(),
            self.null_occurrences.iter().sum(),
        )
    }

    /// Pooled detection rate over all entries and trials.
    pub fn total_pd(&self) -> Option<Rate> {
        Rate::from_counts(
            self.detections.iter().sum(),
            self.support_occurrences.iter().sum(),
        )
    }

    pub fn false_alarms(&self) -> &[u64] {
        &self.false_alarms
    }

    pub fn detections(&self) -> &[u64] {
        &self.detections
    }

    pub fn null_occurrences(&self) -> &[u64] {
        &self.null_occurrences
    }

    pub fn support_occurrences(&self) -> &[u64] {
        &self.support_occurrences
    }
}

/// Empirical false-alarm rate of a uniform NWLD threshold over pooled null
/// squared magnitudes.
pub fn nwld_rate(null_sq_mags: &[f64], kappa: f64) -> f64 {
    if null_sq_mags.is_empty() {
        return 0.0;
    }
    null_sq_mags.iter().filter(|&&v| v > kappa).count() as f64 / null_sq_mags.len() as f64
}

/// Bisects a uniform NWLD threshold so that the pooled false-alarm rate over
/// the given null-entry squared magnitudes matches `target`.
///
/// The achievable rates are a step function of the threshold; the result is
/// the midpoint of the final bracket, whose rate is the closest achievable one
/// at or below `target`.
pub fn calibrate_nwld_threshold(null_sq_mags: &[f64], target: f64) -> Result<f64> {
    if null_sq_mags.is_empty() {
        return Err(Error::InvalidParameter(
            "no null samples to calibrate on".into(),
        ));
    }
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::InvalidParameter(format!(
            "target rate {target} outside [0, 1]"
        )));
    }
    if nwld_rate(null_sq_mags, 0.0) <= target {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = null_sq_mags.iter().cloned().fold(0.0, f64::max);
    // rate(lo) > target >= rate(hi) = 0.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if nwld_rate(null_sq_mags, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1e-300) {
            break;
        }
    }
    Ok(hi)
}
