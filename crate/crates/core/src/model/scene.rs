use num_complex::Complex;
use rand::Rng;
use serde::Serialize;

use super::matrix::{DesignMatrix, MatrixKind};
use super::signal::ComplexSignal;
use crate::error::{Error, Result};
use crate::rng::complex_normal;
use crate::scalar::Real;

/// Per-entry probabilities that `x0_i` is nonzero.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PriorVector<T>(Vec<T>);

impl<T: Real> PriorVector<T> {
    pub fn new(p: Vec<T>) -> Result<Self> {
        if let Some(i) = p.iter().position(|v| !(*v >= T::zero() && *v <= T::one())) {
            return Err(Error::InvalidParameter(format!(
                "prior entry {i} is outside [0, 1]"
            )));
        }
        Ok(Self(p))
    }

    pub fn uniform(n: usize, p: T) -> Result<Self> {
        Self::new(vec![p; n])
    }

    /// `low` on the first `split` fraction of the entries and `high` on the rest.
    pub fn two_level(n: usize, low: T, high: T, split: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&split) {
            return Err(Error::InvalidParameter(format!(
                "split {split} outside [0, 1]"
            )));
        }
        let cut = (split * n as f64).round() as usize;
        Self::new((0..n).map(|i| if i < cut { low } else { high }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    /// Expected support size `sum p_i`.
    pub fn expected_support(&self) -> T {
        self.0.iter().fold(T::zero(), |a, &b| a + b)
    }
}

/// Complex AWGN with variance `sigma2` per measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseSpec<T> {
    sigma2: T,
}

impl<T: Real> NoiseSpec<T> {
    pub fn new(sigma2: T) -> Result<Self> {
        if !(sigma2 > T::zero() && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be positive, got {sigma2}"
            )));
        }
        Ok(Self { sigma2 })
    }

    /// Zero noise, for exact measurements `y = A x0`.
    pub fn noiseless() -> Self {
        Self { sigma2: T::zero() }
    }

    pub fn sigma2(&self) -> T {
        self.sigma2
    }
}

/// Everything needed to draw one random scene.
#[derive(Debug, Clone, Serialize)]
pub struct SceneConfig<T: Real> {
    pub n: usize,
    pub m: usize,
    /// Variance of the nonzero amplitudes.
    pub sigma_x2: T,
    pub noise: NoiseSpec<T>,
    pub prior: PriorVector<T>,
    pub matrix_kind: MatrixKind,
    pub master_seed: u64,
}

impl<T: Real> SceneConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.m > self.n {
            return Err(Error::InvalidDimension(format!(
                "need 0 < M <= N, got M={}, N={}",
                self.m, self.n
            )));
        }
        if !(self.sigma_x2 > T::zero() && self.sigma_x2.is_finite()) {
            return Err(Error::InvalidParameter("sigma_x2 must be positive".into()));
        }
        if self.prior.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: self.prior.len(),
                context: "prior length",
            });
        }
        if self.matrix_kind == MatrixKind::External {
            return Err(Error::InvalidParameter(
                "scenes must be drawn from a random ensemble".into(),
            ));
        }
        Ok(())
    }

    pub fn gamma(&self) -> T {
        T::from_len(self.m) / T::from_len(self.n)
    }

    /// Copy with `sigma_x2` set from a matched-filter SNR in dB.
    pub fn with_snr_db(&self, snr_db: T) -> Result<Self> {
        let mut out = self.clone();
        out.sigma_x2 = sigma_x2_for_snr(snr_db, self.gamma(), self.noise.sigma2())?;
        Ok(out)
    }
}

/// A drawn scene: ground truth, its support, and the measurement.
#[derive(Debug, Clone)]
pub struct SparseScene<T: Real> {
    pub x0: ComplexSignal<T>,
    pub support: Vec<usize>,
    pub y: ComplexSignal<T>,
}

/// Bernoulli-Gaussian draw: `x0_i ~ CN(0, sigma_x2)` with probability `p_i`, else 0.
///
/// Consumes the same random numbers whatever `sigma_x2` is, so a fixed stream
/// gives the same scene rescaled across SNR points.
pub fn gen_sparse_signal<T: Real, R: Rng + ?Sized>(
    prior: &PriorVector<T>,
    sigma_x2: T,
    rng: &mut R,
) -> Result<(ComplexSignal<T>, Vec<usize>)> {
    if !(sigma_x2 > T::zero() && sigma_x2.is_finite()) {
        return Err(Error::InvalidParameter("sigma_x2 must be positive".into()));
    }
    let mut x = Vec::with_capacity(prior.len());
    let mut support = Vec::new();
    for (i, &p) in prior.as_slice().iter().enumerate() {
        let u: f64 = rng.random();
        let v = complex_normal(rng, sigma_x2);
        if T::lit(u) < p {
            x.push(v);
            support.push(i);
        } else {
            x.push(Complex::new(T::zero(), T::zero()));
        }
    }
    Ok((ComplexSignal::from_vec_unchecked(x), support))
}

/// `y = A x0 + xi` with `xi_i ~ CN(0, sigma2)` i.i.d.
pub fn measure<T: Real, R: Rng + ?Sized>(
    a: &DesignMatrix<T>,
    x0: &ComplexSignal<T>,
    noise: NoiseSpec<T>,
    rng: &mut R,
) -> Result<ComplexSignal<T>> {
    if x0.len() != a.cols() {
        return Err(Error::DimensionMismatch {
            expected: a.cols(),
            actual: x0.len(),
            context: "signal length vs matrix columns",
        });
    }
    let mut y = a.apply(x0.as_slice());
    if noise.sigma2() > T::zero() {
        for v in y.iter_mut() {
            *v = *v + complex_normal(rng, noise.sigma2());
        }
    }
    Ok(ComplexSignal::from_vec_unchecked(y))
}

/// Matched-filter SNR `gamma * sigma_x2 / sigma2` (linear scale).
pub fn snr<T: Real>(gamma: T, sigma_x2: T, sigma2: T) -> Result<T> {
    if !(sigma2 > T::zero()) {
        return Err(Error::InvalidParameter(
            "noise variance must be positive".into(),
        ));
    }
    if !(gamma > T::zero() && sigma_x2 > T::zero()) {
        return Err(Error::InvalidParameter(
            "gamma and sigma_x2 must be positive".into(),
        ));
    }
    Ok(gamma * sigma_x2 / sigma2)
}

/// Inverse of [`snr`]: the amplitude variance giving `snr_db` decibels.
pub fn sigma_x2_for_snr<T: Real>(snr_db: T, gamma: T, sigma2: T) -> Result<T> {
    if !(sigma2 > T::zero() && gamma > T::zero()) || !snr_db.is_finite() {
        return Err(Error::InvalidParameter(
            "SNR inversion needs positive gamma and sigma2 and a finite SNR".into(),
        ));
    }
    let lin = T::lit(10.0).powf(snr_db / T::lit(10.0));
    Ok(lin * sigma2 / gamma)
}
