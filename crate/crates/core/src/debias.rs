//! Debiasing of the weighted LASSO estimate under complex row-orthogonal
//! designs, and the resulting per-entry error variance.
//!
//! The debiased estimate is `x_d = x_wl + A^H (y - A x_wl) / Lambda`, where the
//! coefficient `Lambda` and the weighted active density `rho` jointly solve
//!
//! ```text
//! Lambda = (gamma - rho) / (1 - rho)
//! rho    = 1/(2N) sum_{i: x_i != 0} (2 - lambda_i / (Lambda |x_i| + lambda_i))
//! ```
//!
//! The error `x_d - x0` is then approximately CN(0, sigma_w^2) per entry with
//! `sigma_w^2 = gamma (1 - gamma) / (gamma - rho)^2 * RSS + sigma^2`.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ComplexSignal, DesignMatrix};
use crate::scalar::Real;
use crate::solver::WeightVector;

const DAMPING: f64 = 0.5;
const MAX_DAMPED_ITERS: usize = 1000;
const BISECTION_FLOOR: f64 = 1e-8;

/// Solution of the coupled `(Lambda, rho)` equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPoint<T> {
    pub lambda_cro: T,
    pub rho_ca: T,
    pub iterations: usize,
    /// `|Lambda (1 - rho) - (gamma - rho)|`.
    pub residual_lambda: T,
    /// `|rho - rho(Lambda)|`.
    pub residual_rho: T,
}

/// Everything the detector threshold needs.
#[derive(Debug, Clone, Serialize)]
pub struct DebiasResult<T: Real> {
    pub x_d: ComplexSignal<T>,
    pub lambda_cro: T,
    pub rho_ca: T,
    pub sigma_w2: T,
    pub rss_bar: T,
    pub iterations: usize,
}

/// The weighted active density `rho(Lambda)`. Exact zeros contribute nothing.
pub fn rho_of_lambda<T: Real>(x_wl: &[Complex<T>], lambda: &[T], big_lambda: T) -> T {
    let n = T::from_len(x_wl.len());
    let two = T::lit(2.0);
    let sum = x_wl.iter().zip(lambda).fold(T::zero(), |acc, (x, &l)| {
        let mag = x.norm();
        if mag > T::zero() {
            let denom = big_lambda * mag + l;
            // lambda_i = 0 on an active entry contributes the full 2.
            let frac = if denom > T::zero() {
                l / denom
            } else {
                T::zero()
            };
            acc + (two - frac)
        } else {
            acc
        }
    });
    sum / (two * n)
}

fn lambda_of_rho<T: Real>(gamma: T, rho: T) -> T {
    (gamma - rho) / (T::one() - rho)
}

fn residual_tolerance<T: Real>() -> T {
    // 1e-10 is the contract for f64; f32 cannot get anywhere near it.
    T::lit(1e-10).max(T::epsilon() * T::lit(64.0))
}

/// Solves the coupled `(Lambda, rho)` equations for a converged weighted LASSO
/// estimate.
///
/// Uses the damped iteration `Lambda <- (1-d) Lambda + d g(rho(Lambda))` with
/// `d = 0.5` from `Lambda = gamma`, falling back to bisection on
/// `Lambda - g(rho(Lambda))` over `[1e-8, gamma]`.
pub fn solve_fixed_point<T: Real>(
    x_wl: &ComplexSignal<T>,
    lambda: &WeightVector<T>,
    gamma: T,
) -> Result<FixedPoint<T>> {
    if !(gamma > T::zero() && gamma <= T::one()) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be in (0, 1], got {gamma}"
        )));
    }
    if x_wl.len() != lambda.len() {
        return Err(Error::DimensionMismatch {
            expected: x_wl.len(),
            actual: lambda.len(),
            context: "weights vs estimate",
        });
    }
    let x = x_wl.as_slice();
    let lam = lambda.as_slice();
    let rho = |big: T| rho_of_lambda(x, lam, big);

    // rho is increasing in Lambda with rho(0+) = k/(2N); no root with rho < gamma
    // exists once that floor reaches gamma.
    let floor = rho(T::zero());
    if floor >= gamma {
        return Err(Error::DebiasInfeasible {
            rho: floor.to_f64_lossy(),
            gamma: gamma.to_f64_lossy(),
        });
    }

    let tol = residual_tolerance::<T>();
    let finish = |big: T, iterations: usize| {
        let r = rho(big);
        FixedPoint {
            lambda_cro: big,
            rho_ca: r,
            iterations,
            residual_lambda: (big * (T::one() - r) - (gamma - r)).abs(),
            residual_rho: T::zero(),
        }
    };

    let d = T::lit(DAMPING);
    let mut big = gamma;
    for it in 1..=MAX_DAMPED_ITERS {
        let r = rho(big);
        if r >= gamma {
            break;
        }
        let target = lambda_of_rho(gamma, r);
        let next = (T::one() - d) * big + d * target;
        big = next;
        let fp = finish(big, it);
        if fp.residual_lambda < tol * T::lit(0.01) && big > T::zero() {
            return Ok(fp);
        }
    }

    // Bisection on h(L) = L - g(rho(L)), increasing in L.
    let h = |big: T| {
        let r = rho(big);
        big - lambda_of_rho(gamma, r)
    };
    let mut lo = T::lit(BISECTION_FLOOR).min(gamma);
    let mut hi = gamma;
    if h(lo) > T::zero() {
        // Root lies below the floor: Lambda would be vanishingly small.
        return Err(Error::DebiasInfeasible {
            rho: rho(lo).to_f64_lossy(),
            gamma: gamma.to_f64_lossy(),
        });
    }
    let mut iters = MAX_DAMPED_ITERS;
    for _ in 0..200 {
        iters += 1;
        let mid = (lo + hi) / T::lit(2.0);
        if h(mid) > T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= T::epsilon() * hi {
            break;
        }
    }
    let fp = finish((lo + hi) / T::lit(2.0), iters);
    if fp.residual_lambda < tol {
        Ok(fp)
    } else {
        Err(Error::FixedPointDiverged {
            residual: fp.residual_lambda.to_f64_lossy(),
        })
    }
}

fn check_dims<T: Real>(
    x_wl: &ComplexSignal<T>,
    y: &ComplexSignal<T>,
    a: &DesignMatrix<T>,
) -> Result<()> {
    if x_wl.len() != a.cols() {
        return Err(Error::DimensionMismatch {
            expected: a.cols(),
            actual: x_wl.len(),
            context: "estimate length vs matrix columns",
        });
    }
    if y.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            actual: y.len(),
            context: "measurement length vs matrix rows",
        });
    }
    Ok(())
}

fn residual<T: Real>(
    x_wl: &ComplexSignal<T>,
    y: &ComplexSignal<T>,
    a: &DesignMatrix<T>,
) -> Vec<Complex<T>> {
    let ax = a.apply(x_wl.as_slice());
    y.iter().zip(&ax).map(|(u, v)| u - v).collect()
}

/// `x_wl + A^H (y - A x_wl) / lambda_cro`.
pub fn debias_estimate<T: Real>(
    x_wl: &ComplexSignal<T>,
    y: &ComplexSignal<T>,
    a: &DesignMatrix<T>,
    lambda_cro: T,
) -> Result<ComplexSignal<T>> {
    check_dims(x_wl, y, a)?;
    if !(lambda_cro > T::zero() && lambda_cro.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "debiasing coefficient must be positive, got {lambda_cro}"
        )));
    }
    let corr = a.adjoint(&residual(x_wl, y, a));
    let inv = T::one() / lambda_cro;
    Ok(ComplexSignal::from_vec_unchecked(
        x_wl.iter().zip(&corr).map(|(x, c)| x + c * inv).collect(),
    ))
}

/// Debiasing for i.i.d. Gaussian designs with `Lambda_G = gamma - rho_a`, where
/// `rho_a` is the fraction of nonzero entries of `x_wl` (each complex entry
/// counts once).
pub fn debias_gaussian<T: Real>(
    x_wl: &ComplexSignal<T>,
    y: &ComplexSignal<T>,
    a: &DesignMatrix<T>,
) -> Result<ComplexSignal<T>> {
    check_dims(x_wl, y, a)?;
    let gamma = a.gamma();
    let rho_a = T::from_len(x_wl.support().len()) / T::from_len(x_wl.len());
    if rho_a >= gamma {
        return Err(Error::DebiasInfeasible {
            rho: rho_a.to_f64_lossy(),
            gamma: gamma.to_f64_lossy(),
        });
    }
    debias_estimate(x_wl, y, a, gamma - rho_a)
}

/// Returns `(sigma_w2, rss_bar)` with `rss_bar = ||y - A x_wl||^2 / M`.
pub fn residual_variance<T: Real>(
    x_wl: &ComplexSignal<T>,
    y: &ComplexSignal<T>,
    a: &DesignMatrix<T>,
    gamma: T,
    rho_ca: T,
    sigma2: T,
) -> Result<(T, T)> {
    check_dims(x_wl, y, a)?;
    if !(gamma > T::zero() && gamma <= T::one()) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be in (0, 1], got {gamma}"
        )));
    }
    if rho_ca >= gamma {
        return Err(Error::DebiasInfeasible {
            rho: rho_ca.to_f64_lossy(),
            gamma: gamma.to_f64_lossy(),
        });
    }
    let rss = residual(x_wl, y, a)
        .iter()
        .fold(T::zero(), |acc, v| acc + v.norm_sqr())
        / T::from_len(a.rows());
    let gap = gamma - rho_ca;
    let sigma_w2 = gamma * (T::one() - gamma) / (gap * gap) * rss + sigma2;
    Ok((sigma_w2, rss))
}

/// Fixed point, debiased estimate, and error variance in one pass.
pub fn debias<T: Real>(
    x_wl: &ComplexSignal<T>,
    y: &ComplexSignal<T>,
    a: &DesignMatrix<T>,
    lambda: &WeightVector<T>,
    sigma2: T,
) -> Result<DebiasResult<T>> {
    check_dims(x_wl, y, a)?;
    let gamma = a.gamma();
    let fp = solve_fixed_point(x_wl, lambda, gamma)?;
    let x_d = debias_estimate(x_wl, y, a, fp.lambda_cro)?;
    let (sigma_w2, rss_bar) = residual_variance(x_wl, y, a, gamma, fp.rho_ca, sigma2)?;
    Ok(DebiasResult {
        x_d,
        lambda_cro: fp.lambda_cro,
        rho_ca: fp.rho_ca,
        sigma_w2,
        rss_bar,
        iterations: fp.iterations,
    })
}
