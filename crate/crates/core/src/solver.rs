//! Complex weighted LASSO:
//!
//! ```text
//! minimize  1/2 ||y - A x||^2 + sum_i lambda_i |x_i|
//! ```
//!
//! solved by accelerated proximal gradient with restart whenever the objective
//! increases. Convergence is certified by the KKT residual of the
//! subdifferential optimality condition, not by iterate movement alone.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ComplexSignal, DesignMatrix};
use crate::scalar::Real;

/// Per-entry regularization weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct WeightVector<T>(Vec<T>);

impl<T: Real> WeightVector<T> {
    pub fn new(lambda: Vec<T>) -> Result<Self> {
        if let Some(i) = lambda
            .iter()
            .position(|v| !(*v >= T::zero() && v.is_finite()))
        {
            return Err(Error::InvalidParameter(format!(
                "weight {i} must be finite and non-negative"
            )));
        }
        Ok(Self(lambda))
    }

    pub fn uniform(n: usize, lambda: T) -> Result<Self> {
        Self::new(vec![lambda; n])
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

    pub fn scaled(&self, c: T) -> Result<Self> {
        Self::new(self.0.iter().map(|&v| v * c).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StepSize<T> {
    /// `1 / L` with `L` the largest eigenvalue of `A^H A`.
    Auto,
    Fixed(T),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions<T> {
    pub max_iters: usize,
    /// Relative iterate change that triggers an early certificate check.
    pub rel_tol: T,
    /// Required KKT residual.
    pub kkt_tol: T,
    pub step_size: StepSize<T>,
    /// Iterations between certificate checks.
    pub check_every: usize,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            rel_tol: T::lit(1e-10),
            kkt_tol: T::lit(1e-6),
            step_size: StepSize::Auto,
            check_every: 10,
        }
    }
}

impl<T: Real> SolverOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.check_every == 0 {
            return Err(Error::InvalidParameter(
                "max_iters and check_every must be >= 1".into(),
            ));
        }
        if !(self.rel_tol > T::zero() && self.kkt_tol > T::zero()) {
            return Err(Error::InvalidParameter(
                "solver tolerances must be positive".into(),
            ));
        }
        if let StepSize::Fixed(s) = self.step_size {
            if !(s > T::zero() && s.is_finite()) {
                return Err(Error::InvalidParameter("step size must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Solver output with diagnostics.
#[derive(Debug, Clone)]
pub struct SolveReport<T: Real> {
    pub x: ComplexSignal<T>,
    pub iterations: usize,
    pub kkt_residual: T,
    pub objective: T,
    pub restarts: usize,
}

/// Snapshot handed to [`solve_weighted_lasso_observed`] after each accepted iterate.
#[derive(Debug)]
pub struct IterateView<'a, T: Real> {
    pub iteration: usize,
    pub x: &'a [Complex<T>],
    pub objective: T,
    /// Present on iterations where the certificate was evaluated.
    pub kkt_residual: Option<T>,
}

/// Complex soft threshold `z * max(0, 1 - t/|z|)`, with `prox(0) = 0` and the
/// tie `|z| = t` mapped to exactly 0.
#[inline]
pub fn soft_threshold<T: Real>(z: Complex<T>, t: T) -> Complex<T> {
    let mag = z.norm();
    if mag <= t {
        Complex::new(T::zero(), T::zero())
    } else {
        z * ((mag - t) / mag)
    }
}

fn check_dims<T: Real>(
    y: &ComplexSignal<T>,
    a: &DesignMatrix<T>,
    lambda: &WeightVector<T>,
) -> Result<()> {
    if y.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            actual: y.len(),
            context: "measurement length vs matrix rows",
        });
    }
    if lambda.len() != a.cols() {
        return Err(Error::DimensionMismatch {
            expected: a.cols(),
            actual: lambda.len(),
            context: "weight length vs matrix columns",
        });
    }
    Ok(())
}

fn objective_from<T: Real>(
    ax: &[Complex<T>],
    y: &[Complex<T>],
    x: &[Complex<T>],
    lambda: &[T],
) -> T {
    let fit = ax
        .iter()
        .zip(y)
        .fold(T::zero(), |acc, (u, v)| acc + (u - v).norm_sqr());
    let pen = x
        .iter()
        .zip(lambda)
        .fold(T::zero(), |acc, (xi, &li)| acc + li * xi.norm());
    fit / T::lit(2.0) + pen
}

fn kkt_from_gradient<T: Real>(g: &[Complex<T>], x: &[Complex<T>], lambda: &[T]) -> T {
    g.iter()
        .zip(x)
        .zip(lambda)
        .fold(T::zero(), |worst, ((gi, xi), &li)| {
            let mag = xi.norm();
            let r = if mag > T::zero() {
                (gi + xi * (li / mag)).norm()
            } else {
                (gi.norm() - li).max(T::zero())
            };
            worst.max(r)
        })
}

/// Weighted LASSO objective at `x`.
pub fn objective<T: Real>(
    x: &ComplexSignal<T>,
    y: &ComplexSignal<T>,
    a: &DesignMatrix<T>,
    lambda: &WeightVector<T>,
) -> Result<T> {
    check_dims(y, a, lambda)?;
    let ax = a.apply(x.as_slice());
    Ok(objective_from(
        &ax,
        y.as_slice(),
        x.as_slice(),
        lambda.as_slice(),
    ))
}

/// Optimality certificate. With `g = A^H (A x - y)`, the residual of entry `i` is
/// `|g_i + lambda_i x_i/|x_i||` when `x_i != 0` and `max(0, |g_i| - lambda_i)`
/// otherwise; the maximum over entries is zero exactly at the minimizer.
pub fn kkt_residual<T: Real>(
    x: &ComplexSignal<T>,
    y: &ComplexSignal<T>,
    a: &DesignMatrix<T>,
    lambda: &WeightVector<T>,
) -> Result<T> {
    check_dims(y, a, lambda)?;
    if x.len() != a.cols() {
        return Err(Error::DimensionMismatch {
            expected: a.cols(),
            actual: x.len(),
            context: "estimate length vs matrix columns",
        });
    }
    let ax = a.apply(x.as_slice());
    let r: Vec<_> = ax.iter().zip(y.iter()).map(|(u, v)| u - v).collect();
    let g = a.adjoint(&r);
    Ok(kkt_from_gradient(&g, x.as_slice(), lambda.as_slice()))
}

/// Solves the weighted LASSO to `opts.kkt_tol`.
pub fn solve_weighted_lasso<T: Real>(
    y: &ComplexSignal<T>,
    a: &DesignMatrix<T>,
    lambda: &WeightVector<T>,
    opts: &SolverOptions<T>,
) -> Result<ComplexSignal<T>> {
    solve_weighted_lasso_observed(y, a, lambda, opts, |_| {}).map(|r| r.x)
}

/// [`solve_weighted_lasso`] with diagnostics and a per-iterate callback.
pub fn solve_weighted_lasso_observed<T: Real>(
    y: &ComplexSignal<T>,
    a: &DesignMatrix<T>,
    lambda: &WeightVector<T>,
    opts: &SolverOptions<T>,
    mut observe: impl FnMut(&IterateView<'_, T>),
) -> Result<SolveReport<T>> {
    check_dims(y, a, lambda)?;
    opts.validate()?;
    let n = a.cols();
    let lam = lambda.as_slice();
    let yv = y.as_slice();
    let zero = Complex::new(T::zero(), T::zero());
    let step = match opts.step_size {
        StepSize::Auto => T::one() / a.lipschitz(),
        StepSize::Fixed(s) => s,
    };
    let thresholds: Vec<T> = lam.iter().map(|&l| l * step).collect();

    let mut x = vec![zero; n];
    let mut ax = vec![zero; a.rows()];
    let mut z = x.clone();
    let mut az = ax.clone();
    let mut f_x = objective_from(&ax, yv, &x, lam);
    let mut t = T::one();
    let mut restarts = 0;
    let mut last_kkt = T::infinity();

    // x = 0 may already be optimal (e.g. large weights or y = 0).
    {
        let r: Vec<_> = ax.iter().zip(yv).map(|(u, v)| u - v).collect();
        let g = a.adjoint(&r);
        let kkt = kkt_from_gradient(&g, &x, lam);
        if kkt <= opts.kkt_tol {
            return Ok(SolveReport {
                x: ComplexSignal::from_vec_unchecked(x),
                iterations: 0,
                kkt_residual: kkt,
                objective: f_x,
                restarts,
            });
        }
    }

    for iter in 1..=opts.max_iters {
        let r: Vec<_> = az.iter().zip(yv).map(|(u, v)| u - v).collect();
        let g = a.adjoint(&r);
        let x_new: Vec<_> = z
            .iter()
            .zip(&g)
            .zip(&thresholds)
            .map(|((zi, gi), &th)| soft_threshold(zi - gi * step, th))
            .collect();
        let ax_new = a.apply(&x_new);
        let f_new = objective_from(&ax_new, yv, &x_new, lam);

        if f_new > f_x && t > T::one() {
            // Momentum overshot: restart from the last accepted iterate.
            restarts += 1;
            t = T::one();
            z.copy_from_slice(&x);
            az.copy_from_slice(&ax);
            continue;
        }

        let (mut diff, mut norm) = (T::zero(), T::zero());
        for (u, v) in x_new.iter().zip(&x) {
            diff = diff + (u - v).norm_sqr();
            norm = norm + u.norm_sqr();
        }
        let rel = if norm > T::zero() {
            (diff / norm).sqrt()
        } else {
            diff.sqrt()
        };

        let t_next = (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) / T::lit(2.0);
        let beta = (t - T::one()) / t_next;
        for i in 0..n {
            z[i] = x_new[i] + (x_new[i] - x[i]) * beta;
        }
        for i in 0..az.len() {
            az[i] = ax_new[i] + (ax_new[i] - ax[i]) * beta;
        }
        x = x_new;
        ax = ax_new;
        f_x = f_new;
        t = t_next;

        let check = iter % opts.check_every == 0 || rel < opts.rel_tol || iter == opts.max_iters;
        let kkt = if check {
            let r: Vec<_> = ax.iter().zip(yv).map(|(u, v)| u - v).collect();
            let g = a.adjoint(&r);
            let k = kkt_from_gradient(&g, &x, lam);
            last_kkt = k;
            Some(k)
        } else {
            None
        };
        observe(&IterateView {
            iteration: iter,
            x: &x,
            objective: f_x,
            kkt_residual: kkt,
        });
        if let Some(k) = kkt {
            if k <= opts.kkt_tol {
                return Ok(SolveReport {
                    x: ComplexSignal::from_vec_unchecked(x),
                    iterations: iter,
                    kkt_residual: k,
                    objective: f_x,
                    restarts,
                });
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iters,
        kkt_residual: last_kkt.to_f64_lossy(),
    })
}
