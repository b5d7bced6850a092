//! Two-parameter weight models and their tuning by minimizing the Monte Carlo
//! mean of the predicted error variance `sigma_w^2`.
//!
//! Every objective evaluation replays the same random scenes (common random
//! numbers keyed by the scene's master seed), so objective differences between
//! models reflect the weights rather than sampling noise.

use rayon::prelude::*;
use serde::Serialize;

use crate::debias::{residual_variance, solve_fixed_point};
use crate::error::{Error, Result};
use crate::model::{PriorVector, SceneConfig, SceneSampler};
use crate::rng::trial_rng;
use crate::scalar::Real;
use crate::solver::{solve_weighted_lasso, SolverOptions, WeightVector};
use crate::stats::mean_and_std_error;

/// Smallest weight a model may emit.
pub const LAMBDA_MIN: f64 = 1e-4;
/// Prior floor for the exponential model.
pub const P_MIN: f64 = 1e-3;
/// Infeasible trials score this multiple of the worst feasible one.
pub const INFEASIBLE_PENALTY: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightModelKind {
    /// `lambda_i = max(lambda_min, lambda0 - alpha p_i)`
    Linear,
    /// `lambda_i = lambda0 / max(p_i, p_min)^alpha`
    Exponential,
}

impl std::str::FromStr for WeightModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(Self::Linear),
            "exponential" | "exp" => Ok(Self::Exponential),
            other => Err(Error::Parse(format!("unknown weight model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightModel<T> {
    pub kind: WeightModelKind,
    pub lambda0: T,
    pub alpha: T,
}

impl<T: Real> WeightModel<T> {
    pub fn linear(lambda0: T, alpha: T) -> Self {
        Self {
            kind: WeightModelKind::Linear,
            lambda0,
            alpha,
        }
    }

    pub fn exponential(lambda0: T, alpha: T) -> Self {
        Self {
            kind: WeightModelKind::Exponential,
            lambda0,
            alpha,
        }
    }

    pub fn weight(&self, p: T) -> T {
        let floor = T::lit(LAMBDA_MIN);
        let w = match self.kind {
            WeightModelKind::Linear => self.lambda0 - self.alpha * p,
            WeightModelKind::Exponential => self.lambda0 / p.max(T::lit(P_MIN)).powf(self.alpha),
        };
        // NaN (from a degenerate model) also lands on the floor.
        if w > floor && w.is_finite() {
            w
        } else if w.is_infinite() && w > T::zero() {
            T::max_value()
        } else {
            floor
        }
    }

    pub fn weights(&self, prior: &PriorVector<T>) -> Result<WeightVector<T>> {
        if !(self.lambda0 > T::zero()) {
            return Err(Error::InvalidParameter("lambda0 must be positive".into()));
        }
        WeightVector::new(prior.as_slice().iter().map(|&p| self.weight(p)).collect())
    }
}

/// Monte Carlo estimate of the expected `sigma_w^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveEstimate<T> {
    pub mean_sigma_w2: T,
    pub std_error: T,
    pub n_trials: usize,
    pub n_failed: usize,
}

/// `sigma_w^2` of one scene, or `None` if the scene could not be debiased.
fn trial_sigma_w2<T: Real>(
    sampler: &SceneSampler<T>,
    weights: &WeightVector<T>,
    trial: u64,
    opts: &SolverOptions<T>,
) -> Result<Option<T>> {
    let cfg = sampler.config();
    let mut rng = trial_rng(cfg.master_seed, trial);
    let (a, scene) = sampler.draw(&mut rng)?;
    let x_wl = match solve_weighted_lasso(&scene.y, &a, weights, opts) {
        Ok(x) => x,
        Err(Error::NonConvergence { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let gamma = a.gamma();
    let fp = match solve_fixed_point(&x_wl, weights, gamma) {
        Ok(fp) => fp,
        Err(Error::DebiasInfeasible { .. } | Error::FixedPointDiverged { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let (s, _) = residual_variance(&x_wl, &scene.y, &a, gamma, fp.rho_ca, cfg.noise.sigma2())?;
    Ok(Some(s))
}

/// Mean of the predicted error variance over `n_mc` scenes drawn from
/// `scene` (trial `j` uses stream `j` of `scene.master_seed`).
pub fn evaluate_f2<T: Real>(
    model: &WeightModel<T>,
    scene: &SceneConfig<T>,
    n_mc: usize,
    opts: &SolverOptions<T>,
) -> Result<ObjectiveEstimate<T>> {
    let sampler = SceneSampler::new(scene.clone())?;
    evaluate_f2_with(model, &sampler, n_mc, opts)
}

fn evaluate_f2_with<T: Real>(
    model: &WeightModel<T>,
    sampler: &SceneSampler<T>,
    n_mc: usize,
    opts: &SolverOptions<T>,
) -> Result<ObjectiveEstimate<T>> {
    if n_mc == 0 {
        return Err(Error::InvalidParameter("n_mc must be >= 1".into()));
    }
    let weights = model.weights(&sampler.config().prior)?;
    let outcomes: Vec<Option<T>> = (0..n_mc as u64)
        .into_par_iter()
        .map(|t| trial_sigma_w2(sampler, &weights, t, opts))
        .collect::<Result<_>>()?;
    let worst = outcomes
        .iter()
        .flatten()
        .fold(None, |acc: Option<T>, &v| Some(acc.map_or(v, |a| a.max(v))));
    let n_failed = outcomes.iter().filter(|o| o.is_none()).count();
    let Some(worst) = worst else {
        return Err(Error::ObjectiveUndefined(n_mc));
    };
    let penalty = worst * T::lit(INFEASIBLE_PENALTY);
    let values: Vec<f64> = outcomes
        .iter()
        .map(|o| o.unwrap_or(penalty).to_f64_lossy())
        .collect();
    let (mean, se) = mean_and_std_error(&values);
    Ok(ObjectiveEstimate {
        mean_sigma_w2: T::lit(mean),
        std_error: T::lit(se),
        n_trials: n_mc,
        n_failed,
    })
}

/// Search settings for [`optimize_weights`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerSettings<T> {
    /// Monte Carlo scenes per objective evaluation.
    pub n_mc: usize,
    /// `lambda0` grid, log-spaced.
    pub lambda0_range: (T, T),
    pub lambda0_points: usize,
    /// `alpha` grid, linearly spaced.
    pub alpha_range: (T, T),
    pub alpha_points: usize,
    pub max_simplex_iters: usize,
    /// Cap on objective evaluations, grid included.
    pub max_evaluations: usize,
}

impl<T: Real> Default for OptimizerSettings<T> {
    fn default() -> Self {
        Self {
            n_mc: 64,
            lambda0_range: (T::lit(0.01), T::lit(0.5)),
            lambda0_points: 8,
            alpha_range: (T::zero(), T::one()),
            alpha_points: 6,
            max_simplex_iters: 100,
            max_evaluations: 400,
        }
    }
}

impl<T: Real> OptimizerSettings<T> {
    fn grid(&self) -> Result<(Vec<T>, Vec<T>)> {
        let (l_lo, l_hi) = self.lambda0_range;
        let (a_lo, a_hi) = self.alpha_range;
        if !(l_lo > T::zero() && l_hi >= l_lo && a_hi >= a_lo) {
            return Err(Error::InvalidParameter("bad optimizer grid ranges".into()));
        }
        if self.lambda0_points == 0 || self.alpha_points == 0 {
            return Err(Error::InvalidParameter(
                "grid needs at least one point per axis".into(),
            ));
        }
        let lin = |lo: T, hi: T, k: usize, i: usize| {
            if k == 1 {
                lo
            } else {
                lo + (hi - lo) * T::from_len(i) / T::from_len(k - 1)
            }
        };
        let l0 = (0..self.lambda0_points)
            .map(|i| lin(l_lo.ln(), l_hi.ln(), self.lambda0_points, i).exp())
            .collect();
        let al = (0..self.alpha_points)
            .map(|i| lin(a_lo, a_hi, self.alpha_points, i))
            .collect();
        Ok((l0, al))
    }
}

/// One evaluated point of the search.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Evaluation<T> {
    pub model: WeightModel<T>,
    pub estimate: ObjectiveEstimate<T>,
    /// `true` for grid points, `false` for simplex points.
    pub from_grid: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizationResult<T> {
    pub model: WeightModel<T>,
    pub estimate: ObjectiveEstimate<T>,
    pub history: Vec<Evaluation<T>>,
}

/// Tunes `(lambda0, alpha)` for `kind`: grid scan, then Nelder-Mead in
/// `(ln lambda0, alpha)` from the best grid point.
pub fn optimize_weights<T: Real>(
    kind: WeightModelKind,
    scene: &SceneConfig<T>,
    settings: &OptimizerSettings<T>,
    opts: &SolverOptions<T>,
) -> Result<OptimizationResult<T>> {
    let (l0_grid, alpha_grid) = settings.grid()?;
    let grid_size = l0_grid.len() * alpha_grid.len();
    if settings.max_evaluations < 25 || settings.max_evaluations < grid_size {
        return Err(Error::InvalidParameter(format!(
            "evaluation budget {} must cover the {grid_size}-point grid and be at least 25",
            settings.max_evaluations
        )));
    }
    let sampler = SceneSampler::new(scene.clone())?;
    let mut history: Vec<Evaluation<T>> = Vec::new();

    for &l0 in &l0_grid {
        for &al in &alpha_grid {
            let model = WeightModel {
                kind,
                lambda0: l0,
                alpha: al,
            };
            match evaluate_f2_with(&model, &sampler, settings.n_mc, opts) {
                Ok(estimate) => history.push(Evaluation {
                    model,
                    estimate,
                    from_grid: true,
                }),
                Err(Error::ObjectiveUndefined(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    if history.is_empty() {
        return Err(Error::ObjectiveUndefined(settings.n_mc));
    }
    let best_grid = *history
        .iter()
        .min_by(|a, b| {
            a.estimate
                .mean_sigma_w2
                .partial_cmp(&b.estimate.mean_sigma_w2)
                .unwrap()
        })
        .expect("non-empty");

    let step_l = if l0_grid.len() > 1 {
        (l0_grid[1] / l0_grid[0]).ln()
    } else {
        T::lit(0.5)
    };
    let step_a = if alpha_grid.len() > 1 {
        alpha_grid[1] - alpha_grid[0]
    } else {
        T::lit(0.2)
    };
    let budget = settings.max_evaluations - history.len();
    let mut simplex_evals: Vec<Evaluation<T>> = Vec::new();
    let mut f = |p: [T; 2]| -> Result<T> {
        if simplex_evals.len() >= budget {
            return Ok(T::infinity());
        }
        let model = WeightModel {
            kind,
            lambda0: p[0].exp(),
            alpha: p[1],
        };
        match evaluate_f2_with(&model, &sampler, settings.n_mc, opts) {
            Ok(estimate) => {
                simplex_evals.push(Evaluation {
                    model,
                    estimate,
                    from_grid: false,
                });
                Ok(estimate.mean_sigma_w2)
            }
            Err(Error::ObjectiveUndefined(_)) => Ok(T::infinity()),
            Err(e) => Err(e),
        }
    };
    let start = [best_grid.model.lambda0.ln(), best_grid.model.alpha];
    nelder_mead_2d(
        &mut f,
        start,
        best_grid.estimate.mean_sigma_w2,
        [step_l * T::lit(0.5), step_a * T::lit(0.5)],
        settings.max_simplex_iters,
    )?;
    history.extend(simplex_evals);

    let best = *history
        .iter()
        .min_by(|a, b| {
            a.estimate
                .mean_sigma_w2
                .partial_cmp(&b.estimate.mean_sigma_w2)
                .unwrap()
        })
        .expect("non-empty");
    Ok(OptimizationResult {
        model: best.model,
        estimate: best.estimate,
        history,
    })
}

/// Minimal Nelder-Mead on two variables. Returns the best vertex.
fn nelder_mead_2d<T: Real>(
    f: &mut impl FnMut([T; 2]) -> Result<T>,
    start: [T; 2],
    f_start: T,
    step: [T; 2],
    max_iters: usize,
) -> Result<([T; 2], T)> {
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let p1 = [start[0] + step[0], start[1]];
    let p2 = [start[0], start[1] + step[1]];
    let mut s = [(start, f_start), (p1, f(p1)?), (p2, f(p2)?)];
    let lerp = |a: [T; 2], b: [T; 2], t: T| [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t];

    for _ in 0..max_iters {
        s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let (best, worst) = (s[0].1, s[2].1);
        if !worst.is_finite() && !best.is_finite() {
            break;
        }
        let spread = (worst - best).abs();
        let size = (s[1].0[0] - s[0].0[0])
            .abs()
            .max((s[2].0[0] - s[0].0[0]).abs())
            + (s[1].0[1] - s[0].0[1])
                .abs()
                .max((s[2].0[1] - s[0].0[1]).abs());
        if spread <= T::lit(1e-12) * best.abs().max(T::lit(1e-300)) || size < T::lit(1e-6) {
            break;
        }
        let centroid = lerp(s[0].0, s[1].0, half);
        let xr = lerp(s[2].0, centroid, two);
        let fr = f(xr)?;
        if fr < s[0].1 {
            let xe = lerp(s[2].0, centroid, T::lit(3.0));
            let fe = f(xe)?;
            s[2] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < s[1].1 {
            s[2] = (xr, fr);
        } else {
            let (xc, fc) = if fr < s[2].1 {
                let xc = lerp(s[2].0, centroid, T::lit(1.5));
                (xc, f(xc)?)
            } else {
                let xc = lerp(s[2].0, centroid, half);
                (xc, f(xc)?)
            };
            if fc < s[2].1.min(fr) {
                s[2] = (xc, fc);
            } else {
                for i in 1..3 {
                    let xi = lerp(s[0].0, s[i].0, half);
                    s[i] = (xi, f(xi)?);
                }
            }
        }
    }
    s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    Ok(s[0])
}
