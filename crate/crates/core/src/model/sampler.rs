use rand::Rng;

use super::matrix::{
    gen_gaussian_iid, gen_haar_row_orthogonal, gen_partial_fourier_planned, DesignMatrix,
    FourierPlan, MatrixKind,
};
use super::scene::{gen_sparse_signal, measure, SceneConfig, SparseScene};
use crate::error::Result;
use crate::scalar::Real;

/// Draws full scenes (matrix, ground truth, measurement) for one configuration,
/// reusing the FFT plan across draws.
#[derive(Debug, Clone)]
pub struct SceneSampler<T: Real> {
    config: SceneConfig<T>,
    plan: Option<FourierPlan<T>>,
}

impl<T: Real> SceneSampler<T> {
    pub fn new(config: SceneConfig<T>) -> Result<Self> {
        config.validate()?;
        let plan =
            (config.matrix_kind == MatrixKind::PartialFourier).then(|| FourierPlan::new(config.n));
        Ok(Self { config, plan })
    }

    pub fn config(&self) -> &SceneConfig<T> {
        &self.config
    }

    /// Same sampler with a different amplitude variance.
    pub fn with_sigma_x2(&self, sigma_x2: T) -> Result<Self> {
        let mut config = self.config.clone();
        config.sigma_x2 = sigma_x2;
        config.validate()?;
        Ok(Self {
            config,
            plan: self.plan.clone(),
        })
    }

    /// Draws the matrix, then the signal, then the noise, in that order.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(DesignMatrix<T>, SparseScene<T>)> {
        let c = &self.config;
        let a = match (c.matrix_kind, &self.plan) {
            (MatrixKind::PartialFourier, Some(plan)) => {
                gen_partial_fourier_planned(plan, c.m, rng)?
            }
            (MatrixKind::HaarRowOrthogonal, _) => gen_haar_row_orthogonal(c.n, c.m, rng)?,
            (MatrixKind::GaussianIid, _) => gen_gaussian_iid(c.n, c.m, rng)?,
            _ => unreachable!("validated at construction"),
        };
        let (x0, support) = gen_sparse_signal(&c.prior, c.sigma_x2, rng)?;
        let y = measure(&a, &x0, c.noise, rng)?;
        Ok((a, SparseScene { x0, support, y }))
    }
}
