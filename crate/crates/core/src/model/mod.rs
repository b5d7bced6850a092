//! Domain types and random scene synthesis for the linear measurement model
//! `y = A x0 + noise`.

mod matrix;
mod sampler;
mod scene;
mod signal;

pub use matrix::{
    gen_gaussian_iid, gen_haar_row_orthogonal, gen_partial_fourier, gen_partial_fourier_planned,
    DesignMatrix, FourierPlan, MatrixKind,
};
pub use sampler::SceneSampler;
pub use scene::{
    gen_sparse_signal, measure, sigma_x2_for_snr, snr, NoiseSpec, PriorVector, SceneConfig,
    SparseScene,
};
pub use signal::ComplexSignal;
