#![allow(dead_code)]

use dwld::model::{gen_gaussian_iid, gen_haar_row_orthogonal, gen_partial_fourier, DesignMatrix};
use dwld::rng::{complex_normal, trial_rng, TrialRng};
use dwld::solver::WeightVector;
use num_complex::Complex;
use rand::Rng;

pub type C = Complex<f64>;

/// Random instance: matrix of the given family, sparse ground truth, noisy
/// measurement and random positive weights.
pub struct Instance {
    pub a: DesignMatrix<f64>,
    pub y: Vec<C>,
    pub lambda: WeightVector<f64>,
}

pub fn instance(kind: usize, n: usize, m: usize, seed: u64) -> Instance {
    let mut rng = trial_rng(seed, 0);
    let a = match kind % 3 {
        0 => gen_partial_fourier(n, m, &mut rng).unwrap(),
        1 => gen_haar_row_orthogonal(n, m, &mut rng).unwrap(),
        _ => gen_gaussian_iid(n, m, &mut rng).unwrap(),
    };
    let x0: Vec<C> = (0..n)
        .map(|_| {
            if rng.random::<f64>() < 0.15 {
                complex_normal(&mut rng, 1.0)
            } else {
                C::new(0.0, 0.0)
            }
        })
        .collect();
    let mut y = a.apply(&x0);
    for v in &mut y {
        *v += complex_normal(&mut rng, 0.01);
    }
    let lambda = WeightVector::new((0..n).map(|_| rng.random_range(0.02..0.3)).collect()).unwrap();
    Instance { a, y, lambda }
}

fn soft(z: C, t: f64) -> C {
    let r = z.norm();
    if r <= t {
        C::new(0.0, 0.0)
    } else {
        z * ((r - t) / r)
    }
}

/// Plain ISTA on the dense matrix, written independently of the library solver.
pub fn ista_reference(a: &DesignMatrix<f64>, y: &[C], lambda: &[f64], iterations: usize) -> Vec<C> {
    let (m, n) = (a.rows(), a.cols());
    let d = a.to_dense();
    // Spectral norm squared by power iteration on A^H A.
    let mut v = vec![C::new(1.0, 0.0); n];
    let mut l = 0.0;
    for _ in 0..500 {
        let av: Vec<C> = (0..m)
            .map(|i| (0..n).map(|j| d[i * n + j] * v[j]).sum())
            .collect();
        let w: Vec<C> = (0..n)
            .map(|j| (0..m).map(|i| d[i * n + j].conj() * av[i]).sum())
            .collect();
        l = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v = w.iter().map(|z| z / l).collect();
    }
    let tau = 1.0 / (l * 1.01);
    let mut x = vec![C::new(0.0, 0.0); n];
    let mut r = vec![C::new(0.0, 0.0); m];
    let mut g = vec![C::new(0.0, 0.0); n];
    for _ in 0..iterations {
        for i in 0..m {
            let mut s = y[i];
            for j in 0..n {
                s -= d[i * n + j] * x[j];
            }
            r[i] = s;
        }
        for j in 0..n {
            let mut s = C::new(0.0, 0.0);
            for i in 0..m {
                s += d[i * n + j].conj() * r[i];
            }
            g[j] = s;
        }
        for j in 0..n {
            x[j] = soft(x[j] + g[j] * tau, tau * lambda[j]);
        }
    }
    x
}

pub fn rng(seed: u64) -> TrialRng {
    trial_rng(seed, 1)
}
