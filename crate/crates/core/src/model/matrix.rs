use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{complex_normal, mix64};
use crate::scalar::Real;

/// Random ensemble a design matrix was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixKind {
    /// Rows of the unitary DFT matrix selected uniformly without replacement.
    PartialFourier,
    /// First rows of a Haar-distributed unitary matrix.
    HaarRowOrthogonal,
    /// I.i.d. CN(0, 1/N) entries.
    GaussianIid,
    /// Supplied by the caller (e.g. read from a file); no ensemble assumed.
    External,
}

impl MatrixKind {
    pub fn is_row_orthogonal(self) -> bool {
        matches!(
            self,
            MatrixKind::PartialFourier | MatrixKind::HaarRowOrthogonal
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            MatrixKind::PartialFourier => "partial-fourier",
            MatrixKind::HaarRowOrthogonal => "haar",
            MatrixKind::GaussianIid => "gaussian",
            MatrixKind::External => "external",
        }
    }
}

impl std::str::FromStr for MatrixKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "partial-fourier" | "partial_fourier" | "fourier" => Ok(MatrixKind::PartialFourier),
            "haar" | "haar-row-orthogonal" => Ok(MatrixKind::HaarRowOrthogonal),
            "gaussian" | "gaussian-iid" => Ok(MatrixKind::GaussianIid),
            "external" => Ok(MatrixKind::External),
            other => Err(Error::Parse(format!("unknown matrix kind '{other}'"))),
        }
    }
}

/// Cached forward/inverse FFT plans for one transform length. Cloning is cheap.
#[derive(Clone)]
pub struct FourierPlan<T: Real> {
    n: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    scale: T,
}

impl<T: Real> FourierPlan<T> {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            scale: T::one() / T::from_len(n).sqrt(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

impl<T: Real> fmt::Debug for FourierPlan<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierPlan").field("n", &self.n).finish()
    }
}

#[derive(Debug, Clone)]
enum Storage<T: Real> {
    /// Row-major M x N entries.
    Dense(Vec<Complex<T>>),
    /// Selected DFT rows, applied through the FFT.
    Fourier {
        rows: Vec<usize>,
        plan: FourierPlan<T>,
    },
}

/// M x N complex measurement matrix tagged with its ensemble.
#[derive(Debug, Clone)]
pub struct DesignMatrix<T: Real> {
    m: usize,
    n: usize,
    kind: MatrixKind,
    storage: Storage<T>,
    lipschitz: T,
}

fn check_dims(n: usize, m: usize) -> Result<()> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidDimension(format!(
            "matrix dimensions must be positive (M={m}, N={n})"
        )));
    }
    if m > n {
        return Err(Error::InvalidDimension(format!("M={m} exceeds N={n}")));
    }
    Ok(())
}

/// Partial DFT design: `m` distinct rows of the `n`-point unitary DFT.
pub fn gen_partial_fourier<T: Real, R: Rng + ?Sized>(
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<DesignMatrix<T>> {
    check_dims(n, m)?;
    gen_partial_fourier_planned(&FourierPlan::new(n), m, rng)
}

/// Same as [`gen_partial_fourier`], reusing a prebuilt FFT plan.
pub fn gen_partial_fourier_planned<T: Real, R: Rng + ?Sized>(
    plan: &FourierPlan<T>,
    m: usize,
    rng: &mut R,
) -> Result<DesignMatrix<T>> {
    let n = plan.len();
    check_dims(n, m)?;
    let rows = rand::seq::index::sample(rng, n, m).into_vec();
    Ok(DesignMatrix {
        m,
        n,
        kind: MatrixKind::PartialFourier,
        storage: Storage::Fourier {
            rows,
            plan: plan.clone(),
        },
        lipschitz: T::one(),
    })
}

/// Haar row-orthogonal design.
///
/// Orthonormalizes the rows of an M x N i.i.d. CN(0,1) matrix by Gram-Schmidt
/// (two passes). This is the LQ factorization with a positive real diagonal, and
/// since it commutes with right multiplication by any unitary, the result is
/// distributed as the first M rows of a Haar unitary.
pub fn gen_haar_row_orthogonal<T: Real, R: Rng + ?Sized>(
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<DesignMatrix<T>> {
    check_dims(n, m)?;
    let mut a: Vec<Complex<T>> = (0..m * n).map(|_| complex_normal(rng, T::one())).collect();
    for k in 0..m {
        let (done, rest) = a.split_at_mut(k * n);
        let row = &mut rest[..n];
        for _pass in 0..2 {
            for j in 0..k {
                let q = &done[j * n..(j + 1) * n];
                let c = row
                    .iter()
                    .zip(q)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (v, qv)| {
                        acc + v * qv.conj()
                    });
                for (v, qv) in row.iter_mut().zip(q) {
                    *v = *v - c * qv;
                }
            }
        }
        let norm = row
            .iter()
            .fold(T::zero(), |acc, v| acc + v.norm_sqr())
            .sqrt();
        for v in row.iter_mut() {
            *v = *v / norm;
        }
    }
    Ok(DesignMatrix {
        m,
        n,
        kind: MatrixKind::HaarRowOrthogonal,
        storage: Storage::Dense(a),
        lipschitz: T::one(),
    })
}

/// I.i.d. complex Gaussian design with entry variance 1/N.
pub fn gen_gaussian_iid<T: Real, R: Rng + ?Sized>(
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<DesignMatrix<T>> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidDimension(format!(
            "matrix dimensions must be positive (M={m}, N={n})"
        )));
    }
    let var = T::one() / T::from_len(n);
    let a = (0..m * n).map(|_| complex_normal(rng, var)).collect();
    let mut mat = DesignMatrix {
        m,
        n,
        kind: MatrixKind::GaussianIid,
        storage: Storage::Dense(a),
        lipschitz: T::one(),
    };
    mat.lipschitz = mat.estimate_lipschitz();
    Ok(mat)
}

/// DFT row index of every row, if the entries are distinct unitary DFT rows.
fn dft_rows<T: Real>(m: usize, n: usize, entries: &[Complex<T>]) -> Option<Vec<usize>> {
    if m > n {
        return None;
    }
    let scale = T::one() / T::from_len(n).sqrt();
    let tol = T::epsilon() * T::lit(64.0);
    let two_pi = T::lit(2.0) * T::PI();
    let mut rows = Vec::with_capacity(m);
    let mut seen = vec![false; n];
    for i in 0..m {
        let row = &entries[i * n..(i + 1) * n];
        let k = if n == 1 {
            0
        } else {
            let turns = -row[1].arg() / two_pi * T::from_len(n);
            (turns.round().to_f64_lossy() as i64).rem_euclid(n as i64) as usize
        };
        if seen[k] {
            return None;
        }
        seen[k] = true;
        let matches = row.iter().enumerate().all(|(j, &v)| {
            let angle = -two_pi * T::from_len((k * j) % n) / T::from_len(n);
            (v - Complex::from_polar(scale, angle)).norm() <= tol
        });
        if !matches {
            return None;
        }
        rows.push(k);
    }
    Some(rows)
}

impl<T: Real> DesignMatrix<T> {
    /// Wraps caller-supplied row-major entries. The step-size constant is 1 when
    /// the rows are orthonormal to 1e-10, otherwise estimated by power iteration.
    ///
    /// Entries that are distinct rows of the unitary DFT (to a few ulps) are
    /// stored as a partial Fourier design and applied through the FFT, so a
    /// written-out partial Fourier matrix reads back as the same operator.
    pub fn from_dense(m: usize, n: usize, entries: Vec<Complex<T>>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidDimension(format!(
                "matrix dimensions must be positive (M={m}, N={n})"
            )));
        }
        if entries.len() != m * n {
            return Err(Error::DimensionMismatch {
                expected: m * n,
                actual: entries.len(),
                context: "matrix entries",
            });
        }
        if entries
            .iter()
            .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::InvalidParameter("matrix entry is not finite".into()));
        }
        if let Some(rows) = dft_rows(m, n, &entries) {
            return Ok(DesignMatrix {
                m,
                n,
                kind: MatrixKind::PartialFourier,
                storage: Storage::Fourier {
                    rows,
                    plan: FourierPlan::new(n),
                },
                lipschitz: T::one(),
            });
        }
        let mut mat = DesignMatrix {
            m,
            n,
            kind: MatrixKind::External,
            storage: Storage::Dense(entries),
            lipschitz: T::one(),
        };
        if m > n || mat.row_orthogonality_residual() > T::lit(1e-10) {
            mat.lipschitz = mat.estimate_lipschitz();
        }
        Ok(mat)
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    /// Compression rate M/N.
    pub fn gamma(&self) -> T {
        T::from_len(self.m) / T::from_len(self.n)
    }

    /// Largest eigenvalue of `A^H A` (exactly 1 for row-orthogonal designs).
    pub fn lipschitz(&self) -> T {
        self.lipschitz
    }

    /// Selected DFT row indices for partial Fourier designs.
    pub fn fourier_rows(&self) -> Option<&[usize]> {
        match &self.storage {
            Storage::Fourier { rows, .. } => Some(rows),
            Storage::Dense(_) => None,
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex<T> {
        match &self.storage {
            Storage::Dense(a) => a[i * self.n + j],
            Storage::Fourier { rows, plan } => {
                let k = (rows[i] * j) % self.n;
                let angle = -T::lit(2.0) * T::PI() * T::from_len(k) / T::from_len(self.n);
                Complex::from_polar(plan.scale, angle)
            }
        }
    }

    /// Row-major dense entries.
    pub fn to_dense(&self) -> Vec<Complex<T>> {
        match &self.storage {
            Storage::Dense(a) => a.clone(),
            Storage::Fourier { .. } => (0..self.m)
                .flat_map(|i| (0..self.n).map(move |j| (i, j)))
                .map(|(i, j)| self.entry(i, j))
                .collect(),
        }
    }

    /// `A x`.
    pub fn apply(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(x.len(), self.n, "apply: input length");
        match &self.storage {
            Storage::Dense(a) => a
                .chunks_exact(self.n)
                .map(|row| {
                    row.iter()
                        .zip(x)
                        .fold(Complex::new(T::zero(), T::zero()), |acc, (aij, xj)| {
                            acc + aij * xj
                        })
                })
                .collect(),
            Storage::Fourier { rows, plan } => {
                let mut buf = x.to_vec();
                plan.forward.process(&mut buf);
                rows.iter().map(|&k| buf[k] * plan.scale).collect()
            }
        }
    }

    /// `A^H r`.
    pub fn adjoint(&self, r: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(r.len(), self.m, "adjoint: input length");
        match &self.storage {
            Storage::Dense(a) => {
                let mut out = vec![Complex::new(T::zero(), T::zero()); self.n];
                for (row, ri) in a.chunks_exact(self.n).zip(r) {
                    for (o, aij) in out.iter_mut().zip(row) {
                        *o = *o + aij.conj() * ri;
                    }
                }
                out
            }
            Storage::Fourier { rows, plan } => {
                let mut buf = vec![Complex::new(T::zero(), T::zero()); self.n];
                for (&k, ri) in rows.iter().zip(r) {
                    buf[k] = *ri;
                }
                plan.inverse.process(&mut buf);
                for v in buf.iter_mut() {
                    *v = *v * plan.scale;
                }
                buf
            }
        }
    }

    /// `max_{ij} |(A A^H - I)_{ij}|`.
    pub fn row_orthogonality_residual(&self) -> T {
        let dense = self.to_dense();
        let n = self.n;
        let mut worst = T::zero();
        for i in 0..self.m {
            let ri = &dense[i * n..(i + 1) * n];
            for j in i..self.m {
                let rj = &dense[j * n..(j + 1) * n];
                let g = ri
                    .iter()
                    .zip(rj)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| {
                        acc + a * b.conj()
                    });
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((g - Complex::new(target, T::zero())).norm());
            }
        }
        worst
    }

    pub fn is_row_orthogonal(&self, tol: T) -> bool {
        self.m <= self.n && self.row_orthogonality_residual() <= tol
    }

    /// Power iteration on `A^H A`, inflated by 2% to stay on the safe side of
    /// the true spectral norm.
    fn estimate_lipschitz(&self) -> T {
        let mut v: Vec<Complex<T>> = (0..self.n as u64)
            .map(|j| {
                let h = mix64(j);
                let re = (h >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                let im = (mix64(h) >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                Complex::new(T::lit(re), T::lit(im))
            })
            .collect();
        let mut est = T::zero();
        for _ in 0..300 {
            let norm = v.iter().fold(T::zero(), |acc, x| acc + x.norm_sqr()).sqrt();
            if norm == T::zero() {
                break;
            }
            for x in v.iter_mut() {
                *x = *x / norm;
            }
            let w = self.adjoint(&self.apply(&v));
            let next = w.iter().fold(T::zero(), |acc, x| acc + x.norm_sqr()).sqrt();
            let done = (next - est).abs() <= T::lit(1e-10) * next;
            est = next;
            v = w;
            if done {
                break;
            }
        }
        if est <= T::zero() {
            T::one()
        } else {
            est * T::lit(1.02)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;

    fn brute_gram(a: &DesignMatrix<f64>) -> Vec<Complex<f64>> {
        let (m, n) = (a.rows(), a.cols());
        let mut g = vec![Complex::new(0.0, 0.0); m * m];
        for i in 0..m {
            for j in 0..m {
                for l in 0..n {
                    g[i * m + j] += a.entry(i, l) * a.entry(j, l).conj();
                }
            }
        }
        g
    }

    #[test]
    fn full_partial_fourier_is_unitary_row_permutation() {
        let a = gen_partial_fourier::<f64, _>(4, 4, &mut trial_rng(9, 0)).unwrap();
        let mut rows = a.fourier_rows().unwrap().to_vec();
        rows.sort_unstable();
        assert_eq!(rows, vec![0, 1, 2, 3]);
        assert!(a.row_orthogonality_residual() < 1e-14);
    }

    #[test]
    fn partial_fourier_gram_by_brute_force() {
        let a = gen_partial_fourier::<f64, _>(8, 3, &mut trial_rng(1, 2)).unwrap();
        let g = brute_gram(&a);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[i * 3 + j] - Complex::new(want, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn partial_fourier_at_full_scale() {
        let a = gen_partial_fourier::<f64, _>(512, 256, &mut trial_rng(3, 0)).unwrap();
        assert_eq!(a.gamma(), 0.5);
        assert!(a.row_orthogonality_residual() < 1e-12);
    }

    #[test]
    fn fft_operator_matches_dense_entries() {
        let a = gen_partial_fourier::<f64, _>(12, 5, &mut trial_rng(4, 0)).unwrap();
        let dense = DesignMatrix::from_dense(5, 12, a.to_dense()).unwrap();
        let mut rng = trial_rng(4, 1);
        let x: Vec<_> = (0..12).map(|_| complex_normal(&mut rng, 1.0)).collect();
        let r: Vec<_> = (0..5).map(|_| complex_normal(&mut rng, 1.0)).collect();
        for (u, v) in a.apply(&x).iter().zip(dense.apply(&x)) {
            assert!((u - v).norm() < 1e-12);
        }
        for (u, v) in a.adjoint(&r).iter().zip(dense.adjoint(&r)) {
            assert!((u - v).norm() < 1e-12);
        }
        assert_eq!(dense.lipschitz(), 1.0);
    }

    #[test]
    fn dense_dft_rows_are_recognized() {
        let a = gen_partial_fourier::<f64, _>(24, 10, &mut trial_rng(8, 0)).unwrap();
        let b = DesignMatrix::from_dense(10, 24, a.to_dense()).unwrap();
        assert_eq!(b.kind(), MatrixKind::PartialFourier);
        assert_eq!(a.fourier_rows(), b.fourier_rows());
        let x: Vec<Complex<f64>> = (0..24).map(|k| Complex::new(k as f64, 1.0)).collect();
        assert_eq!(a.apply(&x), b.apply(&x));

        let mut d = a.to_dense();
        d[5] += Complex::new(1e-9, 0.0);
        assert_eq!(
            DesignMatrix::from_dense(10, 24, d).unwrap().kind(),
            MatrixKind::External
        );
    }

    #[test]
    fn oversized_m_is_rejected() {
        let mut rng = trial_rng(0, 0);
        assert!(matches!(
            gen_partial_fourier::<f64, _>(4, 5, &mut rng),
            Err(Error::InvalidDimension(_))
        ));
        assert!(gen_haar_row_orthogonal::<f64, _>(4, 5, &mut rng).is_err());
        assert!(gen_gaussian_iid::<f64, _>(0, 1, &mut rng).is_err());
    }

    #[test]
    fn haar_scalar_has_unit_modulus() {
        let a = gen_haar_row_orthogonal::<f64, _>(1, 1, &mut trial_rng(5, 0)).unwrap();
        assert!((a.entry(0, 0).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn haar_rows_are_orthonormal() {
        let a = gen_haar_row_orthogonal::<f64, _>(64, 32, &mut trial_rng(6, 0)).unwrap();
        assert!(a.row_orthogonality_residual() < 1e-10);
    }

    #[test]
    fn haar_seeds_differ_and_second_moment_is_one_over_n() {
        let a = gen_haar_row_orthogonal::<f64, _>(16, 8, &mut trial_rng(7, 0)).unwrap();
        let b = gen_haar_row_orthogonal::<f64, _>(16, 8, &mut trial_rng(7, 1)).unwrap();
        assert!(a.entry(0, 0) != b.entry(0, 0));

        // Each draw contributes 128 entries of squared modulus; the sum per
        // draw is exactly M (orthonormal rows) so we check a single entry.
        let draws = 10_000;
        let (mut m00, mut m37) = (0.0, 0.0);
        for t in 0..draws {
            let a = gen_haar_row_orthogonal::<f64, _>(16, 8, &mut trial_rng(8, t)).unwrap();
            m00 += a.entry(0, 0).norm_sqr();
            m37 += a.entry(3, 7).norm_sqr();
        }
        // Var(|U_ij|^2) = (N-1)/(N^2 (N+1)) -> sd of the mean ~ 5.8e-4.
        let (m00, m37) = (m00 / draws as f64, m37 / draws as f64);
        assert!((m00 - 1.0 / 16.0).abs() < 3e-3, "{m00}");
        assert!((m37 - 1.0 / 16.0).abs() < 3e-3, "{m37}");
    }

    #[test]
    fn gaussian_row_energy_is_about_one() {
        let a = gen_gaussian_iid::<f64, _>(512, 256, &mut trial_rng(10, 0)).unwrap();
        let d = a.to_dense();
        let mean_row: f64 = d.iter().map(|v| v.norm_sqr()).sum::<f64>() / 256.0;
        assert!((mean_row - 1.0).abs() < 0.05, "{mean_row}");
        // Marchenko-Pastur edge for gamma = 0.5 is (1 + sqrt(0.5))^2 ~ 2.91.
        assert!(
            a.lipschitz() > 2.5 && a.lipschitz() < 3.3,
            "{}",
            a.lipschitz()
        );
    }

    #[test]
    fn gaussian_entry_variance_over_many_matrices() {
        let mut acc = 0.0;
        let mats = 1000;
        for t in 0..mats {
            let a = gen_gaussian_iid::<f64, _>(64, 64, &mut trial_rng(11, t)).unwrap();
            acc += a.entry(5, 9).norm_sqr();
        }
        let var = acc / mats as f64;
        // sd of the mean is (1/64)/sqrt(1000).
        assert!(
            (var - 1.0 / 64.0).abs() < 4.0 * (1.0 / 64.0) / (mats as f64).sqrt(),
            "{var}"
        );
    }

    #[test]
    fn single_gaussian_entry() {
        let a = gen_gaussian_iid::<f64, _>(1, 1, &mut trial_rng(12, 0)).unwrap();
        assert!(a.entry(0, 0).norm() > 0.0);
        assert_eq!(a.kind(), MatrixKind::GaussianIid);
    }

    #[test]
    fn f32_instantiation_works() {
        let a = gen_partial_fourier::<f32, _>(16, 8, &mut trial_rng(13, 0)).unwrap();
        assert!(a.row_orthogonality_residual() < 1e-5);
    }
}
