use std::ops::Index;

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Finite complex vector: a scene `x0`, an estimate, or a measurement `y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ComplexSignal<T>(Vec<Complex<T>>);

impl<T: Real> ComplexSignal<T> {
    pub fn new(values: Vec<Complex<T>>) -> Result<Self> {
        if let Some(i) = values
            .iter()
            .position(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::InvalidParameter(format!(
                "signal entry {i} is not finite"
            )));
        }
        Ok(Self(values))
    }

    /// Wraps values produced by internal arithmetic on finite inputs.
    pub(crate) fn from_vec_unchecked(values: Vec<Complex<T>>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![Complex::new(T::zero(), T::zero()); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<Complex<T>> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex<T>> {
        self.0.iter()
    }

    pub fn norm_sqr(&self) -> T {
        self.0.iter().fold(T::zero(), |acc, v| acc + v.norm_sqr())
    }

    pub fn max_abs(&self) -> T {
        self.0.iter().fold(T::zero(), |acc, v| acc.max(v.norm()))
    }

    /// Indices of the exactly-nonzero entries.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, v)| v.re != T::zero() || v.im != T::zero())
            .map(|(i, _)| i)
            .collect()
    }

    /// Indices with `|x_i| > 1e-9 * max(1, max|x|)`, for estimates that did not
    /// come out of the proximal solver with exact zeros.
    pub fn numerical_support(&self) -> Vec<usize> {
        let cut = T::lit(1e-9) * T::one().max(self.max_abs());
        self.0
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm() > cut)
            .map(|(i, _)| i)
            .collect()
    }

    /// Largest entrywise modulus of the difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.0
            .iter()
            .zip(&other.0)
            .fold(T::zero(), |acc, (a, b)| acc.max((a - b).norm()))
    }
}

impl<T> Index<usize> for ComplexSignal<T> {
    type Output = Complex<T>;

    fn index(&self, i: usize) -> &Complex<T> {
        &self.0[i]
    }
}
