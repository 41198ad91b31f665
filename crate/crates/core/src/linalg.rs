//! Small dense complex matrices.
//!
//! A thin wrapper over `nalgebra::DMatrix<Complex64>` exposing only the
//! operations the operator code needs. Dimensions never exceed 2·16.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CVector = DVector<Complex64>;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        Self(DMatrix::from_fn(rows, cols, f))
    }

    pub fn diagonal(entries: &[Complex64]) -> Self {
        let n = entries.len();
        Self::from_fn(n, n, |i, j| if i == j { entries[i] } else { Complex64::new(0.0, 0.0) })
    }

    /// `|v⟩⟨v|`
    pub fn projector(v: &CVector) -> Self {
        Self(v * v.adjoint())
    }

    /// `|u⟩⟨v|`
    pub fn outer(u: &CVector, v: &CVector) -> Self {
        Self(u * v.adjoint())
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.0[(i, j)] = v;
    }

    pub fn as_inner(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self(self.0.kronecker(&other.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * Complex64::new(s, 0.0))
    }

    pub fn scale_c(&self, s: Complex64) -> Self {
        Self(&self.0 * s)
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.0 * v
    }

    /// Largest entry modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.0.shape() != other.0.shape() {
            return Err(Error::DimensionMismatch { expected: self.rows(), got: other.rows() });
        }
        Ok(self.0.iter().zip(other.0.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Deviation from Hermiticity, `max |A − A†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        if self.rows() != self.cols() {
            return f64::INFINITY;
        }
        self.max_abs_diff(&self.adjoint()).unwrap_or(f64::INFINITY)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let h = (&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `max |AB − BA|`
    pub fn commutator_norm(&self, other: &Self) -> f64 {
        let ab = &self.0 * &other.0;
        let ba = &other.0 * &self.0;
        ab.iter().zip(ba.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Largest singular values, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = self.0.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl std::iter::Sum for ComplexMatrix {
    fn sum<I: Iterator<Item = Self>>(mut iter: I) -> Self {
        let first = iter.next().expect("sum over an empty matrix iterator");
        iter.fold(first, |acc, m| &acc + &m)
    }
}

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `e^{iφ}`
#[inline]
pub fn cis(phi: f64) -> Complex64 {
    Complex64::from_polar(1.0, phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_eigenvalues_and_commutator() {
        let x = ComplexMatrix::from_fn(2, 2, |i, j| if i != j { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let z = ComplexMatrix::diagonal(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        let ev = x.hermitian_eigenvalues();
        assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
        assert!((x.commutator_norm(&z) - 2.0).abs() < 1e-14);
        assert_eq!(x.hermiticity_defect(), 0.0);
    }

    #[test]
    fn kron_dimensions() {
        let a = ComplexMatrix::identity(3);
        let b = ComplexMatrix::identity(2);
        let k = a.kron(&b);
        assert_eq!((k.rows(), k.cols()), (6, 6));
        assert!(k.max_abs_diff(&ComplexMatrix::identity(6)).unwrap() == 0.0);
        assert!(a.max_abs_diff(&b).is_err());
    }
}
