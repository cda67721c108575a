//! Small dense Hermitian matrices and the relative eigenproblem `det(A - λ g) = 0`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative eigenvalues at or below this value are treated as degenerate.
pub const DEGENERATE_EIGENVALUE: f64 = 1e-14;

/// An `n × n` complex Hermitian matrix, `n ≥ 1`.
///
/// Coefficient matrices of (1,1)-forms are stored with `entries[(i, j)]`
/// holding the coefficient of `dz_i ∧ dz̄_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    m: DMatrix<Complex64>,
}

impl HermitianMatrix {
    /// Builds a matrix from `f(i, j)` for `i <= j`; the lower triangle is the conjugate
    /// and the diagonal is made real.
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                if i == j {
                    m[(i, i)] = Complex64::new(v.re, 0.0);
                } else {
                    m[(i, j)] = v;
                    m[(j, i)] = v.conj();
                }
            }
        }
        HermitianMatrix { m }
    }

    /// Takes ownership of `m`, replacing it by its Hermitian part `(m + m†)/2`.
    pub fn from_matrix(m: DMatrix<Complex64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix is not square",
                m.nrows(),
                m.ncols()
            )));
        }
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        Ok(HermitianMatrix { m: h })
    }

    /// Row-major entries; fails if the slice is not Hermitian to `1e-12` (relative).
    pub fn from_row_major(n: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        let m = DMatrix::from_row_slice(n, n, entries);
        let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let skew = (&m - m.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if skew > 1e-12 * scale {
            return Err(Error::DimensionMismatch(format!(
                "matrix is not Hermitian (skew part {skew:e})"
            )));
        }
        Self::from_matrix(m)
    }

    pub fn identity(n: usize) -> Self {
        HermitianMatrix {
            m: DMatrix::identity(n, n),
        }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self::from_upper_fn(n, |i, j| {
            if i == j {
                Complex64::new(d[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.m[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn to_row_major(&self) -> Vec<Complex64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.m[(i, j)]);
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        HermitianMatrix {
            m: &self.m * Complex64::new(c, 0.0),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        HermitianMatrix {
            m: &self.m + &other.m,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        HermitianMatrix {
            m: &self.m - &other.m,
        }
    }

    /// `S† A S` for an arbitrary square `S`.
    pub fn congruence(&self, s: &DMatrix<Complex64>) -> Self {
        let m = s.adjoint() * &self.m * s;
        Self::from_matrix(m).expect("square by construction")
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    /// Real trace of the product `self · other`.
    pub fn trace_product(&self, other: &Self) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += (self.m[(i, j)] * other.m[(j, i)]).re;
            }
        }
        acc
    }

    /// Ordinary eigenvalues, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .m
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        sort_descending(&mut v);
        v
    }

    pub fn inverse(&self) -> Option<Self> {
        self.m
            .clone()
            .try_inverse()
            .map(|m| Self::from_matrix(m).expect("square"))
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn sort_descending(v: &mut [f64]) {
    // stable: equal values keep their original order
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
}

/// Eigenvalues of the pair `(A, g)`: roots of `det(A - λ g) = 0`, sorted descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeSpectrum {
    pub values: Vec<f64>,
}

impl RelativeSpectrum {
    pub fn new(mut values: Vec<f64>) -> Self {
        sort_descending(&mut values);
        RelativeSpectrum { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::NAN)
    }
}

/// Cholesky factor `L` of a positive definite `g = L L†`.
pub(crate) fn cholesky_factor(g: &HermitianMatrix) -> Result<DMatrix<Complex64>> {
    let fail = || Error::NonPositiveMetric {
        min_eigenvalue: g.eigenvalues().last().copied().unwrap_or(f64::NAN),
    };
    let l = g.m.clone().cholesky().ok_or_else(fail)?.l();
    // complex Cholesky happily takes square roots of negative pivots
    if (0..l.nrows()).any(|i| {
        let d = l[(i, i)];
        !(d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-14 * d.re)
    }) {
        return Err(fail());
    }
    Ok(l)
}

/// Solves the relative eigenproblem by reducing to `L⁻¹ A L⁻†` with `g = L L†`.
pub fn relative_spectrum(a: &HermitianMatrix, g: &HermitianMatrix) -> Result<RelativeSpectrum> {
    if a.dim() != g.dim() {
        return Err(Error::DimensionMismatch(format!(
            "pair of sizes {} and {}",
            a.dim(),
            g.dim()
        )));
    }
    let l = cholesky_factor(g)?;
    let linv = l.try_inverse().ok_or(Error::NonPositiveMetric {
        min_eigenvalue: 0.0,
    })?;
    let reduced = HermitianMatrix::from_matrix(&linv * &a.m * linv.adjoint())?;
    Ok(RelativeSpectrum::new(reduced.eigenvalues()))
}
