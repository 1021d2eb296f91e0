//! Dense complex square matrices used for Hamiltonians, observables,
//! density matrices and superoperators.

use std::ops::{Add, Mul, Sub};

use faer::{Mat, MatRef, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Tolerance for Hermiticity and unit-trace checks on physical operators.
pub const PHYSICAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    mat: Mat<C64>,
}

/// Eigendecomposition of a Hermitian operator, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: Mat<C64>,
}

impl DenseOperator {
    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: Mat::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: Mat::identity(dim, dim),
        }
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self {
            mat: Mat::from_fn(dim, dim, f),
        }
    }

    pub fn from_real_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        Self::from_fn(dim, |i, j| C64::new(f(i, j), 0.0))
    }

    pub fn from_rows(rows: &[&[C64]]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::domain("rows do not form a square matrix"));
        }
        Ok(Self::from_fn(dim, |i, j| rows[i][j]))
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        Self::from_fn(diag.len(), |i, j| if i == j { diag[i] } else { ZERO })
    }

    pub fn real_diagonal(diag: &[f64]) -> Self {
        Self::from_fn(diag.len(), |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                ZERO
            }
        })
    }

    /// Square matrix; panics when `mat` is rectangular.
    pub fn from_mat(mat: Mat<C64>) -> Self {
        assert_eq!(mat.nrows(), mat.ncols(), "operator must be square");
        Self { mat }
    }

    pub fn from_real_mat(mat: &Mat<f64>) -> Self {
        Self::from_fn(mat.nrows(), |i, j| C64::new(mat[(i, j)], 0.0))
    }

    /// Pure-state projector `|psi><psi|`.
    pub fn projector(psi: &[C64]) -> Self {
        Self::from_fn(psi.len(), |i, j| psi[i] * psi[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_mat(&self) -> MatRef<'_, C64> {
        self.mat.as_ref()
    }

    pub fn into_mat(self) -> Mat<C64> {
        self.mat
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.mat[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: C64) {
        self.mat[(i, j)] = value;
    }

    pub fn dagger(&self) -> Self {
        Self {
            mat: self.mat.adjoint().to_owned(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            mat: self.mat.transpose().to_owned(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            mat: self.mat.conjugate().to_owned(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.mat[(i, i)]).sum()
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self::from_fn(self.dim(), |i, j| factor * self.mat[(i, j)])
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(C64::new(factor, 0.0))
    }

    /// `self ⊗ other` with `self` as the leading (most significant) factor.
    pub fn kron(&self, other: &Self) -> Self {
        let (da, db) = (self.dim(), other.dim());
        Self::from_fn(da * db, |r, c| {
            self.mat[(r / db, c / db)] * other.mat[(r % db, c % db)]
        })
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        &(self * other) + &(other * self)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                m = m.max(self.mat[(i, j)].norm());
            }
        }
        m
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        let mut m = 0.0f64;
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                m = m.max((self.mat[(i, j)] - other.mat[(i, j)]).norm());
            }
        }
        m
    }

    /// `max |M - M†|` entry-wise.
    pub fn hermiticity_deviation(&self) -> f64 {
        let d = self.dim();
        let mut m = 0.0f64;
        for j in 0..d {
            for i in 0..=j {
                m = m.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        m
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    /// Largest imaginary part among the entries.
    pub fn max_imag(&self) -> f64 {
        let mut m = 0.0f64;
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                m = m.max(self.mat[(i, j)].im.abs());
            }
        }
        m
    }

    pub fn real_part(&self) -> Mat<f64> {
        Mat::from_fn(self.dim(), self.dim(), |i, j| self.mat[(i, j)].re)
    }

    /// Hermitian, unit trace and of dimension `2^k`.
    pub fn check_density_matrix(&self, tol: f64) -> Result<()> {
        if !self.dim().is_power_of_two() {
            return Err(Error::numerical(format!(
                "density matrix dimension {} is not a power of two",
                self.dim()
            )));
        }
        let herm = self.hermiticity_deviation();
        if herm > tol {
            return Err(Error::numerical(format!(
                "density matrix not Hermitian (deviation {herm:e})"
            )));
        }
        let tr = self.trace();
        if (tr - ONE).norm() > tol {
            return Err(Error::numerical(format!("density matrix trace {tr} != 1")));
        }
        Ok(())
    }

    /// `tr[rho^2]` without forming the product.
    pub fn purity(&self) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += (self.mat[(i, j)] * self.mat[(j, i)]).re;
            }
        }
        acc
    }

    /// Eigendecomposition assuming `self` is Hermitian. Real symmetric input
    /// goes through the real solver.
    pub fn eigh(&self) -> Result<Eigh> {
        if self.max_imag() == 0.0 {
            let (values, vectors) = real_symmetric_eigh(&self.real_part())?;
            let vectors = Mat::from_fn(vectors.nrows(), vectors.ncols(), |i, j| {
                C64::new(vectors[(i, j)], 0.0)
            });
            return Ok(Eigh { values, vectors });
        }
        let evd = self
            .mat
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::LinAlg(format!("{e:?}")))?;
        let values = evd.S().column_vector().iter().map(|x| x.re).collect();
        Ok(Eigh {
            values,
            vectors: evd.U().to_owned(),
        })
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if self.max_imag() == 0.0 {
            return self
                .real_part()
                .self_adjoint_eigenvalues(Side::Lower)
                .map_err(|e| Error::LinAlg(format!("{e:?}")));
        }
        self.mat
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::LinAlg(format!("{e:?}")))
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        spectral_norm(self)
    }
}

/// Largest singular value of a square matrix.
pub fn spectral_norm(m: &DenseOperator) -> f64 {
    if m.dim() == 0 {
        return 0.0;
    }
    m.mat
        .singular_values()
        .map(|s| s.first().copied().unwrap_or(0.0))
        .unwrap_or_else(|_| {
            // SVD failing to converge is not expected for finite input; fall
            // back to the Gram-matrix route.
            let gram = &m.dagger() * m;
            gram.eigenvalues()
                .ok()
                .and_then(|v| v.last().copied())
                .unwrap_or(f64::NAN)
                .max(0.0)
                .sqrt()
        })
}

pub(crate) fn real_symmetric_eigh(m: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::LinAlg(format!("{e:?}")))?;
    let values = evd.S().column_vector().iter().copied().collect();
    Ok((values, evd.U().to_owned()))
}

/// `V diag(f(λ)) V†` for a Hermitian eigendecomposition.
pub fn spectral_function(eig: &Eigh, f: impl Fn(f64) -> C64) -> DenseOperator {
    let d = eig.values.len();
    let weights: Vec<C64> = eig.values.iter().map(|&e| f(e)).collect();
    let scaled = Mat::from_fn(d, d, |i, k| eig.vectors[(i, k)] * weights[k]);
    DenseOperator::from_mat(&scaled * eig.vectors.adjoint())
}

impl Mul for &DenseOperator {
    type Output = DenseOperator;

    fn mul(self, rhs: &DenseOperator) -> DenseOperator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        DenseOperator {
            mat: &self.mat * &rhs.mat,
        }
    }
}

impl Add for &DenseOperator {
    type Output = DenseOperator;

    fn add(self, rhs: &DenseOperator) -> DenseOperator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        DenseOperator {
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl Sub for &DenseOperator {
    type Output = DenseOperator;

    fn sub(self, rhs: &DenseOperator) -> DenseOperator {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        DenseOperator {
            mat: &self.mat - &rhs.mat,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn kron_puts_left_factor_first() {
        let a = DenseOperator::real_diagonal(&[1.0, 2.0]);
        let b = DenseOperator::real_diagonal(&[1.0, 10.0]);
        let k = a.kron(&b);
        let diag: Vec<f64> = (0..4).map(|i| k.get(i, i).re).collect();
        assert_eq!(diag, vec![1.0, 10.0, 2.0, 20.0]);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = DenseOperator::real_diagonal(&[3.0, -5.0]);
        assert!((spectral_norm(&m) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn spectral_norm_of_unitary_is_one() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = DenseOperator::from_rows(&[&[c(s, 0.0), c(0.0, s)], &[c(0.0, s), c(s, 0.0)]])
            .unwrap();
        assert!((spectral_norm(&u) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn complex_eigh_reconstructs() {
        let m = DenseOperator::from_rows(&[&[c(1.0, 0.0), c(0.0, -2.0)], &[c(0.0, 2.0), c(-1.0, 0.0)]])
            .unwrap();
        let eig = m.eigh().unwrap();
        let back = spectral_function(&eig, |e| c(e, 0.0));
        assert!(back.max_abs_diff(&m) < 1e-13);
        let r = 5f64.sqrt();
        assert!((eig.values[0] + r).abs() < 1e-13 && (eig.values[1] - r).abs() < 1e-13);
    }

    #[test]
    fn hermiticity_and_purity() {
        let rho = DenseOperator::real_diagonal(&[0.75, 0.25]);
        assert_eq!(rho.hermiticity_deviation(), 0.0);
        assert!((rho.purity() - 0.625).abs() < 1e-15);
        assert!(rho.check_density_matrix(PHYSICAL_TOL).is_ok());
        let bad = DenseOperator::real_diagonal(&[0.75, 0.5]);
        assert!(bad.check_density_matrix(PHYSICAL_TOL).is_err());
    }
}
