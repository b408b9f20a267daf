//! Dense real and complex matrix helpers.
//!
//! Matrices are `nalgebra::DMatrix<T>` where `T` is either `f64` or
//! `Complex64`; the scalar type plays the role of the real/complex field flag.
//! All functions here are pure.

use nalgebra::{ComplexField, DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues below `-PSD_TOL * max(1, ‖S‖)` make a matrix not PSD.
pub const PSD_TOL: f64 = 1e-10;

pub type Matrix<T> = DMatrix<T>;

/// Scalar field of a matrix: `f64` (real) or `Complex64` (complex).
pub trait Scalar: ComplexField<RealField = f64> + Copy + Send + Sync + 'static {
    const IS_COMPLEX: bool;

    /// Lossless conversion from a complex number; `None` when a real scalar
    /// would have to drop a nonzero imaginary part.
    fn from_c64(z: Complex64) -> Option<Self>;

    fn to_c64(self) -> Complex64;
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;

    #[inline]
    fn from_c64(z: Complex64) -> Option<Self> {
        (z.im == 0.0).then_some(z.re)
    }

    #[inline]
    fn to_c64(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Scalar for Complex64 {
    const IS_COMPLEX: bool = true;

    #[inline]
    fn from_c64(z: Complex64) -> Option<Self> {
        Some(z)
    }

    #[inline]
    fn to_c64(self) -> Complex64 {
        self
    }
}

/// Eigendecomposition of a Hermitian matrix with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct HermitianEigen<T: Scalar> {
    pub eigenvalues: Vec<f64>,
    /// Unitary; column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: Matrix<T>,
}

impl<T: Scalar> HermitianEigen<T> {
    /// `V diag(f(λ)) V^H`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Matrix<T> {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let s = T::from_real(f(lambda));
            scaled.column_mut(j).iter_mut().for_each(|x| *x *= s);
        }
        &scaled * v.adjoint()
    }

    pub fn reconstruct(&self) -> Matrix<T> {
        self.reconstruct_with(|l| l)
    }
}

fn ensure_nonempty<T: Scalar>(a: &Matrix<T>, what: &str) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::invalid(format!("{what}: matrix has a zero dimension")));
    }
    Ok(())
}

fn ensure_square<T: Scalar>(a: &Matrix<T>, what: &str) -> Result<()> {
    ensure_nonempty(a, what)?;
    if a.nrows() != a.ncols() {
        return Err(Error::invalid(format!(
            "{what}: expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

pub fn is_hermitian<T: Scalar>(a: &Matrix<T>) -> bool {
    a.is_square() && (a - a.adjoint()).norm() <= HERMITIAN_TOL * a.norm().max(1.0)
}

/// Checks the Hermitian tolerance and returns `(A + A^H) / 2`.
pub fn symmetrize<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    ensure_square(a, "symmetrize")?;
    if !is_hermitian(a) {
        return Err(Error::invalid("matrix is not Hermitian within tolerance"));
    }
    Ok(hermitian_part(a))
}

fn hermitian_part<T: Scalar>(a: &Matrix<T>) -> Matrix<T> {
    (a + a.adjoint()) * T::from_real(0.5)
}

fn eigen_of_symmetrized<T: Scalar>(h: Matrix<T>) -> HermitianEigen<T> {
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = Matrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    HermitianEigen {
        eigenvalues,
        eigenvectors,
    }
}

pub fn hermitian_eigen<T: Scalar>(a: &Matrix<T>) -> Result<HermitianEigen<T>> {
    Ok(eigen_of_symmetrized(symmetrize(a)?))
}

/// Largest singular value, from the eigenvalues of the smaller Gram matrix.
pub fn spectral_norm<T: Scalar>(a: &Matrix<T>) -> Result<f64> {
    ensure_nonempty(a, "spectral_norm")?;
    let gram = if a.nrows() >= a.ncols() {
        a.adjoint() * a
    } else {
        a * a.adjoint()
    };
    let eig = eigen_of_symmetrized(hermitian_part(&gram));
    let top = eig.eigenvalues.last().copied().unwrap_or(0.0);
    Ok(top.max(0.0).sqrt())
}

pub fn frobenius_norm<T: Scalar>(a: &Matrix<T>) -> Result<f64> {
    ensure_nonempty(a, "frobenius_norm")?;
    Ok(a.norm())
}

pub fn trace<T: Scalar>(a: &Matrix<T>) -> Result<T> {
    ensure_square(a, "trace")?;
    Ok(a.trace())
}

/// Hermitian square root of a PSD matrix.
///
/// Eigenvalues in `[-PSD_TOL·max(1,‖S‖), 0)` are clamped to zero.
pub fn psd_sqrt<T: Scalar>(s: &Matrix<T>) -> Result<Matrix<T>> {
    ensure_square(s, "psd_sqrt")?;
    let eig = hermitian_eigen(s).map_err(|_| Error::NotPsd("input is not Hermitian".into()))?;
    let scale = eig
        .eigenvalues
        .iter()
        .fold(1.0_f64, |acc, l| acc.max(l.abs()));
    if let Some(&min) = eig.eigenvalues.first() {
        if min < -PSD_TOL * scale {
            return Err(Error::NotPsd(format!("smallest eigenvalue {min:e}")));
        }
    }
    Ok(eig.reconstruct_with(|l| l.max(0.0).sqrt()))
}

pub fn kronecker<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vec<T: Scalar>(a: &Matrix<T>) -> Matrix<T> {
    // nalgebra stores column-major, which is exactly the stacking order.
    Matrix::from_column_slice(a.len(), 1, a.as_slice())
}

pub fn to_complex<T: Scalar>(a: &Matrix<T>) -> Matrix<Complex64> {
    a.map(Scalar::to_c64)
}

/// Converts to the scalar field `T`, failing if imaginary parts would be lost.
pub fn from_complex<T: Scalar>(a: &Matrix<Complex64>) -> Result<Matrix<T>> {
    let mut out = Matrix::<T>::zeros(a.nrows(), a.ncols());
    for (dst, &src) in out.iter_mut().zip(a.iter()) {
        *dst = T::from_c64(src)
            .ok_or_else(|| Error::invalid("complex entries cannot be represented as real"))?;
    }
    Ok(out)
}

/// Relative Frobenius distance `‖a - b‖_F / max(‖b‖_F, tiny)`.
pub fn relative_error<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> f64 {
    let denom = b.norm().max(f64::MIN_POSITIVE);
    (a - b).norm() / denom
}
