//! The correlated sample covariance `Σ̂ = X B Xᴴ / m` and its error metrics.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Scalar};
use crate::patterns::CorrelationPattern;
use crate::sampling::SampleBatch;

/// `X B Xᴴ / m` (for real `X` this is `X B Xᵀ / m`).
///
/// Evaluated as `(X·B)·Xᴴ`.
pub fn correlated_sample_covariance<T: Scalar>(x: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    let m = x.ncols();
    if m == 0 || x.nrows() == 0 {
        return Err(Error::invalid("sample matrix is empty"));
    }
    if b.shape() != (m, m) {
        return Err(Error::mismatch(format!(
            "X has {m} columns but B is {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(from_product(&(x * b), x))
}

/// `Σ̂` from a precomputed `X·B`.
pub fn from_product<T: Scalar>(xb: &Matrix<T>, x: &Matrix<T>) -> Matrix<T> {
    let m = x.ncols() as f64;
    let mut s = xb * x.adjoint();
    s.unscale_mut(m);
    s
}

/// The classical sample covariance `X Xᴴ / m`.
pub fn sample_covariance<T: Scalar>(x: &Matrix<T>) -> Matrix<T> {
    from_product(x, x)
}

#[derive(Debug, Clone)]
pub struct EstimateResult<T: Scalar> {
    pub sigma_hat: Matrix<T>,
    /// `‖Σ̂ − Σ‖`
    pub spectral_error: f64,
    /// `‖Σ̂ − Σ‖_F`
    pub frobenius_error: f64,
    /// `‖Σ̂ − Σ‖_F / ‖Σ‖_F`
    pub normalized_frobenius_error: f64,
}

/// Scores an estimate against the reference `Σ`.
pub fn score<T: Scalar>(sigma_hat: Matrix<T>, sigma: &Matrix<f64>) -> Result<EstimateResult<T>> {
    if sigma_hat.shape() != sigma.shape() {
        return Err(Error::mismatch(format!(
            "estimate is {}x{}, sigma is {}x{}",
            sigma_hat.nrows(),
            sigma_hat.ncols(),
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let diff = &sigma_hat - sigma.map(T::from_real);
    let frobenius_error = diff.norm();
    Ok(EstimateResult {
        spectral_error: linalg::spectral_norm(&diff)?,
        frobenius_error,
        normalized_frobenius_error: frobenius_error / sigma.norm(),
        sigma_hat,
    })
}

/// `‖Σ̂ − Σ‖_F / ‖Σ‖_F` without the spectral norm (no eigendecomposition).
pub fn normalized_frobenius_error<T: Scalar>(sigma_hat: &Matrix<T>, sigma: &Matrix<f64>) -> f64 {
    let mut sq = 0.0;
    for (a, b) in sigma_hat.iter().zip(sigma.iter()) {
        sq += (*a - T::from_real(*b)).modulus_squared();
    }
    sq.sqrt() / sigma.norm()
}

/// Builds `Σ̂` for a batch and a pattern of matching size, then scores it.
///
/// `Σ̂` is Hermitian-symmetrized when `B` is Hermitian; otherwise the raw
/// estimate is scored.
pub fn estimate_and_score<T: Scalar>(
    batch: &SampleBatch<T>,
    pattern: &CorrelationPattern,
) -> Result<EstimateResult<T>> {
    if pattern.m() != batch.m() {
        return Err(Error::mismatch(format!(
            "pattern has m = {}, batch has m = {}",
            pattern.m(),
            batch.m()
        )));
    }
    let xb = pattern.right_multiply(&batch.x)?;
    let mut sigma_hat = from_product(&xb, &batch.x);
    if linalg::is_hermitian(&pattern.materialize_complex()) {
        sigma_hat = (&sigma_hat + sigma_hat.adjoint()) * T::from_real(0.5);
    }
    score(sigma_hat, &batch.sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::PhaseSource;
    use crate::sampling::{draw_real, Distribution, Sampler};
    use crate::seed;
    use nalgebra::dmatrix;
    use num_complex::Complex64;

    #[test]
    fn identity_substitution() {
        let i2 = Matrix::<f64>::identity(2, 2);
        let s = correlated_sample_covariance(&i2, &i2).unwrap();
        assert_eq!(s, &i2 * 0.5);
    }

    #[test]
    fn dimension_mismatch() {
        let x = Matrix::<f64>::zeros(2, 3);
        assert!(matches!(
            correlated_sample_covariance(&x, &Matrix::identity(2, 2)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn identity_pattern_is_classical_bitwise() {
        let b = draw_real(5, 40, &Matrix::identity(5, 5), Distribution::Gaussian, 3).unwrap();
        let corr = correlated_sample_covariance(&b.x, &Matrix::identity(40, 40)).unwrap();
        assert_eq!(corr, sample_covariance(&b.x));
        let via_pattern = from_product(
            &CorrelationPattern::identity(40).unwrap().right_multiply(&b.x).unwrap(),
            &b.x,
        );
        assert_eq!(via_pattern, sample_covariance(&b.x));
    }

    #[test]
    fn traceless_pattern_has_zero_mean() {
        let (n, m, trials) = (3, 10, 10_000);
        let mut b = Matrix::<f64>::zeros(m, m);
        for a in 0..m - 1 {
            b[(a, a + 1)] = 1.0;
            b[(a + 1, a)] = -0.5;
        }
        b[(0, 0)] = 1.0;
        b[(1, 1)] = -1.0;
        let sampler = Sampler::isotropic(n, Distribution::Gaussian).unwrap();
        let mut mean = Matrix::<f64>::zeros(n, n);
        for t in 0..trials {
            let x = sampler.draw_real(m, seed::derive(5, &[t]));
            mean += correlated_sample_covariance(&x, &b).unwrap();
        }
        mean /= trials as f64;
        assert!(mean.abs().max() < 0.05, "{mean}");
    }

    #[test]
    fn perfect_recovery_scores_zero() {
        let sigma = dmatrix![2.0, 0.3; 0.3, 1.0];
        let r = score(sigma.clone(), &sigma).unwrap();
        assert_eq!(r.spectral_error, 0.0);
        assert_eq!(r.frobenius_error, 0.0);
        assert_eq!(r.normalized_frobenius_error, 0.0);
    }

    #[test]
    fn errors_scale_with_sigma() {
        let m = 50;
        let p = CorrelationPattern::toeplitz(Complex64::new(0.5, 0.0), m).unwrap();
        let mut rng = seed::rng(21);
        let x0 = crate::sampling::standard_real(Distribution::Gaussian, 3, m, &mut rng);
        let i3 = Matrix::<f64>::identity(3, 3);
        let s1 = score(from_product(&p.right_multiply(&x0).unwrap(), &x0), &i3).unwrap();
        // Σ = 2I colors as √2·X₀
        let x2 = &x0 * 2f64.sqrt();
        let s2 = score(from_product(&p.right_multiply(&x2).unwrap(), &x2), &(&i3 * 2.0)).unwrap();
        assert!((s2.spectral_error - 2.0 * s1.spectral_error).abs() < 1e-12);
        assert!((s2.frobenius_error - 2.0 * s1.frobenius_error).abs() < 1e-12);
        assert!((s2.normalized_frobenius_error - s1.normalized_frobenius_error).abs() < 1e-12);
    }

    #[test]
    fn hermitian_pattern_gives_hermitian_estimate() {
        let m = 30;
        let p = CorrelationPattern::toeplitz(Complex64::new(0.2, 0.4), m).unwrap();
        let batch = crate::sampling::draw_complex(4, m, &Matrix::identity(4, 4), Distribution::Gaussian, 2).unwrap();
        let raw = correlated_sample_covariance(&batch.x, &p.materialize_complex()).unwrap();
        assert!((&raw - raw.adjoint()).norm() <= 1e-12 * raw.norm());
        let scored = estimate_and_score(&batch, &p).unwrap();
        assert_eq!(scored.sigma_hat, scored.sigma_hat.adjoint());
    }

    #[test]
    fn non_hermitian_pattern_is_not_symmetrized() {
        let m = 12;
        let p = CorrelationPattern::phase(0.5, PhaseSource::Seeded(4), m).unwrap();
        let batch = crate::sampling::draw_complex(3, m, &Matrix::identity(3, 3), Distribution::Gaussian, 2).unwrap();
        let raw = correlated_sample_covariance(&batch.x, &p.materialize_complex()).unwrap();
        let scored = estimate_and_score(&batch, &p).unwrap();
        assert!(linalg::relative_error(&scored.sigma_hat, &raw) < 1e-13);
        assert!((&raw - raw.adjoint()).norm() > 1e-6);
    }

    #[test]
    fn fast_normalized_error_matches_score() {
        let batch = draw_real(4, 20, &Matrix::identity(4, 4), Distribution::Uniform, 9).unwrap();
        let s = sample_covariance(&batch.x);
        let r = score(s.clone(), &batch.sigma).unwrap();
        assert!((normalized_frobenius_error(&s, &batch.sigma) - r.normalized_frobenius_error).abs() < 1e-14);
    }

    #[test]
    fn large_sample_identity_accuracy() {
        let mut failures = 0;
        for s in 0..20 {
            let batch = draw_real(30, 1000, &Matrix::identity(30, 30), Distribution::Gaussian, s).unwrap();
            let r = estimate_and_score(&batch, &CorrelationPattern::identity(1000).unwrap()).unwrap();
            if r.spectral_error >= 0.5 {
                failures += 1;
            }
        }
        assert_eq!(failures, 0);
    }
}
