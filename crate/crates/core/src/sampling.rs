//! Seeded generation of sub-Gaussian sample matrices.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::seed;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Unit-variance entry law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Distribution {
    Gaussian,
    /// Symmetric Bernoulli on `{-1, +1}`.
    Rademacher,
    /// Uniform on `[-√3, √3]`.
    Uniform,
}

impl Distribution {
    pub const ALL: [Distribution; 3] = [
        Distribution::Gaussian,
        Distribution::Rademacher,
        Distribution::Uniform,
    ];

    /// ψ₂ norm of one entry: the `t` solving `E exp(x²/t²) = 2`.
    pub fn psi2_constant(self) -> f64 {
        match self {
            // (1 - 2/t²)^(-1/2) = 2
            Distribution::Gaussian => (8.0f64 / 3.0).sqrt(),
            // exp(1/t²) = 2
            Distribution::Rademacher => 1.0 / std::f64::consts::LN_2.sqrt(),
            // quadrature + root finding, see the sampling tests
            Distribution::Uniform => 1.338_369_155_430_911,
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Distribution::Gaussian => rng.sample(StandardNormal),
            Distribution::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Distribution::Uniform => SQRT_3 * (2.0 * rng.random::<f64>() - 1.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Distribution::Gaussian => "gaussian",
            Distribution::Rademacher => "rademacher",
            Distribution::Uniform => "uniform",
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian" => Ok(Distribution::Gaussian),
            "rademacher" | "bernoulli" => Ok(Distribution::Rademacher),
            "uniform" => Ok(Distribution::Uniform),
            other => Err(Error::parse(
                1,
                1,
                format!("unknown distribution `{other}` (expected gaussian, rademacher or uniform)"),
            )),
        }
    }
}

/// `n×m` matrix of i.i.d. draws, filled row by row.
pub fn standard_real(d: Distribution, n: usize, m: usize, rng: &mut impl Rng) -> Matrix<f64> {
    Matrix::from_row_iterator(n, m, (0..n * m).map(|_| d.sample(rng)))
}

/// `n×m` matrix with i.i.d. real and imaginary parts, each scaled by `1/√2`
/// so that every entry has `E|x|² = 1`.
pub fn standard_complex(d: Distribution, n: usize, m: usize, rng: &mut impl Rng) -> Matrix<Complex64> {
    Matrix::from_row_iterator(n, m, (0..n * m).map(|_| complex_entry(d, rng)))
}

/// One complex entry: real part drawn first, then imaginary part.
#[inline]
pub fn complex_entry<R: Rng + ?Sized>(d: Distribution, rng: &mut R) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re = d.sample(rng);
    let im = d.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Draws colored samples `Σ^{1/2}·X₀` for a fixed `Σ` and entry law.
///
/// The square root is computed once; identity `Σ` skips the product, which
/// gives bit-identical output since multiplying by `I` is exact.
#[derive(Debug, Clone)]
pub struct Sampler {
    sigma: Matrix<f64>,
    root: Option<Matrix<f64>>,
    distribution: Distribution,
}

impl Sampler {
    /// Fails with `NotPsd` unless `sigma` is symmetric positive definite.
    pub fn new(sigma: Matrix<f64>, distribution: Distribution) -> Result<Self> {
        if sigma.nrows() == 0 || !sigma.is_square() {
            return Err(Error::invalid("sigma must be a nonempty square matrix"));
        }
        let eig = linalg::hermitian_eigen(&sigma)
            .map_err(|_| Error::NotPsd("sigma is not symmetric".into()))?;
        let scale = eig.eigenvalues.iter().fold(1.0f64, |a, l| a.max(l.abs()));
        let min = eig.eigenvalues[0];
        if min <= linalg::PSD_TOL * scale {
            return Err(Error::NotPsd(format!(
                "sigma must be positive definite, smallest eigenvalue {min:e}"
            )));
        }
        let n = sigma.nrows();
        let root = if sigma == Matrix::identity(n, n) {
            None
        } else {
            Some(eig.reconstruct_with(f64::sqrt))
        };
        Ok(Self {
            sigma,
            root,
            distribution,
        })
    }

    pub fn isotropic(n: usize, distribution: Distribution) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("dimension n must be positive"));
        }
        Self::new(Matrix::identity(n, n), distribution)
    }

    pub fn n(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn sigma(&self) -> &Matrix<f64> {
        &self.sigma
    }

    pub fn distribution(&self) -> Distribution {
        self.distribution
    }

    pub fn draw_real(&self, m: usize, seed: u64) -> Matrix<f64> {
        let mut rng = seed::rng(seed);
        let x0 = standard_real(self.distribution, self.n(), m, &mut rng);
        match &self.root {
            None => x0,
            Some(r) => r * x0,
        }
    }

    pub fn draw_complex(&self, m: usize, seed: u64) -> Matrix<Complex64> {
        let mut rng = seed::rng(seed);
        let x0 = standard_complex(self.distribution, self.n(), m, &mut rng);
        match &self.root {
            None => x0,
            Some(r) => linalg::to_complex(r) * x0,
        }
    }
}

/// A drawn sample matrix with the parameters that produced it.
#[derive(Debug, Clone)]
pub struct SampleBatch<T: linalg::Scalar> {
    /// `n×m`, one sample per column.
    pub x: Matrix<T>,
    pub sigma: Matrix<f64>,
    pub distribution: Distribution,
    pub seed: u64,
    pub complex: bool,
}

impl<T: linalg::Scalar> SampleBatch<T> {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn m(&self) -> usize {
        self.x.ncols()
    }
}

fn check_sizes(n: usize, m: usize, sigma: &Matrix<f64>) -> Result<()> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("n and m must be positive"));
    }
    if sigma.shape() != (n, n) {
        return Err(Error::mismatch(format!(
            "sigma is {}x{}, expected {n}x{n}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    Ok(())
}

/// Real samples `X = Σ^{1/2} X₀`; deterministic in `seed`.
pub fn draw_real(
    n: usize,
    m: usize,
    sigma: &Matrix<f64>,
    distribution: Distribution,
    seed: u64,
) -> Result<SampleBatch<f64>> {
    check_sizes(n, m, sigma)?;
    let sampler = Sampler::new(sigma.clone(), distribution)?;
    Ok(SampleBatch {
        x: sampler.draw_real(m, seed),
        sigma: sigma.clone(),
        distribution,
        seed,
        complex: false,
    })
}

/// Complex samples `x_k = Σ^{1/2}(u_k + j v_k)/√2` with `u_k, v_k` i.i.d.;
/// `E x xᴴ = Σ` and the real and imaginary parts each have covariance `Σ/2`.
///
/// `Σ` must be real; a non positive definite `Σ` is an invalid argument here.
pub fn draw_complex(
    n: usize,
    m: usize,
    sigma: &Matrix<f64>,
    distribution: Distribution,
    seed: u64,
) -> Result<SampleBatch<Complex64>> {
    check_sizes(n, m, sigma)?;
    let sampler = Sampler::new(sigma.clone(), distribution).map_err(|e| match e {
        Error::NotPsd(msg) => Error::InvalidArgument(msg),
        other => other,
    })?;
    Ok(SampleBatch {
        x: sampler.draw_complex(m, seed),
        sigma: sigma.clone(),
        distribution,
        seed,
        complex: true,
    })
}

pub fn psi2_constant(d: Distribution) -> f64 {
    d.psi2_constant()
}
