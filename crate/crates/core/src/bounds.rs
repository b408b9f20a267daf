//! Non-asymptotic error bounds for `Σ̂ = X B Xᴴ / m` and an empirical fit of
//! the unspecified absolute constant `C`.
//!
//! Tail form, holding with probability at least `1 − 2e^{−δ}` for real
//! samples (`1 − c·e^{−δ}` with an unknown constant `c` for complex ones):
//!
//! ```text
//! ‖Σ̂ − Σ‖ ≤ |tr B/m − 1|·‖Σ‖ + C K² (√(n+δ)‖B‖_F + (n+δ)‖B‖)/m · ‖Σ‖
//! ```
//!
//! The expectation form replaces `n + δ` by `n`.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimator;
use crate::exec;
use crate::linalg::{self, Matrix};
use crate::montecarlo::{self, Drawable};
use crate::patterns::{self, PatternSpec};
use crate::sampling::{Distribution, Sampler};
use crate::seed;

/// Smallest trial count accepted by [`fit_constant`].
pub const MIN_FIT_TRIALS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundQuery {
    pub n: usize,
    pub m: usize,
    /// Tail parameter `δ ≥ 0`.
    pub delta: f64,
    /// ψ₂ constant `K ≥ 1`.
    pub k: f64,
    /// Absolute constant `C ≥ 0`.
    pub c: f64,
    pub b_frobenius: f64,
    pub b_spectral: f64,
    pub b_trace: Complex64,
    /// `‖Σ‖`
    pub sigma_spectral: f64,
}

impl BoundQuery {
    /// Query for a concrete pattern, using its exact norms and the ψ₂
    /// constant of `distribution`; `δ = 0` and `C = 1`.
    pub fn for_pattern(n: usize, pattern: &patterns::CorrelationPattern, distribution: Distribution, sigma_spectral: f64) -> Self {
        let norms = pattern.norms();
        Self {
            n,
            m: pattern.m(),
            delta: 0.0,
            k: distribution.psi2_constant(),
            c: 1.0,
            b_frobenius: norms.frobenius,
            b_spectral: norms.spectral,
            b_trace: norms.trace,
            sigma_spectral,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::invalid("n and m must be at least 1"));
        }
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be finite and nonnegative, got {v}")))
            }
        };
        nonneg("delta", self.delta)?;
        nonneg("C", self.c)?;
        nonneg("‖B‖_F", self.b_frobenius)?;
        nonneg("‖B‖", self.b_spectral)?;
        nonneg("‖Σ‖", self.sigma_spectral)?;
        if !(self.k.is_finite() && self.k >= 1.0) {
            return Err(Error::invalid(format!("K must be at least 1, got {}", self.k)));
        }
        if !(self.b_trace.re.is_finite() && self.b_trace.im.is_finite()) {
            return Err(Error::invalid("tr B must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundForm {
    /// High-probability bound with `n + δ`.
    Tail,
    /// Bound on the expected error, with `n` in place of `n + δ`.
    Expectation,
}

/// Whether the samples are real or complex; only affects the confidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleField {
    Real,
    Complex,
}

/// Probability attached to a bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Confidence {
    /// `1 − 2e^{−δ}` for real samples (may be negative for small `δ`, in
    /// which case the statement is vacuous).
    Real { delta: f64, level: f64 },
    /// `1 − c·e^{−δ}` with an unspecified absolute constant `c`.
    Complex { delta: f64 },
    /// An expectation bound carries no probability.
    InExpectation,
}

impl fmt::Display for Confidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Confidence::Real { level, .. } => write!(f, "{}", crate::report::sig12(*level)),
            Confidence::Complex { delta } => {
                write!(f, "1 - c*{} (c unknown)", crate::report::sig12((-delta).exp()))
            }
            Confidence::InExpectation => f.write_str("expectation"),
        }
    }
}

/// `C K² (√(n+δ)‖B‖_F + (n+δ)‖B‖)/m · ‖Σ‖`
pub fn concentration_tail_bound(q: &BoundQuery) -> Result<f64> {
    concentration_bound(q, BoundForm::Tail)
}

pub fn concentration_bound(q: &BoundQuery, form: BoundForm) -> Result<f64> {
    q.validate()?;
    let d = match form {
        BoundForm::Tail => q.n as f64 + q.delta,
        BoundForm::Expectation => q.n as f64,
    };
    Ok(q.c * q.k * q.k * (d.sqrt() * q.b_frobenius + d * q.b_spectral) / q.m as f64 * q.sigma_spectral)
}

/// `|tr B/m − 1|·‖Σ‖`; zero exactly when `tr B = m`.
pub fn bias_term(q: &BoundQuery) -> Result<f64> {
    q.validate()?;
    if q.b_trace == Complex64::new(q.m as f64, 0.0) {
        return Ok(0.0);
    }
    Ok((q.b_trace / q.m as f64 - 1.0).norm() * q.sigma_spectral)
}

/// Bias plus concentration, tail form.
pub fn estimation_error_bound(q: &BoundQuery) -> Result<f64> {
    Ok(breakdown(q, BoundForm::Tail, SampleField::Real)?.total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundBreakdown {
    pub form: BoundForm,
    pub bias: f64,
    pub concentration: f64,
    pub total: f64,
    pub confidence: Confidence,
}

pub fn breakdown(q: &BoundQuery, form: BoundForm, field: SampleField) -> Result<BoundBreakdown> {
    let bias = bias_term(q)?;
    let concentration = concentration_bound(q, form)?;
    let confidence = match (form, field) {
        (BoundForm::Expectation, _) => Confidence::InExpectation,
        (BoundForm::Tail, SampleField::Real) => Confidence::Real {
            delta: q.delta,
            level: 1.0 - 2.0 * (-q.delta).exp(),
        },
        (BoundForm::Tail, SampleField::Complex) => Confidence::Complex { delta: q.delta },
    };
    Ok(BoundBreakdown {
        form,
        bias,
        concentration,
        total: bias + concentration,
        confidence,
    })
}

/// Expectation-form concentration for `B = T(ω)` written with the
/// large-`m` norms `‖T‖_F ≈ √(m(1+|ω|²)/(1−|ω|²))` and the Gershgorin bound
/// `(1+|ω|)/(1−|ω|)` on `‖T‖`:
/// `C K² (√((1+|ω|²)/(1−|ω|²))·√(n/m) + (1+|ω|)/(1−|ω|)·n/m)·‖Σ‖`.
pub fn toeplitz_expectation_bound(omega: Complex64, n: usize, m: usize, k: f64, c: f64, sigma_spectral: f64) -> Result<f64> {
    let spectral = patterns::toeplitz_spectral_bound(omega)?;
    if n == 0 || m == 0 {
        return Err(Error::invalid("n and m must be at least 1"));
    }
    let r2 = omega.norm_sqr();
    let (n, m) = (n as f64, m as f64);
    Ok(c * k * k * (((1.0 + r2) / (1.0 - r2)).sqrt() * (n / m).sqrt() + spectral * n / m) * sigma_spectral)
}

/// One grid cell of a constant fit.
#[derive(Debug, Clone)]
pub struct FitCell {
    pub n: usize,
    pub m: usize,
    pub pattern: PatternSpec,
    pub distribution: Distribution,
    /// `None` means `Σ = I_n`.
    pub sigma: Option<Matrix<f64>>,
}

impl FitCell {
    pub fn new(n: usize, m: usize, pattern: PatternSpec, distribution: Distribution) -> Self {
        Self { n, m, pattern, distribution, sigma: None }
    }

    fn sigma(&self) -> Matrix<f64> {
        self.sigma.clone().unwrap_or_else(|| Matrix::identity(self.n, self.n))
    }

    /// `K²(√n‖B‖_F + n‖B‖)/m · ‖Σ‖` for this cell; `Θ` is irrelevant since
    /// phase patterns have the moduli of `T(c)` (`‖B‖` uses `theta_seed`).
    pub fn rate(&self, theta_seed: u64) -> Result<f64> {
        let p = self.pattern.instantiate(self.m, theta_seed)?;
        let mut q = BoundQuery::for_pattern(self.n, &p, self.distribution, linalg::spectral_norm(&self.sigma())?);
        q.c = 1.0;
        concentration_bound(&q, BoundForm::Expectation)
    }
}

impl fmt::Display for FitCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} m={} pattern={} dist={}", self.n, self.m, self.pattern, self.distribution)
    }
}

/// Spectral deviations `‖Σ̂ − (tr B/m)Σ‖` of `trials` independent estimates.
///
/// Trial `t` uses `seed ^ t`, with samples and phases derived as in the
/// Monte-Carlo protocols.
pub fn spectral_deviations(cell: &FitCell, trials: usize, seed: u64, workers: usize) -> Result<Vec<f64>> {
    let sigma = cell.sigma();
    let sampler = Sampler::new(sigma.clone(), cell.distribution)?;
    if sampler.n() != cell.n {
        return Err(Error::mismatch(format!("sigma is {0}x{0}, cell has n = {1}", sampler.n(), cell.n)));
    }
    let out = exec::map_indexed(trials, workers, |t| {
        let ts = seed::trial_seed(seed, t as u64);
        let p = cell.pattern.instantiate(cell.m, montecarlo::theta_seed(ts, cell.n))?;
        let sample_seed = montecarlo::sample_seed(ts, cell.n, cell.m);
        if p.is_real() {
            deviation::<f64>(&sampler, &p, sample_seed)
        } else {
            deviation::<Complex64>(&sampler, &p, sample_seed)
        }
    });
    out.into_iter().collect()
}

fn deviation<T: Drawable>(sampler: &Sampler, p: &patterns::CorrelationPattern, seed: u64) -> Result<f64> {
    let x: Matrix<T> = montecarlo::draw_colored(sampler, p.m(), seed);
    let sigma_hat = estimator::from_product(&p.right_multiply(&x)?, &x);
    let scale = p.trace() / p.m() as f64;
    let scale = T::from_c64(scale).ok_or_else(|| Error::invalid("complex trace with real samples"))?;
    let center = sampler.sigma().map(|s| scale * T::from_real(s));
    linalg::spectral_norm(&(sigma_hat - center))
}

#[derive(Debug, Clone)]
pub struct CellFit {
    pub cell: FitCell,
    pub mean_error: f64,
    pub rate: f64,
    /// `mean_error / rate`
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct ConstantFit {
    /// Least-squares `C` minimizing `Σ (mean_error − C·rate)²`.
    pub c: f64,
    pub cells: Vec<CellFit>,
}

impl ConstantFit {
    /// Geometric mean of the per-cell ratios.
    pub fn geometric_mean_ratio(&self) -> f64 {
        let s: f64 = self.cells.iter().map(|c| c.ratio.ln()).sum();
        (s / self.cells.len() as f64).exp()
    }
}

/// Fits `C` in the expectation-form rate over a grid of cells.
pub fn fit_constant(grid: &[FitCell], trials: usize, seed: u64, workers: usize) -> Result<ConstantFit> {
    if grid.is_empty() {
        return Err(Error::invalid("fit grid is empty"));
    }
    if trials < MIN_FIT_TRIALS {
        return Err(Error::invalid(format!("fit needs at least {MIN_FIT_TRIALS} trials, got {trials}")));
    }
    let mut cells = Vec::with_capacity(grid.len());
    for cell in grid {
        let errors = spectral_deviations(cell, trials, seed, workers)?;
        let (mean_error, _) = montecarlo::mean_std(errors);
        let rate = cell.rate(montecarlo::theta_seed(seed, cell.n))?;
        if rate.is_nan() || rate <= 0.0 {
            return Err(Error::invalid(format!("cell {cell} has zero rate")));
        }
        cells.push(CellFit {
            cell: cell.clone(),
            mean_error,
            rate,
            ratio: mean_error / rate,
        });
    }
    let num: f64 = cells.iter().map(|c| c.mean_error * c.rate).sum();
    let den: f64 = cells.iter().map(|c| c.rate * c.rate).sum();
    Ok(ConstantFit { c: num / den, cells })
}

/// Fraction of `errors` strictly above `bound`.
pub fn exceedance(errors: &[f64], bound: f64) -> f64 {
    errors.iter().filter(|&&e| e > bound).count() as f64 / errors.len() as f64
}
