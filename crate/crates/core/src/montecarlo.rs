//! Seeded Monte-Carlo protocols: minimal sample size versus dimension
//! (real and complex) and error versus sample count.
//!
//! Seeding: trial `t` uses `seed ^ t`. The samples for size `m` at dimension
//! `n` come from `derive(trial_seed, [n, m])`, shared by every pattern so
//! that patterns are compared on common random numbers. Phase matrices come
//! from `derive(trial_seed, [THETA_TAG, n])` and stay fixed across `m`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimator;
use crate::exec;
use crate::linalg::{self, Matrix, Scalar};
use crate::patterns::{PatternOperator, PatternSpec};
use crate::sampling::{self, Distribution};
use crate::seed::{self, SampleRng};

pub const DEFAULT_ETA: f64 = 0.2;
pub const DEFAULT_TRIALS: usize = 500;
pub const DEFAULT_CONVERGENCE_N: usize = 30;
/// Default scan ceiling is this multiple of `n`.
pub const M_CAP_FACTOR: usize = 200;

const THETA_TAG: u64 = 0x0074_6865_7461;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    SampleSize,
    Convergence,
    Complex,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SampleSize => "sample-size",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::Complex => "complex",
        }
    }

    fn complex(self) -> bool {
        self == ExperimentKind::Complex
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub distribution: Distribution,
    pub patterns: Vec<PatternSpec>,
    /// `None` means `Σ = I_n`; otherwise every `n` must match its size.
    pub sigma: Option<Matrix<f64>>,
    pub eta: f64,
    pub trials: usize,
    pub n_values: Vec<usize>,
    /// Only used by the convergence protocol.
    pub m_values: Vec<usize>,
    pub seed: u64,
    /// `None` means `200·n` for each `n`.
    pub m_cap: Option<usize>,
}

impl ExperimentSpec {
    /// Protocol defaults for `kind`: Gaussian samples, `η = 0.2`, 500 trials,
    /// `n = 5..30` or `n = 30` with `m = 50..1000`.
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        let patterns = match kind {
            ExperimentKind::Complex => vec![
                PatternSpec::Identity,
                PatternSpec::Phase(0.25),
                PatternSpec::Phase(0.5),
            ],
            _ => vec![
                PatternSpec::Identity,
                PatternSpec::Toeplitz(Complex64::new(0.25, 0.0)),
                PatternSpec::Toeplitz(Complex64::new(0.5, 0.0)),
            ],
        };
        let n_values = match kind {
            ExperimentKind::Convergence => vec![DEFAULT_CONVERGENCE_N],
            _ => (1..=6).map(|k| 5 * k).collect(),
        };
        Self {
            kind,
            distribution: Distribution::Gaussian,
            patterns,
            sigma: None,
            eta: DEFAULT_ETA,
            trials: DEFAULT_TRIALS,
            n_values,
            m_values: (1..=20).map(|k| 50 * k).collect(),
            seed,
            m_cap: None,
        }
    }

    pub fn cap_for(&self, n: usize) -> usize {
        self.m_cap.unwrap_or(M_CAP_FACTOR * n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::invalid(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.patterns.is_empty() {
            return Err(Error::invalid("at least one pattern is required"));
        }
        check_range("n", &self.n_values)?;
        if self.n_values[0] == 0 {
            return Err(Error::invalid("n must be positive"));
        }
        if self.kind == ExperimentKind::Convergence {
            check_range("m", &self.m_values)?;
            if self.m_values[0] == 0 {
                return Err(Error::invalid("m must be positive"));
            }
        }
        let max_n = *self.n_values.last().expect("nonempty");
        if let Some(cap) = self.m_cap {
            if cap < max_n {
                return Err(Error::invalid(format!("m_cap {cap} is below the largest n {max_n}")));
            }
        }
        if let Some(s) = &self.sigma {
            if self.n_values.iter().any(|&n| n != s.nrows()) {
                return Err(Error::mismatch(format!(
                    "sigma is {0}x{0} but the n range is not just {0}",
                    s.nrows()
                )));
            }
            sampling::Sampler::new(s.clone(), self.distribution)?;
        }
        for p in &self.patterns {
            if matches!(p, PatternSpec::Custom(_)) && self.kind != ExperimentKind::Convergence {
                return Err(Error::invalid(
                    "custom patterns have a fixed size and cannot be used in a sample-size scan",
                ));
            }
            if p.is_real() || self.kind.complex() {
                continue;
            }
            return Err(Error::invalid(format!(
                "pattern {p} is complex; use the complex experiment"
            )));
        }
        if let Some(m) = self.fixed_custom_size() {
            if self.m_values.iter().any(|&v| v != m) {
                return Err(Error::mismatch(format!("custom pattern is {m}x{m}, m range differs")));
            }
        }
        Ok(())
    }

    fn fixed_custom_size(&self) -> Option<usize> {
        self.patterns.iter().find_map(|p| match p {
            PatternSpec::Custom(b) => Some(b.nrows()),
            _ => None,
        })
    }

    fn sigma_for(&self, n: usize) -> Matrix<f64> {
        self.sigma.clone().unwrap_or_else(|| Matrix::identity(n, n))
    }
}

fn check_range(name: &str, v: &[usize]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::invalid(format!("{name} range is empty")));
    }
    if v.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(format!("{name} range must be increasing")));
    }
    Ok(())
}

/// Seed of the samples of size `m` at dimension `n` within one trial.
pub fn sample_seed(trial_seed: u64, n: usize, m: usize) -> u64 {
    seed::derive(trial_seed, &[n as u64, m as u64])
}

/// Seed of the phase matrix used within one trial at dimension `n`.
pub fn theta_seed(trial_seed: u64, n: usize) -> u64 {
    seed::derive(trial_seed, &[THETA_TAG, n as u64])
}

/// Scalars the scan can draw directly from an entry law.
pub trait Drawable: Scalar {
    fn draw(d: Distribution, rng: &mut SampleRng) -> Self;
}

impl Drawable for f64 {
    #[inline]
    fn draw(d: Distribution, rng: &mut SampleRng) -> Self {
        d.sample(rng)
    }
}

impl Drawable for Complex64 {
    #[inline]
    fn draw(d: Distribution, rng: &mut SampleRng) -> Self {
        sampling::complex_entry(d, rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinimalSizeOutcome {
    /// First `m` meeting the tolerance, or the cap when censored.
    pub minimal_m: usize,
    pub censored: bool,
}

/// Per-trial output of either protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub n: usize,
    /// Sample count of a convergence trial; `None` for search trials.
    pub m: Option<usize>,
    pub pattern: String,
    pub distribution: Distribution,
    pub trial: usize,
    pub spectral_error: Option<f64>,
    pub normalized_frobenius_error: Option<f64>,
    pub minimal_m: Option<usize>,
    pub censored: bool,
    pub seed: u64,
}

/// Scan state for one trial: the pattern operator (with its phase matrix)
/// and reusable row buffers.
struct Scanner<T> {
    n: usize,
    distribution: Distribution,
    root: Option<Matrix<f64>>,
    sigma: Matrix<f64>,
    sigma_sq: f64,
    op: PatternOperator,
    hermitian: bool,
    rows_x: Vec<Vec<T>>,
    y: Vec<T>,
}

impl<T: Scalar> Scanner<T> {
    fn new(n: usize, distribution: Distribution, sigma: Option<&Matrix<f64>>, op: PatternOperator) -> Result<Self> {
        let (sigma, root) = match sigma {
            None => (Matrix::identity(n, n), None),
            Some(s) => {
                if s.shape() != (n, n) {
                    return Err(Error::mismatch(format!("sigma is {}x{}, expected {n}x{n}", s.nrows(), s.ncols())));
                }
                sampling::Sampler::new(s.clone(), distribution)?;
                let root = if *s == Matrix::identity(n, n) { None } else { Some(linalg::psd_sqrt(s)?) };
                (s.clone(), root)
            }
        };
        let hermitian = op.is_hermitian();
        Ok(Self {
            n,
            distribution,
            sigma_sq: sigma.norm_squared(),
            sigma,
            root,
            op,
            hermitian,
            rows_x: vec![Vec::new(); n],
            y: Vec::new(),
        })
    }

    /// Whether `‖Σ̂_m − Σ‖_F ≤ η‖Σ‖_F` for the samples drawn from `seed`.
    ///
    /// Rows of `X` are produced in the same order as [`sampling::Sampler`].
    /// The squared error is accumulated one row of `Σ̂` at a time, so the
    /// check stops as soon as the tolerance is exceeded. Hermitian patterns
    /// only need the lower triangle, and then rows of `X` are drawn lazily.
    fn meets(&mut self, m: usize, seed: u64, eta: f64, draw: &impl Fn(Distribution, &mut SampleRng) -> T) -> Result<bool> {
        let n = self.n;
        let limit = eta * eta * self.sigma_sq;
        let inv_m = T::from_real(1.0 / m as f64);
        let mut rng = seed::rng(seed);
        let d = self.distribution;
        let lazy = self.root.is_none() && self.hermitian;
        if !lazy {
            for row in &mut self.rows_x {
                row.clear();
                row.extend((0..m).map(|_| draw(d, &mut rng)));
            }
        }
        if let Some(root) = &self.root {
            // coloring mixes rows: x_i = Σ_k R_ik x0_k
            let x0 = std::mem::take(&mut self.rows_x);
            let mut colored = vec![vec![T::zero(); m]; n];
            for (i, row) in colored.iter_mut().enumerate() {
                for (k, src) in x0.iter().enumerate() {
                    let r = T::from_real(root[(i, k)]);
                    for (dst, &s) in row.iter_mut().zip(src) {
                        *dst += r * s;
                    }
                }
            }
            self.rows_x = colored;
        }
        let mut acc = 0.0;
        for i in 0..n {
            if lazy {
                let row = &mut self.rows_x[i];
                row.clear();
                row.extend((0..m).map(|_| draw(d, &mut rng)));
            }
            let mut y = std::mem::take(&mut self.y);
            y.resize(m, T::zero());
            self.op.apply_row(&self.rows_x[i], &mut y)?;
            let cols = if self.hermitian { i + 1 } else { n };
            for j in 0..cols {
                let s_ij = dot_conj(&y, &self.rows_x[j]) * inv_m;
                let e = (s_ij - T::from_real(self.sigma[(i, j)])).modulus_squared();
                acc += if self.hermitian && j < i { 2.0 * e } else { e };
            }
            self.y = y;
            if acc > limit {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// `Σ_k y_k · conj(x_k)`, with four independent accumulators.
#[inline]
fn dot_conj<T: Scalar>(y: &[T], x: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let (yc, xc) = (y.chunks_exact(4), x.chunks_exact(4));
    let (yr, xr) = (yc.remainder(), xc.remainder());
    for (y4, x4) in yc.zip(xc) {
        for k in 0..4 {
            acc[k] += y4[k] * x4[k].conjugate();
        }
    }
    for (&a, &b) in yr.iter().zip(xr) {
        acc[0] += a * b.conjugate();
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

fn scan<T: Scalar>(
    scanner: &mut Scanner<T>,
    eta: f64,
    trial_seed: u64,
    m_cap: usize,
    draw: impl Fn(Distribution, &mut SampleRng) -> T,
) -> Result<MinimalSizeOutcome> {
    let n = scanner.n;
    for m in 1..=m_cap {
        if scanner.meets(m, sample_seed(trial_seed, n, m), eta, &draw)? {
            return Ok(MinimalSizeOutcome { minimal_m: m, censored: false });
        }
    }
    Ok(MinimalSizeOutcome { minimal_m: m_cap, censored: true })
}

/// Smallest `m` with `‖Σ̂ − Σ‖_F / ‖Σ‖_F ≤ η`, scanning `m = 1, 2, …` with
/// fresh samples for every `m`.
///
/// `T = f64` draws real samples, `T = Complex64` complex ones. Reaching
/// `m_cap` gives a censored outcome rather than an error.
#[allow(clippy::too_many_arguments)]
pub fn minimal_sample_size_trial<T: Drawable>(
    n: usize,
    pattern: &PatternSpec,
    distribution: Distribution,
    sigma: Option<&Matrix<f64>>,
    eta: f64,
    trial_seed: u64,
    m_cap: usize,
) -> Result<MinimalSizeOutcome> {
    check_trial_args(n, pattern, eta, m_cap)?;
    let op = pattern.operator(theta_seed(trial_seed, n));
    let mut scanner = Scanner::<T>::new(n, distribution, sigma, op)?;
    scan(&mut scanner, eta, trial_seed, m_cap, T::draw)
}

fn check_trial_args(n: usize, pattern: &PatternSpec, eta: f64, m_cap: usize) -> Result<()> {
    if n == 0 || m_cap == 0 {
        return Err(Error::invalid("n and m_cap must be positive"));
    }
    if eta.is_nan() || eta <= 0.0 || !eta.is_finite() {
        return Err(Error::invalid(format!("eta must be positive, got {eta}")));
    }
    if matches!(pattern, PatternSpec::Custom(_)) {
        return Err(Error::invalid("custom patterns cannot be scanned over m"));
    }
    Ok(())
}

/// One row of a sample-size table.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSizeRow {
    pub experiment: &'static str,
    pub distribution: Distribution,
    pub pattern: String,
    pub n: usize,
    pub trials: usize,
    pub mean_min_m: f64,
    pub std_min_m: f64,
    pub censored: usize,
    pub seed: u64,
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub experiment: &'static str,
    pub distribution: Distribution,
    pub pattern: String,
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub mean_spec_err: f64,
    pub std_spec_err: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SampleSizeTable {
    pub rows: Vec<SampleSizeRow>,
    pub trials: Vec<TrialResult>,
}

impl SampleSizeTable {
    pub fn censored(&self) -> usize {
        self.rows.iter().map(|r| r.censored).sum()
    }
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub trials: Vec<TrialResult>,
}

/// Mean and sample standard deviation, summed in input order.
pub fn mean_std(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Real sample-size protocol: mean minimal `m` per `(n, pattern)`.
pub fn run_sample_size_experiment(spec: &ExperimentSpec, workers: usize) -> Result<SampleSizeTable> {
    if spec.kind.complex() {
        return run_search::<Complex64>(spec, workers);
    }
    run_search::<f64>(spec, workers)
}

/// Complex sample-size protocol; `spec.kind` should be `Complex`.
pub fn run_complex_experiment(spec: &ExperimentSpec, workers: usize) -> Result<SampleSizeTable> {
    run_search::<Complex64>(spec, workers)
}

fn run_search<T: Drawable>(spec: &ExperimentSpec, workers: usize) -> Result<SampleSizeTable> {
    spec.validate()?;
    if spec.kind == ExperimentKind::Convergence {
        return Err(Error::invalid("convergence specs have no minimal-m search"));
    }
    let (n_count, p_count, trials) = (spec.n_values.len(), spec.patterns.len(), spec.trials);
    let outcomes = exec::map_indexed(n_count * p_count * trials, workers, |k| {
        let (cell, t) = (k / trials, k % trials);
        let (ni, pi) = (cell / p_count, cell % p_count);
        let n = spec.n_values[ni];
        let ts = seed::trial_seed(spec.seed, t as u64);
        minimal_sample_size_trial::<T>(
            n,
            &spec.patterns[pi],
            spec.distribution,
            spec.sigma.as_ref(),
            spec.eta,
            ts,
            spec.cap_for(n),
        )
        .map(|o| (o, ts))
    });
    let outcomes: Vec<_> = outcomes.into_iter().collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(n_count * p_count);
    let mut records = Vec::with_capacity(outcomes.len());
    for (cell, chunk) in outcomes.chunks(trials).enumerate() {
        let (ni, pi) = (cell / p_count, cell % p_count);
        let n = spec.n_values[ni];
        let pattern = spec.patterns[pi].to_string();
        let (mean, std) = mean_std(chunk.iter().map(|(o, _)| o.minimal_m as f64));
        rows.push(SampleSizeRow {
            experiment: spec.kind.name(),
            distribution: spec.distribution,
            pattern: pattern.clone(),
            n,
            trials,
            mean_min_m: mean,
            std_min_m: std,
            censored: chunk.iter().filter(|(o, _)| o.censored).count(),
            seed: spec.seed,
        });
        for (t, (o, ts)) in chunk.iter().enumerate() {
            records.push(TrialResult {
                n,
                m: None,
                pattern: pattern.clone(),
                distribution: spec.distribution,
                trial: t,
                spectral_error: None,
                normalized_frobenius_error: None,
                minimal_m: Some(o.minimal_m),
                censored: o.censored,
                seed: *ts,
            });
        }
    }
    Ok(SampleSizeTable { rows, trials: records })
}

/// Spectral and normalized Frobenius error of one estimate at a fixed `m`.
pub fn convergence_trial<T: Drawable>(
    sampler: &sampling::Sampler,
    op: &mut PatternOperator,
    m: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let x: Matrix<T> = draw_colored(sampler, m, seed);
    let xb = op.apply(&x)?;
    let mut sigma_hat = estimator::from_product(&xb, &x);
    if op.is_hermitian() {
        sigma_hat = linalg::symmetrize(&sigma_hat)?;
    }
    let r = estimator::score(sigma_hat, sampler.sigma())?;
    Ok((r.spectral_error, r.normalized_frobenius_error))
}

pub(crate) fn draw_colored<T: Drawable>(sampler: &sampling::Sampler, m: usize, seed: u64) -> Matrix<T> {
    let n = sampler.n();
    let mut rng = seed::rng(seed);
    let d = sampler.distribution();
    let x0 = Matrix::from_row_iterator(n, m, (0..n * m).map(|_| T::draw(d, &mut rng)));
    if *sampler.sigma() == Matrix::identity(n, n) {
        return x0;
    }
    let root = linalg::psd_sqrt(sampler.sigma()).expect("sampler holds a positive definite sigma");
    root.map(T::from_real) * x0
}

/// Convergence protocol: mean spectral error per `(m, pattern)` at each `n`.
pub fn run_convergence_experiment(spec: &ExperimentSpec, workers: usize) -> Result<ConvergenceTable> {
    spec.validate()?;
    if spec.kind != ExperimentKind::Convergence {
        return Err(Error::invalid("spec is not a convergence experiment"));
    }
    let (p_count, m_count, trials) = (spec.patterns.len(), spec.m_values.len(), spec.trials);
    let per_n = p_count * m_count * trials;
    let results = exec::map_indexed(spec.n_values.len() * per_n, workers, |k| {
        let (ni, rest) = (k / per_n, k % per_n);
        let (cell, t) = (rest / trials, rest % trials);
        let (pi, mi) = (cell / m_count, cell % m_count);
        let n = spec.n_values[ni];
        let m = spec.m_values[mi];
        let ts = seed::trial_seed(spec.seed, t as u64);
        let sampler = sampling::Sampler::new(spec.sigma_for(n), spec.distribution)?;
        let mut op = spec.patterns[pi].operator(theta_seed(ts, n));
        let seed = sample_seed(ts, n, m);
        let errs = if spec.patterns[pi].is_real() {
            convergence_trial::<f64>(&sampler, &mut op, m, seed)?
        } else {
            convergence_trial::<Complex64>(&sampler, &mut op, m, seed)?
        };
        Ok((errs, ts))
    });
    let results: Vec<_> = results.into_iter().collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut records = Vec::with_capacity(results.len());
    for (cell, chunk) in results.chunks(trials).enumerate() {
        let (ni, rest) = (cell / (p_count * m_count), cell % (p_count * m_count));
        let (pi, mi) = (rest / m_count, rest % m_count);
        let (n, m) = (spec.n_values[ni], spec.m_values[mi]);
        let pattern = spec.patterns[pi].to_string();
        let (mean, std) = mean_std(chunk.iter().map(|((s, _), _)| *s));
        rows.push(ConvergenceRow {
            experiment: spec.kind.name(),
            distribution: spec.distribution,
            pattern: pattern.clone(),
            n,
            m,
            trials,
            mean_spec_err: mean,
            std_spec_err: std,
            seed: spec.seed,
        });
        for (t, ((s, f), ts)) in chunk.iter().enumerate() {
            records.push(TrialResult {
                n,
                m: Some(m),
                pattern: pattern.clone(),
                distribution: spec.distribution,
                trial: t,
                spectral_error: Some(*s),
                normalized_frobenius_error: Some(*f),
                minimal_m: None,
                censored: false,
                seed: *ts,
            });
        }
    }
    Ok(ConvergenceTable { rows, trials: records })
}

/// Pearson correlation of two equal-length series.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
