//! Correlation patterns (shape matrices `B`).
//!
//! Three named families plus an arbitrary custom matrix:
//!
//! * `Identity`: independent samples, `B = I_m`.
//! * `Toeplitz(ω)`: Hermitian Toeplitz, `B_ab = ω^(b-a)` on and above the
//!   diagonal and `conj(ω)^(a-b)` below it, `0 < |ω| < 1`.
//! * `Phase(c, Θ)`: non-Hermitian, `B_ab = (c·e^{jΘ_ab})^|a-b|`, `0 < c < 1`.
//!
//! All three have unit diagonal, so `tr(B) = m`.
//!
//! Besides materializing `B`, every pattern can apply itself from the right
//! to a sample matrix (`X ↦ X·B`) without forming `B`: Toeplitz patterns use
//! two first-order recursions, phase patterns a band whose skipped entries
//! sum to less than [`PHASE_BAND_TAIL`] in modulus per row.

use std::f64::consts::TAU;
use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Scalar};
use crate::seed;

/// Bound on the total modulus of the entries of one row that are dropped
/// when a phase pattern is applied without materializing it: half an ulp
/// of the unit diagonal.
pub const PHASE_BAND_TAIL: f64 = f64::EPSILON / 2.0;

/// Source of the phase matrix `Θ` of a [`PatternKind::Phase`] pattern.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseSource {
    /// `Θ ≡ 0`; the pattern reduces to `T(c)`.
    Zero,
    /// i.i.d. uniform phases in `[0, 2π)`, entry `(a, b)` keyed by the seed
    /// and its coordinates. The `m×m` matrix is the leading block of one
    /// infinite array, so patterns of different sizes share phases.
    Seeded(u64),
    Explicit(Matrix<f64>),
}

impl PhaseSource {
    pub fn theta(&self, a: usize, b: usize) -> f64 {
        match self {
            PhaseSource::Zero => 0.0,
            PhaseSource::Seeded(s) => TAU * seed::unit_from_bits(seed::derive(*s, &[a as u64, b as u64])),
            PhaseSource::Explicit(t) => t[(a, b)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PatternKind {
    Identity,
    Toeplitz { omega: Complex64 },
    Phase { c: f64, theta: PhaseSource },
    Custom(Matrix<Complex64>),
}

/// A shape matrix `B` of a fixed size `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationPattern {
    kind: PatternKind,
    m: usize,
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::invalid("pattern size m must be positive"));
    }
    Ok(())
}

fn check_omega(omega: Complex64) -> Result<()> {
    let r = omega.norm();
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::invalid(format!("|omega| = {r} is outside (0, 1)")));
    }
    Ok(())
}

fn check_c(c: f64) -> Result<()> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::invalid(format!("c = {c} is outside (0, 1)")));
    }
    Ok(())
}

impl CorrelationPattern {
    pub fn identity(m: usize) -> Result<Self> {
        check_m(m)?;
        Ok(Self {
            kind: PatternKind::Identity,
            m,
        })
    }

    pub fn toeplitz(omega: Complex64, m: usize) -> Result<Self> {
        check_m(m)?;
        check_omega(omega)?;
        Ok(Self {
            kind: PatternKind::Toeplitz { omega },
            m,
        })
    }

    pub fn phase(c: f64, theta: PhaseSource, m: usize) -> Result<Self> {
        check_m(m)?;
        check_c(c)?;
        if let PhaseSource::Explicit(t) = &theta {
            if t.nrows() != m || t.ncols() != m {
                return Err(Error::invalid(format!(
                    "theta is {}x{}, pattern needs {m}x{m}",
                    t.nrows(),
                    t.ncols()
                )));
            }
            if t.iter().any(|&x| !(0.0..TAU).contains(&x)) {
                return Err(Error::invalid("theta entries must lie in [0, 2π)"));
            }
        }
        Ok(Self {
            kind: PatternKind::Phase { c, theta },
            m,
        })
    }

    /// Any square matrix; no structure is assumed.
    pub fn custom(b: Matrix<Complex64>) -> Result<Self> {
        if b.nrows() == 0 || b.nrows() != b.ncols() {
            return Err(Error::invalid(format!(
                "custom pattern must be square and nonempty, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        let m = b.nrows();
        Ok(Self {
            kind: PatternKind::Custom(b),
            m,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn kind(&self) -> &PatternKind {
        &self.kind
    }

    /// Entry `(a, b)` of `B`.
    pub fn entry(&self, a: usize, b: usize) -> Complex64 {
        match &self.kind {
            PatternKind::Identity => Complex64::new(if a == b { 1.0 } else { 0.0 }, 0.0),
            PatternKind::Toeplitz { omega } => {
                if b >= a {
                    omega.powu((b - a) as u32)
                } else {
                    omega.conj().powu((a - b) as u32)
                }
            }
            PatternKind::Phase { c, theta } => {
                let k = a.abs_diff(b);
                if k == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::from_polar(c.powi(k as i32), k as f64 * theta.theta(a, b))
                }
            }
            PatternKind::Custom(m) => m[(a, b)],
        }
    }

    /// True when every entry of `B` is real.
    pub fn is_real(&self) -> bool {
        match &self.kind {
            PatternKind::Identity => true,
            PatternKind::Toeplitz { omega } => omega.im == 0.0,
            PatternKind::Phase { theta, .. } => match theta {
                PhaseSource::Zero => true,
                PhaseSource::Seeded(_) => false,
                PhaseSource::Explicit(t) => t.iter().all(|&x| x == 0.0),
            },
            PatternKind::Custom(m) => m.iter().all(|z| z.im == 0.0),
        }
    }

    pub fn materialize_complex(&self) -> Matrix<Complex64> {
        Matrix::from_fn(self.m, self.m, |a, b| self.entry(a, b))
    }

    /// `B` in the scalar field `T`; a real field requires a real pattern.
    pub fn materialize<T: Scalar>(&self) -> Result<Matrix<T>> {
        linalg::from_complex(&self.materialize_complex())
    }

    /// `X·B` for an `n×m` sample matrix `X`.
    pub fn right_multiply<T: Scalar>(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        PatternOperator::new(self)?.apply(x)
    }

    /// `tr B` from the diagonal entries alone.
    pub fn trace(&self) -> Complex64 {
        (0..self.m()).map(|a| self.entry(a, a)).sum()
    }

    pub fn norms(&self) -> PatternNorms {
        let b = self.materialize_complex();
        PatternNorms {
            trace: self.trace(),
            frobenius: b.norm(),
            spectral: linalg::spectral_norm(&b).expect("pattern is nonempty"),
        }
    }
}

/// Norm quantities of a materialized pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternNorms {
    pub trace: Complex64,
    pub frobenius: f64,
    pub spectral: f64,
}

/// `‖T(ω)‖_F²` for an `m×m` Toeplitz pattern, in closed form.
pub fn toeplitz_frobenius_sq(omega: Complex64, m: usize) -> Result<f64> {
    check_m(m)?;
    check_omega(omega)?;
    let r2 = omega.norm_sqr();
    let m = m as f64;
    let one_minus = 1.0 - r2;
    Ok(m * (1.0 + r2) / one_minus + 2.0 * r2 * (r2.powf(m) - 1.0) / (one_minus * one_minus))
}

/// Gershgorin bound `(1+|ω|)/(1-|ω|)` on `‖T(ω)‖`, valid for every `m`.
pub fn toeplitz_spectral_bound(omega: Complex64) -> Result<f64> {
    check_omega(omega)?;
    let r = omega.norm();
    Ok((1.0 + r) / (1.0 - r))
}

/// Draws an explicit `m×m` phase matrix with i.i.d. entries uniform in `[0, 2π)`.
pub fn random_theta<R: rand::Rng>(m: usize, rng: &mut R) -> Matrix<f64> {
    Matrix::from_fn(m, m, |_, _| rng.random::<f64>() * TAU)
}

/// Size-free description of a pattern family, instantiated per sample size.
#[derive(Debug, Clone, PartialEq)]
pub enum PatternSpec {
    Identity,
    Toeplitz(Complex64),
    /// Phase pattern with `Θ` drawn from a seed at instantiation.
    Phase(f64),
    Custom(Matrix<Complex64>),
}

impl PatternSpec {
    /// Parses `identity`, `toeplitz:<re>[±<im>j]`, `phase:<c>` or
    /// `custom:<path>`; `load` reads the matrix named by a custom spec.
    pub fn parse(
        text: &str,
        load: impl FnOnce(&str) -> Result<Matrix<Complex64>>,
    ) -> Result<Self> {
        let text = text.trim();
        let (head, arg) = match text.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (text, None),
        };
        let arg_col = head.len() + 2;
        let need_arg = |what: &str| {
            arg.filter(|a| !a.is_empty())
                .ok_or_else(|| Error::parse(1, arg_col, format!("`{what}` needs an argument")))
        };
        let spec = match head {
            "identity" => {
                if arg.is_some() {
                    return Err(Error::parse(1, head.len() + 1, "`identity` takes no argument"));
                }
                PatternSpec::Identity
            }
            "toeplitz" => {
                let omega = parse_complex(need_arg("toeplitz")?, arg_col)?;
                check_omega(omega).map_err(|e| Error::parse(1, arg_col, e.to_string()))?;
                PatternSpec::Toeplitz(omega)
            }
            "phase" => {
                let a = need_arg("phase")?;
                let c: f64 = a
                    .parse()
                    .map_err(|_| Error::parse(1, arg_col, format!("`{a}` is not a number")))?;
                check_c(c).map_err(|e| Error::parse(1, arg_col, e.to_string()))?;
                PatternSpec::Phase(c)
            }
            "custom" => {
                let b = load(need_arg("custom")?)?;
                if b.nrows() == 0 || b.nrows() != b.ncols() {
                    return Err(Error::invalid(format!(
                        "custom pattern must be square, got {}x{}",
                        b.nrows(),
                        b.ncols()
                    )));
                }
                PatternSpec::Custom(b)
            }
            other => {
                return Err(Error::parse(
                    1,
                    1,
                    format!("unknown pattern `{other}` (expected identity, toeplitz, phase or custom)"),
                ))
            }
        };
        Ok(spec)
    }

    /// Builds the `m×m` pattern; phase patterns take `Θ` from `theta_seed`.
    pub fn instantiate(&self, m: usize, theta_seed: u64) -> Result<CorrelationPattern> {
        match self {
            PatternSpec::Identity => CorrelationPattern::identity(m),
            PatternSpec::Toeplitz(w) => CorrelationPattern::toeplitz(*w, m),
            PatternSpec::Phase(c) => CorrelationPattern::phase(*c, PhaseSource::Seeded(theta_seed), m),
            PatternSpec::Custom(b) => {
                if b.nrows() != m {
                    return Err(Error::mismatch(format!(
                        "custom pattern is {0}x{0}, requested m = {m}",
                        b.nrows()
                    )));
                }
                CorrelationPattern::custom(b.clone())
            }
        }
    }

    /// Whether the family produces real matrices (usable with real samples).
    pub fn is_real(&self) -> bool {
        match self {
            PatternSpec::Identity => true,
            PatternSpec::Toeplitz(w) => w.im == 0.0,
            PatternSpec::Phase(_) => false,
            PatternSpec::Custom(b) => b.iter().all(|z| z.im == 0.0),
        }
    }

    /// Operator for `X ↦ X·B` that can be reused across sample sizes.
    pub fn operator(&self, theta_seed: u64) -> PatternOperator {
        match self {
            PatternSpec::Identity => PatternOperator::Identity,
            PatternSpec::Toeplitz(w) => PatternOperator::Toeplitz(*w),
            PatternSpec::Phase(c) => {
                PatternOperator::Phase(PhaseBand::new(*c, PhaseSource::Seeded(theta_seed)))
            }
            PatternSpec::Custom(b) => PatternOperator::Dense(b.clone()),
        }
    }
}

impl fmt::Display for PatternSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternSpec::Identity => write!(f, "identity"),
            PatternSpec::Toeplitz(w) if w.im == 0.0 => write!(f, "toeplitz:{}", w.re),
            PatternSpec::Toeplitz(w) if w.im < 0.0 => write!(f, "toeplitz:{}{}j", w.re, w.im),
            PatternSpec::Toeplitz(w) => write!(f, "toeplitz:{}+{}j", w.re, w.im),
            PatternSpec::Phase(c) => write!(f, "phase:{c}"),
            PatternSpec::Custom(b) => write!(f, "custom:{0}x{0}", b.nrows()),
        }
    }
}

/// Parses `re`, `re+imj`, `re-imj` or `imj`.
fn parse_complex(s: &str, col: usize) -> Result<Complex64> {
    let bad = || Error::parse(1, col, format!("`{s}` is not a number of the form re[+imj]"));
    let s = s.trim();
    if let Some(body) = s.strip_suffix('j') {
        // split at the last sign that is not part of an exponent or the leading sign
        let split = body
            .char_indices()
            .rev()
            .find(|&(i, ch)| {
                (ch == '+' || ch == '-')
                    && i > 0
                    && !matches!(body.as_bytes()[i - 1], b'e' | b'E')
            })
            .map(|(i, _)| i);
        match split {
            Some(i) => {
                let re: f64 = body[..i].parse().map_err(|_| bad())?;
                let im: f64 = body[i..].parse().map_err(|_| bad())?;
                Ok(Complex64::new(re, im))
            }
            None => {
                let im: f64 = body.parse().map_err(|_| bad())?;
                Ok(Complex64::new(0.0, im))
            }
        }
    } else {
        s.parse::<f64>()
            .map(|re| Complex64::new(re, 0.0))
            .map_err(|_| bad())
    }
}

/// Band storage for a phase pattern, extended lazily as larger `m` are requested.
///
/// Column `b` holds `B_ab` for `a ∈ [b - w, b + w]`; entries do not depend on
/// `m`, so columns computed for one size are reused for all larger sizes.
#[derive(Debug, Clone)]
pub struct PhaseBand {
    c: f64,
    theta: PhaseSource,
    width: usize,
    columns: Vec<Vec<Complex64>>,
}

impl PhaseBand {
    pub fn new(c: f64, theta: PhaseSource) -> Self {
        // entries beyond w sum to 2c^(w+1)/(1-c) per row
        let mut width = 1;
        while 2.0 * c.powi(width as i32 + 1) / (1.0 - c) > PHASE_BAND_TAIL {
            width += 1;
        }
        Self {
            c,
            theta,
            width,
            columns: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    fn ensure(&mut self, m: usize) {
        while self.columns.len() < m {
            let b = self.columns.len();
            let lo = b.saturating_sub(self.width);
            let col = (lo..=b + self.width)
                .map(|a| {
                    let k = a.abs_diff(b);
                    if k == 0 {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::from_polar(self.c.powi(k as i32), k as f64 * self.theta.theta(a, b))
                    }
                })
                .collect();
            self.columns.push(col);
        }
    }

    /// Whether every coefficient is real.
    fn is_real(&self) -> bool {
        self.theta == PhaseSource::Zero
    }
}

/// `X ↦ X·B` without materializing `B` where the structure allows it.
#[derive(Debug, Clone)]
pub enum PatternOperator {
    Identity,
    Toeplitz(Complex64),
    Phase(PhaseBand),
    Dense(Matrix<Complex64>),
}

impl PatternOperator {
    pub fn new(p: &CorrelationPattern) -> Result<Self> {
        Ok(match &p.kind {
            PatternKind::Identity => PatternOperator::Identity,
            PatternKind::Toeplitz { omega } => PatternOperator::Toeplitz(*omega),
            PatternKind::Phase { c, theta } => PatternOperator::Phase(PhaseBand::new(*c, theta.clone())),
            PatternKind::Custom(b) => PatternOperator::Dense(b.clone()),
        })
    }

    /// Applies the `m×m` pattern with `m = x.ncols()`.
    pub fn apply<T: Scalar>(&mut self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let (n, m) = x.shape();
        match self {
            PatternOperator::Identity => Ok(x.clone()),
            PatternOperator::Toeplitz(omega) => {
                let w = T::from_c64(*omega).ok_or_else(|| {
                    Error::invalid("complex Toeplitz pattern applied to real samples")
                })?;
                Ok(toeplitz_apply(x, w))
            }
            PatternOperator::Phase(band) => {
                band.ensure(m);
                let mut y = Matrix::<T>::zeros(n, m);
                for b in 0..m {
                    let lo = b.saturating_sub(band.width);
                    let hi = (b + band.width).min(m - 1);
                    let col = &band.columns[b];
                    let mut acc = y.column_mut(b);
                    for a in lo..=hi {
                        let coef = T::from_c64(col[a - lo]).ok_or_else(|| {
                            Error::invalid("phase pattern applied to real samples")
                        })?;
                        acc.axpy(coef, &x.column(a), T::one());
                    }
                }
                Ok(y)
            }
            PatternOperator::Dense(b) => {
                if b.nrows() != m {
                    return Err(Error::mismatch(format!(
                        "pattern is {0}x{0}, samples have {m} columns",
                        b.nrows()
                    )));
                }
                Ok(x * linalg::from_complex::<T>(b)?)
            }
        }
    }
}

impl PatternOperator {
    /// `out = xᵀ·B` for one row `x` of a sample matrix, `m = x.len()`.
    pub fn apply_row<T: Scalar>(&mut self, x: &[T], out: &mut [T]) -> Result<()> {
        let m = x.len();
        debug_assert_eq!(out.len(), m);
        match self {
            PatternOperator::Identity => out.copy_from_slice(x),
            PatternOperator::Toeplitz(omega) => {
                let w = T::from_c64(*omega).ok_or_else(|| {
                    Error::invalid("complex Toeplitz pattern applied to real samples")
                })?;
                let mut f = T::zero();
                for b in 0..m {
                    f = f * w + x[b];
                    out[b] = f;
                }
                let conj = w.conjugate();
                let mut g = T::zero();
                for b in (0..m.saturating_sub(1)).rev() {
                    g = (g + x[b + 1]) * conj;
                    out[b] += g;
                }
            }
            PatternOperator::Phase(band) => {
                if !T::IS_COMPLEX && !band.is_real() {
                    return Err(Error::invalid("phase pattern applied to real samples"));
                }
                band.ensure(m);
                for (b, o) in out.iter_mut().enumerate().take(m) {
                    let lo = b.saturating_sub(band.width);
                    let hi = (b + band.width).min(m - 1);
                    let col = &band.columns[b][..=hi - lo];
                    *o = band_dot(col, &x[lo..=hi])
                        .ok_or_else(|| Error::invalid("phase pattern applied to real samples"))?;
                }
            }
            PatternOperator::Dense(bm) => {
                if bm.nrows() != m {
                    return Err(Error::mismatch(format!(
                        "pattern is {0}x{0}, row has {m} entries",
                        bm.nrows()
                    )));
                }
                for b in 0..m {
                    let mut acc = T::zero();
                    for a in 0..m {
                        let coef = T::from_c64(bm[(a, b)])
                            .ok_or_else(|| Error::invalid("complex pattern applied to real samples"))?;
                        acc += x[a] * coef;
                    }
                    out[b] = acc;
                }
            }
        }
        Ok(())
    }

    /// Entry `B_ab`, consistent with what [`apply`](Self::apply) uses.
    pub fn coefficient(&mut self, a: usize, b: usize) -> Complex64 {
        match self {
            PatternOperator::Identity => Complex64::new(if a == b { 1.0 } else { 0.0 }, 0.0),
            PatternOperator::Toeplitz(omega) => {
                if b >= a {
                    omega.powu((b - a) as u32)
                } else {
                    omega.conj().powu((a - b) as u32)
                }
            }
            PatternOperator::Phase(band) => {
                if a.abs_diff(b) > band.width {
                    return Complex64::new(0.0, 0.0);
                }
                band.ensure(b + 1);
                band.columns[b][a - b.saturating_sub(band.width)]
            }
            PatternOperator::Dense(bm) => bm[(a, b)],
        }
    }

    /// Half-width of the nonzero band, `None` for dense or full patterns.
    pub fn band_width(&self) -> Option<usize> {
        match self {
            PatternOperator::Identity => Some(0),
            PatternOperator::Phase(band) => Some(band.width),
            _ => None,
        }
    }

    /// Whether `B` is Hermitian for every size.
    pub fn is_hermitian(&self) -> bool {
        match self {
            PatternOperator::Identity | PatternOperator::Toeplitz(_) => true,
            PatternOperator::Phase(band) => band.theta == PhaseSource::Zero,
            PatternOperator::Dense(bm) => linalg::is_hermitian(bm),
        }
    }
}

/// `Σ_k coef_k·x_k` with four independent accumulators; `None` if a
/// coefficient is not representable in `T`.
#[inline]
fn band_dot<T: Scalar>(coefs: &[Complex64], x: &[T]) -> Option<T> {
    let mut acc = [T::zero(); 4];
    let (cc, xc) = (coefs.chunks_exact(4), x.chunks_exact(4));
    let (cr, xr) = (cc.remainder(), xc.remainder());
    for (c4, x4) in cc.zip(xc) {
        for k in 0..4 {
            acc[k] += x4[k] * T::from_c64(c4[k])?;
        }
    }
    for (&c, &xa) in cr.iter().zip(xr) {
        acc[0] += xa * T::from_c64(c)?;
    }
    Some((acc[0] + acc[1]) + (acc[2] + acc[3]))
}

/// Column recursions for `X·T(ω)`:
/// `F_b = ω F_{b-1} + x_b`, `G_b = conj(ω) (x_{b+1} + G_{b+1})`, `y_b = F_b + G_b`.
fn toeplitz_apply<T: Scalar>(x: &Matrix<T>, omega: T) -> Matrix<T> {
    let (n, m) = x.shape();
    let mut y = Matrix::<T>::zeros(n, m);
    let mut f = DVector::<T>::zeros(n);
    for b in 0..m {
        f *= omega;
        f += x.column(b);
        y.set_column(b, &f);
    }
    let conj = omega.conjugate();
    let mut g = DVector::<T>::zeros(n);
    for b in (0..m.saturating_sub(1)).rev() {
        g += x.column(b + 1);
        g *= conj;
        let mut col = y.column_mut(b);
        col += &g;
    }
    y
}
