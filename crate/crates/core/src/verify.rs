//! Numerical checks of the deterministic identities behind the error bounds
//! and an empirical look at quadratic-form concentration.

use std::collections::HashMap;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::exec;
use crate::linalg::{self, Matrix, Scalar};
use crate::sampling::Distribution;
use crate::seed::{self, SampleRng};

/// Default tolerance of the identity checks.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Eigenvalues with modulus up to this go to the nonnegative part of a split.
pub const SPLIT_ZERO_TOL: f64 = 1e-12;
/// Net radius used when none is given.
pub const DEFAULT_EPSILON: f64 = 0.25;
/// Largest sphere dimension for which nets are built.
pub const MAX_NET_DIM: usize = 8;

pub const VEC_QUADRATIC_REAL: &str = "vec-quadratic-real";
pub const VEC_QUADRATIC_COMPLEX: &str = "vec-quadratic-complex";
pub const KRONECKER_NORMS: &str = "kronecker-norms";
pub const HERMITIAN_SPLIT: &str = "hermitian-split";
pub const COMPLEX_EMBEDDING: &str = "complex-embedding";
pub const EPSILON_NET: &str = "epsilon-net";

/// Names of the identity checks, in battery order.
pub const BATTERY: [&str; 6] = [
    VEC_QUADRATIC_REAL,
    VEC_QUADRATIC_COMPLEX,
    KRONECKER_NORMS,
    HERMITIAN_SPLIT,
    COMPLEX_EMBEDDING,
    EPSILON_NET,
];

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub name: String,
    /// Largest relative deviation (or relative violation) seen.
    pub max_deviation: f64,
    pub instances: usize,
    pub tolerance: f64,
    pub passed: bool,
}

impl IdentityReport {
    fn new(name: &str, max_deviation: f64, instances: usize, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            max_deviation,
            instances,
            tolerance,
            passed: max_deviation <= tolerance,
        }
    }

    /// Combines reports of the same identity.
    fn merge(name: &str, parts: &[IdentityReport]) -> Self {
        let dev = parts.iter().fold(0.0f64, |a, r| a.max(r.max_deviation));
        let mut r = Self::new(name, dev, parts.iter().map(|r| r.instances).sum(), parts[0].tolerance);
        r.passed = parts.iter().all(|r| r.passed);
        r
    }
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / scale.max(f64::MIN_POSITIVE)
    }
}

trait Random: Scalar {
    fn random(rng: &mut SampleRng) -> Self;
}

impl Random for f64 {
    fn random(rng: &mut SampleRng) -> Self {
        rng.sample(StandardNormal)
    }
}

impl Random for Complex64 {
    fn random(rng: &mut SampleRng) -> Self {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    }
}

fn random_matrix<T: Random>(r: usize, c: usize, rng: &mut SampleRng) -> Matrix<T> {
    Matrix::from_fn(r, c, |_, _| T::random(rng))
}

fn random_unit<T: Random>(n: usize, rng: &mut SampleRng) -> Matrix<T> {
    loop {
        let v = random_matrix::<T>(n, 1, rng);
        let norm = v.norm();
        if norm > 1e-8 {
            return v.unscale(norm);
        }
    }
}

fn hermitian_random(n: usize, rng: &mut SampleRng) -> Matrix<Complex64> {
    let g = random_matrix::<Complex64>(n, n, rng);
    (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
}

/// `uᴴ X Bᴴ Xᴴ v` directly and as `vec(X)ᴴ (B̄ ⊗ v uᴴ) vec(X)`, with the
/// scale `‖X‖_F² ‖B‖_F` used to make the deviation relative. For real
/// inputs this is `uᵀ X Bᵀ Xᵀ v = vec(X)ᵀ (B ⊗ v uᵀ) vec(X)`.
pub fn vec_quadratic_sides<T: Scalar>(x: &Matrix<T>, b: &Matrix<T>, u: &Matrix<T>, v: &Matrix<T>) -> Result<(T, T, f64)> {
    let (n, m) = x.shape();
    if b.shape() != (m, m) || u.shape() != (n, 1) || v.shape() != (n, 1) {
        return Err(Error::mismatch("vec-quadratic operands do not conform"));
    }
    let direct = (u.adjoint() * x * b.adjoint() * x.adjoint() * v)[(0, 0)];
    let vx = linalg::vec(x);
    let k = linalg::kronecker(&b.map(|z| z.conjugate()), &(v * u.adjoint()));
    let via_kron = (vx.adjoint() * k * &vx)[(0, 0)];
    Ok((direct, via_kron, x.norm_squared() * b.norm()))
}

fn vec_quadratic<T: Random>(name: &str, n: usize, m: usize, seed: u64, instances: usize) -> Result<IdentityReport> {
    let mut rng = seed::rng(seed);
    let mut dev = 0.0f64;
    for _ in 0..instances {
        let x = random_matrix::<T>(n, m, &mut rng);
        let b = random_matrix::<T>(m, m, &mut rng);
        let u = random_unit::<T>(n, &mut rng);
        let v = random_unit::<T>(n, &mut rng);
        let (a, k, scale) = vec_quadratic_sides(&x, &b, &u, &v)?;
        dev = dev.max((a - k).modulus() / scale.max(f64::MIN_POSITIVE));
    }
    Ok(IdentityReport::new(name, dev, instances, IDENTITY_TOL))
}

/// Quadratic-form identity on random real instances of size `n×m`.
pub fn check_vec_quadratic_identity(n: usize, m: usize, seed: u64, instances: usize) -> Result<IdentityReport> {
    check_dims(n, m)?;
    vec_quadratic::<f64>(VEC_QUADRATIC_REAL, n, m, seed, instances)
}

/// Conjugate form of the quadratic-form identity on complex instances.
pub fn check_vec_quadratic_identity_complex(n: usize, m: usize, seed: u64, instances: usize) -> Result<IdentityReport> {
    check_dims(n, m)?;
    vec_quadratic::<Complex64>(VEC_QUADRATIC_COMPLEX, n, m, seed, instances)
}

fn check_dims(n: usize, m: usize) -> Result<()> {
    if n == 0 || m == 0 || n > 16 || m > 16 {
        return Err(Error::invalid("vec-quadratic checks need 1 ≤ n, m ≤ 16"));
    }
    Ok(())
}

/// `‖A⊗B‖ = ‖A‖‖B‖`, `‖B ⊗ v uᴴ‖ = ‖B‖` and `‖B ⊗ v uᴴ‖_F = ‖B‖_F` for
/// random complex `A, B` and unit `u, v`.
pub fn check_kronecker_norms(seed: u64, instances: usize) -> Result<IdentityReport> {
    let mut rng = seed::rng(seed);
    let mut dev = 0.0f64;
    for _ in 0..instances {
        let (p, q, n) = (rng.random_range(1..=4), rng.random_range(1..=4), rng.random_range(1..=4));
        let a = random_matrix::<Complex64>(p, q, &mut rng);
        let b = random_matrix::<Complex64>(q, p, &mut rng);
        let (na, nb) = (linalg::spectral_norm(&a)?, linalg::spectral_norm(&b)?);
        let ab = linalg::spectral_norm(&linalg::kronecker(&a, &b))?;
        dev = dev.max(rel(ab, na * nb, na * nb));
        let u = random_unit::<Complex64>(n, &mut rng);
        let v = random_unit::<Complex64>(n, &mut rng);
        let k = linalg::kronecker(&b, &(&v * u.adjoint()));
        dev = dev.max(rel(linalg::spectral_norm(&k)?, nb, nb));
        let fb = b.norm();
        dev = dev.max(rel(k.norm(), fb, fb));
    }
    Ok(IdentityReport::new(KRONECKER_NORMS, dev, instances, IDENTITY_TOL))
}

/// `B = B₁ − B₂` with `B₁, B₂` positive semidefinite.
#[derive(Debug, Clone)]
pub struct HermitianSplit<T: Scalar> {
    pub b1: Matrix<T>,
    pub b2: Matrix<T>,
}

/// Splits a Hermitian matrix by the signs of its eigenvalues; eigenvalues
/// in `[−1e-12, 1e-12]` go to `B₁` as zeros.
pub fn hermitian_split<T: Scalar>(b: &Matrix<T>) -> Result<HermitianSplit<T>> {
    if !b.is_square() || !linalg::is_hermitian(b) {
        return Err(Error::invalid("hermitian split needs a Hermitian matrix"));
    }
    let eig = linalg::hermitian_eigen(b)?;
    let pos = |l: f64| if l >= -SPLIT_ZERO_TOL { l.max(0.0) } else { 0.0 };
    let neg = |l: f64| if l < -SPLIT_ZERO_TOL { -l } else { 0.0 };
    Ok(HermitianSplit {
        b1: eig.reconstruct_with(pos),
        b2: eig.reconstruct_with(neg),
    })
}

/// Checks `B = B₁ − B₂`, positivity of both parts and the four norm
/// inequalities on one Hermitian matrix.
pub fn check_hermitian_split<T: Scalar>(b: &Matrix<T>) -> Result<IdentityReport> {
    let split = hermitian_split(b)?;
    Ok(IdentityReport::new(HERMITIAN_SPLIT, split_deviation(b, &split)?, 1, IDENTITY_TOL))
}

fn split_deviation<T: Scalar>(b: &Matrix<T>, s: &HermitianSplit<T>) -> Result<f64> {
    let fb = b.norm();
    let scale = fb.max(f64::MIN_POSITIVE);
    let sb = linalg::spectral_norm(b)?;
    let mut dev = (b - (&s.b1 - &s.b2)).norm() / scale;
    for part in [&s.b1, &s.b2] {
        let min = linalg::hermitian_eigen(&linalg::symmetrize(part)?)?.eigenvalues[0];
        dev = dev.max((-min).max(0.0) / scale);
        dev = dev.max((linalg::spectral_norm(part)? - sb).max(0.0) / scale);
        dev = dev.max((part.norm() - fb).max(0.0) / scale);
    }
    Ok(dev)
}

fn hermitian_split_battery(seed: u64, instances: usize) -> Result<IdentityReport> {
    let mut rng = seed::rng(seed);
    let mut dev = 0.0f64;
    for i in 0..instances {
        let n = rng.random_range(1..=6);
        let dev_i = if i % 2 == 0 {
            let b = hermitian_random(n, &mut rng);
            split_deviation(&b, &hermitian_split(&b)?)?
        } else {
            let g = random_matrix::<f64>(n, n, &mut rng);
            let b = (&g + g.transpose()) * 0.5;
            split_deviation(&b, &hermitian_split(&b)?)?
        };
        dev = dev.max(dev_i);
    }
    Ok(IdentityReport::new(HERMITIAN_SPLIT, dev, instances, IDENTITY_TOL))
}

/// `A = [[Re Λ, −Im Λ], [Im Λ, Re Λ]]`.
pub fn real_embedding(lambda: &Matrix<Complex64>) -> Matrix<f64> {
    let (r, c) = lambda.shape();
    Matrix::from_fn(2 * r, 2 * c, |i, j| {
        let z = lambda[(i % r, j % c)];
        match (i < r, j < c) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// With `B = ΛΛᴴ`: `‖AAᵀ‖ = ‖B‖`, `‖AAᵀ‖_F² = 2‖B‖_F²` and
/// `‖Aᵀz‖ = ‖Λᴴx‖` for random `x` with `z = [Re x; Im x]`.
pub fn check_complex_embedding(lambda: &Matrix<Complex64>, seed: u64) -> Result<IdentityReport> {
    Ok(IdentityReport::new(COMPLEX_EMBEDDING, embedding_deviation(lambda, seed)?, 1, IDENTITY_TOL))
}

fn embedding_deviation(lambda: &Matrix<Complex64>, seed: u64) -> Result<f64> {
    if !lambda.is_square() || lambda.nrows() == 0 {
        return Err(Error::invalid("complex embedding needs a nonempty square matrix"));
    }
    let a = real_embedding(lambda);
    let aat = &a * a.transpose();
    let b = lambda * lambda.adjoint();
    let (sb, fb2) = (linalg::spectral_norm(&b)?, b.norm_squared());
    let mut dev = rel(linalg::spectral_norm(&aat)?, sb, sb);
    dev = dev.max(rel(aat.norm_squared(), 2.0 * fb2, 2.0 * fb2));
    let mut rng = seed::rng(seed);
    let n = lambda.nrows();
    for _ in 0..4 {
        let x = random_matrix::<Complex64>(n, 1, &mut rng);
        let z = Matrix::from_fn(2 * n, 1, |i, _| if i < n { x[(i, 0)].re } else { x[(i - n, 0)].im });
        let lhs = (a.transpose() * z).norm();
        let rhs = (lambda.adjoint() * &x).norm();
        dev = dev.max(rel(lhs, rhs, rhs.max(lambda.norm() * x.norm())));
    }
    Ok(dev)
}

fn complex_embedding_battery(seed: u64, instances: usize) -> Result<IdentityReport> {
    let mut rng = seed::rng(seed);
    let mut dev = 0.0f64;
    for i in 0..instances {
        let n = rng.random_range(1..=5);
        let lambda = random_matrix::<Complex64>(n, n, &mut rng);
        dev = dev.max(embedding_deviation(&lambda, seed::derive(seed, &[i as u64]))?);
    }
    Ok(IdentityReport::new(COMPLEX_EMBEDDING, dev, instances, IDENTITY_TOL))
}

/// Deterministic `ε`-net of the unit sphere `S^{d−1}` by greedy
/// farthest-point insertion over a fixed candidate set, stopping once every
/// candidate is within `ε` of the net.
pub fn epsilon_net(dim: usize, epsilon: f64) -> Result<Vec<DVector<f64>>> {
    if dim == 0 || dim > MAX_NET_DIM {
        return Err(Error::invalid(format!("net dimension must be in 1..={MAX_NET_DIM}")));
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::invalid("epsilon must lie in (0, 1/2)"));
    }
    let candidates = net_candidates(dim);
    let mut dist = vec![f64::INFINITY; candidates.len()];
    let mut net = Vec::new();
    let mut next = 0;
    loop {
        let p = candidates[next].clone();
        for (d, c) in dist.iter_mut().zip(&candidates) {
            *d = d.min((c - &p).norm());
        }
        net.push(p);
        let (far, &r) = dist
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("candidates nonempty");
        if r <= epsilon {
            return Ok(net);
        }
        next = far;
    }
}

fn net_candidates(dim: usize) -> Vec<DVector<f64>> {
    match dim {
        1 => vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)],
        2 => (0..4096)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / 4096.0;
                DVector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect(),
        _ => {
            let mut rng = seed::rng(seed::derive(0x6e6574, &[dim as u64]));
            (0..3000 * dim)
                .map(|_| {
                    let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                    let n = v.norm();
                    v / n
                })
                .collect()
        }
    }
}

/// `(1+2/ε)^dim`
pub fn net_cardinality_bound(dim: usize, epsilon: f64) -> f64 {
    (1.0 + 2.0 / epsilon).powi(dim as i32)
}

/// Outcome of one net check.
#[derive(Debug, Clone, PartialEq)]
pub struct NetCheck {
    pub spectral: f64,
    /// `max_{x∈N, y∈M} ⟨Ax, y⟩ / (1 − 2ε)`
    pub net_bound: f64,
    pub net_sizes: (usize, usize),
    pub cardinality_ok: bool,
}

struct NetCache {
    epsilon: f64,
    nets: HashMap<usize, Vec<DVector<f64>>>,
}

impl NetCache {
    fn new(epsilon: f64) -> Self {
        Self { epsilon, nets: HashMap::new() }
    }

    fn get(&mut self, dim: usize) -> Result<&Vec<DVector<f64>>> {
        if !self.nets.contains_key(&dim) {
            self.nets.insert(dim, epsilon_net(dim, self.epsilon)?);
        }
        Ok(&self.nets[&dim])
    }
}

fn net_check(a: &Matrix<f64>, cache: &mut NetCache) -> Result<NetCheck> {
    let (p, q) = a.shape();
    let eps = cache.epsilon;
    let xs = cache.get(q)?.clone();
    let ys = cache.get(p)?;
    let mut best = f64::NEG_INFINITY;
    for x in &xs {
        let ax = a * x;
        for y in ys {
            best = best.max(ax.dot(y));
        }
    }
    Ok(NetCheck {
        spectral: linalg::spectral_norm(a)?,
        net_bound: best / (1.0 - 2.0 * eps),
        net_sizes: (xs.len(), ys.len()),
        cardinality_ok: xs.len() as f64 <= net_cardinality_bound(q, eps) && ys.len() as f64 <= net_cardinality_bound(p, eps),
    })
}

fn net_deviation(c: &NetCheck) -> f64 {
    let violation = (c.spectral - c.net_bound).max(0.0) / c.spectral.max(f64::MIN_POSITIVE);
    if c.cardinality_ok {
        violation
    } else {
        f64::INFINITY
    }
}

/// `‖A‖ ≤ (1−2ε)⁻¹ max ⟨Ax, y⟩` over nets of both spheres, plus the net
/// cardinality bound; dimensions up to 8.
pub fn check_epsilon_net_bound(a: &Matrix<f64>, epsilon: f64) -> Result<(IdentityReport, NetCheck)> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::invalid("matrix is empty"));
    }
    let check = net_check(a, &mut NetCache::new(epsilon))?;
    Ok((IdentityReport::new(EPSILON_NET, net_deviation(&check), 1, IDENTITY_TOL), check))
}

fn epsilon_net_battery(seed: u64, instances: usize) -> Result<IdentityReport> {
    let mut rng = seed::rng(seed);
    let mut cache = NetCache::new(DEFAULT_EPSILON);
    let mut dev = 0.0f64;
    for _ in 0..instances {
        let (p, q) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let a = random_matrix::<f64>(p, q, &mut rng);
        dev = dev.max(net_deviation(&net_check(&a, &mut cache)?));
    }
    Ok(IdentityReport::new(EPSILON_NET, dev, instances, IDENTITY_TOL))
}

/// Runs the identity checks, optionally only the one named `only`.
pub fn run_battery(seed: u64, instances: usize, only: Option<&str>) -> Result<Vec<IdentityReport>> {
    if let Some(name) = only {
        if !BATTERY.contains(&name) {
            return Err(Error::invalid(format!("unknown check `{name}` (expected one of {})", BATTERY.join(", "))));
        }
    }
    let mut out = Vec::new();
    for (k, &name) in BATTERY.iter().enumerate() {
        if only.is_some_and(|o| o != name) {
            continue;
        }
        let s = seed::derive(seed, &[k as u64]);
        let report = match name {
            VEC_QUADRATIC_REAL | VEC_QUADRATIC_COMPLEX => {
                let mut rng = seed::rng(s);
                let mut parts = Vec::new();
                let per = instances.div_ceil(4).max(1);
                let mut left = instances;
                while left > 0 {
                    let count = per.min(left);
                    let (n, m) = (rng.random_range(1..=6), rng.random_range(1..=6));
                    let sub = rng.random::<u64>();
                    parts.push(if name == VEC_QUADRATIC_REAL {
                        check_vec_quadratic_identity(n, m, sub, count)?
                    } else {
                        check_vec_quadratic_identity_complex(n, m, sub, count)?
                    });
                    left -= count;
                }
                IdentityReport::merge(name, &parts)
            }
            KRONECKER_NORMS => check_kronecker_norms(s, instances)?,
            HERMITIAN_SPLIT => hermitian_split_battery(s, instances)?,
            COMPLEX_EMBEDDING => complex_embedding_battery(s, instances)?,
            _ => epsilon_net_battery(s, instances)?,
        };
        out.push(report);
    }
    Ok(out)
}

/// One point of the empirical tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailPoint {
    pub t: f64,
    /// Empirical `P(|Q − E Q| ≥ t)`.
    pub tail: f64,
    /// `min(t²/(K⁴‖B‖_F²), t/(K²‖B‖))`
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HansonWrightReport {
    pub distribution: Distribution,
    pub complex: bool,
    pub trials: usize,
    /// Empirical mean of `Q = xᴴ B x`.
    pub mean: Complex64,
    /// `tr B`
    pub expected_mean: Complex64,
    /// Standard error of the empirical mean, per real component.
    pub std_error: f64,
    pub points: Vec<TailPoint>,
    /// Grid values dropped because no trial reached them.
    pub dropped: Vec<f64>,
    /// Regression of `−log tail` on `x`; the slope is the observed constant.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub notes: Vec<String>,
}

impl HansonWrightReport {
    /// Whether the empirical mean is within `k` standard errors of `tr B`.
    pub fn mean_within(&self, k: f64) -> bool {
        let d = self.mean - self.expected_mean;
        let se = self.std_error.max(f64::MIN_POSITIVE);
        d.re.abs() <= k * se && d.im.abs() <= k * se || d.norm() == 0.0
    }
}

/// Tail probabilities at which the default `t` grid is placed.
pub const DEFAULT_TAIL_LEVELS: [f64; 12] = [0.5, 0.35, 0.25, 0.15, 0.1, 0.06, 0.04, 0.02, 0.01, 0.005, 0.002, 0.001];

const HW_CHUNKS: usize = 64;

/// Empirical tail of `Q = xᴴ B x − tr B` for `x` with i.i.d. entries of
/// `distribution` (complex when `complex`), regressed against the
/// Hanson-Wright exponent.
///
/// Without `t_grid`, `t` is placed at the empirical quantiles of
/// [`DEFAULT_TAIL_LEVELS`].
pub fn check_hanson_wright_empirical(
    distribution: Distribution,
    b: &Matrix<Complex64>,
    complex: bool,
    trials: usize,
    t_grid: Option<&[f64]>,
    seed: u64,
    workers: usize,
) -> Result<HansonWrightReport> {
    if !b.is_square() || b.nrows() == 0 {
        return Err(Error::invalid("B must be a nonempty square matrix"));
    }
    if trials < 2 {
        return Err(Error::invalid("need at least two trials"));
    }
    if !complex && b.iter().any(|z| z.im != 0.0) {
        return Err(Error::invalid("real samples need a real B"));
    }
    let m = b.nrows();
    let trace = b.trace();
    let chunk = trials.div_ceil(HW_CHUNKS);
    let parts = exec::map_indexed(HW_CHUNKS, workers, |c| {
        let start = (c * chunk).min(trials);
        let end = ((c + 1) * chunk).min(trials);
        let mut rng = seed::rng(seed::derive(seed, &[c as u64]));
        let mut x = DVector::<Complex64>::zeros(m);
        (start..end)
            .map(|_| {
                for v in x.iter_mut() {
                    *v = if complex {
                        crate::sampling::complex_entry(distribution, &mut rng)
                    } else {
                        Complex64::new(distribution.sample(&mut rng), 0.0)
                    };
                }
                (x.adjoint() * b * &x)[(0, 0)]
            })
            .collect::<Vec<_>>()
    });
    let q: Vec<Complex64> = parts.into_iter().flatten().collect();
    let n = q.len() as f64;
    let mean = q.iter().sum::<Complex64>() / n;
    let var_re = q.iter().map(|z| (z.re - mean.re).powi(2)).sum::<f64>() / (n - 1.0);
    let var_im = q.iter().map(|z| (z.im - mean.im).powi(2)).sum::<f64>() / (n - 1.0);
    let std_error = (var_re.max(var_im) / n).sqrt();

    let mut dev: Vec<f64> = q.iter().map(|z| (z - trace).norm()).collect();
    dev.sort_by(f64::total_cmp);
    let grid: Vec<f64> = match t_grid {
        Some(g) => g.to_vec(),
        None => DEFAULT_TAIL_LEVELS
            .iter()
            .map(|p| dev[(((1.0 - p) * n).floor() as usize).min(dev.len() - 1)])
            .collect(),
    };
    let k = distribution.psi2_constant();
    let fro = b.norm();
    let spec = linalg::spectral_norm(b)?;
    let mut points = Vec::new();
    let mut dropped = Vec::new();
    let mut notes = Vec::new();
    for &t in &grid {
        if t.is_nan() || t <= 0.0 {
            dropped.push(t);
            continue;
        }
        // count of deviations ≥ t in the sorted list
        let count = dev.len() - dev.partition_point(|&d| d < t);
        if count == 0 {
            dropped.push(t);
            continue;
        }
        let x = (t * t / (k.powi(4) * fro * fro)).min(t / (k * k * spec));
        points.push(TailPoint { t, tail: count as f64 / n, x });
    }
    if !dropped.is_empty() {
        notes.push(format!("{} grid values had an empty tail and were dropped", dropped.len()));
    }
    let (slope, intercept, r_squared) = if points.len() >= 3 {
        let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = points.iter().map(|p| -p.tail.ln()).collect();
        let (slope, intercept) = crate::montecarlo::linear_fit(&xs, &ys);
        let r = crate::montecarlo::pearson(&xs, &ys);
        (slope, intercept, r * r)
    } else {
        notes.push("fewer than three tail points; no regression".into());
        (f64::NAN, f64::NAN, f64::NAN)
    };
    Ok(HansonWrightReport {
        distribution,
        complex,
        trials,
        mean,
        expected_mean: trace,
        std_error,
        points,
        dropped,
        slope,
        intercept,
        r_squared,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::CorrelationPattern;
    use nalgebra::dmatrix;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn scalar_vec_quadratic() {
        let (x, b, u, v) = (dmatrix![3.0], dmatrix![2.0], dmatrix![1.0], dmatrix![-1.0]);
        let (a, k, _) = vec_quadratic_sides(&x, &b, &u, &v).unwrap();
        assert_eq!(a, -18.0);
        assert_eq!(k, -18.0);
    }

    #[test]
    fn vec_quadratic_instances() {
        let r = check_vec_quadratic_identity(2, 3, 1, 50).unwrap();
        assert!(r.passed && r.max_deviation <= 1e-12, "{r:?}");
        let r = check_vec_quadratic_identity_complex(2, 3, 1, 50).unwrap();
        assert!(r.passed && r.max_deviation <= 1e-12, "{r:?}");
        assert!(check_vec_quadratic_identity(17, 2, 0, 1).is_err());
    }

    #[test]
    fn kronecker_with_identity() {
        let u = dmatrix![c(0.6, 0.0); c(0.0, 0.8)];
        let k = linalg::kronecker(&Matrix::<Complex64>::identity(3, 3), &(&u * u.adjoint()));
        assert!((linalg::spectral_norm(&k).unwrap() - 1.0).abs() < 1e-12);
        let a = dmatrix![1.0; 2.0];
        let bt = dmatrix![3.0, -1.0, 2.0];
        assert!((linalg::spectral_norm(&(&a * &bt)).unwrap() - a.norm() * bt.norm()).abs() < 1e-12);
        assert!(check_kronecker_norms(3, 50).unwrap().passed);
    }

    #[test]
    fn swap_matrix_split() {
        let b = dmatrix![0.0, 1.0; 1.0, 0.0];
        let s = hermitian_split(&b).unwrap();
        assert!((s.b1 - dmatrix![0.5, 0.5; 0.5, 0.5]).norm() < 1e-12);
        assert!((s.b2.clone() - dmatrix![0.5, -0.5; -0.5, 0.5]).norm() < 1e-12);
        assert!((linalg::spectral_norm(&s.b2).unwrap() - 1.0).abs() < 1e-12);
        assert!(check_hermitian_split(&b).unwrap().passed);
    }

    #[test]
    fn definite_splits() {
        let psd = dmatrix![2.0, 1.0; 1.0, 2.0];
        assert_eq!(hermitian_split(&psd).unwrap().b2.norm(), 0.0);
        let nd = -psd;
        assert_eq!(hermitian_split(&nd).unwrap().b1.norm(), 0.0);
        assert!(hermitian_split(&dmatrix![0.0, 1.0; 0.0, 0.0]).is_err());
    }

    #[test]
    fn split_is_idempotent() {
        let mut rng = seed::rng(4);
        let b = hermitian_random(5, &mut rng);
        let s = hermitian_split(&b).unwrap();
        let again = hermitian_split(&s.b1).unwrap();
        assert!((&again.b1 - &s.b1).norm() <= 1e-10 * s.b1.norm());
        assert!(again.b2.norm() <= 1e-10 * s.b1.norm());
    }

    #[test]
    fn embedding_of_j() {
        let lambda = dmatrix![c(0.0, 1.0)];
        let a = real_embedding(&lambda);
        assert_eq!(a, dmatrix![0.0, -1.0; 1.0, 0.0]);
        assert_eq!(&a * a.transpose(), Matrix::<f64>::identity(2, 2));
        assert!(check_complex_embedding(&lambda, 0).unwrap().passed);
    }

    #[test]
    fn embedding_of_real_matrix_is_block_diagonal() {
        let lambda = dmatrix![c(1.0, 0.0), c(2.0, 0.0); c(0.5, 0.0), c(-1.0, 0.0)];
        let a = real_embedding(&lambda);
        assert_eq!(a.view((0, 2), (2, 2)).norm(), 0.0);
        assert_eq!(a.view((2, 0), (2, 2)).norm(), 0.0);
        let r = check_complex_embedding(&lambda, 3).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn circle_net_size() {
        let net = epsilon_net(2, 0.25).unwrap();
        assert!(net.len() <= 81, "{}", net.len());
        assert!(net.len() >= 13);
        let (r, check) = check_epsilon_net_bound(&Matrix::identity(2, 2), 0.25).unwrap();
        assert!(r.passed);
        assert!(check.net_bound >= 1.0 && check.net_bound <= 2.0);
        assert!(epsilon_net(9, 0.25).is_err());
        assert!(epsilon_net(2, 0.5).is_err());
    }

    #[test]
    fn net_bound_on_random_matrices() {
        let mut rng = seed::rng(12);
        for _ in 0..5 {
            let a = random_matrix::<f64>(3, 3, &mut rng);
            let (r, c) = check_epsilon_net_bound(&a, 0.25).unwrap();
            assert!(r.passed, "{c:?}");
        }
    }

    #[test]
    fn battery_passes_and_filters() {
        let reports = run_battery(1, 40, None).unwrap();
        assert_eq!(reports.len(), BATTERY.len());
        for r in &reports {
            assert!(r.passed, "{r:?}");
            assert_eq!(r.instances, 40);
        }
        let only = run_battery(1, 10, Some(HERMITIAN_SPLIT)).unwrap();
        assert_eq!(only.len(), 1);
        assert!(run_battery(1, 10, Some("nope")).is_err());
    }

    #[test]
    fn degenerate_rademacher_quadratic_form() {
        let b = Matrix::<Complex64>::identity(10, 10);
        let r = check_hanson_wright_empirical(Distribution::Rademacher, &b, false, 1000, Some(&[0.5, 1.0, 2.0]), 0, 1)
            .unwrap();
        assert_eq!(r.mean, c(10.0, 0.0));
        assert!(r.points.is_empty());
        assert_eq!(r.dropped.len(), 3);
        assert!(r.r_squared.is_nan());
    }

    #[test]
    fn toeplitz_quadratic_form_mean() {
        let b = CorrelationPattern::toeplitz(c(0.5, 0.0), 50).unwrap().materialize_complex();
        let r = check_hanson_wright_empirical(Distribution::Gaussian, &b, false, 20_000, None, 5, 2).unwrap();
        assert!(r.mean_within(5.0), "{r:?}");
        assert!(r.points.len() >= 10);
        assert!(r.slope > 0.0);
    }
}
