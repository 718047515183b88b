//! Seeded random streams and the handful of distributions the hierarchy needs.
//!
//! Every sampler takes a [`RandomSource`], a ChaCha20 generator keyed by
//! `(seed, stream)`. Two sources built from the same pair emit the same
//! sequence on every platform, and distinct stream ids give independent
//! sequences, which is what lets several chains run in parallel while staying
//! reproducible.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use thiserror::Error;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const LN_2: f64 = std::f64::consts::LN_2;

/// Smallest truncation mass `P(τ < 1)` that [`sample_trunc_inv_gamma_01`] accepts.
pub const MIN_TRUNCATION_MASS: f64 = 1e-300;

/// Above this truncation mass the truncated inverse-Gamma is drawn by
/// rejection from the untruncated law instead of by inverting the CDF.
const REJECTION_MASS: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("truncated inverse-gamma on (0,1) has numerically zero mass (log mass {log_mass:.3})")]
    DegenerateTruncation { log_mass: f64 },
    #[error("matrix is not positive definite: leading minor {minor} failed")]
    NotPositiveDefinite { minor: usize },
    #[error("matrix is not symmetric: |A[{row},{col}] - A[{col},{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },
}

/// A reproducible stream of random bits.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    stream: u64,
    rng: ChaCha20Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    /// Independent stream sharing this source's seed.
    pub fn split(&self, stream: u64) -> Self {
        Self::with_stream(self.seed, stream)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform draw on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.random();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Uniform draw on [lo, hi].
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn check_positive(name: &str, value: f64) -> Result<(), DistError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(DistError::Domain(format!("{name} must be positive and finite, got {value}")))
    }
}

/// Draw from Gamma(shape, rate), mean `shape / rate`.
pub fn sample_gamma(shape: f64, rate: f64, src: &mut RandomSource) -> Result<f64, DistError> {
    check_positive("shape", shape)?;
    check_positive("rate", rate)?;
    Ok(ln_gamma_unit(shape, src).exp() / rate)
}

/// Logarithm of a Gamma(shape, 1) draw. Small shapes go through the
/// `G(a) = G(a + 1) U^{1/a}` identity so the draw never underflows.
fn ln_gamma_unit(shape: f64, src: &mut RandomSource) -> f64 {
    if shape < 1.0 {
        let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("valid shape").sample(src);
        g.ln() + src.uniform().ln() / shape
    } else {
        let g: f64 = Gamma::new(shape, 1.0).expect("valid shape").sample(src);
        g.ln()
    }
}

/// Draw `X` with `1/X ~ Gamma(a, b)`.
pub fn sample_inv_gamma(a: f64, b: f64, src: &mut RandomSource) -> Result<f64, DistError> {
    check_positive("a", a)?;
    check_positive("b", b)?;
    let x = (b.ln() - ln_gamma_unit(a, src)).exp();
    Ok(x.clamp(f64::MIN_POSITIVE, f64::MAX))
}

/// Inverse-Gamma(a, b) conditioned on the open interval (0, 1).
///
/// Fails when `P(X < 1)` drops below [`MIN_TRUNCATION_MASS`].
pub fn sample_trunc_inv_gamma_01(a: f64, b: f64, src: &mut RandomSource) -> Result<f64, DistError> {
    check_positive("a", a)?;
    check_positive("b", b)?;
    let log_mass = ln_gamma_q(a, b);
    if log_mass < MIN_TRUNCATION_MASS.ln() {
        return Err(DistError::DegenerateTruncation { log_mass });
    }
    Ok(trunc_inv_gamma_draw(a, b, log_mass, src))
}

/// Same law as [`sample_trunc_inv_gamma_01`] without the mass floor. The
/// inverse CDF runs entirely in log space, so it stays exact far past the
/// point where the truncation mass underflows.
pub(crate) fn sample_trunc_inv_gamma_01_unchecked(a: f64, b: f64, src: &mut RandomSource) -> f64 {
    trunc_inv_gamma_draw(a, b, ln_gamma_q(a, b), src)
}

fn trunc_inv_gamma_draw(a: f64, b: f64, log_mass: f64, src: &mut RandomSource) -> f64 {
    // X < 1 with 1/X ~ Gamma(a, b)  <=>  G = b/X ~ Gamma(a, 1) with G > b.
    let g = if log_mass > REJECTION_MASS.ln() {
        loop {
            let g = ln_gamma_unit(a, src).exp();
            if g > b {
                break g;
            }
        }
    } else {
        let target = src.uniform().ln() + log_mass;
        invert_upper_gamma_tail(a, b, target)
    };
    let tau = b / g;
    tau.clamp(f64::MIN_POSITIVE, 1.0f64.next_down())
}

/// Solve `ln Q(a, x) = target` for `x >= lo`, where `ln Q(a, lo) >= target`.
fn invert_upper_gamma_tail(a: f64, lo: f64, target: f64) -> f64 {
    let ln_gamma_a = ln_gamma(a);
    let f = |x: f64| ln_gamma_q(a, x) - target;

    let mut left = lo;
    let mut step = (lo - target).abs().max(1.0);
    let mut right = lo + step;
    while f(right) > 0.0 {
        left = right;
        step *= 2.0;
        right = lo + step;
    }

    // The tail decays like exp(-x), so x ≈ lo + (ln Q(a, lo) - target) is a good start.
    let mut x = (lo + (ln_gamma_q(a, lo) - target)).clamp(left, right);
    for _ in 0..200 {
        let lq = ln_gamma_q(a, x);
        let fx = lq - target;
        if fx > 0.0 {
            left = x;
        } else {
            right = x;
        }
        // d/dx ln Q = -x^{a-1} e^{-x} / (Γ(a) Q)
        let slope = -((a - 1.0) * x.ln() - x - ln_gamma_a - lq).exp();
        let mut next = x - fx / slope;
        if !(next > left && next < right) || !next.is_finite() {
            next = 0.5 * (left + right);
        }
        if (next - x).abs() <= 1e-14 * x.max(1.0) || right - left <= 1e-14 * right {
            x = next;
            break;
        }
        x = next;
    }
    x.max(lo.next_up())
}

/// Beta(a, b) draw, kept strictly inside (0, 1).
pub fn sample_beta(a: f64, b: f64, src: &mut RandomSource) -> Result<f64, DistError> {
    check_positive("a", a)?;
    check_positive("b", b)?;
    let lx = ln_gamma_unit(a, src);
    let ly = ln_gamma_unit(b, src);
    let m = lx.max(ly);
    let x = (lx - m).exp() / ((lx - m).exp() + (ly - m).exp());
    Ok(x.clamp(f64::MIN_POSITIVE, 1.0f64.next_down()))
}

/// Dirichlet draw; requires at least two positive concentrations.
pub fn sample_dirichlet(concentration: &[f64], src: &mut RandomSource) -> Result<Vec<f64>, DistError> {
    if concentration.len() < 2 {
        return Err(DistError::Domain(format!(
            "dirichlet needs at least 2 concentrations, got {}",
            concentration.len()
        )));
    }
    for &c in concentration {
        check_positive("concentration", c)?;
    }
    let logs: Vec<f64> = concentration.iter().map(|&c| ln_gamma_unit(c, src)).collect();
    let norm = log_sum_exp(&logs);
    Ok(logs.iter().map(|l| (l - norm).exp()).collect())
}

/// Gaussian draw with the given mean and covariance `precision⁻¹`.
///
/// `precision` is row-major `p × p`.
pub fn sample_mvn_precision(mean: &[f64], precision: &[f64], src: &mut RandomSource) -> Result<Vec<f64>, DistError> {
    let p = mean.len();
    if precision.len() != p * p {
        return Err(DistError::Domain(format!(
            "precision has {} entries, expected {}",
            precision.len(),
            p * p
        )));
    }
    for r in 0..p {
        for c in (r + 1)..p {
            let gap = (precision[r * p + c] - precision[c * p + r]).abs();
            if gap > 1e-10 {
                return Err(DistError::NotSymmetric { row: r, col: c, gap });
            }
        }
    }
    let chol = crate::linalg::cholesky(precision, p)?;
    let noise: Vec<f64> = (0..p).map(|_| src.standard_normal()).collect();
    // L Lᵀ = P, so v = L⁻ᵀ ε has covariance P⁻¹.
    let offset = crate::linalg::solve_upper_from_lower(&chol, p, &noise);
    Ok(mean.iter().zip(&offset).map(|(m, o)| m + o).collect())
}

/// Gaussian draw in canonical form: precision `P` and linear term `h`, so the
/// mean is `P⁻¹ h`. One factorization serves both the mean and the noise.
pub(crate) fn sample_mvn_canonical(
    precision: &[f64],
    linear: &[f64],
    src: &mut RandomSource,
) -> Result<Vec<f64>, DistError> {
    let p = linear.len();
    let chol = crate::linalg::cholesky(precision, p)?;
    let half = crate::linalg::solve_lower(&chol, p, linear);
    let noise: Vec<f64> = (0..p).map(|_| src.standard_normal()).collect();
    let shifted: Vec<f64> = half.iter().zip(&noise).map(|(a, b)| a + b).collect();
    Ok(crate::linalg::solve_upper_from_lower(&chol, p, &shifted))
}

/// Draw an index from unnormalized log weights.
pub fn sample_log_categorical(log_weights: &[f64], src: &mut RandomSource) -> Option<usize> {
    let norm = log_sum_exp(log_weights);
    if !norm.is_finite() {
        return None;
    }
    let u = src.uniform();
    let mut acc = 0.0;
    let mut last = None;
    for (i, &lw) in log_weights.iter().enumerate() {
        if lw == f64::NEG_INFINITY {
            continue;
        }
        acc += (lw - norm).exp();
        last = Some(i);
        if u <= acc {
            return Some(i);
        }
    }
    last
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `ln Φ(x)`, finite far into the lower tail.
pub fn normal_logcdf(x: f64) -> f64 {
    if x > 0.0 {
        (-0.5 * libm::erfc(x / std::f64::consts::SQRT_2)).ln_1p()
    } else if x > -36.0 {
        (0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)).ln()
    } else {
        // Mills-ratio expansion: Φ(x) = φ(x)/|x| · (1 - 1/x² + 3/x⁴ - 15/x⁶ + ...)
        let x2 = x * x;
        let inv = 1.0 / x2;
        let series = 1.0 - inv * (1.0 - 3.0 * inv * (1.0 - 5.0 * inv * (1.0 - 7.0 * inv * (1.0 - 9.0 * inv))));
        -0.5 * x2 - (-x).ln() - LN_SQRT_2PI + series.ln()
    }
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}

/// Log of the upper regularized incomplete gamma function `Q(a, x)`.
pub fn ln_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let ln_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // P(a, x) by its power series.
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut n = a;
        for _ in 0..10_000 {
            n += 1.0;
            term *= x / n;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        let p = (ln_prefix + sum.ln()).exp();
        (-p).ln_1p()
    } else {
        // Q(a, x) by its continued fraction, modified Lentz.
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        ln_prefix + h.ln()
    }
}

pub fn ln_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let r = x - mean;
    -LN_SQRT_2PI - 0.5 * var.ln() - 0.5 * r * r / var
}

/// Log density of Gamma(shape, rate).
pub fn ln_gamma_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Log density of Inverse-Gamma(a, b).
pub fn ln_inv_gamma_pdf(x: f64, a: f64, b: f64) -> f64 {
    a * b.ln() - ln_gamma(a) - (a + 1.0) * x.ln() - b / x
}

/// Log density of Inverse-Gamma(1/2, rate) restricted to (0, 1).
///
/// The normalizer `Q(1/2, rate) = 2 Φ(-√(2 rate))` goes through the log-CDF
/// so the density stays finite when the truncation mass underflows.
pub fn ln_trunc_inv_gamma_half_pdf(tau: f64, rate: f64) -> f64 {
    let ln_mass = LN_2 + normal_logcdf(-(2.0 * rate).sqrt());
    0.5 * rate.ln() - 0.5 * std::f64::consts::PI.ln() - 1.5 * tau.ln() - rate / tau - ln_mass
}
