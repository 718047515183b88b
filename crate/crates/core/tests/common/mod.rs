//! Test-side oracles, written independently of the library: a data
//! generator on its own RNG family, least squares through nalgebra, a
//! coordinate-descent lasso, and Kolmogorov-Smirnov utilities.

#![allow(dead_code)]

use dpmen::model::{Dataset, ResponseKind};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub struct Generated {
    pub rows: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    /// Generating regime of each row.
    pub regime: Vec<usize>,
}

impl Generated {
    pub fn dataset(&self, class: &str) -> Dataset {
        Dataset::from_rows(&self.rows, self.y.clone(), class, ResponseKind::RawScore).unwrap()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Linear regimes selected per row by `pick(row_index, x)`, Gaussian inputs.
pub fn linear_regimes(
    seed: u64,
    n: usize,
    p: usize,
    betas: &[Vec<f64>],
    noise_sd: f64,
    pick: impl Fn(usize, &[f64]) -> usize,
) -> Generated {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut regime = Vec::with_capacity(n);
    for i in 0..n {
        let x: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let r = pick(i, &x);
        let e: f64 = rng.sample(StandardNormal);
        y.push(dot(&x, &betas[r]) + noise_sd * e);
        rows.push(x);
        regime.push(r);
    }
    Generated { rows, y, regime }
}

pub const MIXTURE_BETAS: [[f64; 5]; 2] = [[1.0, -2.0, 0.5, 0.0, 1.5], [-1.5, 0.5, 2.0, -1.0, 0.0]];

/// n = 1000, p = 5, two equally weighted linear components, σ = 0.1.
pub fn two_component(seed: u64) -> Generated {
    let betas: Vec<Vec<f64>> = MIXTURE_BETAS.iter().map(|b| b.to_vec()).collect();
    linear_regimes(seed, 1000, 5, &betas, 0.1, |i, _| i % 2)
}

pub const PIECEWISE_SUPPORTS: [[usize; 3]; 2] = [[1, 2, 3], [5, 6, 7]];

/// p = 8; the sign of x0 selects one of two regimes with disjoint supports.
pub fn piecewise(seed: u64) -> Generated {
    let left = vec![0.0, 2.0, -1.5, 1.0, 0.0, 0.0, 0.0, 0.0];
    let right = vec![0.0, 0.0, 0.0, 0.0, 0.0, -2.0, 1.5, 1.0];
    linear_regimes(seed, 600, 8, &[left, right], 0.1, |_, x| usize::from(x[0] >= 0.0))
}

/// Single linear regime whose first two columns are identical.
pub fn duplicated_columns(seed: u64, n: usize) -> Generated {
    let beta = vec![1.0, 1.0, -1.5, 0.5, 0.0];
    let mut g = linear_regimes(seed, n, 5, std::slice::from_ref(&beta), 0.1, |_, _| 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD0_0D);
    for (row, y) in g.rows.iter_mut().zip(g.y.iter_mut()) {
        row[1] = row[0];
        let e: f64 = rng.sample(StandardNormal);
        *y = dot(row, &beta) + 0.1 * e;
    }
    g
}

/// Ordinary least squares, optionally with an intercept (returned last).
pub fn least_squares(rows: &[Vec<f64>], y: &[f64], intercept: bool) -> Vec<f64> {
    let p = rows[0].len() + usize::from(intercept);
    let x = DMatrix::from_fn(rows.len(), p, |i, j| if j < rows[i].len() { rows[i][j] } else { 1.0 });
    let yv = DVector::from_column_slice(y);
    let svd = x.svd(true, true);
    svd.solve(&yv, 1e-12).unwrap().iter().copied().collect()
}

pub fn ls_predict(coef: &[f64], x: &[f64]) -> f64 {
    let base = dot(&coef[..x.len()], x);
    if coef.len() > x.len() {
        base + coef[x.len()]
    } else {
        base
    }
}

/// Lasso `½‖y − Xb‖²/n + λ‖b‖₁` by cyclic coordinate descent.
pub fn lasso(rows: &[Vec<f64>], y: &[f64], lambda: f64, sweeps: usize) -> Vec<f64> {
    let n = rows.len() as f64;
    let p = rows[0].len();
    let mut b = vec![0.0; p];
    let mut resid: Vec<f64> = y.to_vec();
    let norms: Vec<f64> = (0..p).map(|j| rows.iter().map(|r| r[j] * r[j]).sum::<f64>() / n).collect();
    for _ in 0..sweeps {
        for j in 0..p {
            let rho = rows.iter().zip(&resid).map(|(r, e)| r[j] * (e + r[j] * b[j])).sum::<f64>() / n;
            let new = rho.signum() * (rho.abs() - lambda).max(0.0) / norms[j];
            let delta = new - b[j];
            if delta != 0.0 {
                for (r, e) in rows.iter().zip(resid.iter_mut()) {
                    *e -= r[j] * delta;
                }
                b[j] = new;
            }
        }
    }
    b
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> f64 {
    (pred.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / truth.len() as f64).sqrt()
}

/// One-sample KS statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS p-value with the usual small-sample correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1.0f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// CDF of Gamma(2, rate), closed form.
pub fn gamma2_cdf(x: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        1.0 - (-rate * x).exp() * (1.0 + rate * x)
    }
}

/// CDF of Inverse-Gamma(2, scale), closed form.
pub fn inv_gamma2_cdf(x: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        let t = scale / x;
        (-t).exp() * (1.0 + t)
    }
}

/// Composite Simpson rule on [a, b] with `m` panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    (0..m)
        .map(|i| {
            let x = a + i as f64 * h;
            h / 6.0 * (f(x) + 4.0 * f(x + 0.5 * h) + f(x + h))
        })
        .sum()
}
