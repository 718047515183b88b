//! The multiple elastic-net prior in its scale-mixture form.
//!
//! Given the penalty pair `(λ₁, λ₂)` of its elastic-net state and the noise
//! variance `σ²` of its component, each coefficient carries a latent
//! `τ ∈ (0, 1)` with
//!
//! ```text
//! β | τ  ~ N(0, σ² (1 - τ) / λ₂)
//! τ      ~ Inv-Gamma(1/2, λ₁² / (8 σ² λ₂)) restricted to (0, 1)
//! ```
//!
//! Integrating τ out gives the orthant-normal elastic-net density
//! `∝ exp(-(λ₂ β² + λ₁ |β|) / (2σ²))`.

use crate::rngdist::{ln_normal_pdf, normal_logcdf, sample_trunc_inv_gamma_01_unchecked, RandomSource};

const LN_2: f64 = std::f64::consts::LN_2;
const HALF_LN_PI: f64 = 0.572_364_942_924_700_1;

/// Rate of the truncated inverse-Gamma prior on τ.
pub fn tau_rate(lambda1: f64, lambda2: f64, sigma2: f64) -> f64 {
    lambda1 * lambda1 / (8.0 * sigma2 * lambda2)
}

/// `ln P(τ < 1)` under the untruncated Inv-Gamma(1/2, rate), i.e. `ln 2Φ(-√(2 rate))`.
fn ln_truncation_mass(rate: f64) -> f64 {
    LN_2 + normal_logcdf(-(2.0 * rate).sqrt())
}

/// Joint log density of one coefficient and its latent scale.
pub fn ln_coord_density(beta: f64, tau: f64, sigma2: f64, lambda1: f64, lambda2: f64) -> f64 {
    let rate = tau_rate(lambda1, lambda2, sigma2);
    ln_normal_pdf(beta, 0.0, sigma2 * (1.0 - tau) / lambda2) + 0.5 * rate.ln() - HALF_LN_PI - 1.5 * tau.ln()
        - rate / tau
        - ln_truncation_mass(rate)
}

/// Joint log density of a coefficient row and its latent scales.
pub fn ln_row_density(beta: &[f64], tau: &[f64], sigma2: f64, lambda1: f64, lambda2: f64) -> f64 {
    ln_row_parts(beta, tau, sigma2, lambda1, lambda2, true, true)
}

/// Row density with the Gaussian coefficient part and the τ part switchable.
pub(crate) fn ln_row_parts(
    beta: &[f64],
    tau: &[f64],
    sigma2: f64,
    lambda1: f64,
    lambda2: f64,
    with_beta: bool,
    with_tau: bool,
) -> f64 {
    let p = beta.len() as f64;
    let mut total = 0.0;
    if with_beta {
        let mut quad = 0.0;
        let mut log_det = 0.0;
        for (&b, &t) in beta.iter().zip(tau) {
            let one_minus = 1.0 - t;
            quad += b * b / one_minus;
            log_det += one_minus.ln();
        }
        let var = sigma2 / lambda2;
        total += -0.5 * p * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * log_det - 0.5 * quad / var;
    }
    if with_tau {
        let rate = tau_rate(lambda1, lambda2, sigma2);
        let mut acc = 0.0;
        for &t in tau {
            acc += -1.5 * t.ln() - rate / t;
        }
        total += p * (0.5 * rate.ln() - HALF_LN_PI - ln_truncation_mass(rate)) + acc;
    }
    total
}

/// Draw `(τ, β)` for one component from the prior.
pub fn draw_tau_beta(lambda1: f64, lambda2: f64, sigma2: f64, p: usize, src: &mut RandomSource) -> (Vec<f64>, Vec<f64>) {
    let rate = tau_rate(lambda1, lambda2, sigma2);
    let tau: Vec<f64> = (0..p).map(|_| sample_trunc_inv_gamma_01_unchecked(0.5, rate, src)).collect();
    let beta = tau
        .iter()
        .map(|t| (sigma2 * (1.0 - t) / lambda2).sqrt() * src.standard_normal())
        .collect();
    (tau, beta)
}
