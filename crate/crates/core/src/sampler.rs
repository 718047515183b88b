//! Gibbs sampler with Metropolis-Hastings sub-steps for the truncated
//! Dirichlet-process regression mixture under multiple elastic-net priors.
//!
//! One sweep updates, in order: sample assignments, sticks, concentration,
//! coefficients, scale latents, noise variances, elastic-net indicators,
//! elastic-net weights and the penalty pairs. Conjugate blocks are drawn
//! exactly; `τ` uses an independence proposal from its prior; `σ²` and the
//! penalties use log-scale random walks against the full joint density.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::dot;
use crate::model::{group_rows, init_state, stick_breaking_unchecked, ChainState, Dataset, Hyperparameters, ModelError, PosteriorChain};
use crate::prior;
use crate::rngdist::{
    ln_gamma_pdf, ln_inv_gamma_pdf, ln_normal_pdf, log_sum_exp, sample_beta, sample_dirichlet, sample_gamma,
    sample_log_categorical, sample_mvn_canonical, sample_trunc_inv_gamma_01_unchecked, DistError, RandomSource,
};

/// Acceptance rate the burn-in adaptation aims for.
pub const TARGET_ACCEPTANCE: f64 = 0.35;

#[derive(Debug, Error, Clone)]
pub enum SamplerError {
    #[error("numerical collapse in {stage}")]
    Collapse { stage: &'static str },
    #[error("numerical collapse in {stage} at iteration {iteration}")]
    NumericalCollapse {
        iteration: usize,
        stage: &'static str,
        last_good: Box<ChainState>,
    },
    #[error("dataset responses are probabilities; apply the logit transform before fitting")]
    NotFitReady,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Per-sweep monitoring record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepDiagnostics {
    pub iteration: usize,
    /// Mixture log-likelihood of all data after the sweep.
    pub loglik: f64,
    pub accept_lambda1: f64,
    pub accept_lambda2: f64,
    pub accept_sigma2: f64,
    pub accept_tau: f64,
    pub occupied_components: usize,
}

/// Which factors of the `σ²` full conditional are included. Both are on in
/// normal use; switching them off leaves the conjugate Inverse-Gamma case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sigma2Target {
    pub coefficient_prior: bool,
    pub scale_prior: bool,
}

impl Default for Sigma2Target {
    fn default() -> Self {
        Self { coefficient_prior: true, scale_prior: true }
    }
}

/// Random-walk scales, on the log scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    pub sigma2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl StepSizes {
    pub fn from_hyper(hyper: &Hyperparameters) -> Self {
        Self {
            sigma2: hyper.mh_step_sigma,
            lambda1: hyper.mh_step_lambda,
            lambda2: hyper.mh_step_lambda,
        }
    }

    fn adapt(&mut self, iteration: usize, acc: (f64, f64, f64)) {
        let gain = 1.0 / ((iteration + 1) as f64).powf(0.6);
        let nudge = |s: &mut f64, a: f64| {
            *s = (s.ln() + gain * (a - TARGET_ACCEPTANCE)).exp().clamp(1e-3, 10.0);
        };
        nudge(&mut self.sigma2, acc.0);
        nudge(&mut self.lambda1, acc.1);
        nudge(&mut self.lambda2, acc.2);
    }
}

/// Unnormalized log assignment weights `ln π_j + ln N(y | x·β_j, σ_j²)`.
pub fn assignment_log_weights(state: &ChainState, x: &[f64], y: f64) -> Vec<f64> {
    (0..state.n_components())
        .map(|j| state.weights[j].ln() + ln_normal_pdf(y, dot(x, state.beta.row(j)), state.sigma2[j]))
        .collect()
}

/// Mixture log-likelihood `Σᵢ ln Σⱼ πⱼ N(yᵢ | xᵢ·βⱼ, σⱼ²)`.
pub fn mixture_log_likelihood(state: &ChainState, data: &Dataset) -> f64 {
    (0..data.n())
        .map(|i| log_sum_exp(&assignment_log_weights(state, data.x().row(i), data.y()[i])))
        .sum()
}

pub fn update_z(state: &mut ChainState, data: &Dataset, src: &mut RandomSource) -> Result<(), SamplerError> {
    for i in 0..data.n() {
        let lw = assignment_log_weights(state, data.x().row(i), data.y()[i]);
        state.assignments[i] = sample_log_categorical(&lw, src).ok_or(SamplerError::Collapse { stage: "assignments" })?;
    }
    Ok(())
}

/// `u_j ~ Beta(1 + n_j, α + Σ_{l>j} n_l)`, then the weights are rebuilt.
pub fn update_sticks(state: &mut ChainState, src: &mut RandomSource) -> Result<(), SamplerError> {
    let counts = state.occupancy();
    let mut tail: usize = counts.iter().sum();
    for (u, &n_j) in state.sticks.iter_mut().zip(&counts) {
        tail -= n_j;
        *u = sample_beta(1.0 + n_j as f64, state.alpha + tail as f64, src)?;
    }
    state.weights = stick_breaking_unchecked(&state.sticks);
    Ok(())
}

/// `α ~ Gamma(e + J - 1, f - Σ ln(1 - u_l))`.
pub fn update_alpha(state: &mut ChainState, hyper: &Hyperparameters, src: &mut RandomSource) -> Result<(), SamplerError> {
    let shape = hyper.alpha_shape + state.sticks.len() as f64;
    let rate = hyper.alpha_rate - state.sticks.iter().map(|u| (-u).ln_1p()).sum::<f64>();
    state.alpha = sample_gamma(shape, rate, src)?;
    Ok(())
}

/// Precision matrix (row-major) and mean of the Gaussian full conditional of
/// `β_j` given the rows currently assigned to `j`.
pub fn beta_conditional(state: &ChainState, data: &Dataset, j: usize) -> Result<(Vec<f64>, Vec<f64>), SamplerError> {
    let rows: Vec<usize> = (0..data.n()).filter(|&i| state.assignments[i] == j).collect();
    let (precision, linear) = beta_canonical(state, data, j, &rows);
    let mean = crate::linalg::solve_spd(&precision, linear.len(), &linear)?;
    Ok((precision, mean))
}

fn beta_canonical(state: &ChainState, data: &Dataset, j: usize, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let p = data.p();
    let sigma2 = state.sigma2[j];
    let lambda2 = state.lambda2[state.net_of[j]];
    let mut precision = vec![0.0; p * p];
    let mut linear = vec![0.0; p];
    for &i in rows {
        let x = data.x().row(i);
        let y = data.y()[i];
        for a in 0..p {
            linear[a] += x[a] * y;
            for b in a..p {
                precision[a * p + b] += x[a] * x[b];
            }
        }
    }
    for a in 0..p {
        precision[a * p + a] += lambda2 / (1.0 - state.tau.get(j, a));
        for b in a..p {
            precision[a * p + b] /= sigma2;
            precision[b * p + a] = precision[a * p + b];
        }
        linear[a] /= sigma2;
    }
    (precision, linear)
}

/// Draw every `β_j` from its Gaussian full conditional. Empty components fall
/// back to the prior automatically since their data terms vanish.
pub fn update_beta(state: &mut ChainState, data: &Dataset, src: &mut RandomSource) -> Result<(), SamplerError> {
    let groups = group_rows(&state.assignments, state.n_components());
    for (j, rows) in groups.iter().enumerate() {
        let (precision, linear) = beta_canonical(state, data, j, rows);
        let draw = sample_mvn_canonical(&precision, &linear, src)?;
        state.beta.row_mut(j).copy_from_slice(&draw);
    }
    Ok(())
}

/// Independence Metropolis-Hastings for each `τ_jl`, proposing from its
/// truncated inverse-Gamma prior. Returns the acceptance rate.
pub fn update_tau(state: &mut ChainState, src: &mut RandomSource) -> f64 {
    let (j_max, p) = (state.n_components(), state.n_features());
    let mut accepted = 0usize;
    for j in 0..j_max {
        let net = state.net_of[j];
        let (l1, l2, s2) = (state.lambda1[net], state.lambda2[net], state.sigma2[j]);
        let rate = prior::tau_rate(l1, l2, s2);
        for l in 0..p {
            let b = state.beta.get(j, l);
            let log_lik = |t: f64| -0.5 * (1.0 - t).ln() - l2 * b * b / (2.0 * s2 * (1.0 - t));
            let current = state.tau.get(j, l);
            let proposal = sample_trunc_inv_gamma_01_unchecked(0.5, rate, src);
            if src.uniform().ln() < log_lik(proposal) - log_lik(current) {
                state.tau.set(j, l, proposal);
                accepted += 1;
            }
        }
    }
    accepted as f64 / (j_max * p).max(1) as f64
}

/// Log full conditional of `σ_j²` up to a constant.
fn sigma2_log_target(
    state: &ChainState,
    hyper: &Hyperparameters,
    j: usize,
    n_j: usize,
    rss: f64,
    s2: f64,
    target: Sigma2Target,
) -> f64 {
    let net = state.net_of[j];
    let mut v = ln_inv_gamma_pdf(s2, hyper.sigma2_shape, hyper.sigma2_rate) - 0.5 * n_j as f64 * s2.ln() - 0.5 * rss / s2;
    if target.coefficient_prior || target.scale_prior {
        v += prior::ln_row_parts(
            state.beta.row(j),
            state.tau.row(j),
            s2,
            state.lambda1[net],
            state.lambda2[net],
            target.coefficient_prior,
            target.scale_prior,
        );
    }
    v
}

/// Log-scale random walk on each `σ_j²`. Returns the acceptance rate.
pub fn update_sigma2(
    state: &mut ChainState,
    data: &Dataset,
    hyper: &Hyperparameters,
    step: f64,
    target: Sigma2Target,
    src: &mut RandomSource,
) -> f64 {
    let j_max = state.n_components();
    let mut rss = vec![0.0; j_max];
    let mut counts = vec![0usize; j_max];
    for i in 0..data.n() {
        let j = state.assignments[i];
        let r = data.y()[i] - dot(data.x().row(i), state.beta.row(j));
        rss[j] += r * r;
        counts[j] += 1;
    }
    let mut accepted = 0usize;
    for j in 0..j_max {
        let current = state.sigma2[j];
        let proposal = current * (step * src.standard_normal()).exp();
        // the ln σ² Jacobian enters both terms
        let lp_new = sigma2_log_target(state, hyper, j, counts[j], rss[j], proposal, target) + proposal.ln();
        let lp_old = sigma2_log_target(state, hyper, j, counts[j], rss[j], current, target) + current.ln();
        if proposal.is_finite() && proposal > 0.0 && src.uniform().ln() < lp_new - lp_old {
            state.sigma2[j] = proposal;
            accepted += 1;
        }
    }
    accepted as f64 / j_max as f64
}

/// Unnormalized log weights of the elastic-net indicator of component `j`.
pub fn net_log_weights(state: &ChainState, j: usize) -> Vec<f64> {
    (0..state.n_nets())
        .map(|k| {
            state.net_weights[k].ln()
                + prior::ln_row_density(state.beta.row(j), state.tau.row(j), state.sigma2[j], state.lambda1[k], state.lambda2[k])
        })
        .collect()
}

pub fn update_c(state: &mut ChainState, src: &mut RandomSource) -> Result<(), SamplerError> {
    for j in 0..state.n_components() {
        let lw = net_log_weights(state, j);
        state.net_of[j] = sample_log_categorical(&lw, src).ok_or(SamplerError::Collapse { stage: "elastic-net indicators" })?;
    }
    Ok(())
}

/// `w ~ Dirichlet(1/K + m_1, …, 1/K + m_K)`.
pub fn update_w(state: &mut ChainState, src: &mut RandomSource) -> Result<(), SamplerError> {
    let k = state.n_nets();
    if k == 1 {
        state.net_weights = vec![1.0];
        return Ok(());
    }
    let mut conc = vec![1.0 / k as f64; k];
    for &c in &state.net_of {
        conc[c] += 1.0;
    }
    state.net_weights = sample_dirichlet(&conc, src)?;
    Ok(())
}

fn lambda_log_target(state: &ChainState, hyper: &Hyperparameters, k: usize, l1: f64, l2: f64) -> f64 {
    let rate = hyper.lambda_rate();
    let mut v = ln_gamma_pdf(l1, hyper.lambda1_shape, rate) + ln_gamma_pdf(l2, hyper.lambda2_shape, rate);
    for j in 0..state.n_components() {
        if state.net_of[j] == k {
            v += prior::ln_row_density(state.beta.row(j), state.tau.row(j), state.sigma2[j], l1, l2);
        }
    }
    v
}

/// Log-scale random walks on `λ₁ₖ` then `λ₂ₖ` for every elastic-net state.
/// Returns the two acceptance rates.
pub fn update_lambdas(
    state: &mut ChainState,
    hyper: &Hyperparameters,
    steps: (f64, f64),
    src: &mut RandomSource,
) -> (f64, f64) {
    let k_max = state.n_nets();
    let (mut acc1, mut acc2) = (0usize, 0usize);
    for k in 0..k_max {
        let (l1, l2) = (state.lambda1[k], state.lambda2[k]);
        let prop = l1 * (steps.0 * src.standard_normal()).exp();
        let delta = lambda_log_target(state, hyper, k, prop, l2) + prop.ln() - lambda_log_target(state, hyper, k, l1, l2) - l1.ln();
        if prop > 0.0 && prop.is_finite() && src.uniform().ln() < delta {
            state.lambda1[k] = prop;
            acc1 += 1;
        }
        let l1 = state.lambda1[k];
        let prop = l2 * (steps.1 * src.standard_normal()).exp();
        let delta = lambda_log_target(state, hyper, k, l1, prop) + prop.ln() - lambda_log_target(state, hyper, k, l1, l2) - l2.ln();
        if prop > 0.0 && prop.is_finite() && src.uniform().ln() < delta {
            state.lambda2[k] = prop;
            acc2 += 1;
        }
    }
    (acc1 as f64 / k_max as f64, acc2 as f64 / k_max as f64)
}

/// Runs sweeps over a fixed dataset.
pub struct Sampler<'a> {
    data: &'a Dataset,
    hyper: &'a Hyperparameters,
    pub steps: StepSizes,
    pub sigma2_target: Sigma2Target,
    src: RandomSource,
}

impl<'a> Sampler<'a> {
    pub fn new(data: &'a Dataset, hyper: &'a Hyperparameters, src: RandomSource) -> Self {
        Self {
            data,
            hyper,
            steps: StepSizes::from_hyper(hyper),
            sigma2_target: Sigma2Target::default(),
            src,
        }
    }

    pub fn source(&mut self) -> &mut RandomSource {
        &mut self.src
    }

    /// One full sweep. On failure the state may be partially updated.
    pub fn sweep(&mut self, state: &mut ChainState, iteration: usize) -> Result<SweepDiagnostics, SamplerError> {
        let src = &mut self.src;
        update_z(state, self.data, src)?;
        update_sticks(state, src)?;
        update_alpha(state, self.hyper, src)?;
        update_beta(state, self.data, src)?;
        let accept_tau = update_tau(state, src);
        let accept_sigma2 = update_sigma2(state, self.data, self.hyper, self.steps.sigma2, self.sigma2_target, src);
        update_c(state, src)?;
        update_w(state, src)?;
        let (accept_lambda1, accept_lambda2) = update_lambdas(state, self.hyper, (self.steps.lambda1, self.steps.lambda2), src);
        let loglik = mixture_log_likelihood(state, self.data);
        if !loglik.is_finite() {
            return Err(SamplerError::Collapse { stage: "likelihood" });
        }
        Ok(SweepDiagnostics {
            iteration,
            loglik,
            accept_lambda1,
            accept_lambda2,
            accept_sigma2,
            accept_tau,
            occupied_components: state.occupancy().iter().filter(|&&c| c > 0).count(),
        })
    }
}

/// Run one chain from a fresh seed; returns the retained draws and every
/// sweep's diagnostics.
pub fn run_chain(data: &Dataset, hyper: &Hyperparameters, seed: u64) -> Result<(PosteriorChain, Vec<SweepDiagnostics>), SamplerError> {
    let mut diags = Vec::with_capacity(hyper.n_iter);
    let chain = run_chain_with(data, hyper, RandomSource::new(seed), |d| diags.push(d.clone()))?;
    Ok((chain, diags))
}

/// Run one chain on the given stream, handing each sweep's diagnostics to
/// `observer` in iteration order.
pub fn run_chain_with(
    data: &Dataset,
    hyper: &Hyperparameters,
    mut src: RandomSource,
    mut observer: impl FnMut(&SweepDiagnostics),
) -> Result<PosteriorChain, SamplerError> {
    if !data.is_fit_ready() {
        return Err(SamplerError::NotFitReady);
    }
    hyper.validate()?;
    let seed = src.seed();
    let mut state = init_state(data, hyper, &mut src)?;
    let mut sampler = Sampler::new(data, hyper, src);
    let mut draws = Vec::with_capacity(hyper.retained_draws());
    for it in 0..hyper.n_iter {
        let last_good = state.clone();
        let diag = sampler.sweep(&mut state, it).map_err(|e| match e {
            SamplerError::Collapse { stage } => SamplerError::NumericalCollapse {
                iteration: it,
                stage,
                last_good: Box::new(last_good),
            },
            other => other,
        })?;
        if hyper.adapt_steps && it < hyper.burn_in {
            sampler.steps.adapt(it, (diag.accept_sigma2, diag.accept_lambda1, diag.accept_lambda2));
        }
        observer(&diag);
        if it >= hyper.burn_in && (it - hyper.burn_in + 1).is_multiple_of(hyper.thin) {
            draws.push(state.clone());
        }
    }
    Ok(PosteriorChain {
        draws,
        hyper: hyper.clone(),
        relabeled: false,
        seed,
        class_id: data.class_id().to_string(),
        n_samples: data.n(),
        n_features: data.p(),
        n_chains: 1,
    })
}
