//! Data, hyperparameters and the latent state of the regression mixture.
//!
//! Component and elastic-net indices are zero-based everywhere in this crate.

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{solve_spd, Matrix};
use crate::prior;
use crate::rngdist::{
    sample_beta, sample_dirichlet, sample_gamma, sample_inv_gamma, sample_log_categorical, DistError,
    RandomSource,
};

/// Clip applied to saturated probabilities before the logit.
pub const PROBABILITY_CLIP: f64 = 1e-6;

/// Ridge damping used by the least-squares initialization.
const INIT_RIDGE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid dataset: {0}")]
    Dataset(String),
    #[error("response {value} at row {row} is outside the open interval (0, 1)")]
    ResponseDomain { row: usize, value: f64 },
    #[error("invalid hyperparameters: {0}")]
    Hyperparameters(String),
    #[error("invalid chain state: {0}")]
    State(String),
    #[error(transparent)]
    Dist(#[from] DistError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    RawScore,
    Probability,
    LogitTransformed,
}

/// Samples of one target class together with the black-box responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Matrix,
    y: Vec<f64>,
    class_id: String,
    response_kind: ResponseKind,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(
        x: Matrix,
        y: Vec<f64>,
        class_id: impl Into<String>,
        response_kind: ResponseKind,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self, ModelError> {
        if x.rows() == 0 || x.cols() == 0 {
            return Err(ModelError::Dataset(format!("need n >= 1 and p >= 1, got {}x{}", x.rows(), x.cols())));
        }
        if y.len() != x.rows() {
            return Err(ModelError::Dataset(format!("{} responses for {} samples", y.len(), x.rows())));
        }
        if let Some(i) = x.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(ModelError::Dataset(format!(
                "non-finite feature at row {}, column {}",
                i / x.cols(),
                i % x.cols()
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::Dataset(format!("non-finite response at row {i}")));
        }
        if response_kind == ResponseKind::Probability {
            if let Some(i) = y.iter().position(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(ModelError::ResponseDomain { row: i, value: y[i] });
            }
        }
        if let Some(names) = &feature_names {
            if names.len() != x.cols() {
                return Err(ModelError::Dataset(format!("{} feature names for {} features", names.len(), x.cols())));
            }
        }
        Ok(Self { x, y, class_id: class_id.into(), response_kind, feature_names })
    }

    /// Convenience constructor from nested rows.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>, class_id: impl Into<String>, kind: ResponseKind) -> Result<Self, ModelError> {
        let x = Matrix::from_rows(rows).ok_or_else(|| ModelError::Dataset("ragged feature rows".into()))?;
        Self::new(x, y, class_id, kind, None)
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn class_id(&self) -> &str {
        &self.class_id
    }

    pub fn response_kind(&self) -> ResponseKind {
        self.response_kind
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn is_fit_ready(&self) -> bool {
        self.response_kind != ResponseKind::Probability
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self, ModelError> {
        if names.len() != self.p() {
            return Err(ModelError::Dataset(format!("{} feature names for {} features", names.len(), self.p())));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub(crate) fn with_parts(&self, x: Matrix, y: Vec<f64>, kind: ResponseKind) -> Self {
        Self {
            x,
            y,
            class_id: self.class_id.clone(),
            response_kind: kind,
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Map probability responses to the real line with `ln(y / (1 - y))`.
///
/// Every response must lie strictly inside (0, 1).
pub fn logit_transform(data: &Dataset) -> Result<Dataset, ModelError> {
    if data.response_kind != ResponseKind::Probability {
        return Err(ModelError::Dataset(format!(
            "logit transform needs probability responses, got {:?}",
            data.response_kind
        )));
    }
    if let Some(i) = data.y.iter().position(|&v| !(v > 0.0 && v < 1.0)) {
        return Err(ModelError::ResponseDomain { row: i, value: data.y[i] });
    }
    let y = data.y.iter().map(|&v| logit(v)).collect();
    Ok(data.with_parts(data.x.clone(), y, ResponseKind::LogitTransformed))
}

/// Like [`logit_transform`] but clips saturated probabilities (exactly 0 or 1)
/// to `[PROBABILITY_CLIP, 1 - PROBABILITY_CLIP]` first. Returns the number of
/// clipped rows.
pub fn logit_transform_clipped(data: &Dataset) -> Result<(Dataset, usize), ModelError> {
    if data.response_kind != ResponseKind::Probability {
        return logit_transform(data).map(|d| (d, 0));
    }
    let mut clipped = 0;
    let y: Vec<f64> = data
        .y
        .iter()
        .map(|&v| {
            let c = v.clamp(PROBABILITY_CLIP, 1.0 - PROBABILITY_CLIP);
            if c != v {
                clipped += 1;
            }
            c
        })
        .collect();
    if clipped > 0 {
        warn!("class {}: clipped {clipped} saturated probabilities before logit", data.class_id);
    }
    let tmp = data.with_parts(data.x.clone(), y, ResponseKind::Probability);
    Ok((logit_transform(&tmp)?, clipped))
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn inverse_logit(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Stick-breaking map from `J - 1` sticks to `J` mixture weights.
pub fn stick_breaking(u: &[f64]) -> Result<Vec<f64>, ModelError> {
    if let Some(&bad) = u.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
        return Err(DistError::Domain(format!("stick {bad} outside (0, 1)")).into());
    }
    Ok(stick_breaking_unchecked(u))
}

pub(crate) fn stick_breaking_unchecked(u: &[f64]) -> Vec<f64> {
    let mut pi = Vec::with_capacity(u.len() + 1);
    let mut remaining = 1.0;
    for &v in u {
        pi.push(v * remaining);
        remaining *= 1.0 - v;
    }
    let head: f64 = pi.iter().sum();
    pi.push((1.0 - head).max(0.0));
    pi
}

/// Sticks that reproduce the given weights under [`stick_breaking`].
pub fn inverse_stick_breaking(pi: &[f64]) -> Vec<f64> {
    let mut u = Vec::with_capacity(pi.len().saturating_sub(1));
    let mut consumed = 0.0;
    for &w in &pi[..pi.len().saturating_sub(1)] {
        let remaining = 1.0 - consumed;
        let v = if remaining > 0.0 { w / remaining } else { 0.5 };
        u.push(v.clamp(f64::MIN_POSITIVE, 1.0f64.next_down()));
        consumed += w;
    }
    u
}

/// How features are rescaled before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Standardize {
    None,
    /// Divide each column by its standard deviation.
    #[default]
    Scale,
    /// Subtract the column mean, divide by the standard deviation, and center
    /// the response.
    Center,
}

/// Per-feature affine map applied to inputs at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mode: Standardize,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    /// Columns with zero variance; left untouched.
    pub constant: Vec<bool>,
    pub response_offset: f64,
}

impl Standardization {
    pub fn identity(p: usize) -> Self {
        Self {
            mode: Standardize::None,
            center: vec![0.0; p],
            scale: vec![1.0; p],
            constant: vec![false; p],
            response_offset: 0.0,
        }
    }

    pub fn fit(data: &Dataset, mode: Standardize) -> Self {
        let (n, p) = (data.n(), data.p());
        let mut out = Self::identity(p);
        out.mode = mode;
        if mode == Standardize::None {
            return out;
        }
        for c in 0..p {
            let mean = (0..n).map(|r| data.x.get(r, c)).sum::<f64>() / n as f64;
            let var = (0..n).map(|r| (data.x.get(r, c) - mean).powi(2)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            if sd > 1e-12 * mean.abs().max(1.0) {
                out.scale[c] = sd;
                if mode == Standardize::Center {
                    out.center[c] = mean;
                }
            } else {
                out.constant[c] = true;
            }
        }
        if mode == Standardize::Center {
            out.response_offset = data.y.iter().sum::<f64>() / n as f64;
        }
        out
    }

    pub fn p(&self) -> usize {
        self.scale.len()
    }

    pub fn apply_row(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.center.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply(&self, data: &Dataset) -> Dataset {
        let rows: Vec<f64> = data.x.iter_rows().flat_map(|r| self.apply_row(r)).collect();
        let x = Matrix::from_row_major(data.n(), data.p(), rows);
        let y = data.y.iter().map(|v| v - self.response_offset).collect();
        data.with_parts(x, y, data.response_kind)
    }

    /// Coefficients on the original feature scale.
    pub fn destandardize(&self, beta: &[f64]) -> Vec<f64> {
        beta.iter().zip(&self.scale).map(|(b, s)| b / s).collect()
    }
}

/// Fixed constants of the hierarchy and the sampler schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    /// Number of mixture components kept by the truncated stick-breaking prior.
    pub truncation: usize,
    /// Number of elastic-net prior states shared across components.
    pub n_nets: usize,
    /// Inverse-Gamma shape and rate for each component's noise variance.
    pub sigma2_shape: f64,
    pub sigma2_rate: f64,
    /// Gamma shape and rate for the concentration parameter.
    pub alpha_shape: f64,
    pub alpha_rate: f64,
    /// Gamma shapes for the lasso and ridge penalties.
    pub lambda1_shape: f64,
    pub lambda2_shape: f64,
    /// Both penalty priors use rate `lambda_v / 2`.
    pub lambda_v: f64,
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Random-walk scales on the log scale.
    pub mh_step_lambda: f64,
    pub mh_step_sigma: f64,
    /// Robbins-Monro tuning of the random-walk scales during burn-in.
    pub adapt_steps: bool,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            truncation: 20,
            n_nets: 3,
            sigma2_shape: 2.0,
            sigma2_rate: 0.5,
            alpha_shape: 1.0,
            alpha_rate: 1.0,
            lambda1_shape: 1.0,
            lambda2_shape: 1.0,
            lambda_v: 1.0,
            n_iter: 4000,
            burn_in: 2000,
            thin: 1,
            mh_step_lambda: 0.25,
            mh_step_sigma: 0.25,
            adapt_steps: true,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: String| Err(ModelError::Hyperparameters(m));
        if self.truncation < 2 {
            return fail(format!("truncation must be >= 2, got {}", self.truncation));
        }
        if self.n_nets < 1 {
            return fail("n_nets must be >= 1".into());
        }
        if self.burn_in >= self.n_iter {
            return fail(format!("burn_in {} must be < n_iter {}", self.burn_in, self.n_iter));
        }
        if self.thin < 1 {
            return fail("thin must be >= 1".into());
        }
        let constants = [
            ("sigma2_shape", self.sigma2_shape),
            ("sigma2_rate", self.sigma2_rate),
            ("alpha_shape", self.alpha_shape),
            ("alpha_rate", self.alpha_rate),
            ("lambda1_shape", self.lambda1_shape),
            ("lambda2_shape", self.lambda2_shape),
            ("lambda_v", self.lambda_v),
            ("mh_step_lambda", self.mh_step_lambda),
            ("mh_step_sigma", self.mh_step_sigma),
        ];
        for (name, v) in constants {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    pub fn lambda_rate(&self) -> f64 {
        self.lambda_v / 2.0
    }

    /// Number of retained draws per chain.
    pub fn retained_draws(&self) -> usize {
        (self.n_iter - self.burn_in) / self.thin
    }
}

/// One joint assignment of every latent quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    /// Stick proportions, length `J - 1`.
    pub sticks: Vec<f64>,
    /// Mixture weights, length `J`.
    pub weights: Vec<f64>,
    /// Concentration of the stick-breaking prior.
    pub alpha: f64,
    /// Regression coefficients, `J × p`.
    pub beta: Matrix,
    /// Noise variance per component.
    pub sigma2: Vec<f64>,
    /// Scale-mixture latents in (0, 1), `J × p`.
    pub tau: Matrix,
    /// Component of each sample.
    pub assignments: Vec<usize>,
    /// Elastic-net state of each component.
    pub net_of: Vec<usize>,
    /// Elastic-net state weights, length `K`.
    pub net_weights: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
}

impl ChainState {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn n_nets(&self) -> usize {
        self.net_weights.len()
    }

    pub fn n_features(&self) -> usize {
        self.beta.cols()
    }

    pub fn n_samples(&self) -> usize {
        self.assignments.len()
    }

    /// Sample counts per component.
    pub fn occupancy(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_components()];
        for &z in &self.assignments {
            counts[z] += 1;
        }
        counts
    }

    /// Draw every latent from the prior. Assignments are drawn too.
    pub fn from_prior(hyper: &Hyperparameters, n: usize, p: usize, src: &mut RandomSource) -> Result<Self, ModelError> {
        let j = hyper.truncation;
        let k = hyper.n_nets;
        let alpha = sample_gamma(hyper.alpha_shape, hyper.alpha_rate, src)?;
        let sticks = (0..j - 1).map(|_| sample_beta(1.0, alpha, src)).collect::<Result<Vec<_>, _>>()?;
        let weights = stick_breaking_unchecked(&sticks);
        let log_pi: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
        let assignments = (0..n)
            .map(|_| sample_log_categorical(&log_pi, src).expect("stick weights sum to one"))
            .collect();
        let rate = hyper.lambda_rate();
        let lambda1 = (0..k).map(|_| sample_gamma(hyper.lambda1_shape, rate, src)).collect::<Result<Vec<_>, _>>()?;
        let lambda2 = (0..k).map(|_| sample_gamma(hyper.lambda2_shape, rate, src)).collect::<Result<Vec<_>, _>>()?;
        let net_weights = if k == 1 { vec![1.0] } else { sample_dirichlet(&vec![1.0 / k as f64; k], src)? };
        let log_w: Vec<f64> = net_weights.iter().map(|w| w.ln()).collect();
        let net_of: Vec<usize> = (0..j)
            .map(|_| sample_log_categorical(&log_w, src).expect("dirichlet weights sum to one"))
            .collect();
        let sigma2 = (0..j)
            .map(|_| sample_inv_gamma(hyper.sigma2_shape, hyper.sigma2_rate, src))
            .collect::<Result<Vec<_>, _>>()?;
        let mut tau = Matrix::zeros(j, p);
        let mut beta = Matrix::zeros(j, p);
        for c in 0..j {
            let net = net_of[c];
            let row = prior::draw_tau_beta(lambda1[net], lambda2[net], sigma2[c], p, src);
            tau.row_mut(c).copy_from_slice(&row.0);
            beta.row_mut(c).copy_from_slice(&row.1);
        }
        Ok(Self {
            sticks,
            weights,
            alpha,
            beta,
            sigma2,
            tau,
            assignments,
            net_of,
            net_weights,
            lambda1,
            lambda2,
        })
    }

    /// Check every structural invariant of a state.
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: String| Err(ModelError::State(m));
        let j = self.n_components();
        let k = self.n_nets();
        let p = self.n_features();
        if self.sticks.len() + 1 != j {
            return fail(format!("{} sticks for {j} components", self.sticks.len()));
        }
        if self.sticks.iter().any(|&u| !(u > 0.0 && u < 1.0)) {
            return fail("stick outside (0, 1)".into());
        }
        let rebuilt = stick_breaking_unchecked(&self.sticks);
        if let Some((a, b)) = rebuilt.iter().zip(&self.weights).find(|(a, b)| (*a - *b).abs() > 1e-12) {
            return fail(format!("weights do not match sticks ({a} vs {b})"));
        }
        for (name, v) in [("weights", &self.weights), ("net_weights", &self.net_weights)] {
            if (v.iter().sum::<f64>() - 1.0).abs() > 1e-12 || v.iter().any(|&x| x < 0.0) {
                return fail(format!("{name} are not a probability vector"));
            }
        }
        if self.beta.rows() != j || self.tau.rows() != j || self.tau.cols() != p || self.sigma2.len() != j {
            return fail("component parameter dimensions disagree".into());
        }
        if self.net_of.len() != j || self.lambda1.len() != k || self.lambda2.len() != k {
            return fail("elastic-net dimensions disagree".into());
        }
        if self.assignments.iter().any(|&z| z >= j) || self.net_of.iter().any(|&c| c >= k) {
            return fail("indicator out of range".into());
        }
        if self.tau.as_slice().iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return fail("tau outside (0, 1)".into());
        }
        let positive = |v: &[f64]| v.iter().all(|&x| x > 0.0 && x.is_finite());
        if !(self.alpha > 0.0 && self.alpha.is_finite()) || !positive(&self.sigma2) || !positive(&self.lambda1) || !positive(&self.lambda2) {
            return fail("non-positive scale parameter".into());
        }
        if self.beta.as_slice().iter().any(|b| !b.is_finite()) {
            return fail("non-finite coefficient".into());
        }
        Ok(())
    }
}

/// Starting state: responses binned by quantile into `J` groups, one
/// ridge-damped least-squares fit per group, everything else from the prior.
pub fn init_state(data: &Dataset, hyper: &Hyperparameters, src: &mut RandomSource) -> Result<ChainState, ModelError> {
    hyper.validate()?;
    let (n, p, j) = (data.n(), data.p(), hyper.truncation);
    let mut state = ChainState::from_prior(hyper, n, p, src)?;
    if n < j {
        warn!("n = {n} is smaller than the truncation level {j}; starting with every sample in component 0");
        state.assignments = vec![0; n];
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| data.y[a].total_cmp(&data.y[b]).then(a.cmp(&b)));
        for (rank, &i) in order.iter().enumerate() {
            state.assignments[i] = rank * j / n;
        }
    }
    for (c, rows) in group_rows(&state.assignments, j).iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        if let Some(b) = ridge_fit(data, rows, INIT_RIDGE) {
            state.beta.row_mut(c).copy_from_slice(&b);
        }
    }
    Ok(state)
}

pub(crate) fn group_rows(assignments: &[usize], j: usize) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); j];
    for (i, &z) in assignments.iter().enumerate() {
        groups[z].push(i);
    }
    groups
}

fn ridge_fit(data: &Dataset, rows: &[usize], ridge: f64) -> Option<Vec<f64>> {
    let p = data.p();
    let mut gram = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    for &i in rows {
        let x = data.x.row(i);
        for a in 0..p {
            xty[a] += x[a] * data.y[i];
            for b in 0..p {
                gram[a * p + b] += x[a] * x[b];
            }
        }
    }
    for a in 0..p {
        gram[a * p + a] += ridge;
    }
    solve_spd(&gram, p, &xty).ok()
}

/// Retained draws of one fit, all sharing `(J, K, p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorChain {
    pub draws: Vec<ChainState>,
    pub hyper: Hyperparameters,
    pub relabeled: bool,
    pub seed: u64,
    pub class_id: String,
    /// Number of samples and features the chain was fit to.
    pub n_samples: usize,
    pub n_features: usize,
    /// Number of pooled chains; `draws.len() == n_chains * hyper.retained_draws()`.
    pub n_chains: usize,
}

impl PosteriorChain {
    pub fn validate(&self) -> Result<(), ModelError> {
        let expected = self.n_chains * self.hyper.retained_draws();
        if self.draws.len() != expected && !self.draws.is_empty() {
            return Err(ModelError::State(format!("{} draws, expected {expected}", self.draws.len())));
        }
        for d in &self.draws {
            if d.n_components() != self.hyper.truncation
                || d.n_nets() != self.hyper.n_nets
                || d.n_features() != self.n_features
                || d.n_samples() != self.n_samples
            {
                return Err(ModelError::State("draw dimensions disagree with chain".into()));
            }
        }
        Ok(())
    }

    /// Concatenate chains fit to the same data; the result is not relabeled.
    pub fn pool(chains: &[PosteriorChain]) -> Option<PosteriorChain> {
        let first = chains.first()?;
        let mut out = first.clone();
        out.draws = chains.iter().flat_map(|c| c.draws.iter().cloned()).collect();
        out.n_chains = chains.iter().map(|c| c.n_chains).sum();
        out.relabeled = false;
        Some(out)
    }
}
