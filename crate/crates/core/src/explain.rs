//! Using the fitted mixture as a global surrogate of a black-box model.
//!
//! A sample is explained by the linear component that best reproduces the
//! black-box output for it; a class is summarized by the coefficient
//! magnitudes ("patterns") of its well-populated components.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, Matrix};
use crate::model::{Dataset, Hyperparameters, ModelError, PosteriorChain, ResponseKind, Standardization, Standardize};
use crate::relabel::relabel_chain;
use crate::rngdist::{ln_normal_pdf, log_sum_exp, RandomSource};
use crate::sampler::{assignment_log_weights, run_chain_with, SamplerError, SweepDiagnostics};

/// Default number of features reported for image-shaped inputs.
pub const DEFAULT_TOP_K_IMAGE: usize = 150;
/// Default number of features reported for text-shaped inputs.
pub const DEFAULT_TOP_K_TEXT: usize = 4;
/// Components holding less than this share of the samples are not reported
/// as global patterns.
pub const DEFAULT_OCCUPANCY_FLOOR: f64 = 0.01;

pub fn default_top_k(shape: Option<(usize, usize)>) -> usize {
    if shape.is_some() {
        DEFAULT_TOP_K_IMAGE
    } else {
        DEFAULT_TOP_K_TEXT
    }
}

#[derive(Debug, Error, Clone)]
pub enum ExplainError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },
    #[error("no component reaches the occupancy floor")]
    EmptyModel,
    #[error("no feature has energy >= {threshold}")]
    EmptyMask { threshold: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("operation needs the posterior draws, but the model was loaded without its chain")]
    MissingChain,
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl ExplainError {
    fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Self::Shape { expected: expected.to_string(), got: got.to_string() }
    }
}

/// Options of [`fit_surrogate_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub standardize: Standardize,
    pub n_chains: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { standardize: Standardize::Scale, n_chains: 1 }
    }
}

/// Posterior-mean summary of a relabeled chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub class_id: String,
    /// Posterior-mean coefficients on the standardized scale, `J × p`.
    pub beta_mean: Matrix,
    pub sigma2_mean: Vec<f64>,
    pub pi_mean: Vec<f64>,
    /// Mean number of samples assigned to each component.
    pub occupancy: Vec<f64>,
    pub standardization: Standardization,
    pub feature_names: Option<Vec<String>>,
    /// Scale of the responses the model was fit to.
    pub response_kind: ResponseKind,
    pub n_samples: usize,
    #[serde(skip)]
    pub chain: Option<PosteriorChain>,
}

/// Everything a fit produces.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub model: SurrogateModel,
    /// Each chain relabeled on its own.
    pub chains: Vec<PosteriorChain>,
    pub diagnostics: Vec<Vec<SweepDiagnostics>>,
}

pub fn fit_surrogate(data: &Dataset, hyper: &Hyperparameters, seed: u64) -> Result<SurrogateModel, ExplainError> {
    Ok(fit_surrogate_with(data, hyper, seed, FitOptions::default())?.model)
}

/// Standardize, run `n_chains` chains on streams `0..n_chains` of `seed`,
/// relabel, and summarize. Chains run on separate threads; the result does
/// not depend on scheduling.
pub fn fit_surrogate_with(data: &Dataset, hyper: &Hyperparameters, seed: u64, options: FitOptions) -> Result<FitOutput, ExplainError> {
    if options.n_chains == 0 {
        return Err(ExplainError::InvalidArgument("n_chains must be >= 1".into()));
    }
    if !data.is_fit_ready() {
        return Err(SamplerError::NotFitReady.into());
    }
    hyper.validate()?;
    let standardization = Standardization::fit(data, options.standardize);
    let scaled = standardization.apply(data);
    let root = RandomSource::new(seed);

    let results: Vec<Result<(PosteriorChain, Vec<SweepDiagnostics>), SamplerError>> = if options.n_chains == 1 {
        vec![run_one(&scaled, hyper, root.split(0))]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..options.n_chains as u64)
                .map(|stream| {
                    let src = root.split(stream);
                    let scaled = &scaled;
                    scope.spawn(move || run_one(scaled, hyper, src))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
        })
    };
    let mut raw = Vec::with_capacity(results.len());
    let mut diagnostics = Vec::with_capacity(results.len());
    for r in results {
        let (chain, diag) = r?;
        raw.push(chain);
        diagnostics.push(diag);
    }

    let chains: Vec<PosteriorChain> = raw.iter().map(|c| relabel_chain(c, &scaled).0).collect();
    let pooled = if raw.len() == 1 {
        chains[0].clone()
    } else {
        let pooled = PosteriorChain::pool(&raw).expect("at least one chain");
        relabel_chain(&pooled, &scaled).0
    };
    let names = data.feature_names().map(<[String]>::to_vec);
    let model = SurrogateModel::from_chain(pooled, standardization, names, data.response_kind());
    Ok(FitOutput { model, chains, diagnostics })
}

fn run_one(data: &Dataset, hyper: &Hyperparameters, src: RandomSource) -> Result<(PosteriorChain, Vec<SweepDiagnostics>), SamplerError> {
    let mut diags = Vec::with_capacity(hyper.n_iter);
    let chain = run_chain_with(data, hyper, src, |d| diags.push(d.clone()))?;
    Ok((chain, diags))
}

/// Which linear prediction to report for an input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictMode {
    /// `Σ_j π̄_j x·β̄_j`.
    MixtureMean,
    /// `x·β̄_j*` for the most probable component `j*`.
    MostProbable,
}

/// How a feature's importance is scored within its component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Importance {
    /// `|β_l|` over features present in the input.
    #[default]
    Coefficient,
    /// `|β_l x_l|`.
    Contribution,
}

/// Component chosen for an input and how sure the surrogate is about it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub component: usize,
    pub confidence: f64,
    /// `x·β̄_component` on the response scale.
    pub prediction: f64,
}

impl SurrogateModel {
    /// Summarize a relabeled chain fit on `standardization`-scaled data.
    pub fn from_chain(
        chain: PosteriorChain,
        standardization: Standardization,
        feature_names: Option<Vec<String>>,
        response_kind: ResponseKind,
    ) -> Self {
        let j = chain.hyper.truncation;
        let p = chain.n_features;
        let nd = chain.draws.len().max(1) as f64;
        let mut beta = vec![0.0; j * p];
        let mut sigma2 = vec![0.0; j];
        let mut pi = vec![0.0; j];
        let mut occupancy = vec![0.0; j];
        for d in &chain.draws {
            for (acc, v) in beta.iter_mut().zip(d.beta.as_slice()) {
                *acc += v;
            }
            for c in 0..j {
                sigma2[c] += d.sigma2[c];
                pi[c] += d.weights[c];
            }
            for &z in &d.assignments {
                occupancy[z] += 1.0;
            }
        }
        let scale = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x /= nd);
        scale(&mut beta);
        scale(&mut sigma2);
        scale(&mut pi);
        scale(&mut occupancy);
        Self {
            class_id: chain.class_id.clone(),
            beta_mean: Matrix::from_row_major(j, p, beta),
            sigma2_mean: sigma2,
            pi_mean: pi,
            occupancy,
            standardization,
            feature_names,
            response_kind,
            n_samples: chain.n_samples,
            chain: Some(chain),
        }
    }

    pub fn n_components(&self) -> usize {
        self.pi_mean.len()
    }

    pub fn n_features(&self) -> usize {
        self.beta_mean.cols()
    }

    /// Posterior-mean coefficients of component `j` on the original feature scale.
    pub fn coefficients(&self, j: usize) -> Vec<f64> {
        self.standardization.destandardize(self.beta_mean.row(j))
    }

    fn scaled_input(&self, x: &[f64]) -> Result<Vec<f64>, ExplainError> {
        if x.len() != self.n_features() {
            return Err(ExplainError::shape(format!("{} features", self.n_features()), format!("{} features", x.len())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ExplainError::InvalidArgument("input contains non-finite values".into()));
        }
        Ok(self.standardization.apply_row(x))
    }

    fn scaled_mixture_mean(&self, xs: &[f64]) -> f64 {
        (0..self.n_components()).map(|j| self.pi_mean[j] * dot(xs, self.beta_mean.row(j))).sum()
    }

    /// Posterior-mean mixture prediction.
    pub fn predict(&self, x: &[f64]) -> Result<f64, ExplainError> {
        let xs = self.scaled_input(x)?;
        Ok(self.standardization.response_offset + self.scaled_mixture_mean(&xs))
    }

    pub fn predict_with(&self, x: &[f64], mode: PredictMode, response: Option<f64>) -> Result<f64, ExplainError> {
        match mode {
            PredictMode::MixtureMean => self.predict(x),
            PredictMode::MostProbable => Ok(self.assign(x, response)?.prediction),
        }
    }

    /// Component maximizing `π̄_j N(ŷ | x·β̄_j, σ̄_j²)`, where `ŷ` is the
    /// black-box output for `x` when known and the mixture-mean prediction
    /// otherwise. Components holding less than [`DEFAULT_OCCUPANCY_FLOOR`] of
    /// the samples are skipped.
    pub fn assign(&self, x: &[f64], response: Option<f64>) -> Result<Assignment, ExplainError> {
        let xs = self.scaled_input(x)?;
        let target = match response {
            Some(r) if r.is_finite() => r - self.standardization.response_offset,
            Some(_) => return Err(ExplainError::InvalidArgument("response is not finite".into())),
            None => self.scaled_mixture_mean(&xs),
        };
        let means: Vec<f64> = (0..self.n_components()).map(|j| dot(&xs, self.beta_mean.row(j))).collect();
        let eligible = self.eligible_components();
        let lw: Vec<f64> = (0..self.n_components())
            .map(|j| {
                if eligible[j] {
                    self.pi_mean[j].ln() + ln_normal_pdf(target, means[j], self.sigma2_mean[j])
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let norm = log_sum_exp(&lw);
        let (component, best) = lw
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
        if !norm.is_finite() {
            return Err(SamplerError::Collapse { stage: "component assignment" }.into());
        }
        Ok(Assignment {
            component,
            confidence: (best - norm).exp(),
            prediction: self.standardization.response_offset + means[component],
        })
    }

    fn eligible_components(&self) -> Vec<bool> {
        let n = self.n_samples.max(1) as f64;
        let eligible: Vec<bool> = self.occupancy.iter().map(|&o| o / n >= DEFAULT_OCCUPANCY_FLOOR).collect();
        if eligible.iter().any(|&e| e) {
            eligible
        } else {
            vec![true; eligible.len()]
        }
    }

    /// Share of posterior draws in which each component is the most probable
    /// for `(x, response)`.
    pub fn vote_assignment(&self, x: &[f64], response: f64) -> Result<Vec<f64>, ExplainError> {
        let chain = self.chain.as_ref().ok_or(ExplainError::MissingChain)?;
        let xs = self.scaled_input(x)?;
        let target = response - self.standardization.response_offset;
        let mut votes = vec![0.0; self.n_components()];
        for d in &chain.draws {
            let lw = assignment_log_weights(d, &xs, target);
            let best = lw.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |a, (j, v)| if v > a.1 { (j, v) } else { a });
            votes[best.0] += 1.0;
        }
        let n = chain.draws.len().max(1) as f64;
        Ok(votes.into_iter().map(|v| v / n).collect())
    }
}

/// Root mean squared error between two equal-length vectors.
pub fn rmse_of(predictions: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(predictions.len(), truth.len());
    if truth.is_empty() {
        return 0.0;
    }
    let sse: f64 = predictions.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum();
    (sse / truth.len() as f64).sqrt()
}

/// Approximation error of the surrogate on a dataset: each sample is scored
/// by the component that best explains its black-box response.
pub fn rmse(model: &SurrogateModel, data: &Dataset) -> Result<f64, ExplainError> {
    rmse_with(model, data, PredictMode::MostProbable)
}

pub fn rmse_with(model: &SurrogateModel, data: &Dataset, mode: PredictMode) -> Result<f64, ExplainError> {
    if data.p() != model.n_features() {
        return Err(ExplainError::shape(format!("{} features", model.n_features()), format!("{} features", data.p())));
    }
    let preds = (0..data.n())
        .map(|i| model.predict_with(data.x().row(i), mode, Some(data.y()[i])))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(rmse_of(&preds, data.y()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub index: usize,
    pub name: Option<String>,
    /// Signed coefficient (or contribution) on the original feature scale.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub sample_index: Option<usize>,
    pub component: usize,
    pub assignment_confidence: f64,
    pub ranked_features: Vec<RankedFeature>,
    /// Fewer than `top_k` features were present in the input.
    pub truncated: bool,
}

/// Indices sorted by `|score|` descending, ties broken by lower index.
fn rank_by_magnitude(indices: impl Iterator<Item = usize>, score: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut idx: Vec<usize> = indices.collect();
    idx.sort_by(|&a, &b| score(b).abs().total_cmp(&score(a).abs()).then(a.cmp(&b)));
    idx
}

pub fn local_explanation(model: &SurrogateModel, x: &[f64], top_k: usize, response: Option<f64>) -> Result<Explanation, ExplainError> {
    local_explanation_with(model, x, top_k, response, Importance::Coefficient)
}

/// Top features of the component assigned to `x`, restricted to features
/// present in `x` (non-zero).
pub fn local_explanation_with(
    model: &SurrogateModel,
    x: &[f64],
    top_k: usize,
    response: Option<f64>,
    importance: Importance,
) -> Result<Explanation, ExplainError> {
    if top_k == 0 {
        return Err(ExplainError::InvalidArgument("top_k must be positive".into()));
    }
    let a = model.assign(x, response)?;
    let coef = model.coefficients(a.component);
    let weight = |l: usize| match importance {
        Importance::Coefficient => coef[l],
        Importance::Contribution => coef[l] * x[l],
    };
    let present = (0..x.len()).filter(|&l| x[l] != 0.0);
    let ranked = rank_by_magnitude(present, weight);
    let truncated = ranked.len() < top_k;
    let ranked_features = ranked
        .into_iter()
        .take(top_k)
        .map(|l| RankedFeature {
            index: l,
            name: model.feature_names.as_ref().map(|n| n[l].clone()),
            weight: weight(l),
        })
        .collect();
    Ok(Explanation {
        sample_index: None,
        component: a.component,
        assignment_confidence: a.confidence,
        ranked_features,
        truncated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub component: usize,
    /// Posterior-mean coefficients on the original feature scale.
    pub weights: Vec<f64>,
    /// The `min(top_k, p)` largest-magnitude feature indices, in rank order.
    pub support: Vec<usize>,
    /// `|weights|` scaled to a maximum of 1 (all zeros for a zero row).
    pub energy: Vec<f64>,
}

impl Pattern {
    pub fn from_weights(component: usize, weights: Vec<f64>, top_k: usize) -> Self {
        let max = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        let energy = weights.iter().map(|w| if max > 0.0 { w.abs() / max } else { 0.0 }).collect();
        let support = rank_by_magnitude(0..weights.len(), |l| weights[l]).into_iter().take(top_k).collect();
        Self { component, weights, support, energy }
    }

    pub fn p(&self) -> usize {
        self.energy.len()
    }
}

pub fn global_patterns(model: &SurrogateModel, top_k: usize) -> Result<Vec<Pattern>, ExplainError> {
    global_patterns_with(model, top_k, DEFAULT_OCCUPANCY_FLOOR)
}

/// One pattern per component holding at least `occupancy_floor · n` samples
/// on average, in descending order of mixture weight.
pub fn global_patterns_with(model: &SurrogateModel, top_k: usize, occupancy_floor: f64) -> Result<Vec<Pattern>, ExplainError> {
    if top_k == 0 {
        return Err(ExplainError::InvalidArgument("top_k must be positive".into()));
    }
    let floor = occupancy_floor * model.n_samples as f64;
    let mut comps: Vec<usize> = (0..model.n_components())
        .filter(|&j| model.occupancy[j] > 0.0 && model.occupancy[j] >= floor)
        .collect();
    if comps.is_empty() {
        return Err(ExplainError::EmptyModel);
    }
    comps.sort_by(|&a, &b| model.pi_mean[b].total_cmp(&model.pi_mean[a]).then(a.cmp(&b)));
    Ok(comps.into_iter().map(|j| Pattern::from_weights(j, model.coefficients(j), top_k)).collect())
}

/// Cosine similarity of two patterns' energy vectors.
pub fn pattern_similarity(a: &Pattern, b: &Pattern) -> Result<f64, ExplainError> {
    if a.p() != b.p() {
        return Err(ExplainError::shape(format!("{} features", a.p()), format!("{} features", b.p())));
    }
    let na = dot(&a.energy, &a.energy).sqrt();
    let nb = dot(&b.energy, &b.energy).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot(&a.energy, &b.energy) / (na * nb)).clamp(-1.0, 1.0))
}

/// Indices whose energy reaches `threshold`.
pub fn energy_mask(pattern: &Pattern, threshold: f64) -> Vec<bool> {
    pattern.energy.iter().map(|&e| e >= threshold).collect()
}

/// Copy of `base` with every masked coordinate replaced by an independent
/// uniform draw on `[lo, hi]`.
pub fn fill_mask(base: &[f64], mask: &[bool], value_range: (f64, f64), src: &mut RandomSource) -> Result<Vec<f64>, ExplainError> {
    let (lo, hi) = value_range;
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(ExplainError::InvalidArgument(format!("value range [{lo}, {hi}] is empty")));
    }
    if mask.len() != base.len() {
        return Err(ExplainError::shape(format!("{} features", mask.len()), format!("{} features", base.len())));
    }
    Ok(base
        .iter()
        .zip(mask)
        .map(|(&b, &m)| if m { src.uniform_in(lo, hi) } else { b })
        .collect())
}

/// Pathological input: randomize the high-energy part of a pattern.
pub fn craft_pathological(
    pattern: &Pattern,
    base: &[f64],
    energy_threshold: f64,
    value_range: (f64, f64),
    src: &mut RandomSource,
) -> Result<Vec<f64>, ExplainError> {
    if !(energy_threshold > 0.0 && energy_threshold <= 1.0) {
        return Err(ExplainError::InvalidArgument(format!("energy threshold {energy_threshold} outside (0, 1]")));
    }
    if base.len() != pattern.p() {
        return Err(ExplainError::shape(format!("{} features", pattern.p()), format!("{} features", base.len())));
    }
    let mask = energy_mask(pattern, energy_threshold);
    if !mask.iter().any(|&m| m) {
        return Err(ExplainError::EmptyMask { threshold: energy_threshold });
    }
    fill_mask(base, &mask, value_range, src)
}

/// Row-major reshape of a pattern's energy.
pub fn export_heatmap(pattern: &Pattern, shape: (usize, usize)) -> Result<Vec<Vec<f64>>, ExplainError> {
    let (rows, cols) = shape;
    if rows * cols != pattern.p() {
        return Err(ExplainError::shape(format!("{} cells", pattern.p()), format!("{rows}x{cols}")));
    }
    Ok(pattern.energy.chunks(cols.max(1)).take(rows).map(<[f64]>::to_vec).collect())
}
