//! Python bindings for the surrogate fitting and explanation pipeline.

use std::path::PathBuf;

use engine::explain::{
    self, craft_pathological, export_heatmap, fit_surrogate_with, global_patterns_with, local_explanation_with, pattern_similarity,
    ExplainError, FitOptions, Importance, PredictMode,
};
use engine::io::{self as eio, IoError};
use engine::model::{self, logit_transform_clipped, Hyperparameters, ModelError, ResponseKind, Standardize};
use engine::rngdist::RandomSource;
use engine::sampler::SamplerError;
use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

create_exception!(dpmen, NumericalCollapse, PyRuntimeError, "The sampler produced non-finite values.");

fn explain_err(e: ExplainError) -> PyErr {
    match e {
        ExplainError::Sampler(SamplerError::Collapse { .. } | SamplerError::NumericalCollapse { .. }) => {
            NumericalCollapse::new_err(e.to_string())
        }
        other => PyValueError::new_err(other.to_string()),
    }
}

fn model_err(e: ModelError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err(e: IoError) -> PyErr {
    match e {
        IoError::File { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_kind(kind: &str) -> PyResult<ResponseKind> {
    match kind {
        "raw_score" => Ok(ResponseKind::RawScore),
        "probability" => Ok(ResponseKind::Probability),
        other => Err(PyValueError::new_err(format!("unknown response kind {other:?}"))),
    }
}

fn parse_standardize(mode: &str) -> PyResult<Standardize> {
    match mode {
        "none" => Ok(Standardize::None),
        "scale" => Ok(Standardize::Scale),
        "center" => Ok(Standardize::Center),
        other => Err(PyValueError::new_err(format!("unknown standardization {other:?}"))),
    }
}

/// Samples of one class with the black-box responses.
#[pyclass(module = "dpmen")]
struct Dataset {
    inner: model::Dataset,
}

#[pymethods]
impl Dataset {
    #[new]
    #[pyo3(signature = (features, responses, class_id = "class".to_string(), kind = "raw_score", feature_names = None))]
    fn new(
        features: Vec<Vec<f64>>,
        responses: Vec<f64>,
        class_id: String,
        kind: &str,
        feature_names: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let mut inner = model::Dataset::from_rows(&features, responses, class_id, parse_kind(kind)?).map_err(model_err)?;
        if let Some(names) = feature_names {
            inner = inner.with_feature_names(names).map_err(model_err)?;
        }
        Ok(Self { inner })
    }

    /// Load features and one response column from CSV files.
    #[staticmethod]
    #[pyo3(signature = (features, responses, column = 0, header = true, kind = "raw_score"))]
    fn from_csv(features: PathBuf, responses: PathBuf, column: usize, header: bool, kind: &str) -> PyResult<Self> {
        let x = eio::read_matrix_csv(&features, header).map_err(io_err)?;
        let r = eio::read_matrix_csv(&responses, header).map_err(io_err)?;
        if column >= r.width() {
            return Err(PyValueError::new_err(format!("response column {column} out of range ({} columns)", r.width())));
        }
        let y: Vec<f64> = r.rows.iter().map(|row| row[column]).collect();
        let class_id = r.header.as_ref().map(|h| h[column].clone()).unwrap_or_else(|| format!("class{column}"));
        let mut inner = model::Dataset::from_rows(&x.rows, y, class_id, parse_kind(kind)?).map_err(model_err)?;
        if let Some(names) = x.header {
            inner = inner.with_feature_names(names).map_err(model_err)?;
        }
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn class_id(&self) -> String {
        self.inner.class_id().to_string()
    }

    #[getter]
    fn responses(&self) -> Vec<f64> {
        self.inner.y().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(class_id={:?}, n={}, p={})", self.inner.class_id(), self.inner.n(), self.inner.p())
    }
}

/// Retained posterior draws.
#[pyclass(module = "dpmen")]
struct Chain {
    inner: model::PosteriorChain,
}

impl Chain {
    fn draw(&self, d: usize) -> PyResult<&model::ChainState> {
        self.inner
            .draws
            .get(d)
            .ok_or_else(|| PyValueError::new_err(format!("draw {d} out of range ({} draws)", self.inner.draws.len())))
    }
}

#[pymethods]
impl Chain {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: eio::read_chain(&path).map_err(io_err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        eio::write_chain(&path, &self.inner).map_err(io_err)
    }

    #[getter]
    fn n_draws(&self) -> usize {
        self.inner.draws.len()
    }

    #[getter]
    fn n_components(&self) -> usize {
        self.inner.hyper.truncation
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features
    }

    #[getter]
    fn n_samples(&self) -> usize {
        self.inner.n_samples
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn relabeled(&self) -> bool {
        self.inner.relabeled
    }

    /// Coefficients of draw `d`, one row per component.
    fn beta(&self, d: usize) -> PyResult<Vec<Vec<f64>>> {
        let s = self.draw(d)?;
        Ok((0..s.n_components()).map(|j| s.beta.row(j).to_vec()).collect())
    }

    fn weights(&self, d: usize) -> PyResult<Vec<f64>> {
        Ok(self.draw(d)?.weights.clone())
    }

    fn sigma2(&self, d: usize) -> PyResult<Vec<f64>> {
        Ok(self.draw(d)?.sigma2.clone())
    }

    fn assignments(&self, d: usize) -> PyResult<Vec<usize>> {
        Ok(self.draw(d)?.assignments.clone())
    }

    fn __repr__(&self) -> String {
        format!("Chain(n_draws={}, n_components={})", self.inner.draws.len(), self.inner.hyper.truncation)
    }
}

#[pyclass(module = "dpmen", get_all)]
struct Assignment {
    component: usize,
    confidence: f64,
    prediction: f64,
}

#[pyclass(module = "dpmen", get_all)]
struct RankedFeature {
    index: usize,
    name: Option<String>,
    weight: f64,
}

#[pyclass(module = "dpmen", get_all)]
struct Explanation {
    component: usize,
    assignment_confidence: f64,
    features: Vec<Py<RankedFeature>>,
    truncated: bool,
}

#[pymethods]
impl Explanation {
    /// Feature indices in rank order.
    fn indices(&self, py: Python<'_>) -> Vec<usize> {
        self.features.iter().map(|f| f.borrow(py).index).collect()
    }
}

/// Global pattern of one mixture component.
#[pyclass(module = "dpmen")]
struct Pattern {
    inner: explain::Pattern,
}

#[pymethods]
impl Pattern {
    #[new]
    #[pyo3(signature = (weights, component = 0, top_k = 4))]
    fn new(weights: Vec<f64>, component: usize, top_k: usize) -> Self {
        Self { inner: explain::Pattern::from_weights(component, weights, top_k) }
    }

    #[getter]
    fn component(&self) -> usize {
        self.inner.component
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights.clone()
    }

    #[getter]
    fn support(&self) -> Vec<usize> {
        self.inner.support.clone()
    }

    #[getter]
    fn energy(&self) -> Vec<f64> {
        self.inner.energy.clone()
    }

    fn similarity(&self, other: PyRef<'_, Pattern>) -> PyResult<f64> {
        pattern_similarity(&self.inner, &other.inner).map_err(explain_err)
    }

    fn heatmap(&self, rows: usize, cols: usize) -> PyResult<Vec<Vec<f64>>> {
        export_heatmap(&self.inner, (rows, cols)).map_err(explain_err)
    }

    /// Copies of `base` with the features at or above `threshold` energy
    /// drawn uniformly from `[lo, hi)`.
    #[pyo3(signature = (base, threshold, lo = 0.0, hi = 1.0, repeats = 1, seed = 0))]
    fn craft(&self, base: Vec<f64>, threshold: f64, lo: f64, hi: f64, repeats: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let mut src = RandomSource::new(seed);
        (0..repeats)
            .map(|_| craft_pathological(&self.inner, &base, threshold, (lo, hi), &mut src).map_err(explain_err))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Pattern(component={}, support={:?})", self.inner.component, self.inner.support)
    }
}

/// Posterior-mean surrogate of one class.
#[pyclass(module = "dpmen")]
struct SurrogateModel {
    inner: explain::SurrogateModel,
}

#[pymethods]
impl SurrogateModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: eio::read_model(&path).map_err(io_err)? })
    }

    /// Write the model, and its draws next to it when it has them.
    fn save(&self, path: PathBuf) -> PyResult<()> {
        let chain_name = match &self.inner.chain {
            Some(chain) => {
                let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
                let name = format!("{stem}.chain.bin");
                eio::write_chain(&path.with_file_name(&name), chain).map_err(io_err)?;
                Some(name)
            }
            None => None,
        };
        eio::write_model(&path, &self.inner, chain_name.as_deref()).map_err(io_err)
    }

    #[getter]
    fn class_id(&self) -> String {
        self.inner.class_id.clone()
    }

    #[getter]
    fn n_components(&self) -> usize {
        self.inner.n_components()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    #[getter]
    fn pi_mean(&self) -> Vec<f64> {
        self.inner.pi_mean.clone()
    }

    #[getter]
    fn sigma2_mean(&self) -> Vec<f64> {
        self.inner.sigma2_mean.clone()
    }

    #[getter]
    fn occupancy(&self) -> Vec<f64> {
        self.inner.occupancy.clone()
    }

    #[getter]
    fn chain(&self) -> Option<Chain> {
        self.inner.chain.clone().map(|inner| Chain { inner })
    }

    /// Coefficients of component `j` on the original feature scale.
    fn coefficients(&self, j: usize) -> PyResult<Vec<f64>> {
        if j >= self.inner.n_components() {
            return Err(PyValueError::new_err(format!("component {j} out of range")));
        }
        Ok(self.inner.coefficients(j))
    }

    /// Mixture-mean prediction, or the most probable component's prediction
    /// for a known response.
    #[pyo3(signature = (x, response = None))]
    fn predict(&self, x: Vec<f64>, response: Option<f64>) -> PyResult<f64> {
        let mode = if response.is_some() { PredictMode::MostProbable } else { PredictMode::MixtureMean };
        self.inner.predict_with(&x, mode, response).map_err(explain_err)
    }

    #[pyo3(signature = (x, response = None))]
    fn assign(&self, x: Vec<f64>, response: Option<f64>) -> PyResult<Assignment> {
        let a = self.inner.assign(&x, response).map_err(explain_err)?;
        Ok(Assignment { component: a.component, confidence: a.confidence, prediction: a.prediction })
    }

    fn rmse(&self, data: PyRef<'_, Dataset>) -> PyResult<f64> {
        let d = fit_scale(&data.inner)?;
        explain::rmse(&self.inner, &d).map_err(explain_err)
    }

    #[pyo3(signature = (x, top_k = 4, response = None, importance = "coefficient"))]
    fn explain(&self, py: Python<'_>, x: Vec<f64>, top_k: usize, response: Option<f64>, importance: &str) -> PyResult<Explanation> {
        let importance = match importance {
            "coefficient" => Importance::Coefficient,
            "contribution" => Importance::Contribution,
            other => return Err(PyValueError::new_err(format!("unknown importance {other:?}"))),
        };
        let e = local_explanation_with(&self.inner, &x, top_k, response, importance).map_err(explain_err)?;
        let features = e
            .ranked_features
            .into_iter()
            .map(|f| Py::new(py, RankedFeature { index: f.index, name: f.name, weight: f.weight }))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Explanation { component: e.component, assignment_confidence: e.assignment_confidence, features, truncated: e.truncated })
    }

    #[pyo3(signature = (top_k = 4, occupancy_floor = explain::DEFAULT_OCCUPANCY_FLOOR))]
    fn patterns(&self, top_k: usize, occupancy_floor: f64) -> PyResult<Vec<Pattern>> {
        let pats = global_patterns_with(&self.inner, top_k, occupancy_floor).map_err(explain_err)?;
        Ok(pats.into_iter().map(|inner| Pattern { inner }).collect())
    }

    fn __repr__(&self) -> String {
        format!("SurrogateModel(class_id={:?}, n_components={})", self.inner.class_id, self.inner.n_components())
    }
}

/// Probability responses are moved to the logit scale, clipping saturated values.
fn fit_scale(data: &model::Dataset) -> PyResult<model::Dataset> {
    if data.response_kind() == ResponseKind::Probability {
        Ok(logit_transform_clipped(data).map_err(model_err)?.0)
    } else {
        Ok(data.clone())
    }
}

/// Fit a surrogate to `data`.
#[pyfunction]
#[pyo3(signature = (data, seed = 0, truncation = 20, n_nets = 3, n_iter = 4000, burn_in = 2000, thin = 1, n_chains = 1, standardize = "scale"))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    data: PyRef<'_, Dataset>,
    seed: u64,
    truncation: usize,
    n_nets: usize,
    n_iter: usize,
    burn_in: usize,
    thin: usize,
    n_chains: usize,
    standardize: &str,
) -> PyResult<SurrogateModel> {
    let hyper = Hyperparameters { truncation, n_nets, n_iter, burn_in, thin, ..Hyperparameters::default() };
    hyper.validate().map_err(model_err)?;
    if n_chains == 0 {
        return Err(PyValueError::new_err("n_chains must be at least 1"));
    }
    let options = FitOptions { standardize: parse_standardize(standardize)?, n_chains };
    let d = fit_scale(&data.inner)?;
    let out = py.detach(|| fit_surrogate_with(&d, &hyper, seed, options)).map_err(explain_err)?;
    Ok(SurrogateModel { inner: out.model })
}

#[pyfunction]
fn similarity(a: PyRef<'_, Pattern>, b: PyRef<'_, Pattern>) -> PyResult<f64> {
    pattern_similarity(&a.inner, &b.inner).map_err(explain_err)
}

#[pyfunction]
fn logit(p: f64) -> f64 {
    model::logit(p)
}

#[pyfunction]
fn rmse(predictions: Vec<f64>, truth: Vec<f64>) -> PyResult<f64> {
    if predictions.len() != truth.len() {
        return Err(PyValueError::new_err("length mismatch"));
    }
    Ok(explain::rmse_of(&predictions, &truth))
}

#[pymodule]
fn dpmen(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Chain>()?;
    m.add_class::<SurrogateModel>()?;
    m.add_class::<Pattern>()?;
    m.add_class::<Explanation>()?;
    m.add_class::<RankedFeature>()?;
    m.add_class::<Assignment>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(similarity, m)?)?;
    m.add_function(wrap_pyfunction!(logit, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add("NumericalCollapse", m.py().get_type::<NumericalCollapse>())?;
    Ok(())
}
