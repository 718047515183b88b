use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::adapter::csv_row;
use super::{file_err, json_err, read_chain, IoError, SCHEMA_VERSION};
use crate::explain::{Explanation, Importance, Pattern, SurrogateModel};
use crate::sampler::SweepDiagnostics;

/// On-disk form of a [`SurrogateModel`]; the draws live in a separate
/// chain container referenced relative to the model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub chain_file: Option<String>,
    pub model: SurrogateModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSet {
    pub schema_version: u32,
    pub class_id: String,
    pub top_k: usize,
    pub occupancy_floor: f64,
    pub patterns: Vec<Pattern>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationSet {
    pub schema_version: u32,
    pub class_id: String,
    pub top_k: usize,
    pub importance: Importance,
    pub explanations: Vec<Explanation>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(json_err(path))?;
    text.push('\n');
    std::fs::write(path, text).map_err(file_err(path))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = std::fs::read_to_string(path).map_err(file_err(path))?;
    let version: Option<u32> = serde_json::from_str::<serde_json::Value>(&text)
        .map_err(json_err(path))?
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .map(|v| v as u32);
    match version {
        Some(SCHEMA_VERSION) => serde_json::from_str(&text).map_err(json_err(path)),
        Some(found) => Err(IoError::SchemaVersion { found, expected: SCHEMA_VERSION }),
        None => Err(IoError::Persistence(format!("{}: missing schema_version", path.display()))),
    }
}

pub fn write_model(path: &Path, model: &SurrogateModel, chain_file: Option<&str>) -> Result<(), IoError> {
    let file = ModelFile {
        schema_version: SCHEMA_VERSION,
        chain_file: chain_file.map(str::to_string),
        model: model.clone(),
    };
    write_json(path, &file)
}

/// Load a model and, when referenced, its chain.
pub fn read_model(path: &Path) -> Result<SurrogateModel, IoError> {
    let file: ModelFile = read_json(path)?;
    let mut model = file.model;
    let (j, p) = (model.beta_mean.rows(), model.beta_mean.cols());
    if model.sigma2_mean.len() != j || model.pi_mean.len() != j || model.occupancy.len() != j || model.standardization.p() != p {
        return Err(IoError::Persistence(format!("{}: model dimensions disagree", path.display())));
    }
    if let Some(name) = file.chain_file {
        let chain_path = path.parent().unwrap_or(Path::new(".")).join(name);
        let chain = read_chain(&chain_path)?;
        if chain.hyper.truncation != j || chain.n_features != p {
            return Err(IoError::Persistence(format!("{} does not match {}", chain_path.display(), path.display())));
        }
        model.chain = Some(chain);
    }
    Ok(model)
}

pub fn write_patterns(path: &Path, set: &PatternSet) -> Result<(), IoError> {
    write_json(path, set)
}

pub fn read_patterns(path: &Path) -> Result<PatternSet, IoError> {
    let set: PatternSet = read_json(path)?;
    if let Some(first) = set.patterns.first() {
        let p = first.p();
        if set.patterns.iter().any(|pat| pat.p() != p || pat.weights.len() != p) {
            return Err(IoError::Persistence(format!("{}: patterns differ in length", path.display())));
        }
    }
    Ok(set)
}

pub fn write_explanations(path: &Path, set: &ExplanationSet) -> Result<(), IoError> {
    write_json(path, set)
}

pub fn read_explanations(path: &Path) -> Result<ExplanationSet, IoError> {
    read_json(path)
}

/// Headerless CSV of a real matrix.
pub fn write_heatmap(path: &Path, matrix: &[Vec<f64>]) -> Result<(), IoError> {
    write_matrix_csv(path, None, matrix)
}

pub fn write_matrix_csv(path: &Path, header: Option<&[String]>, rows: &[Vec<f64>]) -> Result<(), IoError> {
    let file = File::create(path).map_err(file_err(path))?;
    let mut w = BufWriter::new(file);
    let mut run = || -> std::io::Result<()> {
        if let Some(h) = header {
            writeln!(w, "{}", h.join(","))?;
        }
        for r in rows {
            w.write_all(csv_row(r).as_bytes())?;
        }
        w.flush()
    };
    run().map_err(file_err(path))
}

pub fn write_diagnostics(path: &Path, diagnostics: &[SweepDiagnostics]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| IoError::Persistence(format!("{}: {e}", path.display())))?;
    for d in diagnostics {
        w.serialize(d).map_err(|e| IoError::Persistence(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(file_err(path))
}
