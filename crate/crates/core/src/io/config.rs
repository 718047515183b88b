use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{file_err, json_err, DatasetSource, IoError, ResponseSource};
use crate::model::{Hyperparameters, ResponseKind, Standardize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeHint {
    pub rows: usize,
    pub cols: usize,
}

/// Everything a `fit` run needs. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub features: PathBuf,
    #[serde(default = "default_true")]
    pub features_header: bool,
    #[serde(default)]
    pub responses: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub responses_header: bool,
    /// Shell command speaking the adapter protocol; replaces `responses`.
    #[serde(default)]
    pub adapter: Option<String>,
    #[serde(default = "default_kind")]
    pub response_kind: ResponseKind,
    #[serde(default)]
    pub labels: Option<PathBuf>,
    /// Classes to fit; empty means every response column.
    #[serde(default)]
    pub classes: Vec<String>,
    #[serde(default)]
    pub hyper: Hyperparameters,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_chains")]
    pub n_chains: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub top_k: Option<usize>,
    #[serde(default)]
    pub shape: Option<ShapeHint>,
    #[serde(default)]
    pub standardize: Standardize,
}

fn default_true() -> bool {
    true
}

fn default_kind() -> ResponseKind {
    ResponseKind::RawScore
}

fn default_chains() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn new(features: PathBuf, responses: PathBuf) -> Self {
        Self {
            features,
            features_header: true,
            responses: Some(responses),
            responses_header: true,
            adapter: None,
            response_kind: default_kind(),
            labels: None,
            classes: Vec::new(),
            hyper: Hyperparameters::default(),
            seed: 0,
            n_chains: 1,
            output_dir: default_output(),
            top_k: None,
            shape: None,
            standardize: Standardize::default(),
        }
    }

    /// Parse a config file and resolve its relative paths.
    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(file_err(path))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(json_err(path))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.features);
        resolve(&mut cfg.output_dir);
        if let Some(p) = cfg.responses.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.labels.as_mut() {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), IoError> {
        let fail = |m: String| Err(IoError::Config(m));
        let must_exist = |p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(IoError::Config(format!("{} does not exist", p.display())))
            }
        };
        must_exist(&self.features)?;
        match (&self.responses, &self.adapter) {
            (Some(r), None) => must_exist(r)?,
            (None, Some(_)) => {}
            (Some(_), Some(_)) => return fail("give either responses or adapter, not both".into()),
            (None, None) => return fail("one of responses or adapter is required".into()),
        }
        if let Some(l) = &self.labels {
            must_exist(l)?;
        }
        if self.n_chains == 0 {
            return fail("n_chains must be >= 1".into());
        }
        if self.top_k == Some(0) {
            return fail("top_k must be positive".into());
        }
        if let Some(s) = self.shape {
            if s.rows == 0 || s.cols == 0 {
                return fail("shape must have positive rows and cols".into());
            }
        }
        if let Some(c) = self.classes.iter().find(|c| !is_safe_class_id(c)) {
            return fail(format!("class id '{c}' may only use letters, digits, '-', '_' and '.'"));
        }
        self.hyper.validate()?;
        Ok(())
    }

    pub fn dataset_source(&self) -> DatasetSource {
        let responses = match (&self.responses, &self.adapter) {
            (_, Some(command)) => ResponseSource::Adapter { command: command.clone() },
            (Some(path), None) => ResponseSource::Csv { path: path.clone(), header: self.responses_header },
            (None, None) => ResponseSource::Adapter { command: String::new() },
        };
        DatasetSource {
            features: self.features.clone(),
            features_header: self.features_header,
            responses,
            response_kind: self.response_kind,
            labels: self.labels.clone(),
        }
    }
}

/// Class ids become directory names.
pub(crate) fn is_safe_class_id(id: &str) -> bool {
    !id.is_empty() && id != "." && id != ".." && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_ids() {
        assert!(is_safe_class_id("digit_0"));
        assert!(is_safe_class_id("3"));
        assert!(!is_safe_class_id("../x"));
        assert!(!is_safe_class_id(""));
        assert!(!is_safe_class_id(".."));
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"features": "x.csv", "responses": "y.csv"}"#).unwrap();
        assert_eq!(cfg.n_chains, 1);
        assert!(cfg.features_header);
        assert_eq!(cfg.hyper, Hyperparameters::default());
        assert!(serde_json::from_str::<RunConfig>(r#"{"features": "x.csv", "bogus": 1}"#).is_err());
    }
}
