use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{file_err, subprocess_adapter, IoError};
use crate::linalg::Matrix;
use crate::model::{Dataset, ResponseKind};

/// Numeric CSV contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn width(&self) -> usize {
        self.rows
            .first()
            .map(Vec::len)
            .or_else(|| self.header.as_ref().map(Vec::len))
            .unwrap_or(0)
    }
}

/// Parse a rectangular CSV of reals. Errors carry the 1-based line number.
pub fn parse_matrix_csv<R: Read>(reader: R, has_header: bool, source_name: &str) -> Result<Table, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for record in rdr.records() {
        let record = record.map_err(|e| IoError::Parse {
            source_name: source_name.to_string(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |message: String| IoError::Parse { source_name: source_name.to_string(), line, message };
        if let Some(w) = width {
            if record.len() != w {
                return Err(parse_err(format!("expected {w} fields, found {}", record.len())));
            }
        } else {
            width = Some(record.len());
        }
        if has_header && header.is_none() {
            header = Some(record.iter().map(str::to_string).collect());
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(format!("column {}: '{cell}' is not a finite number", c + 1)))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

pub fn read_matrix_csv(path: &Path, has_header: bool) -> Result<Table, IoError> {
    let file = File::open(path).map_err(file_err(path))?;
    parse_matrix_csv(file, has_header, &path.display().to_string())
}

/// One class label per line; blank lines are ignored.
pub fn read_labels(path: &Path) -> Result<Vec<String>, IoError> {
    let text = std::fs::read_to_string(path).map_err(file_err(path))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseSource {
    /// One column of scores per class.
    Csv { path: PathBuf, header: bool },
    /// Responses produced by a black-box command (see [`subprocess_adapter`]).
    Adapter { command: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSource {
    pub features: PathBuf,
    pub features_header: bool,
    pub responses: ResponseSource,
    pub response_kind: ResponseKind,
    /// Optional per-sample class labels; when present each class keeps only
    /// its own samples.
    pub labels: Option<PathBuf>,
}

/// Build one dataset per requested class (all response columns when
/// `classes` is empty).
pub fn load_dataset(source: &DatasetSource, classes: &[String]) -> Result<Vec<Dataset>, IoError> {
    let features = read_matrix_csv(&source.features, source.features_header)?;
    if features.rows.is_empty() {
        return Err(IoError::Mismatch(format!("{}: no feature rows", source.features.display())));
    }
    let responses = match &source.responses {
        ResponseSource::Csv { path, header } => {
            let t = read_matrix_csv(path, *header)?;
            if t.rows.len() != features.rows.len() {
                return Err(IoError::Mismatch(format!(
                    "{} has {} response rows but {} has {} feature rows",
                    path.display(),
                    t.rows.len(),
                    source.features.display(),
                    features.rows.len()
                )));
            }
            t
        }
        ResponseSource::Adapter { command } => subprocess_adapter(command, &features.rows)?,
    };
    let labels = match &source.labels {
        Some(path) => {
            let l = read_labels(path)?;
            if l.len() != features.rows.len() {
                return Err(IoError::Mismatch(format!(
                    "{} has {} labels but there are {} feature rows",
                    path.display(),
                    l.len(),
                    features.rows.len()
                )));
            }
            Some(l)
        }
        None => None,
    };

    let width = responses.width();
    let column_names: Vec<String> = match &responses.header {
        Some(h) => h.clone(),
        None => (0..width).map(|c| c.to_string()).collect(),
    };
    let wanted: Vec<String> = if classes.is_empty() { column_names.clone() } else { classes.to_vec() };
    let p = features.width();

    wanted
        .iter()
        .map(|class| {
            let column = column_names
                .iter()
                .position(|n| n == class)
                .or_else(|| class.parse::<usize>().ok().filter(|&c| c < width))
                .ok_or_else(|| IoError::Mismatch(format!("no response column for class '{class}'")))?;
            let keep: Vec<usize> = match &labels {
                Some(l) => (0..l.len()).filter(|&i| &l[i] == class).collect(),
                None => (0..features.rows.len()).collect(),
            };
            if keep.is_empty() {
                return Err(IoError::Mismatch(format!("no samples labeled '{class}'")));
            }
            let data: Vec<f64> = keep.iter().flat_map(|&i| features.rows[i].iter().copied()).collect();
            let y = keep.iter().map(|&i| responses.rows[i][column]).collect();
            let x = Matrix::from_row_major(keep.len(), p, data);
            Ok(Dataset::new(x, y, class.clone(), source.response_kind, features.header.clone())?)
        })
        .collect()
}
