//! Writes the bundled synthetic datasets and their run configs.
//!
//! cargo run --example synthetic -- data

use std::path::{Path, PathBuf};

use dpmen::io::{write_matrix_csv, RunConfig};
use dpmen::model::Hyperparameters;
use dpmen::rngdist::RandomSource;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn write_set(dir: &Path, rows: &[Vec<f64>], y: &[f64], hyper: Hyperparameters, seed: u64) {
    std::fs::create_dir_all(dir).unwrap();
    let names: Vec<String> = (0..rows[0].len()).map(|c| format!("x{c}")).collect();
    write_matrix_csv(&dir.join("features.csv"), Some(&names), rows).unwrap();
    let y: Vec<Vec<f64>> = y.iter().map(|&v| vec![v]).collect();
    write_matrix_csv(&dir.join("responses.csv"), Some(&["target".to_string()]), &y).unwrap();
    let mut cfg = RunConfig::new(PathBuf::from("features.csv"), PathBuf::from("responses.csv"));
    cfg.hyper = hyper;
    cfg.seed = seed;
    let text = serde_json::to_string_pretty(&cfg).unwrap();
    std::fs::write(dir.join("config.json"), text + "\n").unwrap();
}

fn main() {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    let mut src = RandomSource::new(2024);

    // two linear regimes, alternating samples
    let b1 = [1.0, -2.0, 0.5, 0.0, 1.5];
    let b2 = [-1.5, 0.5, 2.0, -1.0, 0.0];
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..1000 {
        let x: Vec<f64> = (0..5).map(|_| src.standard_normal()).collect();
        let b = if i % 2 == 0 { &b1 } else { &b2 };
        y.push(dot(&x, b) + 0.1 * src.standard_normal());
        rows.push(x);
    }
    let hyper = Hyperparameters { truncation: 10, n_nets: 2, n_iter: 4000, burn_in: 2000, ..Default::default() };
    write_set(&root.join("mixture"), &rows, &y, hyper.clone(), 7);

    // piecewise-linear target: the sign of x0 selects the active features
    let left = [0.0, 2.0, -1.5, 1.0, 0.0, 0.0, 0.0, 0.0];
    let right = [0.0, 0.0, 0.0, 0.0, 0.0, -2.0, 1.5, 1.0];
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..600 {
        let x: Vec<f64> = (0..8).map(|_| src.standard_normal()).collect();
        let b = if x[0] < 0.0 { &left } else { &right };
        y.push(dot(&x, b) + 0.1 * src.standard_normal());
        rows.push(x);
    }
    write_set(&root.join("piecewise"), &rows, &y, hyper, 11);
}
