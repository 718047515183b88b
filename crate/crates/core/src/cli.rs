//! The `dpmen` command line.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde_json::json;
use thiserror::Error;

use crate::explain::{
    craft_pathological, default_top_k, export_heatmap, fit_surrogate_with, global_patterns_with, local_explanation_with,
    pattern_similarity, rmse_with, ExplainError, FitOptions, Importance, PredictMode, SurrogateModel,
    DEFAULT_OCCUPANCY_FLOOR,
};
use crate::io::{
    load_dataset, read_matrix_csv, read_model, read_patterns, write_chain, write_diagnostics, write_explanations,
    write_heatmap, write_matrix_csv, write_model, write_patterns, DatasetSource, ExplanationSet, IoError, PatternSet,
    ResponseSource, RunConfig, ShapeHint, SCHEMA_VERSION,
};
use crate::model::{logit_transform_clipped, Dataset, ModelError, ResponseKind};
use crate::rngdist::RandomSource;
use crate::sampler::SamplerError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl CliError {
    /// 2 for numerical collapse, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Explain(ExplainError::Sampler(SamplerError::NumericalCollapse { .. } | SamplerError::Collapse { .. })) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dpmen", version, about = "Mixture-of-elastic-nets surrogate explanations for black-box models")]
pub struct Cli {
    /// Random seed (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Only log errors.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one surrogate per class and write chains and model files.
    Fit(FitArgs),
    /// Approximation error of a model on a dataset.
    Rmse(RmseArgs),
    /// Explain individual samples.
    Explain(ExplainArgs),
    /// Extract global patterns and heat maps.
    Patterns(PatternsArgs),
    /// Randomize the high-energy part of a pattern on base samples.
    Craft(CraftArgs),
    /// Cosine similarity of two patterns.
    Similarity(SimilarityArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Raw,
    Probability,
}

impl From<KindArg> for ResponseKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Raw => ResponseKind::RawScore,
            KindArg::Probability => ResponseKind::Probability,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ImportanceArg {
    Coefficient,
    Contribution,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Feature CSV, one sample per row.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Response CSV, one column per class.
    #[arg(long, conflicts_with = "adapter")]
    pub responses: Option<PathBuf>,
    /// Shell command producing responses (CSV in on stdin, CSV out on stdout).
    #[arg(long)]
    pub adapter: Option<String>,
    /// Response scale.
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    /// Per-sample class labels; restricts each class to its own samples.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// CSV files have no header row.
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Class to fit (repeatable); default is every response column.
    #[arg(long = "class")]
    pub classes: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// Truncation level J.
    #[arg(long)]
    pub truncation: Option<usize>,
    /// Number of elastic-net states K.
    #[arg(long)]
    pub nets: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RmseArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Response column to score against (defaults to the model's class).
    #[arg(long = "class")]
    pub class: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Samples to explain.
    #[arg(long)]
    pub features: PathBuf,
    /// Black-box responses for the samples; improves component assignment.
    #[arg(long)]
    pub responses: Option<PathBuf>,
    #[arg(long)]
    pub no_header: bool,
    /// Row indices to explain (0-based, comma separated); default all.
    #[arg(long, value_delimiter = ',')]
    pub rows: Vec<usize>,
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Image shape ROWSxCOLS, used for the default top_k.
    #[arg(long, value_parser = parse_shape)]
    pub shape: Option<ShapeHint>,
    #[arg(long, value_enum, default_value = "coefficient")]
    pub importance: ImportanceArg,
    /// Write the explanations here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PatternsArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Image shape ROWSxCOLS; heat maps are written when set.
    #[arg(long, value_parser = parse_shape)]
    pub shape: Option<ShapeHint>,
    /// Minimum share of samples a component must hold.
    #[arg(long, default_value_t = DEFAULT_OCCUPANCY_FLOOR)]
    pub floor: f64,
    /// Output directory (default: next to the model).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CraftArgs {
    /// Pattern file written by `patterns`.
    #[arg(long)]
    pub patterns: PathBuf,
    /// Component whose pattern is used (default: the first in the file).
    #[arg(long)]
    pub component: Option<usize>,
    /// Base samples CSV.
    #[arg(long)]
    pub base: PathBuf,
    #[arg(long)]
    pub no_header: bool,
    /// Energy threshold in (0, 1].
    #[arg(long)]
    pub threshold: f64,
    /// Fill range LO,HI.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.0, 1.0])]
    pub range: Vec<f64>,
    /// Crafted samples per base row.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Output CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimilarityArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    /// Component in the first file (default: its first pattern).
    #[arg(long)]
    pub component_a: Option<usize>,
    #[arg(long)]
    pub component_b: Option<usize>,
}

fn parse_shape(s: &str) -> Result<ShapeHint, String> {
    let (r, c) = s.split_once(['x', 'X']).ok_or("expected ROWSxCOLS")?;
    let rows = r.trim().parse().map_err(|_| format!("bad row count '{r}'"))?;
    let cols = c.trim().parse().map_err(|_| format!("bad column count '{c}'"))?;
    if rows == 0 || cols == 0 {
        return Err("shape dimensions must be positive".into());
    }
    Ok(ShapeHint { rows, cols })
}

/// Entry point of the binary: parse, run, print, and return the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`cli_main`] with explicit output streams.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let mut logger = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"));
    if cli.quiet {
        logger.filter_level(log::LevelFilter::Error);
    }
    let _ = logger.format_timestamp(None).try_init();

    match dispatch(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let config = cli.config.as_deref().map(RunConfig::load).transpose()?;
    match &cli.command {
        Command::Fit(a) => fit(cli, config, a, out),
        Command::Rmse(a) => rmse_cmd(cli, a, out),
        Command::Explain(a) => explain_cmd(cli, config.as_ref(), a, out),
        Command::Patterns(a) => patterns_cmd(cli, config.as_ref(), a, out),
        Command::Craft(a) => craft_cmd(cli, a, out),
        Command::Similarity(a) => similarity_cmd(cli, a, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    writeln!(out, "{text}").map_err(|e| IoError::File { path: PathBuf::from("<stdout>"), source: e }.into())
}

fn emit_json(out: &mut dyn Write, value: &serde_json::Value) -> Result<(), CliError> {
    emit(out, &serde_json::to_string_pretty(value).expect("json value serializes"))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| IoError::File { path: path.to_path_buf(), source: e })?;
    Ok(())
}

/// Move probability responses to the logit scale, clipping saturated ones.
fn fit_scale(data: Dataset) -> Result<Dataset, CliError> {
    if data.response_kind() != ResponseKind::Probability {
        return Ok(data);
    }
    let (t, clipped) = logit_transform_clipped(&data)?;
    if clipped > 0 {
        warn!("class {}: clipped {clipped} saturated probabilities before the logit transform", data.class_id());
    }
    Ok(t)
}

fn fit(cli: &Cli, config: Option<RunConfig>, a: &FitArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = match config {
        Some(c) => c,
        None => {
            let features = a.data.features.clone().ok_or_else(|| CliError::Usage("fit needs --features or --config".into()))?;
            let mut c = RunConfig::new(features, PathBuf::new());
            c.responses = None;
            c
        }
    };
    if let Some(f) = &a.data.features {
        cfg.features = f.clone();
    }
    if let Some(r) = &a.data.responses {
        cfg.responses = Some(r.clone());
        cfg.adapter = None;
    }
    if let Some(c) = &a.data.adapter {
        cfg.adapter = Some(c.clone());
        cfg.responses = None;
    }
    if let Some(k) = a.data.kind {
        cfg.response_kind = k.into();
    }
    if let Some(l) = &a.data.labels {
        cfg.labels = Some(l.clone());
    }
    if a.data.no_header {
        cfg.features_header = false;
        cfg.responses_header = false;
    }
    if !a.classes.is_empty() {
        cfg.classes = a.classes.clone();
    }
    if let Some(o) = &a.out {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.chains {
        cfg.n_chains = n;
    }
    let h = &mut cfg.hyper;
    for (flag, slot) in [
        (a.iterations, &mut h.n_iter),
        (a.burn_in, &mut h.burn_in),
        (a.thin, &mut h.thin),
        (a.truncation, &mut h.truncation),
        (a.nets, &mut h.n_nets),
    ] {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    cfg.validate()?;

    let datasets = load_dataset(&cfg.dataset_source(), &cfg.classes)?;
    if let Some(bad) = datasets.iter().find(|d| !crate::io::is_safe_class_id(d.class_id())) {
        return Err(CliError::Usage(format!("class id '{}' cannot be used as a directory name", bad.class_id())));
    }
    let options = FitOptions { standardize: cfg.standardize, n_chains: cfg.n_chains };
    let mut reports = Vec::new();
    for data in datasets {
        let data = fit_scale(data)?;
        let dir = cfg.output_dir.join(data.class_id());
        create_dir(&dir)?;
        info!("class {}: fitting n = {}, p = {} with {} chain(s)", data.class_id(), data.n(), data.p(), cfg.n_chains);
        let fitted = match fit_surrogate_with(&data, &cfg.hyper, cfg.seed, options) {
            Ok(f) => f,
            Err(ExplainError::Sampler(SamplerError::NumericalCollapse { iteration, stage, last_good })) => {
                let path = dir.join("last_good_state.json");
                let text = serde_json::to_string_pretty(&last_good).expect("state serializes");
                std::fs::write(&path, text).map_err(|e| IoError::File { path: path.clone(), source: e })?;
                warn!("last good state written to {}", path.display());
                return Err(ExplainError::Sampler(SamplerError::NumericalCollapse { iteration, stage, last_good }).into());
            }
            Err(e) => return Err(e.into()),
        };
        let mut chain_files = Vec::new();
        for (k, (chain, diag)) in fitted.chains.iter().zip(&fitted.diagnostics).enumerate() {
            let chain_path = dir.join(format!("chain_{k}.bin"));
            write_chain(&chain_path, chain)?;
            write_diagnostics(&dir.join(format!("diagnostics_{k}.csv")), diag)?;
            chain_files.push(chain_path);
        }
        let merged = fitted.model.chain.as_ref().expect("fresh fit keeps its chain");
        write_chain(&dir.join("chain.bin"), merged)?;
        let model_path = dir.join("model.json");
        write_model(&model_path, &fitted.model, Some("chain.bin"))?;
        let error = rmse_with(&fitted.model, &data, PredictMode::MostProbable)?;
        let occupied = fitted.model.occupancy.iter().filter(|&&o| o >= DEFAULT_OCCUPANCY_FLOOR * data.n() as f64).count();
        reports.push(json!({
            "class_id": data.class_id(),
            "model": model_path,
            "chains": chain_files,
            "n_samples": data.n(),
            "n_features": data.p(),
            "occupied_components": occupied,
            "rmse": error,
        }));
        if !cli.json {
            emit(out, &format!("{}\t{}\trmse={error:.6}\tcomponents={occupied}", data.class_id(), model_path.display()))?;
        }
    }
    if cli.json {
        emit_json(out, &json!({ "schema_version": SCHEMA_VERSION, "classes": reports }))?;
    }
    Ok(())
}

fn rmse_cmd(cli: &Cli, a: &RmseArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let model = read_model(&a.model)?;
    let features = a.data.features.clone().ok_or_else(|| CliError::Usage("rmse needs --features".into()))?;
    let responses = match (&a.data.responses, &a.data.adapter) {
        (Some(path), _) => ResponseSource::Csv { path: path.clone(), header: !a.data.no_header },
        (None, Some(command)) => ResponseSource::Adapter { command: command.clone() },
        (None, None) => return Err(CliError::Usage("rmse needs --responses or --adapter".into())),
    };
    let kind = match (a.data.kind, model.response_kind) {
        (Some(k), _) => k.into(),
        (None, ResponseKind::LogitTransformed) => ResponseKind::Probability,
        (None, k) => k,
    };
    let source = DatasetSource {
        features,
        features_header: !a.data.no_header,
        responses,
        response_kind: kind,
        labels: a.data.labels.clone(),
    };
    let class = a.class.clone().unwrap_or_else(|| model.class_id.clone());
    let data = load_dataset(&source, std::slice::from_ref(&class))?.remove(0);
    let data = fit_scale(data)?;
    let error = rmse_with(&model, &data, PredictMode::MostProbable)?;
    let mixture = rmse_with(&model, &data, PredictMode::MixtureMean)?;
    if cli.json {
        emit_json(
            out,
            &json!({
                "schema_version": SCHEMA_VERSION,
                "class_id": model.class_id,
                "n_samples": data.n(),
                "rmse": error,
                "rmse_mixture_mean": mixture,
            }),
        )
    } else {
        emit(out, &format!("{error}"))
    }
}

fn explain_cmd(cli: &Cli, config: Option<&RunConfig>, a: &ExplainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let model = read_model(&a.model)?;
    let table = read_matrix_csv(&a.features, !a.no_header)?;
    let responses = match &a.responses {
        Some(path) => {
            let t = read_matrix_csv(path, !a.no_header)?;
            if t.rows.len() != table.rows.len() {
                return Err(IoError::Mismatch(format!(
                    "{} has {} rows but {} has {}",
                    path.display(),
                    t.rows.len(),
                    a.features.display(),
                    table.rows.len()
                ))
                .into());
            }
            let column = match &t.header {
                Some(h) => h.iter().position(|n| *n == model.class_id),
                None => None,
            }
            .or_else(|| model.class_id.parse::<usize>().ok().filter(|&c| c < t.width()))
            .or(if t.width() == 1 { Some(0) } else { None })
            .ok_or_else(|| IoError::Mismatch(format!("no response column for class '{}'", model.class_id)))?;
            let raw: Vec<f64> = t.rows.iter().map(|r| r[column]).collect();
            Some(to_model_scale(&model, raw)?)
        }
        None => None,
    };
    let shape = a.shape.or(config.and_then(|c| c.shape));
    let top_k = a
        .top_k
        .or(config.and_then(|c| c.top_k))
        .unwrap_or_else(|| default_top_k(shape.map(|s| (s.rows, s.cols))));
    let importance = match a.importance {
        ImportanceArg::Coefficient => Importance::Coefficient,
        ImportanceArg::Contribution => Importance::Contribution,
    };
    let rows: Vec<usize> = if a.rows.is_empty() { (0..table.rows.len()).collect() } else { a.rows.clone() };
    let mut explanations = Vec::with_capacity(rows.len());
    for &i in &rows {
        let x = table
            .rows
            .get(i)
            .ok_or_else(|| CliError::Usage(format!("row {i} is out of range ({} rows)", table.rows.len())))?;
        let mut e = local_explanation_with(&model, x, top_k, responses.as_ref().map(|r| r[i]), importance)?;
        e.sample_index = Some(i);
        explanations.push(e);
    }
    let set = ExplanationSet {
        schema_version: SCHEMA_VERSION,
        class_id: model.class_id.clone(),
        top_k,
        importance,
        explanations,
    };
    match &a.out {
        Some(path) => {
            write_explanations(path, &set)?;
            if cli.json {
                emit_json(out, &serde_json::to_value(&set).expect("explanations serialize"))
            } else {
                emit(out, &format!("{} explanations written to {}", set.explanations.len(), path.display()))
            }
        }
        None => emit_json(out, &serde_json::to_value(&set).expect("explanations serialize")),
    }
}

fn to_model_scale(model: &SurrogateModel, raw: Vec<f64>) -> Result<Vec<f64>, CliError> {
    if model.response_kind != ResponseKind::LogitTransformed {
        return Ok(raw);
    }
    let n = raw.len();
    let x = crate::linalg::Matrix::zeros(n, 1);
    let data = Dataset::new(x, raw, model.class_id.clone(), ResponseKind::Probability, None)?;
    Ok(fit_scale(data)?.y().to_vec())
}

fn patterns_cmd(cli: &Cli, config: Option<&RunConfig>, a: &PatternsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let model = read_model(&a.model)?;
    let shape = a.shape.or(config.and_then(|c| c.shape));
    let top_k = a
        .top_k
        .or(config.and_then(|c| c.top_k))
        .unwrap_or_else(|| default_top_k(shape.map(|s| (s.rows, s.cols))));
    let patterns = global_patterns_with(&model, top_k, a.floor)?;
    let dir = a
        .out
        .clone()
        .unwrap_or_else(|| a.model.parent().map(Path::to_path_buf).unwrap_or_default());
    create_dir(&dir)?;
    let mut heatmaps = Vec::new();
    if let Some(s) = shape {
        for p in &patterns {
            let matrix = export_heatmap(p, (s.rows, s.cols))?;
            let path = dir.join(format!("heatmap_{}.csv", p.component));
            write_heatmap(&path, &matrix)?;
            heatmaps.push(path);
        }
    }
    let set = PatternSet {
        schema_version: SCHEMA_VERSION,
        class_id: model.class_id.clone(),
        top_k,
        occupancy_floor: a.floor,
        patterns,
    };
    let path = dir.join("patterns.json");
    write_patterns(&path, &set)?;
    if cli.json {
        emit_json(
            out,
            &json!({
                "schema_version": SCHEMA_VERSION,
                "class_id": set.class_id,
                "patterns_file": path,
                "heatmaps": heatmaps,
                "components": set.patterns.iter().map(|p| p.component).collect::<Vec<_>>(),
            }),
        )
    } else {
        for p in &set.patterns {
            let support: Vec<String> = p.support.iter().map(usize::to_string).collect();
            emit(out, &format!("component {}: {}", p.component, support.join(" ")))?;
        }
        Ok(())
    }
}

fn pick_pattern(set: &PatternSet, component: Option<usize>, path: &Path) -> Result<crate::explain::Pattern, CliError> {
    match component {
        Some(j) => set.patterns.iter().find(|p| p.component == j).cloned().ok_or_else(|| {
            CliError::Usage(format!("{} has no pattern for component {j}", path.display()))
        }),
        None => set
            .patterns
            .first()
            .cloned()
            .ok_or_else(|| CliError::Usage(format!("{} holds no patterns", path.display()))),
    }
}

fn craft_cmd(cli: &Cli, a: &CraftArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let set = read_patterns(&a.patterns)?;
    let pattern = pick_pattern(&set, a.component, &a.patterns)?;
    let base = read_matrix_csv(&a.base, !a.no_header)?;
    let mut src = RandomSource::new(cli.seed.unwrap_or(0));
    let range = match a.range[..] {
        [lo, hi] => (lo, hi),
        _ => return Err(CliError::Usage(format!("--range takes LO,HI, got {} values", a.range.len()))),
    };
    let mut crafted = Vec::with_capacity(base.rows.len() * a.repeats);
    for row in &base.rows {
        for _ in 0..a.repeats {
            crafted.push(craft_pathological(&pattern, row, a.threshold, range, &mut src)?);
        }
    }
    match &a.out {
        Some(path) => {
            write_matrix_csv(path, base.header.as_deref(), &crafted)?;
            if cli.json {
                emit_json(out, &json!({ "schema_version": SCHEMA_VERSION, "samples": crafted.len(), "file": path }))
            } else {
                emit(out, &format!("{} samples written to {}", crafted.len(), path.display()))
            }
        }
        None => {
            if let Some(h) = &base.header {
                emit(out, &h.join(","))?;
            }
            for r in &crafted {
                let line: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
                emit(out, &line.join(","))?;
            }
            Ok(())
        }
    }
}

fn similarity_cmd(cli: &Cli, a: &SimilarityArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let sa = read_patterns(&a.a)?;
    let sb = read_patterns(&a.b)?;
    let pa = pick_pattern(&sa, a.component_a, &a.a)?;
    let pb = pick_pattern(&sb, a.component_b, &a.b)?;
    let score = pattern_similarity(&pa, &pb)?;
    if cli.json {
        emit_json(
            out,
            &json!({
                "schema_version": SCHEMA_VERSION,
                "a": { "class_id": sa.class_id, "component": pa.component },
                "b": { "class_id": sb.class_id, "component": pb.component },
                "similarity": score,
            }),
        )
    } else {
        emit(out, &format!("{score}"))
    }
}
