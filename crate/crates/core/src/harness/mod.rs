//! Experiment runner: loads a config, checks it, executes tasks in order and
//! writes one CSV per task plus `manifest.json`.
//!
//! Output files are named `NN_<task>.csv` with `NN` the zero-based task
//! index. Every row starts with the provenance columns `seed` and
//! `model_hash` (the ensemble table carries `model_hash` last). Floats are
//! written as `{:.15e}`.

pub mod config;
pub mod models;
pub mod table;
pub mod tasks;

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

pub use config::{ExperimentConfig, GuidingSpec, ModelSpec, TaskSpec};
pub use models::{builtin, LoadedModel, BUILTIN_NAMES};
pub use table::Table;

use crate::embedding::Scheme;
use crate::error::{Error, Result};
use crate::fock::{binomial, DEFAULT_MAX_DIM, MAX_MODES};
use crate::io::read_integrals;
use crate::model::{build_impurity_model, hubbard, random_model};
use crate::qpecost::QpeMode;
use crate::states::MPS_MAX_MODES;
use tasks::{run_task, Context};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    /// `model`, `electrons` or `tasks[i]`.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

pub fn resolve_model(spec: &ModelSpec, electrons: Option<usize>) -> Result<LoadedModel> {
    let need_n = || electrons.ok_or_else(|| Error::Config("'electrons' is required for this model".into()));
    let mut loaded = match spec {
        ModelSpec::Builtin { name } => builtin(name)?,
        ModelSpec::File { path } => {
            if !path.exists() {
                return Err(Error::Config(format!("integrals file '{}' does not exist", path.display())));
            }
            let f = read_integrals(path)?;
            LoadedModel {
                name: path.display().to_string(),
                integrals: f.integrals,
                n_electrons: f.n_electrons,
                impurity: None,
            }
        }
        ModelSpec::Impurity {
            n_modes,
            m,
            epsilons,
            interaction,
            hybridization,
            seed,
        } => {
            let model = build_impurity_model(*n_modes, *m, epsilons, interaction, *hybridization, *seed)?;
            LoadedModel {
                name: "impurity".into(),
                integrals: model.integrals.clone(),
                n_electrons: need_n()?,
                impurity: Some(model),
            }
        }
        ModelSpec::Random { n_modes, seed } => LoadedModel {
            name: "random".into(),
            integrals: random_model(*n_modes, *seed)?,
            n_electrons: need_n()?,
            impurity: None,
        },
        ModelSpec::Hubbard { n_sites, t, u, periodic } => LoadedModel {
            name: "hubbard".into(),
            integrals: hubbard(*n_sites, *t, *u, *periodic)?,
            n_electrons: need_n()?,
            impurity: None,
        },
    };
    if let Some(n) = electrons {
        loaded.n_electrons = n;
    }
    Ok(loaded)
}

fn sector_check(n_modes: usize, n: usize, cap: usize) -> Option<String> {
    if n > n_modes {
        return Some(format!("{n} electrons do not fit in {n_modes} modes"));
    }
    let dim = binomial(n_modes, n);
    (dim > cap as u128).then(|| format!("sector dimension binomial({n_modes}, {n}) = {dim} exceeds cap {cap}"))
}

fn needs_model_sector(task: &TaskSpec) -> bool {
    match task {
        TaskSpec::ImpurityEnsemble { .. } => false,
        TaskSpec::QpeCost { eta, .. } => eta.is_none(),
        TaskSpec::Oligomer { monomer, .. } => monomer.is_none(),
        _ => true,
    }
}

fn unique_sorted(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

/// Static checks without running any solver. Returns an empty list for a
/// runnable config.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut diag = |location: String, message: String| out.push(Diagnostic { location, message });
    let cap = cfg.max_dim.unwrap_or(DEFAULT_MAX_DIM);
    if cap == 0 {
        diag("max_dim".into(), "cap must be positive".into());
    }
    let model = match resolve_model(&cfg.model, cfg.electrons) {
        Ok(m) => Some(m),
        Err(e) => {
            let message = match e {
                Error::Config(s) => s,
                other => other.to_string(),
            };
            diag("model".into(), message);
            None
        }
    };
    if cfg.tasks.is_empty() {
        diag("tasks".into(), "no tasks".into());
    }
    if let Some(m) = &model {
        let n_modes = m.integrals.n_modes();
        if cfg.tasks.iter().any(needs_model_sector) {
            if let Some(msg) = sector_check(n_modes, m.n_electrons, cap) {
                diag("electrons".into(), msg);
            }
        }
    }
    for (i, task) in cfg.tasks.iter().enumerate() {
        let loc = format!("tasks[{i}] ({})", task.name());
        let n_modes = model.as_ref().map(|m| m.integrals.n_modes());
        match task {
            TaskSpec::Solve {} | TaskSpec::MeanField {} => {}
            TaskSpec::Embed { scheme, fragment, mu } => {
                if fragment.is_empty() {
                    diag(loc.clone(), "empty fragment".into());
                } else if !unique_sorted(fragment) {
                    diag(loc.clone(), "fragment indices must be strictly increasing".into());
                }
                if let Some(n) = n_modes {
                    if let Some(&bad) = fragment.iter().find(|&&p| p >= n) {
                        diag(loc.clone(), format!("fragment index {bad} out of range for {n} modes"));
                    }
                }
                match (scheme, mu) {
                    (Scheme::Dmet, Some(_)) => diag(loc.clone(), "level shift 'mu' applies to huzinaga only".into()),
                    (Scheme::Huzinaga, Some(mu)) if !(*mu > 0.0) => {
                        diag(loc.clone(), format!("level shift mu = {mu} must be positive"))
                    }
                    _ => {}
                }
            }
            TaskSpec::Guiding { guide } => match guide {
                GuidingSpec::Hf {} => {}
                GuidingSpec::Sos { l } => {
                    if l.as_ref().is_some_and(|v| v.is_empty() || v.contains(&0)) {
                        diag(loc.clone(), "L values must be a nonempty list of positive integers".into());
                    }
                }
                GuidingSpec::Mps { d } => {
                    if d.as_ref().is_some_and(|v| v.is_empty() || v.contains(&0)) {
                        diag(loc.clone(), "D values must be a nonempty list of positive integers".into());
                    }
                    if let Some(n) = n_modes.filter(|&n| n > MPS_MAX_MODES) {
                        diag(loc.clone(), format!("MPS compression limited to {MPS_MAX_MODES} modes, model has {n}"));
                    }
                }
                GuidingSpec::Theorem1 { k } => match &model {
                    Some(m) => match &m.impurity {
                        None => diag(loc.clone(), format!("model '{}' is not an impurity model", m.name)),
                        Some(imp) => {
                            if k.is_empty() {
                                diag(loc.clone(), "empty K list".into());
                            }
                            for &kk in k {
                                if kk < 2 * imp.m || kk > imp.n_modes() {
                                    diag(
                                        loc.clone(),
                                        format!("K = {kk} outside [{}, {}]", 2 * imp.m, imp.n_modes()),
                                    );
                                }
                            }
                        }
                    },
                    None => {}
                },
            },
            TaskSpec::Oligomer { k, coupling, monomer } => {
                let mono = match monomer {
                    Some(name) => match builtin(name) {
                        Ok(m) => Some(m),
                        Err(e) => {
                            diag(loc.clone(), e.to_string());
                            None
                        }
                    },
                    None => model.clone(),
                };
                if k.is_empty() || k.contains(&0) {
                    diag(loc.clone(), "k values must be a nonempty list of positive integers".into());
                }
                if coupling.is_some_and(|c| !c.is_finite()) {
                    diag(loc.clone(), "coupling must be finite".into());
                }
                if let Some(mono) = mono {
                    let nm = mono.integrals.n_modes();
                    for &kk in k.iter().filter(|&&kk| kk > 0) {
                        if kk * nm > MAX_MODES {
                            diag(loc.clone(), format!("k = {kk} gives {} modes, above {MAX_MODES}", kk * nm));
                        } else if let Some(msg) = sector_check(kk * nm, kk * mono.n_electrons, cap) {
                            diag(loc.clone(), format!("k = {kk}: {msg}"));
                        }
                    }
                }
            }
            TaskSpec::ImpurityEnsemble {
                count,
                n_modes,
                m,
                n_electrons,
                gap,
                k_values,
                magnitude,
                ..
            } => {
                if *count == 0 {
                    diag(loc.clone(), "count must be positive".into());
                }
                if *m == 0 || m > n_modes {
                    diag(loc.clone(), format!("impurity size M = {m} outside 1..={n_modes}"));
                }
                if *n_modes > MAX_MODES {
                    diag(loc.clone(), format!("{n_modes} modes above {MAX_MODES}"));
                } else if let Some(msg) = sector_check(*n_modes, *n_electrons, cap) {
                    diag(loc.clone(), msg);
                }
                if !(*gap > 0.0 && *gap <= 1.0) {
                    diag(loc.clone(), format!("gap {gap} outside (0, 1]"));
                }
                if !(*magnitude >= 0.0) {
                    diag(loc.clone(), format!("magnitude {magnitude} must be nonnegative"));
                }
                let ks = k_values.clone().unwrap_or_else(|| vec![2 * m + 2]);
                for kk in ks {
                    if kk < 2 * m || kk > *n_modes {
                        diag(loc.clone(), format!("K = {kk} outside [{}, {n_modes}]", 2 * m));
                    }
                }
            }
            TaskSpec::QpeCost { eta, eps, mode } => {
                if !(*eps > 0.0 && eps.is_finite()) {
                    diag(loc.clone(), format!("precision eps = {eps} must be positive"));
                }
                if let Some(eta) = eta {
                    if !(*eta > 0.0 && *eta <= 1.0) {
                        diag(loc.clone(), format!("overlap eta = {eta} outside (0, 1]"));
                    } else if *mode == QpeMode::HighOverlap && 1.0 - eta * eta >= 0.5 {
                        diag(loc.clone(), format!("high-overlap mode needs eta^2 > 1/2, got eta = {eta}"));
                    }
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct TaskRecord {
    pub index: usize,
    pub task: String,
    pub files: Vec<String>,
    pub rows: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelRecord {
    pub name: String,
    pub hash: String,
    pub n_modes: usize,
    pub n_electrons: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub model: ModelRecord,
    pub seed: u64,
    pub max_dim: usize,
    pub threads: usize,
    pub tasks: Vec<TaskRecord>,
    pub started_unix: u64,
    pub wall_time_seconds: f64,
}

#[derive(Debug)]
pub struct RunReport {
    pub output: PathBuf,
    pub manifest: Manifest,
    /// `(file name, table)` in write order.
    pub tables: Vec<(String, Table)>,
}

impl RunReport {
    pub fn table(&self, file: &str) -> Option<&Table> {
        self.tables.iter().find(|(f, _)| f == file).map(|(_, t)| t)
    }
}

#[derive(Debug)]
pub enum RunError {
    Validation(Vec<Diagnostic>),
    Task { index: usize, task: String, error: Error },
    Output(Error),
}

impl RunError {
    /// 2 for validation failures, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => 2,
            _ => 3,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            RunError::Validation(d) => serde_json::json!({
                "error": "validation",
                "diagnostics": d,
            }),
            RunError::Task { index, task, error } => serde_json::json!({
                "error": "runtime",
                "task_index": index,
                "task": task,
                "message": error.to_string(),
            }),
            RunError::Output(e) => serde_json::json!({
                "error": "runtime",
                "message": e.to_string(),
            }),
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Validation(d) => {
                write!(f, "invalid config:")?;
                for x in d {
                    write!(f, "\n  {x}")?;
                }
                Ok(())
            }
            RunError::Task { index, task, error } => write!(f, "task {index} ({task}) failed: {error}"),
            RunError::Output(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RunError {}

fn write_file(path: &Path, contents: &str) -> std::result::Result<(), RunError> {
    std::fs::write(path, contents).map_err(|e| RunError::Output(Error::Io(e)))
}

/// Validates, then executes the tasks in order into `cfg.output`.
pub fn run(cfg: &ExperimentConfig) -> std::result::Result<RunReport, RunError> {
    let diagnostics = validate(cfg);
    if !diagnostics.is_empty() {
        return Err(RunError::Validation(diagnostics));
    }
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    std::fs::create_dir_all(&cfg.output).map_err(|e| RunError::Output(Error::Io(e)))?;
    let model = resolve_model(&cfg.model, cfg.electrons).map_err(RunError::Output)?;
    let max_dim = cfg.max_dim.unwrap_or(DEFAULT_MAX_DIM);
    let mut ctx = Context::new(model, cfg.seed, max_dim);
    let mut records = Vec::new();
    let mut tables = Vec::new();
    for (index, task) in cfg.tasks.iter().enumerate() {
        let t0 = Instant::now();
        let name = task.name();
        let output = run_task(&mut ctx, task).map_err(|error| RunError::Task {
            index,
            task: name.to_string(),
            error,
        })?;
        let mut files = Vec::new();
        let mut rows = 0;
        for (suffix, table) in output.tables {
            let file = format!("{index:02}_{name}{suffix}.csv");
            let csv = table.to_csv().map_err(RunError::Output)?;
            write_file(&cfg.output.join(&file), &csv)?;
            rows += table.rows.len();
            files.push(file.clone());
            tables.push((file, table));
        }
        if let Some(json) = output.json {
            let file = format!("{index:02}_{name}.json");
            let text = serde_json::to_string_pretty(&json).expect("json value serializes");
            write_file(&cfg.output.join(&file), &text)?;
            files.push(file);
        }
        records.push(TaskRecord {
            index,
            task: name.to_string(),
            files,
            rows,
            seconds: t0.elapsed().as_secs_f64(),
        });
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        model: ModelRecord {
            name: ctx.model.name.clone(),
            hash: ctx.hash.clone(),
            n_modes: ctx.model.integrals.n_modes(),
            n_electrons: ctx.model.n_electrons,
        },
        seed: cfg.seed,
        max_dim,
        threads: rayon::current_num_threads(),
        tasks: records,
        started_unix,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&cfg.output.join("manifest.json"), &text)?;
    Ok(RunReport {
        output: cfg.output.clone(),
        manifest,
        tables,
    })
}
