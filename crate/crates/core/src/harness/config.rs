//! Experiment configuration: one JSON document per run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embedding::Scheme;
use crate::error::{Error, Result};
use crate::model::{EpsilonSpec, Hybridization, ImpuritySpec};
use crate::qpecost::QpeMode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    /// Required unless the model carries its own electron count.
    #[serde(default)]
    pub electrons: Option<usize>,
    pub tasks: Vec<TaskSpec>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Sector dimension cap; defaults to `fock::DEFAULT_MAX_DIM`.
    #[serde(default)]
    pub max_dim: Option<usize>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Builtin {
        name: String,
    },
    /// Integral file; relative paths resolve against the working directory.
    File {
        path: PathBuf,
    },
    Impurity {
        n_modes: usize,
        m: usize,
        epsilons: EpsilonSpec,
        interaction: ImpuritySpec,
        #[serde(default)]
        hybridization: Hybridization,
        seed: u64,
    },
    Random {
        n_modes: usize,
        seed: u64,
    },
    Hubbard {
        n_sites: usize,
        t: f64,
        u: f64,
        #[serde(default)]
        periodic: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSpec {
    Solve {},
    MeanField {},
    Embed {
        scheme: Scheme,
        /// Fragment sites for DMET; active mean-field orbital indices for
        /// Huzinaga.
        fragment: Vec<usize>,
        /// Level shift, Huzinaga only.
        #[serde(default)]
        mu: Option<f64>,
    },
    Guiding {
        guide: GuidingSpec,
    },
    Oligomer {
        k: Vec<usize>,
        /// Uniform inter-monomer hopping scale; `null` for decoupled copies.
        #[serde(default)]
        coupling: Option<f64>,
        /// Builtin monomer; defaults to the configured model.
        #[serde(default)]
        monomer: Option<String>,
    },
    ImpurityEnsemble {
        count: usize,
        n_modes: usize,
        m: usize,
        n_electrons: usize,
        gap: f64,
        /// Defaults to the global seed.
        #[serde(default)]
        seed: Option<u64>,
        /// Active sizes; defaults to `[2M + 2]`.
        #[serde(default)]
        k_values: Option<Vec<usize>>,
        #[serde(default = "default_magnitude")]
        magnitude: f64,
    },
    QpeCost {
        /// Defaults to the Hartree-Fock overlap of the configured model.
        #[serde(default)]
        eta: Option<f64>,
        eps: f64,
        mode: QpeMode,
    },
}

fn default_magnitude() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GuidingSpec {
    Hf {},
    /// `null` sweeps `L = 1..=dim`.
    Sos {
        #[serde(default)]
        l: Option<Vec<usize>>,
    },
    /// `null` sweeps `D = 1, 2, 4, ...` up to the lossless bond dimension.
    Mps {
        #[serde(default)]
        d: Option<Vec<usize>>,
    },
    Theorem1 {
        k: Vec<usize>,
    },
}

impl TaskSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TaskSpec::Solve {} => "solve",
            TaskSpec::MeanField {} => "mean_field",
            TaskSpec::Embed { .. } => "embed",
            TaskSpec::Guiding { guide } => match guide {
                GuidingSpec::Hf {} => "guiding_hf",
                GuidingSpec::Sos { .. } => "guiding_sos",
                GuidingSpec::Mps { .. } => "guiding_mps",
                GuidingSpec::Theorem1 { .. } => "guiding_theorem1",
            },
            TaskSpec::Oligomer { .. } => "oligomer",
            TaskSpec::ImpurityEnsemble { .. } => "impurity_ensemble",
            TaskSpec::QpeCost { .. } => "qpe_cost",
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}
