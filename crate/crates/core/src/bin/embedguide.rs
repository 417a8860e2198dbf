use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use embedguide::embedding::{
    dmet_effective, embed_solve, huzinaga_effective, schmidt_bath, write_problem, Scheme, DEFAULT_LEVEL_SHIFT,
    SCHMIDT_TOL,
};
use embedguide::harness::{self, resolve_model, ExperimentConfig, LoadedModel, ModelSpec};
use embedguide::io::model_hash;
use embedguide::meanfield::{hartree_fock, MeanFieldOptions};
use embedguide::qpecost::{guiding_gate_counts, qpe_cost, GateParams, GuidingKind, QpeMode};
use embedguide::solver::{ground_state, SolverOptions};
use embedguide::Error;

const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "embedguide", version, about = "Embedding and guiding-state experiments on small fermionic models")]
struct Cli {
    /// Worker threads for parallel kernels (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the sector dimension cap.
    #[arg(long, global = true)]
    max_dim: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task of a config and write CSVs plus a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Ground state of one model, printed as JSON.
    Solve {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Build and solve an embedding problem, printed as JSON.
    Embed {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = parse_scheme)]
        scheme: Scheme,
        /// Comma-separated fragment sites (DMET) or active orbitals (Huzinaga).
        #[arg(long, value_delimiter = ',', required = true)]
        fragment: Vec<usize>,
        #[arg(long)]
        mu: Option<f64>,
        /// Writes the effective Hamiltonian and its JSON sidecar here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Phase-estimation cost and guiding-state gate counts.
    Cost {
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value = "standard")]
        mode: QpeMode,
        /// givens, sum-of-slater, bounded-excitation or mps.
        #[arg(long)]
        gates: Option<GuidingKind>,
        #[arg(long)]
        n_modes: Option<usize>,
        #[arg(long)]
        n_electrons: Option<usize>,
        #[arg(long)]
        l: Option<usize>,
        #[arg(long)]
        k_exc: Option<usize>,
        #[arg(long)]
        bond_dim: Option<usize>,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// Take the model from a config file.
    #[arg(long, conflicts_with_all = ["builtin", "integrals"])]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "integrals")]
    builtin: Option<String>,
    #[arg(long)]
    integrals: Option<PathBuf>,
    #[arg(long)]
    electrons: Option<usize>,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    match s {
        "dmet" => Ok(Scheme::Dmet),
        "huzinaga" => Ok(Scheme::Huzinaga),
        other => Err(format!("unknown scheme '{other}' (dmet or huzinaga)")),
    }
}

struct Failure {
    code: u8,
    record: serde_json::Value,
}

fn validation(msg: impl ToString) -> Failure {
    Failure {
        code: EXIT_VALIDATION,
        record: json!({ "error": "validation", "message": msg.to_string() }),
    }
}

fn runtime(e: Error) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        record: json!({ "error": "runtime", "message": e.to_string() }),
    }
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::load(path).map_err(validation)
}

fn load_model(args: &ModelArgs) -> Result<(LoadedModel, Option<u64>), Failure> {
    let (spec, electrons, seed) = if let Some(path) = &args.config {
        let cfg = load_config(path)?;
        (cfg.model, args.electrons.or(cfg.electrons), Some(cfg.seed))
    } else if let Some(name) = &args.builtin {
        (ModelSpec::Builtin { name: name.clone() }, args.electrons, None)
    } else if let Some(path) = &args.integrals {
        (ModelSpec::File { path: path.clone() }, args.electrons, None)
    } else {
        return Err(validation("one of --config, --builtin or --integrals is required"));
    };
    let model = resolve_model(&spec, electrons).map_err(validation)?;
    if model.n_electrons > model.integrals.n_modes() {
        return Err(validation(format!(
            "{} electrons do not fit in {} modes",
            model.n_electrons,
            model.integrals.n_modes()
        )));
    }
    Ok((model, seed))
}

fn solver_options(cli: &Cli, config_seed: Option<u64>) -> SolverOptions {
    let mut opts = SolverOptions::default();
    if let Some(s) = cli.seed.or(config_seed) {
        opts.seed = s;
    }
    if let Some(d) = cli.max_dim {
        opts.max_dim = d;
    }
    opts
}

/// Sector-size and input errors are the caller's fault.
fn classify(e: Error) -> Failure {
    match e {
        Error::SectorTooLarge { .. } | Error::InvalidInput(_) | Error::InvalidSector(_) | Error::Config(_) => {
            validation(e)
        }
        other => runtime(other),
    }
}

fn execute(cli: &Cli) -> Result<serde_json::Value, Failure> {
    match &cli.command {
        Command::Run { config, out } => {
            let mut cfg = load_config(config)?;
            if let Some(o) = out {
                cfg.output = o.clone();
            }
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(d) = cli.max_dim {
                cfg.max_dim = Some(d);
            }
            let report = harness::run(&cfg).map_err(|e| Failure {
                code: e.exit_code() as u8,
                record: e.to_json(),
            })?;
            Ok(json!({
                "output": report.output,
                "files": report.manifest.tasks.iter().flat_map(|t| t.files.clone()).collect::<Vec<_>>(),
                "wall_time_seconds": report.manifest.wall_time_seconds,
            }))
        }
        Command::Validate { config } => {
            let mut cfg = load_config(config)?;
            if let Some(d) = cli.max_dim {
                cfg.max_dim = Some(d);
            }
            let diagnostics = harness::validate(&cfg);
            if diagnostics.is_empty() {
                Ok(json!({ "diagnostics": [] }))
            } else {
                Err(Failure {
                    code: EXIT_VALIDATION,
                    record: json!({ "error": "validation", "diagnostics": diagnostics }),
                })
            }
        }
        Command::Solve { model } => {
            let (m, seed) = load_model(model)?;
            let opts = solver_options(cli, seed);
            let gs = ground_state(&m.integrals, m.n_electrons, &opts).map_err(classify)?;
            Ok(json!({
                "model": m.name,
                "model_hash": model_hash(&m.integrals, m.n_electrons),
                "n_modes": m.integrals.n_modes(),
                "n_electrons": m.n_electrons,
                "dim": gs.state.dim(),
                "energy": gs.energy,
                "residual": gs.residual,
                "iterations": gs.iterations,
                "degenerate": gs.degenerate,
            }))
        }
        Command::Embed {
            model,
            scheme,
            fragment,
            mu,
            out,
        } => {
            let (m, seed) = load_model(model)?;
            let opts = solver_options(cli, seed);
            let mf = hartree_fock(&m.integrals, m.n_electrons, &MeanFieldOptions::default()).map_err(classify)?;
            let prob = match scheme {
                Scheme::Dmet => {
                    let part = schmidt_bath(&mf.determinant, fragment, SCHMIDT_TOL).map_err(classify)?;
                    dmet_effective(&m.integrals, &part)
                }
                Scheme::Huzinaga => {
                    huzinaga_effective(&m.integrals, &mf, fragment, mu.unwrap_or(DEFAULT_LEVEL_SHIFT))
                }
            }
            .map_err(classify)?;
            let sol = embed_solve(&prob, &opts).map_err(classify)?;
            let hash = model_hash(&m.integrals, m.n_electrons);
            let sidecar = match out {
                Some(dir) => {
                    std::fs::create_dir_all(dir).map_err(|e| runtime(e.into()))?;
                    let provenance = json!({ "model": m.name, "model_hash": hash, "fragment": fragment });
                    Some(write_problem(&prob, dir, "effective", provenance).map_err(runtime)?)
                }
                None => None,
            };
            Ok(json!({
                "model_hash": hash,
                "scheme": scheme,
                "fragment": fragment,
                "n_active_modes": prob.n_active_modes(),
                "n_active": prob.n_active,
                "env_energy": prob.env_energy,
                "e_active": sol.e_active,
                "e_total": sol.e_total,
                "leakage": sol.leakage,
                "sidecar": sidecar,
            }))
        }
        Command::Cost {
            eta,
            eps,
            mode,
            gates,
            n_modes,
            n_electrons,
            l,
            k_exc,
            bond_dim,
        } => {
            if eta.is_none() && eps.is_none() && gates.is_none() {
                return Err(validation("nothing to compute: give --eta and --eps, or --gates"));
            }
            let cost = match (eta, eps) {
                (Some(eta), Some(eps)) => Some(qpe_cost(*eta, *eps, *mode).map_err(classify)?),
                (None, None) => None,
                _ => return Err(validation("--eta and --eps must be given together")),
            };
            let counts = match gates {
                Some(kind) => {
                    let params = GateParams {
                        n_modes: *n_modes,
                        n_electrons: *n_electrons,
                        l: *l,
                        k_exc: *k_exc,
                        bond_dim: *bond_dim,
                    };
                    Some(guiding_gate_counts(*kind, &params).map_err(classify)?)
                }
                None => None,
            };
            Ok(json!({ "cost": cost, "gates": counts }))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("{}", json!({ "error": "runtime", "message": e.to_string() }));
            return ExitCode::from(EXIT_RUNTIME);
        }
    }
    match execute(&cli) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("json value serializes"));
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", f.record);
            ExitCode::from(f.code)
        }
    }
}
