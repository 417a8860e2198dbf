//! Task implementations. Each task returns fixed-column tables.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{GuidingSpec, TaskSpec};
use super::models::{builtin, LoadedModel};
use super::table::{fmt_f64, Table};
use crate::analysis::{decay_report, one_rdm, DecayReport, OneBodyRDM};
use crate::embedding::{
    dmet_effective, embed_solve, huzinaga_effective, schmidt_bath, Scheme, DEFAULT_LEVEL_SHIFT, SCHMIDT_TOL,
};
use crate::error::{Error, Result};
use crate::impurity::{max_excitations, mixed_guiding_overlap, particle_hole, select_active, theorem1_state};
use crate::io::model_hash;
use crate::linalg::to_complex;
use crate::meanfield::{hartree_fock, MeanFieldOptions, MeanFieldResult};
use crate::model::{build_impurity_model, build_oligomer, Coupling, EpsilonSpec, Hybridization, ImpurityModel, ImpuritySpec};
use crate::qpecost::qpe_cost;
use crate::solver::{expectation, ground_state, GroundStateResult, SolverOptions};
use crate::states::{determinant_to_wavefunction, mps_compress, mps_to_wavefunction, sum_of_slater};

/// Excitation amplitudes below this count as zero when measuring `K_exc`.
pub const EXCITATION_TOL: f64 = 1e-9;

pub struct TaskOutput {
    /// `(suffix, table)`; the first table has an empty suffix.
    pub tables: Vec<(String, Table)>,
    pub json: Option<serde_json::Value>,
}

impl TaskOutput {
    fn single(t: Table) -> Self {
        TaskOutput {
            tables: vec![(String::new(), t)],
            json: None,
        }
    }
}

/// Shared state for the tasks of one run. Ground state and mean field are
/// computed on first use.
pub struct Context {
    pub model: LoadedModel,
    pub hash: String,
    pub seed: u64,
    pub max_dim: usize,
    gs: Option<GroundStateResult>,
    mf: Option<MeanFieldResult>,
}

impl Context {
    pub fn new(model: LoadedModel, seed: u64, max_dim: usize) -> Self {
        let hash = model_hash(&model.integrals, model.n_electrons);
        Context {
            model,
            hash,
            seed,
            max_dim,
            gs: None,
            mf: None,
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            seed: self.seed,
            max_dim: self.max_dim,
            ..SolverOptions::default()
        }
    }

    pub fn ground_state(&mut self) -> Result<&GroundStateResult> {
        if self.gs.is_none() {
            let opts = self.solver_options();
            self.gs = Some(ground_state(&self.model.integrals, self.model.n_electrons, &opts)?);
        }
        Ok(self.gs.as_ref().expect("set above"))
    }

    pub fn mean_field(&mut self) -> Result<&MeanFieldResult> {
        if self.mf.is_none() {
            self.mf = Some(hartree_fock(
                &self.model.integrals,
                self.model.n_electrons,
                &MeanFieldOptions::default(),
            )?);
        }
        Ok(self.mf.as_ref().expect("set above"))
    }

    fn prov(&self) -> Vec<String> {
        vec![self.seed.to_string(), self.hash.clone()]
    }

    fn impurity(&self) -> Result<&ImpurityModel> {
        self.model
            .impurity
            .as_ref()
            .ok_or_else(|| Error::Config(format!("model '{}' is not an impurity model", self.model.name)))
    }
}

pub fn run_task(ctx: &mut Context, task: &TaskSpec) -> Result<TaskOutput> {
    match task {
        TaskSpec::Solve {} => solve(ctx).map(TaskOutput::single),
        TaskSpec::MeanField {} => mean_field(ctx).map(TaskOutput::single),
        TaskSpec::Embed { scheme, fragment, mu } => embed(ctx, *scheme, fragment, *mu).map(TaskOutput::single),
        TaskSpec::Guiding { guide } => match guide {
            GuidingSpec::Hf {} => guiding_hf(ctx).map(TaskOutput::single),
            GuidingSpec::Sos { l } => guiding_sos(ctx, l.as_deref()).map(TaskOutput::single),
            GuidingSpec::Mps { d } => guiding_mps(ctx, d.as_deref()).map(TaskOutput::single),
            GuidingSpec::Theorem1 { k } => guiding_theorem1(ctx, k).map(TaskOutput::single),
        },
        TaskSpec::Oligomer { k, coupling, monomer } => {
            oligomer(ctx, k, *coupling, monomer.as_deref()).map(TaskOutput::single)
        }
        TaskSpec::ImpurityEnsemble {
            count,
            n_modes,
            m,
            n_electrons,
            gap,
            seed,
            k_values,
            magnitude,
        } => {
            let spec = EnsembleSpec {
                count: *count,
                n_modes: *n_modes,
                m: *m,
                n_electrons: *n_electrons,
                gap: *gap,
                seed: seed.unwrap_or(ctx.seed),
                k_values: k_values.clone().unwrap_or_else(|| vec![2 * m + 2]),
                magnitude: *magnitude,
            };
            let members = run_ensemble(&spec, ctx.max_dim)?;
            let (main, decay) = ensemble_tables(&members);
            Ok(TaskOutput {
                tables: vec![(String::new(), main), ("_decay".to_string(), decay)],
                json: None,
            })
        }
        TaskSpec::QpeCost { eta, eps, mode } => {
            let eta = match eta {
                Some(e) => *e,
                None => hf_overlap(ctx)?.0,
            };
            let report = qpe_cost(eta, *eps, *mode)?;
            let mut t = Table::new(&[
                "seed",
                "model_hash",
                "mode",
                "eta",
                "eps",
                "repetitions",
                "max_evolution_time",
                "total_evolution_time",
                "delta",
            ]);
            let mode_name = serde_json::to_value(report.mode)?.as_str().unwrap_or_default().to_string();
            let mut row = ctx.prov();
            row.extend([
                mode_name,
                fmt_f64(report.eta),
                fmt_f64(report.eps),
                fmt_f64(report.repetitions),
                fmt_f64(report.max_evolution_time),
                fmt_f64(report.total_evolution_time),
                report.delta.map(fmt_f64).unwrap_or_default(),
            ]);
            t.push(row);
            Ok(TaskOutput {
                tables: vec![(String::new(), t)],
                json: Some(serde_json::to_value(&report)?),
            })
        }
    }
}

fn solve(ctx: &mut Context) -> Result<Table> {
    let (n_modes, n_e) = (ctx.model.integrals.n_modes(), ctx.model.n_electrons);
    let mut row = ctx.prov();
    let gs = ctx.ground_state()?;
    let mut t = Table::new(&[
        "seed",
        "model_hash",
        "n_modes",
        "n_electrons",
        "dim",
        "energy",
        "residual",
        "iterations",
        "degenerate",
    ]);
    row.extend([
        n_modes.to_string(),
        n_e.to_string(),
        gs.state.dim().to_string(),
        fmt_f64(gs.energy),
        fmt_f64(gs.residual),
        gs.iterations.to_string(),
        gs.degenerate.to_string(),
    ]);
    t.push(row);
    Ok(t)
}

fn mean_field(ctx: &mut Context) -> Result<Table> {
    let n_e = ctx.model.n_electrons;
    let mut row = ctx.prov();
    let mf = ctx.mean_field()?;
    let homo = n_e.checked_sub(1).map(|i| mf.orbital_energies[i]);
    let lumo = mf.orbital_energies.get(n_e).copied();
    let mut t = Table::new(&["seed", "model_hash", "energy", "converged", "iterations", "homo", "lumo"]);
    row.extend([
        fmt_f64(mf.energy),
        mf.converged.to_string(),
        mf.iterations.to_string(),
        homo.map(fmt_f64).unwrap_or_default(),
        lumo.map(fmt_f64).unwrap_or_default(),
    ]);
    t.push(row);
    Ok(t)
}

fn embed(ctx: &mut Context, scheme: Scheme, fragment: &[usize], mu: Option<f64>) -> Result<Table> {
    let opts = ctx.solver_options();
    let mf = ctx.mean_field()?.clone();
    let prob = match scheme {
        Scheme::Dmet => {
            let part = schmidt_bath(&mf.determinant, fragment, SCHMIDT_TOL)?;
            dmet_effective(&ctx.model.integrals, &part)?
        }
        Scheme::Huzinaga => huzinaga_effective(
            &ctx.model.integrals,
            &mf,
            fragment,
            mu.unwrap_or(DEFAULT_LEVEL_SHIFT),
        )?,
    };
    let sol = embed_solve(&prob, &opts)?;
    let mut row = ctx.prov();
    let gs = ctx.ground_state()?;
    let overlap = sol.guiding.inner(&gs.state)?.norm();
    let mut t = Table::new(&[
        "seed",
        "model_hash",
        "scheme",
        "fragment",
        "n_active_modes",
        "n_active",
        "env_energy",
        "e_total",
        "e_fci",
        "overlap",
        "leakage",
    ]);
    row.extend([
        match scheme {
            Scheme::Dmet => "dmet".to_string(),
            Scheme::Huzinaga => "huzinaga".to_string(),
        },
        fragment.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(";"),
        prob.n_active_modes().to_string(),
        prob.n_active.to_string(),
        fmt_f64(prob.env_energy),
        fmt_f64(sol.e_total),
        fmt_f64(gs.energy),
        fmt_f64(overlap),
        fmt_f64(sol.leakage),
    ]);
    t.push(row);
    Ok(t)
}

/// `(|<HF|psi>|, <HF|H|HF>)`.
fn hf_overlap(ctx: &mut Context) -> Result<(f64, f64)> {
    let max_dim = ctx.max_dim;
    let det = ctx.mean_field()?.determinant.clone();
    let hf = determinant_to_wavefunction(&det, max_dim)?;
    let energy = expectation(&ctx.model.integrals, &hf)?;
    let gs = ctx.ground_state()?;
    Ok((hf.inner(&gs.state)?.norm(), energy))
}

fn guiding_hf(ctx: &mut Context) -> Result<Table> {
    let (overlap, energy) = hf_overlap(ctx)?;
    let e0 = ctx.ground_state()?.energy;
    let mut t = Table::new(&["seed", "model_hash", "overlap", "energy", "energy_minus_reference"]);
    let mut row = ctx.prov();
    row.extend([fmt_f64(overlap), fmt_f64(energy), fmt_f64(energy - e0)]);
    t.push(row);
    Ok(t)
}

fn guiding_sos(ctx: &mut Context, ls: Option<&[usize]>) -> Result<Table> {
    let prov = ctx.prov();
    let gs = ctx.ground_state()?.clone();
    let dim = gs.state.dim();
    let ls: Vec<usize> = match ls {
        Some(v) => v.iter().map(|&l| l.clamp(1, dim)).collect(),
        None => (1..=dim).collect(),
    };
    let mut t = Table::new(&[
        "seed",
        "model_hash",
        "L",
        "overlap",
        "energy",
        "energy_minus_reference",
        "captured_weight",
    ]);
    for l in ls {
        let sos = sum_of_slater(&gs.state, l)?;
        let wf = sos.to_wavefunction(gs.state.basis())?;
        let energy = expectation(&ctx.model.integrals, &wf)?;
        let mut row = prov.clone();
        row.extend([
            l.to_string(),
            fmt_f64(wf.inner(&gs.state)?.norm()),
            fmt_f64(energy),
            fmt_f64(energy - gs.energy),
            fmt_f64(sos.captured_weight),
        ]);
        t.push(row);
    }
    Ok(t)
}

/// `1, 2, 4, ...` up to `2^(N/2)`, the largest bond any cut can need.
pub fn default_bond_dims(n_modes: usize) -> Vec<usize> {
    (0..=n_modes / 2).map(|k| 1usize << k).collect()
}

fn guiding_mps(ctx: &mut Context, ds: Option<&[usize]>) -> Result<Table> {
    let prov = ctx.prov();
    let max_dim = ctx.max_dim;
    let gs = ctx.ground_state()?.clone();
    let ds = ds
        .map(<[usize]>::to_vec)
        .unwrap_or_else(|| default_bond_dims(gs.state.n_modes()));
    let mut t = Table::new(&[
        "seed",
        "model_hash",
        "D",
        "max_bond",
        "overlap",
        "sector_weight",
        "energy",
        "energy_minus_reference",
    ]);
    for d in ds {
        let m = mps_compress(&gs.state, d)?;
        let wf = mps_to_wavefunction(&m, max_dim)?;
        let energy = expectation(&ctx.model.integrals, &wf)?;
        let mut row = prov.clone();
        row.extend([
            d.to_string(),
            m.max_bond().to_string(),
            fmt_f64(m.overlap(&gs.state)?.norm()),
            fmt_f64(m.sector_weight(max_dim)?),
            fmt_f64(energy),
            fmt_f64(energy - gs.energy),
        ]);
        t.push(row);
    }
    Ok(t)
}

/// One row of the active-space sweep for an impurity ground state.
#[derive(Clone, Debug, Serialize)]
pub struct ActiveRow {
    pub k: usize,
    pub delta_bound: f64,
    pub achieved_overlap: f64,
    /// Largest excitation count of the projected state.
    pub k_exc: usize,
    pub dim_v: f64,
    pub mixed_overlap: f64,
    /// `achieved_overlap^2 / dim_v`
    pub theorem3_bound: f64,
}

pub fn active_rows(
    model: &ImpurityModel,
    n_electrons: usize,
    psi: &crate::fock::WaveFunction,
    ks: &[usize],
) -> Result<Vec<ActiveRow>> {
    let rdm = one_rdm(psi)?;
    let frame = particle_hole(model, n_electrons)?;
    ks.iter()
        .map(|&k| {
            let sel = select_active(&rdm, model, n_electrons, k)?;
            let t1 = theorem1_state(psi, &sel)?;
            let k_exc = max_excitations(&t1.projection.state, &frame, EXCITATION_TOL)?;
            let mixed = mixed_guiding_overlap(psi, k_exc, &frame)?;
            Ok(ActiveRow {
                k,
                delta_bound: sel.delta_bound,
                achieved_overlap: t1.overlap,
                k_exc,
                dim_v: mixed.dim_v,
                mixed_overlap: mixed.overlap,
                theorem3_bound: t1.overlap * t1.overlap / mixed.dim_v,
            })
        })
        .collect()
}

fn guiding_theorem1(ctx: &mut Context, ks: &[usize]) -> Result<Table> {
    let prov = ctx.prov();
    let n_e = ctx.model.n_electrons;
    let model = ctx.impurity()?.clone();
    let gs = ctx.ground_state()?;
    let rows = active_rows(&model, n_e, &gs.state, ks)?;
    let mut t = Table::new(&[
        "seed",
        "model_hash",
        "K",
        "delta_bound",
        "achieved_overlap",
        "k_exc",
        "dim_v",
        "mixed_overlap",
        "theorem3_bound",
    ]);
    for r in rows {
        let mut row = prov.clone();
        row.extend([
            r.k.to_string(),
            fmt_f64(r.delta_bound),
            fmt_f64(r.achieved_overlap),
            r.k_exc.to_string(),
            fmt_f64(r.dim_v),
            fmt_f64(r.mixed_overlap),
            fmt_f64(r.theorem3_bound),
        ]);
        t.push(row);
    }
    Ok(t)
}

/// `|<HF|psi>|` for the ground state of a Hamiltonian.
pub fn hf_ground_overlap(ints: &crate::model::MolecularIntegrals, n: usize, opts: &SolverOptions) -> Result<f64> {
    let mf = hartree_fock(ints, n, &MeanFieldOptions::default())?;
    let hf = determinant_to_wavefunction(&mf.determinant, opts.max_dim)?;
    let gs = ground_state(ints, n, opts)?;
    Ok(hf.inner(&gs.state)?.norm())
}

fn oligomer(ctx: &mut Context, ks: &[usize], coupling: Option<f64>, monomer: Option<&str>) -> Result<Table> {
    let mono = match monomer {
        Some(name) => builtin(name)?,
        None => ctx.model.clone(),
    };
    let hash = model_hash(&mono.integrals, mono.n_electrons);
    let opts = ctx.solver_options();
    let nm = mono.integrals.n_modes();
    let eta1 = hf_ground_overlap(&mono.integrals, mono.n_electrons, &opts)?;
    let coupling_block = coupling.map(|c| Coupling::uniform(nm, c));
    let mut t = Table::new(&[
        "seed",
        "model_hash",
        "k",
        "n_modes",
        "coupling",
        "overlap",
        "product_law",
        "deviation",
    ]);
    for &k in ks {
        let ints = build_oligomer(&mono.integrals, k, coupling_block.as_ref())?;
        let eta = hf_ground_overlap(&ints, k * mono.n_electrons, &opts)?;
        let law = eta1.powi(k as i32);
        t.push(vec![
            ctx.seed.to_string(),
            hash.clone(),
            k.to_string(),
            (k * nm).to_string(),
            coupling.map(fmt_f64).unwrap_or_default(),
            fmt_f64(eta),
            fmt_f64(law),
            fmt_f64((eta - law).abs()),
        ]);
    }
    Ok(t)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSpec {
    pub count: usize,
    pub n_modes: usize,
    pub m: usize,
    pub n_electrons: usize,
    pub gap: f64,
    pub seed: u64,
    pub k_values: Vec<usize>,
    pub magnitude: f64,
}

#[derive(Clone, Debug)]
pub struct EnsembleMember {
    pub seed: u64,
    pub model_hash: String,
    pub omega: f64,
    pub rows: Vec<ActiveRow>,
    /// Occupation decay of the particle-hole frame density matrix.
    pub decay: DecayReport,
    pub degenerate: bool,
}

/// SplitMix64 step: advances `state` by the golden-ratio increment and
/// returns the mixed output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Member `i` gets the `i`-th SplitMix64 output seeded with `seed`.
pub fn member_seeds(seed: u64, count: usize) -> Vec<u64> {
    let mut state = seed;
    (0..count).map(|_| splitmix64(&mut state)).collect()
}

pub fn ensemble_member(spec: &EnsembleSpec, seed: u64, max_dim: usize) -> Result<EnsembleMember> {
    let model = build_impurity_model(
        spec.n_modes,
        spec.m,
        &EpsilonSpec::Gapped {
            gap: spec.gap,
            n_negative: Some(spec.n_electrons),
        },
        &ImpuritySpec::Random {
            magnitude: spec.magnitude,
        },
        Hybridization::RandomOrthogonal,
        seed,
    )?;
    let opts = SolverOptions {
        seed,
        max_dim,
        ..SolverOptions::default()
    };
    let gs = ground_state(&model.integrals, spec.n_electrons, &opts)?;
    let rows = active_rows(&model, spec.n_electrons, &gs.state, &spec.k_values)?;
    let rdm = one_rdm(&gs.state)?;
    let frame = particle_hole(&model, spec.n_electrons)?;
    let gb = OneBodyRDM::new(to_complex(&frame.b_frame_rdm(&rdm)))?;
    Ok(EnsembleMember {
        seed,
        model_hash: model_hash(&model.integrals, spec.n_electrons),
        omega: model.omega,
        rows,
        decay: decay_report(&gb, spec.m, model.omega),
        degenerate: gs.degenerate,
    })
}

/// Members run in parallel; results keep seed order.
pub fn run_ensemble(spec: &EnsembleSpec, max_dim: usize) -> Result<Vec<EnsembleMember>> {
    member_seeds(spec.seed, spec.count)
        .into_par_iter()
        .map(|s| ensemble_member(spec, s, max_dim))
        .collect()
}

pub fn ensemble_tables(members: &[EnsembleMember]) -> (Table, Table) {
    let mut main = Table::new(&[
        "seed",
        "N",
        "M",
        "omega",
        "K",
        "delta_bound",
        "achieved_overlap",
        "k_exc",
        "dimV",
        "mixed_overlap",
        "theorem3_bound",
        "model_hash",
    ]);
    let mut decay = Table::new(&[
        "seed",
        "model_hash",
        "slope",
        "r_squared",
        "points",
        "fitted_c",
        "decay_length",
    ]);
    for mem in members {
        let n = mem.decay.occupations.len();
        for r in &mem.rows {
            main.push(vec![
                mem.seed.to_string(),
                n.to_string(),
                mem.decay.m.to_string(),
                fmt_f64(mem.omega),
                r.k.to_string(),
                fmt_f64(r.delta_bound),
                fmt_f64(r.achieved_overlap),
                r.k_exc.to_string(),
                fmt_f64(r.dim_v),
                fmt_f64(r.mixed_overlap),
                fmt_f64(r.theorem3_bound),
                mem.model_hash.clone(),
            ]);
        }
        let reg = mem.decay.regression.as_ref();
        decay.push(vec![
            mem.seed.to_string(),
            mem.model_hash.clone(),
            reg.map(|r| fmt_f64(r.slope)).unwrap_or_default(),
            reg.map(|r| fmt_f64(r.r_squared)).unwrap_or_default(),
            reg.map(|r| r.points.to_string()).unwrap_or_default(),
            fmt_f64(mem.decay.fitted_c),
            fmt_f64(mem.decay.decay_length),
        ]);
    }
    (main, decay)
}
