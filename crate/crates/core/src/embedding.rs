//! Mean-field embeddings: Schmidt fragment and bath from a determinant, the
//! DMET effective Hamiltonian and the level-shifted projection embedding.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{enumerate_sector, WaveFunction, DEFAULT_MAX_DIM};
use crate::io::{read_integrals, write_integrals};
use crate::linalg::{self, RMat};
use crate::meanfield::{fock_matrix, two_body_potential, MeanFieldResult};
use crate::model::MolecularIntegrals;
use crate::solver::{ground_state_in, SolverOptions};
use crate::states::{create_orbitals, embed_modes, rotate_orbitals, SlaterDeterminant};

pub const SCHMIDT_TOL: f64 = 1e-8;
pub const DEFAULT_LEVEL_SHIFT: f64 = 1e3;

#[derive(Clone, Debug)]
pub struct SchmidtPartition {
    pub n_modes: usize,
    pub fragment_modes: Vec<usize>,
    /// Environment parts of the entangled occupied orbitals, normalized.
    pub bath_orbitals: RMat,
    /// Occupied orbitals without fragment weight.
    pub core_orbitals: RMat,
    /// Occupied orbitals inside the fragment.
    pub pure_fragment_orbitals: RMat,
    /// Occupied orbitals with both fragment and environment weight.
    pub entangled_orbitals: RMat,
    /// Singular values of the fragment block, descending.
    pub singular_values: Vec<f64>,
}

impl SchmidtPartition {
    pub fn n_bath(&self) -> usize {
        self.bath_orbitals.ncols()
    }

    pub fn n_core(&self) -> usize {
        self.core_orbitals.ncols()
    }

    pub fn n_electrons(&self) -> usize {
        self.core_orbitals.ncols() + self.pure_fragment_orbitals.ncols() + self.entangled_orbitals.ncols()
    }

    /// All occupied orbitals: pure fragment, entangled, core.
    pub fn occupied_orbitals(&self) -> RMat {
        let parts = [&self.pure_fragment_orbitals, &self.entangled_orbitals, &self.core_orbitals];
        let cols: Vec<DVector<f64>> = parts
            .iter()
            .flat_map(|m| (0..m.ncols()).map(move |j| m.column(j).into_owned()))
            .collect();
        if cols.is_empty() {
            return RMat::zeros(self.n_modes, 0);
        }
        RMat::from_columns(&cols)
    }

    /// Fragment unit vectors followed by the bath orbitals.
    pub fn active_orbitals(&self) -> RMat {
        let n = self.n_modes;
        let a = self.fragment_modes.len();
        let mut w = RMat::zeros(n, a + self.n_bath());
        for (j, &p) in self.fragment_modes.iter().enumerate() {
            w[(p, j)] = 1.0;
        }
        w.columns_mut(a, self.n_bath()).copy_from(&self.bath_orbitals);
        w
    }
}

fn orthonormalize(cols: Vec<DVector<f64>>, n: usize) -> RMat {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(cols.len());
    for mut v in cols {
        for _ in 0..2 {
            for c in &out {
                let a = c.dot(&v);
                v -= c * a;
            }
        }
        let nv = v.norm();
        if nv > 1e-12 {
            out.push(v / nv);
        }
    }
    if out.is_empty() {
        RMat::zeros(n, 0)
    } else {
        RMat::from_columns(&out)
    }
}

fn check_fragment(fragment: &[usize], n: usize) -> Result<Vec<usize>> {
    if fragment.is_empty() {
        return Err(Error::InvalidInput("fragment is empty".into()));
    }
    let mut a = fragment.to_vec();
    a.sort_unstable();
    if let Some(w) = a.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateMode(w[0]));
    }
    if let Some(&bad) = a.iter().find(|&&p| p >= n) {
        return Err(Error::ModeOutOfRange { index: bad, n_modes: n });
    }
    Ok(a)
}

/// Splits the occupied space of `phi` by the singular values of its
/// fragment rows: `sigma >= 1 - tol` pure fragment, `sigma <= tol` core,
/// anything between contributes one bath orbital.
pub fn schmidt_bath(phi: &SlaterDeterminant, fragment: &[usize], tol: f64) -> Result<SchmidtPartition> {
    let n = phi.n_modes();
    let a = check_fragment(fragment, n)?;
    let x = linalg::to_real(phi.orbitals(), 1e-12)?;
    let ne = x.ncols();
    let xa = RMat::from_fn(a.len(), ne, |r, c| x[(a[r], c)]);
    let (_, s, v) = linalg::svd_full_v(&linalg::to_complex(&xa));
    let v = linalg::to_real(&v, 1e-10)?;
    let y = &x * v;
    let in_a = |p: usize| a.binary_search(&p).is_ok();
    let (mut pure, mut ent, mut bath, mut core) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut sigmas = Vec::with_capacity(ne);
    for j in 0..ne {
        let sigma = s.get(j).copied().unwrap_or(0.0).min(1.0);
        sigmas.push(sigma);
        let col = y.column(j).into_owned();
        if sigma >= 1.0 - tol {
            pure.push(DVector::from_fn(n, |p, _| if in_a(p) { col[p] } else { 0.0 }));
        } else if sigma <= tol {
            core.push(DVector::from_fn(n, |p, _| if in_a(p) { 0.0 } else { col[p] }));
        } else {
            let env = DVector::from_fn(n, |p, _| if in_a(p) { 0.0 } else { col[p] });
            bath.push(env);
            ent.push(col);
        }
    }
    Ok(SchmidtPartition {
        n_modes: n,
        fragment_modes: a,
        bath_orbitals: orthonormalize(bath, n),
        core_orbitals: orthonormalize(core, n),
        pure_fragment_orbitals: orthonormalize(pure, n),
        entangled_orbitals: orthonormalize(ent, n),
        singular_values: sigmas,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Dmet,
    Huzinaga,
}

/// An effective Hamiltonian on active orbitals, embedded in a frozen core
/// determinant.
#[derive(Clone, Debug)]
pub struct EmbeddingProblem {
    pub scheme: Scheme,
    pub n_modes: usize,
    /// `N x k` orbitals spanning the active space; the effective
    /// Hamiltonian's mode `j` is column `j`.
    pub active_orbitals: RMat,
    /// Effective Hamiltonian on the active orbitals, zero core energy.
    pub effective: MolecularIntegrals,
    /// Mean-field energy of the environment, including the parent core
    /// energy.
    pub env_energy: f64,
    pub core_determinant: SlaterDeterminant,
    pub n_active: usize,
    pub fragment: Vec<usize>,
    pub level_shift: Option<f64>,
}

/// `tr(D h) + 1/2 tr(D G[D]) + E_core` and `G[D]`.
fn core_terms(ham: &MolecularIntegrals, core: &RMat) -> (f64, RMat) {
    let d = core * core.transpose();
    let g = two_body_potential(ham, &d);
    let e = ham.e_core() + d.component_mul(ham.h()).sum() + 0.5 * d.component_mul(&g).sum();
    (e, g)
}

pub fn dmet_effective(ham: &MolecularIntegrals, part: &SchmidtPartition) -> Result<EmbeddingProblem> {
    let n = ham.n_modes();
    if part.n_modes != n {
        return Err(Error::DimensionMismatch(format!(
            "partition over {} modes for a {n}-mode Hamiltonian",
            part.n_modes
        )));
    }
    let w = part.active_orbitals();
    let core = &part.core_orbitals;
    let overlap = (w.transpose() * core).amax();
    if overlap > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "active orbitals overlap the core by {overlap:.3e}"
        )));
    }
    let (env_energy, g_core) = core_terms(ham, core);
    let dressed = MolecularIntegrals::new(0.0, ham.h() + g_core, ham.g_slice().to_vec())?;
    let effective = dressed.transform(&w)?;
    Ok(EmbeddingProblem {
        scheme: Scheme::Dmet,
        n_modes: n,
        active_orbitals: w,
        effective,
        env_energy,
        core_determinant: SlaterDeterminant::from_real(core)?,
        n_active: part.n_electrons() - part.n_core(),
        fragment: part.fragment_modes.clone(),
        level_shift: None,
    })
}

/// Projection embedding on the full mode space. Occupied mean-field
/// orbitals outside `active` form the environment `C` with projector `P`;
/// the one-body operator is
/// `h + G[D_C] - ((F^A - mu) P + P (F^A - mu))`, where `F^A` is the Fock
/// matrix of the occupied active orbitals.
pub fn huzinaga_effective(
    ham: &MolecularIntegrals,
    mf: &MeanFieldResult,
    active: &[usize],
    mu: f64,
) -> Result<EmbeddingProblem> {
    let n = ham.n_modes();
    let a = check_fragment(active, n)?;
    if mf.orbitals.nrows() != n {
        return Err(Error::DimensionMismatch("mean-field orbitals do not match the Hamiltonian".into()));
    }
    let n_occ = mf.n_electrons();
    let occ_env: Vec<usize> = (0..n_occ).filter(|j| a.binary_search(j).is_err()).collect();
    let occ_act: Vec<usize> = (0..n_occ).filter(|j| a.binary_search(j).is_ok()).collect();
    let core = mf.orbitals.select_columns(&occ_env);
    let act = mf.orbitals.select_columns(&occ_act);
    let (env_energy, g_core) = core_terms(ham, &core);
    let p = &core * core.transpose();
    let f_a = fock_matrix(ham, &(&act * act.transpose()))?;
    let shifted = &f_a - RMat::identity(n, n) * mu;
    let h_tilde = ham.h() + g_core - (&shifted * &p + &p * &shifted);
    let h_tilde = (&h_tilde + h_tilde.transpose()) * 0.5;
    let effective = MolecularIntegrals::new(0.0, h_tilde, ham.g_slice().to_vec())?;
    Ok(EmbeddingProblem {
        scheme: Scheme::Huzinaga,
        n_modes: n,
        active_orbitals: RMat::identity(n, n),
        effective,
        env_energy,
        core_determinant: SlaterDeterminant::from_real(&core)?,
        n_active: n_occ - occ_env.len(),
        fragment: a,
        level_shift: Some(mu),
    })
}

impl EmbeddingProblem {
    pub fn n_active_modes(&self) -> usize {
        self.active_orbitals.ncols()
    }

    /// `Phi` (on the active orbitals) lifted to the full space with the
    /// core orbitals created on top, normalized.
    pub fn embed_state(&self, phi: &WaveFunction) -> Result<WaveFunction> {
        let k = self.n_active_modes();
        if phi.n_modes() != k {
            return Err(Error::DimensionMismatch(format!("{}-mode state for {k} active orbitals", phi.n_modes())));
        }
        let lifted = self.lift(phi)?;
        let full = create_orbitals(&lifted, self.core_determinant.orbitals(), DEFAULT_MAX_DIM)?;
        full.normalized()
    }

    /// `Phi` on the full mode space without the core.
    fn lift(&self, phi: &WaveFunction) -> Result<WaveFunction> {
        let n = self.n_modes;
        let k = self.n_active_modes();
        if k == n && (&self.active_orbitals - RMat::identity(n, n)).amax() == 0.0 {
            return Ok(phi.clone());
        }
        let basis = linalg::complete_basis(&linalg::to_complex(&self.active_orbitals));
        let modes: Vec<usize> = (0..k).collect();
        let embedded = embed_modes(phi, &modes, n, DEFAULT_MAX_DIM)?;
        rotate_orbitals(&embedded, &basis)
    }

    /// `sum_c <a^dag(c) a(c)>` of `phi` lifted to the full space.
    pub fn core_leakage(&self, phi: &WaveFunction) -> Result<f64> {
        let lifted = self.lift(phi)?;
        let rdm = crate::analysis::one_rdm(&lifted)?;
        let c = self.core_determinant.orbitals();
        Ok(rdm.in_orbitals(c).trace().re)
    }
}

#[derive(Clone, Debug)]
pub struct EmbeddingSolution {
    /// `env_energy + e_active`
    pub e_total: f64,
    pub e_active: f64,
    pub fragment_state: WaveFunction,
    pub guiding: WaveFunction,
    /// Core occupation of the active solution.
    pub leakage: f64,
}

pub fn embed_solve(prob: &EmbeddingProblem, opts: &SolverOptions) -> Result<EmbeddingSolution> {
    let basis = enumerate_sector(prob.n_active_modes(), prob.n_active, opts.max_dim)?;
    let gs = ground_state_in(&prob.effective, &basis, opts)?;
    let guiding = prob.embed_state(&gs.state)?;
    let leakage = prob.core_leakage(&gs.state)?;
    Ok(EmbeddingSolution {
        e_total: prob.env_energy + gs.energy,
        e_active: gs.energy,
        fragment_state: gs.state,
        guiding,
        leakage,
    })
}

/// JSON companion of an effective Hamiltonian written as an integral file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmbeddingSidecar {
    pub scheme: Scheme,
    pub n_modes: usize,
    pub fragment: Vec<usize>,
    pub n_active: usize,
    pub env_energy: f64,
    pub level_shift: Option<f64>,
    /// Rows of the `N x k` active orbital matrix.
    pub active_orbitals: Vec<Vec<f64>>,
    /// Rows of the `N x n_core` core orbital matrix.
    pub core_orbitals: Vec<Vec<f64>>,
    pub integrals_file: PathBuf,
    pub provenance: serde_json::Value,
}

fn rows(m: &RMat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], n: usize, k: usize) -> Result<RMat> {
    if rows.len() != n || rows.iter().any(|r| r.len() != k) {
        return Err(Error::DimensionMismatch(format!("expected a {n}x{k} matrix")));
    }
    Ok(RMat::from_fn(n, k, |r, c| rows[r][c]))
}

/// Writes `<stem>.int` and `<stem>.json` into `dir`.
pub fn write_problem(prob: &EmbeddingProblem, dir: &Path, stem: &str, provenance: serde_json::Value) -> Result<PathBuf> {
    let int_name = PathBuf::from(format!("{stem}.int"));
    write_integrals(&prob.effective, prob.n_active, &dir.join(&int_name))?;
    let core = linalg::to_real(prob.core_determinant.orbitals(), 1e-12)?;
    let side = EmbeddingSidecar {
        scheme: prob.scheme,
        n_modes: prob.n_modes,
        fragment: prob.fragment.clone(),
        n_active: prob.n_active,
        env_energy: prob.env_energy,
        level_shift: prob.level_shift,
        active_orbitals: rows(&prob.active_orbitals),
        core_orbitals: rows(&core),
        integrals_file: int_name,
        provenance,
    };
    let path = dir.join(format!("{stem}.json"));
    fs::write(&path, serde_json::to_string_pretty(&side)?)?;
    Ok(path)
}

pub fn read_problem(sidecar: &Path) -> Result<EmbeddingProblem> {
    let side: EmbeddingSidecar = serde_json::from_str(&fs::read_to_string(sidecar)?)?;
    let dir = sidecar.parent().unwrap_or(Path::new("."));
    let file = read_integrals(&dir.join(&side.integrals_file))?;
    let k = file.integrals.n_modes();
    let n_core = side.core_orbitals.first().map_or(0, |r| r.len());
    Ok(EmbeddingProblem {
        scheme: side.scheme,
        n_modes: side.n_modes,
        active_orbitals: from_rows(&side.active_orbitals, side.n_modes, k)?,
        effective: file.integrals,
        env_energy: side.env_energy,
        core_determinant: SlaterDeterminant::from_real(&from_rows(&side.core_orbitals, side.n_modes, n_core)?)?,
        n_active: side.n_active,
        fragment: side.fragment,
        level_shift: side.level_shift,
    })
}
