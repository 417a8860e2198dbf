//! Spin-orbital Hartree-Fock.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, RMat};
use crate::model::MolecularIntegrals;
use crate::states::SlaterDeterminant;

#[derive(Clone, Debug)]
pub struct MeanFieldOptions {
    /// Weight of the new aufbau density in each update.
    pub damping: f64,
    pub max_iterations: usize,
    /// Convergence threshold on `max |D_new - D_old|`.
    pub tol: f64,
}

impl Default for MeanFieldOptions {
    fn default() -> Self {
        MeanFieldOptions {
            damping: 0.5,
            max_iterations: 1000,
            tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MeanFieldResult {
    pub determinant: SlaterDeterminant,
    /// Eigenvectors of the final Fock matrix, ascending energy.
    pub orbitals: RMat,
    pub orbital_energies: Vec<f64>,
    pub fock: RMat,
    pub density: RMat,
    pub energy: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Energy functional at the start density and after every update.
    pub energy_history: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeanFieldSummary {
    pub energy: f64,
    pub converged: bool,
    pub iterations: usize,
    pub orbital_energies: Vec<f64>,
}

impl MeanFieldResult {
    pub fn n_electrons(&self) -> usize {
        self.determinant.n_electrons()
    }

    pub fn summary(&self) -> MeanFieldSummary {
        MeanFieldSummary {
            energy: self.energy,
            converged: self.converged,
            iterations: self.iterations,
            orbital_energies: self.orbital_energies.clone(),
        }
    }
}

/// Coulomb minus exchange: `G[D]_pq = sum_rs D_rs [(pq|rs) - (ps|rq)]`.
pub fn two_body_potential(ham: &MolecularIntegrals, density: &RMat) -> RMat {
    let n = ham.n_modes();
    let g = ham.g_slice();
    let idx = |p: usize, q: usize, r: usize, s: usize| ((p * n + q) * n + r) * n + s;
    let mut out = RMat::zeros(n, n);
    for p in 0..n {
        for q in 0..n {
            let mut acc = 0.0;
            for r in 0..n {
                for s in 0..n {
                    let d = density[(r, s)];
                    if d != 0.0 {
                        acc += d * (g[idx(p, q, r, s)] - g[idx(p, s, r, q)]);
                    }
                }
            }
            out[(p, q)] = acc;
        }
    }
    out
}

/// `h + G[D]` for a real symmetric density with eigenvalues in `[0, 1]`.
pub fn fock_matrix(ham: &MolecularIntegrals, density: &RMat) -> Result<RMat> {
    let n = ham.n_modes();
    if density.nrows() != n || density.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} density for {n} modes",
            density.nrows(),
            density.ncols()
        )));
    }
    let dev = linalg::symmetric_deviation(density);
    if dev > 1e-8 {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let (vals, _) = linalg::eigh_real(density);
    if vals.first().is_some_and(|&v| v < -1e-8) || vals.last().is_some_and(|&v| v > 1.0 + 1e-8) {
        return Err(Error::InvalidInput("density eigenvalues outside [0, 1]".into()));
    }
    let f = ham.h() + two_body_potential(ham, density);
    Ok((&f + f.transpose()) * 0.5)
}

/// `1/2 tr(D (h + F)) + E_core`.
pub fn energy_functional(ham: &MolecularIntegrals, density: &RMat) -> f64 {
    let f = ham.h() + two_body_potential(ham, density);
    0.5 * (density.component_mul(&(ham.h() + f))).sum() + ham.e_core()
}

pub fn occupied_density(orbitals: &RMat, n_occ: usize) -> RMat {
    let c = orbitals.columns(0, n_occ);
    c * c.transpose()
}

fn aufbau(f: &RMat, n: usize) -> (Vec<f64>, RMat, RMat) {
    let (vals, vecs) = linalg::eigh_real(f);
    let d = occupied_density(&vecs, n);
    (vals, vecs, d)
}

/// Damped SCF from the core-Hamiltonian guess. Each update mixes the aufbau
/// density of the current Fock matrix into the current density with weight
/// `damping`; the weight is halved (at most 30 times) when the update would
/// raise the energy functional.
pub fn hartree_fock(ham: &MolecularIntegrals, n_electrons: usize, opts: &MeanFieldOptions) -> Result<MeanFieldResult> {
    let n = ham.n_modes();
    if n_electrons > n {
        return Err(Error::InvalidSector(format!("{n_electrons} electrons in {n} modes")));
    }
    let (_, _, mut d) = aufbau(ham.h(), n_electrons);
    let mut e = energy_functional(ham, &d);
    let mut history = vec![e];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let f = ham.h() + two_body_potential(ham, &d);
        let (_, _, d_auf) = aufbau(&f, n_electrons);
        let mut alpha = opts.damping;
        let mut d_new;
        let mut e_new;
        let mut halvings = 0;
        loop {
            d_new = &d * (1.0 - alpha) + &d_auf * alpha;
            e_new = energy_functional(ham, &d_new);
            if e_new <= e + 1e-13 || halvings >= 30 {
                break;
            }
            alpha *= 0.5;
            halvings += 1;
        }
        let change = (&d_new - &d).amax();
        d = d_new;
        e = e_new;
        history.push(e);
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    // final determinant from the converged Fock operator
    let f = ham.h() + two_body_potential(ham, &d);
    let (_, vecs, d_occ) = aufbau(&f, n_electrons);
    let _ = vecs;
    let fock = fock_matrix(ham, &d_occ)?;
    let (orbital_energies, orbitals) = linalg::eigh_real(&fock);
    let occ = orbitals.columns(0, n_electrons).into_owned();
    let density = &occ * occ.transpose();
    let energy = energy_functional(ham, &density);
    Ok(MeanFieldResult {
        determinant: SlaterDeterminant::from_real(&occ)?,
        orbitals,
        orbital_energies,
        fock,
        density,
        energy,
        converged,
        iterations,
        energy_history: history,
    })
}

/// Closed-shell Fock matrix and energy of a spatial model with doubly
/// occupied orbitals `c_occ`: `F = h + sum_c [2 (pq|cc) - (pc|qc)]`,
/// `E = 2 sum_c h_cc + sum_cd [2 (cc|dd) - (cd|dc)] + E_core` (orbital
/// indices after transformation).
pub fn restricted_closed_shell(spatial: &MolecularIntegrals, c_occ: &RMat) -> Result<(RMat, f64)> {
    let n = spatial.n_modes();
    if c_occ.nrows() != n {
        return Err(Error::DimensionMismatch("orbital rows differ from mode count".into()));
    }
    let d = c_occ * c_occ.transpose();
    let mut f = spatial.h().clone();
    for p in 0..n {
        for q in 0..n {
            let mut acc = 0.0;
            for r in 0..n {
                for s in 0..n {
                    acc += d[(r, s)] * (2.0 * spatial.g(p, q, r, s) - spatial.g(p, s, r, q));
                }
            }
            f[(p, q)] += acc;
        }
    }
    let mo = spatial.transform(c_occ)?;
    let k = c_occ.ncols();
    let mut e = spatial.e_core();
    for c in 0..k {
        e += 2.0 * mo.h()[(c, c)];
        for dd in 0..k {
            e += 2.0 * mo.g(c, c, dd, dd) - mo.g(c, dd, dd, c);
        }
    }
    Ok((f, e))
}
