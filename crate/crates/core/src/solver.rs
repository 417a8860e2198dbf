//! Ground states in a fixed particle-number sector.
//!
//! [`ground_state`] runs restarted Lanczos with full reorthogonalization on
//! real vectors (the Hamiltonian matrix is real symmetric in the occupation
//! basis). [`dense_spectrum`] assembles the sector matrix term by term and is
//! used as the oracle for small sectors.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fock::{self, apply_term, enumerate_sector, HamiltonianKernel, SectorBasis, WaveFunction, DEFAULT_MAX_DIM};
use crate::linalg::{self, RMat};
use crate::model::MolecularIntegrals;

/// Largest sector assembled densely.
pub const DENSE_MAX_DIM: usize = 4096;

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub tol: f64,
    /// Cap on Hamiltonian applications.
    pub max_iterations: usize,
    pub krylov_dim: usize,
    pub seed: u64,
    pub degeneracy_threshold: f64,
    pub check_degeneracy: bool,
    pub max_dim: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-9,
            max_iterations: 20_000,
            krylov_dim: 100,
            seed: 0x5eed,
            degeneracy_threshold: 1e-8,
            check_degeneracy: true,
            max_dim: DEFAULT_MAX_DIM,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GroundStateResult {
    pub energy: f64,
    pub state: WaveFunction,
    pub residual: f64,
    pub iterations: usize,
    /// Second-lowest eigenvalue when degeneracy checking ran.
    pub first_excited: Option<f64>,
    pub degenerate: bool,
}

struct Eigenpair {
    value: f64,
    vector: Vec<f64>,
    residual: f64,
    iterations: usize,
}

pub fn ground_state(ham: &MolecularIntegrals, n_electrons: usize, opts: &SolverOptions) -> Result<GroundStateResult> {
    let basis = enumerate_sector(ham.n_modes(), n_electrons, opts.max_dim)?;
    ground_state_in(ham, &basis, opts)
}

pub fn ground_state_in(ham: &MolecularIntegrals, basis: &Arc<SectorBasis>, opts: &SolverOptions) -> Result<GroundStateResult> {
    if ham.n_modes() != basis.n_modes() {
        return Err(Error::DimensionMismatch(format!(
            "Hamiltonian has {} modes, basis {}",
            ham.n_modes(),
            basis.n_modes()
        )));
    }
    let kernel = HamiltonianKernel::new(ham);
    let ground = lanczos(&kernel, basis, &[], opts, opts.seed)?;
    let mut iterations = ground.iterations;
    let mut first_excited = None;
    if opts.check_degeneracy && basis.dim() > 1 {
        let excited = lanczos(&kernel, basis, std::slice::from_ref(&ground.vector), opts, opts.seed ^ 0x9e37_79b9_7f4a_7c15)?;
        iterations += excited.iterations;
        first_excited = Some(excited.value);
    }
    let degenerate = first_excited.is_some_and(|e1| e1 - ground.value <= opts.degeneracy_threshold);
    let coeffs = ground.vector.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    Ok(GroundStateResult {
        energy: ground.value,
        state: WaveFunction::new(basis.clone(), coeffs)?,
        residual: ground.residual,
        iterations,
        first_excited,
        degenerate,
    })
}

fn orthogonalize(w: &mut [f64], against: &[Vec<f64>]) {
    for _ in 0..2 {
        for v in against {
            let c = linalg::dot_real(v, w);
            linalg::axpy_real(-c, v, w);
        }
    }
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng, against: &[Vec<f64>], deflate: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..dim).map(|_| linalg::standard_normal(rng)).collect();
        orthogonalize(&mut v, deflate);
        orthogonalize(&mut v, against);
        let nv = linalg::norm_real(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            return Some(v);
        }
    }
    None
}

/// Lowest eigenpair of `H` on the orthogonal complement of `deflate`.
fn lanczos(
    kernel: &HamiltonianKernel,
    basis: &SectorBasis,
    deflate: &[Vec<f64>],
    opts: &SolverOptions,
    seed: u64,
) -> Result<Eigenpair> {
    let dim = basis.dim();
    let free_dim = dim - deflate.len();
    if free_dim == 0 {
        return Err(Error::InvalidInput("no states left after deflation".into()));
    }
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut w = fock::apply_with_kernel(kernel, basis, v);
        orthogonalize(&mut w, deflate);
        w
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut start = random_unit(dim, &mut rng, &[], deflate)
        .ok_or_else(|| Error::InvalidInput("could not draw a start vector".into()))?;
    let kdim = opts.krylov_dim.max(2).min(free_dim);
    let mut applies = 0;
    let mut best = f64::INFINITY;

    loop {
        let mut vs: Vec<Vec<f64>> = vec![start];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut ritz: (f64, Vec<f64>);
        loop {
            let j = vs.len() - 1;
            let mut w = apply(&vs[j]);
            applies += 1;
            let a = linalg::dot_real(&vs[j], &w);
            alphas.push(a);
            orthogonalize(&mut w, &vs);
            let b = linalg::norm_real(&w);
            ritz = tridiagonal_lowest(&alphas, &betas);
            let estimate = b * ritz.1.last().copied().unwrap_or(0.0).abs();
            if vs.len() >= kdim || vs.len() >= free_dim || estimate < 0.1 * opts.tol {
                break;
            }
            if b < 1e-10 {
                // invariant subspace: continue with a fresh orthogonal direction
                match random_unit(dim, &mut rng, &vs, deflate) {
                    Some(v) => {
                        betas.push(0.0);
                        vs.push(v);
                    }
                    None => break,
                }
            } else {
                w.iter_mut().for_each(|x| *x /= b);
                betas.push(b);
                vs.push(w);
            }
            if applies >= opts.max_iterations {
                break;
            }
        }
        let (_, y) = ritz;
        let mut x = vec![0.0; dim];
        for (v, &c) in vs.iter().zip(&y) {
            linalg::axpy_real(c, v, &mut x);
        }
        orthogonalize(&mut x, deflate);
        let nx = linalg::norm_real(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let hx = apply(&x);
        applies += 1;
        let energy = linalg::dot_real(&x, &hx);
        let mut r = hx;
        linalg::axpy_real(-energy, &x, &mut r);
        let residual = linalg::norm_real(&r);
        best = best.min(residual);
        if residual <= opts.tol {
            return Ok(Eigenpair {
                value: energy,
                vector: canonical_sign(x),
                residual,
                iterations: applies,
            });
        }
        if applies >= opts.max_iterations {
            return Err(Error::NotConverged {
                iterations: applies,
                residual: best,
            });
        }
        start = x;
    }
}

/// Fixes the sign so the largest-magnitude entry (first on ties) is positive.
fn canonical_sign(mut x: Vec<f64>) -> Vec<f64> {
    let mut idx = 0;
    for (i, v) in x.iter().enumerate() {
        if v.abs() > x[idx].abs() + 1e-12 {
            idx = i;
        }
    }
    if x[idx] < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    x
}

fn tridiagonal_lowest(alphas: &[f64], betas: &[f64]) -> (f64, Vec<f64>) {
    let k = alphas.len();
    let t = RMat::from_fn(k, k, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j {
            betas[i]
        } else if j + 1 == i {
            betas[j]
        } else {
            0.0
        }
    });
    let (vals, vecs) = linalg::eigh_real(&t);
    (vals[0], vecs.column(0).iter().copied().collect())
}

/// Sector Hamiltonian matrix assembled from `apply_term` for every
/// individual operator string.
pub fn dense_matrix(ham: &MolecularIntegrals, basis: &SectorBasis) -> Result<RMat> {
    let dim = basis.dim();
    if dim > DENSE_MAX_DIM {
        return Err(Error::SectorTooLarge {
            n_modes: basis.n_modes(),
            n_electrons: basis.n_electrons(),
            dim: dim as u128,
            cap: DENSE_MAX_DIM,
        });
    }
    let n = ham.n_modes();
    let mut mat = DMatrix::<f64>::zeros(dim, dim);
    for col in 0..dim {
        let s = basis.state(col);
        mat[(col, col)] += ham.e_core();
        for p in 0..n {
            for q in 0..n {
                let h = ham.h()[(p, q)];
                if h == 0.0 {
                    continue;
                }
                if let Some((t, sign)) = apply_term(&[p], &[q], s, n)? {
                    let row = basis.index_of(t.bits()).expect("number conserving");
                    mat[(row, col)] += h * sign;
                }
            }
        }
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for ss in 0..n {
                        if p == r || q == ss {
                            continue;
                        }
                        let g = ham.g(p, q, r, ss);
                        if g == 0.0 {
                            continue;
                        }
                        if let Some((t, sign)) = apply_term(&[p, r], &[ss, q], s, n)? {
                            let row = basis.index_of(t.bits()).expect("number conserving");
                            mat[(row, col)] += 0.5 * g * sign;
                        }
                    }
                }
            }
        }
    }
    Ok(mat)
}

/// Full ascending spectrum of the sector.
pub fn dense_spectrum(ham: &MolecularIntegrals, n_electrons: usize) -> Result<Vec<f64>> {
    let basis = enumerate_sector(ham.n_modes(), n_electrons, DEFAULT_MAX_DIM)?;
    let mat = dense_matrix(ham, &basis)?;
    Ok(linalg::eigh_real(&mat).0)
}

/// Lowest eigenpair from the dense matrix.
pub fn dense_ground_state(ham: &MolecularIntegrals, n_electrons: usize) -> Result<(f64, WaveFunction)> {
    let basis = enumerate_sector(ham.n_modes(), n_electrons, DEFAULT_MAX_DIM)?;
    let mat = dense_matrix(ham, &basis)?;
    let (vals, vecs) = linalg::eigh_real(&mat);
    let coeffs = vecs.column(0).iter().map(|&x| Complex64::new(x, 0.0)).collect();
    Ok((vals[0], WaveFunction::new(basis, coeffs)?))
}

/// `<psi|H|psi>` for a normalized state.
pub fn expectation(ham: &MolecularIntegrals, psi: &WaveFunction) -> Result<f64> {
    let hpsi = fock::apply_hamiltonian(ham, psi)?;
    Ok(psi.inner(&hpsi)?.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::random_model;
    use rand::SeedableRng;

    #[test]
    fn fills_lowest_modes_for_diagonal_h() {
        let h = RMat::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -0.5, 0.3, 0.8]));
        let ham = MolecularIntegrals::from_one_body(0.0, h).unwrap();
        let gs = ground_state(&ham, 2, &SolverOptions::default()).unwrap();
        assert!((gs.energy + 1.5).abs() < 1e-12);
        assert!((gs.state.amplitude(0b0011).norm() - 1.0).abs() < 1e-10);
        assert!(!gs.degenerate);
    }

    #[test]
    fn two_level_system() {
        let t = 0.7;
        let h = RMat::from_row_slice(2, 2, &[0.0, t, t, 0.0]);
        let ham = MolecularIntegrals::from_one_body(0.0, h).unwrap();
        let spec = dense_spectrum(&ham, 1).unwrap();
        assert!((spec[0] + t).abs() < 1e-14 && (spec[1] - t).abs() < 1e-14);
    }

    #[test]
    fn free_spectrum_is_subset_sums() {
        let eps = [-0.9, -0.2, 0.1, 0.4, 0.75];
        let h = RMat::from_diagonal(&nalgebra::DVector::from_column_slice(&eps));
        let ham = MolecularIntegrals::from_one_body(0.0, h).unwrap();
        let mut sums: Vec<f64> = (0u32..32)
            .filter(|b| b.count_ones() == 2)
            .map(|b| (0..5).filter(|p| b >> p & 1 == 1).map(|p| eps[p]).sum())
            .collect();
        sums.sort_by(f64::total_cmp);
        let spec = dense_spectrum(&ham, 2).unwrap();
        for (a, b) in spec.iter().zip(&sums) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn lanczos_matches_dense_on_random_model() {
        let ham = random_model(8, 42).unwrap();
        let gs = ground_state(&ham, 4, &SolverOptions::default()).unwrap();
        let dense = dense_spectrum(&ham, 4).unwrap();
        assert!((gs.energy - dense[0]).abs() < 1e-10, "{} vs {}", gs.energy, dense[0]);
        assert!(gs.residual <= 1e-9);
        assert!((gs.first_excited.unwrap() - dense[1]).abs() < 1e-8);
    }

    #[test]
    fn core_shift_moves_energy_only() {
        let ham = random_model(6, 3).unwrap();
        let a = ground_state(&ham, 3, &SolverOptions::default()).unwrap();
        let b = ground_state(&ham.clone().with_e_core(2.0), 3, &SolverOptions::default()).unwrap();
        assert!((b.energy - a.energy - 2.0).abs() < 1e-10);
        assert!((a.state.inner(&b.state).unwrap().norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degeneracy_is_flagged() {
        // two degenerate one-particle levels below a third
        let h = RMat::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -1.0, 0.5]));
        let ham = MolecularIntegrals::from_one_body(0.0, h).unwrap();
        let gs = ground_state(&ham, 1, &SolverOptions::default()).unwrap();
        assert!(gs.degenerate);
        assert!((gs.energy + 1.0).abs() < 1e-12);
    }

    #[test]
    fn variational_against_random_states() {
        let ham = random_model(6, 8).unwrap();
        let gs = ground_state(&ham, 3, &SolverOptions::default()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let phi = WaveFunction::random(gs.state.basis().clone(), &mut rng);
            assert!(gs.energy <= expectation(&ham, &phi).unwrap() + 1e-9);
        }
    }

    #[test]
    fn iteration_cap_reports_best_residual() {
        let ham = random_model(10, 1).unwrap();
        let opts = SolverOptions {
            max_iterations: 3,
            krylov_dim: 2,
            ..Default::default()
        };
        match ground_state(&ham, 5, &opts) {
            Err(Error::NotConverged { residual, .. }) => assert!(residual > 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let ham = random_model(8, 5).unwrap();
        let a = ground_state(&ham, 4, &SolverOptions::default()).unwrap();
        let b = ground_state(&ham, 4, &SolverOptions::default()).unwrap();
        assert_eq!(a.energy.to_bits(), b.energy.to_bits());
        assert_eq!(a.state.coeffs(), b.state.coeffs());
    }
}
