//! One-body reduced density matrices and what is read off them.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{OccupationState, WaveFunction};
use crate::linalg::{self, CMat};

pub const RDM_TOL: f64 = 1e-10;

/// `gamma_pq = <psi| a_p^dag a_q |psi>`.
#[derive(Clone, Debug)]
pub struct OneBodyRDM {
    pub gamma: CMat,
}

impl OneBodyRDM {
    pub fn new(gamma: CMat) -> Result<Self> {
        let dev = linalg::hermitian_deviation(&gamma);
        if dev > RDM_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        Ok(OneBodyRDM { gamma })
    }

    pub fn n_modes(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.gamma.trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigh(&self.gamma).0
    }

    /// `max |gamma^2 - gamma|`
    pub fn idempotency_error(&self) -> f64 {
        (&self.gamma * &self.gamma - &self.gamma).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Expresses the density matrix in the orbitals given by the columns of
    /// `c`: `gamma'_ij = <a^dag(c_i) a(c_j)> = (c^T gamma conj(c))_ij`.
    pub fn in_orbitals(&self, c: &CMat) -> CMat {
        c.transpose() * &self.gamma * c.map(|z| z.conj())
    }
}

const CHUNK: usize = 2048;

pub fn one_rdm(psi: &WaveFunction) -> Result<OneBodyRDM> {
    let n = psi.n_modes();
    let basis = psi.basis();
    let coeffs = psi.coeffs();
    let partials: Vec<CMat> = (0..basis.dim())
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = CMat::zeros(n, n);
            for &i in chunk {
                let c = coeffs[i];
                if c.norm_sqr() == 0.0 {
                    continue;
                }
                let s = basis.state(i);
                for q in s.occupied() {
                    let (s1, sq) = s.annihilate(q).expect("occupied");
                    for p in 0..n {
                        let Some((t, sp)) = s1.create(p) else { continue };
                        let j = basis.index_of(t.bits()).expect("same sector");
                        // <t| a_p^dag a_q |s> = sp sq
                        g[(p, q)] += coeffs[j].conj() * c * (sp * sq);
                    }
                }
            }
            g
        })
        .collect();
    let mut gamma = CMat::zeros(n, n);
    for g in partials {
        gamma += g;
    }
    let herm = (&gamma + gamma.adjoint()) * Complex64::new(0.5, 0.0);
    OneBodyRDM::new(herm)
}

/// Natural occupations (descending) and orbitals (columns).
///
/// Each degenerate eigenspace (occupations within `1e-10`) is given the
/// canonical basis obtained by Gram-Schmidt on its projector applied to the
/// unit vectors in index order; every column's first significant entry is
/// real and positive.
pub fn natural_orbitals(rdm: &OneBodyRDM) -> (Vec<f64>, CMat) {
    let (vals, vecs) = linalg::eigh(&rdm.gamma);
    let n = vals.len();
    let order: Vec<usize> = (0..n).rev().collect();
    let occ: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let mut orbs = CMat::from_fn(n, n, |r, c| vecs[(r, order[c])]);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (occ[start] - occ[end]).abs() <= 1e-10 {
            end += 1;
        }
        if end - start > 1 {
            let block = orbs.columns(start, end - start).into_owned();
            let canon = canonical_subspace_basis(&block);
            orbs.columns_mut(start, end - start).copy_from(&canon);
        }
        start = end;
    }
    for j in 0..n {
        linalg::canonicalize_column(&mut orbs, j);
    }
    (occ, orbs)
}

/// Basis of `span(block)` from Gram-Schmidt on `P e_0, P e_1, ...`.
pub fn canonical_subspace_basis(block: &CMat) -> CMat {
    let n = block.nrows();
    let k = block.ncols();
    let proj = block * block.adjoint();
    let mut cols: Vec<nalgebra::DVector<Complex64>> = Vec::with_capacity(k);
    for e in 0..n {
        if cols.len() == k {
            break;
        }
        let mut v = proj.column(e).into_owned();
        for _ in 0..2 {
            for c in &cols {
                let a = c.dotc(&v);
                v -= c * a;
            }
        }
        let nv = v.norm();
        if nv > 1e-6 {
            cols.push(v / Complex64::new(nv, 0.0));
        }
    }
    CMat::from_columns(&cols)
}

/// Binary entropy in nats.
pub fn binary_entropy(x: f64) -> f64 {
    let term = |y: f64| if y <= 0.0 { 0.0 } else { -y * y.ln() };
    let x = x.clamp(0.0, 1.0);
    term(x) + term(1.0 - x)
}

/// One-spin-orbital entropy from `gamma_pp`.
pub fn single_orbital_entropy(psi: &WaveFunction, p: usize) -> Result<f64> {
    if p >= psi.n_modes() {
        return Err(Error::ModeOutOfRange {
            index: p,
            n_modes: psi.n_modes(),
        });
    }
    let x: f64 = psi
        .basis()
        .states()
        .iter()
        .zip(psi.coeffs())
        .filter(|(&b, _)| b >> p & 1 == 1)
        .map(|(_, c)| c.norm_sqr())
        .sum();
    Ok(binary_entropy(x))
}

/// Reduced density matrix of mode `p` by explicit partial trace over all
/// other modes, in the local basis `(|0>, |1>)`.
pub fn orbital_reduced_density(psi: &WaveFunction, p: usize) -> [[Complex64; 2]; 2] {
    let basis = psi.basis();
    let mut rho = [[Complex64::new(0.0, 0.0); 2]; 2];
    let bit = 1u64 << p;
    for (i, &si) in basis.states().iter().enumerate() {
        for (j, &sj) in basis.states().iter().enumerate() {
            // environment configurations must agree
            if (si & !bit) != (sj & !bit) {
                continue;
            }
            let a = ((si >> p) & 1) as usize;
            let b = ((sj >> p) & 1) as usize;
            // Jordan-Wigner string of the lower modes is common to both
            rho[a][b] += psi.coeffs()[i] * psi.coeffs()[j].conj();
        }
    }
    rho
}

/// Von Neumann entropy of a 2x2 density matrix.
pub fn entropy_2x2(rho: &[[Complex64; 2]; 2]) -> f64 {
    let a = rho[0][0].re;
    let d = rho[1][1].re;
    let b = rho[0][1].norm();
    let mean = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let term = |y: f64| if y <= 0.0 { 0.0 } else { -y * y.ln() };
    term(mean + disc) + term(mean - disc)
}

#[derive(Clone, Debug, Serialize)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    /// `sigma_1 >= sigma_2 >= ...`
    pub occupations: Vec<f64>,
    pub m: usize,
    pub omega: f64,
    /// `14 M ln(2 / omega)`
    pub decay_length: f64,
    /// `max_j sigma_j exp(j / decay_length)`, `j` counted from 1.
    pub fitted_c: f64,
    /// Least squares of `ln sigma_j` against `j` over `sigma_j` in
    /// `(1e-12, 1 - 1e-12)`; `None` with fewer than two such points.
    pub regression: Option<Regression>,
}

pub fn decay_report(rdm: &OneBodyRDM, m: usize, omega: f64) -> DecayReport {
    let mut occ = rdm.eigenvalues();
    occ.reverse();
    let decay_length = 14.0 * m as f64 * (2.0 / omega).ln();
    let fitted_c = occ
        .iter()
        .enumerate()
        .map(|(i, &s)| s.max(0.0) * ((i + 1) as f64 / decay_length).exp())
        .fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = occ
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 1e-12 && s < 1.0 - 1e-12)
        .map(|(i, &s)| ((i + 1) as f64, s.ln()))
        .collect();
    DecayReport {
        occupations: occ,
        m,
        omega,
        decay_length,
        fitted_c,
        regression: linear_fit(&pts),
    }
}

pub fn linear_fit(pts: &[(f64, f64)]) -> Option<Regression> {
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Some(Regression {
        slope,
        intercept,
        r_squared,
        points: pts.len(),
    })
}

/// Eigenvalues (descending) of `L^dag gamma L` for orthonormal columns `L`.
pub fn compression_eigenvalues(rdm: &OneBodyRDM, l: &CMat) -> Vec<f64> {
    let comp = l.adjoint() * &rdm.gamma * l;
    let mut vals = linalg::eigh(&comp).0;
    vals.reverse();
    vals
}

/// `<a_p^dag a_q>` from `apply_term`, one entry at a time.
pub fn one_rdm_entry_bruteforce(psi: &WaveFunction, p: usize, q: usize) -> Result<Complex64> {
    let n = psi.n_modes();
    let basis = psi.basis();
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, &bits) in basis.states().iter().enumerate() {
        if let Some((t, sign)) = crate::fock::apply_term(&[p], &[q], OccupationState(bits), n)? {
            let j = basis.index_of(t.bits()).expect("same sector");
            acc += psi.coeffs()[j].conj() * psi.coeffs()[i] * sign;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{enumerate_sector, DEFAULT_MAX_DIM};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn determinant_rdm_is_diagonal_projector() {
        let psi = WaveFunction::basis_state(enumerate_sector(4, 2, 10).unwrap(), 0b0011).unwrap();
        let g = one_rdm(&psi).unwrap();
        let expected = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(1.0), c(0.0), c(0.0)]));
        assert!((g.gamma.clone() - expected).norm() < 1e-15);
        assert!(g.idempotency_error() < 1e-15);
    }

    #[test]
    fn cat_state_rdm() {
        let basis = enumerate_sector(4, 2, 10).unwrap();
        let mut psi = WaveFunction::zeros(basis.clone());
        let h = 0.5f64.sqrt();
        psi.coeffs_mut()[basis.index_of(0b0011).unwrap()] = c(h);
        psi.coeffs_mut()[basis.index_of(0b1100).unwrap()] = c(h);
        let g = one_rdm(&psi).unwrap();
        let expected = CMat::from_diagonal_element(4, 4, c(0.5));
        assert!((g.gamma - expected).norm() < 1e-15);
    }

    #[test]
    fn rdm_matches_bruteforce_and_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = WaveFunction::random(enumerate_sector(6, 3, DEFAULT_MAX_DIM).unwrap(), &mut rng);
        let g = one_rdm(&psi).unwrap();
        for p in 0..6 {
            for q in 0..6 {
                let b = one_rdm_entry_bruteforce(&psi, p, q).unwrap();
                assert!((g.gamma[(p, q)] - b).norm() < 1e-12);
            }
        }
        assert!((g.trace() - 3.0).abs() < 1e-10);
        let ev = g.eigenvalues();
        assert!(ev.iter().all(|&x| (-1e-10..=1.0 + 1e-10).contains(&x)));
    }

    #[test]
    fn natural_orbitals_sorted_and_canonical() {
        let g = OneBodyRDM::new(CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.2), c(0.9), c(0.5)]))).unwrap();
        let (occ, orbs) = natural_orbitals(&g);
        assert_eq!(occ, vec![0.9, 0.5, 0.2]);
        assert_eq!(orbs[(1, 0)], c(1.0));
        assert_eq!(orbs[(2, 1)], c(1.0));
        assert_eq!(orbs[(0, 2)], c(1.0));
        // degenerate block gets the canonical basis whatever the input rotation
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = linalg::random_unitary(4, &mut rng);
        let d = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(1.0), c(0.0), c(0.0)]));
        let gamma = &u * d * u.adjoint();
        let (occ, orbs) = natural_orbitals(&OneBodyRDM::new(gamma.clone()).unwrap());
        assert!((occ[0] - 1.0).abs() < 1e-12 && occ[3].abs() < 1e-12);
        let (_, again) = natural_orbitals(&OneBodyRDM::new(gamma).unwrap());
        assert!((orbs - again).norm() < 1e-12);
    }

    #[test]
    fn entropy_values() {
        assert!((binary_entropy(0.5) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        let psi = WaveFunction::basis_state(enumerate_sector(3, 1, 10).unwrap(), 0b010).unwrap();
        for p in 0..3 {
            assert_eq!(single_orbital_entropy(&psi, p).unwrap(), 0.0);
        }
    }

    #[test]
    fn entropy_matches_partial_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = WaveFunction::random(enumerate_sector(6, 3, DEFAULT_MAX_DIM).unwrap(), &mut rng);
        for p in 0..6 {
            let s = single_orbital_entropy(&psi, p).unwrap();
            let rho = orbital_reduced_density(&psi, p);
            assert!((s - entropy_2x2(&rho)).abs() < 1e-12);
            assert!((0.0..=2f64.ln() + 1e-15).contains(&s));
        }
    }

    #[test]
    fn decay_report_on_determinant_and_free_state() {
        let psi = WaveFunction::basis_state(enumerate_sector(4, 2, 10).unwrap(), 0b0101).unwrap();
        let rep = decay_report(&one_rdm(&psi).unwrap(), 2, 0.2);
        assert!(rep.regression.is_none());
        assert!(rep.fitted_c >= rep.occupations[0]);
        let x = rep.decay_length;
        assert!((rep.fitted_c - (2.0 / x).exp()).abs() < 1e-12);
    }

    #[test]
    fn regression_recovers_exponential() {
        let pts: Vec<(f64, f64)> = (1..8).map(|j| (j as f64, -0.7 * j as f64 + 0.1)).collect();
        let r = linear_fit(&pts).unwrap();
        assert!((r.slope + 0.7).abs() < 1e-12 && (r.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interlacing_on_compressions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let psi = WaveFunction::random(enumerate_sector(6, 3, DEFAULT_MAX_DIM).unwrap(), &mut rng);
        let g = one_rdm(&psi).unwrap();
        let mut sigma = g.eigenvalues();
        sigma.reverse();
        let l = linalg::random_isometry(6, 3, &mut rng);
        let lam = compression_eigenvalues(&g, &l);
        for (k, &x) in lam.iter().enumerate() {
            assert!(x <= sigma[k] + 1e-10);
        }
    }
}
