//! Many-body states built from orbitals: Slater determinants, orbital
//! rotations, wedge composition, sum-of-Slater truncation and MPS
//! compression.
//!
//! A determinant with orbital matrix `X` (`N x n`) is
//! `a^dag(x_1) ... a^dag(x_n) |vac>` with `a^dag(x) = sum_p x_p a_p^dag`; its
//! amplitude on the occupation set `S` is `det X[S, :]` (rows ascending).
//!
//! An orbital rotation `U` acts as `a_p^dag -> sum_q U_qp a_q^dag`, so a
//! determinant's orbitals map as `X -> U X` and the one-body density matrix
//! `gamma_pq = <a_p^dag a_q>` maps as `gamma -> conj(U) gamma U^T`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{enumerate_sector, OccupationState, SectorBasis, WaveFunction};
use crate::linalg::{self, CMat};

pub const ORTHONORMAL_TOL: f64 = 1e-10;
pub const UNITARY_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Debug)]
pub struct SlaterDeterminant {
    orbitals: CMat,
}

impl SlaterDeterminant {
    pub fn new(orbitals: CMat) -> Result<Self> {
        let dev = linalg::orthonormality_deviation(&orbitals);
        if dev > ORTHONORMAL_TOL {
            return Err(Error::InvalidInput(format!(
                "orbital columns are not orthonormal (deviation {dev:.3e})"
            )));
        }
        Ok(SlaterDeterminant { orbitals })
    }

    pub fn from_real(orbitals: &linalg::RMat) -> Result<Self> {
        Self::new(linalg::to_complex(orbitals))
    }

    /// Determinant occupying the listed computational modes, in that order.
    pub fn from_modes(n_modes: usize, modes: &[usize]) -> Result<Self> {
        if let Some(&bad) = modes.iter().find(|&&m| m >= n_modes) {
            return Err(Error::ModeOutOfRange { index: bad, n_modes });
        }
        let x = CMat::from_fn(n_modes, modes.len(), |r, c| if modes[c] == r { ONE } else { ZERO });
        Self::new(x)
    }

    pub fn orbitals(&self) -> &CMat {
        &self.orbitals
    }

    pub fn n_modes(&self) -> usize {
        self.orbitals.nrows()
    }

    pub fn n_electrons(&self) -> usize {
        self.orbitals.ncols()
    }

    /// `gamma_pq = <a_p^dag a_q> = conj(X X^dag)_pq`.
    pub fn one_rdm(&self) -> CMat {
        (&self.orbitals * self.orbitals.adjoint()).map(|z| z.conj())
    }

    /// Determinant of the rotated orbitals `U X`.
    pub fn rotated(&self, u: &CMat) -> Result<Self> {
        check_unitary(u, self.n_modes())?;
        Ok(SlaterDeterminant {
            orbitals: u * &self.orbitals,
        })
    }
}

fn check_unitary(u: &CMat, n: usize) -> Result<()> {
    if u.nrows() != n || u.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} rotation for {n} modes",
            u.nrows(),
            u.ncols()
        )));
    }
    let dev = linalg::unitary_deviation(u);
    if dev > UNITARY_TOL {
        return Err(Error::NotUnitary { deviation: dev });
    }
    Ok(())
}

/// Expands a determinant by `n x n` minors.
pub fn determinant_to_wavefunction(det: &SlaterDeterminant, max_dim: usize) -> Result<WaveFunction> {
    let basis = enumerate_sector(det.n_modes(), det.n_electrons(), max_dim)?;
    Ok(determinant_in_basis(det, &basis))
}

pub(crate) fn determinant_in_basis(det: &SlaterDeterminant, basis: &Arc<SectorBasis>) -> WaveFunction {
    let x = det.orbitals();
    let n = det.n_electrons();
    let coeffs: Vec<Complex64> = basis
        .states()
        .par_iter()
        .with_min_len(256)
        .map(|&bits| {
            let rows: Vec<usize> = OccupationState(bits).occupied().collect();
            let sub = CMat::from_fn(n, n, |i, j| x[(rows[i], j)]);
            linalg::det(&sub)
        })
        .collect();
    WaveFunction::new(basis.clone(), coeffs).expect("dimension matches basis")
}

/// `<phi|psi>`.
pub fn overlap(phi: &WaveFunction, psi: &WaveFunction) -> Result<Complex64> {
    phi.inner(psi)
}

/// Applies `a^dag(x_1) ... a^dag(x_k)` (columns of `orbitals`, `x_k` acting
/// first). The result is not normalized.
pub fn create_orbitals(psi: &WaveFunction, orbitals: &CMat, max_dim: usize) -> Result<WaveFunction> {
    let n = psi.n_modes();
    if orbitals.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "orbitals have {} rows for {n} modes",
            orbitals.nrows()
        )));
    }
    let mut state = psi.clone();
    for k in (0..orbitals.ncols()).rev() {
        let x: Vec<Complex64> = orbitals.column(k).iter().copied().collect();
        state = create_one(&state, &x, max_dim)?;
    }
    Ok(state)
}

fn create_one(psi: &WaveFunction, x: &[Complex64], max_dim: usize) -> Result<WaveFunction> {
    let n = psi.n_modes();
    let ne = psi.n_electrons();
    if ne >= n {
        return Err(Error::InvalidSector(format!("cannot add a particle to {ne} in {n} modes")));
    }
    let target = enumerate_sector(n, ne + 1, max_dim)?;
    let src = psi.basis();
    let input = psi.coeffs();
    let coeffs: Vec<Complex64> = target
        .states()
        .par_iter()
        .with_min_len(256)
        .map(|&bits| {
            let t = OccupationState(bits);
            let mut acc = ZERO;
            for p in t.occupied() {
                if x[p] == ZERO {
                    continue;
                }
                let (s, sign) = t.annihilate(p).expect("occupied");
                if let Some(j) = src.index_of(s.bits()) {
                    acc += x[p] * input[j] * sign;
                }
            }
            acc
        })
        .collect();
    WaveFunction::new(target, coeffs)
}

/// Places a state on `n_local` modes onto the strictly increasing global
/// modes `modes` of an `n_modes` system.
pub fn embed_modes(psi: &WaveFunction, modes: &[usize], n_modes: usize, max_dim: usize) -> Result<WaveFunction> {
    if psi.n_modes() != modes.len() {
        return Err(Error::DimensionMismatch(format!(
            "state on {} modes, {} target modes",
            psi.n_modes(),
            modes.len()
        )));
    }
    if modes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("target modes must be strictly increasing".into()));
    }
    if let Some(&bad) = modes.iter().find(|&&m| m >= n_modes) {
        return Err(Error::ModeOutOfRange { index: bad, n_modes });
    }
    let basis = enumerate_sector(n_modes, psi.n_electrons(), max_dim)?;
    let mut out = WaveFunction::zeros(basis.clone());
    for (i, &bits) in psi.basis().states().iter().enumerate() {
        let global = OccupationState(bits)
            .occupied()
            .fold(0u64, |acc, p| acc | (1 << modes[p]));
        let j = basis.index_of(global).expect("same particle number");
        out.coeffs_mut()[j] = psi.coeffs()[i];
    }
    Ok(out)
}

/// `|phi_A> ^ |Theta_C>`: for each basis term `a^dag_S` of `phi_A` (on the
/// global modes `modes_a`), the result is `a^dag_S |Theta_C>`.
pub fn wedge(
    phi_a: &WaveFunction,
    modes_a: &[usize],
    theta: &SlaterDeterminant,
    modes_c: &[usize],
    max_dim: usize,
) -> Result<WaveFunction> {
    let n = theta.n_modes();
    if let Some(p) = modes_a.iter().find(|p| modes_c.contains(p)) {
        return Err(Error::InvalidInput(format!("mode {p} is in both mode sets")));
    }
    let mask_c = modes_c.iter().try_fold(0u64, |acc, &p| {
        if p >= n {
            Err(Error::ModeOutOfRange { index: p, n_modes: n })
        } else {
            Ok(acc | (1 << p))
        }
    })?;
    let x = theta.orbitals();
    for r in 0..n {
        if mask_c >> r & 1 == 0 && (0..x.ncols()).any(|c| x[(r, c)].norm() > 1e-12) {
            return Err(Error::InvalidInput(format!("determinant has weight on mode {r} outside its mode set")));
        }
    }
    let phi = embed_modes(phi_a, modes_a, n, max_dim)?;
    let theta_wf = determinant_to_wavefunction(theta, max_dim)?;
    let basis = enumerate_sector(n, phi.n_electrons() + theta.n_electrons(), max_dim)?;
    let mut out = WaveFunction::zeros(basis.clone());
    let theta_terms: Vec<(u64, Complex64)> = theta_wf
        .basis()
        .states()
        .iter()
        .zip(theta_wf.coeffs())
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(&b, &c)| (b, c))
        .collect();
    for (&s, &cs) in phi.basis().states().iter().zip(phi.coeffs()) {
        if cs == ZERO {
            continue;
        }
        for &(t, ct) in &theta_terms {
            let sign = wedge_sign(s, t);
            let j = basis.index_of(s | t).expect("disjoint supports");
            out.coeffs_mut()[j] += cs * ct * sign;
        }
    }
    Ok(out)
}

/// Sign of `a^dag_S a^dag_T |vac> = sign |S u T>` for disjoint sets: parity
/// of pairs `p in S`, `q in T` with `p > q`.
pub fn wedge_sign(s: u64, t: u64) -> f64 {
    let mut pairs = 0u32;
    for p in OccupationState(s).occupied() {
        pairs += (t & ((1u64 << p) - 1)).count_ones();
    }
    if pairs.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Many-body action of a single-particle unitary on a general state, via a
/// Givens factorization `U = G_1 ... G_m D`.
pub fn rotate_orbitals(psi: &WaveFunction, u: &CMat) -> Result<WaveFunction> {
    let n = psi.n_modes();
    check_unitary(u, n)?;
    let (givens, phases) = givens_decomposition(u);
    let mut state = apply_phases(psi, &phases);
    for g in givens.iter().rev() {
        state = apply_givens(&state, g);
    }
    Ok(state)
}

/// A 2x2 unitary acting on modes `p < q`.
#[derive(Clone, Debug)]
pub struct Givens {
    pub p: usize,
    pub q: usize,
    /// `[[u_pp, u_pq], [u_qp, u_qq]]`
    pub m: [[Complex64; 2]; 2],
}

/// Returns `(G_1, ..., G_m)` and the diagonal of `D` with `U = G_1 ... G_m D`.
pub fn givens_decomposition(u: &CMat) -> (Vec<Givens>, Vec<Complex64>) {
    let n = u.nrows();
    let mut a = u.clone();
    let mut out = Vec::new();
    for j in 0..n {
        for i in (j + 1..n).rev() {
            let (x, y) = (a[(i - 1, j)], a[(i, j)]);
            if y.norm() < 1e-15 {
                continue;
            }
            let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
            let g = [[x / r, -y.conj() / r], [y / r, x.conj() / r]];
            // a <- g^dag a on rows (i-1, i)
            for c in 0..n {
                let (top, bot) = (a[(i - 1, c)], a[(i, c)]);
                a[(i - 1, c)] = g[0][0].conj() * top + g[1][0].conj() * bot;
                a[(i, c)] = g[0][1].conj() * top + g[1][1].conj() * bot;
            }
            out.push(Givens { p: i - 1, q: i, m: g });
        }
    }
    let phases = (0..n).map(|k| a[(k, k)]).collect();
    (out, phases)
}

fn apply_phases(psi: &WaveFunction, phases: &[Complex64]) -> WaveFunction {
    let basis = psi.basis().clone();
    let coeffs = basis
        .states()
        .par_iter()
        .zip(psi.coeffs().par_iter())
        .map(|(&bits, &c)| OccupationState(bits).occupied().fold(c, |acc, p| acc * phases[p]))
        .collect();
    WaveFunction::new(basis, coeffs).expect("same basis")
}

/// Two-mode kernel: `a_p^dag -> m_pp a_p^dag + m_qp a_q^dag`,
/// `a_q^dag -> m_pq a_p^dag + m_qq a_q^dag`.
pub fn apply_givens(psi: &WaveFunction, g: &Givens) -> WaveFunction {
    let basis = psi.basis().clone();
    let input = psi.coeffs();
    let (p, q) = (g.p, g.q);
    let between = if q > p + 1 { ((1u64 << q) - 1) & !((1u64 << (p + 1)) - 1) } else { 0 };
    let det = g.m[0][0] * g.m[1][1] - g.m[0][1] * g.m[1][0];
    let coeffs = (0..basis.dim())
        .into_par_iter()
        .with_min_len(256)
        .map(|i| {
            let bits = basis.states()[i];
            let (op, oq) = (bits >> p & 1 == 1, bits >> q & 1 == 1);
            match (op, oq) {
                (false, false) => input[i],
                (true, true) => input[i] * det,
                _ => {
                    let partner = bits ^ (1 << p) ^ (1 << q);
                    let j = basis.index_of(partner).expect("same particle number");
                    let sign = if (bits & between).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
                    if op {
                        g.m[0][0] * input[i] + g.m[0][1] * input[j] * sign
                    } else {
                        g.m[1][1] * input[i] + g.m[1][0] * input[j] * sign
                    }
                }
            }
        })
        .collect();
    WaveFunction::new(basis, coeffs).expect("same basis")
}

/// Top-`L` truncation of a CI expansion.
#[derive(Clone, Debug)]
pub struct SumOfSlater {
    pub n_modes: usize,
    pub n_electrons: usize,
    /// `(coefficient, occupation bits)` by descending modulus, ties by
    /// ascending bits.
    pub terms: Vec<(Complex64, u64)>,
    pub renormalized: bool,
    /// `sum_{i <= L} |C_i|^2` before renormalization.
    pub captured_weight: f64,
}

impl SumOfSlater {
    pub fn to_wavefunction(&self, basis: &Arc<SectorBasis>) -> Result<WaveFunction> {
        if basis.n_modes() != self.n_modes || basis.n_electrons() != self.n_electrons {
            return Err(Error::DimensionMismatch("sum-of-Slater sector differs from basis".into()));
        }
        let mut psi = WaveFunction::zeros(basis.clone());
        for &(c, bits) in &self.terms {
            let j = basis.index_of(bits).expect("term in sector");
            psi.coeffs_mut()[j] = c;
        }
        Ok(psi)
    }
}

pub fn sum_of_slater(psi: &WaveFunction, l: usize) -> Result<SumOfSlater> {
    let dim = psi.dim();
    if l == 0 || l > dim {
        return Err(Error::InvalidInput(format!("L = {l} outside 1..={dim}")));
    }
    let mut order: Vec<usize> = (0..dim).collect();
    let coeffs = psi.coeffs();
    let states = psi.basis().states();
    order.sort_by(|&a, &b| {
        coeffs[b]
            .norm()
            .total_cmp(&coeffs[a].norm())
            .then(states[a].cmp(&states[b]))
    });
    let kept = &order[..l];
    let weight: f64 = kept.iter().map(|&i| coeffs[i].norm_sqr()).sum();
    let scale = if weight > 0.0 { 1.0 / weight.sqrt() } else { 0.0 };
    Ok(SumOfSlater {
        n_modes: psi.n_modes(),
        n_electrons: psi.n_electrons(),
        terms: kept.iter().map(|&i| (coeffs[i] * scale, states[i])).collect(),
        renormalized: weight > 0.0,
        captured_weight: weight,
    })
}

/// Open-boundary matrix product state over local dimension 2, site 0 first.
#[derive(Clone, Debug)]
pub struct MpsState {
    pub n_modes: usize,
    /// Particle number of the state it was compressed from.
    pub n_electrons: usize,
    /// `tensors[k][s]` is the `chi_{k} x chi_{k+1}` matrix for occupation `s`.
    pub tensors: Vec<[CMat; 2]>,
    /// Discarded weight (sum of squared dropped singular values) per cut.
    pub truncation_errors: Vec<f64>,
}

/// Largest mode count for dense 2^N compression.
pub const MPS_MAX_MODES: usize = 24;

impl MpsState {
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors.iter().skip(1).map(|t| t[0].nrows()).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Amplitude of an occupation pattern.
    pub fn amplitude(&self, bits: u64) -> Complex64 {
        let mut row = DMatrix::from_element(1, 1, ONE);
        for (k, t) in self.tensors.iter().enumerate() {
            row *= &t[(bits >> k & 1) as usize];
        }
        row[(0, 0)]
    }

    /// Squared norm over the full Fock space.
    pub fn norm_sqr(&self) -> f64 {
        let mut env = DMatrix::from_element(1, 1, ONE);
        for t in &self.tensors {
            env = t[0].adjoint() * &env * &t[0] + t[1].adjoint() * &env * &t[1];
        }
        env[(0, 0)].re
    }

    /// Weight of the particle-number sector it was compressed from.
    pub fn sector_weight(&self, max_dim: usize) -> Result<f64> {
        let basis = enumerate_sector(self.n_modes, self.n_electrons, max_dim)?;
        Ok(basis.states().iter().map(|&b| self.amplitude(b).norm_sqr()).sum())
    }

    /// `<mps|psi>` with the MPS normalized on the full Fock space.
    pub fn overlap(&self, psi: &WaveFunction) -> Result<Complex64> {
        if psi.n_modes() != self.n_modes {
            return Err(Error::DimensionMismatch("MPS and state mode counts differ".into()));
        }
        Ok(psi
            .basis()
            .states()
            .iter()
            .zip(psi.coeffs())
            .map(|(&b, &c)| self.amplitude(b).conj() * c)
            .sum())
    }
}

/// Sequential left-to-right SVD of the full amplitude tensor, keeping at
/// most `d` singular values per cut (values below `1e-14` relative to the
/// largest are dropped), then normalized. The result is left-canonical.
pub fn mps_compress(psi: &WaveFunction, d: usize) -> Result<MpsState> {
    if d < 1 {
        return Err(Error::InvalidInput("bond dimension must be at least 1".into()));
    }
    let n = psi.n_modes();
    if n > MPS_MAX_MODES {
        return Err(Error::InvalidInput(format!("MPS compression limited to {MPS_MAX_MODES} modes")));
    }
    if n == 0 {
        return Err(Error::InvalidInput("MPS needs at least one mode".into()));
    }
    // full vector with site 0 as the most significant index
    let full_dim = 1usize << n;
    let mut full = vec![ZERO; full_dim];
    for (&bits, &c) in psi.basis().states().iter().zip(psi.coeffs()) {
        full[tensor_index(bits, n)] = c;
    }
    let mut tensors = Vec::with_capacity(n);
    let mut errors = Vec::with_capacity(n.saturating_sub(1));
    let mut chi = 1usize;
    let mut rest = full;
    for _ in 0..n - 1 {
        let cols = rest.len() / (chi * 2);
        // rows (alpha, s), row-major remainder
        let mat = CMat::from_fn(chi * 2, cols, |r, c| rest[r * cols + c]);
        let svd = mat.svd(true, true);
        let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
        let smax = svd.singular_values[order[0]];
        let keep: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&i| svd.singular_values[i] > 1e-14 * smax.max(1e-300))
            .take(d)
            .collect();
        let keep = if keep.is_empty() { vec![order[0]] } else { keep };
        let dropped: f64 = order
            .iter()
            .filter(|i| !keep.contains(i))
            .map(|&i| svd.singular_values[i].powi(2))
            .sum();
        errors.push(dropped);
        let new_chi = keep.len();
        let mut a0 = CMat::zeros(chi, new_chi);
        let mut a1 = CMat::zeros(chi, new_chi);
        for alpha in 0..chi {
            for (b, &kidx) in keep.iter().enumerate() {
                a0[(alpha, b)] = u[(alpha * 2, kidx)];
                a1[(alpha, b)] = u[(alpha * 2 + 1, kidx)];
            }
        }
        tensors.push([a0, a1]);
        let mut next = vec![ZERO; new_chi * cols];
        for (b, &kidx) in keep.iter().enumerate() {
            let s = svd.singular_values[kidx];
            for c in 0..cols {
                next[b * cols + c] = vt[(kidx, c)] * s;
            }
        }
        rest = next;
        chi = new_chi;
    }
    let mut last0 = CMat::zeros(chi, 1);
    let mut last1 = CMat::zeros(chi, 1);
    for alpha in 0..chi {
        last0[(alpha, 0)] = rest[alpha * 2];
        last1[(alpha, 0)] = rest[alpha * 2 + 1];
    }
    let norm = (last0.norm_squared() + last1.norm_squared()).sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidInput("cannot compress a zero state".into()));
    }
    let scale = Complex64::new(1.0 / norm, 0.0);
    tensors.push([last0 * scale, last1 * scale]);
    Ok(MpsState {
        n_modes: n,
        n_electrons: psi.n_electrons(),
        tensors,
        truncation_errors: errors,
    })
}

fn tensor_index(bits: u64, n: usize) -> usize {
    (0..n).fold(0usize, |acc, p| (acc << 1) | ((bits >> p & 1) as usize))
}

/// Contracts the MPS on its particle-number sector and renormalizes.
pub fn mps_to_wavefunction(m: &MpsState, max_dim: usize) -> Result<WaveFunction> {
    let basis = enumerate_sector(m.n_modes, m.n_electrons, max_dim)?;
    let coeffs = basis.states().par_iter().map(|&b| m.amplitude(b)).collect();
    WaveFunction::new(basis, coeffs)?.normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::DEFAULT_MAX_DIM;
    use crate::analysis::one_rdm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn computational_determinant_is_basis_state() {
        let det = SlaterDeterminant::from_modes(5, &[1, 3]).unwrap();
        let wf = determinant_to_wavefunction(&det, DEFAULT_MAX_DIM).unwrap();
        assert_eq!(wf.amplitude(0b01010), c(1.0));
        assert!((wf.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_particle_amplitudes() {
        let th: f64 = 0.37;
        let det = SlaterDeterminant::new(CMat::from_column_slice(2, 1, &[c(th.cos()), c(th.sin())])).unwrap();
        let wf = determinant_to_wavefunction(&det, DEFAULT_MAX_DIM).unwrap();
        assert!((wf.coeffs()[0] - c(th.cos())).norm() < 1e-15);
        assert!((wf.coeffs()[1] - c(th.sin())).norm() < 1e-15);
    }

    #[test]
    fn determinant_rdm_matches_orbitals() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let det = SlaterDeterminant::new(linalg::random_isometry(6, 3, &mut rng)).unwrap();
        let wf = determinant_to_wavefunction(&det, DEFAULT_MAX_DIM).unwrap();
        assert!((wf.norm() - 1.0).abs() < 1e-10);
        let gamma = one_rdm(&wf).unwrap().gamma;
        let x = det.orbitals();
        let expected = (x * x.adjoint()).transpose();
        assert!((gamma - expected).norm() < 1e-10);
    }

    #[test]
    fn rejects_non_orthonormal_orbitals() {
        let x = CMat::from_column_slice(2, 2, &[c(1.0), c(0.0), c(1.0), c(0.0)]);
        assert!(SlaterDeterminant::new(x).is_err());
    }

    #[test]
    fn wedge_example_sign() {
        let basis = enumerate_sector(2, 2, DEFAULT_MAX_DIM).unwrap();
        let phi = WaveFunction::basis_state(basis, 0b11).unwrap();
        let theta = SlaterDeterminant::from_modes(4, &[2]).unwrap();
        let out = wedge(&phi, &[0, 1], &theta, &[2], DEFAULT_MAX_DIM).unwrap();
        assert_eq!(out.amplitude(0b0111), c(1.0));
        assert!(wedge(&phi, &[0, 2], &theta, &[2], DEFAULT_MAX_DIM).is_err());
    }

    #[test]
    fn wedge_with_vacuum_embeds_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let local = linalg::random_isometry(3, 2, &mut rng);
        let mut x = CMat::zeros(5, 2);
        for (i, &r) in [1usize, 3, 4].iter().enumerate() {
            for j in 0..2 {
                x[(r, j)] = local[(i, j)];
            }
        }
        let theta = SlaterDeterminant::new(x).unwrap();
        let vac = WaveFunction::basis_state(enumerate_sector(2, 0, 10).unwrap(), 0).unwrap();
        let out = wedge(&vac, &[0, 2], &theta, &[1, 3, 4], DEFAULT_MAX_DIM).unwrap();
        let direct = determinant_to_wavefunction(&theta, DEFAULT_MAX_DIM).unwrap();
        assert!((out.inner(&direct).unwrap() - c(1.0)).norm() < 1e-12);
    }

    #[test]
    fn wedge_preserves_norm_and_blocks_rdm() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a_modes = [0usize, 2, 5];
        let c_modes = [1usize, 3, 4, 6];
        let phi = WaveFunction::random(enumerate_sector(3, 1, 10).unwrap(), &mut rng);
        let local = linalg::random_isometry(4, 2, &mut rng);
        let mut x = CMat::zeros(7, 2);
        for (i, &r) in c_modes.iter().enumerate() {
            for j in 0..2 {
                x[(r, j)] = local[(i, j)];
            }
        }
        let theta = SlaterDeterminant::new(x).unwrap();
        let out = wedge(&phi, &a_modes, &theta, &c_modes, DEFAULT_MAX_DIM).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-10);
        let gamma = one_rdm(&out).unwrap().gamma;
        for &p in &a_modes {
            for &q in &c_modes {
                assert!(gamma[(p, q)].norm() < 1e-10);
            }
        }
    }

    #[test]
    fn wedge_agrees_with_orbital_creation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let phi = WaveFunction::random(enumerate_sector(2, 1, 10).unwrap(), &mut rng);
        for k in [1usize, 2] {
            let local = linalg::random_isometry(3, k, &mut rng);
            let mut x = CMat::zeros(5, k);
            for (i, &r) in [2usize, 3, 4].iter().enumerate() {
                for j in 0..k {
                    x[(r, j)] = local[(i, j)];
                }
            }
            let theta = SlaterDeterminant::new(x.clone()).unwrap();
            let w = wedge(&phi, &[0, 1], &theta, &[2, 3, 4], DEFAULT_MAX_DIM).unwrap();
            let embedded = embed_modes(&phi, &[0, 1], 5, DEFAULT_MAX_DIM).unwrap();
            let created = create_orbitals(&embedded, &x, DEFAULT_MAX_DIM).unwrap();
            // moving k creators past one: (-1)^k
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!((w.inner(&created).unwrap() - c(sign)).norm() < 1e-12);
        }
    }

    #[test]
    fn rotation_identity_and_phases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let psi = WaveFunction::random(enumerate_sector(5, 2, 100).unwrap(), &mut rng);
        let same = rotate_orbitals(&psi, &CMat::identity(5, 5)).unwrap();
        assert!((same.inner(&psi).unwrap() - c(1.0)).norm() < 1e-14);
        let ph: Vec<Complex64> = (0..5).map(|k| Complex64::from_polar(1.0, 0.3 * k as f64)).collect();
        let d = CMat::from_diagonal(&nalgebra::DVector::from_vec(ph.clone()));
        let out = rotate_orbitals(&psi, &d).unwrap();
        for (i, &bits) in psi.basis().states().iter().enumerate() {
            let f: Complex64 = OccupationState(bits).occupied().map(|p| ph[p]).product();
            assert!((out.coeffs()[i] - psi.coeffs()[i] * f).norm() < 1e-14);
        }
    }

    #[test]
    fn rotation_matches_minor_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (n, k) in [(4, 2), (6, 3), (7, 2)] {
            let det = SlaterDeterminant::new(linalg::random_isometry(n, k, &mut rng)).unwrap();
            let u = linalg::random_unitary(n, &mut rng);
            let wf = determinant_to_wavefunction(&det, DEFAULT_MAX_DIM).unwrap();
            let kernel = rotate_orbitals(&wf, &u).unwrap();
            let minor = determinant_to_wavefunction(&det.rotated(&u).unwrap(), DEFAULT_MAX_DIM).unwrap();
            assert!((kernel.inner(&minor).unwrap() - c(1.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn rotation_composes_and_transforms_rdm() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let psi = WaveFunction::random(enumerate_sector(6, 3, 100).unwrap(), &mut rng);
        let u1 = linalg::random_unitary(6, &mut rng);
        let u2 = linalg::random_unitary(6, &mut rng);
        let two_step = rotate_orbitals(&rotate_orbitals(&psi, &u1).unwrap(), &u2).unwrap();
        let one_step = rotate_orbitals(&psi, &(&u2 * &u1)).unwrap();
        assert!((two_step.inner(&one_step).unwrap() - c(1.0)).norm() < 1e-10);
        let g0 = one_rdm(&psi).unwrap().gamma;
        let g1 = one_rdm(&rotate_orbitals(&psi, &u1).unwrap()).unwrap().gamma;
        let expected = u1.map(|z| z.conj()) * g0 * u1.transpose();
        assert!((g1 - expected).norm() < 1e-10);
    }

    #[test]
    fn rejects_non_unitary() {
        let psi = WaveFunction::basis_state(enumerate_sector(2, 1, 10).unwrap(), 1).unwrap();
        let u = CMat::from_element(2, 2, c(1.0));
        assert!(matches!(rotate_orbitals(&psi, &u), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn givens_product_reconstructs_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let u = linalg::random_unitary(5, &mut rng);
        let (gs, d) = givens_decomposition(&u);
        let mut prod = CMat::identity(5, 5);
        for g in &gs {
            let mut full = CMat::identity(5, 5);
            full[(g.p, g.p)] = g.m[0][0];
            full[(g.p, g.q)] = g.m[0][1];
            full[(g.q, g.p)] = g.m[1][0];
            full[(g.q, g.q)] = g.m[1][1];
            prod *= full;
        }
        prod *= CMat::from_diagonal(&nalgebra::DVector::from_vec(d));
        assert!((prod - u).norm() < 1e-12);
    }

    #[test]
    fn sos_identity_and_tie_break() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = WaveFunction::random(enumerate_sector(6, 3, 100).unwrap(), &mut rng);
        let mut prev = 0.0;
        for l in 1..=psi.dim() {
            let sos = sum_of_slater(&psi, l).unwrap();
            let wf = sos.to_wavefunction(psi.basis()).unwrap();
            assert!((wf.norm() - 1.0).abs() < 1e-12);
            let ov = wf.inner(&psi).unwrap().norm();
            assert!((ov - sos.captured_weight.sqrt()).abs() < 1e-12);
            assert!(ov >= prev - 1e-15);
            prev = ov;
        }
        assert!((prev - 1.0).abs() < 1e-12);
        let basis = enumerate_sector(3, 1, 10).unwrap();
        let flat = WaveFunction::new(basis, vec![c(0.5f64.sqrt()), c(0.0), c(-(0.5f64.sqrt()))]).unwrap();
        let sos = sum_of_slater(&flat, 2).unwrap();
        assert_eq!(sos.terms.iter().map(|t| t.1).collect::<Vec<_>>(), vec![0b001, 0b100]);
        assert!(sum_of_slater(&flat, 0).is_err());
    }

    #[test]
    fn mps_lossless_and_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let psi = WaveFunction::random(enumerate_sector(8, 4, 100).unwrap(), &mut rng);
        let m = mps_compress(&psi, 16).unwrap();
        assert!((m.overlap(&psi).unwrap().norm() - 1.0).abs() < 1e-10);
        assert!((m.norm_sqr() - 1.0).abs() < 1e-10);
        let back = mps_to_wavefunction(&m, DEFAULT_MAX_DIM).unwrap();
        assert!((back.inner(&psi).unwrap().norm() - 1.0).abs() < 1e-10);
        let det = WaveFunction::basis_state(enumerate_sector(6, 3, 100).unwrap(), 0b101100).unwrap();
        let p = mps_compress(&det, 1).unwrap();
        assert_eq!(p.max_bond(), 1);
        assert!((p.overlap(&det).unwrap().norm() - 1.0).abs() < 1e-12);
        assert!(mps_compress(&det, 0).is_err());
    }

    #[test]
    fn mps_left_canonical_and_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let psi = WaveFunction::random(enumerate_sector(8, 4, 100).unwrap(), &mut rng);
        let m = mps_compress(&psi, 4).unwrap();
        assert!(m.max_bond() <= 4);
        for t in &m.tensors[..m.tensors.len() - 1] {
            let id = t[0].adjoint() * &t[0] + t[1].adjoint() * &t[1];
            assert!((id.clone() - CMat::identity(id.nrows(), id.nrows())).norm() < 1e-10);
        }
        assert!((m.norm_sqr() - 1.0).abs() < 1e-10);
        let back = mps_to_wavefunction(&m, DEFAULT_MAX_DIM).unwrap();
        assert!((back.norm() - 1.0).abs() < 1e-10);
    }
}
