//! Fixed-particle-number Fock space in the occupation-number representation.
//!
//! Mode `p` is occupied iff bit `p` of the occupation word is set. Basis
//! states are ordered as `|n_0 n_1 ...> = (a_0^dag)^{n_0} (a_1^dag)^{n_1} ... |vac>`,
//! so a ladder operator on mode `p` picks up the parity of the occupied
//! modes strictly below `p`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::MolecularIntegrals;

/// Largest supported mode count (single machine-word masks).
pub const MAX_MODES: usize = 63;

/// Default cap on the sector dimension.
pub const DEFAULT_MAX_DIM: usize = 1 << 21;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct OccupationState(pub u64);

impl OccupationState {
    #[inline]
    pub fn bits(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn is_occupied(self, p: usize) -> bool {
        (self.0 >> p) & 1 == 1
    }

    #[inline]
    pub fn count(self) -> u32 {
        self.0.count_ones()
    }

    /// `+1.0` or `-1.0` from the occupied modes strictly below `p`.
    #[inline]
    pub fn parity_below(self, p: usize) -> f64 {
        if (self.0 & ((1u64 << p) - 1)).count_ones() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    #[inline]
    pub fn create(self, p: usize) -> Option<(OccupationState, f64)> {
        if self.is_occupied(p) {
            None
        } else {
            Some((OccupationState(self.0 | (1 << p)), self.parity_below(p)))
        }
    }

    #[inline]
    pub fn annihilate(self, p: usize) -> Option<(OccupationState, f64)> {
        if self.is_occupied(p) {
            Some((OccupationState(self.0 & !(1 << p)), self.parity_below(p)))
        } else {
            None
        }
    }

    /// Occupied modes in ascending order.
    pub fn occupied(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let p = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(p)
            }
        })
    }

    /// Occupation string with mode 0 first, e.g. `1100`.
    pub fn to_occupation_string(self, n_modes: usize) -> String {
        (0..n_modes)
            .map(|p| if self.is_occupied(p) { '1' } else { '0' })
            .collect()
    }
}

impl fmt::Display for OccupationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#b}", self.0)
    }
}

/// A single ladder operator, `a_p^dag` when `dagger` is set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LadderOp {
    pub mode: usize,
    pub dagger: bool,
}

impl LadderOp {
    pub fn create(mode: usize) -> Self {
        LadderOp { mode, dagger: true }
    }
    pub fn annihilate(mode: usize) -> Self {
        LadderOp {
            mode,
            dagger: false,
        }
    }
}

/// Applies a product of ladder operators, written left to right, to a basis
/// state. The rightmost operator acts first. Returns `None` when the result
/// vanishes. Modes are not range checked.
pub fn apply_ladder_string(ops: &[LadderOp], s: OccupationState) -> Option<(OccupationState, f64)> {
    let mut state = s;
    let mut sign = 1.0;
    for op in ops.iter().rev() {
        let (next, phase) = if op.dagger {
            state.create(op.mode)?
        } else {
            state.annihilate(op.mode)?
        };
        state = next;
        sign *= phase;
    }
    Some((state, sign))
}

/// Applies `a^dag_{c_0} ... a^dag_{c_k} a_{d_0} ... a_{d_l}` to `s`, right to left.
pub fn apply_term(
    creators: &[usize],
    annihilators: &[usize],
    s: OccupationState,
    n_modes: usize,
) -> Result<Option<(OccupationState, f64)>> {
    for list in [creators, annihilators] {
        for (i, &p) in list.iter().enumerate() {
            if p >= n_modes {
                return Err(Error::ModeOutOfRange { index: p, n_modes });
            }
            if list[..i].contains(&p) {
                return Err(Error::DuplicateMode(p));
            }
        }
    }
    let mut state = s;
    let mut sign = 1.0;
    for &q in annihilators.iter().rev() {
        match state.annihilate(q) {
            Some((next, phase)) => {
                state = next;
                sign *= phase;
            }
            None => return Ok(None),
        }
    }
    for &p in creators.iter().rev() {
        match state.create(p) {
            Some((next, phase)) => {
                state = next;
                sign *= phase;
            }
            None => return Ok(None),
        }
    }
    Ok(Some((state, sign)))
}

/// Exact binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// All occupation patterns of `n_electrons` in `n_modes`, in increasing
/// integer order, with an exact rank lookup.
#[derive(Debug, PartialEq, Eq)]
pub struct SectorBasis {
    n_modes: usize,
    n_electrons: usize,
    states: Vec<u64>,
    // binom[p][k] = C(p, k) for ranking
    binom: Vec<Vec<u64>>,
}

impl SectorBasis {
    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_electrons(&self) -> usize {
        self.n_electrons
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    #[inline]
    pub fn state(&self, i: usize) -> OccupationState {
        OccupationState(self.states[i])
    }

    /// Position of `bits` in the basis (combinatorial number system rank).
    #[inline]
    pub fn index_of(&self, bits: u64) -> Option<usize> {
        if bits.count_ones() as usize != self.n_electrons
            || (self.n_modes < 64 && bits >> self.n_modes != 0)
        {
            return None;
        }
        let mut rank: u64 = 0;
        let mut rest = bits;
        let mut k = 1;
        while rest != 0 {
            let p = rest.trailing_zeros() as usize;
            rank += self.binom[p][k];
            rest &= rest - 1;
            k += 1;
        }
        Some(rank as usize)
    }

    pub fn same_sector(&self, other: &SectorBasis) -> bool {
        self.n_modes == other.n_modes && self.n_electrons == other.n_electrons
    }
}

/// Builds the canonical `n_electrons`-particle basis on `n_modes` modes.
pub fn enumerate_sector(n_modes: usize, n_electrons: usize, max_dim: usize) -> Result<Arc<SectorBasis>> {
    if n_modes > MAX_MODES {
        return Err(Error::InvalidSector(format!(
            "{n_modes} modes exceeds the {MAX_MODES}-mode limit"
        )));
    }
    if n_electrons > n_modes {
        return Err(Error::InvalidSector(format!(
            "{n_electrons} electrons in {n_modes} modes"
        )));
    }
    let dim = binomial(n_modes, n_electrons);
    if dim > max_dim as u128 {
        return Err(Error::SectorTooLarge {
            n_modes,
            n_electrons,
            dim,
            cap: max_dim,
        });
    }
    let mut states = Vec::with_capacity(dim as usize);
    if n_electrons == 0 {
        states.push(0);
    } else {
        // Gosper's hack walks same-popcount words in increasing order.
        let mut v: u64 = (1u64 << n_electrons) - 1;
        let limit: u64 = 1u64 << n_modes;
        while v < limit {
            states.push(v);
            let t = v | (v - 1);
            let w = (t + 1) | (((!t & (t + 1)) - 1) >> (v.trailing_zeros() + 1));
            if w <= v {
                break;
            }
            v = w;
        }
    }
    debug_assert_eq!(states.len() as u128, dim);
    let binom = (0..=n_modes.max(1))
        .map(|p| (0..=n_electrons + 1).map(|k| binomial(p, k) as u64).collect())
        .collect();
    Ok(Arc::new(SectorBasis {
        n_modes,
        n_electrons,
        states,
        binom,
    }))
}

/// Complex amplitudes over a sector basis.
#[derive(Clone, Debug)]
pub struct WaveFunction {
    basis: Arc<SectorBasis>,
    coeffs: Vec<Complex64>,
}

impl WaveFunction {
    pub fn new(basis: Arc<SectorBasis>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != basis.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for a basis of dimension {}",
                coeffs.len(),
                basis.dim()
            )));
        }
        Ok(WaveFunction { basis, coeffs })
    }

    pub fn zeros(basis: Arc<SectorBasis>) -> Self {
        let coeffs = vec![Complex64::new(0.0, 0.0); basis.dim()];
        WaveFunction { basis, coeffs }
    }

    /// The basis state with occupation `bits`, amplitude 1.
    pub fn basis_state(basis: Arc<SectorBasis>, bits: u64) -> Result<Self> {
        let i = basis.index_of(bits).ok_or_else(|| {
            Error::InvalidInput(format!("occupation {bits:#b} is not in the sector"))
        })?;
        let mut psi = WaveFunction::zeros(basis);
        psi.coeffs[i] = Complex64::new(1.0, 0.0);
        Ok(psi)
    }

    /// Normalized state with independent standard-normal real and imaginary parts.
    pub fn random<R: Rng + ?Sized>(basis: Arc<SectorBasis>, rng: &mut R) -> Self {
        let coeffs = (0..basis.dim())
            .map(|_| Complex64::new(linalg::standard_normal(rng), linalg::standard_normal(rng)))
            .collect();
        let mut psi = WaveFunction { basis, coeffs };
        psi.normalize().expect("random state has nonzero norm");
        psi
    }

    /// Normalized state with real amplitudes.
    pub fn random_real<R: Rng + ?Sized>(basis: Arc<SectorBasis>, rng: &mut R) -> Self {
        let coeffs = (0..basis.dim())
            .map(|_| Complex64::new(linalg::standard_normal(rng), 0.0))
            .collect();
        let mut psi = WaveFunction { basis, coeffs };
        psi.normalize().expect("random state has nonzero norm");
        psi
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn n_modes(&self) -> usize {
        self.basis.n_modes()
    }

    pub fn n_electrons(&self) -> usize {
        self.basis.n_electrons()
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn amplitude(&self, bits: u64) -> Complex64 {
        self.basis
            .index_of(bits)
            .map(|i| self.coeffs[i])
            .unwrap_or_default()
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.coeffs)
    }

    pub fn normalize(&mut self) -> Result<f64> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidInput("cannot normalize a zero state".into()));
        }
        let inv = 1.0 / norm;
        self.coeffs.iter_mut().for_each(|c| *c *= inv);
        Ok(norm)
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    /// `<self|other>`; errors when the sectors differ.
    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64> {
        if !self.basis.same_sector(&other.basis) {
            return Err(Error::DimensionMismatch(format!(
                "sector ({}, {}) vs ({}, {})",
                self.n_modes(),
                self.n_electrons(),
                other.n_modes(),
                other.n_electrons()
            )));
        }
        Ok(linalg::dot(&self.coeffs, &other.coeffs))
    }
}

/// Computes `H psi` matrix-free.
///
/// Each output amplitude is gathered from the states connected to it by at
/// most a double excitation, in a fixed order, so the result does not depend
/// on the number of worker threads.
pub fn apply_hamiltonian(ham: &MolecularIntegrals, psi: &WaveFunction) -> Result<WaveFunction> {
    let n = ham.n_modes();
    if n != psi.n_modes() {
        return Err(Error::DimensionMismatch(format!(
            "Hamiltonian has {n} modes, state has {}",
            psi.n_modes()
        )));
    }
    let kernel = HamiltonianKernel::new(ham);
    let basis = psi.basis();
    let input = psi.coeffs();
    let out: Vec<Complex64> = (0..basis.dim())
        .into_par_iter()
        .with_min_len(64)
        .map(|i| kernel.gather(basis, i, input))
        .collect();
    WaveFunction::new(basis.clone(), out)
}

/// Real-amplitude counterpart of [`apply_hamiltonian`] on a raw vector.
pub fn apply_hamiltonian_real(ham: &MolecularIntegrals, basis: &SectorBasis, input: &[f64]) -> Result<Vec<f64>> {
    if ham.n_modes() != basis.n_modes() || input.len() != basis.dim() {
        return Err(Error::DimensionMismatch(format!(
            "Hamiltonian on {} modes, basis on {} modes with dimension {}, vector of length {}",
            ham.n_modes(),
            basis.n_modes(),
            basis.dim(),
            input.len()
        )));
    }
    let kernel = HamiltonianKernel::new(ham);
    Ok(apply_with_kernel(&kernel, basis, input))
}

pub(crate) fn apply_with_kernel(kernel: &HamiltonianKernel, basis: &SectorBasis, input: &[f64]) -> Vec<f64> {
    (0..basis.dim())
        .into_par_iter()
        .with_min_len(64)
        .map(|i| kernel.gather(basis, i, input))
        .collect()
}

/// Precomputed integral tables for the matrix-free apply.
pub(crate) struct HamiltonianKernel {
    n: usize,
    e_core: f64,
    h: Vec<f64>,
    // (pq|rs)
    g: Vec<f64>,
    // (pq|rs) - (ps|rq)
    w: Vec<f64>,
}

impl HamiltonianKernel {
    pub(crate) fn new(ham: &MolecularIntegrals) -> Self {
        let n = ham.n_modes();
        let h: Vec<f64> = (0..n * n).map(|k| ham.h()[(k / n, k % n)]).collect();
        let g = ham.g_slice().to_vec();
        let idx = |p: usize, q: usize, r: usize, s: usize| ((p * n + q) * n + r) * n + s;
        let mut w = vec![0.0; n * n * n * n];
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        w[idx(p, q, r, s)] = g[idx(p, q, r, s)] - g[idx(p, s, r, q)];
                    }
                }
            }
        }
        HamiltonianKernel {
            n,
            e_core: ham.e_core(),
            h,
            g,
            w,
        }
    }

    #[inline]
    fn gi(&self, p: usize, q: usize, r: usize, s: usize) -> usize {
        ((p * self.n + q) * self.n + r) * self.n + s
    }

    /// Diagonal matrix element `<s|H|s>`.
    pub(crate) fn diagonal(&self, s: OccupationState) -> f64 {
        let occ: Vec<usize> = s.occupied().collect();
        let mut e = self.e_core;
        for &p in &occ {
            e += self.h[p * self.n + p];
            for &r in &occ {
                e += 0.5 * (self.g[self.gi(p, p, r, r)] - self.g[self.gi(p, r, r, p)]);
            }
        }
        e
    }

    /// `(H psi)_i`, using the symmetry of the real Hamiltonian matrix.
    pub(crate) fn gather<T>(&self, basis: &SectorBasis, i: usize, input: &[T]) -> T
    where
        T: Copy + std::ops::AddAssign + std::ops::Mul<f64, Output = T>,
    {
        let n = self.n;
        let s = basis.state(i);
        let occ: Vec<usize> = s.occupied().collect();
        let vir: Vec<usize> = (0..n).filter(|&p| !s.is_occupied(p)).collect();
        let mut acc = input[i] * self.diagonal(s);

        // singles a_p^dag a_q
        for &q in &occ {
            let (s1, sign_q) = s.annihilate(q).expect("q occupied");
            for &p in &vir {
                let mut coeff = self.h[p * n + q];
                for &r in &occ {
                    coeff += self.w[self.gi(p, q, r, r)];
                }
                if coeff == 0.0 {
                    continue;
                }
                let (t, sign_p) = s1.create(p).expect("p empty");
                if let Some(j) = basis.index_of(t.0) {
                    acc += input[j] * (coeff * sign_q * sign_p);
                }
            }
        }

        // doubles a_p^dag a_r^dag a_s a_q with q < s, p < r
        for (a, &q) in occ.iter().enumerate() {
            for &ss in &occ[a + 1..] {
                for (b, &p) in vir.iter().enumerate() {
                    for &r in &vir[b + 1..] {
                        let coeff = self.w[self.gi(p, q, r, ss)];
                        if coeff == 0.0 {
                            continue;
                        }
                        let ops = [
                            LadderOp::create(p),
                            LadderOp::create(r),
                            LadderOp::annihilate(ss),
                            LadderOp::annihilate(q),
                        ];
                        if let Some((t, sign)) = apply_ladder_string(&ops, s) {
                            if let Some(j) = basis.index_of(t.0) {
                                acc += input[j] * (coeff * sign);
                            }
                        }
                    }
                }
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn occ(s: &str) -> OccupationState {
        OccupationState(
            s.chars()
                .enumerate()
                .filter(|(_, c)| *c == '1')
                .fold(0, |acc, (p, _)| acc | (1 << p)),
        )
    }

    #[test]
    fn two_mode_single_particle_sector_is_ordered() {
        let b = enumerate_sector(2, 1, DEFAULT_MAX_DIM).unwrap();
        assert_eq!(b.states(), &[0b01, 0b10]);
    }

    #[test]
    fn sector_dimensions() {
        assert_eq!(enumerate_sector(4, 2, DEFAULT_MAX_DIM).unwrap().dim(), 6);
        let big = enumerate_sector(20, 10, DEFAULT_MAX_DIM).unwrap();
        assert_eq!(big.dim(), 184756);
        for (i, &s) in big.states().iter().enumerate().step_by(997) {
            assert_eq!(big.index_of(s), Some(i));
        }
        assert!(big.states().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn index_inverts_state_list() {
        for (n, k) in [(0, 0), (1, 0), (1, 1), (5, 0), (5, 5), (7, 3), (10, 4)] {
            let b = enumerate_sector(n, k, DEFAULT_MAX_DIM).unwrap();
            assert_eq!(b.dim() as u128, binomial(n, k));
            for (i, &s) in b.states().iter().enumerate() {
                assert_eq!(b.index_of(s), Some(i));
            }
        }
        let b = enumerate_sector(6, 3, DEFAULT_MAX_DIM).unwrap();
        assert_eq!(b.index_of(0b11), None);
        assert_eq!(b.index_of(0b1_1000_0001), None);
    }

    #[test]
    fn cap_exceeded_names_binomial() {
        let err = enumerate_sector(20, 10, 1000).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("184756"), "{msg}");
        assert!(matches!(err, Error::SectorTooLarge { dim: 184756, .. }));
    }

    #[test]
    fn ladder_signs_follow_ordering_convention() {
        assert_eq!(
            apply_term(&[0], &[], occ("0000"), 4).unwrap(),
            Some((occ("1000"), 1.0))
        );
        assert_eq!(
            apply_term(&[1], &[], occ("1000"), 4).unwrap(),
            Some((occ("1100"), -1.0))
        );
        assert_eq!(apply_term(&[], &[0], occ("0100"), 4).unwrap(), None);
        assert_eq!(apply_term(&[1], &[], occ("0100"), 4).unwrap(), None);
    }

    #[test]
    fn apply_term_rejects_bad_indices() {
        assert!(matches!(
            apply_term(&[4], &[], occ("0000"), 4),
            Err(Error::ModeOutOfRange { index: 4, .. })
        ));
        assert!(matches!(
            apply_term(&[1, 1], &[], occ("0000"), 4),
            Err(Error::DuplicateMode(1))
        ));
    }

    #[test]
    fn creation_operators_anticommute() {
        for bits in 0u64..64 {
            let s = OccupationState(bits);
            for p in 0..6 {
                for q in 0..6 {
                    if p == q {
                        continue;
                    }
                    let pq = apply_term(&[p, q], &[], s, 6).unwrap();
                    let qp = apply_term(&[q, p], &[], s, 6).unwrap();
                    match (pq, qp) {
                        (Some((a, sa)), Some((b, sb))) => {
                            assert_eq!(a, b);
                            assert_eq!(sa, -sb);
                        }
                        (None, None) => {}
                        other => panic!("mismatch {other:?}"),
                    }
                }
            }
        }
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(63, 31), 916312070471295267);
        assert_eq!(binomial(4, 5), 0);
        assert_eq!(binomial(10, 0), 1);
    }

    #[test]
    fn occupation_string() {
        assert_eq!(occ("1010").to_occupation_string(4), "1010");
        assert_eq!(occ("0110").occupied().collect::<Vec<_>>(), vec![1, 2]);
    }
}
