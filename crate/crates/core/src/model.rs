//! Hamiltonian data and model builders.
//!
//! Integrals are stored in chemists' notation:
//! `H = sum h_pq a_p^dag a_q + 1/2 sum (pq|rs) a_p^dag a_r^dag a_s a_q + E_core`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::MAX_MODES;
use crate::linalg::{self, RMat};

pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct MolecularIntegrals {
    n_modes: usize,
    e_core: f64,
    h: RMat,
    g: Vec<f64>,
}

/// The eight index tuples related to `(p, q, r, s)` by the real symmetry.
pub fn symmetry_images(p: usize, q: usize, r: usize, s: usize) -> [(usize, usize, usize, usize); 8] {
    [
        (p, q, r, s),
        (q, p, r, s),
        (p, q, s, r),
        (q, p, s, r),
        (r, s, p, q),
        (s, r, p, q),
        (r, s, q, p),
        (s, r, q, p),
    ]
}

/// Canonical representative with `p >= q`, `r >= s`, `(p, q) >= (r, s)`.
pub fn canonical_index(p: usize, q: usize, r: usize, s: usize) -> (usize, usize, usize, usize) {
    let (p, q) = if p >= q { (p, q) } else { (q, p) };
    let (r, s) = if r >= s { (r, s) } else { (s, r) };
    if (p, q) >= (r, s) {
        (p, q, r, s)
    } else {
        (r, s, p, q)
    }
}

impl MolecularIntegrals {
    /// Validates symmetry of `h` and the 8-fold symmetry of `g` (length `N^4`,
    /// index `((p N + q) N + r) N + s`).
    pub fn new(e_core: f64, h: RMat, g: Vec<f64>) -> Result<Self> {
        let n = h.nrows();
        if !h.is_square() {
            return Err(Error::DimensionMismatch(format!("h is {}x{}", h.nrows(), h.ncols())));
        }
        if n > MAX_MODES {
            return Err(Error::InvalidInput(format!("{n} modes exceeds {MAX_MODES}")));
        }
        if g.len() != n.pow(4) {
            return Err(Error::DimensionMismatch(format!(
                "two-body tensor has {} entries, expected {}",
                g.len(),
                n.pow(4)
            )));
        }
        let dev = linalg::symmetric_deviation(&h);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let ints = MolecularIntegrals {
            n_modes: n,
            e_core,
            h,
            g,
        };
        let dev = ints.symmetry_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::SymmetryViolation { deviation: dev });
        }
        Ok(ints)
    }

    pub fn zeros(n_modes: usize) -> Self {
        MolecularIntegrals {
            n_modes,
            e_core: 0.0,
            h: RMat::zeros(n_modes, n_modes),
            g: vec![0.0; n_modes.pow(4)],
        }
    }

    /// One-body only Hamiltonian.
    pub fn from_one_body(e_core: f64, h: RMat) -> Result<Self> {
        let n = h.nrows();
        Self::new(e_core, h, vec![0.0; n.pow(4)])
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn e_core(&self) -> f64 {
        self.e_core
    }

    pub fn set_e_core(&mut self, e: f64) {
        self.e_core = e;
    }

    pub fn h(&self) -> &RMat {
        &self.h
    }

    /// Sets `h_pq` and `h_qp`.
    pub fn set_h_sym(&mut self, p: usize, q: usize, v: f64) {
        self.h[(p, q)] = v;
        self.h[(q, p)] = v;
    }

    #[inline]
    pub fn g_index(&self, p: usize, q: usize, r: usize, s: usize) -> usize {
        let n = self.n_modes;
        ((p * n + q) * n + r) * n + s
    }

    #[inline]
    pub fn g(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.g[self.g_index(p, q, r, s)]
    }

    pub fn g_slice(&self) -> &[f64] {
        &self.g
    }

    /// Sets `(pq|rs)` and all symmetry images.
    pub fn set_g_sym(&mut self, p: usize, q: usize, r: usize, s: usize, v: f64) {
        for (a, b, c, d) in symmetry_images(p, q, r, s) {
            let i = self.g_index(a, b, c, d);
            self.g[i] = v;
        }
    }

    pub fn symmetry_deviation(&self) -> f64 {
        let n = self.n_modes;
        let mut worst: f64 = 0.0;
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let v = self.g(p, q, r, s);
                        for (a, b, c, d) in symmetry_images(p, q, r, s) {
                            worst = worst.max((v - self.g(a, b, c, d)).abs());
                        }
                    }
                }
            }
        }
        worst
    }

    pub fn has_two_body(&self) -> bool {
        self.g.iter().any(|&x| x != 0.0)
    }

    pub fn with_e_core(mut self, e: f64) -> Self {
        self.e_core = e;
        self
    }

    /// Integrals in the orbital basis given by the columns of `c` (`N x K`):
    /// `h' = C^T h C`, `(ij|kl)' = sum C_pi C_qj C_rk C_sl (pq|rs)`.
    pub fn transform(&self, c: &RMat) -> Result<MolecularIntegrals> {
        let n = self.n_modes;
        if c.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "orbital matrix has {} rows for {n} modes",
                c.nrows()
            )));
        }
        let k = c.ncols();
        let h = c.transpose() * &self.h * c;
        let g = transform_two_body(&self.g, n, c);
        let mut out = MolecularIntegrals {
            n_modes: k,
            e_core: self.e_core,
            h,
            g,
        };
        out.symmetrize();
        Ok(out)
    }

    /// Removes rounding asymmetry after a transformation.
    fn symmetrize(&mut self) {
        self.h = (&self.h + self.h.transpose()) * 0.5;
        let n = self.n_modes;
        for p in 0..n {
            for q in 0..=p {
                for r in 0..n {
                    for s in 0..=r {
                        if (p, q) < (r, s) {
                            continue;
                        }
                        let imgs = symmetry_images(p, q, r, s);
                        let mean = imgs.iter().map(|&(a, b, c, d)| self.g(a, b, c, d)).sum::<f64>() / 8.0;
                        self.set_g_sym(p, q, r, s, mean);
                    }
                }
            }
        }
    }

    /// Restriction to the listed modes, in the given order.
    pub fn restrict(&self, modes: &[usize]) -> Result<MolecularIntegrals> {
        let n = self.n_modes;
        let c = RMat::from_fn(n, modes.len(), |r, j| if modes[j] == r { 1.0 } else { 0.0 });
        if let Some(&bad) = modes.iter().find(|&&m| m >= n) {
            return Err(Error::ModeOutOfRange { index: bad, n_modes: n });
        }
        let mut out = self.transform(&c)?;
        out.e_core = self.e_core;
        Ok(out)
    }

    /// Spin-orbital model from a spatial one with blocked ordering
    /// `[0a .. (N-1)a, 0b .. (N-1)b]`: `h` duplicated per spin and
    /// `(p s q s | r t s t) = (pq|rs)` for both spins `s`, `t`.
    pub fn spin_double(&self) -> Result<MolecularIntegrals> {
        let n = self.n_modes;
        if 2 * n > MAX_MODES {
            return Err(Error::InvalidInput(format!("{} spin orbitals exceeds {MAX_MODES}", 2 * n)));
        }
        let mut out = MolecularIntegrals::zeros(2 * n);
        out.e_core = self.e_core;
        for sigma in 0..2 {
            let o = sigma * n;
            for p in 0..n {
                for q in 0..n {
                    out.h[(o + p, o + q)] = self.h[(p, q)];
                }
            }
        }
        for s1 in 0..2 {
            for s2 in 0..2 {
                let (o1, o2) = (s1 * n, s2 * n);
                for p in 0..n {
                    for q in 0..n {
                        for r in 0..n {
                            for s in 0..n {
                                let i = out.g_index(o1 + p, o1 + q, o2 + r, o2 + s);
                                out.g[i] = self.g(p, q, r, s);
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Number of nonzero symmetry-distinct two-body entries.
    pub fn distinct_two_body_terms(&self) -> usize {
        let n = self.n_modes;
        let mut count = 0;
        for p in 0..n {
            for q in 0..=p {
                for r in 0..n {
                    for s in 0..=r {
                        if (p, q) >= (r, s) && self.g(p, q, r, s) != 0.0 {
                            count += 1;
                        }
                    }
                }
            }
        }
        count
    }
}

pub(crate) fn transform_two_body(g: &[f64], n: usize, c: &RMat) -> Vec<f64> {
    let k = c.ncols();
    // contract one index at a time: s, r, q, p
    let mut t1 = vec![0.0; n * n * n * k];
    for pqr in 0..n * n * n {
        for l in 0..k {
            let mut acc = 0.0;
            for s in 0..n {
                acc += g[pqr * n + s] * c[(s, l)];
            }
            t1[pqr * k + l] = acc;
        }
    }
    let mut t2 = vec![0.0; n * n * k * k];
    for pq in 0..n * n {
        for kk in 0..k {
            for l in 0..k {
                let mut acc = 0.0;
                for r in 0..n {
                    acc += t1[(pq * n + r) * k + l] * c[(r, kk)];
                }
                t2[(pq * k + kk) * k + l] = acc;
            }
        }
    }
    let mut t3 = vec![0.0; n * k * k * k];
    for p in 0..n {
        for j in 0..k {
            for kl in 0..k * k {
                let mut acc = 0.0;
                for q in 0..n {
                    acc += t2[(p * n + q) * k * k + kl] * c[(q, j)];
                }
                t3[(p * k + j) * k * k + kl] = acc;
            }
        }
    }
    let mut out = vec![0.0; k * k * k * k];
    for i in 0..k {
        for jkl in 0..k * k * k {
            let mut acc = 0.0;
            for p in 0..n {
                acc += t3[p * k * k * k + jkl] * c[(p, i)];
            }
            out[i * k * k * k + jkl] = acc;
        }
    }
    out
}

/// Single-particle energies of the free part.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EpsilonSpec {
    Explicit { values: Vec<f64> },
    /// Uniform magnitudes in `[gap, 1]`; the first `n_negative` (default
    /// `N / 2`) are negative.
    Gapped { gap: f64, n_negative: Option<usize> },
}

/// Two-body interaction on the impurity modes.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ImpuritySpec {
    Zero,
    /// Each symmetry-distinct `(pq|rs)` on impurity modes uniform in `[-u, u]`.
    Random { magnitude: f64 },
    /// Amplitudes `w` of `sum w_pqrs a_p^dag a_q^dag a_r a_s`, 0-based.
    Physicists { terms: Vec<(usize, usize, usize, usize, f64)> },
}

/// Single-particle basis of the free part.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum Hybridization {
    /// `H_free = diag(eps)` in the site basis.
    None,
    /// `H_free = Q diag(eps) Q^T` with a seeded random orthogonal `Q`.
    #[default]
    RandomOrthogonal,
}

#[derive(Clone, Debug)]
pub struct ImpurityModel {
    pub integrals: MolecularIntegrals,
    /// Impurity modes are `0..m`.
    pub m: usize,
    pub epsilons: Vec<f64>,
    pub omega: f64,
    /// One-body matrix of the free part, `eigvecs diag(epsilons) eigvecs^T`.
    pub free_h: RMat,
    pub eigvecs: RMat,
}

impl ImpurityModel {
    pub fn n_modes(&self) -> usize {
        self.integrals.n_modes()
    }

    /// Checks the support of `g` and the range of `eps`.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_modes();
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        if p.max(q).max(r).max(s) >= self.m && self.integrals.g(p, q, r, s) != 0.0 {
                            return Err(Error::InvalidInput(format!(
                                "two-body entry ({p}{q}|{r}{s}) outside the impurity"
                            )));
                        }
                    }
                }
            }
        }
        if let Some(e) = self.epsilons.iter().find(|e| e.abs() > 1.0) {
            return Err(Error::InvalidInput(format!("eps = {e} outside [-1, 1]")));
        }
        Ok(())
    }

    /// The free part alone as a Hamiltonian.
    pub fn free_integrals(&self) -> MolecularIntegrals {
        MolecularIntegrals::from_one_body(self.integrals.e_core(), self.free_h.clone())
            .expect("free_h is symmetric")
    }
}

pub fn min_nonzero_abs(values: &[f64]) -> f64 {
    values
        .iter()
        .map(|e| e.abs())
        .filter(|&e| e > 0.0)
        .fold(f64::INFINITY, f64::min)
}

/// Builds `H_free + H_imp`. The free part is `diag(eps)` or its rotation by a
/// random orthogonal matrix, depending on `hybridization`.
pub fn build_impurity_model(
    n_modes: usize,
    m: usize,
    epsilon_spec: &EpsilonSpec,
    impurity_spec: &ImpuritySpec,
    hybridization: Hybridization,
    seed: u64,
) -> Result<ImpurityModel> {
    if m > n_modes {
        return Err(Error::InvalidInput(format!("M = {m} exceeds N = {n_modes}")));
    }
    if n_modes > MAX_MODES {
        return Err(Error::InvalidInput(format!("{n_modes} modes exceeds {MAX_MODES}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let epsilons = match epsilon_spec {
        EpsilonSpec::Explicit { values } => {
            if values.len() != n_modes {
                return Err(Error::DimensionMismatch(format!(
                    "{} energies for {n_modes} modes",
                    values.len()
                )));
            }
            values.clone()
        }
        EpsilonSpec::Gapped { gap, n_negative } => {
            if !(0.0..=1.0).contains(gap) {
                return Err(Error::InvalidInput(format!("gap {gap} outside [0, 1]")));
            }
            let n_neg = n_negative.unwrap_or(n_modes / 2);
            if n_neg > n_modes {
                return Err(Error::InvalidInput(format!("{n_neg} negative modes of {n_modes}")));
            }
            (0..n_modes)
                .map(|j| {
                    let mag = rng.random_range(*gap..=1.0);
                    if j < n_neg {
                        -mag
                    } else {
                        mag
                    }
                })
                .collect()
        }
    };
    if let Some(e) = epsilons.iter().find(|e| !(-1.0..=1.0).contains(*e)) {
        return Err(Error::InvalidInput(format!("eps = {e} outside [-1, 1]")));
    }
    let eigvecs = match hybridization {
        Hybridization::None => RMat::identity(n_modes, n_modes),
        Hybridization::RandomOrthogonal => linalg::random_orthogonal(n_modes, &mut rng),
    };
    let diag = RMat::from_diagonal(&nalgebra::DVector::from_column_slice(&epsilons));
    let mut free_h = &eigvecs * diag * eigvecs.transpose();
    free_h = (&free_h + free_h.transpose()) * 0.5;

    let mut integrals = MolecularIntegrals::from_one_body(0.0, free_h.clone())?;
    match impurity_spec {
        ImpuritySpec::Zero => {}
        ImpuritySpec::Random { magnitude } => {
            for p in 0..m {
                for q in 0..=p {
                    for r in 0..m {
                        for s in 0..=r {
                            if (p, q) < (r, s) {
                                continue;
                            }
                            let v = rng.random_range(-magnitude..=*magnitude);
                            integrals.set_g_sym(p, q, r, s, v);
                        }
                    }
                }
            }
        }
        ImpuritySpec::Physicists { terms } => {
            let chem = physicists_to_chemists(m, terms)?;
            for p in 0..m {
                for q in 0..m {
                    for r in 0..m {
                        for s in 0..m {
                            let i = integrals.g_index(p, q, r, s);
                            integrals.g[i] = chem[((p * m + q) * m + r) * m + s];
                        }
                    }
                }
            }
        }
    }
    let omega = min_nonzero_abs(&epsilons);
    let model = ImpurityModel {
        integrals,
        m,
        epsilons,
        omega,
        free_h,
        eigvecs,
    };
    model.validate()?;
    Ok(model)
}

/// Converts `sum w_pqrs a_p^dag a_q^dag a_r a_s` on `m` modes to chemists'
/// `(PQ|RS)` with `G(PQ|RS) = w(P,R,S,Q) + w(R,P,Q,S)`.
pub fn physicists_to_chemists(m: usize, terms: &[(usize, usize, usize, usize, f64)]) -> Result<Vec<f64>> {
    let mut w = vec![0.0; m.pow(4)];
    let idx = |p: usize, q: usize, r: usize, s: usize| ((p * m + q) * m + r) * m + s;
    for &(p, q, r, s, v) in terms {
        if p.max(q).max(r).max(s) >= m {
            return Err(Error::ModeOutOfRange {
                index: p.max(q).max(r).max(s),
                n_modes: m,
            });
        }
        w[idx(p, q, r, s)] += v;
    }
    let mut g = vec![0.0; m.pow(4)];
    for p in 0..m {
        for q in 0..m {
            for r in 0..m {
                for s in 0..m {
                    g[idx(p, q, r, s)] = w[idx(p, r, s, q)] + w[idx(r, p, q, s)];
                }
            }
        }
    }
    let mut worst: f64 = 0.0;
    for p in 0..m {
        for q in 0..m {
            for r in 0..m {
                for s in 0..m {
                    for (a, b, c, d) in symmetry_images(p, q, r, s) {
                        worst = worst.max((g[idx(p, q, r, s)] - g[idx(a, b, c, d)]).abs());
                    }
                }
            }
        }
    }
    if worst > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation: worst });
    }
    Ok(g)
}

/// One-body inter-monomer coupling for [`build_oligomer`].
#[derive(Clone, Debug)]
pub struct Coupling {
    /// `N_mono x N_mono` block placed between copies `i` and `i + 1`.
    pub block: RMat,
    pub scale: f64,
}

impl Coupling {
    /// Nearest-neighbour hopping between all modes of adjacent copies.
    pub fn uniform(n_mono: usize, scale: f64) -> Self {
        Coupling {
            block: RMat::from_element(n_mono, n_mono, 1.0),
            scale,
        }
    }
}

/// `k` copies of `monomer` on consecutive mode blocks.
pub fn build_oligomer(monomer: &MolecularIntegrals, k: usize, coupling: Option<&Coupling>) -> Result<MolecularIntegrals> {
    let nm = monomer.n_modes();
    if k == 0 {
        return Err(Error::InvalidInput("oligomer needs at least one copy".into()));
    }
    if k * nm > MAX_MODES {
        return Err(Error::InvalidInput(format!(
            "{k} copies of {nm} modes exceeds {MAX_MODES}"
        )));
    }
    let n = k * nm;
    let mut out = MolecularIntegrals::zeros(n);
    out.e_core = monomer.e_core * k as f64;
    for c in 0..k {
        let o = c * nm;
        for p in 0..nm {
            for q in 0..nm {
                out.h[(o + p, o + q)] = monomer.h[(p, q)];
                for r in 0..nm {
                    for s in 0..nm {
                        let i = out.g_index(o + p, o + q, o + r, o + s);
                        out.g[i] = monomer.g(p, q, r, s);
                    }
                }
            }
        }
    }
    if let Some(cp) = coupling {
        if cp.block.nrows() != nm || cp.block.ncols() != nm {
            return Err(Error::DimensionMismatch(format!(
                "coupling block is {}x{}, monomer has {nm} modes",
                cp.block.nrows(),
                cp.block.ncols()
            )));
        }
        for c in 0..k.saturating_sub(1) {
            let (o1, o2) = (c * nm, (c + 1) * nm);
            for p in 0..nm {
                for q in 0..nm {
                    let v = cp.scale * cp.block[(p, q)];
                    out.h[(o1 + p, o2 + q)] = v;
                    out.h[(o2 + q, o1 + p)] = v;
                }
            }
        }
    }
    Ok(out)
}

/// Random real model: `h` symmetric uniform in `[-1, 1]` and a positive
/// semidefinite `(pq|rs) = sum_k L^k_pq L^k_rs` with `N` symmetric factors.
pub fn random_model(n_modes: usize, seed: u64) -> Result<MolecularIntegrals> {
    if n_modes > MAX_MODES {
        return Err(Error::InvalidInput(format!("{n_modes} modes exceeds {MAX_MODES}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_modes;
    let mut h = RMat::zeros(n, n);
    for p in 0..n {
        for q in 0..=p {
            let v = rng.random_range(-1.0..=1.0);
            h[(p, q)] = v;
            h[(q, p)] = v;
        }
    }
    let mut out = MolecularIntegrals::from_one_body(0.0, h)?;
    for _ in 0..n {
        let mut l = RMat::zeros(n, n);
        for p in 0..n {
            for q in 0..=p {
                let v = rng.random_range(-0.5..=0.5);
                l[(p, q)] = v;
                l[(q, p)] = v;
            }
        }
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let i = out.g_index(p, q, r, s);
                        out.g[i] += l[(p, q)] * l[(r, s)];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Open or periodic Hubbard chain in spin orbitals (blocked spin order).
pub fn hubbard(n_sites: usize, t: f64, u: f64, periodic: bool) -> Result<MolecularIntegrals> {
    let mut spatial = MolecularIntegrals::zeros(n_sites);
    for i in 0..n_sites.saturating_sub(1) {
        spatial.set_h_sym(i, i + 1, -t);
    }
    if periodic && n_sites > 2 {
        spatial.set_h_sym(0, n_sites - 1, -t);
    }
    for i in 0..n_sites {
        spatial.set_g_sym(i, i, i, i, u);
    }
    spatial.spin_double()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<RMat> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch("one-body matrix must be square".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}
