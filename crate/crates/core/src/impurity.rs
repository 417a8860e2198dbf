//! Impurity-model tools: particle-hole frame, low-energy truncation,
//! active-space selection from the one-body density matrix, excitation
//! projection and the maximally mixed guiding state.
//!
//! All single-particle bases here are columns of an `N x N` matrix over the
//! site modes. The projection and selection work in the original `a` frame,
//! where a frozen mode is either filled (`I-`, drawn from negative-energy
//! modes) or empty (`I+`, positive-energy modes).

use num_complex::Complex64;
use serde::Serialize;

use crate::analysis::OneBodyRDM;
use crate::error::{Error, Result};
use crate::fock::{binomial, enumerate_sector, WaveFunction, DEFAULT_MAX_DIM};
use crate::linalg::{self, CMat, RMat};
use crate::meanfield::two_body_potential;
use crate::model::{min_nonzero_abs, ImpurityModel, MolecularIntegrals};
use crate::operator::FermionOperator;
use crate::states::{embed_modes, rotate_orbitals, wedge, SlaterDeterminant};

/// Single-particle eigenbasis of the free part with the `b` operators
/// `b_j = a_j^dag` on negative-energy modes and `b_j = a_j` otherwise.
#[derive(Clone, Debug)]
pub struct ParticleHoleFrame {
    pub n_modes: usize,
    pub n_electrons: usize,
    pub n_negative: usize,
    /// Eigenvectors of the free part, sorted by ascending energy.
    pub eigvecs: RMat,
    pub epsilons: Vec<f64>,
    /// `|eps_j|` in the same order.
    pub abs_energies: Vec<f64>,
    /// The Hamiltonian in `b` operators, normal ordered, minus `energy_shift`.
    pub transformed: FermionOperator,
    /// `sum_{eps_j < 0} eps_j`
    pub energy_shift: f64,
    /// The `b` vacuum: all negative-energy eigenmodes filled.
    pub reference_determinant: SlaterDeterminant,
    /// Bits of the negative-energy modes in the eigenbasis.
    pub mask: u64,
}

pub fn particle_hole(model: &ImpurityModel, n_electrons: usize) -> Result<ParticleHoleFrame> {
    model.validate()?;
    let n = model.n_modes();
    if n_electrons > n {
        return Err(Error::InvalidSector(format!("{n_electrons} electrons in {n} modes")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| model.epsilons[a].total_cmp(&model.epsilons[b]).then(a.cmp(&b)));
    let eigvecs = RMat::from_fn(n, n, |r, c| model.eigvecs[(r, order[c])]);
    let epsilons: Vec<f64> = order.iter().map(|&j| model.epsilons[j]).collect();
    let n_negative = epsilons.iter().filter(|&&e| e < 0.0).count();
    let energy_shift: f64 = epsilons.iter().filter(|&&e| e < 0.0).sum();
    let rotated = model.integrals.transform(&eigvecs)?;
    let flip: Vec<bool> = (0..n).map(|j| j < n_negative).collect();
    let mut transformed = FermionOperator::from_integrals(&rotated).conjugate_modes(&flip)?;
    transformed.add_constant(-energy_shift);
    transformed.compress();
    let reference_determinant = SlaterDeterminant::from_real(&eigvecs.columns(0, n_negative).into_owned())?;
    Ok(ParticleHoleFrame {
        n_modes: n,
        n_electrons,
        n_negative,
        abs_energies: epsilons.iter().map(|e| e.abs()).collect(),
        eigvecs,
        epsilons,
        transformed,
        energy_shift,
        reference_determinant,
        mask: (1u64 << n_negative) - 1,
    })
}

impl ParticleHoleFrame {
    /// `b`-frame occupation strings of the `a`-frame sector, ascending. The
    /// `b` number is not conserved, only the `a` charge.
    pub fn b_basis(&self, max_dim: usize) -> Result<Vec<u64>> {
        let basis = enumerate_sector(self.n_modes, self.n_electrons, max_dim)?;
        let mut states: Vec<u64> = basis.states().iter().map(|&x| x ^ self.mask).collect();
        states.sort_unstable();
        Ok(states)
    }

    /// Dense matrix of `transformed` over `b_basis`.
    pub fn b_matrix(&self) -> Result<(Vec<u64>, RMat)> {
        let states = self.b_basis(crate::solver::DENSE_MAX_DIM)?;
        let m = self.transformed.dense_matrix(&states)?;
        Ok((states, m))
    }

    /// Eigenvalues of `transformed` in the charge sector, ascending.
    pub fn b_spectrum(&self) -> Result<Vec<f64>> {
        let (_, m) = self.b_matrix()?;
        Ok(linalg::eigh_real(&m).0)
    }

    /// `b`-frame density matrix `<b_j^dag b_k>` from the `a`-frame one in
    /// site modes: `delta_jk - gamma_kj` on negative modes, `gamma_jk` on the
    /// rest, zero across.
    pub fn b_frame_rdm(&self, rdm: &OneBodyRDM) -> RMat {
        let v = linalg::to_complex(&self.eigvecs);
        let g = rdm.in_orbitals(&v).map(|z| z.re);
        let n = self.n_modes;
        let neg = |j: usize| j < self.n_negative;
        RMat::from_fn(n, n, |j, k| match (neg(j), neg(k)) {
            (true, true) => (if j == k { 1.0 } else { 0.0 }) - g[(k, j)],
            (false, false) => g[(j, k)],
            _ => 0.0,
        })
    }

    /// `psi` expanded in the eigenmodes of the free part.
    pub fn to_eigenbasis(&self, psi: &WaveFunction) -> Result<WaveFunction> {
        rotate_orbitals(psi, &linalg::to_complex(&self.eigvecs.transpose()))
    }

    /// Number of `b` excitations of an eigenbasis occupation string.
    pub fn excitations(&self, bits: u64) -> u32 {
        (bits ^ self.mask).count_ones()
    }
}

/// Ground state of the `b`-frame operator by dense diagonalization.
pub fn b_frame_ground_state(frame: &ParticleHoleFrame) -> Result<(f64, Vec<u64>, Vec<f64>)> {
    let (states, m) = frame.b_matrix()?;
    let (vals, vecs) = linalg::eigh_real(&m);
    Ok((vals[0], states, vecs.column(0).iter().copied().collect()))
}

#[derive(Clone, Debug)]
pub struct Truncation {
    pub model: ImpurityModel,
    /// Dropped negative-energy modes; the truncated model has this many
    /// fewer electrons.
    pub electrons_removed: usize,
    pub dropped: Vec<f64>,
    pub threshold: f64,
    pub m_cut: usize,
}

/// Freezes eigenmodes of the free part with `|eps| <= eps / m_cut` at their
/// noninteracting occupation. `m_cut` defaults to the number of distinct
/// two-body entries (at least 1). Eigenmodes lying entirely inside the
/// impurity are kept.
pub fn truncate_low_energy(model: &ImpurityModel, eps: f64, m_cut: Option<usize>) -> Result<Truncation> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("precision {eps} must be positive")));
    }
    model.validate()?;
    let n = model.n_modes();
    let m_cut = m_cut.unwrap_or_else(|| model.integrals.distinct_two_body_terms()).max(1);
    let threshold = eps / m_cut as f64;
    let impurity_weight =
        |j: usize| -> f64 { (0..model.m).map(|p| model.eigvecs[(p, j)].powi(2)).sum() };
    let mut dropped_idx: Vec<usize> = (0..n)
        .filter(|&j| model.epsilons[j].abs() <= threshold && impurity_weight(j) < 1.0 - 1e-9)
        .collect();
    dropped_idx.sort_by(|&a, &b| model.epsilons[a].total_cmp(&model.epsilons[b]).then(a.cmp(&b)));
    if dropped_idx.is_empty() {
        return Ok(Truncation {
            model: model.clone(),
            electrons_removed: 0,
            dropped: Vec::new(),
            threshold,
            m_cut,
        });
    }
    let kept_idx: Vec<usize> = (0..n).filter(|j| !dropped_idx.contains(j)).collect();
    let col = |j: usize| model.eigvecs.column(j).into_owned();
    let mut proj = RMat::identity(n, n);
    let mut d_core = RMat::zeros(n, n);
    for &j in &dropped_idx {
        let v = col(j);
        proj -= &v * v.transpose();
        if model.epsilons[j] < 0.0 {
            d_core += &v * v.transpose();
        }
    }
    // impurity-facing columns first, then the kept eigenmodes
    let mut cols: Vec<nalgebra::DVector<f64>> = Vec::new();
    let push = |mut v: nalgebra::DVector<f64>, cols: &mut Vec<nalgebra::DVector<f64>>| {
        for _ in 0..2 {
            for c in cols.iter() {
                let a = c.dot(&v);
                v -= c * a;
            }
        }
        let nv = v.norm();
        if nv > 1e-8 {
            cols.push(v / nv);
            true
        } else {
            false
        }
    };
    let mut m_new = 0;
    for p in 0..model.m {
        if push(proj.column(p).into_owned(), &mut cols) {
            m_new += 1;
        }
    }
    for &j in &kept_idx {
        if cols.len() == kept_idx.len() {
            break;
        }
        push(col(j), &mut cols);
    }
    if cols.len() != kept_idx.len() {
        return Err(Error::InvalidInput("kept space basis is rank deficient".into()));
    }
    let w = RMat::from_columns(&cols);
    let ham = &model.integrals;
    let g_core = two_body_potential(ham, &d_core);
    let e_core = ham.e_core() + (d_core.component_mul(ham.h())).sum() + 0.5 * (d_core.component_mul(&g_core)).sum();
    let dressed = MolecularIntegrals::new(e_core, ham.h() + &g_core, ham.g_slice().to_vec())?;
    let mut integrals = dressed.transform(&w)?;
    let nk = integrals.n_modes();
    let mut stray = 0.0f64;
    for p in 0..nk {
        for q in 0..nk {
            for r in 0..nk {
                for s in 0..nk {
                    if p.max(q).max(r).max(s) >= m_new {
                        stray = stray.max(integrals.g(p, q, r, s).abs());
                        integrals.set_g_sym(p, q, r, s, 0.0);
                    }
                }
            }
        }
    }
    if stray > 1e-10 {
        return Err(Error::InvalidInput(format!("two-body weight {stray:.3e} left the impurity")));
    }
    let free_h = w.transpose() * &model.free_h * &w;
    let free_h = (&free_h + free_h.transpose()) * 0.5;
    let (epsilons, eigvecs) = linalg::eigh_real(&free_h);
    let truncated = ImpurityModel {
        omega: min_nonzero_abs(&epsilons),
        integrals,
        m: m_new,
        epsilons,
        free_h,
        eigvecs,
    };
    truncated.validate()?;
    Ok(Truncation {
        model: truncated,
        electrons_removed: dropped_idx.iter().filter(|&&j| model.epsilons[j] < 0.0).count(),
        dropped: dropped_idx.iter().map(|&j| model.epsilons[j]).collect(),
        threshold,
        m_cut,
    })
}

/// Modes to freeze and the basis they live in.
#[derive(Clone, Debug)]
pub struct ActiveSelection {
    pub k: usize,
    /// `[active (K) | I- | I+]` as columns.
    pub basis: CMat,
    /// Column indices of `basis` held filled.
    pub i_minus: Vec<usize>,
    /// Column indices of `basis` held empty.
    pub i_plus: Vec<usize>,
    /// `sum_{I-} sqrt(1 - gamma_jj) + sum_{I+} sqrt(gamma_jj)` in `basis`.
    pub delta_bound: f64,
    /// Eigenvalues of the compressions to the impurity-free negative and
    /// nonnegative subspaces, in the `b` frame, descending.
    pub lambda_minus: Vec<f64>,
    pub lambda_plus: Vec<f64>,
}

impl ActiveSelection {
    pub fn active_orbitals(&self) -> CMat {
        self.basis.columns(0, self.k).into_owned()
    }

    pub fn mask_minus(&self) -> u64 {
        self.i_minus.iter().fold(0, |m, &j| m | 1 << j)
    }

    pub fn mask_plus(&self) -> u64 {
        self.i_plus.iter().fold(0, |m, &j| m | 1 << j)
    }
}

struct Branch {
    /// `b`-frame eigenvalues, descending.
    lambda: Vec<f64>,
    vectors: CMat,
}

impl Branch {
    fn cap(&self) -> usize {
        self.lambda.len()
    }
    /// Cost of freezing one more mode when `f` are already frozen.
    fn next_cost(&self, f: usize) -> f64 {
        if f >= self.cap() {
            f64::INFINITY
        } else {
            self.lambda[self.cap() - f - 1].max(0.0).sqrt()
        }
    }
    /// Saving from unfreezing the last frozen mode.
    fn last_cost(&self, f: usize) -> f64 {
        if f == 0 {
            f64::NEG_INFINITY
        } else {
            self.lambda[self.cap() - f].max(0.0).sqrt()
        }
    }
}

/// Orthonormal basis of `span(eigenmodes in cols) ∩ (impurity)^perp` as
/// eigenvectors of the compressed density matrix, descending in the `b`
/// frame occupation.
fn branch(rdm: &OneBodyRDM, v: &RMat, cols: &[usize], m: usize, negative: bool) -> Branch {
    let n = v.nrows();
    if cols.is_empty() {
        return Branch {
            lambda: Vec::new(),
            vectors: CMat::zeros(n, 0),
        };
    }
    let vj = linalg::to_complex(&RMat::from_fn(n, cols.len(), |r, c| v[(r, cols[c])]));
    let a = vj.rows(0, m).into_owned();
    let z = linalg::null_space(&a, 1e-6);
    let b = &vj * z;
    if b.ncols() == 0 {
        return Branch {
            lambda: Vec::new(),
            vectors: b,
        };
    }
    let comp = rdm.in_orbitals(&b);
    let (mu, y) = linalg::eigh(&comp);
    // rotate back: comp is c^T gamma conj(c), eigenvectors combine columns
    // of b through conj
    let x = &b * y.map(|z| z.conj());
    let mut items: Vec<(f64, usize)> = mu
        .iter()
        .enumerate()
        .map(|(i, &u)| (if negative { 1.0 - u } else { u }, i))
        .collect();
    items.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let vectors = CMat::from_fn(n, items.len(), |r, c| x[(r, items[c].1)]);
    Branch {
        lambda: items.iter().map(|t| t.0).collect(),
        vectors,
    }
}

/// Freezes all but `K` modes. With `K >= 4M` each branch keeps its
/// `K/2 - M` most occupied (`b` frame) modes; otherwise the freeze budget
/// `N - K` is split evenly with the odd mode going to the cheaper branch.
/// Either way the split is then adjusted greedily by `sqrt(lambda)` so
/// exactly `N - K` modes are frozen.
pub fn select_active(rdm: &OneBodyRDM, model: &ImpurityModel, n_electrons: usize, k: usize) -> Result<ActiveSelection> {
    let n = model.n_modes();
    let m = model.m;
    if rdm.n_modes() != n {
        return Err(Error::DimensionMismatch(format!("{}-mode density for {n} modes", rdm.n_modes())));
    }
    if k > n {
        return Err(Error::InvalidInput(format!("K = {k} exceeds N = {n}")));
    }
    if k < 2 * m {
        return Err(Error::InvalidInput(format!("K = {k} below 2M = {}", 2 * m)));
    }
    if (rdm.trace() - n_electrons as f64).abs() > 1e-8 {
        return Err(Error::InvalidInput(format!(
            "density trace {} differs from {n_electrons} electrons",
            rdm.trace()
        )));
    }
    let neg: Vec<usize> = (0..n).filter(|&j| model.epsilons[j] < 0.0).collect();
    let pos: Vec<usize> = (0..n).filter(|&j| model.epsilons[j] >= 0.0).collect();
    let bm = branch(rdm, &model.eigvecs, &neg, m, true);
    let bp = branch(rdm, &model.eigvecs, &pos, m, false);
    let target = n - k;
    if target > bm.cap() + bp.cap() {
        return Err(Error::InvalidInput(format!(
            "cannot freeze {target} modes; only {} impurity-free modes",
            bm.cap() + bp.cap()
        )));
    }
    let (mut fm, mut fp) = if k >= 4 * m {
        let keep = k / 2 - m;
        (bm.cap().saturating_sub(keep), bp.cap().saturating_sub(keep))
    } else {
        let half = target / 2;
        let (mut a, mut b) = (half, half);
        if target % 2 == 1 {
            if bm.next_cost(a) <= bp.next_cost(b) {
                a += 1;
            } else {
                b += 1;
            }
        }
        // clip to capacities, overflow to the other branch
        if a > bm.cap() {
            b += a - bm.cap();
            a = bm.cap();
        }
        if b > bp.cap() {
            a += b - bp.cap();
            b = bp.cap();
        }
        (a, b)
    };
    while fm + fp < target {
        if bm.next_cost(fm) <= bp.next_cost(fp) {
            fm += 1;
        } else {
            fp += 1;
        }
    }
    while fm + fp > target {
        if bm.last_cost(fm) >= bp.last_cost(fp) {
            fm -= 1;
        } else {
            fp -= 1;
        }
    }
    let frozen_minus = bm.vectors.columns(bm.cap() - fm, fm).into_owned();
    let frozen_plus = bp.vectors.columns(bp.cap() - fp, fp).into_owned();
    let mut frozen = CMat::zeros(n, fm + fp);
    frozen.columns_mut(0, fm).copy_from(&frozen_minus);
    frozen.columns_mut(fm, fp).copy_from(&frozen_plus);
    let active = linalg::null_space(&frozen.adjoint(), 1e-6);
    if active.ncols() != k {
        return Err(Error::InvalidInput(format!(
            "active complement has {} columns, expected {k}",
            active.ncols()
        )));
    }
    let mut basis = CMat::zeros(n, n);
    basis.columns_mut(0, k).copy_from(&active);
    basis.columns_mut(k, fm + fp).copy_from(&frozen);
    let i_minus: Vec<usize> = (k..k + fm).collect();
    let i_plus: Vec<usize> = (k + fm..n).collect();
    let g = rdm.in_orbitals(&basis);
    let delta_bound = i_minus.iter().map(|&j| (1.0 - g[(j, j)].re).max(0.0).sqrt()).sum::<f64>()
        + i_plus.iter().map(|&j| g[(j, j)].re.max(0.0).sqrt()).sum::<f64>();
    Ok(ActiveSelection {
        k,
        basis,
        i_minus,
        i_plus,
        delta_bound,
        lambda_minus: bm.lambda,
        lambda_plus: bp.lambda,
    })
}

#[derive(Clone, Debug)]
pub struct Projection {
    /// Normalized `Pi+ Pi- psi`.
    pub state: WaveFunction,
    /// The same state with modes numbered by the selection basis.
    pub state_in_basis: WaveFunction,
    pub achieved_overlap: f64,
    pub delta_bound: f64,
    /// `|| Pi+ Pi- psi ||`
    pub projected_norm: f64,
}

pub fn project_excitations(psi: &WaveFunction, sel: &ActiveSelection) -> Result<Projection> {
    if psi.n_modes() != sel.basis.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{}-mode state for a {}-mode selection",
            psi.n_modes(),
            sel.basis.nrows()
        )));
    }
    let mut rotated = rotate_orbitals(psi, &sel.basis.adjoint())?;
    let (mm, mp) = (sel.mask_minus(), sel.mask_plus());
    let states = rotated.basis().clone();
    for (c, &bits) in rotated.coeffs_mut().iter_mut().zip(states.states()) {
        if bits & mm != mm || bits & mp != 0 {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    let projected_norm = rotated.norm();
    if projected_norm < 1e-14 {
        return Err(Error::ZeroProjection {
            delta_bound: sel.delta_bound,
        });
    }
    rotated.normalize()?;
    let state = rotate_orbitals(&rotated, &sel.basis)?;
    let achieved_overlap = state.inner(psi)?.norm();
    Ok(Projection {
        state,
        state_in_basis: rotated,
        achieved_overlap,
        delta_bound: sel.delta_bound,
        projected_norm,
    })
}

/// `|Phi> ^ |Theta>` factorization of the projected state.
#[derive(Clone, Debug)]
pub struct Theorem1State {
    /// State on the `K` active orbitals (columns `0..K` of the basis).
    pub phi: WaveFunction,
    /// Determinant of the `I-` orbitals.
    pub theta: SlaterDeterminant,
    pub active_orbitals: CMat,
    pub projection: Projection,
    pub overlap: f64,
}

pub fn theorem1_state(psi: &WaveFunction, sel: &ActiveSelection) -> Result<Theorem1State> {
    let projection = project_excitations(psi, sel)?;
    let k = sel.k;
    let n_frozen_filled = sel.i_minus.len();
    let ne = psi.n_electrons();
    if ne < n_frozen_filled || ne - n_frozen_filled > k {
        return Err(Error::InvalidSector(format!(
            "{ne} electrons with {n_frozen_filled} frozen filled and {k} active modes"
        )));
    }
    let basis = enumerate_sector(k, ne - n_frozen_filled, DEFAULT_MAX_DIM)?;
    let mm = sel.mask_minus();
    let coeffs: Vec<Complex64> = basis
        .states()
        .iter()
        .map(|&s| projection.state_in_basis.amplitude(s | mm))
        .collect();
    let phi = WaveFunction::new(basis, coeffs)?;
    let theta = SlaterDeterminant::new(sel.basis.select_columns(&sel.i_minus))?;
    Ok(Theorem1State {
        phi,
        theta,
        active_orbitals: sel.active_orbitals(),
        overlap: projection.achieved_overlap,
        projection,
    })
}

impl Theorem1State {
    /// Rebuilds the full state as the wedge of `phi` on the active
    /// orbitals with `theta`.
    pub fn reconstruct(&self, sel: &ActiveSelection) -> Result<WaveFunction> {
        let n = sel.basis.nrows();
        let active: Vec<usize> = (0..sel.k).collect();
        let theta_local = SlaterDeterminant::from_modes(n, &sel.i_minus)?;
        let in_basis = wedge(&self.phi, &active, &theta_local, &sel.i_minus, DEFAULT_MAX_DIM)?;
        rotate_orbitals(&in_basis, &sel.basis)
    }

    /// The active part alone on the full mode space, in the selection basis.
    pub fn phi_embedded(&self, sel: &ActiveSelection) -> Result<WaveFunction> {
        let active: Vec<usize> = (0..sel.k).collect();
        embed_modes(&self.phi, &active, sel.basis.nrows(), DEFAULT_MAX_DIM)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MixedOverlap {
    /// `<psi|P_V|psi> / dim V`
    pub overlap: f64,
    /// `sum_{k <= K} C(N, k)`
    pub dim_v: f64,
    /// `<psi|P_V|psi>`
    pub weight: f64,
    /// States of the particle-number sector with at most `K` excitations.
    pub sector_dim_v: usize,
    /// `<psi|P_V|psi> / sector_dim_v`
    pub sector_overlap: f64,
}

/// Overlap of `psi` with the maximally mixed state on the span of
/// eigenbasis occupation strings with at most `k_exc` excitations over the
/// `b` vacuum.
pub fn mixed_guiding_overlap(psi: &WaveFunction, k_exc: usize, frame: &ParticleHoleFrame) -> Result<MixedOverlap> {
    let n = frame.n_modes;
    if psi.n_modes() != n {
        return Err(Error::DimensionMismatch(format!("{}-mode state for {n} modes", psi.n_modes())));
    }
    let eig = frame.to_eigenbasis(psi)?;
    let mut weight = 0.0;
    let mut sector_dim_v = 0;
    for (&bits, c) in eig.basis().states().iter().zip(eig.coeffs()) {
        if frame.excitations(bits) as usize <= k_exc {
            weight += c.norm_sqr();
            sector_dim_v += 1;
        }
    }
    let dim_v: f64 = (0..=k_exc.min(n)).map(|k| binomial(n, k) as f64).sum();
    Ok(MixedOverlap {
        overlap: weight / dim_v,
        dim_v,
        weight,
        sector_dim_v,
        sector_overlap: if sector_dim_v > 0 { weight / sector_dim_v as f64 } else { 0.0 },
    })
}

/// Largest excitation count among eigenbasis amplitudes above `tol`.
pub fn max_excitations(psi: &WaveFunction, frame: &ParticleHoleFrame, tol: f64) -> Result<usize> {
    let eig = frame.to_eigenbasis(psi)?;
    Ok(eig
        .basis()
        .states()
        .iter()
        .zip(eig.coeffs())
        .filter(|(_, c)| c.norm() > tol)
        .map(|(&b, _)| frame.excitations(b) as usize)
        .max()
        .unwrap_or(0))
}

#[derive(Clone, Debug, Serialize)]
pub struct PartialNumberRow {
    pub s: usize,
    pub block_sum: f64,
    /// `c0 M ln(2/omega) e^{-s}`
    pub reference: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PartialNumberStats {
    /// `ceil(14 M ln(2/omega))`
    pub q: usize,
    /// Smallest `c0` with every block sum under the reference.
    pub c0: f64,
    pub rows: Vec<PartialNumberRow>,
}

/// Sums of descending natural occupations over consecutive blocks of `Q`.
pub fn partial_number_stats(rdm: &OneBodyRDM, model: &ImpurityModel) -> Result<PartialNumberStats> {
    if !(model.omega > 0.0) || !model.omega.is_finite() {
        return Err(Error::InvalidInput(format!("gap {} must be positive", model.omega)));
    }
    let scale = model.m.max(1) as f64 * (2.0 / model.omega).ln();
    let q = (14.0 * scale).ceil().max(1.0) as usize;
    let mut occ = rdm.eigenvalues();
    occ.reverse();
    let sums: Vec<f64> = occ.chunks(q).map(|c| c.iter().sum()).collect();
    let c0 = sums
        .iter()
        .enumerate()
        .map(|(i, &x)| x * ((i + 1) as f64).exp() / scale)
        .fold(0.0, f64::max);
    let rows = sums
        .iter()
        .enumerate()
        .map(|(i, &block_sum)| PartialNumberRow {
            s: i + 1,
            block_sum,
            reference: c0 * scale * (-((i + 1) as f64)).exp(),
        })
        .collect();
    Ok(PartialNumberStats { q, c0, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::one_rdm;
    use crate::model::{build_impurity_model, EpsilonSpec, Hybridization, ImpuritySpec};
    use crate::operator::one_rdm_over;
    use crate::solver::{dense_ground_state, dense_spectrum};

    fn gapped(n: usize, m: usize, n_neg: usize, seed: u64, u: f64) -> ImpurityModel {
        build_impurity_model(
            n,
            m,
            &EpsilonSpec::Gapped {
                gap: 0.2,
                n_negative: Some(n_neg),
            },
            &ImpuritySpec::Random { magnitude: u },
            Hybridization::RandomOrthogonal,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn positive_spectrum_is_identity_frame() {
        let m = build_impurity_model(
            4,
            2,
            &EpsilonSpec::Explicit {
                values: vec![0.3, 0.5, 0.7, 0.9],
            },
            &ImpuritySpec::Zero,
            Hybridization::None,
            1,
        )
        .unwrap();
        let f = particle_hole(&m, 2).unwrap();
        assert_eq!(f.n_negative, 0);
        assert_eq!(f.energy_shift, 0.0);
        assert_eq!(f.mask, 0);
    }

    #[test]
    fn free_model_ground_state_is_b_vacuum() {
        let m = gapped(6, 2, 3, 5, 0.0);
        let f = particle_hole(&m, 3).unwrap();
        let (e, states, v) = b_frame_ground_state(&f).unwrap();
        assert!(e.abs() < 1e-12);
        let i = states.iter().position(|&b| b == 0).unwrap();
        assert!((v[i].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectra_agree_after_shift() {
        let m = gapped(6, 2, 3, 8, 0.5);
        let f = particle_hole(&m, 3).unwrap();
        let a = dense_spectrum(&m.integrals, 3).unwrap();
        let b = f.b_spectrum().unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - (y + f.energy_shift)).abs() < 1e-10);
        }
    }

    #[test]
    fn b_frame_density_relation() {
        let m = gapped(6, 2, 3, 8, 0.5);
        let f = particle_hole(&m, 3).unwrap();
        let (_, psi) = dense_ground_state(&m.integrals, 3).unwrap();
        let predicted = f.b_frame_rdm(&one_rdm(&psi).unwrap());
        let (_, states, v) = b_frame_ground_state(&f).unwrap();
        let direct = one_rdm_over(&states, &v, 6);
        assert!((predicted - direct).amax() < 1e-12);
    }

    #[test]
    fn lemma_inequality_and_reconstruction() {
        let m = gapped(8, 2, 4, 3, 0.5);
        let (_, psi) = dense_ground_state(&m.integrals, 4).unwrap();
        let rdm = one_rdm(&psi).unwrap();
        for k in [4, 5, 6, 8] {
            let sel = select_active(&rdm, &m, 4, k).unwrap();
            assert!(linalg::unitary_deviation(&sel.basis) < 1e-10);
            assert_eq!(sel.i_minus.len() + sel.i_plus.len(), 8 - k);
            let t = theorem1_state(&psi, &sel).unwrap();
            assert!(t.overlap >= 1.0 - sel.delta_bound - 1e-12, "K={k}");
            assert!((t.overlap - t.projection.projected_norm).abs() < 1e-10);
            let rebuilt = t.reconstruct(&sel).unwrap();
            let diff: f64 = rebuilt
                .coeffs()
                .iter()
                .zip(t.projection.state.coeffs())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-10, "K={k}: {diff}");
        }
        let full = select_active(&rdm, &m, 4, 8).unwrap();
        assert_eq!(full.delta_bound, 0.0);
        assert!(select_active(&rdm, &m, 4, 9).is_err());
        assert!(select_active(&rdm, &m, 4, 3).is_err());
    }

    #[test]
    fn free_model_selection_is_exact() {
        let m = gapped(8, 2, 4, 4, 0.0);
        let (_, psi) = dense_ground_state(&m.integrals, 4).unwrap();
        let rdm = one_rdm(&psi).unwrap();
        let sel = select_active(&rdm, &m, 4, 4).unwrap();
        assert!(sel.delta_bound < 1e-6);
        let t = theorem1_state(&psi, &sel).unwrap();
        assert!((t.overlap - 1.0).abs() < 1e-10);
    }

    #[test]
    fn theorem3_inequality() {
        let m = gapped(8, 2, 4, 6, 0.5);
        let f = particle_hole(&m, 4).unwrap();
        let (_, psi) = dense_ground_state(&m.integrals, 4).unwrap();
        let rdm = one_rdm(&psi).unwrap();
        let sel = select_active(&rdm, &m, 4, 6).unwrap();
        let t = theorem1_state(&psi, &sel).unwrap();
        let exc = max_excitations(&t.projection.state, &f, 1e-9).unwrap();
        assert!(exc <= 6);
        let mix = mixed_guiding_overlap(&psi, exc, &f).unwrap();
        assert!(mix.overlap >= t.overlap.powi(2) / mix.dim_v - 1e-12);
        let all = mixed_guiding_overlap(&psi, 8, &f).unwrap();
        assert!((all.weight - 1.0).abs() < 1e-10);
        assert_eq!(all.dim_v, 256.0);
        assert!((all.sector_overlap - 1.0 / 70.0).abs() < 1e-12);
    }

    #[test]
    fn free_model_mixed_overlap_at_zero_excitations() {
        let m = gapped(6, 2, 3, 2, 0.0);
        let f = particle_hole(&m, 3).unwrap();
        let (_, psi) = dense_ground_state(&m.integrals, 3).unwrap();
        let mix = mixed_guiding_overlap(&psi, 0, &f).unwrap();
        assert!((mix.overlap - 1.0).abs() < 1e-10);
    }

    #[test]
    fn truncation_accounting_on_free_model() {
        let m = build_impurity_model(
            6,
            2,
            &EpsilonSpec::Explicit {
                values: vec![-0.8, -0.5, -0.001, 0.002, 0.4, 0.9],
            },
            &ImpuritySpec::Zero,
            Hybridization::RandomOrthogonal,
            4,
        )
        .unwrap();
        let t = truncate_low_energy(&m, 0.01, None).unwrap();
        assert_eq!(t.m_cut, 1);
        assert_eq!(t.dropped, vec![-0.001, 0.002]);
        assert_eq!(t.electrons_removed, 1);
        assert!((t.model.integrals.e_core() - m.integrals.e_core() - (-0.001)).abs() < 1e-12);
        let before = dense_spectrum(&m.integrals, 3).unwrap()[0];
        let after = dense_spectrum(&t.model.integrals, 2).unwrap()[0];
        assert!((before - after).abs() < 1e-12);
        assert!(t.model.omega > t.threshold);
        let same = truncate_low_energy(&m, 1e-6, None).unwrap();
        assert!(same.dropped.is_empty());
    }

    #[test]
    fn partial_number_blocks() {
        let m = gapped(6, 2, 3, 2, 0.0);
        let (_, psi) = dense_ground_state(&m.integrals, 3).unwrap();
        let stats = partial_number_stats(&one_rdm(&psi).unwrap(), &m).unwrap();
        for r in &stats.rows {
            assert!((r.block_sum - r.block_sum.round()).abs() < 1e-10);
            assert!(r.block_sum <= r.reference + 1e-12);
        }
    }
}
