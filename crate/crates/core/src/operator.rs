//! Real-coefficient polynomials in fermionic ladder operators.
//!
//! Terms are kept normal ordered: creators first with ascending modes, then
//! annihilators with descending modes, so `a_0^dag a_2^dag a_3 a_1` is
//! canonical.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::fock::{apply_ladder_string, LadderOp, OccupationState};
use crate::linalg::RMat;
use crate::model::MolecularIntegrals;

const DROP_TOL: f64 = 1e-14;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FermionOperator {
    pub n_modes: usize,
    terms: BTreeMap<Vec<LadderOp>, f64>,
}

fn rank(op: &LadderOp) -> (u8, i64) {
    if op.dagger {
        (0, op.mode as i64)
    } else {
        (1, -(op.mode as i64))
    }
}

/// Normal-orders `coeff * ops`, returning canonical terms.
pub fn normal_order(ops: &[LadderOp], coeff: f64) -> Vec<(Vec<LadderOp>, f64)> {
    let mut out = Vec::new();
    let mut stack = vec![(ops.to_vec(), coeff)];
    while let Some((ops, c)) = stack.pop() {
        let pos = ops.windows(2).position(|w| rank(&w[0]) >= rank(&w[1]));
        let Some(i) = pos else {
            out.push((ops, c));
            continue;
        };
        let (x, y) = (ops[i], ops[i + 1]);
        if x == y {
            // a a = a^dag a^dag = 0
            continue;
        }
        let mut swapped = ops.clone();
        swapped.swap(i, i + 1);
        stack.push((swapped, -c));
        if !x.dagger && y.dagger && x.mode == y.mode {
            let mut contracted = ops[..i].to_vec();
            contracted.extend_from_slice(&ops[i + 2..]);
            stack.push((contracted, c));
        }
    }
    out
}

impl FermionOperator {
    pub fn zero(n_modes: usize) -> Self {
        FermionOperator {
            n_modes,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n_modes: usize, c: f64) -> Self {
        let mut op = Self::zero(n_modes);
        op.add_term(&[], c);
        op
    }

    /// Adds `coeff * ops` after normal ordering.
    pub fn add_term(&mut self, ops: &[LadderOp], coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        for (term, c) in normal_order(ops, coeff) {
            *self.terms.entry(term).or_insert(0.0) += c;
        }
    }

    /// Removes coefficients below `1e-14` in magnitude.
    pub fn compress(&mut self) {
        self.terms.retain(|_, c| c.abs() > DROP_TOL);
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[LadderOp], f64)> {
        self.terms.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn constant_term(&self) -> f64 {
        self.terms.get(&Vec::new()).copied().unwrap_or(0.0)
    }

    pub fn add_constant(&mut self, c: f64) {
        self.add_term(&[], c);
    }

    /// `E_core + sum h_pq a_p^dag a_q + 1/2 sum (pq|rs) a_p^dag a_r^dag a_s a_q`.
    pub fn from_integrals(ham: &MolecularIntegrals) -> Self {
        let n = ham.n_modes();
        let mut op = Self::constant(n, ham.e_core());
        for p in 0..n {
            for q in 0..n {
                let v = ham.h()[(p, q)];
                if v != 0.0 {
                    op.add_term(&[LadderOp::create(p), LadderOp::annihilate(q)], v);
                }
            }
        }
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let v = ham.g(p, q, r, s);
                        if v != 0.0 {
                            op.add_term(
                                &[
                                    LadderOp::create(p),
                                    LadderOp::create(r),
                                    LadderOp::annihilate(s),
                                    LadderOp::annihilate(q),
                                ],
                                0.5 * v,
                            );
                        }
                    }
                }
            }
        }
        op.compress();
        op
    }

    /// Replaces every ladder operator by its adjoint on the flagged modes and
    /// normal-orders the result.
    pub fn conjugate_modes(&self, flip: &[bool]) -> Result<Self> {
        if flip.len() != self.n_modes {
            return Err(Error::DimensionMismatch(format!(
                "{} flags for {} modes",
                flip.len(),
                self.n_modes
            )));
        }
        let mut out = Self::zero(self.n_modes);
        for (ops, c) in &self.terms {
            let mapped: Vec<LadderOp> = ops
                .iter()
                .map(|op| LadderOp {
                    mode: op.mode,
                    dagger: op.dagger ^ flip[op.mode],
                })
                .collect();
            out.add_term(&mapped, *c);
        }
        out.compress();
        Ok(out)
    }

    /// `(state, amplitude)` pairs of `O |s>`, merged.
    pub fn apply_to_state(&self, s: OccupationState) -> Vec<(OccupationState, f64)> {
        let mut acc: BTreeMap<u64, f64> = BTreeMap::new();
        for (ops, c) in &self.terms {
            if let Some((t, sign)) = apply_ladder_string(ops, s) {
                *acc.entry(t.bits()).or_insert(0.0) += c * sign;
            }
        }
        acc.into_iter().map(|(b, v)| (OccupationState(b), v)).collect()
    }

    /// Matrix `<states[i]| O |states[j]>`. Fails if `O` leaves the span.
    pub fn dense_matrix(&self, states: &[u64]) -> Result<RMat> {
        let index: HashMap<u64, usize> = states.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        let d = states.len();
        let mut m = RMat::zeros(d, d);
        for (j, &bits) in states.iter().enumerate() {
            for (t, v) in self.apply_to_state(OccupationState(bits)) {
                match index.get(&t.bits()) {
                    Some(&i) => m[(i, j)] += v,
                    None if v.abs() <= 1e-12 => {}
                    None => {
                        return Err(Error::InvalidInput(format!(
                            "operator maps {bits:#b} outside the basis (amplitude {v:.3e})"
                        )));
                    }
                }
            }
        }
        Ok(m)
    }

    /// Largest coefficient magnitude of `O - O^dag`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut adj = Self::zero(self.n_modes);
        for (ops, c) in &self.terms {
            let rev: Vec<LadderOp> = ops
                .iter()
                .rev()
                .map(|op| LadderOp {
                    mode: op.mode,
                    dagger: !op.dagger,
                })
                .collect();
            adj.add_term(&rev, *c);
        }
        let mut diff = self.clone();
        for (ops, c) in adj.terms {
            *diff.terms.entry(ops).or_insert(0.0) -= c;
        }
        diff.terms.values().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `gamma_pq = <psi| a_p^dag a_q |psi>` for a real state over an arbitrary
/// list of basis states.
pub fn one_rdm_over(states: &[u64], coeffs: &[f64], n_modes: usize) -> RMat {
    let index: HashMap<u64, usize> = states.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let mut g = RMat::zeros(n_modes, n_modes);
    for (j, &bits) in states.iter().enumerate() {
        let c = coeffs[j];
        if c == 0.0 {
            continue;
        }
        let s = OccupationState(bits);
        for q in s.occupied() {
            let (s1, sq) = s.annihilate(q).expect("occupied");
            for p in 0..n_modes {
                if let Some((t, sp)) = s1.create(p) {
                    if let Some(&i) = index.get(&t.bits()) {
                        g[(p, q)] += coeffs[i] * c * sp * sq;
                    }
                }
            }
        }
    }
    g
}
