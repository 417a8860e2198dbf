//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;

const CHUNK: usize = 4096;

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// `sum conj(a_i) b_i` with a fixed chunked reduction order.
pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    let partials: Vec<Complex64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u.conj() * v).sum())
        .collect();
    partials.into_iter().sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    let partials: Vec<f64> = a
        .par_chunks(CHUNK)
        .map(|x| x.iter().map(|u| u.norm_sqr()).sum())
        .collect();
    partials.into_iter().sum::<f64>().sqrt()
}

pub fn dot_real(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let partials: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u * v).sum())
        .collect();
    partials.into_iter().sum()
}

pub fn norm_real(a: &[f64]) -> f64 {
    dot_real(a, a).sqrt()
}

/// `y += alpha x`
pub fn axpy_real(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_chunks_mut(CHUNK)
        .zip(x.par_chunks(CHUNK))
        .for_each(|(yc, xc)| yc.iter_mut().zip(xc).for_each(|(u, v)| *u += alpha * v));
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Real part, or an error when any imaginary part exceeds `tol`.
pub fn to_real(m: &CMat, tol: f64) -> Result<RMat> {
    let worst = m.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if worst > tol {
        return Err(Error::InvalidInput(format!(
            "matrix has imaginary parts up to {worst:.3e}; real orbitals required"
        )));
    }
    Ok(m.map(|z| z.re))
}

pub fn max_imag(m: &CMat) -> f64 {
    m.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
}

pub fn hermitian_deviation(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn symmetric_deviation(m: &RMat) -> f64 {
    (m - m.transpose()).amax()
}

/// `max |U^dag U - I|`
pub fn unitary_deviation(u: &CMat) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let n = u.nrows();
    (u.adjoint() * u - CMat::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max |X^dag X - I|` for a tall matrix with orthonormal columns.
pub fn orthonormality_deviation(x: &CMat) -> f64 {
    let k = x.ncols();
    (x.adjoint() * x - CMat::identity(k, k)).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Multiplies the column by the phase that makes its first entry with
/// modulus above `1e-12` real and positive.
pub fn canonicalize_column(m: &mut CMat, j: usize) {
    let n = m.nrows();
    if let Some(i) = (0..n).find(|&i| m[(i, j)].norm() > 1e-12) {
        let z = m[(i, j)];
        let phase = z.conj() / z.norm();
        for r in 0..n {
            m[(r, j)] *= phase;
        }
        m[(i, j)] = Complex64::new(m[(i, j)].re, 0.0);
    }
}

pub fn canonicalize_column_real(m: &mut RMat, j: usize) {
    let n = m.nrows();
    if let Some(i) = (0..n).find(|&i| m[(i, j)].abs() > 1e-12) {
        if m[(i, j)] < 0.0 {
            for r in 0..n {
                m[(r, j)] = -m[(r, j)];
            }
        }
    }
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues ascending
/// (ties by original index) and canonically phased eigenvectors.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
        canonicalize_column(&mut vecs, k);
    }
    (values, vecs)
}

/// Real symmetric counterpart of [`eigh`].
pub fn eigh_real(m: &RMat) -> (Vec<f64>, RMat) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = RMat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
        canonicalize_column_real(&mut vecs, k);
    }
    (values, vecs)
}

/// Orthonormal columns from a Gaussian matrix via QR.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> RMat {
    let a = RMat::from_fn(n, n, |_, _| standard_normal(rng));
    let qr = a.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col *= -1.0;
        }
    }
    q
}

pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let a = CMat::from_fn(n, n, |_, _| Complex64::new(standard_normal(rng), standard_normal(rng)));
    let qr = a.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            let mut col = q.column_mut(j);
            col *= phase;
        }
    }
    q
}

/// Random `n x k` matrix with orthonormal columns.
pub fn random_isometry<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> CMat {
    random_unitary(n, rng).columns(0, k).into_owned()
}

/// Extends orthonormal columns to a full unitary by Gram-Schmidt over the
/// unit vectors, taken in index order.
pub fn complete_basis(x: &CMat) -> CMat {
    let n = x.nrows();
    let mut cols: Vec<DVector<Complex64>> = (0..x.ncols()).map(|j| x.column(j).into_owned()).collect();
    for e in 0..n {
        if cols.len() == n {
            break;
        }
        let mut v = DVector::<Complex64>::zeros(n);
        v[e] = Complex64::new(1.0, 0.0);
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dotc(&v);
                v -= c * proj;
            }
        }
        let nv = v.norm();
        if nv > 1e-6 {
            cols.push(v / Complex64::new(nv, 0.0));
        }
    }
    CMat::from_columns(&cols)
}

/// Orthonormal basis of the null space of `a` (columns). Singular values
/// come from the Gram matrix, so `tol` below about `1e-7` is not meaningful.
pub fn null_space(a: &CMat, tol: f64) -> CMat {
    let n = a.ncols();
    if a.nrows() == 0 {
        return CMat::identity(n, n);
    }
    // Null space of A = null space of A^dag A, whose eigenvectors are exact.
    let gram = a.adjoint() * a;
    let (vals, vecs) = eigh(&gram);
    let keep: Vec<usize> = (0..n).filter(|&i| vals[i] <= tol * tol).collect();
    CMat::from_fn(n, keep.len(), |r, c| vecs[(r, keep[c])])
}

/// Thin SVD `a = U diag(s) V^dag` with singular values descending and
/// `V` always a full square unitary.
pub fn svd_full_v(a: &CMat) -> (CMat, Vec<f64>, CMat) {
    let (m, n) = a.shape();
    let gram = a.adjoint() * a;
    let (vals, vecs) = eigh(&gram);
    // descending
    let order: Vec<usize> = (0..n).rev().collect();
    let v = CMat::from_fn(n, n, |r, c| vecs[(r, order[c])]);
    let s: Vec<f64> = order.iter().map(|&i| vals[i].max(0.0).sqrt()).collect();
    let k = m.min(n);
    let mut u = CMat::zeros(m, k);
    for j in 0..k {
        if s[j] > 1e-300 {
            let col = a * v.column(j) / Complex64::new(s[j], 0.0);
            u.set_column(j, &col);
        }
    }
    (u, s[..k].to_vec(), v)
}

/// Determinant of a small complex matrix (LU with partial pivoting).
pub fn det(m: &CMat) -> Complex64 {
    if m.nrows() == 0 {
        return Complex64::new(1.0, 0.0);
    }
    m.clone().lu().determinant()
}
