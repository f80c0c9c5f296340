//! Dense symmetric/Hermitian matrix kernel.
//!
//! Everything here works over [`Scalar`], so the same code path serves real
//! symmetric and complex Hermitian matrices. Eigendecompositions use cyclic
//! Jacobi rotations; for Hermitian input each rotation first removes the
//! phase of the pivot and then applies a real plane rotation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

/// Tolerance on `|M_ij - conj(M_ji)|` (relative to the largest entry) above
/// which input is rejected as asymmetric.
pub const SYMMETRY_TOL: f64 = 1e-8;

const JACOBI_REL_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Dense `n × n` symmetric (real) or Hermitian (complex) matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<S: Scalar> {
    n: usize,
    data: Vec<S>,
}

impl<S: Scalar> SymMatrix<S> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![S::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = S::one();
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = S::from_real(d);
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting asymmetric input and
    /// then symmetrizing exactly.
    pub fn from_row_major(n: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        let deviation = hermitian_deviation(n, &data);
        let scale = data.iter().map(|v| v.abs()).fold(1.0_f64, f64::max);
        if deviation > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric {
                deviation,
                tolerance: SYMMETRY_TOL,
            });
        }
        let mut m = Self { n, data };
        m.symmetrize();
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension(format!(
                "matrix is not square: {n} rows but a row of length {}",
                bad.len()
            )));
        }
        Self::from_row_major(n, rows.iter().flatten().copied().collect())
    }

    /// Wraps entries that are Hermitian by construction, symmetrizing away
    /// roundoff only.
    pub(crate) fn from_raw_hermitian(n: usize, data: Vec<S>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        let mut m = Self { n, data };
        m.symmetrize();
        m
    }

    /// `x x*`.
    pub fn outer(x: &[S]) -> Self {
        let n = x.len();
        let mut data = vec![S::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = x[i] * x[j].conj();
            }
        }
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[i * self.n + j]
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i).re()).collect()
    }

    pub fn rows(&self) -> Vec<Vec<S>> {
        self.data.chunks(self.n.max(1)).map(|r| r.to_vec()).collect()
    }

    /// Replaces each entry pair by its Hermitian average and zeroes the
    /// imaginary part of the diagonal.
    pub fn symmetrize(&mut self) {
        let n = self.n;
        for i in 0..n {
            let d = self.data[i * n + i];
            self.data[i * n + i] = S::from_real(d.re());
            for j in (i + 1)..n {
                let avg = (self.data[i * n + j] + self.data[j * n + i].conj()).scale(0.5);
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg.conj();
            }
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).re()).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v.abs2()).sum::<f64>().sqrt()
    }

    /// Real inner product `Re tr(self* other)`.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n, "inner product of mismatched matrices");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.conj() * *b).re())
            .sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v.scale(s)).collect(),
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        assert_eq!(self.n, other.n, "axpy of mismatched matrices");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b.scale(alpha);
        }
    }

    /// `self += alpha * x x*`.
    pub fn add_outer(&mut self, alpha: f64, x: &[S]) {
        let n = self.n;
        assert_eq!(x.len(), n, "rank-one update of mismatched length");
        for i in 0..n {
            let xi = x[i].scale(alpha);
            let row = &mut self.data[i * n..(i + 1) * n];
            for (r, &xj) in row.iter_mut().zip(x) {
                *r += xi * xj.conj();
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// `self * x`.
    pub fn mul_vec(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.n, "matrix-vector product of mismatched length");
        self.data
            .chunks(self.n.max(1))
            .take(self.n)
            .map(|row| row.iter().zip(x).fold(S::zero(), |acc, (&a, &b)| acc + a * b))
            .collect()
    }

    /// Quadratic form `x* self x`, real for Hermitian matrices.
    pub fn quad_form(&self, x: &[S]) -> f64 {
        dot(x, &self.mul_vec(x)).re()
    }

    /// `U* self U` for a dense `n × k` matrix `u` stored row-major.
    pub fn congruence(&self, u: &[S], k: usize) -> SymMatrix<S> {
        let n = self.n;
        assert_eq!(u.len(), n * k, "congruence with mismatched basis");
        let mu = mat_mul(&self.data, u, n, n, k);
        let out = mat_adj_mul(u, &mu, n, k, k);
        SymMatrix::from_raw_hermitian(k, out)
    }
}

fn hermitian_deviation<S: Scalar>(n: usize, data: &[S]) -> f64 {
    let mut dev = 0.0_f64;
    for i in 0..n {
        dev = dev.max(data[i * n + i].im().abs());
        for j in (i + 1)..n {
            dev = dev.max((data[i * n + j] - data[j * n + i].conj()).abs());
        }
    }
    dev
}

/// `A (r×k) · B (k×c)`, all row-major.
pub(crate) fn mat_mul<S: Scalar>(a: &[S], b: &[S], r: usize, k: usize, c: usize) -> Vec<S> {
    let mut out = vec![S::zero(); r * c];
    for i in 0..r {
        let orow = &mut out[i * c..(i + 1) * c];
        for l in 0..k {
            let ail = a[i * k + l];
            if ail == S::zero() {
                continue;
            }
            let brow = &b[l * c..(l + 1) * c];
            for (o, &blj) in orow.iter_mut().zip(brow) {
                *o += ail * blj;
            }
        }
    }
    out
}

/// `A* · B` where `A` is `k×r` and `B` is `k×c`, row-major.
pub(crate) fn mat_adj_mul<S: Scalar>(a: &[S], b: &[S], k: usize, r: usize, c: usize) -> Vec<S> {
    let mut out = vec![S::zero(); r * c];
    for l in 0..k {
        let arow = &a[l * r..(l + 1) * r];
        let brow = &b[l * c..(l + 1) * c];
        for (i, &ali) in arow.iter().enumerate() {
            let ali = ali.conj();
            if ali == S::zero() {
                continue;
            }
            let orow = &mut out[i * c..(i + 1) * c];
            for (o, &blj) in orow.iter_mut().zip(brow) {
                *o += ali * blj;
            }
        }
    }
    out
}

/// Eigenvalues in ascending order with matching unit eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenDecomposition<S: Scalar> {
    pub values: Vec<f64>,
    /// Row-major `n × n`; column `k` is the eigenvector for `values[k]`.
    pub vectors: Vec<S>,
    pub sweeps: usize,
}

impl<S: Scalar> EigenDecomposition<S> {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> Vec<S> {
        let n = self.n();
        (0..n).map(|i| self.vectors[i * n + k]).collect()
    }

    pub fn max_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn min_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// `V f(Λ) V*`, skipping eigenpairs where `f` returns zero.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix<S> {
        let n = self.n();
        let mut out = SymMatrix::zeros(n);
        let mut col = vec![S::zero(); n];
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            for (i, c) in col.iter_mut().enumerate() {
                *c = self.vectors[i * n + k];
            }
            out.add_outer(w, &col);
        }
        out.symmetrize();
        out
    }

    pub fn reconstruct(&self) -> SymMatrix<S> {
        self.reconstruct_with(|l| l)
    }
}

/// Full eigendecomposition of a symmetric/Hermitian matrix.
pub fn eig_sym<S: Scalar>(m: &SymMatrix<S>) -> Result<EigenDecomposition<S>> {
    check_hermitian(m)?;
    let n = m.n;
    let mut v = vec![S::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = S::one();
    }
    Ok(jacobi(m.data.clone(), v, n))
}

fn check_hermitian<S: Scalar>(m: &SymMatrix<S>) -> Result<()> {
    let deviation = hermitian_deviation(m.n, &m.data);
    let scale = m.data.iter().map(|v| v.abs()).fold(1.0_f64, f64::max);
    if deviation > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric {
            deviation,
            tolerance: SYMMETRY_TOL,
        });
    }
    Ok(())
}

/// Eigensolver that reuses the previous eigenbasis as a starting point.
///
/// Iterative solvers decompose a slowly changing sequence of matrices; in the
/// previous basis the new matrix is already nearly diagonal and Jacobi
/// finishes in one or two sweeps.
#[derive(Debug, Clone, Default)]
pub struct WarmEigen<S: Scalar> {
    basis: Option<Vec<S>>,
    calls: usize,
}

impl<S: Scalar> WarmEigen<S> {
    /// Refresh from the identity every this many calls to stop orthogonality
    /// drift from accumulating.
    const RESTART_EVERY: usize = 500;

    pub fn new() -> Self {
        Self { basis: None, calls: 0 }
    }

    pub fn decompose(&mut self, m: &SymMatrix<S>) -> EigenDecomposition<S> {
        let n = m.n;
        self.calls += 1;
        let restart = self.calls.is_multiple_of(Self::RESTART_EVERY);
        let eig = match self.basis.take() {
            Some(basis) if basis.len() == n * n && !restart => {
                let rotated = m.congruence(&basis, n);
                jacobi(rotated.data, basis, n)
            }
            _ => {
                let mut v = vec![S::zero(); n * n];
                for i in 0..n {
                    v[i * n + i] = S::one();
                }
                jacobi(m.data.clone(), v, n)
            }
        };
        self.basis = Some(eig.vectors.clone());
        eig
    }
}

/// Cyclic Jacobi on `a`, accumulating rotations into `v` (`v` starts as the
/// basis in which `a` is expressed).
fn jacobi<S: Scalar>(mut a: Vec<S>, mut v: Vec<S>, n: usize) -> EigenDecomposition<S> {
    let total = a.iter().map(|x| x.abs2()).sum::<f64>().sqrt();
    let tol = JACOBI_REL_TOL * total;
    let mut sweeps = 0;
    while sweeps < JACOBI_MAX_SWEEPS {
        let off = off_diagonal_norm(&a, n);
        if off <= tol {
            break;
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, n, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[i * n + i].re()).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let values = order.iter().map(|&k| diag[k]).collect();
    let mut vectors = vec![S::zero(); n * n];
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[i * n + dst] = v[i * n + src];
        }
    }
    EigenDecomposition {
        values,
        vectors,
        sweeps,
    }
}

fn off_diagonal_norm<S: Scalar>(a: &[S], n: usize) -> f64 {
    let mut s = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            s += a[p * n + q].abs2();
        }
    }
    (2.0 * s).sqrt()
}

/// Annihilates `a[p][q]` with the unitary `U = diag(1, e^{-iφ}) · G(c, s)`
/// where `φ = arg a[p][q]`, updating `a ← U* a U` and `v ← v U`.
#[inline]
fn rotate<S: Scalar>(a: &mut [S], v: &mut [S], n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    let g = apq.abs();
    if g == 0.0 {
        return;
    }
    let app = a[p * n + p].re();
    let aqq = a[q * n + q].re();
    let theta = (aqq - app) / (2.0 * g);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    // phase = e^{-iφ}; the plane rotation then sees the real pivot |a_pq|.
    let phase = apq.conj().scale(1.0 / g);
    let u_qp = phase.scale(-s);
    let u_qq = phase.scale(c);
    let cs = S::from_real(c);
    let ss = S::from_real(s);

    // columns: a ← a U
    for k in 0..n {
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        a[k * n + p] = cs * akp + u_qp * akq;
        a[k * n + q] = ss * akp + u_qq * akq;
    }
    // rows: a ← U* a
    let u_qp_c = u_qp.conj();
    let u_qq_c = u_qq.conj();
    for k in 0..n {
        let apk = a[p * n + k];
        let aqk = a[q * n + k];
        a[p * n + k] = cs * apk + u_qp_c * aqk;
        a[q * n + k] = ss * apk + u_qq_c * aqk;
    }
    for k in 0..n {
        let vkp = v[k * n + p];
        let vkq = v[k * n + q];
        v[k * n + p] = cs * vkp + u_qp * vkq;
        v[k * n + q] = ss * vkp + u_qq * vkq;
    }
    a[p * n + q] = S::zero();
    a[q * n + p] = S::zero();
    a[p * n + p] = S::from_real(app - t * g);
    a[q * n + q] = S::from_real(aqq + t * g);
}

/// Frobenius-nearest positive semidefinite matrix.
pub fn project_psd<S: Scalar>(m: &SymMatrix<S>) -> Result<SymMatrix<S>> {
    Ok(psd_part(&eig_sym(m)?))
}

/// `Σ_{λ_k > 0} λ_k v_k v_k*` from an existing decomposition.
pub fn psd_part<S: Scalar>(eig: &EigenDecomposition<S>) -> SymMatrix<S> {
    eig.reconstruct_with(|l| if l > 0.0 { l } else { 0.0 })
}

/// Leading rank-one factor `sqrt(λ_max) v_max`.
///
/// The first entry of `v_max` with magnitude above `1e-8` is rotated to be
/// real and nonnegative; a matrix with no positive eigenvalue gives zero.
pub fn rank1_extract<S: Scalar>(x: &SymMatrix<S>) -> Result<Vec<S>> {
    Ok(rank1_from_eig(&eig_sym(x)?))
}

pub fn rank1_from_eig<S: Scalar>(eig: &EigenDecomposition<S>) -> Vec<S> {
    let n = eig.n();
    if n == 0 {
        return Vec::new();
    }
    let lam = eig.max_value();
    if lam <= 0.0 {
        return vec![S::zero(); n];
    }
    let mut v = eig.vector(n - 1);
    if let Some(&pivot) = v.iter().find(|e| e.abs() > 1e-8) {
        let rot = pivot.conj().scale(1.0 / pivot.abs());
        for e in v.iter_mut() {
            *e *= rot;
        }
    }
    let scale = lam.sqrt();
    v.iter().map(|e| e.scale(scale)).collect()
}

/// `min_{|c| = 1} ‖x − c y‖₂`, the distance up to global phase (sign in the
/// real case).
pub fn phase_distance<S: Scalar>(x: &[S], y: &[S]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "phase_distance of vectors with lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    let ip = dot(y, x);
    let mag = ip.abs();
    let c = if mag > 0.0 { ip.scale(1.0 / mag) } else { S::one() };
    Ok(x.iter()
        .zip(y)
        .map(|(&xi, &yi)| (xi - c * yi).abs2())
        .sum::<f64>()
        .sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub spectral: f64,
    pub frobenius: f64,
    pub trace: f64,
}

pub fn norms<S: Scalar>(m: &SymMatrix<S>) -> Result<Norms> {
    let eig = eig_sym(m)?;
    let spectral = eig.values.iter().fold(0.0_f64, |acc, l| acc.max(l.abs()));
    Ok(Norms {
        spectral,
        frobenius: m.frobenius(),
        trace: m.trace(),
    })
}

pub fn spectral_norm<S: Scalar>(m: &SymMatrix<S>) -> Result<f64> {
    Ok(norms(m)?.spectral)
}
