//! Dense complex linear algebra kernels.
//!
//! Everything downstream works on small-to-moderate dense matrices (Landau
//! blocks, Galerkin matrices, Birman–Schwinger operators), so the kernels here
//! favour clarity and explicit error reporting over blocking for cache.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default relative tolerance for eigen-residual checks.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Relative radius (times ‖M‖) under which eigenvalues are merged when counting multiplicity.
pub const CLUSTER_RADIUS: f64 = 1e-7;

const MAX_QR_SWEEPS_PER_EIGENVALUE: usize = 100;

/// Dense complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6e}{:+.6e}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, rejecting wrong lengths and non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(Error::Dimension("ragged rows".into()));
            }
            data.extend(r.iter().map(|&x| C64::new(x, 0.0)));
        }
        Self::new(n_rows, n_cols, data)
    }

    pub fn diag(values: &[C64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Frobenius norm; used as ‖M‖ in every relative tolerance of this module.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// max |M_ij − conj(M_ji)|.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut dev = 0.0_f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// (M + M*)/2.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    /// (M − M*)/(2i), itself Hermitian.
    pub fn skew_part(&self) -> Self {
        let half_over_i = C64::new(0.0, -0.5);
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] - self[(j, i)].conj()) * half_over_i
        })
    }

    /// Block-diagonal assembly.
    pub fn block_diagonal(blocks: &[&ComplexMatrix]) -> Self {
        let n: usize = blocks.iter().map(|b| b.rows).sum();
        let m: usize = blocks.iter().map(|b| b.cols).sum();
        let mut out = Self::zeros(n, m);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            for i in 0..b.rows {
                for j in 0..b.cols {
                    out[(r0 + i, c0 + j)] = b[(i, j)];
                }
            }
            r0 += b.rows;
            c0 += b.cols;
        }
        out
    }

}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigenvalues with optional right eigenvectors (as columns) and per-pair residuals.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub values: Vec<C64>,
    pub vectors: Option<ComplexMatrix>,
    /// ‖Av − λv‖ / ‖A‖ for each pair.
    pub residuals: Vec<f64>,
    /// Size of the cluster each value belongs to.
    pub multiplicities: Vec<usize>,
}

fn require_square(m: &ComplexMatrix) -> Result<usize> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.n_rows(),
            m.n_cols()
        )));
    }
    Ok(m.n_rows())
}

fn relative_residual(m: &ComplexMatrix, norm: f64, lambda: C64, v: &[C64]) -> f64 {
    let av = m.mul_vec(v);
    let r = av
        .iter()
        .zip(v)
        .map(|(&a, &x)| (a - lambda * x).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let denom = if norm > 0.0 { norm * vn.max(f64::MIN_POSITIVE) } else { vn.max(f64::MIN_POSITIVE) };
    r / denom
}

/// Single-linkage clustering: two values share a cluster when a chain of
/// pairwise distances ≤ `radius` connects them. Returns each value's cluster size.
pub fn cluster_sizes(values: &[C64], radius: f64) -> Vec<usize> {
    let ids = cluster_ids(values, radius);
    let mut counts = vec![0usize; values.len()];
    for &id in &ids {
        counts[id] += 1;
    }
    ids.iter().map(|&id| counts[id]).collect()
}

/// Cluster label per value (label = smallest member index).
pub fn cluster_ids(values: &[C64], radius: f64) -> Vec<usize> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    // Sort by real part so only a window needs pairwise checks.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].re.total_cmp(&values[b].re));
    for (pos, &a) in order.iter().enumerate() {
        for &b in &order[pos + 1..] {
            if values[b].re - values[a].re > radius {
                break;
            }
            if (values[a] - values[b]).norm() <= radius {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
                    parent[hi] = lo;
                }
            }
        }
    }
    (0..n).map(|i| find(&mut parent, i)).collect()
}

const JACOBI_SWEEPS: usize = 60;

/// Cyclic Jacobi on a Hermitian matrix: each rotation first turns the pivot
/// real with a phase on column q, then applies a real plane rotation.
fn jacobi_hermitian(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let n = m.n_rows();
    let mut a = m.clone();
    let mut v = ComplexMatrix::identity(n);
    let floor = f64::MIN_POSITIVE / f64::EPSILON;
    for sweep in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let g = apq.norm();
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                if g <= floor || g <= 0.25 * f64::EPSILON * (app.abs() * aqq.abs()).sqrt() {
                    continue;
                }
                if g <= 1e-18 * (app.abs() + aqq.abs()) {
                    continue;
                }
                rotated = true;
                let e = apq / g;
                for r in 0..n {
                    a[(r, q)] *= e.conj();
                    v[(r, q)] *= e.conj();
                }
                for r in 0..n {
                    a[(q, r)] *= e;
                }
                let tau = (aqq - app) / (2.0 * g);
                let t = if tau >= 0.0 { 1.0 } else { -1.0 } / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for r in 0..n {
                    let (x, y) = (a[(r, p)], a[(r, q)]);
                    a[(r, p)] = x * c - y * s;
                    a[(r, q)] = x * s + y * c;
                    let (x, y) = (v[(r, p)], v[(r, q)]);
                    v[(r, p)] = x * c - y * s;
                    v[(r, q)] = x * s + y * c;
                }
                for r in 0..n {
                    let (x, y) = (a[(p, r)], a[(q, r)]);
                    a[(p, r)] = x * c - y * s;
                    a[(q, r)] = x * s + y * c;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
            }
        }
        if !rotated {
            return Ok(((0..n).map(|i| a[(i, i)].re).collect(), v));
        }
        if sweep + 1 == JACOBI_SWEEPS {
            break;
        }
    }
    Err(Error::NoConvergence {
        index: 0,
        iterations: JACOBI_SWEEPS,
    })
}

/// Eigen-decomposition of a Hermitian matrix; values ascending, vectors orthonormal.
pub fn eig_hermitian(m: &ComplexMatrix, tol: f64) -> Result<EigenResult> {
    let n = require_square(m)?;
    let norm = m.norm();
    let deviation = m.hermitian_deviation();
    let allowed = tol * norm;
    if deviation > allowed {
        return Err(Error::Symmetry { deviation, allowed });
    }
    if n == 0 {
        return Ok(EigenResult {
            values: vec![],
            vectors: Some(ComplexMatrix::zeros(0, 0)),
            residuals: vec![],
            multiplicities: vec![],
        });
    }
    let (diag, vecs) = jacobi_hermitian(&m.hermitian_part())?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));
    let values: Vec<C64> = order.iter().map(|&i| C64::new(diag[i], 0.0)).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    let residuals: Vec<f64> = (0..n)
        .map(|j| relative_residual(m, norm, values[j], &vectors.column(j)))
        .collect();
    if let Some((index, &residual)) = residuals
        .iter()
        .enumerate()
        .find(|(_, &r)| r > tol || !r.is_finite())
    {
        return Err(Error::Residual { index, residual, tol });
    }
    let multiplicities = cluster_sizes(&values, CLUSTER_RADIUS * norm);
    Ok(EigenResult {
        values,
        vectors: Some(vectors),
        residuals,
        multiplicities,
    })
}

/// Real eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &ComplexMatrix, tol: f64) -> Result<Vec<f64>> {
    Ok(eig_hermitian(m, tol)?.values.iter().map(|z| z.re).collect())
}

/// Eigenvalues and right eigenvectors of a general square complex matrix.
///
/// Householder reduction to Hessenberg form followed by single-shift complex QR
/// (Wilkinson shifts, exceptional shifts every ten stalled sweeps) gives a Schur
/// form `A = Z T Z*`; eigenvectors come from back-substitution on `T`.
/// Values are sorted by (Re, Im). Residuals are enforced only for values whose
/// cluster is a singleton.
pub fn eig_general(m: &ComplexMatrix, tol: f64) -> Result<EigenResult> {
    let n = require_square(m)?;
    let norm = m.norm();
    let (t, z) = schur(m)?;
    let raw_values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let raw_vectors = triangular_eigenvectors(&t, &z);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        raw_values[a]
            .re
            .total_cmp(&raw_values[b].re)
            .then(raw_values[a].im.total_cmp(&raw_values[b].im))
    });
    let values: Vec<C64> = order.iter().map(|&i| raw_values[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| raw_vectors[(i, order[j])]);
    let multiplicities = cluster_sizes(&values, CLUSTER_RADIUS * norm);
    let residuals: Vec<f64> = (0..n)
        .map(|j| relative_residual(m, norm, values[j], &vectors.column(j)))
        .collect();
    for (index, (&residual, &mult)) in residuals.iter().zip(&multiplicities).enumerate() {
        if mult == 1 && !(residual <= tol) {
            return Err(Error::Residual { index, residual, tol });
        }
    }
    Ok(EigenResult {
        values,
        vectors: Some(vectors),
        residuals,
        multiplicities,
    })
}

/// Complex Schur decomposition `A = Z T Z*` with `T` upper triangular.
pub fn schur(m: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = require_square(m)?;
    let mut h = m.clone();
    let mut z = ComplexMatrix::identity(n);
    hessenberg_reduce(&mut h, &mut z);
    hessenberg_qr(&mut h, &mut z)?;
    // Clean the strictly lower part left over from deflation.
    for i in 0..n {
        for j in 0..i {
            h[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok((h, z))
}

fn hessenberg_reduce(h: &mut ComplexMatrix, z: &mut ComplexMatrix) {
    let n = h.n_rows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let len = n - k - 1;
        let mut v: Vec<C64> = (0..len).map(|i| h[(k + 1 + i, k)]).collect();
        let xnorm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let x0 = v[0];
        let phase = if x0.norm() == 0.0 { C64::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -phase * xnorm;
        v[0] -= alpha;
        let vnorm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for c in v.iter_mut() {
            *c /= vnorm;
        }
        // H <- P H with P = I - 2 v v*
        for j in 0..n {
            let s: C64 = (0..len).map(|i| v[i].conj() * h[(k + 1 + i, j)]).sum();
            if s != C64::new(0.0, 0.0) {
                for i in 0..len {
                    h[(k + 1 + i, j)] -= v[i] * s * 2.0;
                }
            }
        }
        // H <- H P, Z <- Z P
        for mat in [&mut *h, &mut *z] {
            for i in 0..n {
                let s: C64 = (0..len).map(|l| mat[(i, k + 1 + l)] * v[l]).sum();
                if s != C64::new(0.0, 0.0) {
                    for l in 0..len {
                        mat[(i, k + 1 + l)] -= s * v[l].conj() * 2.0;
                    }
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = C64::new(0.0, 0.0);
        }
    }
}

struct Givens {
    c: f64,
    s: C64,
}

impl Givens {
    /// Rotation with [c, s; -s̄, c] · [a; b] = [r; 0].
    fn new(a: C64, b: C64) -> Self {
        let bn = b.norm();
        if bn == 0.0 {
            return Self { c: 1.0, s: C64::new(0.0, 0.0) };
        }
        let an = a.norm();
        if an == 0.0 {
            return Self { c: 0.0, s: b.conj() / bn };
        }
        let r = an.hypot(bn);
        let c = an / r;
        let s = (a / an) * b.conj() / r;
        Self { c, s }
    }

    fn apply_left(&self, m: &mut ComplexMatrix, r1: usize, r2: usize, cols: std::ops::Range<usize>) {
        for j in cols {
            let (x, y) = (m[(r1, j)], m[(r2, j)]);
            m[(r1, j)] = x * self.c + self.s * y;
            m[(r2, j)] = -self.s.conj() * x + y * self.c;
        }
    }

    /// M <- M G* on columns (c1, c2).
    fn apply_right(&self, m: &mut ComplexMatrix, c1: usize, c2: usize, rows: std::ops::Range<usize>) {
        for i in rows {
            let (x, y) = (m[(i, c1)], m[(i, c2)]);
            m[(i, c1)] = x * self.c + y * self.s.conj();
            m[(i, c2)] = -x * self.s + y * self.c;
        }
    }
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let half_tr = (a + d) * 0.5;
    let disc = ((a - d) * 0.5).powi(2) + b * c;
    let root = disc.sqrt();
    let l1 = half_tr + root;
    let l2 = half_tr - root;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn hessenberg_qr(h: &mut ComplexMatrix, z: &mut ComplexMatrix) -> Result<()> {
    let n = h.n_rows();
    if n == 0 {
        return Ok(());
    }
    let scale = h.max_abs();
    let mut hi = n - 1;
    let mut iter = 0usize;
    while hi > 0 {
        // Find the start of the active unreduced block.
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let mut diag = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            if diag == 0.0 {
                diag = scale;
            }
            if sub <= f64::EPSILON * diag || sub <= f64::MIN_POSITIVE * 1e3 {
                h[(lo, lo - 1)] = C64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > MAX_QR_SWEEPS_PER_EIGENVALUE {
            return Err(Error::NoConvergence {
                index: hi,
                iterations: iter - 1,
            });
        }
        let shift = if iter % 10 == 0 {
            // Exceptional shift to break cycles.
            let base = h[(hi, hi)];
            let bump = h[(hi, hi - 1)].re.abs() + if hi >= 2 { h[(hi - 1, hi - 2)].re.abs() } else { 0.0 };
            base + C64::new(bump, 0.75 * bump)
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };

        for i in lo..=hi {
            h[(i, i)] -= shift;
        }
        let mut rotations = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let g = Givens::new(h[(k, k)], h[(k + 1, k)]);
            g.apply_left(h, k, k + 1, k..n);
            h[(k + 1, k)] = C64::new(0.0, 0.0);
            rotations.push(g);
        }
        for (offset, g) in rotations.iter().enumerate() {
            let k = lo + offset;
            g.apply_right(h, k, k + 1, 0..(k + 2).min(hi + 1));
            g.apply_right(z, k, k + 1, 0..n);
        }
        for i in lo..=hi {
            h[(i, i)] += shift;
        }
    }
    Ok(())
}

/// Right eigenvectors of `A = Z T Z*` from back-substitution on upper-triangular `T`.
fn triangular_eigenvectors(t: &ComplexMatrix, z: &ComplexMatrix) -> ComplexMatrix {
    let n = t.n_rows();
    let smin = (f64::EPSILON * t.norm()).max(f64::MIN_POSITIVE * 1e10);
    let mut out = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let mut y = vec![C64::new(0.0, 0.0); n];
        y[k] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let s: C64 = (i + 1..=k).map(|j| t[(i, j)] * y[j]).sum();
            let mut d = t[(i, i)] - lambda;
            if d.norm() < smin {
                d = C64::new(smin, 0.0);
            }
            y[i] = -s / d;
            // Keep the partial vector bounded.
            let big = y[i..=k].iter().map(|c| c.norm()).fold(0.0, f64::max);
            if big > 1e100 {
                for c in y[i..=k].iter_mut() {
                    *c /= big;
                }
            }
        }
        let v: Vec<C64> = (0..n)
            .map(|r| (0..=k).map(|j| z[(r, j)] * y[j]).sum())
            .collect();
        let vn = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for r in 0..n {
            out[(r, k)] = if vn > 0.0 { v[r] / vn } else { v[r] };
        }
    }
    out
}

struct LuFactors {
    lu: ComplexMatrix,
    perm: Vec<usize>,
    sign: f64,
    /// First zero pivot (exactly singular), if any.
    zero_pivot: Option<usize>,
}

fn lu_factor(m: &ComplexMatrix) -> LuFactors {
    let n = m.n_rows();
    let mut lu = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    let mut zero_pivot = None;
    for k in 0..n {
        let (p, pmag) = (k..n)
            .map(|i| (i, lu[(i, k)].norm()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmag == 0.0 {
            zero_pivot.get_or_insert(k);
            continue;
        }
        if p != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
            perm.swap(k, p);
            sign = -sign;
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let f = lu[(i, k)] / pivot;
            lu[(i, k)] = f;
            if f != C64::new(0.0, 0.0) {
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= f * u;
                }
            }
        }
    }
    LuFactors { lu, perm, sign, zero_pivot }
}

/// Determinant by partial-pivoting LU. Exactly singular input returns exactly 0.
pub fn det_lu(m: &ComplexMatrix) -> Result<C64> {
    let n = require_square(m)?;
    let f = lu_factor(m);
    if f.zero_pivot.is_some() {
        return Ok(C64::new(0.0, 0.0));
    }
    let mut det = C64::new(f.sign, 0.0);
    for i in 0..n {
        det *= f.lu[(i, i)];
    }
    Ok(det)
}

/// Smallest pivot magnitude accepted by [`solve`].
pub const MIN_PIVOT: f64 = 1e-300;

/// Solves `M X = rhs` by partial-pivoting LU.
pub fn solve(m: &ComplexMatrix, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = require_square(m)?;
    if rhs.n_rows() != n {
        return Err(Error::Dimension(format!(
            "right-hand side has {} rows, matrix is {n}x{n}",
            rhs.n_rows()
        )));
    }
    let f = lu_factor(m);
    for k in 0..n {
        let magnitude = f.lu[(k, k)].norm();
        if magnitude <= MIN_PIVOT {
            return Err(Error::Singular { pivot: k, magnitude });
        }
    }
    let ncols = rhs.n_cols();
    let mut x = ComplexMatrix::zeros(n, ncols);
    for c in 0..ncols {
        let mut y: Vec<C64> = f.perm.iter().map(|&p| rhs[(p, c)]).collect();
        for i in 0..n {
            let s: C64 = (0..i).map(|j| f.lu[(i, j)] * y[j]).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let s: C64 = (i + 1..n).map(|j| f.lu[(i, j)] * y[j]).sum();
            y[i] = (y[i] - s) / f.lu[(i, i)];
        }
        for i in 0..n {
            x[(i, c)] = y[i];
        }
    }
    Ok(x)
}

pub fn inverse(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    solve(m, &ComplexMatrix::identity(m.n_rows()))
}

/// Singular values, descending.
pub fn singular_values(m: &ComplexMatrix) -> Result<Vec<f64>> {
    if m.n_rows() == 0 || m.n_cols() == 0 {
        return Ok(vec![]);
    }
    // one-sided (Hestenes) Jacobi on the columns of the taller orientation
    let w = if m.n_rows() >= m.n_cols() { m.clone() } else { m.adjoint() };
    let (rows, cols) = (w.n_rows(), w.n_cols());
    let mut u: Vec<Vec<C64>> = (0..cols).map(|j| w.column(j)).collect();
    let mut converged = false;
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for j in 0..cols {
            for k in j + 1..cols {
                let alpha: f64 = u[j].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = u[k].iter().map(|z| z.norm_sqr()).sum();
                let gamma: C64 = (0..rows).map(|i| u[j][i].conj() * u[k][i]).sum();
                let g = gamma.norm();
                if g == 0.0 || g <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let e = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta >= 0.0 { 1.0 } else { -1.0 } / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for i in 0..rows {
                    let x = u[j][i];
                    let y = u[k][i] * e.conj();
                    u[j][i] = x * c - y * s;
                    u[k][i] = x * s + y * c;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            index: 0,
            iterations: JACOBI_SWEEPS,
        });
    }
    let mut s: Vec<f64> = u.iter().map(|col| col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Schatten-p norm from singular values.
pub fn schatten_norm(m: &ComplexMatrix, p: f64) -> Result<f64> {
    let s = singular_values(m)?;
    Ok(s.iter().map(|x| x.powf(p)).sum::<f64>().powf(1.0 / p))
}

/// Positive semidefinite square root of a Hermitian matrix; negative round-off
/// eigenvalues are clipped to zero.
pub fn hermitian_sqrt(m: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    let eig = eig_hermitian(m, tol)?;
    let n = m.n_rows();
    let v = eig.vectors.expect("hermitian solver returns vectors");
    let roots: Vec<f64> = eig.values.iter().map(|z| z.re.max(0.0).sqrt()).collect();
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| v[(i, k)] * roots[k] * v[(j, k)].conj()).sum()
    }))
}

/// Numerical-range strip: ([Re_min, Re_max], [Im_min, Im_max]) from the
/// extreme eigenvalues of the Hermitian and skew parts.
pub fn bendixson_bounds(m: &ComplexMatrix, tol: f64) -> Result<((f64, f64), (f64, f64))> {
    let re = hermitian_eigenvalues(&m.hermitian_part(), tol)?;
    let im = hermitian_eigenvalues(&m.skew_part(), tol)?;
    let span = |v: &[f64]| (v.first().copied().unwrap_or(0.0), v.last().copied().unwrap_or(0.0));
    Ok((span(&re), span(&im)))
}
