//! Dense complex linear algebra for normal matrices: commutators, spectral
//! decompositions with eigenvalue clustering, and joint diagonalization of
//! commuting families.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Dense complex matrix storage shared with callers that build inputs.
pub type DMatrixC = DMatrix<C64>;

/// Default relative tolerance for normality / commutation checks.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Default relative eigenvalue clustering radius.
pub const DEFAULT_CLUSTER: f64 = 1e-8;

/// Dense n x n complex matrix with validated shape and finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    mat: DMatrix<C64>,
}

impl ComplexMatrix {
    pub fn new(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::BadShape(dim));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(dim, dim, &entries))
    }

    pub fn from_dmatrix(mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch(mat.nrows(), mat.ncols()));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFiniteEntries);
        }
        Ok(ComplexMatrix { mat })
    }

    /// Row-major real entries, for hand-written small examples.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let entries: Vec<C64> = rows
            .iter()
            .flat_map(|r| r.iter().map(|&x| C64::new(x, 0.0)))
            .collect();
        Self::new(n, entries)
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let n = values.len();
        let mat = DMatrix::from_fn(n, n, |i, j| if i == j { values[i] } else { C64::new(0.0, 0.0) });
        ComplexMatrix { mat }
    }

    pub fn identity(n: usize) -> Self {
        ComplexMatrix { mat: DMatrix::identity(n, n) }
    }

    pub fn zeros(n: usize) -> Self {
        ComplexMatrix { mat: DMatrix::zeros(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix { mat: self.mat.adjoint() }
    }

    pub fn fro_norm(&self) -> f64 {
        self.mat.norm()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.mat[(i, j)]
    }
}

/// `[a, b] = ab - ba`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(ComplexMatrix { mat: &a.mat * &b.mat - &b.mat * &a.mat })
}

/// `true` iff `|a a* - a* a|_F <= tol * max(1, |a|_F^2)`.
pub fn is_normal(a: &ComplexMatrix, tol: f64) -> bool {
    let ad = a.mat.adjoint();
    let resid = (&a.mat * &ad - &ad * &a.mat).norm();
    resid <= tol * 1.0f64.max(a.mat.norm().powi(2))
}

fn normality_residual(a: &ComplexMatrix) -> f64 {
    let ad = a.mat.adjoint();
    (&a.mat * &ad - &ad * &a.mat).norm() / 1.0f64.max(a.mat.norm().powi(2))
}

/// Commutation scale used by all relative commutator tests.
pub fn commutation_scale(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    1.0f64.max(a.fro_norm() * b.fro_norm())
}

/// Spectral decomposition of a normal matrix: clustered eigenvalues with
/// orthonormal eigenblock bases.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<C64>,
    /// One orthonormal basis (n x d matrix of columns) per eigenvalue cluster.
    pub blocks: Vec<DMatrix<C64>>,
    pub multiplicities: Vec<usize>,
}

impl SpectralDecomposition {
    pub fn projection(&self, i: usize) -> DMatrix<C64> {
        &self.blocks[i] * self.blocks[i].adjoint()
    }

    pub fn reconstruct(&self) -> DMatrix<C64> {
        let n = self.blocks[0].nrows();
        let mut acc = DMatrix::<C64>::zeros(n, n);
        for (lam, b) in self.eigenvalues.iter().zip(&self.blocks) {
            acc += (b * b.adjoint()).scale(1.0) * *lam;
        }
        acc
    }
}

fn hermitian_part(a: &DMatrix<C64>) -> DMatrix<C64> {
    (a + a.adjoint()).scale(0.5)
}

fn skew_part(a: &DMatrix<C64>) -> DMatrix<C64> {
    // (a - a*) / (2i), hermitian when collected
    let half_i = C64::new(0.0, -0.5);
    (a - a.adjoint()) * half_i
}

/// Eigendecomposition of a complex hermitian matrix by cyclic Jacobi
/// rotations. Each rotation exactly diagonalizes one 2×2 principal
/// submatrix; sweeps repeat until the off-diagonal mass is negligible.
/// Backward stable and accurate on degenerate spectra. Returns eigenvalues
/// in ascending order with an orthonormal eigenvector per column.
fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let d = m.nrows();
    let mut a = (m + m.adjoint()).scale(0.5);
    let mut v = DMatrix::<C64>::identity(d, d);
    let scale = a.norm().max(1.0);
    for _sweep in 0..60 {
        let off: f64 = (0..d)
            .flat_map(|p| (0..d).map(move |q| (p, q)))
            .filter(|&(p, q)| p != q)
            .map(|(p, q)| a[(p, q)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[(p, q)];
                // norm_sqr underflow would give 0/0 in the rotation below
                if apq.norm_sqr() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // eigenpair of the 2×2 hermitian block [[app, apq], [apq*, aqq]]
                let mid = 0.5 * (app + aqq);
                let half = 0.5 * (app - aqq);
                let rad = (half * half + apq.norm_sqr()).sqrt();
                // the root closer to app gives the small-angle rotation the
                // cyclic sweep needs to converge; cancellation-free form
                let sign = if half >= 0.0 { 1.0 } else { -1.0 };
                let r = sign * apq.norm_sqr() / (rad + half.abs());
                let lam1 = app + r;
                let lam2 = 2.0 * mid - lam1;
                let nrm = (apq.norm_sqr() + r * r).sqrt();
                let (b00, b10) = (apq / nrm, C64::new(r / nrm, 0.0));
                // second column orthogonal to the first
                let (b01, b11) = (C64::new(-r / nrm, 0.0), b00.conj());
                for i in 0..d {
                    let (x, y) = (a[(i, p)], a[(i, q)]);
                    a[(i, p)] = x * b00 + y * b10;
                    a[(i, q)] = x * b01 + y * b11;
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = x * b00 + y * b10;
                    v[(i, q)] = x * b01 + y * b11;
                }
                for j in 0..d {
                    let (x, y) = (a[(p, j)], a[(q, j)]);
                    a[(p, j)] = b00.conj() * x + b10.conj() * y;
                    a[(q, j)] = b01.conj() * x + b11.conj() * y;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)] = C64::new(lam1, 0.0);
                a[(q, q)] = C64::new(lam2, 0.0);
            }
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    (values, v.select_columns(&order))
}

/// Split one orthonormal block basis along the spectrum of a hermitian
/// operator compressed to that block. Single-linkage clustering with the
/// given absolute radius; blocks come back ordered by eigenvalue.
fn split_block(basis: &DMatrix<C64>, herm: &DMatrix<C64>, radius: f64) -> Vec<(f64, DMatrix<C64>)> {
    let d = basis.ncols();
    if d == 1 {
        let lam = (basis.adjoint() * herm * basis)[(0, 0)].re;
        return vec![(lam, basis.clone())];
    }
    let compressed = basis.adjoint() * herm * basis;
    let (eigenvalues, eigenvectors) = hermitian_eigen(&compressed);
    let mut out = Vec::new();
    let mut start = 0;
    for t in 0..d {
        let last = t + 1 == d || eigenvalues[t + 1] - eigenvalues[t] > radius;
        if last {
            let cols: Vec<usize> = (start..=t).collect();
            let sub = eigenvectors.select_columns(&cols);
            let mean: f64 = eigenvalues[start..=t].iter().sum::<f64>() / cols.len() as f64;
            out.push((mean, basis * sub));
            start = t + 1;
        }
    }
    out
}

/// Refine the full space into joint eigenblocks of a family of normal
/// matrices. Each returned basis spans a maximal subspace on which every
/// operator acts as a scalar.
pub(crate) fn joint_eigenblocks(ops: &[&ComplexMatrix], n: usize) -> Vec<DMatrix<C64>> {
    let mut blocks = vec![DMatrix::<C64>::identity(n, n)];
    for op in ops {
        for part in [hermitian_part(op.inner()), skew_part(op.inner())] {
            let radius = DEFAULT_CLUSTER * 1.0f64.max(part.norm());
            blocks = blocks
                .iter()
                .flat_map(|b| split_block(b, &part, radius).into_iter().map(|(_, m)| m))
                .collect();
        }
    }
    blocks
}

fn block_label(basis: &DMatrix<C64>, op: &ComplexMatrix) -> C64 {
    let c = basis.adjoint() * op.inner() * basis;
    c.trace() / C64::new(basis.ncols() as f64, 0.0)
}

/// Spectral theorem data for a normal matrix, with single-linkage eigenvalue
/// clustering at radius `tau_cluster` (default `1e-8 * |a|_F`).
pub fn spectral_decompose(a: &ComplexMatrix, tau_cluster: Option<f64>) -> Result<SpectralDecomposition> {
    if !is_normal(a, DEFAULT_TOL) {
        return Err(Error::NotNormal { residual: normality_residual(a) });
    }
    let radius = tau_cluster.unwrap_or(DEFAULT_CLUSTER * 1.0f64.max(a.fro_norm()));
    let blocks = joint_eigenblocks(&[a], a.dim());
    let labels: Vec<C64> = blocks.iter().map(|b| block_label(b, a)).collect();

    // single-linkage merge of block labels in the complex plane
    let m = blocks.len();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(p: &mut Vec<usize>, i: usize) -> usize {
        if p[i] != i {
            let r = find(p, p[i]);
            p[i] = r;
        }
        p[i]
    }
    for i in 0..m {
        for j in i + 1..m {
            if (labels[i] - labels[j]).norm() <= radius {
                let (a_, b_) = (find(&mut parent, i), find(&mut parent, j));
                parent[a_] = b_;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..m {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut clusters: Vec<(C64, DMatrix<C64>, usize)> = Vec::new();
    for members in groups.values() {
        // diameter check: merged raw labels must stay within 2*radius
        let mut diameter = 0.0f64;
        for &i in members {
            for &j in members {
                diameter = diameter.max((labels[i] - labels[j]).norm());
            }
        }
        if diameter > 2.0 * radius {
            return Err(Error::ClusterAmbiguity { diameter, radius });
        }
        let total: usize = members.iter().map(|&i| blocks[i].ncols()).sum();
        let mut merged = DMatrix::<C64>::zeros(a.dim(), total);
        let mut col = 0;
        let mut rep = C64::new(0.0, 0.0);
        for &i in members {
            let d = blocks[i].ncols();
            merged.columns_mut(col, d).copy_from(&blocks[i]);
            rep += labels[i] * C64::new(d as f64, 0.0);
            col += d;
        }
        rep /= C64::new(total as f64, 0.0);
        clusters.push((rep, merged, total));
    }
    clusters.sort_by(|x, y| cmp_complex(&x.0, &y.0));
    Ok(SpectralDecomposition {
        eigenvalues: clusters.iter().map(|c| c.0).collect(),
        multiplicities: clusters.iter().map(|c| c.2).collect(),
        blocks: clusters.into_iter().map(|c| c.1).collect(),
    })
}

pub(crate) fn cmp_complex(a: &C64, b: &C64) -> std::cmp::Ordering {
    cmp_f64(a.re, b.re).then_with(|| cmp_f64(a.im, b.im))
}

/// Ordering with a fixed absolute tolerance so near-ties fall through to the
/// next sort key instead of flapping on roundoff.
pub(crate) fn cmp_f64(a: f64, b: f64) -> std::cmp::Ordering {
    if (a - b).abs() <= 1e-6 {
        std::cmp::Ordering::Equal
    } else {
        a.partial_cmp(&b).unwrap()
    }
}

/// Marked simultaneous diagonalization of a commuting family.
#[derive(Clone, Debug)]
pub struct JointDiagonalization {
    pub unitary: ComplexMatrix,
    /// `labels[k][c]` = eigenvalue of `ops[k]` on column `c` of the unitary.
    pub labels: Vec<Vec<C64>>,
}

/// Simultaneously diagonalize commuting normal matrices by recursive block
/// refinement. Columns follow the canonical order: lexicographic on the
/// first operator's eigenvalue, ties broken by the later operators, then by
/// block index.
pub fn joint_diagonalize(ops: &[ComplexMatrix], tol: f64) -> Result<JointDiagonalization> {
    assert!(!ops.is_empty());
    let n = ops[0].dim();
    for (i, op) in ops.iter().enumerate() {
        if op.dim() != n {
            return Err(Error::DimensionMismatch(n, op.dim()));
        }
        if !is_normal(op, DEFAULT_TOL.max(tol)) {
            return Err(Error::NotNormal { residual: normality_residual(op) });
        }
        for (j, other) in ops.iter().enumerate().skip(i + 1) {
            let c = commutator(op, other)?;
            if c.fro_norm() > tol * commutation_scale(op, other) {
                return Err(Error::NotCommuting(i, j));
            }
        }
    }
    let refs: Vec<&ComplexMatrix> = ops.iter().collect();
    let mut blocks = joint_eigenblocks(&refs, n);
    let mut keyed: Vec<(Vec<C64>, usize)> = blocks
        .iter()
        .enumerate()
        .map(|(i, b)| (ops.iter().map(|op| block_label(b, op)).collect(), i))
        .collect();
    keyed.sort_by(|(ka, ia), (kb, ib)| {
        for (x, y) in ka.iter().zip(kb) {
            let o = cmp_complex(x, y);
            if o != std::cmp::Ordering::Equal {
                return o;
            }
        }
        ia.cmp(ib)
    });
    let mut unitary = DMatrix::<C64>::zeros(n, n);
    let mut labels = vec![Vec::with_capacity(n); ops.len()];
    let mut col = 0;
    for (key, idx) in &keyed {
        let b = std::mem::replace(&mut blocks[*idx], DMatrix::zeros(0, 0));
        let d = b.ncols();
        unitary.columns_mut(col, d).copy_from(&b);
        for (k, lam) in key.iter().enumerate() {
            for _ in 0..d {
                labels[k].push(*lam);
            }
        }
        col += d;
    }
    Ok(JointDiagonalization { unitary: ComplexMatrix { mat: unitary }, labels })
}

/// `dim ker - dim coker` from the numerical rank at `tol`; identically zero
/// on square matrices, exposed for the index statement.
pub fn square_index(a: &ComplexMatrix, tol: f64) -> i64 {
    let n = a.dim();
    if n == 0 {
        return 0;
    }
    let svd = a.mat.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let cutoff = tol * 1.0f64.max(smax);
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    (n - rank) as i64 - (n - rank) as i64
}

#[cfg(test)]
pub(crate) fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap()
}

#[cfg(test)]
pub(crate) fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
}
