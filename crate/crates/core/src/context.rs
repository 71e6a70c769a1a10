//! Commutative unital *-subalgebras of M_n(C), represented by the orthogonal
//! decomposition of C^n into their joint eigenblocks. A context with n blocks
//! is a MASA; the single-block context is the scalars C*I.

use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::{self, C64, ComplexMatrix};

/// Gram-Schmidt acceptance threshold inside canonicalization.
const GS_TOL: f64 = 1e-8;
/// Rounding quantum for canonical ordering and stable ids.
const ROUND: f64 = 1e-6;

/// An ordered orthogonal decomposition of C^n; the k blocks are the points
/// of the Gelfand spectrum of the corresponding commutative subalgebra.
#[derive(Clone, Debug)]
pub struct ProjectionResolution {
    dim: usize,
    blocks: Vec<DMatrix<C64>>,
    id: u64,
}

/// The canonical restriction map between Gelfand spectra: each block of the
/// finer context lands in a unique block of the coarser one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpectrumMap {
    pub source: u64,
    pub target: u64,
    /// `fiber[i]` = index of the coarse block containing fine block `i`.
    pub fiber: Vec<usize>,
}

fn round_key(x: f64) -> i64 {
    let r = (x / ROUND).round();
    if r == 0.0 {
        0 // collapse -0.0
    } else {
        r as i64
    }
}

/// Deterministic orthonormal basis of the subspace spanned by `vectors`:
/// Gram-Schmidt over the projections of the standard basis, with a phase fix
/// so the basis depends only on the subspace.
fn canonical_basis(dim: usize, vectors: &DMatrix<C64>) -> DMatrix<C64> {
    let proj = vectors * vectors.adjoint();
    let mut basis: Vec<DVector<C64>> = Vec::new();
    for j in 0..dim {
        let mut v = proj.column(j).into_owned();
        for _ in 0..2 {
            for b in &basis {
                let coef = b.dotc(&v);
                v -= b * coef;
            }
        }
        let norm = v.norm();
        if norm > GS_TOL {
            v /= C64::new(norm, 0.0);
            // rotate so the first significant entry is positive real
            if let Some(z) = v.iter().find(|z| z.norm() > GS_TOL).copied() {
                v *= z.conj() / C64::new(z.norm(), 0.0);
            }
            basis.push(v);
        }
        if basis.len() == vectors.ncols() {
            break;
        }
    }
    let mut out = DMatrix::<C64>::zeros(dim, basis.len());
    for (c, v) in basis.iter().enumerate() {
        out.set_column(c, v);
    }
    out
}

fn block_sort_key(b: &DMatrix<C64>) -> (usize, Vec<(i64, i64)>) {
    let first = b.column(0);
    (b.ncols(), first.iter().map(|z| (round_key(z.re), round_key(z.im))).collect())
}

impl ProjectionResolution {
    /// Build from raw orthogonal block bases; canonicalizes basis vectors,
    /// block order, and the stable id.
    pub fn from_blocks(dim: usize, raw: Vec<DMatrix<C64>>) -> Self {
        let mut blocks: Vec<DMatrix<C64>> =
            raw.iter().map(|b| canonical_basis(dim, b)).collect();
        blocks.sort_by(|a, b| block_sort_key(a).cmp(&block_sort_key(b)));
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        dim.hash(&mut hasher);
        for b in &blocks {
            b.ncols().hash(&mut hasher);
            for z in b.iter() {
                round_key(z.re).hash(&mut hasher);
                round_key(z.im).hash(&mut hasher);
            }
        }
        ProjectionResolution { dim, blocks, id: hasher.finish() }
    }

    /// The scalars C*I: a single block spanning all of C^n.
    pub fn trivial(dim: usize) -> Self {
        Self::from_blocks(dim, vec![DMatrix::identity(dim, dim)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, i: usize) -> &DMatrix<C64> {
        &self.blocks[i]
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.ncols()).collect()
    }

    pub fn is_trivial(&self) -> bool {
        self.blocks.len() == 1
    }

    pub fn is_masa(&self) -> bool {
        self.blocks.len() == self.dim
    }

    pub fn projection(&self, i: usize) -> DMatrix<C64> {
        &self.blocks[i] * self.blocks[i].adjoint()
    }

    /// The scalar an operator takes on block `i` (meaningful when the
    /// context contains the operator).
    pub fn block_label(&self, op: &ComplexMatrix, i: usize) -> C64 {
        let c = self.blocks[i].adjoint() * op.inner() * &self.blocks[i];
        c.trace() / C64::new(self.blocks[i].ncols() as f64, 0.0)
    }

    /// Structural equality as subspace decompositions.
    pub fn same_as(&self, other: &ProjectionResolution, tol: f64) -> bool {
        self.dim == other.dim
            && self.blocks.len() == other.blocks.len()
            && refines(self, other, tol)
            && refines(other, self, tol)
    }
}

/// The context generated by a commuting family of normal operators: the
/// resolution into maximal subspaces on which every operator is scalar.
/// The empty family yields the scalars.
pub fn generate_context(ops: &[ComplexMatrix], tol: f64) -> Result<ProjectionResolution> {
    if ops.is_empty() {
        return Err(Error::DimensionMismatch(0, 0));
    }
    generate_context_dim(ops[0].dim(), ops, tol)
}

pub fn generate_context_dim(
    dim: usize,
    ops: &[ComplexMatrix],
    tol: f64,
) -> Result<ProjectionResolution> {
    for (i, op) in ops.iter().enumerate() {
        if op.dim() != dim {
            return Err(Error::DimensionMismatch(dim, op.dim()));
        }
        if !matrix::is_normal(op, matrix::DEFAULT_TOL.max(tol)) {
            return Err(Error::NotNormal { residual: 0.0 });
        }
        for (j, other) in ops.iter().enumerate().skip(i + 1) {
            let c = matrix::commutator(op, other)?;
            if c.fro_norm() > tol * matrix::commutation_scale(op, other) {
                return Err(Error::NotCommuting(i, j));
            }
        }
    }
    let refs: Vec<&ComplexMatrix> = ops.iter().collect();
    let blocks = matrix::joint_eigenblocks(&refs, dim);
    Ok(ProjectionResolution::from_blocks(dim, blocks))
}

/// Membership test: `a` lies in the algebra iff it is block-diagonal with a
/// scalar compression on every block.
pub fn contains(c: &ProjectionResolution, a: &ComplexMatrix, tol: f64) -> bool {
    if c.dim() != a.dim() {
        return false;
    }
    let scale = 1.0f64.max(a.fro_norm());
    let mut sum = DMatrix::<C64>::zeros(c.dim(), c.dim());
    for i in 0..c.num_blocks() {
        let p = c.projection(i);
        sum += &p * a.inner() * &p;
        let comp = c.block(i).adjoint() * a.inner() * c.block(i);
        let d = comp.nrows();
        let lam = comp.trace() / C64::new(d as f64, 0.0);
        let dev = (&comp - DMatrix::<C64>::identity(d, d) * lam).norm();
        if dev > tol * scale {
            return false;
        }
    }
    (a.inner() - sum).norm() <= tol * scale
}

/// `true` iff every block of `fine` sits inside a single block of `coarse`.
pub fn refines(fine: &ProjectionResolution, coarse: &ProjectionResolution, tol: f64) -> bool {
    fine.dim() == coarse.dim()
        && (0..fine.num_blocks()).all(|i| containing_block(fine, i, coarse, tol).is_some())
}

fn containing_block(
    fine: &ProjectionResolution,
    i: usize,
    coarse: &ProjectionResolution,
    tol: f64,
) -> Option<usize> {
    let b = fine.block(i);
    'outer: for j in 0..coarse.num_blocks() {
        let q = coarse.projection(j);
        for col in 0..b.ncols() {
            let v = b.column(col);
            if (&v - &q * &v).norm() > tol {
                continue 'outer;
            }
        }
        return Some(j);
    }
    None
}

/// Greatest lower bound in refinement order: the resolution of the
/// intersection algebra. Blocks are the connected components of the
/// block-overlap graph between the two resolutions.
pub fn meet(
    c1: &ProjectionResolution,
    c2: &ProjectionResolution,
    tol: f64,
) -> ProjectionResolution {
    assert_eq!(c1.dim(), c2.dim());
    let (k1, k2) = (c1.num_blocks(), c2.num_blocks());
    let mut parent: Vec<usize> = (0..k1 + k2).collect();
    fn find(p: &mut Vec<usize>, i: usize) -> usize {
        if p[i] != i {
            let r = find(p, p[i]);
            p[i] = r;
        }
        p[i]
    }
    for i in 0..k1 {
        let p = c1.projection(i);
        for j in 0..k2 {
            let overlap = (&p * c2.projection(j)).norm();
            if overlap > tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, k1 + j));
                parent[a] = b;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..k1 {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let blocks = groups
        .values()
        .map(|members| {
            let total: usize = members.iter().map(|&i| c1.block(i).ncols()).sum();
            let mut merged = DMatrix::<C64>::zeros(c1.dim(), total);
            let mut col = 0;
            for &i in members {
                let b = c1.block(i);
                merged.columns_mut(col, b.ncols()).copy_from(b);
                col += b.ncols();
            }
            merged
        })
        .collect();
    ProjectionResolution::from_blocks(c1.dim(), blocks)
}

/// Least upper bound, when it exists: the resolution with blocks V_i ∩ W_j.
/// Fails with `NotCommuting` when some pair of block projections does not
/// commute (the generated algebra would not be commutative).
pub fn join(
    c1: &ProjectionResolution,
    c2: &ProjectionResolution,
    tol: f64,
) -> Result<ProjectionResolution> {
    assert_eq!(c1.dim(), c2.dim());
    let projs1: Vec<_> = (0..c1.num_blocks()).map(|i| c1.projection(i)).collect();
    let projs2: Vec<_> = (0..c2.num_blocks()).map(|j| c2.projection(j)).collect();
    for (i, p) in projs1.iter().enumerate() {
        for (j, q) in projs2.iter().enumerate() {
            if (p * q - q * p).norm() > tol * 1.0f64.max(p.norm() * q.norm()) {
                return Err(Error::NotCommuting(i, j));
            }
        }
    }
    let mut blocks = Vec::new();
    for p in &projs1 {
        for q in &projs2 {
            let m = p * q;
            let svd = m.clone().svd(true, false);
            let smax = svd.singular_values.max();
            if smax <= tol {
                continue;
            }
            let cutoff = 0.5 * smax.max(1.0); // commuting projections: sv near 0 or 1
            let cols: Vec<usize> = (0..svd.singular_values.len())
                .filter(|&k| svd.singular_values[k] > cutoff)
                .collect();
            if cols.is_empty() {
                continue;
            }
            let u = svd.u.as_ref().unwrap().select_columns(&cols);
            blocks.push(u);
        }
    }
    Ok(ProjectionResolution::from_blocks(c1.dim(), blocks))
}

/// Canonical restriction map on Gelfand spectra along `coarse ⊆ fine`.
pub fn spectrum_map(
    fine: &ProjectionResolution,
    coarse: &ProjectionResolution,
    tol: f64,
) -> Result<SpectrumMap> {
    let mut fiber = Vec::with_capacity(fine.num_blocks());
    for i in 0..fine.num_blocks() {
        match containing_block(fine, i, coarse, tol) {
            Some(j) => fiber.push(j),
            None => return Err(Error::NotRefinement),
        }
    }
    Ok(SpectrumMap { source: fine.id(), target: coarse.id(), fiber })
}
