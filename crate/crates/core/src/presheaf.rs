//! Integer presheaves over the context poset, their Čech and derived-limit
//! cochain complexes, and cohomology groups via Smith normal form.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::intmat::{smith_normal_form, IntMat};
use crate::matrix::{C64, ComplexMatrix};
use crate::site::{ContextPoset, Cover};

/// Finitely generated abelian group: free rank plus invariant factors
/// d_1 | d_2 | ... (each > 1).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FinAbGroup {
    pub free_rank: usize,
    pub torsion: Vec<BigInt>,
}

impl FinAbGroup {
    pub fn free(rank: usize) -> Self {
        FinAbGroup { free_rank: rank, torsion: Vec::new() }
    }

    pub fn trivial() -> Self {
        Self::free(0)
    }

    pub fn new(free_rank: usize, torsion: Vec<BigInt>) -> Self {
        let torsion: Vec<BigInt> = torsion.into_iter().filter(|d| d.abs() > BigInt::one()).collect();
        for w in torsion.windows(2) {
            assert!((&w[1] % &w[0]).is_zero(), "invariant factors must divide");
        }
        FinAbGroup { free_rank, torsion }
    }

    pub fn is_trivial(&self) -> bool {
        self.free_rank == 0 && self.torsion.is_empty()
    }
}

impl std::fmt::Display for FinAbGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_trivial() {
            return write!(f, "0");
        }
        let mut parts = Vec::new();
        match self.free_rank {
            0 => {}
            1 => parts.push("ℤ".to_string()),
            r => parts.push(format!("ℤ^{r}")),
        }
        for d in &self.torsion {
            parts.push(format!("ℤ/{d}"));
        }
        write!(f, "{}", parts.join(" ⊕ "))
    }
}

/// A presheaf of free abelian groups over a context poset: a rank per
/// context and an integer restriction matrix along every strict inclusion.
#[derive(Clone, Debug)]
pub struct IntPresheaf {
    pub ranks: Vec<usize>,
    /// `(small, large)` with `small ⊂ large`: matrix of shape
    /// `ranks[small] x ranks[large]`.
    pub restrictions: BTreeMap<(usize, usize), IntMat>,
}

impl IntPresheaf {
    pub fn restriction(&self, small: usize, large: usize) -> IntMat {
        if small == large {
            return IntMat::identity(self.ranks[small]);
        }
        self.restrictions.get(&(small, large)).expect("restriction along inclusion").clone()
    }

    /// Covariant companion of the restriction (its transpose).
    pub fn refinement(&self, small: usize, large: usize) -> IntMat {
        self.restriction(small, large).transpose()
    }
}

/// The K0 presheaf: rank = block count, restriction along `C_small ⊆ C_big`
/// is the fiber-sum matrix of the spectrum map (0/1 entries, one 1 per
/// column).
pub fn k0_presheaf(site: &ContextPoset) -> IntPresheaf {
    let ranks: Vec<usize> = site.contexts.iter().map(|c| c.num_blocks()).collect();
    let mut restrictions = BTreeMap::new();
    for small in 0..site.len() {
        for large in 0..site.len() {
            if small != large && site.leq(small, large) {
                let f = crate::context::spectrum_map(
                    &site.contexts[large],
                    &site.contexts[small],
                    site.tol,
                )
                .expect("inclusion implies refinement");
                let m = IntMat::from_fn(ranks[small], ranks[large], |j, i| {
                    (f.fiber[i] == j) as i64
                });
                restrictions.insert((small, large), m);
            }
        }
    }
    IntPresheaf { ranks, restrictions }
}

/// The constant presheaf Z^rank with identity restrictions.
pub fn constant_presheaf(site: &ContextPoset, rank: usize) -> IntPresheaf {
    let mut restrictions = BTreeMap::new();
    for small in 0..site.len() {
        for large in 0..site.len() {
            if small != large && site.leq(small, large) {
                restrictions.insert((small, large), IntMat::identity(rank));
            }
        }
    }
    IntPresheaf { ranks: vec![rank; site.len()], restrictions }
}

/// The limit of the presheaf over the poset: kernel of the difference map
/// over the Hasse relations, with an explicit integer basis.
pub fn global_sections(site: &ContextPoset, p: &IntPresheaf) -> (FinAbGroup, Vec<Vec<BigInt>>) {
    let offsets: Vec<usize> = p
        .ranks
        .iter()
        .scan(0usize, |acc, &r| {
            let o = *acc;
            *acc += r;
            Some(o)
        })
        .collect();
    let total: usize = p.ranks.iter().sum();
    let edges = site.hasse_edges();
    let rows: usize = edges.iter().map(|&(a, _)| p.ranks[a]).sum();
    let mut m = IntMat::zeros(rows, total);
    let mut row = 0;
    for &(a, b) in &edges {
        let r = p.restriction(a, b);
        for i in 0..p.ranks[a] {
            m[(row + i, offsets[a] + i)] = BigInt::one();
            for j in 0..p.ranks[b] {
                m[(row + i, offsets[b] + j)] = -r[(i, j)].clone();
            }
        }
        row += p.ranks[a];
    }
    let basis = crate::intmat::kernel_basis(&m);
    (FinAbGroup::free(basis.len()), basis)
}

/// One graded piece of a cochain complex's cohomology.
#[derive(Clone, Debug)]
pub struct CohomologyGroup {
    pub group: FinAbGroup,
    /// Cocycle representatives of the nonzero classes (free generators
    /// first, then one per torsion factor), reduced modulo the image
    /// lattice.
    pub representatives: Vec<Vec<BigInt>>,
}

/// Integer cochain complex; `differentials[p]` has shape
/// `ranks[p+1] x ranks[p]`, and `d . d = 0` exactly.
#[derive(Clone, Debug)]
pub struct CochainComplex {
    pub ranks: Vec<usize>,
    pub differentials: Vec<IntMat>,
    /// Human-readable basis labels per degree (cover tuples or chains).
    pub labels: Vec<Vec<String>>,
}

impl CochainComplex {
    pub fn differential(&self, p: usize) -> IntMat {
        if p < self.differentials.len() {
            self.differentials[p].clone()
        } else {
            let rows = self.ranks.get(p + 1).copied().unwrap_or(0);
            let cols = self.ranks.get(p).copied().unwrap_or(0);
            IntMat::zeros(rows, cols)
        }
    }

    pub fn max_degree(&self) -> usize {
        self.ranks.len().saturating_sub(1)
    }

    fn assert_d_squared_zero(&self) {
        for p in 0..self.differentials.len().saturating_sub(1) {
            assert!(
                self.differentials[p + 1].mul(&self.differentials[p]).is_zero(),
                "d^2 != 0 in degree {p}"
            );
        }
    }
}

/// Čech complex of an integer presheaf over a cover: degree p is the sum of
/// the presheaf at the meets of (p+1)-member subfamilies, with the
/// alternating-sum differential.
pub fn cech_complex(site: &ContextPoset, p: &IntPresheaf, cover: &Cover) -> Result<CochainComplex> {
    let mut members = cover.members.clone();
    members.sort();
    members.dedup();
    let m = members.len();

    // overlaps per tuple, degree by degree
    let mut tuples_by_deg: Vec<Vec<Vec<usize>>> = Vec::new();
    for deg in 0..m {
        let mut tuples = Vec::new();
        combinations(m, deg + 1, &mut |combo| {
            tuples.push(combo.iter().map(|&i| members[i]).collect::<Vec<usize>>());
        });
        tuples_by_deg.push(tuples);
    }
    let overlap_of = |tuple: &[usize]| -> Result<usize> {
        let mut acc = tuple[0];
        for &t in &tuple[1..] {
            acc = site
                .try_meet_of(acc, t)
                .ok_or_else(|| Error::MissingOverlap(tuple.to_vec()))?;
        }
        Ok(acc)
    };
    let mut ranks = Vec::new();
    let mut labels = Vec::new();
    let mut offsets_by_deg: Vec<BTreeMap<Vec<usize>, (usize, usize)>> = Vec::new();
    for tuples in &tuples_by_deg {
        let mut offsets = BTreeMap::new();
        let mut total = 0;
        let mut degree_labels = Vec::new();
        for t in tuples {
            let ov = overlap_of(t)?;
            offsets.insert(t.clone(), (total, ov));
            for i in 0..p.ranks[ov] {
                degree_labels.push(format!("{t:?}:{i}"));
            }
            total += p.ranks[ov];
        }
        ranks.push(total);
        labels.push(degree_labels);
        offsets_by_deg.push(offsets);
    }

    let mut differentials = Vec::new();
    for deg in 0..m.saturating_sub(1) {
        let mut d = IntMat::zeros(ranks[deg + 1], ranks[deg]);
        for (tuple, &(row_off, row_ov)) in &offsets_by_deg[deg + 1] {
            for omit in 0..tuple.len() {
                let face: Vec<usize> =
                    tuple.iter().enumerate().filter(|&(i, _)| i != omit).map(|(_, &x)| x).collect();
                let &(col_off, col_ov) = &offsets_by_deg[deg][&face];
                let r = p.restriction(row_ov, col_ov);
                let sign = if omit % 2 == 0 { 1 } else { -1 };
                for i in 0..p.ranks[row_ov] {
                    for j in 0..p.ranks[col_ov] {
                        let add = &r[(i, j)] * BigInt::from(sign);
                        d[(row_off + i, col_off + j)] += add;
                    }
                }
            }
        }
        differentials.push(d);
    }
    let complex = CochainComplex { ranks, differentials, labels };
    complex.assert_d_squared_zero();
    Ok(complex)
}

fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    let mut combo: Vec<usize> = (0..k).collect();
    if k > n {
        return;
    }
    loop {
        f(&combo);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if combo[i] < n - (k - i) {
                combo[i] += 1;
                for j in i + 1..k {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Derived-limit complex over the poset: degree p is the sum of F(C_0) over
/// strictly increasing chains C_0 ⊂ ... ⊂ C_p, with the restriction on the
/// first face and alternating omissions elsewhere. H^0 recovers the limit.
pub fn poset_complex(site: &ContextPoset, p: &IntPresheaf) -> CochainComplex {
    let all_chains = site.chains(site.len());
    let height = all_chains.iter().map(|c| c.len()).max().unwrap_or(0);
    let mut ranks = Vec::new();
    let mut labels = Vec::new();
    let mut offsets_by_deg: Vec<BTreeMap<Vec<usize>, usize>> = Vec::new();
    for deg in 0..height {
        let mut offsets = BTreeMap::new();
        let mut total = 0;
        let mut degree_labels = Vec::new();
        for chain in all_chains.iter().filter(|c| c.len() == deg + 1) {
            offsets.insert(chain.clone(), total);
            for i in 0..p.ranks[chain[0]] {
                degree_labels.push(format!("{chain:?}:{i}"));
            }
            total += p.ranks[chain[0]];
        }
        ranks.push(total);
        labels.push(degree_labels);
        offsets_by_deg.push(offsets);
    }
    let mut differentials = Vec::new();
    for deg in 0..height.saturating_sub(1) {
        let mut d = IntMat::zeros(ranks[deg + 1], ranks[deg]);
        for (chain, &row_off) in &offsets_by_deg[deg + 1] {
            // face 0 applies the restriction from the second context down
            {
                let sub: Vec<usize> = chain[1..].to_vec();
                let col_off = offsets_by_deg[deg][&sub];
                let r = p.restriction(chain[0], chain[1]);
                for i in 0..p.ranks[chain[0]] {
                    for j in 0..p.ranks[chain[1]] {
                        d[(row_off + i, col_off + j)] += r[(i, j)].clone();
                    }
                }
            }
            for omit in 1..chain.len() {
                let sub: Vec<usize> =
                    chain.iter().enumerate().filter(|&(i, _)| i != omit).map(|(_, &x)| x).collect();
                let col_off = offsets_by_deg[deg][&sub];
                let sign = if omit % 2 == 0 { 1 } else { -1 };
                for i in 0..p.ranks[chain[0]] {
                    let add = BigInt::from(sign);
                    d[(row_off + i, col_off + i)] += add;
                }
            }
        }
        differentials.push(d);
    }
    let complex = CochainComplex { ranks, differentials, labels };
    complex.assert_d_squared_zero();
    complex
}

/// Cohomology of an integer cochain complex in every degree, with reduced
/// cocycle representatives for the nonzero classes.
pub fn cohomology(c: &CochainComplex) -> Vec<CohomologyGroup> {
    (0..=c.max_degree()).map(|n| cohomology_at(c, n)).collect()
}

fn cohomology_at(c: &CochainComplex, n: usize) -> CohomologyGroup {
    let d_n = c.differential(n);
    let d_prev = if n == 0 { IntMat::zeros(c.ranks[0], 0) } else { c.differential(n - 1) };
    let snf_n = smith_normal_form(&d_n);
    let dim = c.ranks[n];
    let k = dim - snf_n.rank;
    // kernel basis: trailing columns of V
    let kernel_cols: Vec<Vec<BigInt>> = (snf_n.rank..dim).map(|j| snf_n.v.column(j)).collect();
    // image of d_prev in kernel coordinates (exact: the kernel is saturated)
    let mut a = IntMat::zeros(k, d_prev.cols);
    for col in 0..d_prev.cols {
        let w = d_prev.column(col);
        let y = snf_n.v_inv.mul_vec(&w);
        for i in 0..snf_n.rank {
            assert!(y[i].is_zero(), "image of d_{} not inside ker d_{}", n.wrapping_sub(1), n);
        }
        for i in 0..k {
            a[(i, col)] = y[snf_n.rank + i].clone();
        }
    }
    let snf_a = smith_normal_form(&a);
    let free_rank = k - snf_a.rank;
    let torsion: Vec<BigInt> = snf_a
        .invariant_factors()
        .into_iter()
        .filter(|d| d.abs() > BigInt::one())
        .collect();
    // representatives: columns of U_a^{-1} pulled back through the kernel basis
    let snf_prev = smith_normal_form(&d_prev);
    let mut representatives = Vec::new();
    let mut push_rep = |coord_col: usize| {
        let mut w = vec![BigInt::zero(); dim];
        for i in 0..k {
            let coeff = snf_a.u_inv[(i, coord_col)].clone();
            if coeff.is_zero() {
                continue;
            }
            for (row, val) in kernel_cols[i].iter().enumerate() {
                w[row] += &coeff * val;
            }
        }
        representatives.push(reduce_mod_image(&w, &snf_prev));
    };
    for i in snf_a.rank..k {
        push_rep(i);
    }
    for i in 0..snf_a.rank {
        if snf_a.d[(i, i)].abs() > BigInt::one() {
            push_rep(i);
        }
    }
    CohomologyGroup { group: FinAbGroup::new(free_rank, torsion), representatives }
}

/// Reduce a vector modulo the column lattice of a matrix given its SNF:
/// in U-coordinates the lattice is spanned by d_i * e_i.
fn reduce_mod_image(w: &[BigInt], snf: &crate::intmat::Snf) -> Vec<BigInt> {
    let mut y = snf.u.mul_vec(w);
    for i in 0..snf.rank {
        let d = &snf.d[(i, i)];
        let q = crate::intmat::div_nearest(&y[i], d);
        y[i] -= q * d;
    }
    snf.u_inv.mul_vec(&y)
}

/// Report on the comparison map from global sections of the K0 presheaf to
/// K0 of the ambient matrix algebra (the integers, by rank).
#[derive(Clone, Debug)]
pub struct ComparisonReport {
    pub global_rank: usize,
    /// Bottom-context evaluation of each global-section basis vector.
    pub bottom_values: Vec<BigInt>,
    pub kernel: FinAbGroup,
    pub cokernel: FinAbGroup,
    pub surjective: bool,
}

/// Comparison map for the irreducible (full matrix algebra) case. Errors
/// with `ReducibleAmbient` when the generators have a commutant larger than
/// the scalars.
pub fn comparison_map(
    site: &ContextPoset,
    p: &IntPresheaf,
    generators: &[ComplexMatrix],
) -> Result<ComparisonReport> {
    let n = site.contexts[site.bottom].dim();
    let nullity = commutant_dimension(n, generators);
    if nullity > 1 {
        return Err(Error::ReducibleAmbient(nullity));
    }
    let (group, basis) = global_sections(site, p);
    let offset: usize = p.ranks[..site.bottom].iter().sum();
    debug_assert_eq!(p.ranks[site.bottom], 1);
    let bottom_values: Vec<BigInt> = basis.iter().map(|b| b[offset].clone()).collect();
    let gcd = bottom_values
        .iter()
        .fold(BigInt::zero(), |acc, v| num_integer_gcd(&acc, v));
    let (cokernel, surjective) = if gcd.is_zero() {
        (FinAbGroup::free(1), false)
    } else if gcd.abs() == BigInt::one() {
        (FinAbGroup::trivial(), true)
    } else {
        (FinAbGroup::new(0, vec![gcd.abs()]), false)
    };
    let image_rank = usize::from(!bottom_values.iter().all(|v| v.is_zero()));
    Ok(ComparisonReport {
        global_rank: group.free_rank,
        bottom_values,
        kernel: FinAbGroup::free(group.free_rank - image_rank),
        cokernel,
        surjective,
    })
}

fn num_integer_gcd(a: &BigInt, b: &BigInt) -> BigInt {
    let (mut a, mut b) = (a.abs(), b.abs());
    while !b.is_zero() {
        let r = &a % &b;
        a = b;
        b = r;
    }
    a
}

/// Dimension of the commutant of the *-family generated by the operators,
/// via the nullity of X ↦ [g, X] stacked over generators and adjoints.
pub fn commutant_dimension(n: usize, generators: &[ComplexMatrix]) -> usize {
    if generators.is_empty() {
        return n * n;
    }
    let eye = DMatrix::<C64>::identity(n, n);
    let mut blocks: Vec<DMatrix<C64>> = Vec::new();
    for g in generators {
        for m in [g.inner().clone(), g.inner().adjoint()] {
            // vec(gX - Xg) = (I ⊗ g - gᵀ ⊗ I) vec(X), column-major
            let op = eye.kronecker(&m) - m.transpose().kronecker(&eye);
            blocks.push(op);
        }
    }
    let rows: usize = blocks.len() * n * n;
    let mut stacked = DMatrix::<C64>::zeros(rows, n * n);
    for (i, b) in blocks.iter().enumerate() {
        stacked.rows_mut(i * n * n, n * n).copy_from(b);
    }
    let svd = stacked.svd(false, false);
    let smax = svd.singular_values.max();
    let cutoff = 1e-8 * 1.0f64.max(smax);
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    n * n - rank
}
