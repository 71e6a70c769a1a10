//! The finite context poset generated by a family of normal operators, its
//! covering families, the set-valued spectral presheaf, and the descent
//! (equalizer) check.

use std::collections::BTreeMap;

use itertools::Itertools;

use crate::context::{self, ProjectionResolution};
use crate::error::{Error, Result};
use crate::matrix::{self, ComplexMatrix};

#[derive(Clone, Copy, Debug)]
pub struct SiteOptions {
    /// Absolute tolerance for subspace tests, relative for commutators.
    pub tol: f64,
    /// Add every coarsening of each context with at most 6 blocks.
    pub full_subcontexts: bool,
}

impl Default for SiteOptions {
    fn default() -> Self {
        SiteOptions { tol: 1e-8, full_subcontexts: false }
    }
}

/// Finite poset of contexts under subalgebra inclusion, closed under meets,
/// with the scalars as bottom element.
#[derive(Clone, Debug)]
pub struct ContextPoset {
    pub contexts: Vec<ProjectionResolution>,
    /// `leq[a][b]` iff context `a` is a subalgebra of context `b`
    /// (equivalently, `b`'s resolution refines `a`'s).
    leq: Vec<Vec<bool>>,
    pub bottom: usize,
    pub tol: f64,
}

/// A covering family: subalgebras of the target that jointly generate it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cover {
    pub target: usize,
    pub members: Vec<usize>,
}

/// A compatible choice of one spectrum point per context.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SectionFamily {
    pub assignments: BTreeMap<usize, usize>,
}

pub fn build_site(
    dim: usize,
    generators: &[ComplexMatrix],
    options: SiteOptions,
) -> Result<ContextPoset> {
    let tol = options.tol;
    for g in generators {
        if g.dim() != dim {
            return Err(Error::DimensionMismatch(dim, g.dim()));
        }
        if !matrix::is_normal(g, matrix::DEFAULT_TOL.max(tol)) {
            return Err(Error::NotNormal { residual: 0.0 });
        }
    }
    assert!(generators.len() <= 12, "generator subsets explode past 12");
    let g = generators.len();
    let commutes: Vec<Vec<bool>> = (0..g)
        .map(|i| {
            (0..g)
                .map(|j| {
                    let c = matrix::commutator(&generators[i], &generators[j]).unwrap();
                    c.fro_norm() <= tol * matrix::commutation_scale(&generators[i], &generators[j])
                })
                .collect()
        })
        .collect();

    let mut contexts: Vec<ProjectionResolution> = vec![ProjectionResolution::trivial(dim)];
    let push_unique = |contexts: &mut Vec<ProjectionResolution>, c: ProjectionResolution| {
        if !contexts.iter().any(|x| x.same_as(&c, tol)) {
            contexts.push(c);
        }
    };
    for subset in 1u32..(1 << g) {
        let idx: Vec<usize> = (0..g).filter(|i| subset & (1 << i) != 0).collect();
        if !idx.iter().tuple_combinations().all(|(&i, &j)| commutes[i][j]) {
            continue;
        }
        let ops: Vec<ComplexMatrix> = idx.iter().map(|&i| generators[i].clone()).collect();
        let ctx = context::generate_context_dim(dim, &ops, tol)?;
        push_unique(&mut contexts, ctx);
    }

    if options.full_subcontexts {
        let base: Vec<ProjectionResolution> = contexts.clone();
        for c in &base {
            if c.num_blocks() > 6 {
                continue;
            }
            for part in set_partitions(c.num_blocks()) {
                let coarse = coarsen(c, &part);
                push_unique(&mut contexts, coarse);
            }
        }
    }

    // close under pairwise meets
    loop {
        let mut added = false;
        let snapshot = contexts.clone();
        for (a, b) in snapshot.iter().tuple_combinations() {
            let m = context::meet(a, b, tol);
            if !contexts.iter().any(|x| x.same_as(&m, tol)) {
                contexts.push(m);
                added = true;
            }
        }
        if !added {
            break;
        }
    }

    // deterministic indexing
    contexts.sort_by_key(|c| (c.num_blocks(), c.id()));
    let n = contexts.len();
    let leq: Vec<Vec<bool>> = (0..n)
        .map(|a| (0..n).map(|b| context::refines(&contexts[b], &contexts[a], tol)).collect())
        .collect();
    let bottom = contexts.iter().position(|c| c.is_trivial()).expect("trivial context present");
    Ok(ContextPoset { contexts, leq, bottom, tol })
}

/// Merge blocks of a resolution according to a partition of its block set.
fn coarsen(c: &ProjectionResolution, partition: &[Vec<usize>]) -> ProjectionResolution {
    let blocks = partition
        .iter()
        .map(|group| {
            let total: usize = group.iter().map(|&i| c.block(i).ncols()).sum();
            let mut merged = nalgebra::DMatrix::zeros(c.dim(), total);
            let mut col = 0;
            for &i in group {
                let b = c.block(i);
                merged.columns_mut(col, b.ncols()).copy_from(b);
                col += b.ncols();
            }
            merged
        })
        .collect();
    ProjectionResolution::from_blocks(c.dim(), blocks)
}

/// All partitions of {0..n-1} via restricted-growth strings.
fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut rgs = vec![0usize; n];
    loop {
        let k = rgs.iter().copied().max().map_or(0, |m| m + 1);
        let mut groups = vec![Vec::new(); k];
        for (i, &g) in rgs.iter().enumerate() {
            groups[g].push(i);
        }
        out.push(groups);
        // next restricted-growth string
        let mut i = n;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if i == 0 {
                return out;
            }
            let cap = rgs[..i].iter().copied().max().unwrap() + 1;
            if rgs[i] < cap {
                rgs[i] += 1;
                for v in rgs[i + 1..].iter_mut() {
                    *v = 0;
                }
                break;
            }
        }
    }
}

impl ContextPoset {
    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    /// Subalgebra inclusion `a ⊆ b`.
    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.leq[a][b]
    }

    pub fn lt(&self, a: usize, b: usize) -> bool {
        a != b && self.leq[a][b]
    }

    pub fn find(&self, c: &ProjectionResolution) -> Option<usize> {
        self.contexts.iter().position(|x| x.same_as(c, self.tol))
    }

    /// Index of the meet (intersection) of two contexts; present by closure.
    pub fn meet_of(&self, a: usize, b: usize) -> usize {
        let m = context::meet(&self.contexts[a], &self.contexts[b], self.tol);
        self.find(&m).expect("site is meet-closed")
    }

    /// Like `meet_of`, but returns `None` if the meet is not in the site.
    pub fn try_meet_of(&self, a: usize, b: usize) -> Option<usize> {
        let m = context::meet(&self.contexts[a], &self.contexts[b], self.tol);
        self.find(&m)
    }

    pub fn meet_of_many(&self, ids: &[usize]) -> usize {
        let mut acc = ids[0];
        for &i in &ids[1..] {
            acc = self.meet_of(acc, i);
        }
        acc
    }

    pub fn contexts_containing(&self, op: &ComplexMatrix) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| context::contains(&self.contexts[i], op, self.tol))
            .collect()
    }

    /// Covering relations of the inclusion order (edges of the Hasse diagram).
    pub fn hasse_edges(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        let mut edges = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if self.lt(a, b) && !(0..n).any(|c| self.lt(a, c) && self.lt(c, b)) {
                    edges.push((a, b));
                }
            }
        }
        edges
    }

    /// Strictly increasing chains (in inclusion order) of length `<= max_len`
    /// contexts, in lexicographic order.
    pub fn chains(&self, max_len: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut stack: Vec<Vec<usize>> = (0..self.len()).map(|i| vec![i]).collect();
        stack.reverse();
        while let Some(chain) = stack.pop() {
            if chain.len() <= max_len {
                out.push(chain.clone());
            }
            if chain.len() >= max_len {
                continue;
            }
            let last = *chain.last().unwrap();
            for next in (0..self.len()).rev() {
                if self.lt(last, next) {
                    let mut ext = chain.clone();
                    ext.push(next);
                    stack.push(ext);
                }
            }
        }
        out.sort();
        out
    }

    /// All inclusion-minimal families of proper subalgebras whose join is the
    /// target, plus the identity cover.
    pub fn covers_of(&self, target: usize) -> Vec<Cover> {
        let proper: Vec<usize> = (0..self.len()).filter(|&c| self.lt(c, target)).collect();
        let mut minimal: Vec<Vec<usize>> = Vec::new();
        assert!(proper.len() <= 16, "cover enumeration explodes past 16 subcontexts");
        let mut subsets: Vec<Vec<usize>> = (1u32..(1 << proper.len()))
            .map(|mask| {
                (0..proper.len()).filter(|i| mask & (1 << i) != 0).map(|i| proper[i]).collect()
            })
            .collect();
        subsets.sort_by_key(|s: &Vec<usize>| s.len());
        for subset in subsets {
            if minimal.iter().any(|m| m.iter().all(|x| subset.contains(x))) {
                continue; // a kept cover is contained in it, not minimal
            }
            let mut acc = ProjectionResolution::trivial(self.contexts[target].dim());
            for &m in &subset {
                acc = context::join(&acc, &self.contexts[m], self.tol)
                    .expect("subalgebras of a common context commute");
            }
            if acc.same_as(&self.contexts[target], self.tol) {
                minimal.push(subset);
            }
        }
        let mut covers = vec![Cover { target, members: vec![target] }];
        covers.extend(minimal.into_iter().map(|members| Cover { target, members }));
        covers
    }
}

/// A presheaf of finite sets over the site, stored by section index.
/// `maps[(small, large)][i]` is the index in `sections[small]` of the
/// restriction of section `i` of the larger context. Pairs may be absent
/// when no restriction map exists (partial presheaves such as the marked
/// diagonalization presheaf).
#[derive(Clone, Debug)]
pub struct SetPresheaf<S> {
    pub sections: Vec<Vec<S>>,
    pub maps: BTreeMap<(usize, usize), Vec<usize>>,
}

impl<S> SetPresheaf<S> {
    pub fn restrict(&self, small: usize, large: usize, section: usize) -> Option<usize> {
        if small == large {
            return Some(section);
        }
        self.maps.get(&(small, large)).map(|f| f[section])
    }
}

/// The spectral presheaf: each context's block-label set with the canonical
/// restriction maps along every inclusion.
pub fn spectral_presheaf(site: &ContextPoset) -> SetPresheaf<usize> {
    let sections: Vec<Vec<usize>> =
        site.contexts.iter().map(|c| (0..c.num_blocks()).collect()).collect();
    let mut maps = BTreeMap::new();
    for small in 0..site.len() {
        for large in 0..site.len() {
            if small != large && site.leq(small, large) {
                let f = context::spectrum_map(
                    &site.contexts[large],
                    &site.contexts[small],
                    site.tol,
                )
                .expect("inclusion implies refinement");
                maps.insert((small, large), f.fiber);
            }
        }
    }
    SetPresheaf { sections, maps }
}

/// Outcome of the equalizer check for one cover.
#[derive(Clone, Debug)]
pub struct DescentReport {
    /// Families over the cover members agreeing on all pairwise meets,
    /// as tuples of section indices in member order.
    pub compatible: Vec<Vec<usize>>,
    /// Images of the target's sections under restriction to the members.
    pub image: Vec<Vec<usize>>,
    pub injective: bool,
    pub surjective: bool,
    /// Sheaf condition: the canonical map is a bijection onto the
    /// compatible families.
    pub holds: bool,
}

pub fn check_descent<S>(
    site: &ContextPoset,
    cover: &Cover,
    presheaf: &SetPresheaf<S>,
) -> DescentReport {
    let members = &cover.members;
    let mut compatible: Vec<Vec<usize>> = Vec::new();
    let ranges: Vec<Vec<usize>> =
        members.iter().map(|&m| (0..presheaf.sections[m].len()).collect()).collect();
    for family in ranges.iter().multi_cartesian_product() {
        let family: Vec<usize> = family.into_iter().copied().collect();
        let mut ok = true;
        'pairs: for (a, b) in (0..members.len()).tuple_combinations() {
            let g = site.meet_of(members[a], members[b]);
            let ra = presheaf.restrict(g, members[a], family[a]);
            let rb = presheaf.restrict(g, members[b], family[b]);
            match (ra, rb) {
                (Some(x), Some(y)) if x == y => {}
                _ => {
                    ok = false;
                    break 'pairs;
                }
            }
        }
        if ok {
            compatible.push(family);
        }
    }
    if members.is_empty() && !presheaf.sections[cover.target].is_empty() {
        compatible.clear();
    }
    let image: Vec<Vec<usize>> = (0..presheaf.sections[cover.target].len())
        .filter_map(|s| {
            members
                .iter()
                .map(|&m| presheaf.restrict(m, cover.target, s))
                .collect::<Option<Vec<usize>>>()
        })
        .collect();
    let injective = {
        let mut seen = image.clone();
        seen.sort();
        seen.dedup();
        seen.len() == image.len() && image.len() == presheaf.sections[cover.target].len()
    };
    let mut image_sorted = image.clone();
    image_sorted.sort();
    let mut compat_sorted = compatible.clone();
    compat_sorted.sort();
    let surjective = compat_sorted.iter().all(|f| image_sorted.binary_search(f).is_ok());
    DescentReport { holds: injective && surjective, compatible, image, injective, surjective }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::C64;
    use crate::testutil::random_commuting_pair;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn pauli_site() -> ContextPoset {
        let z = ComplexMatrix::from_real_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let x = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        build_site(2, &[z, x], SiteOptions::default()).unwrap()
    }

    fn diag(vals: &[f64]) -> ComplexMatrix {
        ComplexMatrix::diagonal(&vals.iter().map(|&v| C64::new(v, 0.0)).collect::<Vec<_>>())
    }

    #[test]
    fn pauli_site_shape() {
        let site = pauli_site();
        assert_eq!(site.len(), 3);
        assert_eq!(site.contexts[site.bottom].num_blocks(), 1);
        let masas: Vec<usize> =
            (0..3).filter(|&i| site.contexts[i].is_masa()).collect();
        assert_eq!(masas.len(), 2);
        // two incomparable MASAs above the scalars
        assert!(!site.leq(masas[0], masas[1]) && !site.leq(masas[1], masas[0]));
        assert!(site.lt(site.bottom, masas[0]) && site.lt(site.bottom, masas[1]));
        assert_eq!(site.hasse_edges().len(), 2);
    }

    #[test]
    fn single_generator_chain() {
        let t = diag(&[1.0, 2.0]);
        let site = build_site(2, &[t], SiteOptions::default()).unwrap();
        assert_eq!(site.len(), 2);
        assert!(site.lt(site.bottom, 1 - site.bottom));
    }

    #[test]
    fn site_is_meet_closed() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let (t, s) = random_commuting_pair(4, &mut rng);
            let ts = ComplexMatrix::from_dmatrix(t.inner() * s.inner()).unwrap();
            let site = build_site(4, &[t, s, ts], SiteOptions::default()).unwrap();
            for a in 0..site.len() {
                for b in 0..site.len() {
                    let m = context::meet(&site.contexts[a], &site.contexts[b], site.tol);
                    assert!(site.find(&m).is_some(), "meet missing from site");
                }
            }
        }
    }

    #[test]
    fn covers_pauli() {
        let site = pauli_site();
        let masas: Vec<usize> = (0..3).filter(|&i| site.contexts[i].is_masa()).collect();
        // a MASA admits only its identity cover: the scalars generate nothing
        let covers = site.covers_of(masas[0]);
        assert_eq!(covers, vec![Cover { target: masas[0], members: vec![masas[0]] }]);
        // bottom: identity cover only (no proper subalgebras in the site)
        let covers = site.covers_of(site.bottom);
        assert_eq!(covers.len(), 1);
    }

    #[test]
    fn covers_commuting_pair() {
        let t = diag(&[1.0, 1.0, 2.0, 2.0]);
        let s = diag(&[3.0, 4.0, 3.0, 4.0]);
        let site = build_site(4, &[t.clone(), s.clone()], SiteOptions::default()).unwrap();
        let joint = site
            .find(&context::generate_context(&[t.clone(), s.clone()], site.tol).unwrap())
            .unwrap();
        let ct = site.find(&context::generate_context(&[t], site.tol).unwrap()).unwrap();
        let cs = site.find(&context::generate_context(&[s], site.tol).unwrap()).unwrap();
        let covers = site.covers_of(joint);
        assert!(covers.iter().any(|c| {
            let mut m = c.members.clone();
            m.sort();
            let mut exp = vec![ct, cs];
            exp.sort();
            m == exp
        }));
    }

    #[test]
    fn spectral_presheaf_pauli() {
        let site = pauli_site();
        let p = spectral_presheaf(&site);
        for i in 0..3 {
            let expected = if i == site.bottom { 1 } else { 2 };
            assert_eq!(p.sections[i].len(), expected);
        }
        for ((small, _), f) in &p.maps {
            assert_eq!(*small, site.bottom);
            assert!(f.iter().all(|&x| x == 0));
        }
    }

    #[test]
    fn spectral_presheaf_functorial() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let (t, s) = random_commuting_pair(4, &mut rng);
        let site = build_site(4, &[t, s], SiteOptions::default()).unwrap();
        let p = spectral_presheaf(&site);
        for a in 0..site.len() {
            for b in 0..site.len() {
                for c in 0..site.len() {
                    if site.lt(a, b) && site.lt(b, c) {
                        for sec in 0..p.sections[c].len() {
                            let direct = p.restrict(a, c, sec).unwrap();
                            let via = p.restrict(a, b, p.restrict(b, c, sec).unwrap()).unwrap();
                            assert_eq!(direct, via);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn descent_identity_cover_holds() {
        let site = pauli_site();
        let p = spectral_presheaf(&site);
        for target in 0..site.len() {
            let cover = Cover { target, members: vec![target] };
            assert!(check_descent(&site, &cover, &p).holds);
        }
    }

    #[test]
    fn descent_distinct_eigenvalues_holds() {
        let t = diag(&[1.0, 1.0, 2.0, 2.0]);
        let s = diag(&[3.0, 4.0, 3.0, 4.0]);
        let site = build_site(4, &[t.clone(), s.clone()], SiteOptions::default()).unwrap();
        let joint =
            site.find(&context::generate_context(&[t.clone(), s.clone()], site.tol).unwrap()).unwrap();
        let ct = site.find(&context::generate_context(&[t], site.tol).unwrap()).unwrap();
        let cs = site.find(&context::generate_context(&[s], site.tol).unwrap()).unwrap();
        let p = spectral_presheaf(&site);
        let report =
            check_descent(&site, &Cover { target: joint, members: vec![ct, cs] }, &p);
        assert!(report.holds);
        assert_eq!(report.compatible.len(), site.contexts[joint].num_blocks());
    }

    #[test]
    fn descent_fails_on_degenerate_pairing() {
        // T has a repeated eigenvalue that S splits asymmetrically: the
        // spectral presheaf has more compatible families than joint blocks.
        let t = diag(&[1.0, 1.0, 2.0]);
        let s = diag(&[3.0, 4.0, 4.0]);
        let site = build_site(3, &[t.clone(), s.clone()], SiteOptions::default()).unwrap();
        let joint =
            site.find(&context::generate_context(&[t.clone(), s.clone()], site.tol).unwrap()).unwrap();
        let ct = site.find(&context::generate_context(&[t], site.tol).unwrap()).unwrap();
        let cs = site.find(&context::generate_context(&[s], site.tol).unwrap()).unwrap();
        assert_eq!(site.contexts[joint].num_blocks(), 3);
        let p = spectral_presheaf(&site);
        let report =
            check_descent(&site, &Cover { target: joint, members: vec![ct, cs] }, &p);
        assert_eq!(report.compatible.len(), 4);
        assert_eq!(report.image.len(), 3);
        assert!(!report.holds);
        assert!(report.injective && !report.surjective);
    }

    #[test]
    fn full_subcontexts_adds_coarsenings() {
        let t = diag(&[1.0, 2.0, 3.0]);
        let site = build_site(
            3,
            &[t],
            SiteOptions { full_subcontexts: true, ..Default::default() },
        )
        .unwrap();
        // partitions of a 3-block MASA: 1 + 3 + 1 distinct coarsenings
        assert_eq!(site.len(), 5);
    }

    #[test]
    fn set_partitions_counts() {
        assert_eq!(set_partitions(1).len(), 1);
        assert_eq!(set_partitions(3).len(), 5);
        assert_eq!(set_partitions(4).len(), 15);
    }
}
