//! Marked-diagonalization presheaf for a pair of normal operators, the
//! joint-diagonalizability verdict, the Sₙ-valued monodromy cocycle with its
//! coboundary test, and π₀ of the category of elements of a set presheaf.

use std::collections::BTreeMap;

use itertools::Itertools;

use crate::context::{contains, ProjectionResolution};
use crate::error::{Error, Result};
use crate::matrix::{
    cmp_complex, commutation_scale, commutator, is_normal, joint_diagonalize, C64, ComplexMatrix,
    JointDiagonalization,
};
use crate::site::{ContextPoset, Cover, SetPresheaf};

const LABEL_ROUND: f64 = 1e-6;

/// A joint diagonalization of a commuting pair inside one context: an
/// ordering of the context's blocks together with the scalar the two
/// operators take on each ordered block.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkedDiagonalization {
    pub context: usize,
    /// Permutation of the context's block indices.
    pub order: Vec<usize>,
    /// `(λ_i, μ_i)` eigenvalue pair of the two operators per ordered block.
    pub labels: Vec<(C64, C64)>,
}

fn label_key(x: C64) -> (i64, i64) {
    ((x.re / LABEL_ROUND).round() as i64, (x.im / LABEL_ROUND).round() as i64)
}

fn pair_key(p: (C64, C64)) -> [(i64, i64); 2] {
    [label_key(p.0), label_key(p.1)]
}

fn marking_labels(
    c: &ProjectionResolution,
    t: &ComplexMatrix,
    s: &ComplexMatrix,
    order: &[usize],
) -> Vec<(C64, C64)> {
    order.iter().map(|&b| (c.block_label(t, b), c.block_label(s, b))).collect()
}

/// The block ordering mandated by the canonical eigenvalue order: sort by the
/// first operator's labels, break ties by the second operator's, then by
/// block index.
pub fn canonical_order(c: &ProjectionResolution, t: &ComplexMatrix, s: &ComplexMatrix) -> Vec<usize> {
    let mut order: Vec<usize> = (0..c.num_blocks()).collect();
    order.sort_by(|&a, &b| {
        cmp_complex(&c.block_label(t, a), &c.block_label(t, b))
            .then_with(|| cmp_complex(&c.block_label(s, a), &c.block_label(s, b)))
            .then(a.cmp(&b))
    });
    order
}

/// All marked diagonalizations of the pair in the given context, in a fixed
/// enumeration order; empty when the context does not contain both operators.
pub fn markings_for(
    site: &ContextPoset,
    context: usize,
    t: &ComplexMatrix,
    s: &ComplexMatrix,
) -> Vec<MarkedDiagonalization> {
    let c = &site.contexts[context];
    if !contains(c, t, site.tol) || !contains(c, s, site.tol) {
        return Vec::new();
    }
    let k = c.num_blocks();
    (0..k)
        .permutations(k)
        .map(|order| {
            let labels = marking_labels(c, t, s, &order);
            MarkedDiagonalization { context, order, labels }
        })
        .collect()
}

/// The presheaf of marked joint diagonalizations of the pair. Restriction
/// along an inclusion (defined only when both contexts contain the pair)
/// forgets the fine marking and re-derives the canonical ordering on the
/// coarser context.
pub fn fts_presheaf(
    site: &ContextPoset,
    t: &ComplexMatrix,
    s: &ComplexMatrix,
) -> SetPresheaf<MarkedDiagonalization> {
    let sections: Vec<Vec<MarkedDiagonalization>> =
        (0..site.len()).map(|c| markings_for(site, c, t, s)).collect();
    let mut maps = BTreeMap::new();
    for small in 0..site.len() {
        if sections[small].is_empty() {
            continue;
        }
        let canonical = canonical_order(&site.contexts[small], t, s);
        let canonical_idx = sections[small]
            .iter()
            .position(|m| m.order == canonical)
            .expect("canonical order is among the permutations");
        for large in 0..site.len() {
            if small != large && site.leq(small, large) && !sections[large].is_empty() {
                maps.insert((small, large), vec![canonical_idx; sections[large].len()]);
            }
        }
    }
    SetPresheaf { sections, maps }
}

/// Nonemptiness of Čech H⁰ of the marked-diagonalization presheaf, with a
/// witnessing context and marking. Since the restriction maps land on the
/// canonical marking, a compatible family exists exactly when some context
/// carries a section at all.
pub fn h0_nonempty(
    presheaf: &SetPresheaf<MarkedDiagonalization>,
) -> Option<(usize, MarkedDiagonalization)> {
    presheaf
        .sections
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_empty())
        .max_by_key(|(_, s)| s.len())
        .map(|(c, s)| (c, s[0].clone()))
}

/// A Čech 1-cochain of permutations over a cover, indexed by ordered pairs
/// of member positions. Permutations act on the n basis positions of the
/// expanded markings; `perms[(a, b)][p]` is the position in marking `a`
/// matching position `p` of marking `b`.
#[derive(Clone, Debug)]
pub struct PermutationCocycle {
    pub cover: Cover,
    pub n: usize,
    pub perms: BTreeMap<(usize, usize), Vec<usize>>,
    /// Whether σ_{αα}=e, σ_{βα}=σ_{αβ}⁻¹, and σ_{αβ}σ_{βγ}=σ_{αγ} all hold.
    pub laws_hold: bool,
}

pub(crate) fn compose(f: &[usize], g: &[usize]) -> Vec<usize> {
    g.iter().map(|&i| f[i]).collect()
}

pub(crate) fn invert(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &pi) in p.iter().enumerate() {
        inv[pi] = i;
    }
    inv
}

fn identity_perm(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Expand a marking to one entry per basis vector: `(label key, block)` in
/// marking order, blocks repeated by dimension.
fn expanded(
    c: &ProjectionResolution,
    m: &MarkedDiagonalization,
) -> Vec<([(i64, i64); 2], usize)> {
    let mut out = Vec::with_capacity(c.dim());
    for (pos, &b) in m.order.iter().enumerate() {
        let key = pair_key(m.labels[pos]);
        for _ in 0..c.block(b).ncols() {
            out.push((key, b));
        }
    }
    out
}

/// The monodromy cocycle of a family of markings over a cover: σ_{αβ} sends
/// each basis position of marking β to the position of marking α carrying
/// the same joint eigenvalue pair. Within a repeated label class, positions
/// are aligned greedily by block-overlap ‖P_i Q_j‖_F.
pub fn monodromy_cocycle(
    site: &ContextPoset,
    t: &ComplexMatrix,
    s: &ComplexMatrix,
    cover: &Cover,
    choices: &[MarkedDiagonalization],
) -> Result<PermutationCocycle> {
    assert_eq!(choices.len(), cover.members.len(), "one marking per cover member");
    let n = site.contexts[cover.target].dim();
    for (&m, choice) in cover.members.iter().zip(choices) {
        assert_eq!(choice.context, m, "marking context must match cover member");
        let c = &site.contexts[m];
        assert!(
            contains(c, t, site.tol) && contains(c, s, site.tol),
            "cover member must contain both operators"
        );
        assert_eq!(choice.labels, marking_labels(c, t, s, &choice.order));
    }
    let mut perms = BTreeMap::new();
    for a in 0..cover.members.len() {
        for b in 0..cover.members.len() {
            let sigma = align_markings(site, &choices[a], &choices[b], a, b)?;
            perms.insert((a, b), sigma);
        }
    }
    let laws_hold = check_cocycle_laws(cover.members.len(), n, &perms);
    Ok(PermutationCocycle { cover: cover.clone(), n, perms, laws_hold })
}

fn align_markings(
    site: &ContextPoset,
    ma: &MarkedDiagonalization,
    mb: &MarkedDiagonalization,
    a: usize,
    b: usize,
) -> Result<Vec<usize>> {
    let ca = &site.contexts[ma.context];
    let cb = &site.contexts[mb.context];
    let ea = expanded(ca, ma);
    let eb = expanded(cb, mb);
    let mut by_key: BTreeMap<[(i64, i64); 2], (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (p, (key, _)) in ea.iter().enumerate() {
        by_key.entry(*key).or_default().0.push(p);
    }
    for (q, (key, _)) in eb.iter().enumerate() {
        by_key.entry(*key).or_default().1.push(q);
    }
    if by_key.values().any(|(pa, pb)| pa.len() != pb.len()) {
        return Err(Error::NoCommonRefinement(a, b));
    }
    // block-overlap scores between the two contexts' blocks
    let mut overlap = vec![vec![0.0; cb.num_blocks()]; ca.num_blocks()];
    for (i, row) in overlap.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = (ca.projection(i) * cb.projection(j)).norm();
        }
    }
    let mut sigma = vec![usize::MAX; eb.len()];
    for (apos, bpos) in by_key.values() {
        let mut taken = vec![false; apos.len()];
        for &q in bpos {
            let block_b = eb[q].1;
            // strict comparison keeps the earliest position among tied
            // overlaps, so tied slots inside one block match in order
            let (best, _) = apos
                .iter()
                .enumerate()
                .filter(|&(i, _)| !taken[i])
                .map(|(i, &p)| (i, overlap[ea[p].1][block_b]))
                .fold(None::<(usize, f64)>, |acc, cand| match acc {
                    Some(best) if cand.1 <= best.1 => Some(best),
                    _ => Some(cand),
                })
                .expect("class sizes match");
            taken[best] = true;
            sigma[q] = apos[best];
        }
    }
    Ok(sigma)
}

fn check_cocycle_laws(
    members: usize,
    n: usize,
    perms: &BTreeMap<(usize, usize), Vec<usize>>,
) -> bool {
    let id = identity_perm(n);
    for a in 0..members {
        if perms[&(a, a)] != id {
            return false;
        }
        for b in 0..members {
            if perms[&(b, a)] != invert(&perms[&(a, b)]) {
                return false;
            }
            for c in 0..members {
                if compose(&perms[&(a, b)], &perms[&(b, c)]) != perms[&(a, c)] {
                    return false;
                }
            }
        }
    }
    true
}

/// Outcome of the coboundary test: either a trivializing family τ with
/// σ_{αβ} = τ_α ∘ τ_β⁻¹, or a cycle of member positions witnessing the
/// obstruction.
#[derive(Clone, Debug)]
pub struct CoboundaryResult {
    pub trivial: bool,
    pub tau: Option<Vec<Vec<usize>>>,
    pub obstruction_cycle: Option<Vec<usize>>,
}

/// Decide whether the cocycle is a coboundary by propagating τ along a
/// spanning forest of the overlap graph and checking the remaining edges.
pub fn is_coboundary(c: &PermutationCocycle) -> CoboundaryResult {
    assert!(c.laws_hold, "cocycle laws must hold before the coboundary test");
    let m = c.cover.members.len();
    let mut tau: Vec<Option<Vec<usize>>> = vec![None; m];
    let mut parent: Vec<Option<usize>> = vec![None; m];
    for root in 0..m {
        if tau[root].is_some() {
            continue;
        }
        tau[root] = Some(identity_perm(c.n));
        let mut queue = vec![root];
        while let Some(a) = queue.pop() {
            for b in 0..m {
                if tau[b].is_none() && c.perms.contains_key(&(a, b)) {
                    // σ_{ab} = τ_a ∘ τ_b⁻¹  ⇒  τ_b = σ_{ab}⁻¹ ∘ τ_a
                    let t = compose(&invert(&c.perms[&(a, b)]), tau[a].as_ref().unwrap());
                    tau[b] = Some(t);
                    parent[b] = Some(a);
                    queue.push(b);
                }
            }
        }
    }
    let tau: Vec<Vec<usize>> = tau.into_iter().map(|t| t.unwrap()).collect();
    for (&(a, b), sigma) in &c.perms {
        if *sigma != compose(&tau[a], &invert(&tau[b])) {
            // walk both nodes up to the root to exhibit the bad cycle
            let path_to_root = |mut x: usize| {
                let mut path = vec![x];
                while let Some(p) = parent[x] {
                    x = p;
                    path.push(x);
                }
                path
            };
            let mut cycle = path_to_root(a);
            cycle.reverse();
            cycle.extend(path_to_root(b));
            return CoboundaryResult { trivial: false, tau: None, obstruction_cycle: Some(cycle) };
        }
    }
    CoboundaryResult { trivial: true, tau: Some(tau), obstruction_cycle: None }
}

/// Verdict on criterion (iv): vacuous when no cover by contexts containing
/// both operators exists.
#[derive(Clone, Debug)]
pub enum MonodromyVerdict {
    Vacuous,
    Trivial { cover: Cover },
    Obstructed { cover: Cover, cycle: Vec<usize> },
}

/// Full verdict report for the joint-diagonalizability equivalence.
#[derive(Debug)]
pub struct JointDiagReport {
    /// (a) ‖[T,S]‖_F within tolerance of zero.
    pub commutator_vanishes: bool,
    pub commutator_norm: f64,
    /// (b) a site context containing both operators, if any.
    pub joint_context: Option<usize>,
    /// (c) witness for nonempty H⁰ of the marked-diagonalization presheaf.
    pub h0_witness: Option<(usize, MarkedDiagonalization)>,
    /// (d) monodromy triviality over a qualifying cover.
    pub monodromy: MonodromyVerdict,
    pub diagonalizable: bool,
    /// Joint diagonalization attached when the pair commutes.
    pub unitary: Option<JointDiagonalization>,
}

/// Evaluate the equivalent criteria independently and cross-check them.
pub fn decide_joint_diagonalizable(
    site: &ContextPoset,
    t: &ComplexMatrix,
    s: &ComplexMatrix,
    tol: f64,
) -> Result<JointDiagReport> {
    for op in [t, s] {
        if !is_normal(op, tol) {
            let residual = commutator(op, &op.adjoint())?.fro_norm();
            return Err(Error::NotNormal { residual });
        }
    }
    let comm = commutator(t, s)?;
    let commutator_norm = comm.fro_norm();
    let commutator_vanishes = commutator_norm <= tol * commutation_scale(t, s);

    let both: Vec<usize> = (0..site.len())
        .filter(|&c| {
            contains(&site.contexts[c], t, site.tol) && contains(&site.contexts[c], s, site.tol)
        })
        .collect();
    let joint_context = both
        .iter()
        .copied()
        .max_by_key(|&c| site.contexts[c].num_blocks());

    let presheaf = fts_presheaf(site, t, s);
    let h0_witness = h0_nonempty(&presheaf);

    let monodromy = match joint_context {
        None => MonodromyVerdict::Vacuous,
        Some(target) => {
            let qualifying = site
                .covers_of(target)
                .into_iter()
                .find(|cov| cov.members.iter().all(|m| both.contains(m)));
            match qualifying {
                None => MonodromyVerdict::Vacuous,
                Some(cover) => {
                    let choices: Vec<MarkedDiagonalization> = cover
                        .members
                        .iter()
                        .map(|&m| {
                            let c = &site.contexts[m];
                            let order = canonical_order(c, t, s);
                            let labels = marking_labels(c, t, s, &order);
                            MarkedDiagonalization { context: m, order, labels }
                        })
                        .collect();
                    let cocycle = monodromy_cocycle(site, t, s, &cover, &choices)?;
                    let result = is_coboundary(&cocycle);
                    if result.trivial {
                        MonodromyVerdict::Trivial { cover }
                    } else {
                        MonodromyVerdict::Obstructed {
                            cover,
                            cycle: result.obstruction_cycle.unwrap_or_default(),
                        }
                    }
                }
            }
        }
    };

    let b = joint_context.is_some();
    let c = h0_witness.is_some();
    if commutator_vanishes != b || b != c {
        return Err(Error::InconsistentCriteria(format!(
            "commutator={commutator_vanishes}, joint context={b}, H0 nonempty={c}"
        )));
    }
    let unitary = if commutator_vanishes {
        Some(joint_diagonalize(&[t.clone(), s.clone()], tol)?)
    } else {
        None
    };
    Ok(JointDiagReport {
        commutator_vanishes,
        commutator_norm,
        joint_context,
        h0_witness,
        monodromy,
        diagonalizable: commutator_vanishes,
        unitary,
    })
}

/// π₀ of the category of elements of a set presheaf: nodes are pairs
/// (context, section), with an edge whenever one restricts to the other.
#[derive(Clone, Debug)]
pub struct Pi0 {
    pub components: usize,
    /// One (context, section index) node per component.
    pub representatives: Vec<(usize, usize)>,
}

pub fn pi0_grothendieck<S>(presheaf: &SetPresheaf<S>) -> Pi0 {
    let offsets: Vec<usize> = presheaf
        .sections
        .iter()
        .scan(0usize, |acc, s| {
            let o = *acc;
            *acc += s.len();
            Some(o)
        })
        .collect();
    let total: usize = presheaf.sections.iter().map(|s| s.len()).sum();
    let mut uf: Vec<usize> = (0..total).collect();
    fn find(uf: &mut Vec<usize>, mut x: usize) -> usize {
        while uf[x] != x {
            uf[x] = uf[uf[x]];
            x = uf[x];
        }
        x
    }
    for (&(small, large), map) in &presheaf.maps {
        for (i, &j) in map.iter().enumerate() {
            let a = find(&mut uf, offsets[large] + i);
            let b = find(&mut uf, offsets[small] + j);
            uf[a] = b;
        }
    }
    let mut representatives = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (c, secs) in presheaf.sections.iter().enumerate() {
        for i in 0..secs.len() {
            let root = find(&mut uf, offsets[c] + i);
            if seen.insert(root) {
                representatives.push((c, i));
            }
        }
    }
    Pi0 { components: representatives.len(), representatives }
}
