//! End-to-end acceptance suite. Each test covers one criterion and prints a
//! single PASS line when it holds; a failed assertion fails the test.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use specsite::matrix::DEFAULT_TOL;
use specsite::obstruction::{canonical_order, markings_for, MarkedDiagonalization};
use specsite::site::{build_site, check_descent, spectral_presheaf, SiteOptions};
use specsite::{
    cohomology, decide_joint_diagonalizable, fts_presheaf, is_coboundary, joint_diagonalize,
    k0_presheaf, monodromy_cocycle, pi0_grothendieck, poset_complex, smith_normal_form, C64,
    ComplexMatrix, ContextPoset, Cover, FinAbGroup, IntMat, SetPresheaf,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn random_unitary(n: usize, rng: &mut impl Rng) -> DMatrix<C64> {
    let g = DMatrix::<C64>::from_fn(n, n, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    g.qr().q()
}

fn hermitian_with_integer_spectrum(n: usize, rng: &mut impl Rng) -> DMatrix<C64> {
    let u = random_unitary(n, rng);
    let d = DMatrix::<C64>::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(i as f64, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    &u * d * u.adjoint()
}

fn matrix_poly(h: &DMatrix<C64>, coeffs: &[i64]) -> ComplexMatrix {
    let n = h.nrows();
    let mut acc = DMatrix::<C64>::zeros(n, n);
    let mut pow = DMatrix::<C64>::identity(n, n);
    for &c in coeffs {
        acc += &pow * C64::new(c as f64, 0.0);
        pow = &pow * h;
    }
    ComplexMatrix::from_dmatrix(acc).unwrap()
}

/// Commuting pair: integer-coefficient cubics of one Hermitian matrix with
/// integer spectrum, so eigenvalue collisions are exact and gaps are >= 1.
fn commuting_pair(n: usize, rng: &mut impl Rng) -> (ComplexMatrix, ComplexMatrix) {
    let h = hermitian_with_integer_spectrum(n, rng);
    let coeffs = |rng: &mut dyn RngCore| -> Vec<i64> {
        (0..3).map(|_| rng.gen_range(-2..=2)).collect()
    };
    (matrix_poly(&h, &coeffs(rng)), matrix_poly(&h, &coeffs(rng)))
}

/// Noncommuting pair: a Pauli pair in the top-left 2x2 corner, padded by the
/// identity and conjugated by a random unitary.
fn noncommuting_pair(n: usize, rng: &mut impl Rng) -> (ComplexMatrix, ComplexMatrix) {
    let mut z = DMatrix::<C64>::identity(n, n);
    let mut x = DMatrix::<C64>::identity(n, n);
    z[(1, 1)] = C64::new(-1.0, 0.0);
    x[(0, 0)] = C64::new(0.0, 0.0);
    x[(1, 1)] = C64::new(0.0, 0.0);
    x[(0, 1)] = C64::new(1.0, 0.0);
    x[(1, 0)] = C64::new(1.0, 0.0);
    let u = random_unitary(n, rng);
    let conj = |m: &DMatrix<C64>| ComplexMatrix::from_dmatrix(&u * m * u.adjoint()).unwrap();
    (conj(&z), conj(&x))
}

fn diag(vals: &[f64]) -> ComplexMatrix {
    ComplexMatrix::diagonal(&vals.iter().map(|&v| C64::new(v, 0.0)).collect::<Vec<_>>())
}

fn fixture_matrices(name: &str) -> (usize, Vec<ComplexMatrix>) {
    let text = std::fs::read_to_string(fixture(name)).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let dim = v["dim"].as_u64().unwrap() as usize;
    let ops = v["operators"]
        .as_array()
        .unwrap()
        .iter()
        .map(|op| {
            let rows = op["matrix"].as_array().unwrap();
            let mat = DMatrix::<C64>::from_fn(dim, dim, |i, j| {
                let e = &rows[i].as_array().unwrap()[j];
                C64::new(e[0].as_f64().unwrap(), e[1].as_f64().unwrap())
            });
            ComplexMatrix::from_dmatrix(mat).unwrap()
        })
        .collect();
    (dim, ops)
}

#[test]
fn criterion_1_pauli_reproduction() {
    let start = Instant::now();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_specsite"))
        .args(["--format", "machine", "obstruction"])
        .arg(fixture("pauli.json"))
        .args(["Z", "X"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["commutator"], serde_json::json!([[[0.0, 0.0], [2.0, 0.0]], [[-2.0, 0.0], [0.0, 0.0]]]));
    assert_eq!(v["verdict"], "obstructed");
    for section in v["sections"].as_array().unwrap() {
        assert_eq!(section["markings"], 0, "every F_(T,S) section set must be empty");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("ACCEPTANCE 1 (Pauli reproduction): PASS");
}

#[test]
fn criterion_2_theorem_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2026);
    for n in 2..=4 {
        for trial in 0..200 {
            let commuting = trial % 2 == 0;
            let (t, s) = if commuting {
                commuting_pair(n, &mut rng)
            } else {
                noncommuting_pair(n, &mut rng)
            };
            let site = build_site(n, &[t.clone(), s.clone()], SiteOptions::default()).unwrap();
            // decide_joint_diagonalizable errors out if (a), (b), (c) disagree
            let r = decide_joint_diagonalizable(&site, &t, &s, DEFAULT_TOL)
                .unwrap_or_else(|e| panic!("n={n} trial={trial}: {e}"));
            assert_eq!(r.diagonalizable, commuting, "n={n} trial={trial}");
            if commuting {
                let jd = r.unitary.expect("commuting verdict carries a unitary");
                let u = jd.unitary.inner();
                for (k, op) in [&t, &s].into_iter().enumerate() {
                    let d = ComplexMatrix::diagonal(&jd.labels[k]);
                    let residual = (u * d.inner() * u.adjoint() - op.inner()).norm();
                    assert!(residual < 1e-8, "n={n} trial={trial} residual={residual}");
                }
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!("ACCEPTANCE 2 (theorem equivalence, 200 trials x n=2..4): PASS");
}

#[test]
fn criterion_3_commutative_reduction() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..50 {
        let n = rng.gen_range(2..=4);
        let (t, s) = commuting_pair(n, &mut rng);
        let site = build_site(n, &[t, s], SiteOptions::default()).unwrap();
        let top = (0..site.len())
            .find(|&m| (0..site.len()).all(|c| site.leq(c, m)))
            .expect("commuting-pair site has a maximum");
        let p = k0_presheaf(&site);
        let h = cohomology(&poset_complex(&site, &p));
        assert_eq!(
            h[0].group,
            FinAbGroup::free(site.contexts[top].num_blocks()),
            "trial {trial}"
        );
        for n in 1..=3.min(h.len() - 1) {
            assert!(h[n].group.is_trivial(), "trial {trial}: H^{n} = {}", h[n].group);
        }
    }
    println!("ACCEPTANCE 3 (poset cohomology collapse on sites with a maximum): PASS");
}

#[test]
fn criterion_4_k0_stalks() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let n = rng.gen_range(2..=4);
        let (t, s) = commuting_pair(n, &mut rng);
        let site = build_site(n, &[t, s], SiteOptions::default()).unwrap();
        let p = k0_presheaf(&site);
        for (c, context) in site.contexts.iter().enumerate() {
            assert_eq!(p.ranks[c], context.num_blocks());
        }
        for m in p.restrictions.values() {
            for j in 0..m.cols {
                let mut sum = BigInt::zero();
                for i in 0..m.rows {
                    assert!(m[(i, j)].is_zero() || m[(i, j)].is_one());
                    sum += &m[(i, j)];
                }
                assert_eq!(sum, BigInt::one());
            }
        }
        for chain in site.chains(site.len()) {
            for w in 0..chain.len().saturating_sub(2) {
                let (a, b, c) = (chain[w], chain[w + 1], chain[w + 2]);
                assert_eq!(
                    p.restriction(a, c),
                    p.restriction(a, b).mul(&p.restriction(b, c))
                );
            }
        }
    }
    println!("ACCEPTANCE 4 (K0 stalk ranks, 0/1 transfers, composition law): PASS");
}

fn bigint_det(m: &IntMat) -> BigInt {
    // Bareiss fraction-free elimination
    assert_eq!(m.rows, m.cols);
    let n = m.rows;
    let mut a: Vec<Vec<BigInt>> =
        (0..n).map(|i| (0..n).map(|j| m[(i, j)].clone()).collect()).collect();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if a[k][k].is_zero() {
            let swap = (k + 1..n).find(|&r| !a[r][k].is_zero());
            match swap {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                a[i][j] = num / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    sign * a[n - 1][n - 1].clone()
}

#[test]
fn criterion_5_snf_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..500 {
        let rows = rng.gen_range(1..=8);
        let cols = rng.gen_range(1..=8);
        let a = IntMat::from_fn(rows, cols, |_, _| rng.gen_range(-20..=20));
        let snf = smith_normal_form(&a);
        assert_eq!(snf.u.mul(&a).mul(&snf.v), snf.d, "trial {trial}: UAV != D");
        assert_eq!(bigint_det(&snf.u).abs(), BigInt::one(), "trial {trial}: U not unimodular");
        assert_eq!(bigint_det(&snf.v).abs(), BigInt::one(), "trial {trial}: V not unimodular");
        let factors = snf.invariant_factors();
        for w in factors.windows(2) {
            assert!((&w[1] % &w[0]).is_zero(), "trial {trial}: divisibility chain broken");
        }
    }
    // hand-built complex 0 -> Z --[2]--> Z -> 0 has H^1 = Z/2
    let complex = specsite::CochainComplex {
        ranks: vec![1, 1],
        differentials: vec![IntMat::from_rows_i64(&[vec![2]])],
        labels: vec![vec!["0".into()], vec!["1".into()]],
    };
    let h = cohomology(&complex);
    assert!(h[0].group.is_trivial());
    assert_eq!(h[1].group, FinAbGroup::new(0, vec![BigInt::from(2)]));
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!("ACCEPTANCE 5 (SNF oracle, 500 random matrices): PASS");
}

#[test]
fn criterion_6_descent_equalizer() {
    // distinct joint eigenvalues: the equalizer is a bijection
    let t = diag(&[1.0, 1.0, 2.0, 2.0]);
    let s = diag(&[3.0, 4.0, 3.0, 4.0]);
    let site = build_site(4, &[t.clone(), s.clone()], SiteOptions::default()).unwrap();
    let joint = site
        .find(&specsite::context::generate_context(&[t.clone(), s.clone()], site.tol).unwrap())
        .unwrap();
    let ct = site.find(&specsite::context::generate_context(&[t], site.tol).unwrap()).unwrap();
    let cs = site.find(&specsite::context::generate_context(&[s], site.tol).unwrap()).unwrap();
    let cover = Cover { target: joint, members: vec![ct, cs] };
    let presheaf = spectral_presheaf(&site);
    let report = check_descent(&site, &cover, &presheaf);
    assert!(report.holds && report.injective && report.surjective);

    // degenerate joint labels: strictly more compatible families than sections
    let t = diag(&[1.0, 1.0, 2.0]);
    let s = diag(&[3.0, 4.0, 4.0]);
    let site = build_site(3, &[t.clone(), s.clone()], SiteOptions::default()).unwrap();
    let joint = site
        .find(&specsite::context::generate_context(&[t.clone(), s.clone()], site.tol).unwrap())
        .unwrap();
    let ct = site.find(&specsite::context::generate_context(&[t], site.tol).unwrap()).unwrap();
    let cs = site.find(&specsite::context::generate_context(&[s], site.tol).unwrap()).unwrap();
    let cover = Cover { target: joint, members: vec![ct, cs] };
    let presheaf = spectral_presheaf(&site);
    let report = check_descent(&site, &cover, &presheaf);
    assert!(report.compatible.len() > report.image.len());
    assert_eq!(report.compatible.len(), 4);
    assert_eq!(report.image.len(), 3);
    assert!(!report.holds);
    println!("ACCEPTANCE 6 (descent bijection and degenerate failure): PASS");
}

#[test]
fn criterion_7_monodromy_cocycle_laws() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..100 {
        let n = rng.gen_range(2..=4);
        let (t, s) = commuting_pair(n, &mut rng);
        let site = build_site(n, &[t.clone(), s.clone()], SiteOptions::default()).unwrap();
        let joint = (0..site.len())
            .find(|&m| (0..site.len()).all(|c| site.leq(c, m)))
            .unwrap();
        // cover the joint context by several copies carrying random markings
        let copies = rng.gen_range(1..=4);
        let cover = Cover { target: joint, members: vec![joint; copies] };
        let all = markings_for(&site, joint, &t, &s);
        let choices: Vec<MarkedDiagonalization> =
            (0..copies).map(|_| all.choose(&mut rng).unwrap().clone()).collect();
        let cocycle = monodromy_cocycle(&site, &t, &s, &cover, &choices)
            .unwrap_or_else(|e| panic!("trial {trial}: {e}"));
        assert!(cocycle.laws_hold, "trial {trial}: cocycle laws violated");
        let result = is_coboundary(&cocycle);
        assert!(result.trivial, "trial {trial}: overlap graph is complete, so trivial");
        let tau = result.tau.unwrap();
        for (&(a, b), sigma) in &cocycle.perms {
            let mut tb_inv = vec![0usize; cocycle.n];
            for (i, &x) in tau[b].iter().enumerate() {
                tb_inv[x] = i;
            }
            let recomposed: Vec<usize> = tb_inv.iter().map(|&i| tau[a][i]).collect();
            assert_eq!(*sigma, recomposed, "trial {trial}: tau does not reproduce sigma({a},{b})");
        }
        // markings induced from one global marking give the trivial cocycle
        let order = canonical_order(&site.contexts[joint], &t, &s);
        let global = all.iter().find(|m| m.order == order).unwrap().clone();
        let constant = vec![global; copies];
        let coc = monodromy_cocycle(&site, &t, &s, &cover, &constant).unwrap();
        for sigma in coc.perms.values() {
            assert_eq!(*sigma, (0..coc.n).collect::<Vec<usize>>());
        }
    }
    println!("ACCEPTANCE 7 (monodromy cocycle laws, 100 seeded covers): PASS");
}

/// Independent brute-force component count over the (context, section) graph.
fn pi0_oracle<S>(p: &SetPresheaf<S>) -> usize {
    let mut nodes = Vec::new();
    for (c, secs) in p.sections.iter().enumerate() {
        for i in 0..secs.len() {
            nodes.push((c, i));
        }
    }
    let index: BTreeMap<(usize, usize), usize> =
        nodes.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let mut adj = vec![Vec::new(); nodes.len()];
    for (&(small, large), map) in &p.maps {
        for (i, &j) in map.iter().enumerate() {
            let a = index[&(large, i)];
            let b = index[&(small, j)];
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut seen = vec![false; nodes.len()];
    let mut components = 0;
    for start in 0..nodes.len() {
        if seen[start] {
            continue;
        }
        components += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(x) = stack.pop() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
    }
    components
}

fn check_pi0(site: &ContextPoset, ops: &[ComplexMatrix]) {
    let spectral = spectral_presheaf(site);
    assert_eq!(pi0_grothendieck(&spectral).components, pi0_oracle(&spectral));
    if ops.len() == 2 {
        let marked = fts_presheaf(site, &ops[0], &ops[1]);
        assert_eq!(pi0_grothendieck(&marked).components, pi0_oracle(&marked));
    }
}

#[test]
fn criterion_8_pi0_against_oracle() {
    for name in ["pauli.json", "commuting_pair.json", "degenerate_pair.json"] {
        let (dim, ops) = fixture_matrices(name);
        let site = build_site(dim, &ops, SiteOptions::default()).unwrap();
        check_pi0(&site, &ops);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..50 {
        let n = rng.gen_range(2..=4);
        let (t, s) = if trial % 3 == 0 {
            noncommuting_pair(n, &mut rng)
        } else {
            commuting_pair(n, &mut rng)
        };
        let full = trial % 5 == 0;
        let options = SiteOptions { full_subcontexts: full, ..SiteOptions::default() };
        let site = build_site(n, &[t.clone(), s.clone()], options).unwrap();
        check_pi0(&site, &[t, s]);
    }
    println!("ACCEPTANCE 8 (pi0 matches brute-force oracle): PASS");
}

#[test]
fn criterion_2_unitary_sanity() {
    // spot check that joint_diagonalize returns an actual unitary
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (t, s) = commuting_pair(4, &mut rng);
    let jd = joint_diagonalize(&[t, s], DEFAULT_TOL).unwrap();
    let u = jd.unitary.inner();
    let err = (u.adjoint() * u - DMatrix::<C64>::identity(4, 4)).norm();
    assert!(err < 1e-10);
}
