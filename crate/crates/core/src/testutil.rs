//! Shared helpers for unit tests: seeded random operator families.

use nalgebra::DMatrix;
use rand::Rng;

use crate::matrix::{C64, ComplexMatrix};

pub fn random_hermitian(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let m = DMatrix::<C64>::from_fn(n, n, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    ComplexMatrix::from_dmatrix((&m + m.adjoint()).scale(0.5)).unwrap()
}

pub fn random_unitary(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let h = random_hermitian(n, rng);
    // QR of a generic complex matrix; Q column phases are irrelevant here
    let g = DMatrix::<C64>::from_fn(n, n, |i, j| {
        h.get(i, j) + C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let qr = g.qr();
    ComplexMatrix::from_dmatrix(qr.q()).unwrap()
}

/// Evaluate a polynomial with the given real coefficients at a matrix.
pub fn matrix_polynomial(a: &ComplexMatrix, coeffs: &[f64]) -> ComplexMatrix {
    let n = a.dim();
    let mut acc = DMatrix::<C64>::zeros(n, n);
    let mut power = DMatrix::<C64>::identity(n, n);
    for &c in coeffs {
        acc += &power * C64::new(c, 0.0);
        power = &power * a.inner();
    }
    ComplexMatrix::from_dmatrix(acc).unwrap()
}

/// A normal matrix with the given eigenvalues in a shared random eigenbasis.
pub fn normal_with_labels(u: &ComplexMatrix, labels: &[C64]) -> ComplexMatrix {
    let d = ComplexMatrix::diagonal(labels);
    ComplexMatrix::from_dmatrix(u.inner() * d.inner() * u.inner().adjoint()).unwrap()
}

/// A commuting pair of normal matrices sharing a random eigenbasis, with
/// eigenvalues from a well-separated finite grid so the induced contexts are
/// numerically unambiguous.
pub fn random_commuting_pair(n: usize, rng: &mut impl Rng) -> (ComplexMatrix, ComplexMatrix) {
    let u = random_unitary(n, rng);
    let pick = |rng: &mut dyn rand::RngCore| {
        C64::new(rng.gen_range(0..3) as f64, rng.gen_range(0..2) as f64)
    };
    let a: Vec<C64> = (0..n).map(|_| pick(rng)).collect();
    let b: Vec<C64> = (0..n).map(|_| pick(rng)).collect();
    (normal_with_labels(&u, &a), normal_with_labels(&u, &b))
}

/// A noncommuting pair: a Pauli-type pair conjugated by a random unitary and
/// embedded in the top-left corner of an n-dimensional space.
pub fn random_noncommuting_pair(n: usize, rng: &mut impl Rng) -> (ComplexMatrix, ComplexMatrix) {
    assert!(n >= 2);
    let mut z = DMatrix::<C64>::identity(n, n);
    let mut x = DMatrix::<C64>::identity(n, n);
    z[(0, 0)] = C64::new(1.0, 0.0);
    z[(1, 1)] = C64::new(-1.0, 0.0);
    x[(0, 0)] = C64::new(0.0, 0.0);
    x[(1, 1)] = C64::new(0.0, 0.0);
    x[(0, 1)] = C64::new(1.0, 0.0);
    x[(1, 0)] = C64::new(1.0, 0.0);
    let u = random_unitary(n, rng);
    let conj = |m: &DMatrix<C64>| {
        ComplexMatrix::from_dmatrix(u.inner() * m * u.inner().adjoint()).unwrap()
    };
    (conj(&z), conj(&x))
}
