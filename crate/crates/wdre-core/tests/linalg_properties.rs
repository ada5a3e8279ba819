//! Spectral-operation invariants on reference matrices and seeded random
//! instances: square roots, pseudo-inverses, and the NSD margin.

use wdre_core::{Mat, SymMatrix};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_sym(rng: &mut StdRng, n: usize) -> SymMatrix {
    SymMatrix::from_fn_upper(n, |_, _| rng.gen_range(-1.0..1.0))
}

fn random_gram(rng: &mut StdRng, n: usize) -> SymMatrix {
    let b = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    SymMatrix::from_mat(b.matmul(&b.transpose())).unwrap()
}

#[test]
fn sqrt_of_identity_is_identity() {
    let r = SymMatrix::identity(4).psd_sqrt().unwrap();
    assert!(r.sub(&SymMatrix::identity(4)).max_abs() < 1e-12);
}

#[test]
fn sqrt_of_diagonal_takes_entrywise_roots() {
    let r = SymMatrix::diag(&[4.0, 9.0]).psd_sqrt().unwrap();
    assert!((r.get(0, 0) - 2.0).abs() < 1e-12);
    assert!((r.get(1, 1) - 3.0).abs() < 1e-12);
    assert!(r.get(0, 1).abs() < 1e-12);
}

#[test]
fn sqrt_squares_back_on_random_gram_matrices() {
    let mut rng = StdRng::seed_from_u64(41);
    for _ in 0..20 {
        let m = random_gram(&mut rng, 5);
        let r = m.psd_sqrt().unwrap();
        let rr = SymMatrix::from_mat(r.as_mat().matmul(r.as_mat())).unwrap();
        let err = rr.sub(&m).frobenius_norm();
        assert!(
            err <= 1e-8 * (1.0 + m.frobenius_norm()),
            "sqrt reconstruction error {err}"
        );
    }
}

#[test]
fn sqrt_scales_linearly() {
    let mut rng = StdRng::seed_from_u64(42);
    let m = random_gram(&mut rng, 5);
    let c: f64 = 3.7;
    let lhs = m.scaled(c * c).psd_sqrt().unwrap();
    let rhs = m.psd_sqrt().unwrap().scaled(c);
    let err = lhs.sub(&rhs).frobenius_norm();
    assert!(err <= 1e-10 * (1.0 + rhs.frobenius_norm()), "scaling error {err}");
}

#[test]
fn sqrt_rejects_indefinite_matrices() {
    assert!(SymMatrix::diag(&[1.0, -0.5]).psd_sqrt().is_err());
}

#[test]
fn pinv_of_invertible_diagonal_inverts() {
    let p = SymMatrix::diag(&[2.0, 5.0]).pseudo_inverse(None);
    assert!((p.get(0, 0) - 0.5).abs() < 1e-12);
    assert!((p.get(1, 1) - 0.2).abs() < 1e-12);
}

#[test]
fn pinv_keeps_exact_zero_eigenvalues() {
    let p = SymMatrix::diag(&[1.0, 0.0]).pseudo_inverse(None);
    assert!((p.get(0, 0) - 1.0).abs() < 1e-12);
    assert!(p.get(1, 1).abs() < 1e-12);
}

#[test]
fn pinv_of_zero_is_zero() {
    assert_eq!(SymMatrix::zeros(3).pseudo_inverse(None).max_abs(), 0.0);
}

#[test]
fn pinv_satisfies_penrose_identities_on_rank_deficient_input() {
    // Rank-2 PSD matrix of order 4.
    let mut rng = StdRng::seed_from_u64(7);
    let b = Mat::from_fn(4, 2, |_, _| rng.gen_range(-1.0..1.0));
    let m = SymMatrix::from_mat(b.matmul(&b.transpose())).unwrap();
    let p = m.pseudo_inverse(None);
    let mm = m.as_mat();
    let pm = p.as_mat();
    let mpm = mm.matmul(pm).matmul(mm);
    let pmp = pm.matmul(mm).matmul(pm);
    let scale = 1.0 + m.frobenius_norm();
    assert!(mpm.sub(mm).frobenius_norm() <= 1e-8 * scale);
    assert!(pmp.sub(pm).frobenius_norm() <= 1e-8 * (1.0 + p.frobenius_norm()));
}

#[test]
fn pinv_is_an_involution() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..10 {
        let m = random_sym(&mut rng, 5);
        let back = m.pseudo_inverse(None).pseudo_inverse(None);
        let err = back.sub(&m).frobenius_norm();
        assert!(err <= 1e-8 * (1.0 + m.frobenius_norm()), "involution error {err}");
    }
}

#[test]
fn nsd_margin_reference_values() {
    let neg_id = SymMatrix::identity(3).scaled(-1.0);
    assert!((neg_id.nsd_margin() + 1.0).abs() < 1e-12);
    assert_eq!(SymMatrix::zeros(3).nsd_margin(), 0.0);
    // Indefinite 2x2 with eigenvalues 1/8 and -3/8.
    let m = SymMatrix::from_fn_upper(2, |i, j| if i == j { -0.125 } else { 0.25 });
    assert!((m.nsd_margin() - 0.125).abs() < 1e-12);
}

#[test]
fn nsd_margin_shifts_with_the_diagonal() {
    let mut rng = StdRng::seed_from_u64(12);
    for _ in 0..10 {
        let m = random_sym(&mut rng, 6);
        let t = rng.gen_range(-2.0..2.0);
        let shifted = m.add(&SymMatrix::identity(6).scaled(t));
        let err = (shifted.nsd_margin() - (m.nsd_margin() + t)).abs();
        assert!(err <= 1e-10 * (1.0 + m.frobenius_norm()), "shift error {err}");
    }
}
