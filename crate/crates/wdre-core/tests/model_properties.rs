//! Reference values and properties for the Gelbrich distance, the affine
//! MSE, and the nominal-optimal affine estimator.

use wdre_core::model::{gelbrich_distance, mse_affine, optimal_affine_estimator};
use wdre_core::{AffineEstimator, GaussianSpec, Mat, ObservationModel, SymMatrix};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn scalar_gaussian(mean: f64, var: f64) -> GaussianSpec {
    GaussianSpec::new(vec![mean], SymMatrix::diag(&[var])).unwrap()
}

fn random_gaussian(rng: &mut StdRng, n: usize) -> GaussianSpec {
    let b = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let cov = SymMatrix::from_mat(b.matmul(&b.transpose())).unwrap();
    let mean = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    GaussianSpec::new(mean, cov).unwrap()
}

#[test]
fn gelbrich_reference_values() {
    let d = gelbrich_distance(
        &scalar_gaussian(3.0f64.sqrt(), 4.0),
        &scalar_gaussian(0.0, 1.0),
    )
    .unwrap();
    assert!((d - 2.0).abs() < 1e-12, "got {d}");

    let d = gelbrich_distance(&scalar_gaussian(0.0, 9.0), &scalar_gaussian(0.0, 1.0)).unwrap();
    assert!((d - 2.0).abs() < 1e-12, "got {d}");

    let p = random_gaussian(&mut StdRng::seed_from_u64(3), 4);
    assert!(gelbrich_distance(&p, &p).unwrap() < 1e-9);
}

#[test]
fn gelbrich_is_symmetric_and_separates_points() {
    let mut rng = StdRng::seed_from_u64(8);
    for _ in 0..20 {
        let p = random_gaussian(&mut rng, 3);
        let q = random_gaussian(&mut rng, 3);
        let pq = gelbrich_distance(&p, &q).unwrap();
        let qp = gelbrich_distance(&q, &p).unwrap();
        assert!((pq - qp).abs() < 1e-9, "asymmetry {}", (pq - qp).abs());
        assert!(pq > 1e-9, "distinct moments must be separated");
    }
}

#[test]
fn gelbrich_triangle_inequality_on_scalar_triples() {
    let mut rng = StdRng::seed_from_u64(9);
    for _ in 0..200 {
        let mut g = || scalar_gaussian(rng.gen_range(-2.0..2.0), rng.gen_range(0.1..4.0));
        let (p, q, r) = (g(), g(), g());
        let pr = gelbrich_distance(&p, &r).unwrap();
        let via_q =
            gelbrich_distance(&p, &q).unwrap() + gelbrich_distance(&q, &r).unwrap();
        assert!(pr <= via_q + 1e-9, "triangle violated: {pr} > {via_q}");
    }
}

#[test]
fn gelbrich_rejects_dimension_mismatch() {
    let p = scalar_gaussian(0.0, 1.0);
    let q = GaussianSpec::new(vec![0.0, 0.0], SymMatrix::identity(2)).unwrap();
    assert!(gelbrich_distance(&p, &q).is_err());
}

#[test]
fn mse_reference_values() {
    let model = ObservationModel::new(Mat::from_rows(&[vec![1.0]]).unwrap());
    let halving = AffineEstimator::new(Mat::from_rows(&[vec![0.5]]).unwrap(), vec![0.0]).unwrap();

    let v = mse_affine(
        &halving,
        &model,
        &scalar_gaussian(0.0, 9.0),
        &scalar_gaussian(0.0, 9.0),
    )
    .unwrap();
    assert!((v - 4.5).abs() < 1e-12, "got {v}");

    let v = mse_affine(
        &halving,
        &model,
        &scalar_gaussian(3.0f64.sqrt(), 4.0),
        &scalar_gaussian(-(3.0f64.sqrt()), 4.0),
    )
    .unwrap();
    assert!((v - 5.0).abs() < 1e-12, "got {v}");

    let zero = AffineEstimator::new(Mat::from_rows(&[vec![0.0]]).unwrap(), vec![0.0]).unwrap();
    let v = mse_affine(
        &zero,
        &model,
        &scalar_gaussian(0.0, 1.0),
        &scalar_gaussian(0.0, 1.0),
    )
    .unwrap();
    assert!((v - 1.0).abs() < 1e-12, "got {v}");
}

#[test]
fn mse_depends_only_on_moments_bitwise() {
    // Two Gaussian values built through different code paths but with
    // bit-identical moments must give a bit-identical MSE.
    let model = ObservationModel::new(Mat::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap());
    let f = AffineEstimator::new(
        Mat::from_rows(&[vec![0.3, -0.1], vec![0.2, 0.4]]).unwrap(),
        vec![0.1, -0.2],
    )
    .unwrap();
    let px1 = GaussianSpec::new(
        vec![0.25, -0.5],
        SymMatrix::from_fn_upper(2, |i, j| if i == j { 2.0 } else { 0.5 }),
    )
    .unwrap();
    let px2 = GaussianSpec::new(
        vec![0.25, -0.5],
        SymMatrix::from_mat(Mat::from_rows(&[vec![2.0, 0.5], vec![0.5, 2.0]]).unwrap()).unwrap(),
    )
    .unwrap();
    let pw = GaussianSpec::new(vec![0.0, 0.0], SymMatrix::identity(2)).unwrap();
    let v1 = mse_affine(&f, &model, &px1, &pw).unwrap();
    let v2 = mse_affine(&f, &model, &px2, &pw).unwrap();
    assert_eq!(v1.to_bits(), v2.to_bits());
}

#[test]
fn optimal_estimator_reference_values() {
    let model = ObservationModel::new(Mat::from_rows(&[vec![1.0]]).unwrap());
    let f = optimal_affine_estimator(
        &model,
        &scalar_gaussian(0.0, 9.0),
        &scalar_gaussian(0.0, 9.0),
    )
    .unwrap();
    assert!((f.a[(0, 0)] - 0.5).abs() < 1e-12);
    assert!(f.b[0].abs() < 1e-12);
}

#[test]
fn optimal_estimator_is_identity_for_noiseless_invertible_model() {
    let model = ObservationModel::new(Mat::identity(3));
    let px = GaussianSpec::new(
        vec![0.0; 3],
        SymMatrix::diag(&[1.0, 2.0, 3.0]),
    )
    .unwrap();
    let pw = GaussianSpec::new(vec![0.0; 3], SymMatrix::zeros(3)).unwrap();
    let f = optimal_affine_estimator(&model, &px, &pw).unwrap();
    assert!(f.a.sub(&Mat::identity(3)).max_abs() < 1e-10);
    assert!(f.b.iter().all(|b| b.abs() < 1e-10));
    let v = mse_affine(&f, &model, &px, &pw).unwrap();
    assert!(v.abs() < 1e-10, "noiseless MSE {v}");
}

#[test]
fn optimal_estimator_zeroes_the_mse_gradient() {
    let mut rng = StdRng::seed_from_u64(17);
    let model = ObservationModel::new(Mat::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0)));
    let px = random_gaussian(&mut rng, 3);
    let pw = random_gaussian(&mut rng, 3);
    let f = optimal_affine_estimator(&model, &px, &pw).unwrap();
    let base = mse_affine(&f, &model, &px, &pw).unwrap();
    let h = 1e-6;
    for i in 0..3 {
        for j in 0..3 {
            let mut bumped = f.clone();
            bumped.a[(i, j)] += h;
            let up = mse_affine(&bumped, &model, &px, &pw).unwrap();
            bumped.a[(i, j)] -= 2.0 * h;
            let down = mse_affine(&bumped, &model, &px, &pw).unwrap();
            let grad = (up - down) / (2.0 * h);
            assert!(grad.abs() <= 1e-5, "gradient at A[{i},{j}] is {grad}");
        }
        let mut bumped = f.clone();
        bumped.b[i] += h;
        let up = mse_affine(&bumped, &model, &px, &pw).unwrap();
        bumped.b[i] -= 2.0 * h;
        let down = mse_affine(&bumped, &model, &px, &pw).unwrap();
        let grad = (up - down) / (2.0 * h);
        assert!(grad.abs() <= 1e-5, "gradient at b[{i}] is {grad}");
    }
    assert!(base.is_finite());
}

#[test]
fn optimal_estimator_beats_random_competitors() {
    let mut rng = StdRng::seed_from_u64(23);
    for _ in 0..5 {
        let model =
            ObservationModel::new(Mat::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0)));
        let px = random_gaussian(&mut rng, 3);
        let pw = random_gaussian(&mut rng, 2);
        let best = optimal_affine_estimator(&model, &px, &pw).unwrap();
        let best_val = mse_affine(&best, &model, &px, &pw).unwrap();
        for _ in 0..100 {
            let rival = AffineEstimator::new(
                Mat::from_fn(3, 2, |_, _| rng.gen_range(-2.0..2.0)),
                (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            )
            .unwrap();
            let rival_val = mse_affine(&rival, &model, &px, &pw).unwrap();
            assert!(
                best_val <= rival_val + 1e-12,
                "competitor beat the optimum: {rival_val} < {best_val}"
            );
        }
    }
}
