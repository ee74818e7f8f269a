mod common;

use approx::assert_abs_diff_eq;
use common::*;
use t4z2_core::algebra::{Mat3, Vec3};
use t4z2_core::point::*;

fn diag(a: f64, b: f64, c: f64) -> CurvatureBlock {
    CurvatureBlock::ricci_flat(Mat3::from_diagonal(&Vec3::new(a, b, c))).unwrap()
}

fn assert_orthonormal_right_handed(f: &Frame3) {
    let [a, b, c] = *f.vectors();
    let m = Mat3::from_columns(&[a, b, c]);
    assert!((m.transpose() * m - Mat3::identity()).amax() < 1e-12);
    assert!((m.determinant() - 1.0).abs() < 1e-12);
}

#[test]
fn frame_examples() {
    let f = complete_frame(&Vec3::x()).unwrap();
    assert_eq!(*f.vectors(), [Vec3::x(), Vec3::y(), Vec3::z()]);
    let f = complete_frame(&Vec3::new(0.0, 2.0, 0.0)).unwrap();
    assert_eq!(f.vectors()[0], Vec3::y());
    assert_orthonormal_right_handed(&f);
    let z = Vec3::new(1.0, 1.0, 1.0) / 3f64.sqrt();
    let f = complete_frame(&z).unwrap();
    assert!((f.vectors()[0] - z).amax() < 1e-15);
    // Gram-Schmidt of e1 (tie broken toward the lowest index) against z.
    let gs = (Vec3::x() - z * z.x).normalize();
    assert!((f.vectors()[1] - gs).amax() < 1e-15);
    assert_orthonormal_right_handed(&f);
    assert!(complete_frame(&Vec3::zeros()).is_err());
}

#[test]
fn lambda_examples() {
    assert_eq!(lambda_vector(&diag(0.0, 2.0, -2.0), &Vec3::x()).unwrap(), [0.0, 0.0, 0.0]);
    assert_eq!(lambda_vector(&diag(1.0, 2.0, -3.0), &Vec3::x()).unwrap(), [1.0, 0.0, 0.0]);
    let mut g = rng(1);
    for _ in 0..20 {
        let l = lambda_vector(&diag(1.0, 1.0, 1.0), &rand_vec3(&mut g)).unwrap();
        assert_abs_diff_eq!(l[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(l[1], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(l[2], 0.0, epsilon = 1e-14);
    }
}

#[test]
fn mu1_examples() {
    assert_eq!(mu1(&diag(0.0, 2.0, 3.0), &Vec3::x()).unwrap(), 6.0);
    assert_eq!(mu1(&diag(0.0, 1.0, -1.0), &Vec3::x()).unwrap(), -1.0);
    assert_eq!(mu1(&diag(0.0, 0.0, 0.0), &Vec3::new(0.3, 0.1, 2.0)).unwrap(), 0.0);
    assert!(mu1(&diag(0.0, 1.0, -1.0), &Vec3::zeros()).is_err());
}

#[test]
fn kernel_examples() {
    assert_eq!(classify_kernel(&diag(0.0, -1.5, -1.5), 1e-10), KernelClass::Dim1);
    assert_eq!(classify_kernel(&diag(0.0, 0.0, 0.0), 1e-10), KernelClass::Dim3);
    assert_eq!(classify_kernel(&diag(1.0, 2.0, 3.0), 1e-10), KernelClass::Invertible);
    assert_eq!(classify_kernel(&diag(0.0, 0.0, 3.0), 1e-10), KernelClass::Dim2);
}

#[test]
fn kahler_examples() {
    let b = CurvatureBlock::new(Mat3::from_diagonal(&Vec3::new(0.0, 0.0, 5.0)), 5.0).unwrap();
    assert!(kahler_form_test(&b, 1e-10));
    assert!(!kahler_form_test(&diag(0.0, 1.0, -1.0), 1e-10));
    let mut g = rng(2);
    for _ in 0..20 {
        let q = rand_rotation3(&mut g);
        let m = q * Mat3::from_diagonal(&Vec3::new(0.0, 0.0, 5.0)) * q.transpose();
        let m = (m + m.transpose()) * 0.5;
        assert!(kahler_form_test(&CurvatureBlock::new(m, 5.0).unwrap(), 1e-10));
    }
}

#[test]
fn rejects_asymmetric_block() {
    let mut m = Mat3::zeros();
    m[(0, 1)] = 1.0;
    assert!(CurvatureBlock::ricci_flat(m).is_err());
}

fn random_sym(g: &mut rand_chacha::ChaCha8Rng) -> Mat3 {
    let a = Mat3::from_fn(|_, _| rand::Rng::gen_range(g, -2.0..2.0));
    a + a.transpose()
}

#[test]
fn frame_invariance() {
    let mut g = rng(3);
    for _ in 0..1000 {
        let r = CurvatureBlock::ricci_flat(random_sym(&mut g)).unwrap();
        let zeta = rand_vec3(&mut g);
        let [e1, e2, e3] = *complete_frame(&zeta).unwrap().vectors();
        let t: f64 = rand::Rng::gen_range(&mut g, 0.0..std::f64::consts::TAU);
        let (u, v) = (e2 * t.cos() + e3 * t.sin(), e3 * t.cos() - e2 * t.sin());
        let m = r.matrix();
        let rotated_mu = u.dot(&(m * u)) * v.dot(&(m * v)) - u.dot(&(m * v)).powi(2);
        let rotated_pair = ((m * e1).dot(&u).powi(2) + (m * e1).dot(&v).powi(2)).sqrt();
        let l = lambda_vector(&r, &zeta).unwrap();
        assert!((mu1(&r, &zeta).unwrap() - rotated_mu).abs() < 1e-12);
        assert!(((l[1] * l[1] + l[2] * l[2]).sqrt() - rotated_pair).abs() < 1e-12);
        assert!((l[0] - e1.dot(&(m * e1))).abs() < 1e-12);
    }
}

/// Traceless R with R zeta_hat = 0, built in a random frame.
fn block_with_vanishing_lambda(g: &mut rand_chacha::ChaCha8Rng, zeta: &Vec3, zero_block: bool) -> Mat3 {
    let [_, e2, e3] = *complete_frame(zeta).unwrap().vectors();
    let (a, b) = if zero_block { (0.0, 0.0) } else { (rand::Rng::gen_range(g, -2.0..2.0), rand::Rng::gen_range(g, -2.0..2.0)) };
    e2 * e2.transpose() * a - e3 * e3.transpose() * a + (e2 * e3.transpose() + e3 * e2.transpose()) * b
}

#[test]
fn mu1_sign_property() {
    let mut g = rng(4);
    for n in 0..1000 {
        let zeta = rand_vec3(&mut g);
        let m = block_with_vanishing_lambda(&mut g, &zeta, n % 10 == 0);
        let r = CurvatureBlock::ricci_flat(m).unwrap();
        let l = lambda_vector(&r, &zeta).unwrap();
        assert!(l.iter().all(|v| v.abs() < 1e-12));
        let mu = mu1(&r, &zeta).unwrap();
        assert!(mu <= 1e-12);
        assert_eq!(mu.abs() < 1e-12, m.amax() < 1e-12);
    }
}

#[test]
fn kahler_with_zero_lambda_is_dim3() {
    let mut g = rng(5);
    for n in 0..200 {
        let m = if n % 4 == 0 { Mat3::zeros() } else { random_sym(&mut g) };
        let r = CurvatureBlock::ricci_flat(m).unwrap();
        assert_eq!(kahler_form_test(&r, 1e-9), classify_kernel(&r, 1e-9) == KernelClass::Dim3);
    }
}

#[test]
fn lambda_vanishes_everywhere_only_for_zero() {
    let mut g = rng(6);
    let zetas: Vec<Vec3> = (0..30).map(|_| rand_vec3(&mut g)).collect();
    let all_zero = |r: &CurvatureBlock| zetas.iter().all(|z| lambda_vector(r, z).unwrap().iter().all(|v| v.abs() < 1e-12));
    assert!(all_zero(&diag(0.0, 0.0, 0.0)));
    for _ in 0..50 {
        assert!(!all_zero(&CurvatureBlock::ricci_flat(random_sym(&mut g)).unwrap()));
    }
}
