#![allow(dead_code)]
//! Independent reference implementations used as test oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use t4z2_core::algebra::{Convention, Mat3, Mat4, Vec3, Vec4};

pub type Quat = [f64; 4];

pub fn qmul(a: &Quat, b: &Quat) -> Quat {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

pub fn qconj(a: &Quat) -> Quat {
    [a[0], -a[1], -a[2], -a[3]]
}

/// Plus-to-minus: zeta -> Im(conj(x) zeta x) / |x|^2; minus-to-plus: Im(x zeta conj(x)) / |x|^2.
pub fn rho_quaternion(x: &Vec4, convention: Convention) -> Mat3 {
    let q = [x[0], x[1], x[2], x[3]];
    let n2 = x.norm_squared();
    let mut m = Mat3::zeros();
    for i in 0..3 {
        let mut z = [0.0; 4];
        z[i + 1] = 1.0;
        let v = match convention {
            Convention::PlusToMinus => qmul(&qmul(&qconj(&q), &z), &q),
            Convention::MinusToPlus => qmul(&qmul(&q, &z), &qconj(&q)),
        };
        for j in 0..3 {
            m[(j, i)] = v[j + 1] / n2;
        }
    }
    m
}

pub fn traceless_sym(m: &Mat3) -> Mat3 {
    let s = (m + m.transpose()) / 2.0;
    s - Mat3::identity() * (s.trace() / 3.0)
}

fn cube(x: &Vec4, radius: i64) -> Vec<Vec4> {
    let r = radius as f64;
    let range = |c: f64| ((c / 2.0 - r).ceil() as i64)..=((c / 2.0 + r).floor() as i64);
    let mut out = Vec::new();
    for a0 in range(x[0]) {
        for a1 in range(x[1]) {
            for a2 in range(x[2]) {
                for a3 in range(x[3]) {
                    out.push(x - Vec4::new(a0 as f64, a1 as f64, a2 as f64, a3 as f64) * 2.0);
                }
            }
        }
    }
    out
}

/// pi_tr of sum 12 (rho zeta)(rho zeta')^T / |y|^6 over the centered cube, rho from quaternions.
pub fn direct_b(x: &Vec4, l: &Mat4, zeta: &Vec3, zeta2: &Vec3, convention: Convention, radius: i64) -> Mat3 {
    let mut s = Mat3::zeros();
    for w in cube(x, radius) {
        let y = l * w;
        let r = rho_quaternion(&y, convention);
        s += (r * zeta) * (r * zeta2).transpose() * (12.0 / y.norm_squared().powi(3));
    }
    traceless_sym(&s)
}

/// sum <y, K L^-1 y>/|y|^2 <pi_tr b_y(zeta_i, zeta_i) zeta_j, zeta_j>, y = L(x - 2a).
pub fn direct_weighted(x: &Vec4, l: &Mat4, k: &Mat4, zeta_i: &Vec3, zeta_j: &Vec3, radius: i64) -> f64 {
    let mut s = 0.0;
    for w in cube(x, radius) {
        let y = l * w;
        let r = rho_quaternion(&y, Convention::PlusToMinus);
        let u = r * zeta_i;
        let b = traceless_sym(&(u * u.transpose() * (12.0 / y.norm_squared().powi(3))));
        s += w.dot(&(l.transpose() * k * w)) / y.norm_squared() * zeta_j.dot(&(b * zeta_j));
    }
    s
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_vec3(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn rand_vec4(rng: &mut ChaCha8Rng) -> Vec4 {
    Vec4::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// A random lattice matrix near the identity with positive determinant.
pub fn rand_lattice(rng: &mut ChaCha8Rng, spread: f64) -> Mat4 {
    Mat4::identity() + Mat4::from_fn(|_, _| rng.gen_range(-spread..spread))
}

/// Special orthogonal matrix from the Householder QR of a random matrix.
pub fn rand_orthogonal4(rng: &mut ChaCha8Rng) -> Mat4 {
    let a = Mat4::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    let mut q = a.qr().q();
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

pub fn rand_rotation3(rng: &mut ChaCha8Rng) -> Mat3 {
    let a = rand_vec3(rng).normalize();
    let mut b = rand_vec3(rng);
    b = (b - a * a.dot(&b)).normalize();
    Mat3::from_columns(&[a, b, a.cross(&b)])
}

/// Coefficients of W^T w_i W in the constant basis of the given duality:
/// entry (k, i) is -tr(w_k W^T w_i W) / 4.
pub fn form_action(w: &Mat4, duality: t4z2_core::algebra::Orientation) -> Mat3 {
    use t4z2_core::algebra::two_form_matrix;
    let f = |i| *two_form_matrix(i, duality).unwrap().matrix();
    Mat3::from_fn(|k, i| -(f(k + 1) * w.transpose() * f(i + 1) * w).trace() / 4.0)
}

/// Generator version of `form_action` for W = exp(tA): entry (k, i) is
/// -tr(w_k [w_i, A]) / 4.
pub fn form_generator(a: &Mat4, duality: t4z2_core::algebra::Orientation) -> Mat3 {
    use t4z2_core::algebra::two_form_matrix;
    let f = |i| *two_form_matrix(i, duality).unwrap().matrix();
    Mat3::from_fn(|k, i| -(f(k + 1) * (f(i + 1) * a - a * f(i + 1))).trace() / 4.0)
}
