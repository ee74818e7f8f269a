//! Constant two-forms on R^4, the rotations rho_x between self-dual and
//! anti-self-dual forms, and the asymptotic Eguchi-Hanson curvature terms.

use std::sync::OnceLock;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Vec4 = Vector4<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat4 = Matrix4<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Orientation {
    Positive,
    Negative,
}

impl Orientation {
    pub fn opposite(self) -> Self {
        match self {
            Orientation::Positive => Orientation::Negative,
            Orientation::Negative => Orientation::Positive,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Orientation::Positive => "+",
            Orientation::Negative => "-",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "+" => Some(Orientation::Positive),
            "-" | "\u{2212}" => Some(Orientation::Negative),
            _ => None,
        }
    }

    /// Convention of rho for curvature induced *at* a point of this orientation
    /// by sources of the opposite one.
    pub fn induced_convention(self) -> Convention {
        match self {
            Orientation::Negative => Convention::PlusToMinus,
            Orientation::Positive => Convention::MinusToPlus,
        }
    }

    /// Convention used by a gluing of this orientation for its own asymptotic curvature.
    pub fn source_convention(self) -> Convention {
        self.opposite().induced_convention()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Convention {
    PlusToMinus,
    MinusToPlus,
}

impl Convention {
    pub fn transposed(self) -> Self {
        match self {
            Convention::PlusToMinus => Convention::MinusToPlus,
            Convention::MinusToPlus => Convention::PlusToMinus,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AntiSym4(Mat4);

impl AntiSym4 {
    pub fn new(m: Mat4) -> Result<Self> {
        if (m + m.transpose()).amax() > 1e-12 * (1.0 + m.amax()) {
            return Err(Error::InvalidArgument("matrix is not antisymmetric".into()));
        }
        Ok(AntiSym4(m))
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation3 {
    matrix: Mat3,
    convention: Convention,
}

impl Rotation3 {
    pub fn matrix(&self) -> &Mat3 {
        &self.matrix
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.matrix * v
    }

    pub fn transposed(&self) -> Rotation3 {
        Rotation3 { matrix: self.matrix.transpose(), convention: self.convention.transposed() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracelessSym3(Mat3);

impl TracelessSym3 {
    pub fn zero() -> Self {
        TracelessSym3(Mat3::zeros())
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn into_inner(self) -> Mat3 {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// Coordinates in an orthonormal basis of traceless symmetric matrices,
    /// so that the Euclidean norm of the result equals the Frobenius norm.
    pub fn coordinates(&self) -> [f64; 5] {
        let m = &self.0;
        let r2 = std::f64::consts::SQRT_2;
        [
            (m[(0, 0)] - m[(1, 1)]) / r2,
            (m[(0, 0)] + m[(1, 1)] - 2.0 * m[(2, 2)]) / 6f64.sqrt(),
            r2 * m[(0, 1)],
            r2 * m[(0, 2)],
            r2 * m[(1, 2)],
        ]
    }
}

impl std::ops::Add for TracelessSym3 {
    type Output = TracelessSym3;
    fn add(self, rhs: Self) -> Self {
        TracelessSym3(self.0 + rhs.0)
    }
}

impl std::ops::AddAssign for TracelessSym3 {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl std::ops::Mul<f64> for TracelessSym3 {
    type Output = TracelessSym3;
    fn mul(self, s: f64) -> Self {
        TracelessSym3(self.0 * s)
    }
}

// (dx_1 ^ dx_{i+1}, complementary pair) for i = 1, 2, 3 (zero-based coordinates)
const FORM_PAIRS: [((usize, usize), (usize, usize)); 3] =
    [((0, 1), (2, 3)), ((0, 2), (3, 1)), ((0, 3), (1, 2))];

fn elementary(p: usize, q: usize) -> Mat4 {
    let mut m = Mat4::zeros();
    m[(p, q)] = 1.0;
    m[(q, p)] = -1.0;
    m
}

/// Matrix of omega_index^{+-}. The anti-self-dual forms carry an overall sign
/// (complementary pair minus dx_1 ^ dx_{i+1}) so that rho(e_1) is the identity.
pub fn two_form_matrix(index: usize, duality: Orientation) -> Result<AntiSym4> {
    if !(1..=3).contains(&index) {
        return Err(Error::FormIndex(index));
    }
    let ((a, b), (c, d)) = FORM_PAIRS[index - 1];
    let m = match duality {
        Orientation::Positive => elementary(a, b) + elementary(c, d),
        Orientation::Negative => elementary(c, d) - elementary(a, b),
    };
    Ok(AntiSym4(m))
}

fn form(index0: usize, duality: Orientation) -> Mat4 {
    *two_form_matrix(index0 + 1, duality).expect("index in range").matrix()
}

/// Two-form with coefficients zeta in the basis (omega_i^duality).
pub fn two_form(zeta: &Vec3, duality: Orientation) -> Mat4 {
    (0..3).fold(Mat4::zeros(), |acc, i| acc + form(i, duality) * zeta[i])
}

/// P[i][j] = omega_i^+ o omega_j^-, symmetric; rho_x[j][i] = x^T P[i][j] x / |x|^2.
pub(crate) fn form_products() -> &'static [[Mat4; 3]; 3] {
    static TABLE: OnceLock<[[Mat4; 3]; 3]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[Mat4::zeros(); 3]; 3];
        for (i, row) in t.iter_mut().enumerate() {
            for (j, p) in row.iter_mut().enumerate() {
                let m = form(i, Orientation::Positive) * form(j, Orientation::Negative);
                *p = (m + m.transpose()) * 0.5;
            }
        }
        t
    })
}

pub fn rho(x: &Vec4, convention: Convention) -> Result<Rotation3> {
    let r2 = x.norm_squared();
    if r2 == 0.0 || !r2.is_finite() {
        return Err(Error::ZeroVector("rho requires x != 0"));
    }
    let p = form_products();
    let mut m = Mat3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            m[(j, i)] = x.dot(&(p[i][j] * x)) / r2;
        }
    }
    let matrix = match convention {
        Convention::PlusToMinus => m,
        Convention::MinusToPlus => m.transpose(),
    };
    Ok(Rotation3 { matrix, convention })
}

pub fn rho_scale_invariance_check(x: &Vec4, s: f64) -> bool {
    if s == 0.0 {
        return false;
    }
    let (Ok(a), Ok(b), Ok(c)) = (
        rho(x, Convention::PlusToMinus),
        rho(&(x * s), Convention::PlusToMinus),
        rho(&(-x), Convention::PlusToMinus),
    ) else {
        return false;
    };
    (a.matrix - b.matrix).amax() <= 1e-12 && (a.matrix - c.matrix).amax() <= 1e-12
}

/// Symmetrize, then remove the trace.
pub fn pi_tr(m: &Mat3) -> TracelessSym3 {
    let s = (m + m.transpose()) * 0.5;
    let t = s.trace() / 3.0;
    TracelessSym3(s - Mat3::identity() * t)
}

/// Leading curvature term 12 pi_tr(rho_x zeta (x) rho_x zeta) / r^6 of a gluing of
/// the given orientation, on the forms of the opposite duality.
pub fn h4_curvature(zeta: &Vec3, orientation: Orientation, x_direction: &Vec4, r: f64) -> Result<TracelessSym3> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    let u = rho(x_direction, orientation.source_convention())?.apply(zeta);
    Ok(pi_tr(&(u * u.transpose() * 12.0)) * r.powi(-6))
}

pub fn eh_radial_coefficients(zeta_norm: f64, r: f64) -> Result<(f64, f64)> {
    if !(zeta_norm > 0.0) {
        return Err(Error::InvalidArgument(format!("|zeta| must be positive, got {zeta_norm}")));
    }
    if !(r >= 0.0) {
        return Err(Error::InvalidArgument(format!("r must be non-negative, got {r}")));
    }
    let r4 = r.powi(4);
    let z2 = zeta_norm * zeta_norm;
    Ok(((r4 / (z2 + r4)).sqrt(), (z2 + r4).sqrt()))
}

/// The r^-4 term of the Eguchi-Hanson metric at x, as a symmetric 4x4 matrix.
pub fn h4_field(zeta: &Vec3, orientation: Orientation, x: &Vec4) -> Result<Mat4> {
    let r2 = x.norm_squared();
    let u = rho(x, orientation.source_convention())?.apply(zeta);
    let product = match orientation {
        Orientation::Positive => two_form(&u, Orientation::Negative) * two_form(zeta, Orientation::Positive),
        Orientation::Negative => two_form(zeta, Orientation::Negative) * two_form(&u, Orientation::Positive),
    };
    Ok(product * (-0.5 / (r2 * r2)))
}

/// Curvature changes (times r^6) induced by the three infinitesimal deformations
/// of the Eguchi-Hanson metric, in the anti-self-dual basis.
pub const INFINITESIMAL_VARIATION_CURVATURES: [[[f64; 3]; 3]; 3] = [
    [[8.0, 0.0, 0.0], [0.0, -4.0, 0.0], [0.0, 0.0, -4.0]],
    [[0.0, 4.0, 0.0], [4.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
    [[0.0, 0.0, 4.0], [0.0, 0.0, 0.0], [4.0, 0.0, 0.0]],
];

pub fn infinitesimal_variation_curvature(k: usize, r: f64) -> Result<Mat3> {
    if !(1..=3).contains(&k) {
        return Err(Error::FormIndex(k));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    let c = &INFINITESIMAL_VARIATION_CURVATURES[k - 1];
    Ok(Mat3::from_fn(|i, j| c[i][j]) * r.powi(-6))
}
