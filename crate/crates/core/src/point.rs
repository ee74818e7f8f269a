//! Obstruction functionals evaluated on a single curvature block.

use nalgebra::SymmetricEigen;

use crate::algebra::{Mat3, Vec3};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvatureBlock {
    r: Mat3,
    lambda_einstein: f64,
}

impl CurvatureBlock {
    pub fn new(r: Mat3, lambda_einstein: f64) -> Result<Self> {
        if (r - r.transpose()).amax() > 1e-12 * (1.0 + r.amax()) {
            return Err(Error::InvalidArgument("curvature block is not symmetric".into()));
        }
        Ok(CurvatureBlock { r: (r + r.transpose()) * 0.5, lambda_einstein })
    }

    pub fn ricci_flat(r: Mat3) -> Result<Self> {
        Self::new(r, 0.0)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.r
    }

    pub fn lambda_einstein(&self) -> f64 {
        self.lambda_einstein
    }

    /// Eigenvalues in increasing order.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let mut e: Vec<f64> = SymmetricEigen::new(self.r).eigenvalues.iter().copied().collect();
        e.sort_by(|a, b| a.total_cmp(b));
        [e[0], e[1], e[2]]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame3(pub [Vec3; 3]);

impl Frame3 {
    pub fn vectors(&self) -> &[Vec3; 3] {
        &self.0
    }
}

pub fn complete_frame(zeta: &Vec3) -> Result<Frame3> {
    let n = zeta.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::ZeroVector("frame completion requires zeta != 0"));
    }
    let e1 = zeta / n;
    let mut axis = 0;
    for k in 1..3 {
        if e1[k].abs() < e1[axis].abs() {
            axis = k;
        }
    }
    let mut a = Vec3::zeros();
    a[axis] = 1.0;
    let e2 = (a - e1 * e1.dot(&a)).normalize();
    let e3 = e1.cross(&e2);
    Ok(Frame3([e1, e2, e3]))
}

pub fn lambda_vector(r: &CurvatureBlock, zeta: &Vec3) -> Result<[f64; 3]> {
    let f = complete_frame(zeta)?;
    let rz = r.r * f.0[0];
    Ok([rz.dot(&f.0[0]), rz.dot(&f.0[1]), rz.dot(&f.0[2])])
}

/// Determinant of R restricted to the plane orthogonal to zeta.
pub fn mu1(r: &CurvatureBlock, zeta: &Vec3) -> Result<f64> {
    let f = complete_frame(zeta)?;
    let [_, u, v] = f.0;
    let a = u.dot(&(r.r * u));
    let b = u.dot(&(r.r * v));
    let c = v.dot(&(r.r * v));
    Ok(a * c - b * b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelClass {
    Invertible,
    Dim1,
    Dim2,
    Dim3,
}

impl KernelClass {
    pub fn dimension(self) -> usize {
        match self {
            KernelClass::Invertible => 0,
            KernelClass::Dim1 => 1,
            KernelClass::Dim2 => 2,
            KernelClass::Dim3 => 3,
        }
    }
}

pub fn classify_kernel(r: &CurvatureBlock, tol: f64) -> KernelClass {
    let scale = r.r.norm();
    if scale == 0.0 {
        return KernelClass::Dim3;
    }
    let small = r.eigenvalues().iter().filter(|e| e.abs() <= tol * scale).count();
    match small {
        0 => KernelClass::Invertible,
        1 => KernelClass::Dim1,
        2 => KernelClass::Dim2,
        _ => KernelClass::Dim3,
    }
}

/// Whether the eigenvalues of R are {0, 0, Lambda} up to tol * (|R| + |Lambda|).
pub fn kahler_form_test(r: &CurvatureBlock, tol: f64) -> bool {
    let lambda = r.lambda_einstein;
    let mut target = [0.0, 0.0, lambda];
    target.sort_by(|a, b| a.total_cmp(b));
    let e = r.eigenvalues();
    let bound = tol * (r.r.norm() + lambda.abs());
    e.iter().zip(target.iter()).all(|(a, b)| (a - b).abs() <= bound)
}
