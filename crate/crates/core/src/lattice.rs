//! Truncated lattice sums over the coset x + 2Z^4 with rigorous tail bounds.
//!
//! Every kernel here is an even, homogeneous function of y = L(x - 2a). The sums
//! are accumulated as moments of y (degree 4 against |y|^-10, degree 6 against
//! |y|^-12 and degree 2 against |y|^-8), from which B_x^L, its derivative along
//! any direction of L and the weighted sum of the deformation lemma are
//! contractions with constant tensors.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::algebra::{form_products, pi_tr, rho, Convention, Mat3, Mat4, TracelessSym3, Vec3, Vec4};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lattice {
    matrix: Mat4,
    inverse: Mat4,
    sigma_min: f64,
    det: f64,
}

impl Lattice {
    pub fn new(matrix: Mat4) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("lattice matrix".into()));
        }
        let det = matrix.determinant();
        if !(det > 0.0) {
            return Err(Error::DegenerateLattice(det));
        }
        let inverse = matrix.try_inverse().ok_or(Error::DegenerateLattice(det))?;
        let sigma_min = matrix.singular_values().min();
        if !(sigma_min > 0.0) {
            return Err(Error::DegenerateLattice(det));
        }
        Ok(Lattice { matrix, inverse, sigma_min, det })
    }

    pub fn identity() -> Self {
        Self::new(Mat4::identity()).expect("identity is a lattice")
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.matrix
    }

    pub fn inverse(&self) -> &Mat4 {
        &self.inverse
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.matrix * s)
    }

    pub fn is_identity(&self) -> bool {
        self.matrix == Mat4::identity()
    }

    /// Maps a deformation K to the raw direction K L^-1.
    pub fn right_inverse_direction(&self, k: &Mat4) -> Mat4 {
        k * self.inverse
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SumParams {
    /// Truncation radius: indices a with |x/2 - a|_inf <= radius are summed.
    pub radius: u32,
    /// Tolerance on the bound for the excluded part of sum |L(x - 2a)|^-6.
    pub tail_tol: f64,
}

pub const DEFAULT_RADIUS: u32 = 40;
pub const DEFAULT_TAIL_TOL: f64 = 1e-4;

impl Default for SumParams {
    fn default() -> Self {
        SumParams { radius: DEFAULT_RADIUS, tail_tol: DEFAULT_TAIL_TOL }
    }
}

impl SumParams {
    pub fn with_radius(radius: u32) -> Self {
        SumParams { radius, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radius < 4 {
            return Err(Error::InvalidArgument(format!("truncation radius must be >= 4, got {}", self.radius)));
        }
        if !(self.tail_tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tail tolerance must be positive, got {}", self.tail_tol)));
        }
        Ok(())
    }
}

/// Upper bound for sum |v|^-6 over v in x + 2Z^4 with |v|_inf > 2R.
///
/// Each excluded v owns the cube v + [-1,1]^4, all lying in |y|_inf > 2R - 1.
/// For |v| >= 16 the cube average of |y|^-6 dominates |v|^-6 (the Laplacian
/// term 4|v|^-8 beats the fourth-order remainder 268.8 (|v|-2)^-10), giving
/// (1/16) * integral over |y| > 2R - 1 = pi^2 / (16 (2R-1)^2). Smaller radii use
/// |v|^-6 <= (|y| - 2)^-6 on the cube instead.
pub fn unit_tail_bound(radius: u32) -> f64 {
    let r = radius as f64;
    let c = 2.0 * r - 1.0;
    let rmin = 2.0 * r;
    if (rmin - 2.0).powi(10) / rmin.powi(8) >= 67.2 {
        PI * PI / (16.0 * c * c)
    } else {
        let u = c - 2.0;
        PI * PI / 8.0 * (0.5 / u.powi(2) + 2.0 / u.powi(3) + 3.0 / u.powi(4) + 1.6 / u.powi(5))
    }
}

pub fn scalar_tail_bound(lattice: &Lattice, radius: u32) -> f64 {
    unit_tail_bound(radius) / lattice.sigma_min.powi(6)
}

fn check_tail(lattice: &Lattice, params: &SumParams) -> Result<f64> {
    params.validate()?;
    let bound = scalar_tail_bound(lattice, params.radius);
    if bound > params.tail_tol {
        return Err(Error::TailTolerance { bound, tol: params.tail_tol, radius: params.radius });
    }
    Ok(bound)
}

fn index_range(x: f64, radius: u32) -> (i64, i64) {
    let r = radius as f64;
    ((x / 2.0 - r).ceil() as i64, (x / 2.0 + r).floor() as i64)
}

fn is_singular_offset(x: &Vec4) -> bool {
    x.iter().all(|v| (v / 2.0).fract() == 0.0)
}

pub fn b_term(x: &Vec4, zeta: &Vec3, zeta2: &Vec3, convention: Convention) -> Result<Mat3> {
    let r = rho(x, convention)?;
    let r2 = x.norm_squared();
    Ok(r.apply(zeta) * r.apply(zeta2).transpose() * (12.0 / (r2 * r2 * r2)))
}

const fn pair_index(a: usize, b: usize) -> usize {
    // position of (min, max) in the lexicographic list of sorted pairs
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let mut n = 0;
    let mut i = 0;
    while i < 4 {
        let mut j = i;
        while j < 4 {
            if i == a && j == b {
                return n;
            }
            n += 1;
            j += 1;
        }
        i += 1;
    }
    n
}

const PAIRS: [(usize, usize); 10] = {
    let mut out = [(0, 0); 10];
    let mut n = 0;
    let mut i = 0;
    while i < 4 {
        let mut j = i;
        while j < 4 {
            out[n] = (i, j);
            n += 1;
            j += 1;
        }
        i += 1;
    }
    out
};

/// Sorted quadruples as products of two sorted pairs.
const DEG4: [(usize, usize); 35] = {
    let mut out = [(0, 0); 35];
    let mut n = 0;
    let mut a = 0;
    while a < 4 {
        let mut b = a;
        while b < 4 {
            let mut c = b;
            while c < 4 {
                let mut d = c;
                while d < 4 {
                    out[n] = (pair_index(a, b), pair_index(c, d));
                    n += 1;
                    d += 1;
                }
                c += 1;
            }
            b += 1;
        }
        a += 1;
    }
    out
};

const fn quad_index(a: usize, b: usize, c: usize, d: usize) -> usize {
    let mut n = 0;
    let mut i = 0;
    while i < 4 {
        let mut j = i;
        while j < 4 {
            let mut k = j;
            while k < 4 {
                let mut l = k;
                while l < 4 {
                    if i == a && j == b && k == c && l == d {
                        return n;
                    }
                    n += 1;
                    l += 1;
                }
                k += 1;
            }
            j += 1;
        }
        i += 1;
    }
    n
}

/// Sorted sextuples as products of a sorted quadruple and a sorted pair.
const DEG6: [(usize, usize); 84] = {
    let mut out = [(0, 0); 84];
    let mut n = 0;
    let mut a = 0;
    while a < 4 {
        let mut b = a;
        while b < 4 {
            let mut c = b;
            while c < 4 {
                let mut d = c;
                while d < 4 {
                    let mut e = d;
                    while e < 4 {
                        let mut f = e;
                        while f < 4 {
                            out[n] = (quad_index(a, b, c, d), pair_index(e, f));
                            n += 1;
                            f += 1;
                        }
                        e += 1;
                    }
                    d += 1;
                }
                c += 1;
            }
            b += 1;
        }
        a += 1;
    }
    out
};

fn sorted_tuples(degree: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for a in start..4 {
            cur.push(a);
            rec(a, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, degree, &mut Vec::new(), &mut out);
    out
}

/// Maps every full index (a, b, ...) in base 4 to its sorted monomial.
struct Expansions {
    full2: Vec<usize>,
    full4: Vec<usize>,
    full6: Vec<usize>,
}

fn expansions() -> &'static Expansions {
    static T: OnceLock<Expansions> = OnceLock::new();
    T.get_or_init(|| {
        let expand = |degree: usize| -> Vec<usize> {
            let list = sorted_tuples(degree);
            (0..4usize.pow(degree as u32))
                .map(|mut code| {
                    let mut key = Vec::with_capacity(degree);
                    for _ in 0..degree {
                        key.push(code % 4);
                        code /= 4;
                    }
                    key.sort_unstable();
                    list.iter().position(|t| *t == key).expect("monomial present")
                })
                .collect()
        };
        Expansions { full2: expand(2), full4: expand(4), full6: expand(6) }
    })
}

#[derive(Clone)]
struct Accumulator {
    m2: [f64; 10],
    m4: [f64; 35],
    m6: [f64; 84],
    terms: usize,
}

impl Accumulator {
    fn new() -> Self {
        Accumulator { m2: [0.0; 10], m4: [0.0; 35], m6: [0.0; 84], terms: 0 }
    }

    fn merge(&mut self, o: &Accumulator, weight: f64) {
        self.m2.iter_mut().zip(&o.m2).for_each(|(a, b)| *a += weight * b);
        self.m4.iter_mut().zip(&o.m4).for_each(|(a, b)| *a += weight * b);
        self.m6.iter_mut().zip(&o.m6).for_each(|(a, b)| *a += weight * b);
        self.terms += if weight == 2.0 { 2 * o.terms } else { o.terms };
    }
}

fn accumulate_slab<const HIGH: bool>(w0: f64, x: &Vec4, lattice: &Lattice, ranges: &[(i64, i64)]) -> Accumulator {
    let l = lattice.matrix;
    let mut acc = Accumulator::new();
    for a1 in ranges[1].0..=ranges[1].1 {
        let w1 = x[1] - 2.0 * a1 as f64;
        for a2 in ranges[2].0..=ranges[2].1 {
            let w2 = x[2] - 2.0 * a2 as f64;
            let mut base = [0.0; 4];
            for (r, b) in base.iter_mut().enumerate() {
                *b = l[(r, 0)] * w0 + l[(r, 1)] * w1 + l[(r, 2)] * w2;
            }
            let col = [l[(0, 3)], l[(1, 3)], l[(2, 3)], l[(3, 3)]];
            for a3 in ranges[3].0..=ranges[3].1 {
                let w3 = x[3] - 2.0 * a3 as f64;
                let y = [base[0] + col[0] * w3, base[1] + col[1] * w3, base[2] + col[2] * w3, base[3] + col[3] * w3];
                let r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3];
                let inv = 1.0 / r2;
                let inv2 = inv * inv;
                let s2 = inv2 * inv2;
                let s4 = s2 * inv;
                let mut m2 = [0.0; 10];
                for k in 0..10 {
                    m2[k] = y[PAIRS[k].0] * y[PAIRS[k].1];
                }
                let mut m4 = [0.0; 35];
                for k in 0..35 {
                    m4[k] = m2[DEG4[k].0] * m2[DEG4[k].1];
                    acc.m4[k] += m4[k] * s4;
                }
                if HIGH {
                    let s6 = s4 * inv;
                    for k in 0..84 {
                        acc.m6[k] += m4[DEG6[k].0] * m2[DEG6[k].1] * s6;
                    }
                    for k in 0..10 {
                        acc.m2[k] += m2[k] * s2;
                    }
                }
            }
            acc.terms += (ranges[3].1 - ranges[3].0 + 1) as usize;
        }
    }
    acc
}

/// For integral x the coset is symmetric under y -> -y, so the slab at w0 and the
/// one at -w0 are mirror images: only w0 >= 0 is visited and positive slabs are
/// counted twice.
fn accumulate(x: &Vec4, lattice: &Lattice, radius: u32, high_order: bool) -> Accumulator {
    let ranges: Vec<(i64, i64)> = (0..4).map(|k| index_range(x[k], radius)).collect();
    let mirror = x.iter().all(|v| v.fract() == 0.0);
    let slabs: Vec<(f64, Accumulator)> = (ranges[0].0..=ranges[0].1)
        .into_par_iter()
        .filter_map(|a0| {
            let w0 = x[0] - 2.0 * a0 as f64;
            if mirror && w0 < 0.0 {
                return None;
            }
            let acc = if high_order {
                accumulate_slab::<true>(w0, x, lattice, &ranges)
            } else {
                accumulate_slab::<false>(w0, x, lattice, &ranges)
            };
            Some((if mirror && w0 > 0.0 { 2.0 } else { 1.0 }, acc))
        })
        .collect();
    let mut total = Accumulator::new();
    for (weight, s) in &slabs {
        total.merge(s, *weight);
    }
    total
}

/// 81-entry tensor T with T[((j*3+k)*3+i)*3+l] = sum 12 rho[j][i] rho[k][l] |y|^-6
/// (plus-to-minus rho); minus-to-plus uses T[i][l][j][k].
pub type Tensor81 = [f64; 81];

#[inline]
fn t_index(j: usize, k: usize, i: usize, l: usize) -> usize {
    ((j * 3 + k) * 3 + i) * 3 + l
}

/// N_ij[cd] = sum_ab A_ij[ab] M[abcd] for the 9 matrices A_ij.
fn half_contract(a: &[[Mat4; 3]; 3], m: &[f64]) -> [[[f64; 16]; 3]; 3] {
    let mut out = [[[0.0; 16]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let p = &a[i][j];
            for cd in 0..16 {
                let mut s = 0.0;
                for a_ in 0..4 {
                    for b in 0..4 {
                        s += p[(a_, b)] * m[(a_ * 4 + b) * 16 + cd];
                    }
                }
                out[i][j][cd] = s;
            }
        }
    }
    out
}

fn full_contract(n: &[[[f64; 16]; 3]; 3], b: &[[Mat4; 3]; 3], scale: f64) -> Tensor81 {
    let mut t = [0.0; 81];
    for j in 0..3 {
        for k in 0..3 {
            for i in 0..3 {
                for l in 0..3 {
                    let q = &b[l][k];
                    let mut s = 0.0;
                    for c in 0..4 {
                        for d in 0..4 {
                            s += n[i][j][c * 4 + d] * q[(c, d)];
                        }
                    }
                    t[t_index(j, k, i, l)] = scale * s;
                }
            }
        }
    }
    t
}

/// Raw (unsymmetrized) contraction sum_il T[j][k][i][l] zeta_i zeta2_l.
pub fn tensor_apply(t: &Tensor81, zeta: &Vec3, zeta2: &Vec3, convention: Convention) -> Mat3 {
    let mut m = Mat3::zeros();
    for j in 0..3 {
        for k in 0..3 {
            let mut s = 0.0;
            for i in 0..3 {
                for l in 0..3 {
                    let v = match convention {
                        Convention::PlusToMinus => t[t_index(j, k, i, l)],
                        Convention::MinusToPlus => t[t_index(i, l, j, k)],
                    };
                    s += v * zeta[i] * zeta2[l];
                }
            }
            m[(j, k)] = s;
        }
    }
    m
}

/// Moments of one coset x + 2Z^4 under a fixed lattice.
#[derive(Clone, Debug)]
pub struct CosetKernel {
    offset: Vec4,
    lattice: Lattice,
    radius: u32,
    m4: Vec<f64>,
    m6: Option<Vec<f64>>,
    m2: Option<[f64; 16]>,
    tensor: Tensor81,
    scalar_tail: f64,
    terms: usize,
}

impl CosetKernel {
    /// `high_order` also accumulates the moments needed for derivatives in L.
    pub fn compute(x: &Vec4, lattice: &Lattice, params: &SumParams, high_order: bool) -> Result<Self> {
        let scalar_tail = check_tail(lattice, params)?;
        if is_singular_offset(x) {
            return Err(Error::Singular([x[0], x[1], x[2], x[3]]));
        }
        let acc = accumulate(x, lattice, params.radius, high_order);
        let t = expansions();
        let m4: Vec<f64> = t.full4.iter().map(|&u| acc.m4[u]).collect();
        let (m6, m2) = if high_order {
            let mut m2 = [0.0; 16];
            for (dst, &u) in m2.iter_mut().zip(&t.full2) {
                *dst = acc.m2[u];
            }
            (Some(t.full6.iter().map(|&u| acc.m6[u]).collect()), Some(m2))
        } else {
            (None, None)
        };
        let p = form_products();
        let tensor = full_contract(&half_contract(p, &m4), p, 12.0);
        Ok(CosetKernel { offset: *x, lattice: *lattice, radius: params.radius, m4, m6, m2, tensor, scalar_tail, terms: acc.terms })
    }

    pub fn offset(&self) -> &Vec4 {
        &self.offset
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn terms(&self) -> usize {
        self.terms
    }

    pub fn tensor(&self) -> &Tensor81 {
        &self.tensor
    }

    pub fn has_high_order(&self) -> bool {
        self.m6.is_some()
    }

    /// Bound on sum over excluded indices of |L(x - 2a)|^-6.
    pub fn scalar_tail(&self) -> f64 {
        self.scalar_tail
    }

    pub fn apply(&self, zeta: &Vec3, zeta2: &Vec3, convention: Convention) -> TracelessSym3 {
        pi_tr(&tensor_apply(&self.tensor, zeta, zeta2, convention))
    }

    /// Bound on the Frobenius norm of the omitted part of `apply`.
    pub fn frobenius_tail(&self, zeta: &Vec3, zeta2: &Vec3) -> f64 {
        12.0 * zeta.norm() * zeta2.norm() * self.scalar_tail
    }

    fn high(&self) -> Result<(&[f64], &[f64; 16])> {
        match (&self.m6, &self.m2) {
            (Some(m6), Some(m2)) => Ok((m6, m2)),
            _ => Err(Error::InvalidArgument("kernel was computed without derivative moments".into())),
        }
    }

    /// Exact derivative of the tensor along L -> L + t dL (truncation set fixed).
    pub fn derivative_tensor(&self, dl: &Mat4) -> Result<Tensor81> {
        let (m6, _) = self.high()?;
        let k = self.lattice.right_inverse_direction(dl);
        let ks = (k + k.transpose()) * 0.5;
        let p = form_products();
        let mut s = [[Mat4::zeros(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                s[i][j] = p[i][j] * k + k.transpose() * p[i][j];
            }
        }
        let mut m4k = vec![0.0; 256];
        for (abcd, dst) in m4k.iter_mut().enumerate() {
            let mut acc = 0.0;
            for e in 0..4 {
                for f in 0..4 {
                    acc += ks[(e, f)] * m6[abcd * 16 + e * 4 + f];
                }
            }
            *dst = acc;
        }
        let np = half_contract(p, &self.m4);
        let ns = half_contract(&s, &self.m4);
        let a = full_contract(&ns, p, 12.0);
        let b = full_contract(&np, &s, 12.0);
        let c = full_contract(&half_contract(p, &m4k), p, -120.0);
        let mut out = [0.0; 81];
        for n in 0..81 {
            out[n] = a[n] + b[n] + c[n];
        }
        Ok(out)
    }

    /// Bound on the Frobenius norm of the omitted part of the L-derivative.
    pub fn derivative_frobenius_tail(&self, dl: &Mat4, zeta: &Vec3, zeta2: &Vec3) -> f64 {
        let k = self.lattice.right_inverse_direction(dl);
        10.0 * k.norm() * self.frobenius_tail(zeta, zeta2)
    }

    /// sum_a <y, K y>/|y|^2 <pi_tr b_y(zeta_i, zeta_i) zeta_j, zeta_j> with y = L(x - 2a)
    /// and K = dL L^-1; the plus-to-minus pairing is used (the value is the
    /// same for the transposed pairing with the roles of i and j exchanged).
    pub fn weighted_sum(&self, dl: &Mat4, zeta_i: &Vec3, zeta_j: &Vec3) -> Result<f64> {
        let (m6, m2) = self.high()?;
        let k = self.lattice.right_inverse_direction(dl);
        let ks = (k + k.transpose()) * 0.5;
        let p = form_products();
        let mut a = Mat4::zeros();
        for i in 0..3 {
            for j in 0..3 {
                a += p[i][j] * (zeta_i[i] * zeta_j[j]);
            }
        }
        let mut sextic = 0.0;
        for i1 in 0..4 {
            for i2 in 0..4 {
                let a12 = a[(i1, i2)];
                if a12 == 0.0 {
                    continue;
                }
                for i3 in 0..4 {
                    for i4 in 0..4 {
                        let a34 = a12 * a[(i3, i4)];
                        if a34 == 0.0 {
                            continue;
                        }
                        let base = (((i1 * 4 + i2) * 4 + i3) * 4 + i4) * 16;
                        for e in 0..4 {
                            for f in 0..4 {
                                sextic += a34 * ks[(e, f)] * m6[base + e * 4 + f];
                            }
                        }
                    }
                }
            }
        }
        let quad: f64 = (0..16).map(|n| ks[(n / 4, n % 4)] * m2[n]).sum();
        Ok(12.0 * (sextic - zeta_i.norm_squared() * zeta_j.norm_squared() / 3.0 * quad))
    }

    pub fn weighted_sum_tail(&self, dl: &Mat4, zeta_i: &Vec3, zeta_j: &Vec3) -> f64 {
        let k = self.lattice.right_inverse_direction(dl);
        8.0 * k.norm() * zeta_i.norm_squared() * zeta_j.norm_squared() * self.scalar_tail
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeSum {
    pub value: TracelessSym3,
    /// Bound on the Frobenius norm of the omitted terms.
    pub tail: f64,
    pub terms: usize,
}

pub fn lattice_sum_b(
    x: &Vec4,
    lattice: &Lattice,
    zeta: &Vec3,
    zeta2: &Vec3,
    convention: Convention,
    params: &SumParams,
) -> Result<LatticeSum> {
    let k = CosetKernel::compute(x, lattice, params, false)?;
    Ok(LatticeSum { value: k.apply(zeta, zeta2, convention), tail: k.frobenius_tail(zeta, zeta2), terms: k.terms })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarSum {
    pub value: f64,
    pub tail: f64,
    pub terms: usize,
}

/// sum over non-excluded a of |L(x - 2a)|^-6.
pub fn epstein6(x: &Vec4, lattice: &Lattice, excluded: &[[i64; 4]], params: &SumParams) -> Result<ScalarSum> {
    let tail = check_tail(lattice, params)?;
    let l = lattice.matrix;
    let ranges: Vec<(i64, i64)> = (0..4).map(|k| index_range(x[k], params.radius)).collect();
    let slabs: Vec<Result<(f64, usize)>> = (ranges[0].0..=ranges[0].1)
        .into_par_iter()
        .map(|a0| {
            let mut s = 0.0;
            let mut n = 0;
            for a1 in ranges[1].0..=ranges[1].1 {
                for a2 in ranges[2].0..=ranges[2].1 {
                    for a3 in ranges[3].0..=ranges[3].1 {
                        let a = [a0, a1, a2, a3];
                        if excluded.contains(&a) {
                            continue;
                        }
                        let w = Vec4::new(
                            x[0] - 2.0 * a0 as f64,
                            x[1] - 2.0 * a1 as f64,
                            x[2] - 2.0 * a2 as f64,
                            x[3] - 2.0 * a3 as f64,
                        );
                        let r2 = (l * w).norm_squared();
                        if r2 == 0.0 {
                            return Err(Error::Singular([x[0], x[1], x[2], x[3]]));
                        }
                        s += 1.0 / (r2 * r2 * r2);
                        n += 1;
                    }
                }
            }
            Ok((s, n))
        })
        .collect();
    let mut value = 0.0;
    let mut terms = 0;
    for s in slabs {
        let (v, n) = s?;
        value += v;
        terms += n;
    }
    Ok(ScalarSum { value, tail, terms })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeSum {
    pub value: TracelessSym3,
    pub tail: f64,
    /// Relative change of the central difference when the step is halved.
    pub richardson_change: f64,
}

pub const RICHARDSON_TOL: f64 = 1e-6;

/// Central difference of `lattice_sum_b` along L -> L + t dL, checked by halving
/// the step and returned Richardson-extrapolated.
#[allow(clippy::too_many_arguments)]
pub fn dl_lattice_sum(
    x: &Vec4,
    lattice: &Lattice,
    dl: &Mat4,
    zeta: &Vec3,
    zeta2: &Vec3,
    convention: Convention,
    params: &SumParams,
    step: Option<f64>,
) -> Result<DerivativeSum> {
    let dn = dl.norm();
    if dn == 0.0 {
        return Ok(DerivativeSum { value: TracelessSym3::zero(), tail: 0.0, richardson_change: 0.0 });
    }
    let h = step.unwrap_or(1e-5 * lattice.matrix.norm() / dn);
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {h}")));
    }
    let eval = |t: f64| -> Result<Mat3> {
        let lt = Lattice::new(lattice.matrix + dl * t)?;
        Ok(lattice_sum_b(x, &lt, zeta, zeta2, convention, params)?.value.into_inner())
    };
    let d1 = (eval(h)? - eval(-h)?) / (2.0 * h);
    let d2 = (eval(h / 2.0)? - eval(-h / 2.0)?) / h;
    let base = lattice_sum_b(x, lattice, zeta, zeta2, convention, params)?;
    let scale = d2.norm().max(base.value.norm() * dn / lattice.matrix.norm());
    let change = if scale == 0.0 { 0.0 } else { (d1 - d2).norm() / scale };
    if change > RICHARDSON_TOL {
        return Err(Error::Richardson(change));
    }
    let k = CosetKernel::compute(x, lattice, params, false)?;
    Ok(DerivativeSum {
        value: pi_tr(&((d2 * 4.0 - d1) / 3.0)),
        tail: k.derivative_frobenius_tail(dl, zeta, zeta2),
        richardson_change: change,
    })
}

/// Exact derivative of `lattice_sum_b` along dL, from the moment kernel.
pub fn dl_lattice_sum_analytic(
    x: &Vec4,
    lattice: &Lattice,
    dl: &Mat4,
    zeta: &Vec3,
    zeta2: &Vec3,
    convention: Convention,
    params: &SumParams,
) -> Result<DerivativeSum> {
    let k = CosetKernel::compute(x, lattice, params, true)?;
    let t = k.derivative_tensor(dl)?;
    Ok(DerivativeSum {
        value: pi_tr(&tensor_apply(&t, zeta, zeta2, convention)),
        tail: k.derivative_frobenius_tail(dl, zeta, zeta2),
        richardson_change: 0.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarWithTail {
    pub value: f64,
    pub tail: f64,
}

/// Weighted lattice sum of the torus-deformation lemma for the pair (i, j).
#[allow(clippy::too_many_arguments)]
pub fn closed_form_dk(
    i: &Vec4,
    j: &Vec4,
    lattice: &Lattice,
    k: &Mat4,
    zeta_i: &Vec3,
    zeta_j: &Vec3,
    params: &SumParams,
) -> Result<ScalarWithTail> {
    let kernel = CosetKernel::compute(&(i - j), lattice, params, true)?;
    Ok(ScalarWithTail {
        value: kernel.weighted_sum(k, zeta_i, zeta_j)?,
        tail: kernel.weighted_sum_tail(k, zeta_i, zeta_j),
    })
}
