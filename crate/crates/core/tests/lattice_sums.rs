mod common;

use common::*;
use proptest::prelude::*;
use t4z2_core::algebra::{Convention, Mat3, Mat4, Vec3, Vec4};
use t4z2_core::lattice::*;
use t4z2_core::Error;

const CONVENTIONS: [Convention; 2] = [Convention::PlusToMinus, Convention::MinusToPlus];

fn loose(radius: u32) -> SumParams {
    SumParams { radius, tail_tol: 1e6 }
}

fn offset(g: &mut rand_chacha::ChaCha8Rng) -> Vec4 {
    // Away from 2Z^4 so no term is singular.
    Vec4::new(1.0, 0.0, 0.0, 0.0) + rand_vec4(g) * 0.3
}

#[test]
fn b_term_at_unit_vector() {
    let b = b_term(&Vec4::x(), &Vec3::x(), &Vec3::x(), Convention::PlusToMinus).unwrap();
    assert!((b - Mat3::from_diagonal(&Vec3::new(12.0, 0.0, 0.0))).amax() < 1e-14);
    let p = t4z2_core::algebra::pi_tr(&b);
    assert!((p.matrix() - Mat3::from_diagonal(&Vec3::new(8.0, -4.0, -4.0))).amax() < 1e-14);
    assert!(b_term(&Vec4::zeros(), &Vec3::x(), &Vec3::x(), Convention::PlusToMinus).is_err());
}

#[test]
fn lattice_validation() {
    assert!(matches!(Lattice::new(Mat4::zeros()), Err(Error::DegenerateLattice(_))));
    let mut reflect = Mat4::identity();
    reflect[(0, 0)] = -1.0;
    assert!(Lattice::new(reflect).is_err());
    let mut nan = Mat4::identity();
    nan[(1, 2)] = f64::NAN;
    assert!(Lattice::new(nan).is_err());
    assert_eq!(Lattice::identity().sigma_min(), 1.0);
}

#[test]
fn params_validation() {
    assert!(SumParams::with_radius(3).validate().is_err());
    assert!(SumParams { radius: 10, tail_tol: 0.0 }.validate().is_err());
    let strict = SumParams { radius: 4, tail_tol: 1e-9 };
    assert!(matches!(
        CosetKernel::compute(&Vec4::x(), &Lattice::identity(), &strict, false),
        Err(Error::TailTolerance { .. })
    ));
}

#[test]
fn singular_offsets_rejected() {
    let p = loose(5);
    let l = Lattice::identity();
    assert!(matches!(CosetKernel::compute(&Vec4::zeros(), &l, &p, false), Err(Error::Singular(_))));
    assert!(CosetKernel::compute(&Vec4::new(2.0, -4.0, 0.0, 6.0), &l, &p, false).is_err());
    assert!(epstein6(&Vec4::zeros(), &l, &[], &p).is_err());
}

#[test]
fn epstein_matches_naive_sum() {
    let p = loose(6);
    let x = Vec4::x();
    let s = epstein6(&x, &Lattice::identity(), &[[0, 0, 0, 0], [1, 0, 0, 0]], &p).unwrap();
    let mut naive = 0.0;
    let mut n = 0;
    for a0 in -6i64..=6 {
        for a1 in -6i64..=6 {
            for a2 in -6i64..=6 {
                for a3 in -6i64..=6 {
                    if (a0 == 0 || a0 == 1) && a1 == 0 && a2 == 0 && a3 == 0 {
                        continue;
                    }
                    if (0.5 - a0 as f64).abs() > 6.0 {
                        continue;
                    }
                    let v = [1.0 - 2.0 * a0 as f64, -2.0 * a1 as f64, -2.0 * a2 as f64, -2.0 * a3 as f64];
                    naive += v.iter().map(|c| c * c).sum::<f64>().powi(-3);
                    n += 1;
                }
            }
        }
    }
    assert_eq!(s.terms, n);
    assert!((s.value - naive).abs() < 1e-13);
}

#[test]
fn kernel_matches_direct_quaternion_sum() {
    let mut g = rng(11);
    for _ in 0..6 {
        let x = offset(&mut g);
        let l = rand_lattice(&mut g, 0.15);
        let lat = Lattice::new(l).unwrap();
        let k = CosetKernel::compute(&x, &lat, &loose(5), false).unwrap();
        let (z, z2) = (rand_vec3(&mut g), rand_vec3(&mut g));
        for c in CONVENTIONS {
            let fast = k.apply(&z, &z2, c).into_inner();
            let slow = direct_b(&x, &l, &z, &z2, c, 5);
            assert!((fast - slow).amax() < 1e-12 * (1.0 + slow.amax()), "{}", (fast - slow).amax());
        }
    }
}

#[test]
fn tail_bound_covers_radius_change() {
    let mut g = rng(12);
    for _ in 0..3 {
        let x = offset(&mut g);
        let lat = Lattice::new(rand_lattice(&mut g, 0.1)).unwrap();
        let (z, z2) = (rand_vec3(&mut g), rand_vec3(&mut g));
        let small = lattice_sum_b(&x, &lat, &z, &z2, Convention::PlusToMinus, &loose(6)).unwrap();
        let large = lattice_sum_b(&x, &lat, &z, &z2, Convention::PlusToMinus, &loose(14)).unwrap();
        let change = (small.value.into_inner() - large.value.into_inner()).norm();
        assert!(change < small.tail, "change {change} tail {}", small.tail);
        assert!(large.tail < small.tail);
    }
}

#[test]
fn unit_tail_bound_decreases() {
    let mut last = f64::INFINITY;
    for r in 4..60 {
        let t = unit_tail_bound(r);
        assert!(t > 0.0 && t < last);
        last = t;
    }
    assert!(unit_tail_bound(40) < 1e-4);
}

#[test]
fn analytic_derivative_matches_central_difference() {
    let mut g = rng(13);
    for _ in 0..4 {
        let x = offset(&mut g);
        let lat = Lattice::new(rand_lattice(&mut g, 0.1)).unwrap();
        let dl = Mat4::from_fn(|_, _| rand::Rng::gen_range(&mut g, -1.0..1.0));
        let (z, z2) = (rand_vec3(&mut g), rand_vec3(&mut g));
        for c in CONVENTIONS {
            let a = dl_lattice_sum_analytic(&x, &lat, &dl, &z, &z2, c, &loose(6)).unwrap();
            let f = dl_lattice_sum(&x, &lat, &dl, &z, &z2, c, &loose(6), None).unwrap();
            let diff = (a.value.into_inner() - f.value.into_inner()).amax();
            assert!(diff < 1e-7 * (1.0 + a.value.norm()), "diff {diff}");
            assert!(f.richardson_change <= RICHARDSON_TOL);
        }
    }
}

#[test]
fn derivative_along_scaling_is_minus_six() {
    let mut g = rng(14);
    let x = offset(&mut g);
    let lat = Lattice::new(rand_lattice(&mut g, 0.1)).unwrap();
    let (z, z2) = (rand_vec3(&mut g), rand_vec3(&mut g));
    let p = loose(6);
    let b = lattice_sum_b(&x, &lat, &z, &z2, Convention::PlusToMinus, &p).unwrap().value.into_inner();
    let d = dl_lattice_sum_analytic(&x, &lat, lat.matrix(), &z, &z2, Convention::PlusToMinus, &p).unwrap();
    assert!((d.value.into_inner() + b * 6.0).amax() < 1e-12 * (1.0 + b.amax()));
}

#[test]
fn weighted_sum_matches_direct_sum() {
    let mut g = rng(15);
    for _ in 0..4 {
        let x = offset(&mut g);
        let l = rand_lattice(&mut g, 0.1);
        let lat = Lattice::new(l).unwrap();
        let dl = Mat4::from_fn(|_, _| rand::Rng::gen_range(&mut g, -1.0..1.0));
        let (zi, zj) = (rand_vec3(&mut g), rand_vec3(&mut g));
        let k = CosetKernel::compute(&x, &lat, &loose(5), true).unwrap();
        let fast = k.weighted_sum(&dl, &zi, &zj).unwrap();
        let slow = direct_weighted(&x, &l, &dl, &zi, &zj, 5);
        assert!((fast - slow).abs() < 1e-11 * (1.0 + slow.abs()), "{fast} vs {slow}");
    }
}

#[test]
fn closed_form_requires_distinct_cosets() {
    let p = loose(5);
    let r = closed_form_dk(&Vec4::x(), &Vec4::x(), &Lattice::identity(), &Mat4::identity(), &Vec3::x(), &Vec3::x(), &p);
    assert!(r.is_err());
    let ok = closed_form_dk(&Vec4::x(), &Vec4::zeros(), &Lattice::identity(), &Mat4::identity(), &Vec3::x(), &Vec3::x(), &p).unwrap();
    assert!(ok.value.is_finite() && ok.tail > 0.0);
}

#[test]
fn derivative_requires_high_order_moments() {
    let k = CosetKernel::compute(&Vec4::x(), &Lattice::identity(), &loose(5), false).unwrap();
    assert!(k.derivative_tensor(&Mat4::identity()).is_err());
    assert!(k.weighted_sum(&Mat4::identity(), &Vec3::x(), &Vec3::x()).is_err());
}

fn arb_case() -> impl Strategy<Value = (Vec4, Mat4, Vec3, Vec3)> {
    (
        prop::array::uniform4(-0.3f64..0.3),
        prop::array::uniform16(-0.15f64..0.15),
        prop::array::uniform3(-2.0f64..2.0),
        prop::array::uniform3(-2.0f64..2.0),
    )
        .prop_map(|(x, l, z, z2)| {
            (
                Vec4::new(1.0 + x[0], x[1], x[2], x[3]),
                Mat4::identity() + Mat4::from_row_slice(&l),
                Vec3::new(z[0], z[1], z[2]),
                Vec3::new(z2[0], z2[1], z2[2]),
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, rng_algorithm: prop::test_runner::RngAlgorithm::ChaCha, ..ProptestConfig::default() })]

    #[test]
    fn periodic_even_symmetric_traceless((x, l, z, z2) in arb_case(), k in 0usize..4, shift in -2i32..=2) {
        let lat = Lattice::new(l).unwrap();
        let p = loose(5);
        for c in CONVENTIONS {
            let b = lattice_sum_b(&x, &lat, &z, &z2, c, &p).unwrap().value.into_inner();
            let scale = 1e-12 * (1.0 + b.amax());
            let mut shifted = x;
            shifted[k] += 2.0 * shift as f64;
            let bs = lattice_sum_b(&shifted, &lat, &z, &z2, c, &p).unwrap().value.into_inner();
            prop_assert!((b - bs).amax() < scale);
            let bn = lattice_sum_b(&(-x), &lat, &z, &z2, c, &p).unwrap().value.into_inner();
            prop_assert!((b - bn).amax() < scale);
            prop_assert!((b - b.transpose()).amax() < scale);
            prop_assert!(b.trace().abs() < scale);
            let bsw = lattice_sum_b(&x, &lat, &z2, &z, c, &p).unwrap().value.into_inner();
            prop_assert!((b - bsw).amax() < scale);
        }
    }

    #[test]
    fn homogeneous_of_degree_minus_six((x, l, z, z2) in arb_case(), s in 0.5f64..3.0) {
        let p = loose(5);
        let b = lattice_sum_b(&x, &Lattice::new(l).unwrap(), &z, &z2, Convention::PlusToMinus, &p).unwrap();
        let bs = lattice_sum_b(&x, &Lattice::new(l * s).unwrap(), &z, &z2, Convention::PlusToMinus, &p).unwrap();
        let b = b.value.into_inner();
        prop_assert!((bs.value.into_inner() * s.powi(6) - b).amax() < 1e-12 * (1.0 + b.amax()));
    }

    #[test]
    fn bilinear_in_zeta((x, l, z, z2) in arb_case(), t in -3.0f64..3.0) {
        let k = CosetKernel::compute(&x, &Lattice::new(l).unwrap(), &loose(5), false).unwrap();
        let b = k.apply(&z, &z2, Convention::MinusToPlus).into_inner();
        let bt = k.apply(&(z * t), &z2, Convention::MinusToPlus).into_inner();
        prop_assert!((bt - b * t).amax() < 1e-12 * (1.0 + b.amax() * t.abs()));
    }
}
