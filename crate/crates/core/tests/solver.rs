mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use t4z2_core::algebra::{Orientation, Vec3};
use t4z2_core::config::*;
use t4z2_core::lattice::{Lattice, SumParams};
use t4z2_core::obstruction::{ObstructionParams, ObstructionSystem};
use t4z2_core::solver::*;

const F1: ([f64; 4], [f64; 4], [f64; 4]) = ([1.0, 1.0, -1.0, -1.0], [1.0, -1.0, 1.0, -1.0], [1.0, -1.0, -1.0, 1.0]);

fn params(radius: u32) -> ObstructionParams {
    ObstructionParams { sums: SumParams { radius, tail_tol: 1e6 }, ..ObstructionParams::default() }
}

fn family1(frame: FamilyFrame) -> Configuration {
    chessboard_family(&F1.0, &F1.1, &F1.2, &Lattice::identity(), frame).unwrap()
}

#[test]
fn option_validation() {
    let c = family1(FamilyFrame::Literal);
    let p = params(6);
    let bad = [
        SolveOptions { tolerance: 0.0, ..SolveOptions::default() },
        SolveOptions { initial_damping: -1.0, ..SolveOptions::default() },
        SolveOptions { damping_increase: 1.0, ..SolveOptions::default() },
        SolveOptions { max_iterations: 0, ..SolveOptions::default() },
        SolveOptions { step: f64::NAN, ..SolveOptions::default() },
        SolveOptions { mask: FreeMask::only_points(&[]), ..SolveOptions::default() },
    ];
    for o in bad {
        assert!(minimize(&c, Suite::Full, &o, &p).is_err());
    }
    let partial = Configuration::from_points(Lattice::identity(), [(SingularPoint::origin(), GluingDatum::new(Orientation::Positive, Vec3::x()).unwrap())]).unwrap();
    assert!(minimize(&partial, Suite::Full, &SolveOptions::default(), &p).is_err());
}

#[test]
fn euler_identity_for_global_scaling() {
    let mut g = rng(50);
    let c = perturb(&family1(FamilyFrame::Literal), 0.3, &mut g).unwrap();
    let p = params(6);
    let opts = SolveOptions { gauge: GaugeMode::None, ..SolveOptions::default() };
    let (j, change) = residual_jacobian(&c, Suite::Full, &opts, &p).unwrap();
    assert!(change < 1e-5, "{change}");
    let theta = DVector::from_iterator(48, SingularPoint::all().flat_map(|q| {
        let z = c.require(q).unwrap().zeta;
        [z[0], z[1], z[2]]
    }));
    let jt = &j * theta;
    let r = ObstructionSystem::for_configuration(&c, &p, true).unwrap().residual_vector(&c, Suite::Full).unwrap();
    for (k, v) in r.iter().enumerate() {
        let degree = if k < 80 { 2.0 } else { 4.0 };
        assert!((jt[k] - degree * v).abs() < 1e-6 * (1.0 + v.abs()), "row {k}: {} vs {}", jt[k], degree * v);
    }
}

#[test]
fn converged_start_terminates_immediately() {
    let mut g = rng(51);
    let p = params(8);
    let start = perturb(&family1(FamilyFrame::Transported), 0.05, &mut g).unwrap();
    let first = minimize(&start, Suite::Full, &SolveOptions::default(), &p).unwrap();
    assert_eq!(first.termination, Termination::Converged);
    assert!(first.residual_norm < 1e-6);
    assert!(first.history.windows(2).all(|w| w[1] < w[0]));
    let again = minimize(&first.configuration, Suite::Full, &SolveOptions::default(), &p).unwrap();
    assert_eq!(again.iterations, 0);
    assert_eq!(again.termination, Termination::Converged);
    let repeat = minimize(&start, Suite::Full, &SolveOptions::default(), &p).unwrap();
    assert_eq!(repeat, first);
}

#[test]
fn gauge_fixing_preserves_designated_norms() {
    let mut g = rng(52);
    let p = params(8);
    let start = perturb(&family1(FamilyFrame::Transported), 0.05, &mut g).unwrap();
    let r = minimize(&start, Suite::Full, &SolveOptions::default(), &p).unwrap();
    assert_eq!(r.gauge_constraints, 2);
    for o in [Orientation::Positive, Orientation::Negative] {
        let q = start.points_with(o)[0];
        let before = start.require(q).unwrap().zeta.norm_squared();
        let after = r.configuration.require(q).unwrap().zeta.norm_squared();
        assert!((before - after).abs() < 1e-6);
    }
    let fixed = minimize(&start, Suite::Full, &SolveOptions { gauge: GaugeMode::FixPoint, ..SolveOptions::default() }, &p).unwrap();
    assert_eq!(fixed.free_parameters, 42);
    let q = start.points_with(Orientation::Positive)[0];
    assert_eq!(fixed.configuration.require(q).unwrap().zeta, start.require(q).unwrap().zeta);
}

#[test]
fn single_positive_stalls_above_floor() {
    let plus = SingularPoint::unit(1).unwrap();
    let mut g = rng(53);
    let pts: Vec<_> = SingularPoint::all()
        .map(|q| {
            let o = if q == plus { Orientation::Positive } else { Orientation::Negative };
            (q, GluingDatum::new(o, rand_vec3(&mut g) + Vec3::new(0.0, 0.0, 0.01)).unwrap())
        })
        .collect();
    let c = Configuration::from_points(Lattice::identity(), pts).unwrap().with_zeta(plus, Vec3::new(0.6, 0.0, 0.8)).unwrap();
    let opts = SolveOptions { mask: FreeMask::only_points(&[plus]), max_iterations: 50, ..SolveOptions::default() };
    let r = minimize(&c, Suite::Full, &opts, &params(12)).unwrap();
    assert_ne!(r.termination, Termination::Converged);
    let zp = r.configuration.require(plus).unwrap().zeta.norm_squared();
    assert!(r.residual_norm >= 6.0 * zp, "{}", r.residual_norm);
}

#[test]
fn rank_of_known_matrices() {
    let m = DMatrix::from_row_slice(3, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 1e-9, 0.0]);
    let r = rank_estimate(&m, RANK_THRESHOLD);
    assert_eq!(r.rank, 2);
    assert_eq!(r.near_null, 2);
    assert_eq!(r.singular_values[0], 2.0);
}

#[test]
fn nonorthogonal_family_warns_and_fails() {
    let e = [1.0, 0.5, 0.2, 0.1];
    let v = verify_family(&e, &e, &e, &Lattice::identity(), Suite::Full, &params(8)).unwrap();
    assert!(v.warning.is_some());
    assert!(v.report.max_abs_curvature > 1e-3);
    let ok = verify_family_in(&F1.0, &F1.1, &F1.2, &Lattice::identity(), FamilyFrame::Transported, Suite::Full, &params(8), None).unwrap();
    assert!(ok.warning.is_none());
    assert!(ok.report.max_normalized_curvature < 1e-8);
    assert!(verify_family(&[0.0; 4], &[0.0; 4], &[0.0; 4], &Lattice::identity(), Suite::Full, &params(8)).is_err());
}

#[test]
fn shared_system_matches_fresh_system() {
    let p = params(8);
    let sys = chessboard_system(&Lattice::identity(), &p).unwrap();
    let a = verify_family_in(&F1.0, &F1.1, &F1.2, &Lattice::identity(), FamilyFrame::Transported, Suite::Full, &p, Some(&sys)).unwrap();
    let b = verify_family_in(&F1.0, &F1.1, &F1.2, &Lattice::identity(), FamilyFrame::Transported, Suite::Full, &p, None).unwrap();
    assert_eq!(a.report.values(), b.report.values());
}

#[test]
fn search_is_deterministic() {
    let p = params(8);
    let opts = SolveOptions { max_iterations: 20, ..SolveOptions::default() };
    let init = SearchInit::NearFamily { noise: 0.02 };
    let a = search(SearchPattern::Chessboard, init, &Lattice::identity(), 7, 3, Suite::Full, &opts, &p).unwrap();
    let b = search(SearchPattern::Chessboard, init, &Lattice::identity(), 7, 3, Suite::Full, &opts, &p).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.best.to_json().unwrap(), b.best.to_json().unwrap());
    assert!(a.best.residual_norm < 1e-6, "{:?}", a.norms);
    let c0 = search_initial(SearchPattern::Chessboard, SearchInit::Gaussian, &Lattice::identity(), 7, 0).unwrap();
    let c1 = search_initial(SearchPattern::Chessboard, SearchInit::Gaussian, &Lattice::identity(), 7, 1).unwrap();
    assert_ne!(c0, c1);
    assert_eq!(c0, search_initial(SearchPattern::Chessboard, SearchInit::Gaussian, &Lattice::identity(), 7, 0).unwrap());
    assert!(search(SearchPattern::Chessboard, init, &Lattice::identity(), 7, 0, Suite::Full, &opts, &p).is_err());
}

#[test]
fn single_positive_search_stays_above_floor() {
    let p = params(12);
    let opts = SolveOptions { max_iterations: 30, ..SolveOptions::default() };
    let out = search(SearchPattern::SinglePositive, SearchInit::Gaussian, &Lattice::identity(), 3, 2, Suite::Full, &opts, &p).unwrap();
    let plus = SingularPoint::unit(1).unwrap();
    let zp = out.best.configuration.require(plus).unwrap().zeta.norm_squared();
    assert!(out.best.residual_norm >= 6.0 * zp);
}

#[test]
fn solve_result_outputs() {
    let mut g = rng(54);
    let start = perturb(&family1(FamilyFrame::Transported), 0.05, &mut g).unwrap();
    let r = minimize(&start, Suite::Full, &SolveOptions { max_iterations: 3, ..SolveOptions::default() }, &params(8)).unwrap();
    let json: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert_eq!(json["history"].as_array().unwrap().len(), r.history.len());
    assert!(json["configuration"]["points"].is_array());
    let mut csv = Vec::new();
    r.write_history_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), r.history.len() + 1);
}
