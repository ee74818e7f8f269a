//! Damped least squares over gluing parameters, verification of the chessboard
//! family and the a/b constants of the chessboard curvature matrices.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{Convention, Mat3, Orientation, Vec3};
use crate::config::{
    chessboard_family, config_to_string, family_conditions, Configuration, FamilyFrame, GluingDatum, SingularPoint, Suite,
};
use crate::error::{Error, Result};
use crate::lattice::{CosetKernel, Lattice, SumParams};
use crate::obstruction::{ObstructionParams, ObstructionReport, ObstructionSystem};

/// Which entries vary: zeta[p][k] for the 16 points and L[r][c].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreeMask {
    pub zeta: [[bool; 3]; 16],
    pub lattice: [[bool; 4]; 4],
}

impl FreeMask {
    pub fn all_zeta() -> Self {
        FreeMask { zeta: [[true; 3]; 16], lattice: [[false; 4]; 4] }
    }

    pub fn everything() -> Self {
        FreeMask { zeta: [[true; 3]; 16], lattice: [[true; 4]; 4] }
    }

    pub fn only_points(points: &[SingularPoint]) -> Self {
        let mut m = FreeMask { zeta: [[false; 3]; 16], lattice: [[false; 4]; 4] };
        for p in points {
            m.zeta[p.index()] = [true; 3];
        }
        m
    }

    pub fn lattice_free(&self) -> bool {
        self.lattice.iter().flatten().any(|b| *b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GaugeMode {
    None,
    /// One constraint |zeta_p|^2 = const per orientation, at the first free point.
    FixScale,
    /// Hold the first free point of each orientation fixed (scale and direction).
    FixPoint,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub mask: FreeMask,
    pub max_iterations: usize,
    pub initial_damping: f64,
    pub damping_increase: f64,
    pub damping_decrease: f64,
    pub max_damping: f64,
    pub tolerance: f64,
    pub gauge: GaugeMode,
    /// Relative finite-difference step: h = step * (1 + |theta|).
    pub step: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            mask: FreeMask::all_zeta(),
            max_iterations: 200,
            initial_damping: 1e-3,
            damping_increase: 4.0,
            damping_decrease: 3.0,
            max_damping: 1e12,
            tolerance: 1e-6,
            gauge: GaugeMode::FixScale,
            step: 1e-6,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
            }
        };
        pos(self.initial_damping, "initial damping")?;
        pos(self.max_damping, "max damping")?;
        pos(self.tolerance, "tolerance")?;
        pos(self.step, "finite-difference step")?;
        if !(self.damping_increase > 1.0 && self.damping_decrease > 1.0) {
            return Err(Error::InvalidArgument("damping factors must exceed 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxIterations,
    StalledDamping,
    SmallStep,
}

#[derive(Clone, Debug, PartialEq)]
enum Param {
    Zeta(SingularPoint, usize),
    Lattice(usize, usize),
}

/// The free parameters of a problem and the map back to configurations.
struct Problem<'a> {
    base: Configuration,
    suite: Suite,
    params: &'a ObstructionParams,
    free: Vec<Param>,
    gauge_points: Vec<(SingularPoint, f64)>,
    fixed_system: Option<ObstructionSystem>,
}

impl<'a> Problem<'a> {
    fn new(config: &Configuration, suite: Suite, options: &SolveOptions, params: &'a ObstructionParams) -> Result<Self> {
        options.validate()?;
        config.require_total()?;
        let mut mask = options.mask;
        let mut gauge_points = Vec::new();
        if options.gauge != GaugeMode::None {
            for o in [Orientation::Positive, Orientation::Negative] {
                let first = config.points_with(o).into_iter().find(|p| mask.zeta[p.index()].iter().all(|b| *b));
                if let Some(p) = first {
                    match options.gauge {
                        GaugeMode::FixScale => gauge_points.push((p, config.require(p)?.zeta.norm_squared())),
                        GaugeMode::FixPoint => mask.zeta[p.index()] = [false; 3],
                        GaugeMode::None => {}
                    }
                }
            }
        }
        let mut free = Vec::new();
        for p in SingularPoint::all() {
            for k in 0..3 {
                if mask.zeta[p.index()][k] {
                    free.push(Param::Zeta(p, k));
                }
            }
        }
        for r in 0..4 {
            for c in 0..4 {
                if mask.lattice[r][c] {
                    free.push(Param::Lattice(r, c));
                }
            }
        }
        if free.is_empty() {
            return Err(Error::InvalidArgument("no free parameters".into()));
        }
        let fixed_system = if mask.lattice_free() { None } else { Some(ObstructionSystem::for_configuration(config, params, true)?) };
        Ok(Problem { base: config.clone(), suite, params, free, gauge_points, fixed_system })
    }

    fn theta(&self, config: &Configuration) -> DVector<f64> {
        DVector::from_iterator(
            self.free.len(),
            self.free.iter().map(|p| match p {
                Param::Zeta(q, k) => config.datum(*q).map(|d| d.zeta[*k]).unwrap_or(0.0),
                Param::Lattice(r, c) => config.lattice().matrix()[(*r, *c)],
            }),
        )
    }

    fn configuration(&self, theta: &DVector<f64>) -> Result<Configuration> {
        let mut l = *self.base.lattice().matrix();
        let mut zetas: Vec<Option<GluingDatum>> = SingularPoint::all().map(|p| self.base.datum(p).copied()).collect();
        for (v, p) in theta.iter().zip(&self.free) {
            match p {
                Param::Zeta(q, k) => {
                    if let Some(d) = zetas[q.index()].as_mut() {
                        d.zeta[*k] = *v;
                    }
                }
                Param::Lattice(r, c) => l[(*r, *c)] = *v,
            }
        }
        let gluing: [Option<GluingDatum>; 16] = std::array::from_fn(|i| zetas[i]);
        for d in gluing.iter().flatten() {
            if d.zeta.norm() == 0.0 {
                return Err(Error::ZeroVector("zeta collapsed to zero"));
            }
        }
        Configuration::new(Lattice::new(l)?, gluing)
    }

    fn residual_of(&self, config: &Configuration) -> Result<DVector<f64>> {
        let mut r = match &self.fixed_system {
            Some(s) => s.residual_vector(config, self.suite)?,
            None => ObstructionSystem::for_configuration(config, self.params, true)?.residual_vector(config, self.suite)?,
        };
        for (p, s0) in &self.gauge_points {
            r.push(config.require(*p)?.zeta.norm_squared() - s0);
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("residual".into()));
        }
        Ok(DVector::from_vec(r))
    }

    fn residual(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        self.residual_of(&self.configuration(theta)?)
    }

    fn column(&self, theta: &DVector<f64>, k: usize, h: f64) -> Result<DVector<f64>> {
        let mut plus = theta.clone();
        let mut minus = theta.clone();
        plus[k] += h;
        minus[k] -= h;
        Ok((self.residual(&plus)? - self.residual(&minus)?) / (2.0 * h))
    }

    fn jacobian(&self, theta: &DVector<f64>, step: f64) -> Result<(DMatrix<f64>, f64)> {
        let cols: Vec<Result<DVector<f64>>> = (0..theta.len())
            .into_par_iter()
            .map(|k| self.column(theta, k, step * (1.0 + theta[k].abs())))
            .collect();
        let cols = cols.into_iter().collect::<Result<Vec<_>>>()?;
        let j = DMatrix::from_columns(&cols);
        // spot check on the column of largest norm
        let (k, _) = cols.iter().enumerate().map(|(k, c)| (k, c.norm())).fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        let half = self.column(theta, k, 0.5 * step * (1.0 + theta[k].abs()))?;
        let scale = cols[k].norm();
        let change = if scale == 0.0 { 0.0 } else { (&half - &cols[k]).norm() / scale };
        Ok((j, change))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankEstimate {
    pub singular_values: Vec<f64>,
    pub threshold: f64,
    pub rank: usize,
    /// Free directions with singular value below the threshold, including
    /// directions beyond the number of rows.
    pub near_null: usize,
}

pub const RANK_THRESHOLD: f64 = 1e-6;

/// Relative threshold: singular values below threshold * sigma_max count as null.
pub fn rank_estimate(j: &DMatrix<f64>, threshold: f64) -> RankEstimate {
    let mut sv: Vec<f64> = j.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let smax = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|s| **s > threshold * smax).count();
    RankEstimate { near_null: j.ncols() - rank, singular_values: sv, threshold, rank }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub configuration: Configuration,
    pub history: Vec<f64>,
    pub termination: Termination,
    pub iterations: usize,
    pub residual_norm: f64,
    pub rank: RankEstimate,
    pub free_parameters: usize,
    pub gauge_constraints: usize,
    pub richardson_change: f64,
}

#[derive(Serialize)]
struct SolveDocument<'a> {
    termination: Termination,
    iterations: usize,
    residual_norm: f64,
    free_parameters: usize,
    gauge_constraints: usize,
    richardson_change: f64,
    rank: &'a RankEstimate,
    history: &'a [f64],
    configuration: serde_json::Value,
}

impl SolveResult {
    pub fn to_json(&self) -> Result<String> {
        let doc = SolveDocument {
            termination: self.termination,
            iterations: self.iterations,
            residual_norm: self.residual_norm,
            free_parameters: self.free_parameters,
            gauge_constraints: self.gauge_constraints,
            richardson_change: self.richardson_change,
            rank: &self.rank,
            history: &self.history,
            configuration: serde_json::from_str(&config_to_string(&self.configuration)?)?,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn write_history_csv(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["step", "residual_norm"])?;
        for (k, v) in self.history.iter().enumerate() {
            w.write_record([k.to_string(), format!("{v:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Jacobian of the suite residuals (plus gauge rows) with respect to the free
/// parameters, and the relative change of a spot-checked column at half step.
pub fn residual_jacobian(
    config: &Configuration,
    suite: Suite,
    options: &SolveOptions,
    params: &ObstructionParams,
) -> Result<(DMatrix<f64>, f64)> {
    let problem = Problem::new(config, suite, options, params)?;
    problem.jacobian(&problem.theta(config), options.step)
}

pub fn minimize(config0: &Configuration, suite: Suite, options: &SolveOptions, params: &ObstructionParams) -> Result<SolveResult> {
    let problem = Problem::new(config0, suite, options, params)?;
    let mut theta = problem.theta(config0);
    let mut r = problem.residual(&theta)?;
    let mut history = vec![r.norm()];
    let mut mu = options.initial_damping;
    let mut iterations = 0;
    let mut richardson: f64 = 0.0;
    let termination = loop {
        if r.norm() < options.tolerance {
            break Termination::Converged;
        }
        if iterations >= options.max_iterations {
            break Termination::MaxIterations;
        }
        iterations += 1;
        let (j, change) = problem.jacobian(&theta, options.step)?;
        richardson = richardson.max(change);
        let jt = j.transpose();
        let a = &jt * &j;
        let g = &jt * &r;
        let dmax = a.diagonal().max().max(f64::MIN_POSITIVE);
        let mut accepted = false;
        let mut tiny = false;
        while mu <= options.max_damping {
            let mut m = a.clone();
            for k in 0..m.nrows() {
                m[(k, k)] += mu * a[(k, k)].max(1e-12 * dmax);
            }
            let Some(ch) = m.cholesky() else {
                mu *= options.damping_increase;
                continue;
            };
            let delta = ch.solve(&(-&g));
            if delta.norm() <= 1e-15 * (1.0 + theta.norm()) {
                tiny = true;
                break;
            }
            let candidate = &theta + &delta;
            match problem.residual(&candidate) {
                Ok(rc) if rc.norm() < r.norm() => {
                    theta = candidate;
                    r = rc;
                    mu /= options.damping_decrease;
                    accepted = true;
                    break;
                }
                _ => mu *= options.damping_increase,
            }
        }
        if accepted {
            history.push(r.norm());
        } else if tiny {
            break Termination::SmallStep;
        } else {
            break Termination::StalledDamping;
        }
    };
    let (j, change) = problem.jacobian(&theta, options.step)?;
    Ok(SolveResult {
        configuration: problem.configuration(&theta)?,
        residual_norm: r.norm(),
        history,
        termination,
        iterations,
        rank: rank_estimate(&j, RANK_THRESHOLD),
        free_parameters: problem.free.len(),
        gauge_constraints: problem.gauge_points.len(),
        richardson_change: richardson.max(change),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FamilyVerification {
    pub report: ObstructionReport,
    pub conditions: [f64; 6],
    /// Set when the coefficients do not satisfy the orthogonality conditions.
    pub warning: Option<String>,
}

/// Chessboard configuration with (x_k, y_k, z_k) at e_k and its translate by e_1,
/// copied to opposite points, evaluated on the given suite.
pub fn verify_family(
    x: &[f64; 4],
    y: &[f64; 4],
    z: &[f64; 4],
    lattice: &Lattice,
    suite: Suite,
    params: &ObstructionParams,
) -> Result<FamilyVerification> {
    verify_family_in(x, y, z, lattice, FamilyFrame::Literal, suite, params, None)
}

/// As `verify_family`, with an explicit frame and optionally a prepared system
/// (which must carry derivative moments for every odd class).
#[allow(clippy::too_many_arguments)]
pub fn verify_family_in(
    x: &[f64; 4],
    y: &[f64; 4],
    z: &[f64; 4],
    lattice: &Lattice,
    frame: FamilyFrame,
    suite: Suite,
    params: &ObstructionParams,
    system: Option<&ObstructionSystem>,
) -> Result<FamilyVerification> {
    let config = chessboard_family(x, y, z, lattice, frame)?;
    let conditions = family_conditions(x, y, z);
    let scale = x.iter().chain(y).chain(z).map(|v| v * v).sum::<f64>().max(1.0);
    let warning = conditions
        .iter()
        .any(|c| c.abs() > 1e-10 * scale)
        .then(|| format!("coefficients violate the orthogonality conditions: {conditions:?}"));
    let report = match system {
        Some(s) => s.assemble_suite(&config, suite)?,
        None => ObstructionSystem::for_configuration(&config, params, true)?.assemble_suite(&config, suite)?,
    };
    Ok(FamilyVerification { report, conditions, warning })
}

/// Chessboard system for a lattice: kernels of the eight odd classes with derivative moments.
pub fn chessboard_system(lattice: &Lattice, params: &ObstructionParams) -> Result<ObstructionSystem> {
    let odd: Vec<u8> = (1..16u8).filter(|c| c.count_ones() % 2 == 1).collect();
    ObstructionSystem::new(lattice, params, &odd, true)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AbFit {
    pub a: f64,
    pub b: f64,
    /// Max entry of |M - fitted form| over the random validation inputs.
    pub mismatch: f64,
}

fn ab_patterns(zeta: &Vec3) -> (Mat3, Mat3) {
    let (x, y, z) = (zeta[0], zeta[1], zeta[2]);
    let d = Mat3::from_diagonal(&Vec3::new(2.0 * x * x - y * y - z * z, 2.0 * y * y - x * x - z * z, 2.0 * z * z - x * x - y * y));
    let o = Mat3::new(0.0, x * y, x * z, x * y, 0.0, y * z, x * z, y * z, 0.0);
    (d, o)
}

/// Fits (B_{e1}(zeta, zeta) + B_{e1^c}(zeta, zeta)) / 12 at L = I to
/// a * diag(2x^2 - y^2 - z^2, ...) + b * offdiag(xy, xz, yz).
pub fn fit_ab_constants(params: &SumParams) -> Result<AbFit> {
    let e = SingularPoint::unit(1)?;
    fit_ab(params, &[e, e.opposite()])
}

/// The same fit with the e1 coset alone.
pub fn fit_ab_nearest_coset(params: &SumParams) -> Result<AbFit> {
    fit_ab(params, &[SingularPoint::unit(1)?])
}

fn fit_ab(params: &SumParams, cosets: &[SingularPoint]) -> Result<AbFit> {
    let l = Lattice::identity();
    let kernels = cosets.iter().map(|p| CosetKernel::compute(&p.position(), &l, params, false)).collect::<Result<Vec<_>>>()?;
    let m = |zeta: &Vec3| {
        kernels.iter().map(|k| k.apply(zeta, zeta, Convention::PlusToMinus).into_inner()).fold(Mat3::zeros(), |a, b| a + b) / 12.0
    };
    let basis = [
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(1.0, 1.0, 0.0),
        Vec3::new(1.0, 0.0, 1.0),
        Vec3::new(0.0, 1.0, 1.0),
    ];
    let (mut dd, mut dm, mut oo, mut om) = (0.0, 0.0, 0.0, 0.0);
    for zeta in &basis {
        let (d, o) = ab_patterns(zeta);
        let v = m(zeta);
        dd += d.norm_squared();
        dm += d.component_mul(&v).sum();
        oo += o.norm_squared();
        om += o.component_mul(&v).sum();
    }
    let (a, b) = (dm / dd, om / oo);
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut mismatch: f64 = 0.0;
    for _ in 0..20 {
        let zeta = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let (d, o) = ab_patterns(&zeta);
        mismatch = mismatch.max((m(&zeta) - d * a - o * b).amax());
    }
    Ok(AbFit { a, b, mismatch })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchPattern {
    Chessboard,
    SinglePositive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchInit {
    /// Independent standard normal zeta components.
    Gaussian,
    /// Random orthogonal equal-length coefficients (transported frame), then
    /// relative Gaussian noise of the given size on every zeta.
    NearFamily { noise: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub best: SolveResult,
    pub best_restart: usize,
    pub seed: u64,
    pub norms: Vec<f64>,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

fn random_vec3(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(gaussian(rng), gaussian(rng), gaussian(rng))
}

/// Perturbs every zeta by relative Gaussian noise: zeta (1 + noise * g) componentwise.
pub fn perturb(config: &Configuration, noise: f64, rng: &mut ChaCha8Rng) -> Result<Configuration> {
    let deltas: Vec<Vec3> = SingularPoint::all().map(|_| random_vec3(rng)).collect();
    config.map_zetas(|p, d| d.zeta + d.zeta.component_mul(&deltas[p.index()]) * noise)
}

/// Initial configuration for restart `index`; ChaCha8 seeded with `seed`, stream `index`.
pub fn search_initial(pattern: SearchPattern, init: SearchInit, lattice: &Lattice, seed: u64, index: usize) -> Result<Configuration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    match pattern {
        SearchPattern::Chessboard => match init {
            SearchInit::Gaussian => Configuration::from_points(
                *lattice,
                SingularPoint::all()
                    .map(|p| Ok((p, GluingDatum::new(p.chessboard_orientation(), random_vec3(&mut rng))?)))
                    .collect::<Result<Vec<_>>>()?,
            ),
            SearchInit::NearFamily { noise } => {
                let g = DMatrix::from_fn(4, 3, |_, _| gaussian(&mut rng));
                let q = g.qr().q();
                let col = |c: usize| -> [f64; 4] { std::array::from_fn(|r| q[(r, c)] * 2.0) };
                let base = chessboard_family(&col(0), &col(1), &col(2), lattice, FamilyFrame::Transported)?;
                perturb(&base, noise, &mut rng)
            }
        },
        SearchPattern::SinglePositive => {
            let plus = SingularPoint::unit(1)?;
            Configuration::from_points(
                *lattice,
                SingularPoint::all()
                    .map(|p| {
                        let o = if p == plus { Orientation::Positive } else { Orientation::Negative };
                        Ok((p, GluingDatum::new(o, random_vec3(&mut rng))?))
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        }
    }
}

pub fn search(
    pattern: SearchPattern,
    init: SearchInit,
    lattice: &Lattice,
    seed: u64,
    restarts: usize,
    suite: Suite,
    options: &SolveOptions,
    params: &ObstructionParams,
) -> Result<SearchOutcome> {
    if restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let runs: Vec<Result<SolveResult>> = (0..restarts)
        .into_par_iter()
        .map(|k| minimize(&search_initial(pattern, init, lattice, seed, k)?, suite, options, params))
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let norms: Vec<f64> = runs.iter().map(|r| r.residual_norm).collect();
    let mut best_restart = 0;
    for (k, n) in norms.iter().enumerate() {
        if *n < norms[best_restart] {
            best_restart = k;
        }
    }
    Ok(SearchOutcome { best: runs[best_restart].clone(), best_restart, seed, norms })
}
