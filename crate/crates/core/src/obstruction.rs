//! Curvature blocks induced at singular points, the obstruction residual suites
//! and the single-positive invertibility report.

use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{pi_tr, Convention, Mat3, Mat4, Orientation, TracelessSym3, Vec3};
use crate::config::{class_offset, count_freedoms_constraints, Configuration, SingularPoint, Suite};
use crate::error::{Error, Result};
use crate::lattice::{tensor_apply, CosetKernel, Lattice, SumParams, Tensor81, RICHARDSON_TOL};
use crate::point::{classify_kernel, lambda_vector, mu1, CurvatureBlock, KernelClass};

/// Which rho convention a target point uses for the curvature its sources induce.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairingRule {
    /// Negative targets use plus-to-minus, positive targets minus-to-plus.
    Standard,
    /// The transpose of every convention in `Standard`.
    Transposed,
}

impl PairingRule {
    pub fn convention(self, target: Orientation) -> Convention {
        match self {
            PairingRule::Standard => target.induced_convention(),
            PairingRule::Transposed => target.induced_convention().transposed(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DerivativeMethod {
    /// Exact derivative of the truncated sum from the moment kernel.
    Analytic,
    /// Central difference along L + t dL with a half-step Richardson check.
    CentralDifference { step: Option<f64> },
    /// The weighted sum of the torus-deformation lemma.
    ClosedForm,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObstructionParams {
    pub sums: SumParams,
    pub pairing: PairingRule,
    pub derivative: DerivativeMethod,
}

impl Default for ObstructionParams {
    fn default() -> Self {
        ObstructionParams { sums: SumParams::default(), pairing: PairingRule::Standard, derivative: DerivativeMethod::Analytic }
    }
}

impl ObstructionParams {
    pub fn with_radius(radius: u32) -> Self {
        ObstructionParams { sums: SumParams::with_radius(radius), ..Self::default() }
    }
}

/// Directions of torus deformation used by each suite.
pub fn dk_directions(suite: Suite) -> Vec<(String, Mat4)> {
    let unit = |a: usize, b: usize| {
        let mut m = Mat4::zeros();
        m[(a, b)] = 1.0;
        m
    };
    match suite {
        Suite::Full => (0..4).map(|k| (format!("dK[e{0}e{0}]", k + 1), unit(k, k))).collect(),
        Suite::FirstOrder => {
            let mut out = vec![
                ("dK[d1]".to_string(), (unit(0, 0) - unit(1, 1)) / 2f64.sqrt()),
                ("dK[d2]".to_string(), (unit(0, 0) + unit(1, 1) - unit(2, 2) * 2.0) / 6f64.sqrt()),
                ("dK[d3]".to_string(), (unit(0, 0) + unit(1, 1) + unit(2, 2) - unit(3, 3) * 3.0) / 12f64.sqrt()),
            ];
            for a in 0..4 {
                for b in a + 1..4 {
                    out.push((format!("dK[o{}{}]", a + 1, b + 1), (unit(a, b) + unit(b, a)) / 2f64.sqrt()));
                }
            }
            out
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockWithTail {
    pub value: TracelessSym3,
    /// Bound on the Frobenius norm of the truncation error.
    pub tail: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarResidual {
    pub value: f64,
    pub tail: f64,
}

/// Coset kernels of one lattice, computed once for the classes a configuration needs.
pub struct ObstructionSystem {
    lattice: Lattice,
    params: ObstructionParams,
    kernels: Vec<Option<CosetKernel>>,
    derivative_cache: Mutex<Vec<(Mat4, u8, Tensor81)>>,
}

fn opposite_classes(config: &Configuration) -> Vec<u8> {
    let mut classes: Vec<u8> = Vec::new();
    for (p, dp) in config.glued() {
        for (q, dq) in config.glued() {
            let c = p.difference_class(q);
            if dp.orientation != dq.orientation && !classes.contains(&c) {
                classes.push(c);
            }
        }
    }
    classes.sort_unstable();
    classes
}

impl ObstructionSystem {
    /// `high_order` is needed for analytic and closed-form torus derivatives.
    pub fn new(lattice: &Lattice, params: &ObstructionParams, classes: &[u8], high_order: bool) -> Result<Self> {
        params.sums.validate()?;
        let mut wanted: Vec<u8> = classes.iter().map(|c| c & 0b1111).filter(|c| *c != 0).collect();
        wanted.sort_unstable();
        wanted.dedup();
        let computed: Vec<Result<(u8, CosetKernel)>> = wanted
            .par_iter()
            .map(|&c| Ok((c, CosetKernel::compute(&class_offset(c), lattice, &params.sums, high_order)?)))
            .collect();
        let mut kernels: Vec<Option<CosetKernel>> = vec![None; 16];
        for r in computed {
            let (c, k) = r?;
            kernels[c as usize] = Some(k);
        }
        Ok(ObstructionSystem { lattice: *lattice, params: *params, kernels, derivative_cache: Mutex::new(Vec::new()) })
    }

    /// Kernels for every pair of opposite orientation in `config`; derivative
    /// moments are included when the suite's torus residuals need them.
    pub fn for_configuration(config: &Configuration, params: &ObstructionParams, with_dk: bool) -> Result<Self> {
        let high = with_dk && !matches!(params.derivative, DerivativeMethod::CentralDifference { .. });
        Self::new(config.lattice(), params, &opposite_classes(config), high)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn params(&self) -> &ObstructionParams {
        &self.params
    }

    pub fn kernel(&self, class: u8) -> Result<&CosetKernel> {
        if class == 0 {
            return Err(Error::Singular([0.0; 4]));
        }
        self.kernels[class as usize & 0b1111]
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("no kernel prepared for class {}", SingularPoint::from_index(class as usize).map(|p| p.label()).unwrap_or_default())))
    }

    fn check(&self, config: &Configuration) -> Result<()> {
        if config.lattice().matrix() != self.lattice.matrix() {
            return Err(Error::InvalidArgument("configuration lattice differs from the prepared system".into()));
        }
        Ok(())
    }

    /// Curvature induced at p (viewed with orientation `target`) by every glued
    /// point of the opposite orientation.
    pub fn curvature_for(&self, config: &Configuration, p: SingularPoint, target: Orientation) -> Result<BlockWithTail> {
        self.check(config)?;
        let convention = self.params.pairing.convention(target);
        let mut raw = Mat3::zeros();
        let mut tail = 0.0;
        let mut any = false;
        for (i, d) in config.glued() {
            if d.orientation == target || i == p {
                continue;
            }
            let k = self.kernel(p.difference_class(i))?;
            raw += tensor_apply(k.tensor(), &d.zeta, &d.zeta, convention);
            tail += k.frobenius_tail(&d.zeta, &d.zeta);
            any = true;
        }
        if !any {
            return Err(Error::NoSources(p.label()));
        }
        Ok(BlockWithTail { value: pi_tr(&raw), tail })
    }

    pub fn curvature_at(&self, config: &Configuration, p: SingularPoint) -> Result<BlockWithTail> {
        let d = config.require(p)?;
        self.curvature_for(config, p, d.orientation)
    }

    pub fn residual_lambda(&self, config: &Configuration, p: SingularPoint) -> Result<[f64; 3]> {
        let c = self.curvature_at(config, p)?;
        lambda_vector(&CurvatureBlock::ricci_flat(c.value.into_inner())?, &config.require(p)?.zeta)
    }

    pub fn residual_full_r(&self, config: &Configuration, p: SingularPoint) -> Result<[f64; 5]> {
        Ok(self.curvature_at(config, p)?.value.coordinates())
    }

    /// sum_i <B_{p-i}(z, zeta_p) zeta_i, zeta_i>, each term with the convention of target i.
    pub fn residual_dz(&self, config: &Configuration, p: SingularPoint, z: &Vec3) -> Result<ScalarResidual> {
        self.check(config)?;
        let dp = config.require(p)?;
        let mut value = 0.0;
        let mut tail = 0.0;
        for (i, di) in config.glued() {
            if di.orientation == dp.orientation {
                continue;
            }
            let k = self.kernel(p.difference_class(i))?;
            let b = pi_tr(&tensor_apply(k.tensor(), z, &dp.zeta, self.params.pairing.convention(di.orientation)));
            value += di.zeta.dot(&(b.matrix() * di.zeta));
            tail += k.frobenius_tail(z, &dp.zeta) * di.zeta.norm_squared();
        }
        Ok(ScalarResidual { value, tail })
    }

    fn derivative_tensor(&self, class: u8, dl: &Mat4) -> Result<Tensor81> {
        let cached = self.derivative_cache.lock().expect("cache lock").iter().find(|(m, c, _)| m == dl && *c == class).map(|e| e.2);
        if let Some(t) = cached {
            return Ok(t);
        }
        let t = self.compute_derivative_tensor(class, dl)?;
        self.derivative_cache.lock().expect("cache lock").push((*dl, class, t));
        Ok(t)
    }

    fn compute_derivative_tensor(&self, class: u8, dl: &Mat4) -> Result<Tensor81> {
        match self.params.derivative {
            DerivativeMethod::Analytic | DerivativeMethod::ClosedForm => self.kernel(class)?.derivative_tensor(dl),
            DerivativeMethod::CentralDifference { step } => {
                let dn = dl.norm();
                if dn == 0.0 {
                    return Ok([0.0; 81]);
                }
                let h = step.unwrap_or(1e-5 * self.lattice.matrix().norm() / dn);
                let offset = class_offset(class);
                let at = |t: f64| -> Result<Tensor81> {
                    let l = Lattice::new(self.lattice.matrix() + dl * t)?;
                    Ok(*CosetKernel::compute(&offset, &l, &self.params.sums, false)?.tensor())
                };
                let (p1, m1, p2, m2) = (at(h)?, at(-h)?, at(h / 2.0)?, at(-h / 2.0)?);
                let mut d1 = [0.0; 81];
                let mut d2 = [0.0; 81];
                for n in 0..81 {
                    d1[n] = (p1[n] - m1[n]) / (2.0 * h);
                    d2[n] = (p2[n] - m2[n]) / h;
                }
                let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
                let diff: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| a - b).collect();
                let base = norm(self.kernel(class).map(|k| &k.tensor()[..]).unwrap_or(&[0.0]));
                let scale = norm(&d2).max(base * dn / self.lattice.matrix().norm());
                let change = if scale == 0.0 { 0.0 } else { norm(&diff) / scale };
                if change > RICHARDSON_TOL {
                    return Err(Error::Richardson(change));
                }
                let mut out = [0.0; 81];
                for n in 0..81 {
                    out[n] = (4.0 * d2[n] - d1[n]) / 3.0;
                }
                Ok(out)
            }
        }
    }

    /// sum over i in S+, j in S- of <d/dt B_{j-i}^{L+t dL}(zeta_i, zeta_i) zeta_j, zeta_j>.
    /// Pairs are counted once, from the negative side; the positive side gives
    /// the same value by the adjoint identity.
    pub fn residual_dk(&self, config: &Configuration, dl: &Mat4) -> Result<ScalarResidual> {
        self.check(config)?;
        let targets = config.points_with(Orientation::Negative);
        let sources = config.points_with(Orientation::Positive);
        let convention = self.params.pairing.convention(Orientation::Negative);
        let mut value = 0.0;
        let mut tail = 0.0;
        for &j in &targets {
            let zj = config.require(j)?.zeta;
            for &i in &sources {
                let zi = config.require(i)?.zeta;
                let c = j.difference_class(i);
                let k = self.kernel(c)?;
                match self.params.derivative {
                    DerivativeMethod::ClosedForm => {
                        value += k.weighted_sum(dl, &zi, &zj)?;
                        tail += k.weighted_sum_tail(dl, &zi, &zj);
                    }
                    _ => {
                        let t = self.derivative_tensor(c, dl)?;
                        let b = pi_tr(&tensor_apply(&t, &zi, &zi, convention));
                        value += zj.dot(&(b.matrix() * zj));
                        tail += k.derivative_frobenius_tail(dl, &zi, &zi) * zj.norm_squared();
                    }
                }
            }
        }
        Ok(ScalarResidual { value, tail })
    }

    /// The suite's residual values in report order, without the per-point diagnostics.
    pub fn residual_vector(&self, config: &Configuration, suite: Suite) -> Result<Vec<f64>> {
        self.check(config)?;
        config.require_total()?;
        let mut out = Vec::with_capacity(16 * suite.per_point() + suite.dk_count());
        for p in SingularPoint::all() {
            match suite {
                Suite::FirstOrder => out.extend(self.residual_lambda(config, p)?),
                Suite::Full => out.extend(self.residual_full_r(config, p)?),
            }
        }
        for (_, k) in dk_directions(suite) {
            out.push(self.residual_dk(config, &k)?.value);
        }
        Ok(out)
    }

    pub fn assemble_suite(&self, config: &Configuration, suite: Suite) -> Result<ObstructionReport> {
        self.check(config)?;
        count_freedoms_constraints(config, suite)?;
        let points: Vec<Result<(PointReport, Vec<ResidualEntry>)>> = SingularPoint::all()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&p| self.point_report(config, p, suite))
            .collect();
        let mut reports = Vec::with_capacity(16);
        let mut residuals = Vec::new();
        for r in points {
            let (pr, entries) = r?;
            reports.push(pr);
            residuals.extend(entries);
        }
        for (name, k) in dk_directions(suite) {
            let r = self.residual_dk(config, &k)?;
            residuals.push(ResidualEntry { point: None, name, value: r.value, tail: r.tail, kind: ResidualKind::TorusDeformation });
        }
        Ok(ObstructionReport::new(config, suite, &self.params, reports, residuals))
    }

    fn point_report(&self, config: &Configuration, p: SingularPoint, suite: Suite) -> Result<(PointReport, Vec<ResidualEntry>)> {
        let d = config.require(p)?;
        let c = self.curvature_at(config, p)?;
        let block = CurvatureBlock::ricci_flat(c.value.into_inner())?;
        let lambda = lambda_vector(&block, &d.zeta)?;
        let m = c.value.matrix();
        let report = PointReport {
            point: p.label(),
            eps: p.eps(),
            orientation: d.orientation.symbol().to_string(),
            zeta: [d.zeta[0], d.zeta[1], d.zeta[2]],
            curvature: std::array::from_fn(|r| std::array::from_fn(|s| m[(r, s)])),
            frobenius: c.value.norm(),
            tail: c.tail,
            eigenvalues: block.eigenvalues(),
            lambda,
            mu1: mu1(&block, &d.zeta)?,
            kernel: kernel_name(classify_kernel(&block, KERNEL_TOL)).to_string(),
        };
        let entries = match suite {
            Suite::FirstOrder => lambda
                .iter()
                .enumerate()
                .map(|(k, v)| ResidualEntry {
                    point: Some(p.label()),
                    name: format!("lambda{}", k + 1),
                    value: *v,
                    tail: c.tail,
                    kind: ResidualKind::Curvature,
                })
                .collect(),
            Suite::Full => c
                .value
                .coordinates()
                .iter()
                .zip(FULL_R_NAMES)
                .map(|(v, n)| ResidualEntry { point: Some(p.label()), name: n.to_string(), value: *v, tail: c.tail, kind: ResidualKind::Curvature })
                .collect(),
        };
        Ok((report, entries))
    }

    /// Max |<B_{j-i}(zeta_i, z) zeta_j, zeta_j> - <B_{i-j}(zeta_j, zeta_j) zeta_i, z>| over
    /// random opposite pairs (i, j) and random z, each side with its target's convention.
    pub fn equivalence_check(&self, config: &Configuration, samples: usize, seed: u64) -> Result<f64> {
        self.check(config)?;
        let glued: Vec<_> = config.glued().map(|(p, d)| (p, *d)).collect();
        let mut pairs = Vec::new();
        for &(i, di) in &glued {
            for &(j, dj) in &glued {
                if di.orientation != dj.orientation {
                    pairs.push((i, di, j, dj));
                }
            }
        }
        if pairs.is_empty() {
            return Err(Error::Pattern("no pair of opposite orientations".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let (i, di, j, dj) = pairs[rng.gen_range(0..pairs.len())];
            let z = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let k = self.kernel(j.difference_class(i))?;
            let lhs = pi_tr(&tensor_apply(k.tensor(), &di.zeta, &z, self.params.pairing.convention(dj.orientation)));
            let rhs = pi_tr(&tensor_apply(k.tensor(), &dj.zeta, &dj.zeta, self.params.pairing.convention(di.orientation)));
            let a = dj.zeta.dot(&(lhs.matrix() * dj.zeta));
            let b = di.zeta.dot(&(rhs.matrix() * z));
            worst = worst.max((a - b).abs());
        }
        Ok(worst)
    }

    pub fn single_positive_report(&self, config: &Configuration) -> Result<SinglePositiveReport> {
        self.check(config)?;
        let (plus, minus) = crate::config::parity_sets(config);
        let (minority, majority, orientation) = if plus.len() <= minus.len() {
            (plus, minus, Orientation::Positive)
        } else {
            (minus, plus, Orientation::Negative)
        };
        if minority.is_empty() || minority.len() > 3 {
            return Err(Error::Pattern(format!("expected 1 to 3 points of one orientation, found {}", minority.len())));
        }
        let mut entries = Vec::new();
        for &j in &majority {
            let c = self.curvature_at(config, j)?;
            let block = CurvatureBlock::ricci_flat(c.value.into_inner())?;
            let eig = block.eigenvalues();
            let min_abs = eig.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min);
            let distance_squared = minority.iter().map(|i| i.difference_class(j).count_ones()).min().unwrap_or(0);
            entries.push(NeighborEntry {
                point: j.label(),
                distance_squared,
                eigenvalues: eig,
                min_abs_eigenvalue: min_abs,
                frobenius: c.value.norm(),
                tail: c.tail,
                certified_invertible: min_abs > c.tail,
            });
        }
        let obstructed = entries.iter().any(|e| e.certified_invertible);
        let stable = entries.iter().any(|e| e.frobenius > e.tail);
        Ok(SinglePositiveReport {
            minority_orientation: orientation.symbol().to_string(),
            minority: minority.iter().map(|p| p.label()).collect(),
            entries,
            verdict: if obstructed { Verdict::Obstructed } else { Verdict::Inconclusive },
            stable_obstructed: stable,
        })
    }
}

pub const KERNEL_TOL: f64 = 1e-8;

pub const FULL_R_NAMES: [&str; 5] = ["R[d1]", "R[d2]", "R[o12]", "R[o13]", "R[o23]"];

fn kernel_name(k: KernelClass) -> &'static str {
    match k {
        KernelClass::Invertible => "invertible",
        KernelClass::Dim1 => "dim1",
        KernelClass::Dim2 => "dim2",
        KernelClass::Dim3 => "dim3",
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualKind {
    Curvature,
    TorusDeformation,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualEntry {
    pub point: Option<String>,
    pub name: String,
    pub value: f64,
    pub tail: f64,
    pub kind: ResidualKind,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointReport {
    pub point: String,
    pub eps: [u8; 4],
    pub orientation: String,
    pub zeta: [f64; 3],
    pub curvature: [[f64; 3]; 3],
    pub frobenius: f64,
    pub tail: f64,
    pub eigenvalues: [f64; 3],
    pub lambda: [f64; 3],
    /// Meaningful as a second obstruction only where lambda vanishes.
    pub mu1: f64,
    pub kernel: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObstructionReport {
    pub suite: String,
    pub radius: u32,
    pub tail_tolerance: f64,
    pub lattice: [[f64; 4]; 4],
    /// Mean |zeta|^2; curvature residuals are quadratic and torus residuals quartic in zeta.
    pub zeta_scale: f64,
    pub points: Vec<PointReport>,
    pub residuals: Vec<ResidualEntry>,
    pub max_abs_curvature: f64,
    pub max_abs_torus: f64,
    pub max_normalized_curvature: f64,
    pub max_normalized_torus: f64,
    pub residual_norm: f64,
    pub max_tail: f64,
}

impl ObstructionReport {
    fn new(config: &Configuration, suite: Suite, params: &ObstructionParams, points: Vec<PointReport>, residuals: Vec<ResidualEntry>) -> Self {
        let s = config.zeta_scale();
        let max_of = |kind: ResidualKind| residuals.iter().filter(|r| r.kind == kind).map(|r| r.value.abs()).fold(0.0, f64::max);
        let curv = max_of(ResidualKind::Curvature);
        let torus = max_of(ResidualKind::TorusDeformation);
        let m = config.lattice().matrix();
        ObstructionReport {
            suite: suite.name().to_string(),
            radius: params.sums.radius,
            tail_tolerance: params.sums.tail_tol,
            lattice: std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)])),
            zeta_scale: s,
            max_abs_curvature: curv,
            max_abs_torus: torus,
            max_normalized_curvature: curv / s,
            max_normalized_torus: torus / (s * s),
            residual_norm: residuals.iter().map(|r| r.value * r.value).sum::<f64>().sqrt(),
            max_tail: residuals.iter().map(|r| r.tail).fold(0.0, f64::max),
            points,
            residuals,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.residuals.iter().map(|r| r.value).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs_curvature.max(self.max_abs_torus)
    }

    pub fn max_normalized(&self) -> f64 {
        self.max_normalized_curvature.max(self.max_normalized_torus)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Rows of (point, residual-name, value, tail-bound).
    pub fn write_csv(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["point", "residual", "value", "tail_bound"])?;
        for r in &self.residuals {
            w.write_record([r.point.clone().unwrap_or_else(|| "torus".into()), r.name.clone(), format!("{:e}", r.value), format!("{:e}", r.tail)])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Obstructed,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeighborEntry {
    pub point: String,
    pub distance_squared: u32,
    pub eigenvalues: [f64; 3],
    pub min_abs_eigenvalue: f64,
    pub frobenius: f64,
    pub tail: f64,
    /// min |eigenvalue| exceeds the truncation bound, so the exact block is invertible.
    pub certified_invertible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SinglePositiveReport {
    pub minority_orientation: String,
    pub minority: Vec<String>,
    pub entries: Vec<NeighborEntry>,
    pub verdict: Verdict,
    /// Some majority block is certified nonzero, so R = 0 fails there.
    pub stable_obstructed: bool,
}

fn system(config: &Configuration, params: &ObstructionParams, with_dk: bool) -> Result<ObstructionSystem> {
    ObstructionSystem::for_configuration(config, params, with_dk)
}

pub fn curvature_at(config: &Configuration, p: SingularPoint, params: &ObstructionParams) -> Result<BlockWithTail> {
    system(config, params, false)?.curvature_at(config, p)
}

pub fn residual_lambda(config: &Configuration, p: SingularPoint, params: &ObstructionParams) -> Result<[f64; 3]> {
    system(config, params, false)?.residual_lambda(config, p)
}

pub fn residual_full_r(config: &Configuration, p: SingularPoint, params: &ObstructionParams) -> Result<[f64; 5]> {
    system(config, params, false)?.residual_full_r(config, p)
}

pub fn residual_dz(config: &Configuration, p: SingularPoint, z: &Vec3, params: &ObstructionParams) -> Result<ScalarResidual> {
    system(config, params, false)?.residual_dz(config, p, z)
}

pub fn residual_dk(config: &Configuration, dl: &Mat4, params: &ObstructionParams) -> Result<ScalarResidual> {
    config.require_total()?;
    system(config, params, true)?.residual_dk(config, dl)
}

pub fn assemble_suite(config: &Configuration, suite: Suite, params: &ObstructionParams) -> Result<ObstructionReport> {
    config.require_total()?;
    system(config, params, true)?.assemble_suite(config, suite)
}

pub fn equivalence_check(config: &Configuration, samples: usize, seed: u64, params: &ObstructionParams) -> Result<f64> {
    system(config, params, false)?.equivalence_check(config, samples, seed)
}

pub fn single_positive_report(config: &Configuration, params: &ObstructionParams) -> Result<SinglePositiveReport> {
    system(config, params, false)?.single_positive_report(config)
}
