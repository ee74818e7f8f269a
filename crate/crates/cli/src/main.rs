use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde_json::json;
use t4z2_core::algebra::{Convention, Orientation};
use t4z2_core::config::{count_freedoms_constraints, read_config_file, Configuration, SingularPoint, Suite};
use t4z2_core::lattice::{lattice_sum_b, Lattice, SumParams};
use t4z2_core::obstruction::{ObstructionParams, ObstructionReport, ObstructionSystem, SinglePositiveReport, Verdict};
use t4z2_core::reproduce::{self, Case, CaseReport};
use t4z2_core::solver::{search, GaugeMode, SearchInit, SearchPattern, SolveOptions};

const THREADS_VAR: &str = "T4Z2_THREADS";

/// Exit status for a failed check or an obstructed configuration.
const OBSTRUCTED: u8 = 2;

#[derive(Parser)]
#[command(name = "t4z2", version, about = "Obstructions to Einstein desingularizations of T^4/Z_2 by Eguchi-Hanson metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// Lattice-sum truncation radius.
    #[arg(long, default_value_t = 40)]
    radius: u32,
    /// Tolerance on the truncation tail bound of sum |L(x - 2a)|^-6.
    #[arg(long, default_value_t = 1e-4)]
    tail_tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

impl Common {
    fn params(&self) -> Result<ObstructionParams> {
        let sums = SumParams { radius: self.radius, tail_tol: self.tail_tol };
        sums.validate()?;
        Ok(ObstructionParams { sums, ..ObstructionParams::default() })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    /// Pretty-printed JSON.
    Structured,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    FirstOrder,
    Full,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::FirstOrder => Suite::FirstOrder,
            SuiteArg::Full => Suite::Full,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    PlusToMinus,
    MinusToPlus,
}

#[derive(Clone, Copy, ValueEnum)]
enum PatternArg {
    Chessboard,
    SinglePositive,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Gaussian,
    NearFamily,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the obstruction suite on a configuration.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = SuiteArg::Full)]
        suite: SuiteArg,
        /// Residual tolerance on the zeta-scale-normalized residuals.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Also write the residuals as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Curvature block induced at one singular point.
    Curvature {
        #[arg(long)]
        config: PathBuf,
        /// Point label, e.g. "(1,0,0,1)" or 1001.
        #[arg(long)]
        point: String,
        #[command(flatten)]
        common: Common,
    },
    /// Trace-free lattice sum B_x^L(zeta, zeta2).
    Latsum {
        /// Offset x as four comma-separated numbers.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, allow_hyphen_values = true)]
        zeta: String,
        /// Defaults to zeta.
        #[arg(long, allow_hyphen_values = true)]
        zeta2: Option<String>,
        /// Lattice matrix as 16 comma-separated numbers, row-major; defaults to the identity.
        #[arg(long, allow_hyphen_values = true)]
        lattice: Option<String>,
        #[arg(long, value_enum, default_value_t = ConventionArg::PlusToMinus)]
        convention: ConventionArg,
        #[command(flatten)]
        common: Common,
    },
    /// Run a named reproduction case, or all of them.
    Reproduce {
        /// epstein-019, eh-eigenvalues, chessboard-ab, example-family-1,
        /// example-family-2, single-positive, counts or all.
        case: String,
        #[command(flatten)]
        common: Common,
    },
    /// Parameter and constraint counts of a total configuration.
    Count {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Seeded multi-start least-squares search.
    Search {
        #[arg(long, value_enum, default_value_t = PatternArg::Chessboard)]
        pattern: PatternArg,
        #[arg(long, value_enum, default_value_t = InitArg::NearFamily)]
        init: InitArg,
        /// Relative noise for near-family starts.
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        restarts: usize,
        #[arg(long, value_enum, default_value_t = SuiteArg::Full)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 200)]
        max_iterations: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Hold the first point of each orientation fixed instead of its norm.
        #[arg(long)]
        fix_point: bool,
        /// Also write the residual history of the best run as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match setup_threads().and_then(|_| run(cli.command)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn setup_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|n| *n >= 1).ok_or_else(|| anyhow!("{THREADS_VAR} must be an integer >= 1, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Verify { config, suite, tol, csv, common } => verify(&config, suite.into(), tol, csv, &common),
        Command::Curvature { config, point, common } => curvature(&config, &point, &common),
        Command::Latsum { x, zeta, zeta2, lattice, convention, common } => latsum(&x, &zeta, zeta2.as_deref(), lattice.as_deref(), convention, &common),
        Command::Reproduce { case, common } => reproduce_cases(&case, &common),
        Command::Count { config, format } => count(&config, format),
        Command::Search { pattern, init, noise, seed, restarts, suite, max_iterations, tol, fix_point, csv, common } => {
            let pattern = match pattern {
                PatternArg::Chessboard => SearchPattern::Chessboard,
                PatternArg::SinglePositive => SearchPattern::SinglePositive,
            };
            let init = match init {
                InitArg::Gaussian => SearchInit::Gaussian,
                InitArg::NearFamily => SearchInit::NearFamily { noise },
            };
            let options = SolveOptions {
                max_iterations,
                tolerance: tol,
                gauge: if fix_point { GaugeMode::FixPoint } else { GaugeMode::FixScale },
                ..SolveOptions::default()
            };
            search_cmd(pattern, init, seed, restarts, suite.into(), &options, csv, &common)
        }
    }
}

fn load(path: &PathBuf) -> Result<Configuration> {
    read_config_file(path).with_context(|| format!("reading {}", path.display()))
}

fn parse_numbers<const N: usize>(s: &str, what: &str) -> Result<[f64; N]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("{what}: cannot parse {t:?} as a number")))
        .collect::<Result<_>>()?;
    v.try_into().map_err(|v: Vec<f64>| anyhow!("{what}: expected {N} comma-separated numbers, got {}", v.len()))
}

fn parse_point(s: &str) -> Result<SingularPoint> {
    let digits: Vec<u8> = s
        .chars()
        .filter(|c| !matches!(c, '(' | ')' | ',' | ' '))
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(anyhow!("point label {s:?}: entries must be 0 or 1")),
        })
        .collect::<Result<_>>()?;
    let eps: [u8; 4] = digits.try_into().map_err(|_| anyhow!("point label {s:?}: expected four entries"))?;
    Ok(SingularPoint::new(eps)?)
}

fn matrix_rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]))
}

fn print_matrix(m: &Matrix3<f64>) {
    for r in 0..3 {
        println!("  [{:>14.6e} {:>14.6e} {:>14.6e}]", m[(r, 0)], m[(r, 1)], m[(r, 2)]);
    }
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

/// Single-positive analysis applies when one orientation has between one and three points.
fn minority_analysis(system: &ObstructionSystem, config: &Configuration) -> Result<Option<SinglePositiveReport>> {
    let n = config.points_with(Orientation::Positive).len();
    if (1..=3).contains(&n) || (13..=15).contains(&n) {
        Ok(Some(system.single_positive_report(config)?))
    } else {
        Ok(None)
    }
}

fn verify(path: &PathBuf, suite: Suite, tol: f64, csv: Option<PathBuf>, common: &Common) -> Result<u8> {
    if !(tol > 0.0) {
        bail!("--tol must be positive, got {tol}");
    }
    let config = load(path)?;
    let params = common.params()?;
    config.require_total()?;
    let system = ObstructionSystem::for_configuration(&config, &params, suite.dk_count() > 0)?;
    let report = system.assemble_suite(&config, suite)?;
    let minority = minority_analysis(&system, &config)?;
    let solved = report.max_normalized() < tol;
    let verdict = match &minority {
        Some(m) if m.verdict == Verdict::Obstructed => "obstructed",
        _ if solved => "solution",
        _ => "obstructed",
    };
    if let Some(path) = csv {
        report.write_csv(std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?)?;
    }
    match common.format {
        Format::Structured => print_json(&json!({
            "verdict": verdict,
            "tolerance": tol,
            "report": serde_json::to_value(&report)?,
            "single_positive": minority.as_ref().map(serde_json::to_value).transpose()?,
        }))?,
        Format::Text => print_report(&report, minority.as_ref(), verdict, tol),
    }
    Ok(if verdict == "solution" { 0 } else { OBSTRUCTED })
}

fn print_report(report: &ObstructionReport, minority: Option<&SinglePositiveReport>, verdict: &str, tol: f64) {
    println!("suite {} at radius {} ({} residuals), zeta scale {:.6e}", report.suite, report.radius, report.residuals.len(), report.zeta_scale);
    for p in &report.points {
        println!(
            "{} {:<8} eigenvalues [{:.4e}, {:.4e}, {:.4e}] lambda [{:.4e}, {:.4e}, {:.4e}] mu1 {:.4e} kernel {}",
            p.point, p.orientation, p.eigenvalues[0], p.eigenvalues[1], p.eigenvalues[2], p.lambda[0], p.lambda[1], p.lambda[2], p.mu1, p.kernel
        );
    }
    println!("max |curvature residual| {:.6e} (normalized {:.6e})", report.max_abs_curvature, report.max_normalized_curvature);
    println!("max |torus residual|     {:.6e} (normalized {:.6e})", report.max_abs_torus, report.max_normalized_torus);
    println!("residual norm {:.6e}, max tail bound {:.3e}", report.residual_norm, report.max_tail);
    if let Some(m) = minority {
        println!("minority orientation {} at {}", m.minority_orientation, m.minority.join(" "));
        for e in &m.entries {
            println!(
                "  {} |d|^2 = {} min |eigenvalue| {:.6e} tail {:.3e}{}",
                e.point,
                e.distance_squared,
                e.min_abs_eigenvalue,
                e.tail,
                if e.certified_invertible { " invertible" } else { "" }
            );
        }
    }
    println!("verdict: {verdict} (tolerance {tol:e})");
}

fn curvature(path: &PathBuf, point: &str, common: &Common) -> Result<u8> {
    let p = parse_point(point)?;
    let config = load(path)?;
    let params = common.params()?;
    let system = ObstructionSystem::for_configuration(&config, &params, false)?;
    let block = system.curvature_at(&config, p)?;
    let m = *block.value.matrix();
    match common.format {
        Format::Structured => print_json(&json!({ "point": p.label(), "matrix": matrix_rows(&m), "tail": block.tail }))?,
        Format::Text => {
            println!("curvature at {p}:");
            print_matrix(&m);
            println!("tail bound {:.3e}", block.tail);
        }
    }
    Ok(0)
}

fn latsum(x: &str, zeta: &str, zeta2: Option<&str>, lattice: Option<&str>, convention: ConventionArg, common: &Common) -> Result<u8> {
    let x = Vector4::from(parse_numbers::<4>(x, "--x")?);
    let z = Vector3::from(parse_numbers::<3>(zeta, "--zeta")?);
    let z2 = zeta2.map(|s| parse_numbers::<3>(s, "--zeta2")).transpose()?.map(Vector3::from).unwrap_or(z);
    let l = match lattice {
        Some(s) => Lattice::new(Matrix4::from_row_slice(&parse_numbers::<16>(s, "--lattice")?))?,
        None => Lattice::identity(),
    };
    let convention = match convention {
        ConventionArg::PlusToMinus => Convention::PlusToMinus,
        ConventionArg::MinusToPlus => Convention::MinusToPlus,
    };
    let params = common.params()?;
    let s = lattice_sum_b(&x, &l, &z, &z2, convention, &params.sums)?;
    let m = *s.value.matrix();
    match common.format {
        Format::Structured => print_json(&json!({ "matrix": matrix_rows(&m), "tail": s.tail, "terms": s.terms, "radius": common.radius }))?,
        Format::Text => {
            println!("B = ");
            print_matrix(&m);
            println!("tail bound {:.3e} ({} terms, radius {})", s.tail, s.terms, common.radius);
        }
    }
    Ok(0)
}

fn reproduce_cases(name: &str, common: &Common) -> Result<u8> {
    let params = common.params()?;
    let reports: Vec<CaseReport> = if name == "all" {
        let mut out = Vec::new();
        for case in Case::ALL {
            match case {
                Case::ExampleFamily2 => {}
                Case::ExampleFamily1 => out.extend(reproduce::example_families(&params)?),
                _ => out.push(reproduce::run(case, &params)?),
            }
        }
        out
    } else {
        let case = Case::parse(name).ok_or_else(|| anyhow!("unknown case {name:?}; expected one of {} or all", Case::ALL.map(|c| c.name()).join(", ")))?;
        vec![reproduce::run(case, &params)?]
    };
    match common.format {
        Format::Structured => print_json(&serde_json::to_value(&reports)?)?,
        Format::Text => {
            for r in &reports {
                println!("{}: {}", r.case, if r.pass { "PASS" } else { "FAIL" });
                for c in &r.checks {
                    println!(
                        "  {}{}: {:.6e} expected {} {}",
                        if c.gating { "" } else { "(diagnostic) " },
                        c.name,
                        c.value,
                        c.expected,
                        if c.pass { "ok" } else { "FAILED" }
                    );
                }
            }
        }
    }
    Ok(if reports.iter().all(|r| r.pass) { 0 } else { OBSTRUCTED })
}

fn count(path: &PathBuf, format: Format) -> Result<u8> {
    let config = load(path)?;
    let (pf, cf) = count_freedoms_constraints(&config, Suite::Full)?;
    let (p1, c1) = count_freedoms_constraints(&config, Suite::FirstOrder)?;
    match format {
        Format::Structured => print_json(&json!({
            "full": { "parameters": pf, "constraints": cf },
            "first-order": { "parameters": p1, "constraints": c1 },
        }))?,
        Format::Text => {
            println!("full suite: {pf} parameters, {cf} constraints");
            println!("first-order suite: {p1} parameters, {c1} constraints");
        }
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn search_cmd(
    pattern: SearchPattern,
    init: SearchInit,
    seed: u64,
    restarts: usize,
    suite: Suite,
    options: &SolveOptions,
    csv: Option<PathBuf>,
    common: &Common,
) -> Result<u8> {
    let params = common.params()?;
    let out = search(pattern, init, &Lattice::identity(), seed, restarts, suite, options, &params)?;
    if let Some(path) = csv {
        out.best.write_history_csv(std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?)?;
    }
    let converged = out.best.residual_norm < options.tolerance;
    match common.format {
        Format::Structured => print_json(&json!({
            "pattern": pattern,
            "init": init,
            "seed": seed,
            "restarts": restarts,
            "suite": suite.name(),
            "radius": common.radius,
            "best_restart": out.best_restart,
            "norms": out.norms,
            "best": serde_json::from_str::<serde_json::Value>(&out.best.to_json()?)?,
        }))?,
        Format::Text => {
            println!("seed {seed}, {restarts} restart(s), suite {}", suite.name());
            for (k, n) in out.norms.iter().enumerate() {
                println!("  restart {k}: residual norm {n:.6e}");
            }
            let b = &out.best;
            println!(
                "best restart {}: {:?} after {} iterations, residual norm {:.6e}",
                out.best_restart, b.termination, b.iterations, b.residual_norm
            );
            println!(
                "rank {} of {} free parameters ({} near-null at threshold {:e}, {} gauge constraints)",
                b.rank.rank, b.free_parameters, b.rank.near_null, b.rank.threshold, b.gauge_constraints
            );
        }
    }
    Ok(if converged { 0 } else { OBSTRUCTED })
}
