//! Command-line front end: ADHM JSON ingestion, sampling configuration,
//! orchestration of validation / curvature / analytic-gauge runs, and
//! machine-readable JSON reports.
//!
//! Reports are deterministic for a fixed configuration and seed (no
//! timestamps; fixed field order), carry a schema version, and the process
//! exit status follows the contract: 0 on pass, 1 on fail, 2 on error.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use quatgauge::adhm::{
    core_from_adhm, one_instanton, validate, AdhmData, AdhmWire, ValidationReport,
};
use quatgauge::curvature::{
    curvature_components, curvature_from_core, curvature_from_potential, decompose, DiffEngine,
};
use quatgauge::geometry::{
    chart_from_quaternions, complex_direction, sample_harmonic_point, verify_bracket_table,
    BracketReport, FiberTag, HarmonicPoint, PmSign, TangentDirection,
};
use quatgauge::harmonic_gauge::{
    analytic_gauge, field_derivative, prepotential_minus, prepotential_report, PrepotentialReport,
};
use quatgauge::quatlin::Quaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::PathBuf;

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "quatgauge",
    version,
    about = "ADHM-style instanton checks on quaternionic projective space"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Output path for the JSON report (defaults to stdout only).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Number of sampled points.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// RNG seed for point sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Finite-difference step.
    #[arg(long = "fd-step", default_value_t = 1e-4)]
    fd_step: f64,
    /// Pass/fail residual tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Half-width of the sampling box in the chart coordinates.
    #[arg(long = "box", default_value_t = 1.0)]
    box_half: f64,
}

impl CommonOpts {
    fn check(&self) -> Result<()> {
        if self.samples < 1 {
            bail!("--samples must be at least 1");
        }
        if !(self.tol > 0.0) {
            bail!("--tol must be positive");
        }
        if !(self.fd_step > 1e-10 && self.fd_step < 1e-1) {
            bail!("--fd-step must lie in (1e-10, 1e-1)");
        }
        if !(self.box_half > 0.0) {
            bail!("--box must be positive");
        }
        Ok(())
    }

    fn engine(&self) -> DiffEngine<f64> {
        DiffEngine::with_step(self.fd_step)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check the algebraic conditions on ADHM data.
    Validate {
        /// ADHM data JSON file.
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Sample the instanton residual of the curvature over random points.
    CheckInstanton {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Compare the two curvature computations against each other.
    CurvatureXcheck {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Build the analytic gauge and check the vanishing components.
    AnalyticGauge {
        #[arg(long)]
        input: PathBuf,
        /// Reference chart point: comma-separated quaternion components
        /// (4(n+1) reals); defaults to a fixed generic point.
        #[arg(long)]
        reference: Option<String>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Verify the invariant vector field bracket table by flow commutators.
    Brackets {
        /// Projective-space dimension parameter.
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Emit the standard single-instanton ADHM data as JSON.
    GenExample {
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct ConfigEcho {
    input: Option<String>,
    samples: usize,
    seed: u64,
    fd_step: f64,
    tol: f64,
    box_half: f64,
}

#[derive(Serialize)]
struct Aggregate {
    max_residual: f64,
    mean_residual: f64,
}

#[derive(Serialize)]
struct Report<R: Serialize> {
    schema_version: u32,
    tool_version: &'static str,
    command: &'static str,
    config: ConfigEcho,
    records: R,
    aggregate: Aggregate,
    verdict: &'static str,
}

fn echo(input: Option<&PathBuf>, c: &CommonOpts) -> ConfigEcho {
    ConfigEcho {
        input: input.map(|p| p.display().to_string()),
        samples: c.samples,
        seed: c.seed,
        fd_step: c.fd_step,
        tol: c.tol,
        box_half: c.box_half,
    }
}

fn aggregate(residuals: &[f64]) -> Aggregate {
    let max = residuals.iter().cloned().fold(0.0, f64::max);
    let mean = if residuals.is_empty() {
        0.0
    } else {
        residuals.iter().sum::<f64>() / residuals.len() as f64
    };
    Aggregate {
        max_residual: max,
        mean_residual: mean,
    }
}

fn emit<R: Serialize>(report: &Report<R>, output: Option<&PathBuf>) -> Result<bool> {
    let body = serde_json::to_string_pretty(report)?;
    if let Some(path) = output {
        std::fs::write(path, &body)
            .with_context(|| format!("writing report to {}", path.display()))?;
    }
    println!(
        "{}: {} (max residual {:e})",
        report.command, report.verdict, report.aggregate.max_residual
    );
    Ok(report.verdict == "pass")
}

/// Load ADHM data from a JSON file, with structural checks only.
fn load_adhm(path: &PathBuf) -> Result<AdhmData<f64>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let wire: AdhmWire<f64> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(AdhmData::from_wire(&wire)?)
}

#[derive(Serialize)]
struct PointRecord {
    index: usize,
    residual: f64,
}

#[derive(Serialize)]
struct InstantonRecord {
    index: usize,
    f_norm: f64,
    f2_norm: f64,
    residual: f64,
}

fn cmd_validate(input: &PathBuf, common: &CommonOpts) -> Result<bool> {
    let data = load_adhm(input)?;
    let rep: ValidationReport = validate(&data, common.tol);
    let mut residuals: Vec<f64> = rep.reality_residuals.clone();
    residuals.extend(rep.commutation_residuals.iter().map(|&(_, _, r)| r));
    residuals.push(rep.consequence_residual);
    let verdict = if rep.valid { "pass" } else { "fail" };
    let report = Report {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "validate",
        config: echo(Some(input), common),
        records: rep,
        aggregate: aggregate(&residuals),
        verdict,
    };
    emit(&report, common.output.as_ref())
}

fn cmd_check_instanton(input: &PathBuf, common: &CommonOpts) -> Result<bool> {
    let data = load_adhm(input)?;
    let core = core_from_adhm(&data);
    let eng = common.engine();
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
    let mut records = Vec::with_capacity(common.samples);
    for index in 0..common.samples {
        let hp: HarmonicPoint<f64> = sample_harmonic_point(data.n, common.box_half, &mut rng);
        let mut sample = curvature_components(&core, &hp, &eng)?;
        decompose(&mut sample)?;
        let f_norm = sample.f_norm;
        let f2_norm = sample.f2_norm.unwrap_or(f64::NAN);
        let residual = f2_norm / (f_norm + f64::EPSILON);
        records.push(InstantonRecord {
            index,
            f_norm,
            f2_norm,
            residual,
        });
    }
    let residuals: Vec<f64> = records.iter().map(|r| r.residual).collect();
    let agg = aggregate(&residuals);
    let verdict = if agg.max_residual < common.tol {
        "pass"
    } else {
        "fail"
    };
    let report = Report {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "check-instanton",
        config: echo(Some(input), common),
        records,
        aggregate: agg,
        verdict,
    };
    emit(&report, common.output.as_ref())
}

fn cmd_curvature_xcheck(input: &PathBuf, common: &CommonOpts) -> Result<bool> {
    let data = load_adhm(input)?;
    let core = core_from_adhm(&data);
    let eng = common.engine();
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
    let cols = 2 * (data.n + 1);
    let mut records = Vec::with_capacity(common.samples);
    for index in 0..common.samples {
        let hp: HarmonicPoint<f64> = sample_harmonic_point(data.n, common.box_half, &mut rng);
        let mut worst = 0.0f64;
        for _ in 0..5 {
            let a = rng.gen_range(1..=cols);
            let b = rng.gen_range(1..=cols);
            let sa = if rng.gen_bool(0.5) {
                PmSign::Plus
            } else {
                PmSign::Minus
            };
            let sb = if rng.gen_bool(0.5) {
                PmSign::Plus
            } else {
                PmSign::Minus
            };
            let dx = complex_direction(a, sa, &hp)?;
            let dy = complex_direction(b, sb, &hp)?;
            let f_pot = curvature_from_potential(&core, &hp, &dx, &dy, &eng)?;
            let f_core = curvature_from_core(&core, &hp, &dx, &dy, &eng)?;
            let denom = f_core.max_abs().max(1.0);
            worst = worst.max(f_pot.sub(&f_core).max_abs() / denom);
        }
        records.push(PointRecord {
            index,
            residual: worst,
        });
    }
    let residuals: Vec<f64> = records.iter().map(|r| r.residual).collect();
    let agg = aggregate(&residuals);
    let verdict = if agg.max_residual < common.tol {
        "pass"
    } else {
        "fail"
    };
    let report = Report {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "curvature-xcheck",
        config: echo(Some(input), common),
        records,
        aggregate: agg,
        verdict,
    };
    emit(&report, common.output.as_ref())
}

fn default_reference(n: usize) -> Result<HarmonicPoint<f64>> {
    let mut q = vec![Quaternion::one()];
    for i in 0..n {
        q.push(Quaternion::new(0.1 + 0.05 * i as f64, 0.2, -0.1, 0.15));
    }
    Ok(HarmonicPoint::over(chart_from_quaternions(&q)?))
}

fn parse_reference(spec: &str, n: usize) -> Result<HarmonicPoint<f64>> {
    let vals: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>().context("parsing --reference"))
        .collect::<Result<_>>()?;
    if vals.len() != 4 * (n + 1) {
        bail!(
            "--reference needs {} components for n = {n}, got {}",
            4 * (n + 1),
            vals.len()
        );
    }
    let q: Vec<Quaternion<f64>> = vals
        .chunks(4)
        .map(|c| Quaternion::new(c[0], c[1], c[2], c[3]))
        .collect();
    Ok(HarmonicPoint::over(chart_from_quaternions(&q)?))
}

#[derive(Serialize)]
struct GaugeRecord {
    index: usize,
    component_residual: f64,
    prepotential_homogeneity: f64,
}

#[derive(Serialize)]
struct GaugeRecords {
    points: Vec<GaugeRecord>,
    /// Prepotential sample with residual block at the first sampled point.
    prepotential: PrepotentialReport<f64>,
}

fn cmd_analytic_gauge(
    input: &PathBuf,
    reference: Option<&String>,
    common: &CommonOpts,
) -> Result<bool> {
    let data = load_adhm(input)?;
    let core = core_from_adhm(&data);
    let eng = DiffEngine::with_step(1e-4);
    let n = data.n;
    let reference = match reference {
        Some(spec) => parse_reference(spec, n)?,
        None => default_reference(n)?,
    };
    let ag = analytic_gauge(&core, &reference, &eng)?;
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
    let len = 2 * (n + 1);
    let mut records = Vec::with_capacity(common.samples);
    let mut prepotential: Option<PrepotentialReport<f64>> = None;
    for index in 0..common.samples {
        // sample a real-slice target inside the cell around the reference
        let mut target = reference.clone();
        for j in 0..len {
            let re = rng.gen_range(-0.25..=0.25);
            let im = rng.gen_range(-0.25..=0.25);
            target.base.zeta[j] += quatgauge::C::new(re, im);
            target.base.zeta_t[j] += quatgauge::C::new(re, -im);
        }
        let mut component_residual: f64 = 0.0;
        let a0 = ag.component(&target, &TangentDirection::from_tag(n, FiberTag::H0))?;
        component_residual = component_residual.max(a0.max_abs());
        for a_idx in 1..=len {
            let d = complex_direction(a_idx, PmSign::Minus, &target)?;
            component_residual = component_residual.max(ag.component(&target, &d)?.max_abs());
        }
        for a_idx in 1..=2usize {
            let d = complex_direction(a_idx, PmSign::Plus, &target)?;
            component_residual = component_residual.max(ag.component(&target, &d)?.max_abs());
        }
        // H0-homogeneity of the prepotential: H0 . A-- = -2 A--
        let a_mm = prepotential_minus(&ag, &target)?;
        let h0_a = field_derivative(
            |q| prepotential_minus(&ag, q),
            &target,
            &TangentDirection::from_tag(n, FiberTag::H0),
            1e-3,
        )?;
        let prepotential_homogeneity = h0_a.add(&a_mm.scale(quatgauge::C::new(2.0, 0.0))).max_abs();
        if prepotential.is_none() {
            prepotential = Some(prepotential_report(&ag, &target)?);
        }
        records.push(GaugeRecord {
            index,
            component_residual,
            prepotential_homogeneity,
        });
    }
    let prepotential = prepotential.expect("at least one sample");
    let residuals: Vec<f64> = records
        .iter()
        .map(|r| r.component_residual.max(r.prepotential_homogeneity))
        .collect();
    let agg = aggregate(&residuals);
    let verdict = if agg.max_residual < common.tol {
        "pass"
    } else {
        "fail"
    };
    let report = Report {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "analytic-gauge",
        config: echo(Some(input), common),
        records: GaugeRecords {
            points: records,
            prepotential,
        },
        aggregate: agg,
        verdict,
    };
    emit(&report, common.output.as_ref())
}

fn cmd_brackets(n: usize, common: &CommonOpts) -> Result<bool> {
    let rep: BracketReport =
        verify_bracket_table::<f64>(n, common.samples, common.fd_step, common.tol, common.seed);
    let residuals: Vec<f64> = rep.entries.iter().map(|e| e.max_residual).collect();
    let verdict = if rep.all_pass { "pass" } else { "fail" };
    let report = Report {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "brackets",
        config: echo(None, common),
        records: rep,
        aggregate: aggregate(&residuals),
        verdict,
    };
    emit(&report, common.output.as_ref())
}

fn cmd_gen_example(n: usize, output: Option<&PathBuf>) -> Result<bool> {
    let centers = vec![Quaternion::<f64>::zero(); n];
    let data = one_instanton(n, &centers, 1.0)?;
    let body = serde_json::to_string_pretty(&data.to_wire())?;
    match output {
        Some(path) => {
            std::fs::write(path, &body)
                .with_context(|| format!("writing {}", path.display()))?;
            println!("gen-example: wrote {}", path.display());
        }
        None => println!("{body}"),
    }
    Ok(true)
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Validate { input, common } => {
            common.check()?;
            cmd_validate(input, common)
        }
        Command::CheckInstanton { input, common } => {
            common.check()?;
            cmd_check_instanton(input, common)
        }
        Command::CurvatureXcheck { input, common } => {
            common.check()?;
            cmd_curvature_xcheck(input, common)
        }
        Command::AnalyticGauge {
            input,
            reference,
            common,
        } => {
            common.check()?;
            cmd_analytic_gauge(input, reference.as_ref(), common)
        }
        Command::Brackets { n, common } => {
            common.check()?;
            cmd_brackets(*n, common)
        }
        Command::GenExample { n, output } => cmd_gen_example(*n, output.as_ref()),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => {}
        Ok(false) => std::process::exit(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(2);
        }
    }
}
