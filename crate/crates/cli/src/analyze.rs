use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Subcommand};
use nullspace::analysis::{
    cdf_shape_check, chebyshev_decay, krylov_angle_trace, repulsion_experiment, residual_bound_suite,
    MAX_DENSE_DIM,
};
use nullspace::dense::sym_eig;
use nullspace::mmio::read_dense_array_file;
use nullspace::rng::{gaussian_vec, stream, Stream};
use nullspace::solver::{Mode, Preconditioner};
use nullspace::{solve, Error, OperatorMode, PerturbedOperator, SparseMatrix, UNIT_ROUNDOFF};

use crate::common::{describe_config, output, read_matrix, ConfigArgs, ModeArg, RunManifest, EXIT_OK};

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(subcommand)]
    pub command: AnalyzeCommand,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Minimum gaps of the split zero cluster of AᵀA + εD over random D.
    Repulsion(RepulsionArgs),
    /// Tangent of the t-th principal angle between the null space and a
    /// growing single-vector Krylov space.
    Angles(AnglesArgs),
    /// Residual and angle inequalities for a null-space basis.
    Bounds(BoundsArgs),
}

#[derive(Debug, Args)]
pub struct RepulsionArgs {
    pub matrix: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnglesArgs {
    pub matrix: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    pub mode: ModeArg,
    /// Null-space dimension; defaults to the count of eigenvalues below 3ε.
    #[arg(long)]
    pub nullity: Option<usize>,
    /// Which principal angle to track; defaults to the nullity.
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long, default_value_t = 40)]
    pub ell_max: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    pub matrix: PathBuf,
    /// Basis to check, as a Matrix Market array; solved for when absent.
    #[arg(long)]
    pub basis: Option<PathBuf>,
    /// Smallest nonzero singular value of A; computed densely when absent.
    #[arg(long)]
    pub sigma_min: Option<f64>,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &AnalyzeArgs) -> anyhow::Result<u8> {
    match &args.command {
        AnalyzeCommand::Repulsion(a) => repulsion(a),
        AnalyzeCommand::Angles(a) => angles(a),
        AnalyzeCommand::Bounds(a) => bounds(a),
    }
}

fn read_small(path: &Path) -> anyhow::Result<SparseMatrix> {
    let a = read_matrix(path)?;
    if a.ncols() > MAX_DENSE_DIM {
        bail!(Error::InvalidArgument(format!(
            "analysis is dense and needs at most {MAX_DENSE_DIM} columns, got {}",
            a.ncols()
        )));
    }
    Ok(a)
}

/// Summaries go to stderr so stdout stays pure CSV.
fn report(manifest: &RunManifest, lines: &[String]) {
    eprint!("{}", manifest.render());
    for l in lines {
        eprintln!("{l}");
    }
}

fn repulsion(args: &RepulsionArgs) -> anyhow::Result<u8> {
    let mut manifest = RunManifest::new("analyze repulsion", &args.matrix);
    manifest.config = Some(format!("epsilon={:e} trials={} seed={}", args.epsilon, args.trials, args.seed));
    let a = manifest.time("read", || read_small(&args.matrix))?;
    let r = manifest.time("trials", || repulsion_experiment(&a, args.epsilon, args.trials, args.seed))?;
    let mut w = output(args.out.as_ref())?;
    writeln!(w, "trial,min_gap")?;
    for (t, g) in r.min_gaps.iter().enumerate() {
        writeln!(w, "{t},{g:e}")?;
    }
    w.flush()?;
    let shape = cdf_shape_check(&r.min_gaps, r.epsilon);
    manifest.outcome = if shape.consistent { "consistent" } else { "inconsistent" }.into();
    let mut lines = vec![format!("nullity: {}", r.nullity)];
    lines.extend(r.quantiles.iter().map(|(p, q)| format!("quantile_{p}: {q:e}")));
    lines.push(format!(
        "cdf_fit: window={:e} intercept={:.4} slope={:.4} band={:.4} max_excess={:.4}",
        shape.window, shape.intercept, shape.slope, shape.band, shape.max_excess
    ));
    report(&manifest, &lines);
    Ok(EXIT_OK)
}

fn plain_mode(mode: ModeArg, a: &SparseMatrix) -> OperatorMode {
    match mode {
        ModeArg::Gram => OperatorMode::Gram,
        ModeArg::Spsd => OperatorMode::Spsd,
        ModeArg::Auto if a.nrows() == a.ncols() && a.is_symmetric(0.0) => OperatorMode::Spsd,
        ModeArg::Auto => OperatorMode::Gram,
    }
}

fn angles(args: &AnglesArgs) -> anyhow::Result<u8> {
    let mut manifest = RunManifest::new("analyze angles", &args.matrix);
    let a = manifest.time("read", || read_small(&args.matrix))?;
    let mode = plain_mode(args.mode, &a);
    let op = PerturbedOperator::new(Arc::new(a), mode, args.epsilon, args.seed)?;
    let b = op.to_dense()?;
    let eigs = sym_eig(&b)?.eigenvalues;
    let nullity = args
        .nullity
        .unwrap_or_else(|| eigs.iter().take_while(|&&l| l < 3.0 * args.epsilon).count());
    let t = args.t.unwrap_or(nullity);
    manifest.config = Some(format!(
        "epsilon={:e} seed={} mode={mode:?} nullity={nullity} t={t} ell_max={}",
        args.epsilon, args.seed, args.ell_max
    ));
    let omega = gaussian_vec(&mut stream(args.seed, Stream::StartBlock), op.dim());
    let trace = manifest.time("trace", || krylov_angle_trace(&b, &omega, nullity, t, args.ell_max))?;
    let mut w = output(args.out.as_ref())?;
    writeln!(w, "ell,tan_angle,ratio,chebyshev_bound")?;
    let first = trace.tans.first().copied().unwrap_or(f64::NAN);
    for ((&ell, &tan), ratio) in trace.ells.iter().zip(&trace.tans).zip(trace.ratios()) {
        let bound = first * chebyshev_decay(&eigs, nullity, ell - t);
        writeln!(w, "{ell},{tan:e},{ratio:e},{bound:e}")?;
    }
    w.flush()?;
    let violations = trace.bound_violations(&eigs, nullity, 1e3 * UNIT_ROUNDOFF.sqrt() * first.max(1.0));
    manifest.outcome = if !trace.is_resolved() {
        "unresolved".into()
    } else {
        format!("{} bound violations", violations.len())
    };
    report(
        &manifest,
        &[
            format!("points: {}", trace.ells.len()),
            format!("truncated: {}", trace.truncated),
            format!("resolved: {}", trace.is_resolved()),
        ],
    );
    Ok(EXIT_OK)
}

/// Square root of the smallest eigenvalue of `AᵀA` above `100·n·u·‖AᵀA‖`.
fn dense_sigma_min(a: &SparseMatrix) -> anyhow::Result<f64> {
    let d = a.to_dense();
    let eigs = sym_eig(&d.tr_matmul(&d))?.eigenvalues;
    let top = eigs.last().copied().unwrap_or(0.0);
    let cut = 100.0 * a.ncols() as f64 * UNIT_ROUNDOFF * top;
    eigs.iter()
        .find(|&&l| l > cut)
        .map(|l| l.sqrt())
        .context("matrix has no nonzero singular value")
}

fn bounds(args: &BoundsArgs) -> anyhow::Result<u8> {
    let mut manifest = RunManifest::new("analyze bounds", &args.matrix);
    if args.config.mode == ModeArg::Spsd || args.config.precond != crate::common::PrecondArg::None {
        bail!(Error::InvalidArgument(
            "residual bounds apply to the unpreconditioned Gram operator only".into()
        ));
    }
    let a = manifest.time("read", || read_small(&args.matrix))?;
    let config = nullspace::SolverConfig {
        mode: Mode::Gram,
        preconditioner: Preconditioner::None,
        ..args.config.to_config(&a)?
    };
    manifest.config = Some(describe_config(&config));
    let v = match &args.basis {
        Some(p) => read_dense_array_file(p).with_context(|| format!("reading {}", p.display()))?,
        None => {
            let r = manifest.time("solve", || solve(&a, &config))?;
            manifest.matvecs = Some(r.matvecs);
            r.basis
        }
    };
    let sigma = match args.sigma_min {
        Some(s) => s,
        None => manifest.time("sigma_min", || dense_sigma_min(&a))?,
    };
    let op = PerturbedOperator::new(Arc::new(a), OperatorMode::Gram, config.epsilon, config.seed)?;
    let checks = manifest.time("bounds", || residual_bound_suite(&op, &v, sigma, None))?;
    let mut w = output(args.out.as_ref())?;
    writeln!(w, "context,quantity,bound,applicable,satisfied")?;
    for c in &checks {
        writeln!(w, "{},{:e},{:e},{},{}", c.context, c.quantity, c.bound, c.applicable, c.satisfied)?;
    }
    w.flush()?;
    let applicable = checks.iter().filter(|c| c.applicable).count();
    let failed = checks.iter().filter(|c| !c.passed()).count();
    manifest.outcome = format!("{failed} failed of {applicable} applicable");
    report(&manifest, &[format!("sigma_min: {sigma:e}"), format!("nullity: {}", v.ncols())]);
    Ok(EXIT_OK)
}
