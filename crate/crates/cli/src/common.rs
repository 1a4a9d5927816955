//! Shared flags, manifest output and error classification.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use nullspace::mmio::read_matrix_market_file;
use nullspace::solver::{Mode, Preconditioner};
use nullspace::{Error, SolverConfig, SparseMatrix};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_SHAPE: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;

/// Parse and argument failures exit 1, shape failures 2.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::DimensionMismatch(_)
                | Error::NotSymmetric
                | Error::InvalidStructure(_)
                | Error::IndexOutOfRange { .. }
                | Error::RankDeficient(_)
                | Error::NotOrthonormal(_)
                | Error::ZeroPivot(_) => EXIT_SHAPE,
                _ => EXIT_USAGE,
            };
        }
    }
    EXIT_USAGE
}

/// A closed stdout (`nullspace ... | head`) is not a failure.
pub fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain().any(|c| {
        c.downcast_ref::<std::io::Error>()
            .is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
    })
}

/// Applies `NULLSPACE_THREADS`: `0` forces sequential kernels, `k > 0`
/// caps the thread pool at `k`.
pub fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("NULLSPACE_THREADS") else {
        return Ok(());
    };
    let k: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("NULLSPACE_THREADS must be a nonnegative integer, got '{raw}'"))?;
    if k == 0 {
        nullspace::sparse::set_sequential(true);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(k.max(1))
        .build_global()
        .context("configuring the thread pool")?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Gram,
    Spsd,
    /// SPSD for square symmetric input, Gram otherwise.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecondArg {
    None,
    Inner,
    Outer,
}

/// Solver flags.
#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Perturbation size ε.
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    /// Block size d; defaults to max(1, dimk / 16).
    #[arg(long)]
    pub block: Option<usize>,
    /// Krylov dimension at restart.
    #[arg(long, default_value_t = 128)]
    pub dimk: usize,
    /// Threshold on ‖AV‖; defaults to ε.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = PrecondArg::None)]
    pub precond: PrecondArg,
    #[arg(long, default_value_t = 500)]
    pub max_restarts: usize,
    /// Run the solver on one thread.
    #[arg(long)]
    pub deterministic: bool,
}

impl ConfigArgs {
    pub fn resolve_mode(&self, a: &SparseMatrix) -> Mode {
        match self.mode {
            ModeArg::Gram => Mode::Gram,
            ModeArg::Spsd => Mode::Spsd,
            ModeArg::Auto if a.nrows() == a.ncols() && a.is_symmetric(0.0) => Mode::Spsd,
            ModeArg::Auto => Mode::Gram,
        }
    }

    pub fn to_config(&self, a: &SparseMatrix) -> anyhow::Result<SolverConfig> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            bail!(Error::InvalidArgument(format!("--epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(SolverConfig {
            epsilon: self.epsilon,
            block_size: self.block,
            dim_k: self.dimk,
            residual_tol: self.tol,
            max_restarts: self.max_restarts,
            seed: self.seed,
            mode: self.resolve_mode(a),
            preconditioner: match self.precond {
                PrecondArg::None => Preconditioner::None,
                PrecondArg::Inner => Preconditioner::Inner,
                PrecondArg::Outer => Preconditioner::Outer,
            },
            deterministic: self.deterministic,
            ..SolverConfig::default()
        })
    }
}

/// `key=value` pairs of every field that affects a run.
pub fn describe_config(c: &SolverConfig) -> String {
    let mode = match c.mode {
        Mode::Gram => "gram",
        Mode::Spsd => "spsd",
    };
    let precond = match c.preconditioner {
        Preconditioner::None => "none",
        Preconditioner::Inner => "inner",
        Preconditioner::Outer => "outer",
    };
    format!(
        "epsilon={:e} block={} dimk={} tol={:e} seed={} mode={} precond={} max_restarts={} deterministic={} \
         droptol={:e} diagcomp={} norm_iters={} settle_tol={:e} reorth={:?}",
        c.epsilon,
        c.block(),
        c.krylov_dim(),
        c.tolerance(),
        c.seed,
        mode,
        precond,
        c.max_restarts,
        c.deterministic,
        c.droptol,
        c.diagcomp,
        c.norm_iters,
        c.settle_tol,
        c.reorth,
    )
}

/// Reproducibility header printed before every summary.
#[derive(Debug, Default)]
pub struct RunManifest {
    pub input: String,
    pub command: String,
    pub config: Option<String>,
    pub timings: Vec<(&'static str, f64)>,
    pub matvecs: Option<usize>,
    pub outcome: String,
}

impl RunManifest {
    pub fn new(command: &str, input: &Path) -> Self {
        RunManifest {
            input: input.display().to_string(),
            command: command.to_string(),
            ..RunManifest::default()
        }
    }

    /// Runs `f` and records its wall-clock time under `phase`.
    pub fn time<T>(&mut self, phase: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push((phase, start.elapsed().as_secs_f64() * 1e3));
        out
    }

    pub fn render(&self) -> String {
        let mut s = format!("# input: {}\n# command: {}\n", self.input, self.command);
        if let Some(c) = &self.config {
            s.push_str(&format!("# config: {c}\n"));
        }
        let timings: Vec<String> = self.timings.iter().map(|(k, v)| format!("{k}={v:.3}")).collect();
        s.push_str(&format!("# timings_ms: {}\n", timings.join(" ")));
        if let Some(m) = self.matvecs {
            s.push_str(&format!("# matvecs: {m}\n"));
        }
        s.push_str(&format!("# outcome: {}\n", self.outcome));
        s
    }
}

pub fn read_matrix(path: &Path) -> anyhow::Result<SparseMatrix> {
    read_matrix_market_file(path).with_context(|| format!("reading {}", path.display()))
}

/// `path` itself, or stdout when absent.
pub fn output(path: Option<&PathBuf>) -> anyhow::Result<Box<dyn std::io::Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}
