use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use nullspace::mmio::write_dense_array_file;
use nullspace::solver::{write_history_csv, Mode};
use nullspace::solve;

use crate::common::{describe_config, read_matrix, ConfigArgs, RunManifest, EXIT_NOT_CONVERGED, EXIT_OK};

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Matrix Market coordinate file.
    pub matrix: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Write the basis as a Matrix Market array.
    #[arg(long)]
    pub basis_out: Option<PathBuf>,
    /// Write the per-restart history as CSV.
    #[arg(long)]
    pub history_out: Option<PathBuf>,
}

pub fn run(args: &SolveArgs) -> anyhow::Result<u8> {
    let mut manifest = RunManifest::new("solve", &args.matrix);
    let a = manifest.time("read", || read_matrix(&args.matrix))?;
    let config = args.config.to_config(&a)?;
    manifest.config = Some(describe_config(&config));
    let r = manifest.time("solve", || solve(&a, &config))?;
    manifest.time("write", || -> anyhow::Result<()> {
        if let Some(p) = &args.basis_out {
            write_dense_array_file(&r.basis, p).with_context(|| format!("writing {}", p.display()))?;
        }
        if let Some(p) = &args.history_out {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            write_history_csv(&r.history, BufWriter::new(f))?;
        }
        Ok(())
    })?;
    manifest.matvecs = Some(r.matvecs);
    manifest.outcome = if r.converged { "converged" } else { "not converged" }.into();

    let vav = match config.mode {
        Mode::Gram => "residual_vtatav",
        Mode::Spsd => "residual_vtav",
    };
    print!("{}", manifest.render());
    println!("nullity: {}", r.nullity);
    println!("residual_av: {:e}", r.residual_av);
    println!("{vav}: {:e}", r.residual_vav);
    println!("matvecs: {}", r.matvecs);
    println!("restarts: {}", r.restarts);
    println!("converged: {}", r.converged);
    Ok(if r.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}
