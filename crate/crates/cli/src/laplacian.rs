use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use nullspace::graph::{read_edge_list_file, Graph};
use nullspace::mmio::write_matrix_market_file;

use crate::common::{output, RunManifest, EXIT_OK};

#[derive(Debug, Args)]
pub struct LaplacianArgs {
    /// Whitespace-separated edge list, one `u v` pair per line.
    pub edges: PathBuf,
    /// Output Matrix Market file.
    #[arg(long)]
    pub out: PathBuf,
    /// Delete nodes of degree below this, then the nodes left isolated.
    #[arg(long, default_value_t = 0)]
    pub min_degree: usize,
    /// Row-to-node-id map as CSV; defaults to `<out>.nodes.csv`.
    #[arg(long)]
    pub map_out: Option<PathBuf>,
}

pub fn run(args: &LaplacianArgs) -> anyhow::Result<u8> {
    let mut manifest = RunManifest::new("laplacian", &args.edges);
    manifest.config = Some(format!("min_degree={}", args.min_degree));
    let edges = manifest.time("read", || {
        read_edge_list_file(&args.edges).with_context(|| format!("reading {}", args.edges.display()))
    })?;
    let full = Graph::from_edges(&edges);
    let (g, l) = manifest.time("build", || {
        let g = full.filter_min_degree(args.min_degree);
        let l = g.laplacian();
        (g, l)
    });
    let map_path = args.map_out.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".nodes.csv");
        p.into()
    });
    manifest.time("write", || -> anyhow::Result<()> {
        write_matrix_market_file(&l, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
        let mut w = output(Some(&map_path))?;
        writeln!(w, "row,node_id")?;
        for (i, id) in g.labels().iter().enumerate() {
            writeln!(w, "{},{id}", i + 1)?;
        }
        w.flush()?;
        Ok(())
    })?;
    let (components, ids) = g.components();
    let mut sizes = vec![0usize; components];
    ids.iter().for_each(|&c| sizes[c] += 1);
    manifest.outcome = "written".into();

    print!("{}", manifest.render());
    println!("input_nodes: {}", full.node_count());
    println!("input_edges: {}", full.edge_count());
    println!("nodes: {}", g.node_count());
    println!("edges: {}", g.edge_count());
    println!("components: {components}");
    println!("largest_component: {}", sizes.iter().max().copied().unwrap_or(0));
    println!("matrix: {}", args.out.display());
    println!("node_map: {}", map_path.display());
    Ok(EXIT_OK)
}
