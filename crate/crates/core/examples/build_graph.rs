//! Builds the simulation graph, prints its spectrum and writes a graph file.
//!
//! `cargo run --example build_graph -- [out.json]`

use modalgraph::graph::{build_modal_graph, GraphFile, MaterialParams, Resolution, SuperquadricParams};

fn main() -> modalgraph::Result<()> {
    let params = SuperquadricParams::ellipsoid(0.11, 0.08, 0.05);
    let material = MaterialParams::new(50.0, 0.45, 1.0);
    let resolution = Resolution::uniform(0.0209).with_offset([0.5, 0.0, 0.0]);
    let graph = build_modal_graph(&params, &material, &resolution, 20)?;

    println!(
        "{} nodes ({} on the boundary), {} edges, mean edge length {:.4}",
        graph.node_count(),
        graph.boundary_indices().len(),
        graph.edges.len(),
        graph.mean_edge_len
    );
    for (j, l) in graph.lambdas.iter().enumerate() {
        println!("mode {j:2}  lambda {l:12.5e}  K~_jj {:12.5e}", graph.ktilde[(j, j)]);
    }

    let out = std::env::args().nth(1).unwrap_or_else(|| "graph.json".into());
    GraphFile::new(graph).save(std::path::Path::new(&out))?;
    println!("written to {out}");
    Ok(())
}
