//! Projects a few points onto the primitive and prints their domains of influence.

use modalgraph::graph::{build_modal_graph, MaterialParams, Resolution, SuperquadricParams};
use modalgraph::projection::{domain_of_influence, support_size, weight};
use modalgraph::features::FeatureExtractor;
use nalgebra::Vector3;

fn main() -> modalgraph::Result<()> {
    let graph = build_modal_graph(
        &SuperquadricParams::ellipsoid(0.11, 0.08, 0.05),
        &MaterialParams::new(50.0, 0.45, 1.0),
        &Resolution::uniform(0.0209).with_offset([0.5, 0.0, 0.0]),
        12,
    )?;
    let ex = FeatureExtractor::new(&graph, 2.0)?;
    let points = [
        Vector3::new(0.10, 0.0, 0.0),
        Vector3::new(0.0, 0.07, 0.02),
        Vector3::new(-0.05, -0.03, 0.04),
    ];
    let proj = ex.project(&points)?;
    println!("cloud frame origin {:?}", proj.frame.translation.as_slice());

    for r_s in [1.0, 3.0, f64::INFINITY] {
        let d_s = support_size(r_s, graph.mean_edge_len);
        println!("r_s = {r_s}, d_s = {d_s:.4}");
        for (p, c) in points.iter().zip(&proj.coords) {
            match domain_of_influence(c, &graph, d_s, ex.c, None) {
                Ok(dom) => {
                    let top = dom.weights.iter().cloned().fold(0.0, f64::max);
                    println!("  {:?}: {} nodes, largest weight {top:.3}", p.as_slice(), dom.len());
                }
                Err(e) => println!("  {:?}: {e}", p.as_slice()),
            }
        }
    }

    println!("weight profile, d_s = 1, c = 2");
    for d in [0.0, 0.25, 0.5, 0.75, 1.0, 1.5] {
        println!("  d = {d:4}  w = {:.4}", weight(d, 1.0, 2.0));
    }
    Ok(())
}
