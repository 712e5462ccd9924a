//! Manipulation setup at t0: `H`, the inversion `D(r, ds) = H ds`, and the
//! rotational extension.

use modalgraph::features::{feature_inversion, manipulation_setup, modal_rotation_setup, FeatureExtractor};
use modalgraph::harness::experiment::{prepare, run_sensor};
use modalgraph::harness::ExperimentConfig;
use modalgraph::projection::{compute_point_cloud_frame, support_size};
use modalgraph::sensor::sample_frame;
use nalgebra::DVector;

fn main() -> modalgraph::Result<()> {
    let cfg = ExperimentConfig::simulation();
    let setup = prepare(&cfg)?;
    let graph = &setup.graph;
    let ex = FeatureExtractor::new(graph, cfg.features.c)?;

    let first = sample_frame(&setup.plant, &run_sensor(&cfg), 0, 0)?;
    let local: Vec<_> = first.points.iter().map(|p| graph.to_graph_frame(p)).collect();
    let frame = compute_point_cloud_frame(&local, graph.params.a_z)?;
    let d_s = support_size(cfg.features.r_s_init, graph.mean_edge_len);
    let ms = manipulation_setup(&ex, &setup.plant.manip_positions(), frame, d_s)?;
    println!("H is {}x{} over {} supporting nodes", ms.h.nrows(), ms.h.ncols(), ms.supporting_nodes().len());

    let mut ds = DVector::zeros(graph.mode_count());
    ds[0] = 1e-2;
    println!("D(r, 0.01 e_0) = {:?}", feature_inversion(&ms, &ds).as_slice());

    let rot = modal_rotation_setup(&ms, graph, 1e-4)?;
    let v = feature_inversion(&rot, &ds);
    let (lin, ang) = rot.to_manipulation_twist(&v);
    println!("twist: linear {:?} angular {:?}", lin[0].as_slice(), ang[0].as_slice());
    Ok(())
}
