//! Features of the rest shape and of a taught deformation; a shuffled cloud
//! gives the same features.

use modalgraph::features::{FeatureExtractor, Support};
use modalgraph::harness::config::TargetConfig;
use modalgraph::harness::experiment::{prepare, run_sensor};
use modalgraph::harness::ExperimentConfig;
use modalgraph::projection::support_size;
use modalgraph::sensor::{sample_frame, CountRange};

fn main() -> modalgraph::Result<()> {
    let mut cfg = ExperimentConfig::simulation();
    cfg.sensor.l = CountRange::Fixed(30);
    cfg.target = TargetConfig::Teach {
        displacement: vec![[-0.02, 0.01, 0.03]],
        frames: 1,
    };
    let setup = prepare(&cfg)?;
    let ex = FeatureExtractor::new(&setup.graph, cfg.features.c)?;
    let support = Support::new(support_size(cfg.features.r_s, setup.graph.mean_edge_len));

    let rest = sample_frame(&setup.plant, &run_sensor(&cfg), 0, 0)?.points;
    let s0 = ex.extract(&rest, &support)?;
    let s1 = ex.extract(setup.target.cloud(), &support)?;
    println!("{} points, {} supporting nodes", s0.point_count, s0.supporting_nodes.len());
    println!("rank deficient: {}", s0.rank_deficient);
    println!("|s(rest)|   = {:.5e}", s0.features.0.norm());
    println!("|s* - s0|   = {:.5e}", (&s1.features.0 - &s0.features.0).norm());

    let mut shuffled = rest.clone();
    shuffled.reverse();
    shuffled.rotate_left(7);
    let s2 = ex.extract(&shuffled, &support)?;
    println!("shuffled difference {:.3e}", (&s2.features.0 - &s0.features.0).amax());
    Ok(())
}
