//! Frames from the simulated sensor: varying count, noise and an occlusion.

use modalgraph::plant::{build_test_object, PlantConfig};
use modalgraph::sensor::{sample_frame, CountRange, Occlusion, SensorConfig};

fn main() -> modalgraph::Result<()> {
    let plant = build_test_object(&PlantConfig::default())?;
    let cfg = SensorConfig {
        l: CountRange::Range([15, 25]),
        noise_sigma: 5e-4,
        occlusions: vec![Occlusion {
            start_step: 3,
            end_step: 6,
            min: [0.05, -1.0, -1.0],
            max: [1.0, 1.0, 1.0],
        }],
        seed: 11,
        ..SensorConfig::default()
    };
    for step in 0..8 {
        let f = sample_frame(&plant, &cfg, step, step as u64)?;
        println!("step {step}: {:2} points, first node {}", f.points.len(), f.nodes[0]);
    }
    Ok(())
}
