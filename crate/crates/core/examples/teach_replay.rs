//! Teaches a target once, saves it, and servos to the saved file.

use modalgraph::harness::config::TargetConfig;
use modalgraph::harness::experiment::teach;
use modalgraph::harness::{run_experiment, ExperimentConfig};
use modalgraph::plant::build_test_object;

fn main() -> modalgraph::Result<()> {
    let mut cfg = ExperimentConfig::simulation();
    let mut plant = build_test_object(&cfg.plant)?;
    let record = teach(&mut plant, &cfg)?;
    let path = std::env::temp_dir().join("modalgraph_target.json");
    record.save(&path)?;
    println!("{} frames saved to {}", record.clouds.len(), path.display());

    cfg.target = TargetConfig::File { path };
    cfg.steps = 1000;
    let (s, _) = run_experiment(&cfg, None)?;
    println!("e_x {:.4e} -> {:.4e}", s.initial_e_x, s.steady_e_x);
    Ok(())
}
