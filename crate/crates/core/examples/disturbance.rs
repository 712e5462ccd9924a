//! Force pulse on the object mid-run, and persistent random forces of
//! growing bound.

use modalgraph::harness::experiment::steady_window;
use modalgraph::harness::log::StepLog;
use modalgraph::harness::{run_experiment, ExperimentConfig};
use modalgraph::plant::{build_test_object, Disturbance};

fn mean_e_s(rows: &[StepLog]) -> f64 {
    rows.iter().map(|r| r.e_s_norm).sum::<f64>() / rows.len() as f64
}

fn main() -> modalgraph::Result<()> {
    let base = ExperimentConfig::simulation();
    let nodes = build_test_object(&base.plant)?.observable_set[..5].to_vec();

    let mut cfg = base.clone();
    cfg.disturbances = vec![Disturbance {
        nodes: nodes.clone(),
        bound: 2.0,
        start_step: 1500,
        end_step: 1600,
        direction: Some([0.0, 0.3, 1.0]),
    }];
    let (_, rows) = run_experiment(&cfg, None)?;
    println!("pulse: before {:.4e}", mean_e_s(&rows[1300..1500]));
    println!("       during {:.4e}", mean_e_s(&rows[1500..1600]));
    println!("       final  {:.4e}", mean_e_s(steady_window(&rows)));

    for bound in [0.0, 2.0, 4.0] {
        let mut cfg = base.clone();
        cfg.disturbances = vec![Disturbance {
            nodes: nodes.clone(),
            bound,
            start_step: 0,
            end_step: usize::MAX,
            direction: None,
        }];
        let (s, _) = run_experiment(&cfg, None)?;
        println!("random bound {bound}: steady |e_s| {:.4e}", s.steady_e_s_norm);
    }
    Ok(())
}
