//! Modal controller against the Cartesian diminishing-rigidity baseline.

use modalgraph::harness::{run_experiment, ControllerKind, ExperimentConfig};

fn main() -> modalgraph::Result<()> {
    for kind in [ControllerKind::Modal, ControllerKind::Cartesian] {
        let mut cfg = ExperimentConfig::simulation();
        cfg.controller = kind;
        let (s, _) = run_experiment(&cfg, None)?;
        println!("{kind:?}: e_x {:.4e} -> {:.4e}, chamfer {:.4e}", s.initial_e_x, s.steady_e_x, s.steady_d_cd);
    }
    Ok(())
}
