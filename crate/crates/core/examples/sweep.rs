//! Sweeps the sensor count `l` over a few seeds and prints the averages.

use modalgraph::harness::sweep::summary_table;
use modalgraph::harness::{sweep, ExperimentConfig, SweepAxis};

fn main() -> modalgraph::Result<()> {
    let mut cfg = ExperimentConfig::simulation();
    cfg.steps = 1500;
    let runs = sweep(&cfg, SweepAxis::L, &[10.0, 20.0, 28.0], 3, None)?;
    print!("{}", summary_table(SweepAxis::L, &runs));
    Ok(())
}
