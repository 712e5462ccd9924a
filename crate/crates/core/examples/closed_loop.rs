//! The simulation run: modal controller against the FEM plant. Writes the log
//! to `closed_loop.csv`.
//!
//! `cargo run --release --example closed_loop -- [seed]`

use modalgraph::harness::{run_experiment, ExperimentConfig};

fn main() -> modalgraph::Result<()> {
    let mut cfg = ExperimentConfig::simulation();
    if let Some(seed) = std::env::args().nth(1) {
        cfg.seed = seed.parse().expect("seed");
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create("closed_loop.csv")?);
    let (summary, rows) = run_experiment(&cfg, Some(&mut f))?;
    for r in rows.iter().step_by(300) {
        println!("step {:5}  e_x {:.4e}  |e_s| {:.4e}  |z| {:.4e}", r.step, r.e_x, r.e_s_norm, r.z_norm);
    }
    println!(
        "steady e_x {:.4e} = {:.1}% of initial",
        summary.steady_e_x,
        100.0 * summary.steady_e_x / summary.initial_e_x
    );
    Ok(())
}
