//! The FEM test object: quasi-static response to a manipulation-point motion.

use modalgraph::plant::{build_test_object, PlantConfig};
use nalgebra::DVector;

fn main() -> modalgraph::Result<()> {
    let mut plant = build_test_object(&PlantConfig::default())?;
    println!(
        "{} nodes, {} tets, {} fixed, {} observable, manipulated node {:?}",
        plant.rest_positions.len(),
        plant.tets.len(),
        plant.fixed_set.len(),
        plant.observable_set.len(),
        plant.manip_set
    );
    for t in [0.25, 0.5, 1.0] {
        plant.quasi_static_solve(&(DVector::from_vec(vec![-0.02, 0.01, 0.03]) * t))?;
        let u = plant.displacement();
        let obs = plant
            .observable_set
            .iter()
            .map(|&i| u.fixed_rows::<3>(3 * i).norm())
            .fold(0.0, f64::max);
        println!(
            "t {t:4}: max observable displacement {obs:.4e}, strain energy {:.4e}, residual {:.2e}",
            plant.strain_energy(),
            plant.equilibrium_residual()
        );
    }
    Ok(())
}
