//! Adaptive controller on the matched plant `s_dot = W(theta) H^T v` with a
//! hidden `theta`.

use modalgraph::controller::{AdaptiveController, Gains, MatrixInversion};
use modalgraph::plant::MatchedPlant;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> modalgraph::Result<()> {
    let k = 4;
    let m = 3 * k;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0)).qr().q();
    let b = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0)).qr().q();
    let sv = DVector::from_fn(m, |_, _| rng.random_range(0.5..1.0));
    let h = a * DMatrix::from_diagonal(&sv) * b.transpose() * 0.3;
    let compliance = DMatrix::from_diagonal(&DVector::from_fn(m, |i, _| {
        if i < 6 { 1.0 } else { 1.0 / (1.0 + rng.random_range(0.5..5.0)) }
    }));
    let theta = DVector::from_fn(m, |_, _| rng.random_range(0.5..2.0));

    let gains = Gains { q: 1.0, ..Gains::simulation() };
    let mut ctl = AdaptiveController::new(gains, compliance.clone())?;
    let mut plant = MatchedPlant::new(theta, DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0)))?;
    let target = DVector::zeros(m);
    let inv = MatrixInversion(h.clone());
    let e0 = plant.s.norm();
    for step in 0..=1000 {
        let out = ctl.step(&plant.s.clone(), &target, &inv)?;
        if step % 100 == 0 {
            println!("step {step:4}  |e_s|/|e_s0| {:.3e}  |v| {:.3e}", out.e_s.norm() / e0, out.v.norm());
        }
        plant.step(&out.v, &h, &compliance, gains.dt, None);
    }
    let err = &ctl.state.theta_hat - plant.theta_true();
    println!("theta error {:.3e} (theta is not required to converge)", err.norm());
    Ok(())
}
