//! Shape-error metrics.

use nalgebra::Vector3;

/// Total mesh error `sum |x_i - x*_i|^2`.
pub fn mesh_error(positions: &[Vector3<f64>], desired: &[Vector3<f64>]) -> f64 {
    assert_eq!(positions.len(), desired.len(), "mesh sizes differ");
    positions.iter().zip(desired).map(|(a, b)| (a - b).norm_squared()).sum()
}

fn mean_nearest(from: &[Vector3<f64>], to: &[Vector3<f64>]) -> f64 {
    let total: f64 = from
        .iter()
        .map(|p| to.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
        .sum();
    total / from.len() as f64
}

/// Chamfer distance: mean nearest-neighbor distance in both directions, summed.
/// Zero for two empty sets, infinite when exactly one is empty.
pub fn chamfer(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => f64::INFINITY,
        _ => mean_nearest(a, b) + mean_nearest(b, a),
    }
}
