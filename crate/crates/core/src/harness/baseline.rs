//! Cartesian baseline with a diminishing-rigidity Jacobian.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::stack;

/// Singular-value floor of the pseudo-inverse, relative to the largest.
pub const PINV_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineGains {
    pub k_b: f64,
    /// Rigidity decay per meter.
    pub k_r: f64,
    /// Pair measured and desired points by physical identity rather than by
    /// sample order.
    pub correspondence: bool,
}

impl Default for BaselineGains {
    fn default() -> Self {
        Self {
            k_b: 2.0,
            k_r: 10.0,
            correspondence: false,
        }
    }
}

/// `J_b`, `3l x 3k`, with blocks `exp(-k_r |p_i - r_j|) I3` from rest-shape distances.
pub fn diminishing_rigidity_jacobian(
    rest_points: &[Vector3<f64>],
    rest_manip: &[Vector3<f64>],
    k_r: f64,
) -> DMatrix<f64> {
    let (l, k) = (rest_points.len(), rest_manip.len());
    let mut j = DMatrix::zeros(3 * l, 3 * k);
    for (i, p) in rest_points.iter().enumerate() {
        for (c, r) in rest_manip.iter().enumerate() {
            let w = (-k_r * (p - r).norm()).exp();
            for a in 0..3 {
                j[(3 * i + a, 3 * c + a)] = w;
            }
        }
    }
    j
}

/// Moore-Penrose pseudo-inverse by SVD.
pub fn pseudo_inverse(j: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = j.clone().svd(true, true);
    let eps = PINV_TOL * svd.singular_values.max();
    svd.pseudo_inverse(eps).map_err(|e| Error::Singular(e.to_string()))
}

/// `v = -k_b J_b^+ (x - x*)`.
pub fn cartesian_baseline_step(
    cloud: &[Vector3<f64>],
    desired_cloud: &[Vector3<f64>],
    rest_points: &[Vector3<f64>],
    rest_manip: &[Vector3<f64>],
    gains: &BaselineGains,
) -> Result<DVector<f64>> {
    if cloud.len() != desired_cloud.len() || cloud.len() != rest_points.len() {
        return Err(Error::Dimension(format!(
            "baseline needs equal sizes, got {} measured and {} desired",
            cloud.len(),
            desired_cloud.len()
        )));
    }
    if cloud.is_empty() || rest_manip.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let j = diminishing_rigidity_jacobian(rest_points, rest_manip, gains.k_r);
    let e = stack(cloud) - stack(desired_cloud);
    Ok(pseudo_inverse(&j)? * e * -gains.k_b)
}
