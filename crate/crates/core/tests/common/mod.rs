#![allow(dead_code)]

use modalgraph::graph::{build_modal_graph, MaterialParams, ModalGraph, Resolution, SuperquadricParams};
use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn small_params() -> (SuperquadricParams, MaterialParams, Resolution) {
    (
        SuperquadricParams::ellipsoid(0.05, 0.05, 0.04),
        MaterialParams::new(50.0, 0.45, 1.0),
        Resolution::uniform(0.02),
    )
}

/// 56 nodes.
pub fn small_graph(m: usize) -> ModalGraph {
    let (p, mat, res) = small_params();
    build_modal_graph(&p, &mat, &res, m).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Points scattered around the primitive surface of `graph`.
pub fn surface_cloud(graph: &ModalGraph, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vector3<f64>> {
    let p = &graph.params;
    (0..n)
        .map(|_| {
            let zeta = rng.random_range(-1.3..1.3);
            let sigma = rng.random_range(-3.1..3.1);
            let r = rng.random_range(0.9..1.1);
            Vector3::new(
                r * p.a_x * f64::cos(zeta) * f64::cos(sigma),
                r * p.a_y * f64::cos(zeta) * f64::sin(sigma),
                r * p.a_z * f64::sin(zeta),
            )
        })
        .collect()
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, ascending.
pub fn jacobi_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut a = a.clone();
    for _ in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-14 * a.norm() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}
