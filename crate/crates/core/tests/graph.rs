mod common;

use common::{jacobi_eigenvalues, small_graph, small_params};
use modalgraph::graph::{
    assemble_stiffness_mass, build_modal_graph, discretize_superquadric, GraphFile, ModeNormalization,
    Resolution, SuperquadricParams, RIGID_MODES,
};
use modalgraph::Error;
use nalgebra::{DMatrix, DVector, Vector3};

fn dense_pair() -> (DMatrix<f64>, DVector<f64>) {
    let (p, mat, res) = small_params();
    let d = discretize_superquadric(&p, &res).unwrap();
    assemble_stiffness_mass(&d.nodes, &d.edges, &mat, res.cell_volume()).unwrap()
}

#[test]
fn small_graph_size() {
    let g = small_graph(12);
    assert!(g.node_count() <= 60 && g.node_count() >= 30);
    assert_eq!(g.phi.shape(), (3 * g.node_count(), 12));
}

#[test]
fn eigenvalues_match_jacobi_reference() {
    let (k, mass) = dense_pair();
    let inv = mass.map(|v| 1.0 / v.sqrt());
    let a = DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| k[(i, j)] * inv[i] * inv[j]);
    let reference = jacobi_eigenvalues(&a);
    let g = small_graph(24);
    let scale = reference.last().unwrap().abs();
    for (j, l) in g.lambdas.iter().enumerate() {
        assert!((l - reference[j]).abs() <= 1e-8 * scale, "mode {j}: {l} vs {}", reference[j]);
    }
}

#[test]
fn exactly_six_rigid_modes() {
    let (k, mass) = dense_pair();
    let n = k.nrows();
    let (_, lambdas) = modalgraph::graph::solve_low_frequency_modes(&k, &mass, n).unwrap();
    let max = lambdas.max();
    let zero = lambdas.iter().filter(|l| l.abs() < 1e-8 * max).count();
    assert_eq!(zero, RIGID_MODES);
}

#[test]
fn eigen_residual_and_mass_orthonormality() {
    let (k, mass) = dense_pair();
    let g = small_graph(20);
    let m = DMatrix::from_diagonal(&mass);
    let ortho = g.phi.transpose() * &m * &g.phi;
    assert!((ortho - DMatrix::identity(20, 20)).amax() < 1e-8);
    let res = &k * &g.phi - &m * &g.phi * DMatrix::from_diagonal(&g.lambdas);
    assert!(res.norm() <= 1e-8 * (&k * &g.phi).norm());
    let lmax = g.lambdas.max();
    for j in 0..20 {
        assert!((g.ktilde[(j, j)] - g.lambdas[j]).abs() <= 1e-6 * lmax);
    }
}

#[test]
fn sign_rule_largest_entry_positive() {
    let g = small_graph(10);
    for col in g.phi.column_iter() {
        let pivot = col.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap();
        assert!(pivot > 0.0);
    }
}

#[test]
fn rigid_translation_has_zero_energy() {
    let (k, _) = dense_pair();
    let n = k.nrows() / 3;
    for a in 0..3 {
        let mut u = DVector::zeros(3 * n);
        for i in 0..n {
            u[3 * i + a] = 1.0;
        }
        assert!((&k * u).amax() < 1e-9 * k.amax());
    }
}

#[test]
fn unit_normalization_scales_columns_and_ktilde() {
    let g = small_graph(12);
    let u = g.normalized(ModeNormalization::Unit);
    for col in u.phi.column_iter() {
        assert!((col.norm() - 1.0).abs() < 1e-12);
    }
    let s = (g.material.total_mass / g.node_count() as f64).sqrt();
    for j in 6..12 {
        assert!((u.ktilde[(j, j)] - g.ktilde[(j, j)] * s * s).abs() < 1e-9 * g.ktilde[(j, j)]);
    }
    let back = u.normalized(ModeNormalization::Mass);
    assert!((back.phi - &g.phi).amax() < 1e-10);
}

#[test]
fn nodes_lie_inside_and_boundary_flags() {
    let (p, _, res) = small_params();
    let d = discretize_superquadric(&p, &res).unwrap();
    for n in &d.nodes {
        assert!(p.implicit(&n.x) <= 1.0 + 1e-12);
    }
    assert!(d.nodes.iter().any(|n| !n.is_boundary));
}

#[test]
fn coarse_resolution_is_rejected() {
    let p = SuperquadricParams::ellipsoid(0.05, 0.05, 0.04);
    let r = discretize_superquadric(&p, &Resolution::uniform(0.04));
    assert!(matches!(r, Err(Error::Construction(_))));
}

#[test]
fn invalid_parameters_are_rejected() {
    let (_, mat, res) = small_params();
    let bad = SuperquadricParams::ellipsoid(0.05, -0.05, 0.04);
    assert!(matches!(build_modal_graph(&bad, &mat, &res, 6), Err(Error::InvalidParameter(_))));
    let (p, _, _) = small_params();
    let too_few = build_modal_graph(&p, &mat, &res, 5);
    assert!(matches!(too_few, Err(Error::InvalidParameter(_))));
}

#[test]
fn posed_graph_frames_round_trip() {
    let g = small_graph(6).with_pose(modalgraph::projection::FramePose::from_translation(Vector3::new(1.0, 2.0, 3.0)));
    let x = Vector3::new(0.3, -0.2, 0.1);
    assert!((g.to_world_frame(&g.to_graph_frame(&x)) - x).norm() < 1e-15);
}

#[test]
fn graph_file_round_trip_and_version_check() {
    let g = small_graph(8);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    GraphFile::new(g.clone()).save(&path).unwrap();
    assert_eq!(GraphFile::load(&path).unwrap(), g);

    let mut f = GraphFile::new(g);
    f.version = 99;
    f.save(&path).unwrap();
    assert!(matches!(GraphFile::load(&path), Err(Error::Config(_))));
}
