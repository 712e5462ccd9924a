//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line.
//!
//! Run with `cargo test --release --test acceptance -- --nocapture --test-threads 1`
//! for readable output.

mod common;

use std::time::Instant;

use common::{jacobi_eigenvalues, rng, small_graph, small_params, surface_cloud};
use modalgraph::controller::{regression_matrix, w_of, AdaptiveController, Gains, MatrixInversion};
use modalgraph::features::{manipulation_setup, FeatureExtractor, Support};
use modalgraph::graph::{assemble_stiffness_mass, discretize_superquadric, solve_low_frequency_modes, superquadric_surface};
use modalgraph::harness::config::TargetConfig;
use modalgraph::harness::experiment::steady_window;
use modalgraph::harness::log::StepLog;
use modalgraph::harness::metrics::{chamfer, mesh_error};
use modalgraph::harness::sweep::aggregate;
use modalgraph::harness::{run_experiment, sweep, ControllerKind, ExperimentConfig, RunSummary, SweepAxis};
use modalgraph::plant::{build_test_object, Disturbance, MatchedPlant};
use modalgraph::projection::{
    compute_point_cloud_frame, domain_of_influence, local_parametric_coords, parametric_distance, support_size, weight,
    ParametricCoords,
};
use nalgebra::{DMatrix, DVector, Vector3};
use rand::seq::SliceRandom;
use rand::Rng;

fn report(n: u32, name: &str, checks: &[(&str, bool)]) {
    let pass = checks.iter().all(|(_, ok)| *ok);
    let detail: Vec<String> = checks
        .iter()
        .map(|(d, ok)| format!("[{}] {d}", if *ok { "ok" } else { "FAILED" }))
        .collect();
    println!("criterion {n} ({name}): {}", if pass { "PASS" } else { "FAIL" });
    for d in &detail {
        println!("    {d}");
    }
    assert!(pass, "criterion {n} failed: {}", detail.join("; "));
}

fn run(cfg: &ExperimentConfig) -> (RunSummary, Vec<StepLog>) {
    run_experiment(cfg, None).unwrap()
}

#[test]
fn criterion_01_regression_identity() {
    let start = Instant::now();
    let mut r = rng(101);
    let g = Gains::simulation();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = r.random_range(6..=30);
        let k = r.random_range(1..=4);
        let h = DMatrix::from_fn(3 * k, m, |_, _| r.random_range(-1.0..1.0));
        let comp = DMatrix::from_fn(m, m, |_, _| r.random_range(-1.0..1.0));
        let theta = DVector::from_fn(m, |_, _| r.random_range(0.1..3.0));
        let theta_hat = DVector::from_fn(m, |_, _| r.random_range(0.1..3.0));
        let e = DVector::from_fn(m, |_, _| r.random_range(-1.0..1.0));
        let z = DVector::from_fn(m, |_, _| r.random_range(-1.0..1.0));
        let inv = MatrixInversion(h.clone());
        let y = regression_matrix(&e, &z, &theta_hat, &inv, &comp, &g);
        let wh = w_of(&theta_hat, &comp);
        let b = &h * (wh.transpose() * &z) * g.k_s + &h * (wh.transpose() * &e) * g.k_d;
        let lhs = (wh - w_of(&theta, &comp)) * h.transpose() * b;
        let rhs = &y * (&theta_hat - &theta);
        worst = worst.max((&lhs - &rhs).norm() / lhs.norm());
    }
    let secs = start.elapsed().as_secs_f64();
    report(1, "regression identity", &[
        (&format!("max relative error {worst:.2e} <= 1e-10"), worst <= 1e-10),
        (&format!("runtime {secs:.3} s < 1 s"), secs < 1.0),
    ]);
}

#[test]
fn criterion_02_modal_correctness() {
    let (p, mat, res) = small_params();
    let d = discretize_superquadric(&p, &res).unwrap();
    let n = d.nodes.len();
    let (k, mass) = assemble_stiffness_mass(&d.nodes, &d.edges, &mat, res.cell_volume()).unwrap();
    let (phi_all, lam_all) = solve_low_frequency_modes(&k, &mass, 3 * n).unwrap();
    let lmax = lam_all.max();
    let zero = lam_all.iter().filter(|l| l.abs() < 1e-8 * lmax).count();

    let inv = mass.map(|v| 1.0 / v.sqrt());
    let a = DMatrix::from_fn(3 * n, 3 * n, |i, j| k[(i, j)] * inv[i] * inv[j]);
    let reference = jacobi_eigenvalues(&a);
    let eig_err = lam_all.iter().zip(&reference).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / lmax;

    let m_mat = DMatrix::from_diagonal(&mass);
    let residual = (&k * &phi_all - &m_mat * &phi_all * DMatrix::from_diagonal(&lam_all)).norm() / (k.norm() * phi_all.norm());

    let g = small_graph(20);
    let ortho = (g.phi.transpose() * &m_mat * &g.phi - DMatrix::identity(20, 20)).amax();
    let kt = (0..20).map(|j| (g.ktilde[(j, j)] - g.lambdas[j]).abs()).fold(0.0, f64::max) / g.lambdas.max();
    report(2, "modal correctness", &[
        (&format!("{n} nodes <= 60"), n <= 60),
        (&format!("eigenvalues vs Jacobi reference {eig_err:.2e} <= 1e-8"), eig_err <= 1e-8),
        (&format!("eigen residual {residual:.2e} <= 1e-8"), residual <= 1e-8),
        (&format!("{zero} near-zero modes == 6"), zero == 6),
        (&format!("|Phi^T M Phi - I| {ortho:.2e} <= 1e-8"), ortho <= 1e-8),
        (&format!("|diag K~ - lambda| / lambda_max {kt:.2e} <= 1e-6"), kt <= 1e-6),
    ]);
}

#[test]
fn criterion_03_weights() {
    let mut r = rng(103);
    let mut bounded = true;
    let mut monotone = true;
    let mut vanishes = true;
    let mut limit: f64 = 0.0;
    for _ in 0..2000 {
        let d_s = r.random_range(0.01..5.0);
        let c = r.random_range(0.1..4.0);
        let d1 = r.random_range(0.0..d_s);
        let d2 = r.random_range(0.0..d_s);
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        let (w_lo, w_hi) = (weight(lo, d_s, c), weight(hi, d_s, c));
        bounded &= (0.0..=1.0).contains(&w_lo) && (0.0..=1.0).contains(&w_hi);
        monotone &= lo == hi || w_lo > w_hi || w_hi == 0.0 && hi / d_s > 1.0 - 1e-12;
        vanishes &= weight(d_s, d_s, c) == 0.0 && weight(d_s * 1.5, d_s, c) == 0.0;
        let small = r.random_range(0.0..1.0);
        let big = 80.0 * c * c;
        limit = limit.max((weight(small, big, c) - weight(small, f64::INFINITY, c)).abs());
    }
    let g = small_graph(8);
    let mut unity: f64 = 0.0;
    for _ in 0..500 {
        let c = ParametricCoords::new(r.random_range(-1.5..1.5), r.random_range(-3.1..3.1));
        for d_s in [r.random_range(0.5..6.0) * g.mean_edge_len, f64::INFINITY] {
            if let Ok(dom) = domain_of_influence(&c, &g, d_s, 2.0, None) {
                unity = unity.max((dom.weights.iter().sum::<f64>() - 1.0).abs());
            }
        }
    }
    report(3, "Shepard weights", &[
        (&format!("partition of unity {unity:.1e} <= 1e-12"), unity <= 1e-12),
        ("weights in [0, 1]", bounded),
        ("strictly decreasing inside the support", monotone),
        ("w(d_s) = 0", vanishes),
        (&format!("compact -> exponential as d_s grows: {limit:.1e} <= 1e-12"), limit <= 1e-12),
    ]);
}

#[test]
fn criterion_04_feature_pipeline() {
    let g = small_graph(12);
    let ex = FeatureExtractor::new(&g, 2.0).unwrap();
    let mut r = rng(104);
    let comp = g.modal_compliance().unwrap();

    let mut perm_exact = true;
    let mut oracle_err: f64 = 0.0;
    for r_s in [2.0, f64::INFINITY] {
        let d_s = support_size(r_s, g.mean_edge_len);
        let sup = Support::new(d_s);
        for _ in 0..5 {
            let cloud = surface_cloud(&g, 15, &mut r);
            let s = ex.extract(&cloud, &sup).unwrap().features.0;
            let mut shuffled = cloud.clone();
            shuffled.shuffle(&mut r);
            let t = ex.extract(&shuffled, &sup).unwrap().features.0;
            perm_exact &= (&t - &s).amax() <= 1e-14 * s.amax();

            let frame = compute_point_cloud_frame(&cloud, g.params.a_z).unwrap();
            let mut acc = DVector::zeros(12);
            for p in &cloud {
                let c = local_parametric_coords(&frame.to_local(p)).unwrap();
                let u = p - superquadric_surface(&g.params, &c);
                let raw: Vec<(usize, f64)> = g
                    .boundary_indices()
                    .iter()
                    .map(|&j| (j, weight(parametric_distance(&c, &g.nodes[j].c), d_s, 2.0)))
                    .filter(|x| x.1 > 0.0)
                    .collect();
                let total: f64 = raw.iter().map(|x| x.1).sum();
                for (j, w) in raw {
                    acc += g.node_modes(j).transpose() * u * (w / total);
                }
            }
            let want = &comp * acc;
            oracle_err = oracle_err.max((&s - &want).norm() / want.norm());

            let grasp = surface_cloud(&g, 2, &mut r);
            let ms = manipulation_setup(&ex, &grasp, frame, d_s).unwrap();
            let mut h = DMatrix::zeros(6, 12);
            for (i, p) in grasp.iter().enumerate() {
                let c = local_parametric_coords(&frame.to_local(p)).unwrap();
                let dom = domain_of_influence(&c, &g, d_s, 2.0, None).unwrap();
                for (&j, &w) in dom.node_indices.iter().zip(&dom.weights) {
                    let mut v = h.view_mut((3 * i, 0), (3, 12));
                    v += g.node_modes(j) * w;
                }
            }
            let ds = DVector::from_fn(12, |_, _| r.random_range(-1.0..1.0));
            let d = &ms.h * &ds;
            oracle_err = oracle_err.max((&d - &h * &ds).norm() / d.norm());
        }
    }

    let mut rank_fail = Vec::new();
    for _ in 0..50 {
        let m = r.random_range(6..=24);
        let gm = small_graph(m);
        let exm = FeatureExtractor::new(&gm, 2.0).unwrap();
        let l = r.random_range(m.div_ceil(3)..=20);
        let cloud = surface_cloud(&gm, l, &mut r);
        let e = exm.extract(&cloud, &Support::new(support_size(2.0, gm.mean_edge_len))).unwrap();
        if m <= 3 * l.min(e.supporting_nodes.len()) {
            if e.rank_deficient {
                rank_fail.push(format!("m {m} l {l} n {} enlarged {}", e.supporting_nodes.len(), e.enlarged_points));
            }
        }
    }
    report(4, "feature pipeline", &[
        ("permutation invariance", perm_exact),
        (&format!("extraction and inversion vs dense oracle {oracle_err:.1e} <= 1e-10"), oracle_err <= 1e-10),
        (&format!("full rank whenever m <= min(3l, 3n), 50 instances; failures {rank_fail:?}"), rank_fail.is_empty()),
    ]);
}

#[test]
fn criterion_05_matched_plant() {
    let start = Instant::now();
    let k = 4;
    let m = 3 * k;
    let mut r = rng(105);
    let qa = DMatrix::from_fn(m, m, |_, _| r.random_range(-1.0..1.0)).qr().q();
    let qb = DMatrix::from_fn(m, m, |_, _| r.random_range(-1.0..1.0)).qr().q();
    let sv = DVector::from_fn(m, |_, _| r.random_range(0.5..1.0));
    let comp = DMatrix::from_diagonal(&DVector::from_fn(m, |i, _| {
        if i < 6 { 1.0 } else { r.random_range(0.6..1.0) }
    }));
    let theta = DVector::from_fn(m, |_, _| r.random_range(0.7..1.5));
    let h0 = &qa * DMatrix::from_diagonal(&sv) * qb.transpose();
    let gains = Gains { q: 1.0, ..Gains::simulation() };
    let sigma = (&h0 * &comp).singular_values().max() * theta.max();
    let h = h0 * (0.5 / (gains.dt * (gains.k_s + gains.k_d))).sqrt() / sigma;

    let mut ctl = AdaptiveController::new(gains, comp.clone()).unwrap();
    let mut plant = MatchedPlant::new(theta.clone(), DVector::from_fn(m, |_, _| r.random_range(-1.0..1.0))).unwrap();
    let target = DVector::zeros(m);
    let inv = MatrixInversion(h.clone());
    let lyap = |e: &DVector<f64>, th: &DVector<f64>| 0.5 * e.norm_squared() + 0.5 * gains.gamma * (th - &theta).norm_squared();
    let v0 = lyap(&plant.s, &ctl.state.theta_hat);
    let e0 = plant.s.norm();
    let null0 = (&h * w_of(&ctl.state.theta_hat, &comp).transpose() * &plant.s).norm();
    let mut prev = v0;
    let mut worst: f64 = 0.0;
    let mut reached = None;
    for step in 0..2000 {
        let out = ctl.step(&plant.s.clone(), &target, &inv).unwrap();
        plant.step(&out.v, &h, &comp, gains.dt, None);
        let v = lyap(&plant.s, &ctl.state.theta_hat);
        worst = worst.max(v - prev);
        prev = v;
        if reached.is_none() && plant.s.norm() < 1e-3 * e0 {
            reached = Some(step + 1);
        }
    }
    let null = (&h * w_of(&ctl.state.theta_hat, &comp).transpose() * &plant.s).norm() / null0;
    let secs = start.elapsed().as_secs_f64();
    report(5, "Lyapunov on the matched plant", &[
        (&format!("V(end) {prev:.4e} < V(0) {v0:.4e}"), prev < v0),
        (&format!("largest per-step increase {:.1e} V(0) <= 1e-6 V(0)", worst / v0), worst <= 1e-6 * v0),
        (&format!("|H W^T e_s| ratio {null:.1e} < 1e-6"), null < 1e-6),
        (&format!("|e_s| < 1e-3 |e_s(0)| after {reached:?} steps (<= 2000)"), reached.is_some()),
        (&format!("runtime {secs:.2} s < 10 s"), secs < 10.0),
    ]);
}

#[test]
fn criterion_06_closed_loop() {
    let start = Instant::now();
    let cfg = ExperimentConfig::simulation();
    let (s, rows) = run(&cfg);
    let secs = start.elapsed().as_secs_f64();
    let ratio = s.steady_e_x / s.initial_e_x;
    report(6, "closed loop with model mismatch", &[
        (&format!("{} steps >= 3000", rows.len()), rows.len() >= 3000),
        ("no abort", s.aborted.is_none()),
        (&format!("steady e_x {:.3e} = {:.1}% of initial {:.3e} <= 10%", s.steady_e_x, 100.0 * ratio, s.initial_e_x), ratio <= 0.1),
        (&format!("runtime {secs:.1} s < 60 s"), secs < 60.0),
    ]);
}

#[test]
fn criterion_07_baseline() {
    let cfg = ExperimentConfig::simulation();
    let (modal, _) = run(&cfg);
    let mut cart = cfg.clone();
    cart.controller = ControllerKind::Cartesian;
    let (base, _) = run(&cart);
    report(7, "Cartesian baseline comparison", &[(
        &format!("baseline e_x {:.3e} >= 2 x modal {:.3e}", base.steady_e_x, modal.steady_e_x),
        base.steady_e_x >= 2.0 * modal.steady_e_x,
    )]);
}

fn non_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

#[test]
fn criterion_08_sweeps() {
    let base = ExperimentConfig::simulation();
    let rs = aggregate(&sweep(&base, SweepAxis::RS, &[1.0, 3.0, f64::INFINITY], 5, None).unwrap());
    let l = aggregate(&sweep(&base, SweepAxis::L, &[10.0, 20.0, 25.0, 28.0], 5, None).unwrap());

    let mut three = base.clone();
    three.plant.manip_count = 3;
    three.target = TargetConfig::Teach {
        displacement: vec![[-0.02, 0.01, 0.03], [-0.01, -0.01, 0.02], [0.0, 0.01, 0.025]],
        frames: 100,
    };
    let m = aggregate(&sweep(&three, SweepAxis::M, &[9.0, 30.0, 60.0], 5, None).unwrap());

    let initial = run(&base).0.initial_e_x;
    let fmt = |rows: &[(f64, f64, f64, f64)], col: usize| {
        rows.iter()
            .map(|r| format!("{}: {:.3e}", r.0, if col == 1 { r.1 } else { r.2 }))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let rs_ex: Vec<f64> = rs.iter().map(|r| r.1).collect();
    let l_ex: Vec<f64> = l.iter().map(|r| r.1).collect();
    let bounded = |v: &[f64]| v.iter().filter(|x| **x <= initial).count();
    println!("    r_s steady e_x: {}  ({} of 3 below initial e_x {initial:.3e})", fmt(&rs, 1), bounded(&rs_ex));
    println!("    l   steady e_x: {}", fmt(&l, 1));
    println!("    m   steady |z|: {}  (steady e_x {})", fmt(&m, 2), fmt(&m, 1));
    report(8, "sweep trends", &[
        ("steady e_x non-increasing in r_s over {1, 3, inf}", non_increasing(&rs_ex)),
        ("steady e_x non-increasing in l over {10, 20, 25, 28}", non_increasing(&l_ex)),
        ("m = 3k steady |z| below m = 30 and m = 60", m[0].2 < m[1].2 && m[0].2 < m[2].2),
    ]);
}

fn mean_e_s(rows: &[StepLog]) -> f64 {
    rows.iter().map(|r| r.e_s_norm).sum::<f64>() / rows.len() as f64
}

#[test]
fn criterion_09_disturbances() {
    let base = ExperimentConfig::simulation();
    let nodes = build_test_object(&base.plant).unwrap().observable_set[..5].to_vec();
    let b = 2.0;
    let (_, clean) = run(&base);
    let band = mean_e_s(steady_window(&clean));

    let mut pulse = base.clone();
    pulse.disturbances = vec![Disturbance {
        nodes: nodes.clone(),
        bound: b,
        start_step: 1500,
        end_step: 1600,
        direction: Some([0.0, 0.3, 1.0]),
    }];
    let (ps, prow) = run(&pulse);
    let peak = prow[1500..1700].iter().map(|r| r.e_s_norm).fold(0.0, f64::max);
    let during = mean_e_s(&prow[1500..1600]);
    let after = mean_e_s(steady_window(&prow));

    let levels: Vec<f64> = [0.0, b, 2.0 * b]
        .iter()
        .map(|&bound| {
            let mut cfg = base.clone();
            cfg.disturbances = vec![Disturbance {
                nodes: nodes.clone(),
                bound,
                start_step: 0,
                end_step: usize::MAX,
                direction: None,
            }];
            run(&cfg).0.steady_e_s_norm
        })
        .collect();
    report(9, "bounded response to disturbances", &[
        (&format!("pulse excursion bounded (peak |e_s| {peak:.3e}, mean during pulse {during:.3e})"), peak.is_finite() && ps.aborted.is_none()),
        (&format!("after the pulse {after:.3e} <= 2 x undisturbed band {band:.3e}"), after <= 2.0 * band),
        (&format!("steady |e_s| over bounds 0, b, 2b: {:.3e}, {:.3e}, {:.3e} increasing", levels[0], levels[1], levels[2]), levels[0] <= levels[1] && levels[1] <= levels[2]),
    ]);
}

#[test]
fn criterion_10_determinism_and_metrics() {
    let mut cfg = ExperimentConfig::simulation();
    cfg.steps = 400;
    let mut a = Vec::new();
    let mut b = Vec::new();
    run_experiment(&cfg, Some(&mut a)).unwrap();
    run_experiment(&cfg, Some(&mut b)).unwrap();
    cfg.seed = 1;
    let mut c = Vec::new();
    run_experiment(&cfg, Some(&mut c)).unwrap();

    let mut r = rng(110);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let na = r.random_range(1..40);
        let nb = r.random_range(1..40);
        let pa: Vec<Vector3<f64>> = (0..na).map(|_| Vector3::from_fn(|_, _| r.random_range(-1.0..1.0))).collect();
        let pb: Vec<Vector3<f64>> = (0..nb).map(|_| Vector3::from_fn(|_, _| r.random_range(-1.0..1.0))).collect();
        let nn = |p: &Vector3<f64>, s: &[Vector3<f64>]| {
            s.iter()
                .map(|q| ((p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        };
        let want = pa.iter().map(|p| nn(p, &pb)).sum::<f64>() / na as f64 + pb.iter().map(|p| nn(p, &pa)).sum::<f64>() / nb as f64;
        worst = worst.max((chamfer(&pa, &pb) - want).abs());
        let n = na.min(nb);
        let mesh_want: f64 = (0..n).map(|i| (0..3).map(|k| (pa[i][k] - pb[i][k]).powi(2)).sum::<f64>()).sum();
        worst = worst.max((mesh_error(&pa[..n], &pb[..n]) - mesh_want).abs());
    }
    report(10, "determinism and metrics", &[
        ("identical config and seed give byte-identical CSV", !a.is_empty() && a == b),
        ("a different seed changes the log", a != c),
        (&format!("Chamfer and mesh error vs brute force {worst:.1e} <= 1e-12"), worst <= 1e-12),
    ]);
}
