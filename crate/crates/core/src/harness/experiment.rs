//! The closed-loop experiment: teach a target, set up at `t0`, then sample,
//! extract, control, actuate and log every step.

use std::io::Write;
use std::path::Path;

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::controller::AdaptiveController;
use crate::error::{Error, Result};
use crate::features::{manipulation_setup, FeatureExtractor, Support};
use crate::graph::ModalGraph;
use crate::harness::baseline::cartesian_baseline_step;
use crate::harness::config::{ControllerKind, ExperimentConfig, TargetConfig};
use crate::harness::log::{CsvLogger, StepLog};
use crate::harness::metrics::{chamfer, mesh_error};
use crate::plant::{build_test_object, inject_disturbance, FemPlant};
use crate::projection::{compute_point_cloud_frame, support_size, FramePose};
use crate::sensor::{sample_frame, SensorConfig, TARGET_STREAM};

/// Relative equilibrium residual above which the plant solve is rejected.
pub const EQUILIBRIUM_TOL: f64 = 1e-8;

/// Desired shape: recorded clouds plus the full mesh and grasp positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    /// Frames of the target shape; the first is the reference cloud.
    pub clouds: Vec<Vec<Vector3<f64>>>,
    /// Node of each point of the first cloud; only the baseline with
    /// correspondence reads it.
    pub cloud_nodes: Vec<usize>,
    pub mesh: Vec<Vector3<f64>>,
    pub manip: Vec<Vector3<f64>>,
}

impl TargetRecord {
    pub fn cloud(&self) -> &[Vector3<f64>] {
        &self.clouds[0]
    }

    pub fn cloud_refs(&self) -> Vec<&[Vector3<f64>]> {
        self.clouds.iter().map(|c| c.as_slice()).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let record: Self = serde_json::from_reader(f)?;
        if record.clouds.is_empty() || record.clouds[0].is_empty() {
            return Err(Error::EmptyCloud);
        }
        Ok(record)
    }
}

/// Sensor configuration seeded from the run seed.
pub fn run_sensor(config: &ExperimentConfig) -> SensorConfig {
    let mut s = config.sensor.clone();
    s.seed = derive_seed(config.seed, s.seed);
    s
}

/// SplitMix64 mix of a master seed and an index.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Moves the manipulation nodes to the taught displacement, records the
/// target, and resets the plant.
pub fn teach(plant: &mut FemPlant, config: &ExperimentConfig) -> Result<TargetRecord> {
    let sensor = run_sensor(config);
    let (displacement, frames) = match &config.target {
        TargetConfig::Rest { frames } => (DVector::zeros(3 * plant.manip_set.len()), *frames),
        TargetConfig::Teach { displacement, frames } => {
            if displacement.len() != plant.manip_set.len() {
                return Err(Error::Config(format!(
                    "teach needs {} displacements, got {}",
                    plant.manip_set.len(),
                    displacement.len()
                )));
            }
            let d = DVector::from_iterator(
                3 * displacement.len(),
                displacement.iter().flat_map(|d| d.iter().copied()),
            );
            (d, *frames)
        }
        TargetConfig::File { path } => return TargetRecord::load(path),
    };
    plant.quasi_static_solve(&displacement)?;
    let mut clouds = Vec::with_capacity(frames);
    let mut cloud_nodes = Vec::new();
    for i in 0..frames {
        let frame = sample_frame(plant, &sensor, 0, TARGET_STREAM - i as u64)?;
        if i == 0 {
            cloud_nodes = frame.nodes;
        }
        clouds.push(frame.points);
    }
    let record = TargetRecord {
        clouds,
        cloud_nodes,
        mesh: plant.positions(),
        manip: plant.manip_positions(),
    };
    plant.reset();
    Ok(record)
}

/// Summary of one run over the steady-state window (final 10% of steps).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub initial_e_x: f64,
    pub initial_e_s_norm: f64,
    pub steady_e_x: f64,
    pub steady_z_norm: f64,
    pub steady_e_s_norm: f64,
    pub steady_d_cd: f64,
    pub rank_deficient_steps: usize,
    pub empty_frames: usize,
    pub max_equilibrium_residual: f64,
    /// Set when the run stopped early.
    pub aborted: Option<String>,
}

/// Everything built at `t0`.
pub struct Setup {
    pub graph: ModalGraph,
    pub plant: FemPlant,
    pub target: TargetRecord,
}

/// Builds the plant and the graph and teaches the target. The graph is posed
/// at the point-cloud frame of the first measurement.
pub fn prepare(config: &ExperimentConfig) -> Result<Setup> {
    config.validate()?;
    let mut plant = build_test_object(&config.plant)?;
    let target = teach(&mut plant, config)?;
    let first = sample_frame(&plant, &run_sensor(config), 0, 0)?;
    let graph = config.graph.build()?;
    let frame = compute_point_cloud_frame(&first.points, graph.params.a_z)?;
    let graph = graph.with_pose(frame);
    Ok(Setup {
        graph,
        plant,
        target,
    })
}

/// Runs one experiment, streaming rows to `sink` when given.
pub fn run_experiment(config: &ExperimentConfig, sink: Option<&mut dyn Write>) -> Result<(RunSummary, Vec<StepLog>)> {
    let setup = prepare(config)?;
    run_prepared(config, setup, sink)
}

/// Runs the loop on an existing setup.
pub fn run_prepared(
    config: &ExperimentConfig,
    setup: Setup,
    sink: Option<&mut dyn Write>,
) -> Result<(RunSummary, Vec<StepLog>)> {
    let Setup {
        graph,
        mut plant,
        target,
    } = setup;
    let sensor = run_sensor(config);
    let dt = config.gains.dt;
    let k = plant.manip_set.len();
    let mut logger = CsvLogger::new(sink, 3 * k)?;

    let extractor = FeatureExtractor::new(&graph, config.features.c)?.with_latitude(config.features.latitude);
    let d_s_init = support_size(config.features.r_s_init, graph.mean_edge_len);
    let d_s = support_size(config.features.r_s, graph.mean_edge_len);
    let first = sample_frame(&plant, &sensor, 0, 0)?;
    let mut clouds = target.cloud_refs();
    clouds.push(&first.points);
    let restriction = extractor.restriction_set(&clouds, d_s_init)?;
    let support = Support::restricted(d_s, &restriction);
    let s_star = extractor.mean_features(&target.cloud_refs(), &support)?;

    let local: Vec<Vector3<f64>> = first.points.iter().map(|p| graph.to_graph_frame(p)).collect();
    let cloud_frame: FramePose = compute_point_cloud_frame(&local, graph.params.a_z)?;
    let setup = manipulation_setup(&extractor, &plant.manip_positions(), cloud_frame, d_s_init)?;
    let mut controller = AdaptiveController::new(config.gains, extractor.compliance().clone())?;
    let rest_manip: Vec<Vector3<f64>> = plant.manip_set.iter().map(|&i| plant.rest_positions[i]).collect();

    let mut rows: Vec<StepLog> = Vec::with_capacity(config.steps);
    let mut rank_deficient_steps = 0;
    let mut empty_frames = 0;
    let mut max_residual: f64 = 0.0;
    let mut last_v = DVector::zeros(3 * k);
    let mut last_e_s = f64::NAN;
    let mut last_z = 0.0;
    let mut last_cd = f64::NAN;
    let mut aborted = None;

    for step in 0..config.steps {
        let result = (|| -> Result<StepLog> {
            inject_disturbance(&mut plant, &config.disturbances, step, sensor.seed)?;
            let positions = plant.positions();
            let e_x = mesh_error(&positions, &target.mesh);
            let e_d = plant
                .manip_positions()
                .iter()
                .zip(&target.manip)
                .map(|(a, b)| (a - b).norm_squared())
                .sum::<f64>()
                .sqrt();

            let frame = match sample_frame(&plant, &sensor, step, step as u64) {
                Ok(f) => Some(f),
                Err(Error::EmptyCloud) => None,
                Err(e) => return Err(e),
            };
            let (v, e_s_norm, z_norm, d_cd, l_t) = match frame {
                None => {
                    empty_frames += 1;
                    (last_v.clone(), last_e_s, last_z, last_cd, 0)
                }
                Some(frame) => {
                    let ex = extractor.extract(&frame.points, &support)?;
                    rank_deficient_steps += ex.rank_deficient as usize;
                    let d_cd = chamfer(&frame.points, target.cloud());
                    match config.controller {
                        ControllerKind::Modal => {
                            let out = controller.step(&ex.features.0, &s_star.0, &setup)?;
                            (out.v, out.e_s.norm(), out.z.norm(), d_cd, frame.points.len())
                        }
                        ControllerKind::Cartesian => {
                            let e_s = (&ex.features.0 - &s_star.0).norm();
                            let v = baseline_command(&plant, &frame.points, &frame.nodes, &target, &rest_manip, config)?;
                            (v, e_s, 0.0, d_cd, frame.points.len())
                        }
                    }
                }
            };
            let theta = &controller.state.theta_hat;
            let row = StepLog {
                step,
                time: step as f64 * dt,
                e_s_norm,
                z_norm,
                e_x,
                d_cd,
                e_d_norm: e_d,
                l_t,
                theta_min: theta.min(),
                theta_max: theta.max(),
                theta_norm: theta.norm(),
                v: v.iter().copied().collect(),
            };
            plant.step_manipulation(&v, dt)?;
            let residual = plant.equilibrium_residual();
            max_residual = max_residual.max(residual);
            if !(residual <= EQUILIBRIUM_TOL) {
                return Err(Error::Singular(format!("equilibrium residual {residual:e}")));
            }
            last_v = v;
            last_e_s = e_s_norm;
            last_z = z_norm;
            last_cd = d_cd;
            Ok(row)
        })();
        match result {
            Ok(row) => {
                logger.write(&row)?;
                rows.push(row);
            }
            Err(e) => {
                aborted = Some(format!("step {step}: {e}"));
                break;
            }
        }
    }
    logger.flush()?;

    let summary = summarize(&rows, config.steps, rank_deficient_steps, empty_frames, max_residual, aborted);
    Ok((summary, rows))
}

fn baseline_command(
    plant: &FemPlant,
    points: &[Vector3<f64>],
    nodes: &[usize],
    target: &TargetRecord,
    rest_manip: &[Vector3<f64>],
    config: &ExperimentConfig,
) -> Result<DVector<f64>> {
    let (measured, desired, rest): (Vec<_>, Vec<_>, Vec<_>) = if config.baseline.correspondence {
        (
            points.to_vec(),
            nodes.iter().map(|&i| target.mesh[i]).collect(),
            nodes.iter().map(|&i| plant.rest_positions[i]).collect(),
        )
    } else {
        let n = points.len().min(target.cloud().len());
        (
            points[..n].to_vec(),
            target.cloud()[..n].to_vec(),
            nodes[..n].iter().map(|&i| plant.rest_positions[i]).collect(),
        )
    };
    cartesian_baseline_step(&measured, &desired, &rest, rest_manip, &config.baseline)
}

fn summarize(
    rows: &[StepLog],
    steps: usize,
    rank_deficient_steps: usize,
    empty_frames: usize,
    max_residual: f64,
    aborted: Option<String>,
) -> RunSummary {
    let window = steady_window(rows);
    let mean = |f: &dyn Fn(&StepLog) -> f64| -> f64 {
        if window.is_empty() {
            f64::NAN
        } else {
            window.iter().map(f).sum::<f64>() / window.len() as f64
        }
    };
    RunSummary {
        steps,
        initial_e_x: rows.first().map_or(f64::NAN, |r| r.e_x),
        initial_e_s_norm: rows.first().map_or(f64::NAN, |r| r.e_s_norm),
        steady_e_x: mean(&|r| r.e_x),
        steady_z_norm: mean(&|r| r.z_norm),
        steady_e_s_norm: mean(&|r| r.e_s_norm),
        steady_d_cd: mean(&|r| r.d_cd),
        rank_deficient_steps,
        empty_frames,
        max_equilibrium_residual: max_residual,
        aborted,
    }
}

/// Final 10% of the rows, at least one.
pub fn steady_window(rows: &[StepLog]) -> &[StepLog] {
    let n = (rows.len() / 10).max(1).min(rows.len());
    &rows[rows.len() - n..]
}
