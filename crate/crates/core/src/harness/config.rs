//! Experiment configuration, read from TOML. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controller::Gains;
use crate::error::{Error, Result};
use crate::graph::{
    build_modal_graph, GraphFile, MaterialParams, ModalGraph, ModeNormalization, Resolution,
    SuperquadricParams,
};
use crate::harness::baseline::BaselineGains;
use crate::plant::{Disturbance, PlantConfig};
use crate::projection::{FramePose, LatitudeMode};
use crate::sensor::SensorConfig;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    #[default]
    Modal,
    Cartesian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub semi_axes: [f64; 3],
    #[serde(default = "one")]
    pub alpha1: f64,
    #[serde(default = "one")]
    pub alpha2: f64,
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub total_mass: f64,
    pub spacing: [f64; 3],
    #[serde(default = "half")]
    pub offset: [f64; 3],
    pub modes: usize,
    #[serde(default)]
    pub normalization: ModeNormalization,
    /// Prebuilt graph; its modes are truncated to `modes`.
    #[serde(default)]
    pub file: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}

fn half() -> [f64; 3] {
    [0.5; 3]
}

impl GraphConfig {
    /// Graph used in simulation: 210 nodes, `E = 50`, `v = 0.45`, `M = 1`,
    /// unit-norm modes.
    pub fn simulation() -> Self {
        Self {
            semi_axes: [0.11, 0.08, 0.05],
            alpha1: 1.0,
            alpha2: 1.0,
            youngs_modulus: 50.0,
            poisson_ratio: 0.45,
            total_mass: 1.0,
            spacing: [0.0209; 3],
            offset: [0.5, 0.0, 0.0],
            modes: 20,
            normalization: ModeNormalization::Unit,
            file: None,
        }
    }

    pub fn params(&self) -> SuperquadricParams {
        SuperquadricParams {
            a_x: self.semi_axes[0],
            a_y: self.semi_axes[1],
            a_z: self.semi_axes[2],
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            pose: FramePose::identity(),
        }
    }

    pub fn material(&self) -> MaterialParams {
        MaterialParams::new(self.youngs_modulus, self.poisson_ratio, self.total_mass)
    }

    pub fn resolution(&self) -> Resolution {
        Resolution::new(self.spacing).with_offset(self.offset)
    }

    /// Builds or loads the graph, with `modes` columns and the configured scaling.
    pub fn build(&self) -> Result<ModalGraph> {
        let graph = match &self.file {
            Some(path) => {
                let mut g = GraphFile::load(path)?;
                if g.mode_count() < self.modes {
                    return Err(Error::Config(format!(
                        "graph file has {} modes, {} requested",
                        g.mode_count(),
                        self.modes
                    )));
                }
                g.phi = g.phi.columns(0, self.modes).into_owned();
                g.lambdas = g.lambdas.rows(0, self.modes).into_owned();
                g.ktilde = g.ktilde.view((0, 0), (self.modes, self.modes)).into_owned();
                g
            }
            None => build_modal_graph(&self.params(), &self.material(), &self.resolution(), self.modes)?,
        };
        Ok(graph.normalized(self.normalization))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    /// Weight-shape constant.
    pub c: f64,
    /// Runtime support ratio; `inf` disables the cutoff.
    pub r_s: f64,
    /// Support ratio used at `t0` to find the restriction set.
    #[serde(default = "two")]
    pub r_s_init: f64,
    #[serde(default)]
    pub latitude: LatitudeMode,
}

fn one_frame() -> usize {
    1
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum TargetConfig {
    /// The rest shape, recorded over `frames` frames.
    Rest {
        #[serde(default = "one_frame")]
        frames: usize,
    },
    /// Move the manipulation nodes by `displacement` (one 3-vector each),
    /// record `frames` frames, reset.
    Teach {
        displacement: Vec<[f64; 3]>,
        #[serde(default = "one_frame")]
        frames: usize,
    },
    /// A target written by the `teach` command.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub steps: usize,
    #[serde(default)]
    pub controller: ControllerKind,
    pub graph: GraphConfig,
    pub features: FeatureConfig,
    pub gains: Gains,
    #[serde(default)]
    pub plant: PlantConfig,
    #[serde(default)]
    pub sensor: SensorConfig,
    pub target: TargetConfig,
    #[serde(default)]
    pub baseline: BaselineGains,
    #[serde(default)]
    pub disturbances: Vec<Disturbance>,
}

impl ExperimentConfig {
    /// One manipulation point, `m = 20`, `l = 20` of 30 observable points, at 50 Hz.
    pub fn simulation() -> Self {
        Self {
            seed: 0,
            steps: 3000,
            controller: ControllerKind::Modal,
            graph: GraphConfig::simulation(),
            features: FeatureConfig {
                c: 2.0,
                r_s: f64::INFINITY,
                r_s_init: 2.0,
                latitude: LatitudeMode::Standard,
            },
            gains: Gains::simulation(),
            plant: PlantConfig::default(),
            sensor: SensorConfig::default(),
            target: TargetConfig::Teach {
                displacement: vec![[-0.02, 0.01, 0.03]],
                frames: 100,
            },
            baseline: BaselineGains::default(),
            disturbances: Vec::new(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.gains.validate()?;
        self.sensor.validate()?;
        if self.graph.modes < crate::graph::RIGID_MODES {
            return Err(Error::Config("at least six modes are required".into()));
        }
        let (lo, _) = self.sensor.l.bounds();
        if self.graph.modes > 3 * lo {
            return Err(Error::Config(format!(
                "m = {} exceeds 3 l = {} for the smallest cloud",
                self.graph.modes,
                3 * lo
            )));
        }
        if !(self.features.c > 0.0) || !(self.features.r_s > 0.0) || !(self.features.r_s_init > 0.0)
        {
            return Err(Error::Config("c, r_s and r_s_init must be positive".into()));
        }
        if let Some(path) = &self.graph.file {
            if !path.exists() {
                return Err(Error::Config(format!("graph file {} not found", path.display())));
            }
        }
        match &self.target {
            TargetConfig::File { path } if !path.exists() => {
                Err(Error::Config(format!("target file {} not found", path.display())))
            }
            TargetConfig::Rest { frames } | TargetConfig::Teach { frames, .. } if *frames == 0 => {
                Err(Error::Config("at least one target frame".into()))
            }
            _ => Ok(()),
        }
    }
}
