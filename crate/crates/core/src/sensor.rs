//! Simulated depth sensor: random subsets of observable nodes without
//! correspondence, with Gaussian noise and occlusion windows.

use nalgebra::Vector3;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::FemPlant;

/// Points per frame: a fixed count or an inclusive range drawn per frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CountRange {
    Fixed(usize),
    Range([usize; 2]),
}

impl CountRange {
    pub fn bounds(&self) -> (usize, usize) {
        match *self {
            CountRange::Fixed(l) => (l, l),
            CountRange::Range([lo, hi]) => (lo, hi),
        }
    }
}

/// Axis-aligned world box hiding points during `[start_step, end_step)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Occlusion {
    pub start_step: usize,
    pub end_step: usize,
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Occlusion {
    pub fn hides(&self, p: &Vector3<f64>, step: usize) -> bool {
        step >= self.start_step
            && step < self.end_step
            && (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorConfig {
    pub l: CountRange,
    pub noise_sigma: f64,
    pub occlusions: Vec<Occlusion>,
    /// Draw with replacement (duplicates allowed).
    pub with_replacement: bool,
    pub seed: u64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            l: CountRange::Fixed(20),
            noise_sigma: 0.0,
            occlusions: Vec::new(),
            with_replacement: false,
            seed: 0,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.l.bounds();
        if lo < 1 || hi < lo {
            return Err(Error::InvalidParameter("sensor count must be at least 1".into()));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidParameter("noise_sigma must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Stream reserved for frames outside the control loop (the taught target).
pub const TARGET_STREAM: u64 = u64::MAX;

/// A frame: observed points, plus the node each came from. Only the harness
/// baseline may use the node identities.
#[derive(Debug, Clone)]
pub struct Frame {
    pub points: Vec<Vector3<f64>>,
    pub nodes: Vec<usize>,
}

/// Samples observable node ids for one frame, then drops occluded ones.
pub fn sample_nodes(
    plant: &FemPlant,
    config: &SensorConfig,
    step: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let (lo, hi) = config.l.bounds();
    let l = if lo == hi { lo } else { rng.random_range(lo..=hi) };
    let obs = &plant.observable_set;
    let mut nodes: Vec<usize> = if config.with_replacement {
        (0..l).map(|_| *obs.choose(rng).expect("observable set nonempty")).collect()
    } else {
        obs.choose_multiple(rng, l.min(obs.len())).copied().collect()
    };
    nodes.shuffle(rng);
    nodes.retain(|&i| {
        let p = plant.position(i);
        !config.occlusions.iter().any(|o| o.hides(&p, step))
    });
    nodes
}

/// One noisy frame at `step`, deterministic in `(config.seed, stream)`.
pub fn sample_frame(
    plant: &FemPlant,
    config: &SensorConfig,
    step: usize,
    stream: u64,
) -> Result<Frame> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    let nodes = sample_nodes(plant, config, step, &mut rng);
    if nodes.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let normal = Normal::new(0.0, config.noise_sigma)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let points = nodes
        .iter()
        .map(|&i| {
            let mut p = plant.position(i);
            if config.noise_sigma > 0.0 {
                for a in 0..3 {
                    p[a] += normal.sample(&mut rng);
                }
            }
            p
        })
        .collect();
    Ok(Frame { points, nodes })
}

/// Raw point cloud at `step`.
pub fn sample_cloud(plant: &FemPlant, config: &SensorConfig, step: usize) -> Result<Vec<Vector3<f64>>> {
    sample_frame(plant, config, step, step as u64).map(|f| f.points)
}
