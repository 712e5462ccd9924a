//! One-axis parameter sweeps, run in parallel.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::config::ExperimentConfig;
use crate::harness::experiment::{derive_seed, run_experiment, RunSummary};
use crate::sensor::CountRange;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    RS,
    L,
    M,
    DisturbanceBound,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::RS => "r_s",
            SweepAxis::L => "l",
            SweepAxis::M => "m",
            SweepAxis::DisturbanceBound => "disturbance_bound",
        }
    }

    /// The template with this axis set to `value`.
    pub fn apply(&self, template: &ExperimentConfig, value: f64) -> ExperimentConfig {
        let mut cfg = template.clone();
        match self {
            SweepAxis::RS => cfg.features.r_s = value,
            SweepAxis::L => cfg.sensor.l = CountRange::Fixed(value as usize),
            SweepAxis::M => cfg.graph.modes = value as usize,
            SweepAxis::DisturbanceBound => {
                for d in &mut cfg.disturbances {
                    d.bound = value;
                }
            }
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub value: f64,
    pub repeat: usize,
    pub seed: u64,
    pub summary: RunSummary,
}

/// Seed of repeat `i`; repeat 0 keeps the master seed so a one-value,
/// one-repeat sweep reproduces a single run.
pub fn repeat_seed(master: u64, i: usize) -> u64 {
    if i == 0 {
        master
    } else {
        derive_seed(master, i as u64)
    }
}

/// Runs `repeats` seeds per value. Logs go to `out/<axis>_<value>_<repeat>.csv` when `out` is set.
pub fn sweep(
    template: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    repeats: usize,
    out: Option<&Path>,
) -> Result<Vec<SweepRun>> {
    let jobs: Vec<(f64, usize)> = values
        .iter()
        .flat_map(|&v| (0..repeats).map(move |r| (v, r)))
        .collect();
    jobs.par_iter()
        .map(|&(value, repeat)| {
            let mut cfg = axis.apply(template, value);
            cfg.seed = repeat_seed(template.seed, repeat);
            let summary = match out {
                Some(dir) => {
                    let path = dir.join(format!("{}_{}_{}.csv", axis.name(), value, repeat));
                    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
                    run_experiment(&cfg, Some(&mut f))?.0
                }
                None => run_experiment(&cfg, None)?.0,
            };
            Ok(SweepRun {
                value,
                repeat,
                seed: cfg.seed,
                summary,
            })
        })
        .collect()
}

/// Per-value means over repeats: `(value, steady e_x, steady |z|, steady |e_s|)`.
pub fn aggregate(runs: &[SweepRun]) -> Vec<(f64, f64, f64, f64)> {
    let mut values: Vec<f64> = Vec::new();
    for r in runs {
        if !values.iter().any(|v| v.to_bits() == r.value.to_bits()) {
            values.push(r.value);
        }
    }
    values
        .into_iter()
        .map(|v| {
            let sel: Vec<&RunSummary> = runs
                .iter()
                .filter(|r| r.value.to_bits() == v.to_bits())
                .map(|r| &r.summary)
                .collect();
            let n = sel.len() as f64;
            (
                v,
                sel.iter().map(|s| s.steady_e_x).sum::<f64>() / n,
                sel.iter().map(|s| s.steady_z_norm).sum::<f64>() / n,
                sel.iter().map(|s| s.steady_e_s_norm).sum::<f64>() / n,
            )
        })
        .collect()
}

/// Plain-text comparison table.
pub fn summary_table(axis: SweepAxis, runs: &[SweepRun]) -> String {
    let mut s = format!("{:>12} {:>14} {:>14} {:>14}\n", axis.name(), "e_x", "|z|", "|e_s|");
    for (v, ex, z, es) in aggregate(runs) {
        let _ = writeln!(s, "{v:>12} {ex:>14.6e} {z:>14.6e} {es:>14.6e}");
    }
    s
}
