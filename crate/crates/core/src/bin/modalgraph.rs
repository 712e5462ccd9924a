use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use modalgraph::graph::GraphFile;
use modalgraph::harness::experiment::teach;
use modalgraph::harness::sweep::summary_table;
use modalgraph::harness::{run_experiment, sweep, ControllerKind, ExperimentConfig, SweepAxis};
use modalgraph::plant::build_test_object;

#[derive(Parser)]
#[command(name = "modalgraph", version, about = "Modal-graph shape servoing harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; the built-in simulation setup when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    controller: Option<ControllerKind>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop experiment; writes `log.csv` and `summary.json`.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Sweep one parameter over several seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: SweepAxis,
        /// Comma-separated values; `inf` is accepted.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Record the configured target and write it as a target file.
    Teach {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "target.json")]
        out: PathBuf,
    },
    /// Build the configured modal graph and write it as a graph file.
    GraphBuild {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "graph.json")]
        out: PathBuf,
    },
}

fn load(common: &Common) -> modalgraph::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::simulation(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(kind) = common.controller {
        cfg.controller = kind;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> modalgraph::Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn execute(cli: Cli) -> modalgraph::Result<bool> {
    match cli.command {
        Command::Run { common, out } => {
            let cfg = load(&common)?;
            fs::create_dir_all(&out)?;
            let mut sink = BufWriter::new(File::create(out.join("log.csv"))?);
            let (summary, _) = run_experiment(&cfg, Some(&mut sink))?;
            write_json(&out.join("summary.json"), &summary)?;
            println!(
                "steps {} e_x {:.6e} -> {:.6e} |z| {:.6e} |e_s| {:.6e}",
                summary.steps,
                summary.initial_e_x,
                summary.steady_e_x,
                summary.steady_z_norm,
                summary.steady_e_s_norm
            );
            if let Some(reason) = &summary.aborted {
                eprintln!("aborted: {reason}");
                return Ok(false);
            }
            Ok(true)
        }
        Command::Sweep {
            common,
            axis,
            values,
            repeats,
            out,
        } => {
            let cfg = load(&common)?;
            fs::create_dir_all(&out)?;
            let runs = sweep(&cfg, axis, &values, repeats, Some(&out))?;
            write_json(&out.join("sweep.json"), &runs)?;
            print!("{}", summary_table(axis, &runs));
            let aborted = runs.iter().filter(|r| r.summary.aborted.is_some()).count();
            if aborted > 0 {
                eprintln!("{aborted} runs aborted");
                return Ok(false);
            }
            Ok(true)
        }
        Command::Teach { common, out } => {
            let cfg = load(&common)?;
            let mut plant = build_test_object(&cfg.plant)?;
            let record = teach(&mut plant, &cfg)?;
            record.save(&out)?;
            println!("{} frames written to {}", record.clouds.len(), out.display());
            Ok(true)
        }
        Command::GraphBuild { common, out } => {
            let cfg = load(&common)?;
            let graph = cfg.graph.build()?;
            println!(
                "{} nodes, {} edges, {} modes",
                graph.nodes.len(),
                graph.edges.len(),
                graph.phi.ncols()
            );
            GraphFile::new(graph).save(&out)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
