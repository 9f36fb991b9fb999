//! Argument parsing for the `dfis` binary. Every flag maps onto a
//! [`RunConfig`] key; `--config FILE` is applied first and flags override it.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::{bench_command, generate_data, solve_command, train, PipelineError, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "dfis", version, about = "Learned feedback solvers for pose, lighting and inverse kinematics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a dataset and write its manifest and observations.
    GenerateData(GenerateArgs),
    /// Train the per-stage update networks.
    Train(TrainArgs),
    /// Evaluate solvers on the test split and write a CSV report.
    Bench(BenchArgs),
    /// Solve a single observation.
    Solve(SolveArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat `key = value` file applied before the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// pose, light or ik.
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub count: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub resolution: Option<String>,
    /// Comma-separated primitives, e.g. cube,icosphere2,cylinder16.
    #[arg(long)]
    pub shapes: Option<String>,
    #[arg(long)]
    pub size: Option<String>,
    /// directional or point.
    #[arg(long)]
    pub light: Option<String>,
    #[arg(long)]
    pub joints: Option<String>,
    /// Take the IK skeleton from a BVH file.
    #[arg(long)]
    pub bvh: Option<String>,
    /// world or local.
    #[arg(long)]
    pub convention: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub stages: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub epochs: Option<String>,
    #[arg(long)]
    pub patience: Option<String>,
    #[arg(long)]
    pub batch: Option<String>,
    #[arg(long)]
    pub lr: Option<String>,
    #[arg(long)]
    pub lr_decay: Option<String>,
    /// Train one network shared by every stage.
    #[arg(long)]
    pub shared: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub data: Option<String>,
    /// Comma-separated: feedback, feedback+damping, regression, adam, lbfgs, feedback-then-lbfgs.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub stages: Option<String>,
    /// wall or none (time columns written as 0).
    #[arg(long)]
    pub timing: Option<String>,
    #[arg(long)]
    pub max_iter: Option<String>,
    #[arg(long)]
    pub opt_patience: Option<String>,
    #[arg(long)]
    pub adam_lr: Option<String>,
    #[arg(long)]
    pub lbfgs_memory: Option<String>,
    #[arg(long)]
    pub prior_weight: Option<String>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    /// Observation file (.pgm, .ppm or joint positions .txt).
    #[arg(long)]
    pub obs: Option<String>,
    /// Dataset whose task description to use.
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long)]
    pub damping: bool,
    #[arg(long)]
    pub dump_trajectory: Option<String>,
    /// learned, zero or oracle.
    #[arg(long)]
    pub update: Option<String>,
    /// Comma-separated ground truth for the oracle update.
    #[arg(long, allow_hyphen_values = true)]
    pub target: Option<String>,
    #[arg(long)]
    pub stages: Option<String>,
    /// Shape index for mixed-shape pose tasks.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub resolution: Option<String>,
}

fn build(common: &Common, pairs: Vec<(&str, Option<&String>)>) -> Result<RunConfig, PipelineError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    let head = [("task", common.task.as_ref()), ("seed", common.seed.as_ref())];
    for (k, v) in head.into_iter().chain(pairs) {
        if let Some(v) = v {
            cfg.set(k, v)?;
        }
    }
    Ok(cfg)
}

fn on(b: bool) -> Option<String> {
    b.then(|| "true".to_string())
}

/// Runs a parsed command and returns its standard output.
pub fn execute(cmd: &Command) -> Result<String, PipelineError> {
    match cmd {
        Command::GenerateData(a) => {
            let cfg = build(
                &a.common,
                vec![
                    ("count", a.count.as_ref()),
                    ("out", a.out.as_ref()),
                    ("resolution", a.resolution.as_ref()),
                    ("shapes", a.shapes.as_ref()),
                    ("size", a.size.as_ref()),
                    ("light", a.light.as_ref()),
                    ("joints", a.joints.as_ref()),
                    ("bvh", a.bvh.as_ref()),
                    ("convention", a.convention.as_ref()),
                ],
            )?;
            generate_data(&cfg)
        }
        Command::Train(a) => {
            let shared = on(a.shared);
            let cfg = build(
                &a.common,
                vec![
                    ("data", a.data.as_ref()),
                    ("stages", a.stages.as_ref()),
                    ("out", a.out.as_ref()),
                    ("epochs", a.epochs.as_ref()),
                    ("patience", a.patience.as_ref()),
                    ("batch", a.batch.as_ref()),
                    ("lr", a.lr.as_ref()),
                    ("lr_decay", a.lr_decay.as_ref()),
                    ("shared", shared.as_ref()),
                ],
            )?;
            train(&cfg)
        }
        Command::Bench(a) => {
            let cfg = build(
                &a.common,
                vec![
                    ("data", a.data.as_ref()),
                    ("mode", a.mode.as_ref()),
                    ("weights", a.weights.as_ref()),
                    ("out", a.out.as_ref()),
                    ("stages", a.stages.as_ref()),
                    ("timing", a.timing.as_ref()),
                    ("max_iter", a.max_iter.as_ref()),
                    ("opt_patience", a.opt_patience.as_ref()),
                    ("adam_lr", a.adam_lr.as_ref()),
                    ("lbfgs_memory", a.lbfgs_memory.as_ref()),
                    ("prior_weight", a.prior_weight.as_ref()),
                ],
            )?;
            bench_command(&cfg)
        }
        Command::Solve(a) => {
            let damping = on(a.damping);
            let cfg = build(
                &a.common,
                vec![
                    ("obs", a.obs.as_ref()),
                    ("data", a.data.as_ref()),
                    ("weights", a.weights.as_ref()),
                    ("damping", damping.as_ref()),
                    ("dump_trajectory", a.dump_trajectory.as_ref()),
                    ("update", a.update.as_ref()),
                    ("target", a.target.as_ref()),
                    ("stages", a.stages.as_ref()),
                    ("variant", a.variant.as_ref()),
                    ("resolution", a.resolution.as_ref()),
                ],
            )?;
            solve_command(&cfg)
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 success, 1 runtime error, 2 usage error.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(out) => {
            print!("{out}");
            if !out.ends_with('\n') {
                println!();
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["dfis", "generate-data", "--task", "moon", "--out", "/nonexistent"]), 2);
        assert_eq!(run(["dfis", "frobnicate"]), 2);
        assert_eq!(run(["dfis", "train", "--task", "pose"]), 2);
    }

    #[test]
    fn missing_dataset_is_runtime_error() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("absent");
        let out = dir.path().join("w");
        let code = run([
            "dfis",
            "train",
            "--task",
            "ik",
            "--data",
            data.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 1);
    }
}
