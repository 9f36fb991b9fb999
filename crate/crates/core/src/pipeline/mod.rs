//! Command implementations, benchmark harness and report formatting behind
//! the `dfis` binary.

mod bench;
pub mod cli;
mod config;
mod report;

pub use bench::{bench, default_adam_lr, default_fd_step, ik_prior, report_row, run_mode, BenchSettings, InstanceResult, ModeResult};
pub use config::{Mode, RunConfig, Timing, UpdateKind};
pub use report::{aggregate, fmt6, lower_median, BenchReport, ReportRow, Summary};

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::classic::StopRule;
use crate::feedback::{solve, FeedbackError, ForwardModel, OracleUpdate, SolverConfig, StageNetworks, UpdateFn, ZeroUpdate};
use crate::geometry::Vec3;
use crate::kinematics::{load_bvh, random_chain};
use crate::render::{Image, RenderError};
use crate::tasks::{
    generate_dataset, load_dataset, rebuild_samples, save_dataset, split_sizes, Dataset, ObsFile, ObsOf, Task, TaskError,
    TaskKind, TaskSpec,
};
use crate::training::{load_stage_networks, log_csv, save_stage_networks, train_shared, train_stagewise, StagePlan, TrainingError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Training(#[from] TrainingError),
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("io: {0}")]
    Io(String),
    #[error("{0}")]
    Report(String),
}

impl PipelineError {
    /// 2 for bad invocations, 1 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) | PipelineError::Config { .. } => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    move |e| PipelineError::Io(format!("{}: {e}", path.display()))
}

/// Observations that can be read back from the files the pipeline writes.
pub trait ObsIo: ObsFile + Clone + Send + Sync {
    fn read_obs(bytes: &[u8]) -> Result<Self, String>;
}

impl ObsIo for Image {
    fn read_obs(bytes: &[u8]) -> Result<Self, String> {
        Image::from_pnm(bytes).map_err(|e: RenderError| e.to_string())
    }
}

impl ObsIo for Vec<Vec3> {
    fn read_obs(bytes: &[u8]) -> Result<Self, String> {
        let text = std::str::from_utf8(bytes).map_err(|e| format!("not UTF-8 text: {e}"))?;
        crate::tasks::parse_positions(text).map_err(|e| e.to_string())
    }
}

/// Code generic over the task type, run by [`with_task`] on the task a
/// [`TaskSpec`] describes.
pub trait TaskVisitor {
    type Output;
    fn visit<T>(self, task: &T) -> Self::Output
    where
        T: Task,
        ObsOf<T>: ObsIo;
}

pub fn with_task<V: TaskVisitor>(spec: &TaskSpec, v: V) -> Result<V::Output, PipelineError> {
    Ok(match spec {
        TaskSpec::Pose { .. } => v.visit(&spec.pose_task().expect("pose spec")?),
        TaskSpec::Light { .. } => v.visit(&spec.light_task().expect("light spec")?),
        TaskSpec::Ik { .. } => v.visit(&spec.ik_task().expect("ik spec")),
    })
}

/// Task description from the configuration. IK uses the BVH skeleton when
/// given, otherwise a random chain drawn from `seed`.
pub fn task_spec(cfg: &RunConfig) -> Result<TaskSpec, PipelineError> {
    Ok(match cfg.require_task()? {
        TaskKind::Pose => TaskSpec::Pose {
            shapes: cfg.shapes.clone(),
            size: cfg.size,
            resolution: cfg.resolution,
        },
        TaskKind::Light => TaskSpec::Light {
            kind: cfg.light,
            resolution: cfg.resolution,
        },
        TaskKind::Ik => {
            let skeleton = match &cfg.bvh {
                Some(path) => {
                    let text = fs::read_to_string(path).map_err(io_err(path))?;
                    load_bvh(&text)
                        .map_err(|e| PipelineError::Parse {
                            path: path.display().to_string(),
                            msg: e.to_string(),
                        })?
                        .skeleton
                }
                None => {
                    if cfg.joints < 2 {
                        return Err(PipelineError::Usage("--joints must be at least 2".into()));
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream(u64::MAX);
                    random_chain(&mut rng, cfg.joints)
                }
            };
            TaskSpec::Ik {
                skeleton,
                convention: cfg.convention,
            }
        }
    })
}

/// Loads `manifest.txt` from `dir`, checking the task kind if one was asked
/// for.
pub fn open_dataset(cfg: &RunConfig) -> Result<Dataset, PipelineError> {
    let dir = cfg.require_path(&cfg.data, "data")?;
    if !dir.join(crate::tasks::MANIFEST).exists() {
        return Err(PipelineError::Io(format!("no dataset at {}", dir.display())));
    }
    let ds = load_dataset(dir)?;
    if let Some(kind) = cfg.task {
        if kind != ds.spec.kind() {
            return Err(PipelineError::Usage(format!(
                "--task {} but {} holds a {} dataset",
                kind.name(),
                dir.display(),
                ds.spec.kind().name()
            )));
        }
    }
    Ok(ds)
}

struct Generate<'a> {
    cfg: &'a RunConfig,
    spec: &'a TaskSpec,
}

impl TaskVisitor for Generate<'_> {
    type Output = Result<String, PipelineError>;

    fn visit<T: Task>(self, task: &T) -> Self::Output
    where
        ObsOf<T>: ObsIo,
    {
        let out = self.cfg.require_path(&self.cfg.out, "out")?;
        let samples = generate_dataset(task, self.cfg.count, self.cfg.seed)?;
        save_dataset(out, self.spec, self.cfg.seed, &samples)?;
        let (train, val, test) = split_sizes(self.cfg.count);
        Ok(format!("train={train} val={val} test={test}"))
    }
}

/// `generate-data`: writes the dataset and returns the split line.
pub fn generate_data(cfg: &RunConfig) -> Result<String, PipelineError> {
    cfg.require_path(&cfg.out, "out")?;
    let spec = task_spec(cfg)?;
    with_task(&spec, Generate { cfg, spec: &spec })?
}

pub fn stage_plan(cfg: &RunConfig, kind: TaskKind) -> StagePlan {
    StagePlan {
        stages: cfg.stages.unwrap_or(kind.default_stages()),
        epochs: cfg.epochs,
        patience: cfg.patience,
        batch_size: cfg.batch,
        lr: cfg.lr,
        lr_decay: cfg.lr_decay,
        seed: cfg.seed,
    }
}

pub const TRAIN_LOG: &str = "train_log.csv";

struct Train<'a> {
    cfg: &'a RunConfig,
    ds: Dataset,
}

impl TaskVisitor for Train<'_> {
    type Output = Result<String, PipelineError>;

    fn visit<T: Task>(self, task: &T) -> Self::Output
    where
        ObsOf<T>: ObsIo,
    {
        let out = self.cfg.require_path(&self.cfg.out, "out")?;
        let plan = stage_plan(self.cfg, task.kind());
        let samples = rebuild_samples(task, self.ds.records);
        let (nets, logs) = if self.cfg.shared {
            let (net, logs) = train_shared(task, &samples, &plan)?;
            (vec![net; plan.stages], logs)
        } else {
            let t = train_stagewise(task, &samples, &plan)?;
            (t.networks, t.logs)
        };
        save_stage_networks(out, &nets)?;
        let log_path = out.join(TRAIN_LOG);
        fs::write(&log_path, log_csv(&logs)).map_err(io_err(&log_path))?;
        Ok(format!("wrote {} stage networks to {}", nets.len(), out.display()))
    }
}

/// `train`: fits the stage networks and writes `stage{t}.dfnw` plus the
/// training log.
pub fn train(cfg: &RunConfig) -> Result<String, PipelineError> {
    cfg.require_path(&cfg.out, "out")?;
    let ds = open_dataset(cfg)?;
    let spec = ds.spec.clone();
    with_task(&spec, Train { cfg, ds })?
}

pub fn bench_settings(cfg: &RunConfig, kind: TaskKind) -> BenchSettings {
    BenchSettings {
        stages: cfg.stages,
        adam_lr: cfg.adam_lr.unwrap_or(default_adam_lr(kind)),
        lbfgs_memory: cfg.lbfgs_memory,
        stop: StopRule {
            max_iter: cfg.max_iter,
            patience: cfg.opt_patience,
            max_time: None,
        },
        prior_weight: cfg.prior_weight,
        fd_step: default_fd_step(kind),
    }
}

fn load_networks<T: Task>(task: &T, dir: &Path) -> Result<StageNetworks, PipelineError> {
    let template = task.network().map_err(TrainingError::from)?;
    Ok(StageNetworks::per_stage(load_stage_networks(dir, &template)?))
}

struct Bench<'a> {
    cfg: &'a RunConfig,
    ds: Dataset,
}

impl TaskVisitor for Bench<'_> {
    type Output = Result<String, PipelineError>;

    fn visit<T: Task>(self, task: &T) -> Self::Output
    where
        ObsOf<T>: ObsIo,
    {
        let cfg = self.cfg;
        let out = cfg.require_path(&cfg.out, "out")?;
        let nets = if cfg.modes.iter().any(|m| m.needs_weights()) {
            let dir = cfg
                .weights
                .as_ref()
                .ok_or_else(|| PipelineError::Usage("learned modes need --weights".into()))?;
            Some(load_networks(task, dir)?)
        } else {
            None
        };
        let samples = rebuild_samples(task, self.ds.records);
        let settings = bench_settings(cfg, task.kind());
        let (report, _) = bench(task, &samples, &cfg.modes, nets.as_ref(), &settings, cfg.timing)?;
        let csv = report.to_csv();
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(out, &csv).map_err(io_err(out))?;
        Ok(csv)
    }
}

/// `bench`: evaluates the test split and writes the CSV report, which is
/// also returned.
pub fn bench_command(cfg: &RunConfig) -> Result<String, PipelineError> {
    cfg.require_path(&cfg.out, "out")?;
    let ds = open_dataset(cfg)?;
    let spec = ds.spec.clone();
    with_task(&spec, Bench { cfg, ds })?
}

struct Solve<'a> {
    cfg: &'a RunConfig,
}

fn run_solve<T, U>(task: &T, update: &U, cfg: &RunConfig, stages: usize, y: &ObsOf<T>) -> Result<String, PipelineError>
where
    T: Task,
    ObsOf<T>: ObsIo,
    U: UpdateFn<T::Model>,
{
    let model = task.model(cfg.variant);
    let mut scfg = SolverConfig::new(stages).with_damping(cfg.damping);
    scfg.record_observations = cfg.dump_trajectory.is_some();
    let traj = solve(model, y, &task.initial_estimate(), update, &scfg)?;
    let mut s = String::new();
    for (t, e) in traj.energies.iter().enumerate() {
        let _ = writeln!(s, "stage {t} E_data={}", fmt6(*e));
    }
    let x: Vec<String> = traj.final_state().iter().map(|v| format!("{v}")).collect();
    let _ = writeln!(s, "x = {}", x.join(" "));
    if let Some(dir) = &cfg.dump_trajectory {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for (t, obs) in traj.observations.iter().enumerate() {
            let path = dir.join(format!("stage{t}.{}", obs.extension()));
            fs::write(&path, obs.to_bytes()).map_err(io_err(&path))?;
        }
    }
    Ok(s)
}

impl TaskVisitor for Solve<'_> {
    type Output = Result<String, PipelineError>;

    fn visit<T: Task>(self, task: &T) -> Self::Output
    where
        ObsOf<T>: ObsIo,
    {
        let cfg = self.cfg;
        if cfg.variant >= task.variant_count() {
            return Err(PipelineError::Usage(format!(
                "--variant {} out of range (task has {})",
                cfg.variant,
                task.variant_count()
            )));
        }
        let path = cfg.require_path(&cfg.obs, "obs")?;
        let bytes = fs::read(path).map_err(io_err(path))?;
        let y = <ObsOf<T>>::read_obs(&bytes).map_err(|msg| PipelineError::Parse {
            path: path.display().to_string(),
            msg,
        })?;
        let default_stages = cfg.stages.unwrap_or(task.kind().default_stages());
        match cfg.update {
            UpdateKind::Learned => {
                let dir = cfg
                    .weights
                    .as_ref()
                    .ok_or_else(|| PipelineError::Usage("--update learned needs --weights".into()))?;
                let nets = load_networks(task, dir)?;
                let stages = cfg.stages.unwrap_or(nets.networks().len());
                run_solve(task, &nets, cfg, stages, &y)
            }
            UpdateKind::Zero => run_solve(task, &ZeroUpdate, cfg, default_stages, &y),
            UpdateKind::Oracle => {
                let target = cfg
                    .target
                    .clone()
                    .ok_or_else(|| PipelineError::Usage("--update oracle needs --target".into()))?;
                if target.len() != task.model(cfg.variant).dim() {
                    return Err(PipelineError::Usage(format!(
                        "--target has {} values, estimate has {}",
                        target.len(),
                        task.model(cfg.variant).dim()
                    )));
                }
                run_solve(task, &OracleUpdate { target }, cfg, default_stages, &y)
            }
        }
    }
}

/// `solve`: runs one observation through the solver and reports the
/// per-stage data energy and the final estimate.
pub fn solve_command(cfg: &RunConfig) -> Result<String, PipelineError> {
    let spec = match cfg.data {
        Some(_) => open_dataset(cfg)?.spec,
        None => task_spec(cfg)?,
    };
    with_task(&spec, Solve { cfg })?
}
